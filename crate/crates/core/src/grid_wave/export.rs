use std::fmt::Write;

use serde::Serialize;

use super::field::WaveField;
use super::grid::Axis;
use super::polar::{mental_force, polar_decompose, quantum_potential};

/// Grid metadata written next to a wave snapshot.
#[derive(Clone, Debug, Serialize)]
pub struct WaveHeader {
    pub dims: usize,
    pub axes: Vec<Axis>,
    pub spacing: Vec<f64>,
    pub masses: Vec<f64>,
    pub h: f64,
    pub time: f64,
    pub norm: f64,
    pub nodal_floor: f64,
    pub nodal_nodes: usize,
    pub columns: Vec<String>,
}

fn columns(dims: usize) -> Vec<String> {
    let mut c: Vec<String> = (1..=dims).map(|d| format!("q_{d}")).collect();
    c.extend(["re", "im", "R", "S", "U", "nodal"].map(String::from));
    c.extend((1..=dims).map(|d| format!("g_{d}")));
    c
}

/// CSV snapshot of `ψ` with its polar parts, quantum potential and force,
/// plus the matching JSON header.
pub fn wave_csv(psi: &WaveField, time: f64) -> (String, WaveHeader) {
    let grid = psi.grid();
    let dims = grid.dims();
    let polar = polar_decompose(psi);
    let u = quantum_potential(&polar, psi.masses(), psi.h());
    let g = mental_force(&u);
    let cols = columns(dims);
    let mut out = cols.join(",");
    out.push('\n');
    for i in 0..grid.len() {
        for q in grid.point(i) {
            write!(out, "{q},").unwrap();
        }
        let z = psi.values()[i];
        write!(
            out,
            "{},{},{},{},{},{}",
            z.re,
            z.im,
            polar.amplitude[i],
            polar.phase[i],
            u.values[i],
            u.flagged[i] as u8
        )
        .unwrap();
        for c in &g.components {
            write!(out, ",{}", c[i]).unwrap();
        }
        out.push('\n');
    }
    let header = WaveHeader {
        dims,
        axes: grid.axes().to_vec(),
        spacing: (0..dims).map(|d| grid.spacing(d)).collect(),
        masses: psi.masses().to_vec(),
        h: psi.h(),
        time,
        norm: psi.norm(),
        nodal_floor: polar.floor,
        nodal_nodes: polar.nodal_count(),
        columns: cols,
    };
    (out, header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_wave::families::WaveSpec;
    use crate::grid_wave::grid::SpatialGrid;

    #[test]
    fn csv_has_header_and_one_row_per_node() {
        let g = SpatialGrid::line(-4.0, 4.0, 33).unwrap();
        let psi = WaveSpec::HarmonicGround { stiffness: 1.0 }
            .build(&g, &[1.0], 1.0)
            .unwrap();
        let (csv, header) = wave_csv(&psi, 0.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "q_1,re,im,R,S,U,nodal,g_1");
        assert_eq!(lines.len(), 34);
        assert!(lines.iter().all(|l| l.split(',').count() == 8));
        assert_eq!(header.columns.len(), 8);
        assert!(csv.ends_with('\n'));
    }
}
