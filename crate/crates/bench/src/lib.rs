//! Shared inputs for the criterion benchmarks.

use pilotwave::grid_wave::{Axis, SpatialGrid, WaveField, WaveSpec};

pub fn gaussian_line(n: usize) -> WaveField {
    WaveSpec::Gaussian {
        center: vec![0.0],
        width: vec![1.0],
        momentum: vec![0.5],
    }
    .build(&SpatialGrid::line(-12.0, 12.0, n).unwrap(), &[1.0], 1.0)
    .unwrap()
}

pub fn entangled_plane(n: usize) -> WaveField {
    let axis = Axis::new(-5.0, 5.0, n);
    WaveSpec::Entangled2d {
        coupling: 1.0,
        envelope: 1.0,
    }
    .build(&SpatialGrid::plane(axis.clone(), axis).unwrap(), &[1.0, 1.0], 1.0)
    .unwrap()
}
