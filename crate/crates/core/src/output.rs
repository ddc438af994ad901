//! Plain CSV/JSON writers shared by the run driver.
//!
//! CSV uses `.` as decimal separator, a header row and newline-terminated
//! records. Floats are printed with Rust's shortest round-trip formatting, so
//! identical values always produce identical bytes.

use std::fmt::Write;

use crate::trajectory::Trajectory;

#[derive(Clone, Debug)]
pub struct Csv {
    preamble: Vec<String>,
    columns: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            preamble: Vec::new(),
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            body: String::new(),
        }
    }

    /// A `# ...` metadata line written before the header row.
    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.preamble.push(line.into());
        self
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns.len());
        let mut first = true;
        for v in values {
            if !first {
                self.body.push(',');
            }
            first = false;
            write!(self.body, "{v}").unwrap();
        }
        self.body.push('\n');
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in &self.preamble {
            out.push_str("# ");
            out.push_str(p);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        out.push_str(&self.body);
        out
    }
}

/// Long-format trajectory table: `id, t, q_1..q_n, p_1..p_n`.
pub fn trajectories_csv(trajectories: &[Trajectory], dims: usize) -> Csv {
    let mut cols = vec!["id".to_string(), "t".to_string()];
    cols.extend((1..=dims).map(|d| format!("q_{d}")));
    cols.extend((1..=dims).map(|d| format!("p_{d}")));
    let mut csv = Csv::new(&cols);
    let mut row = Vec::with_capacity(cols.len());
    for tr in trajectories {
        for k in 0..tr.len() {
            row.clear();
            row.push(tr.id as f64);
            row.push(tr.times[k]);
            row.extend_from_slice(&tr.q[k]);
            row.extend_from_slice(&tr.p[k]);
            csv.row(&row);
        }
    }
    csv
}
