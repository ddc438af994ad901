use serde::Serialize;

/// Time-stamped `(q, p)` samples of one realization.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub id: usize,
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Financial masses at each sample; empty when masses are constant.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub masses: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(id: usize) -> Self {
        Self {
            id,
            ..Self::default()
        }
    }

    pub fn push(&mut self, t: f64, q: &[f64], p: &[f64]) {
        self.times.push(t);
        self.q.push(q.to_vec());
        self.p.push(p.to_vec());
    }

    pub fn push_masses(&mut self, m: &[f64]) {
        self.masses.push(m.to_vec());
    }

    /// Market capitalization `m_j q_j` per sample, when masses were recorded.
    pub fn capitalization(&self) -> Vec<Vec<f64>> {
        self.masses
            .iter()
            .zip(&self.q)
            .map(|(m, q)| m.iter().zip(q).map(|(m, q)| m * q).collect())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    /// Price series of coordinate `d`.
    pub fn prices(&self, d: usize) -> Vec<f64> {
        self.q.iter().map(|q| q[d]).collect()
    }

    pub fn momenta(&self, d: usize) -> Vec<f64> {
        self.p.iter().map(|p| p[d]).collect()
    }
}
