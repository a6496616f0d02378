/// Numerical tolerances used when validating operators.
///
/// `eig_per_dim` is scaled by the operator dimension, so a 16x16 problem
/// accepts a spectral residual of `16 * eig_per_dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub unitary: f64,
    pub psd: f64,
    pub eig_per_dim: f64,
}

impl Tolerances {
    pub fn eig(&self, dim: usize) -> f64 {
        self.eig_per_dim * dim as f64
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-9,
            trace: 1e-9,
            unitary: 1e-9,
            psd: 1e-9,
            eig_per_dim: 1e-10,
        }
    }
}

/// Threshold on `(1/2) Tr|R'_S|` above which a correlation counts as detected.
pub const DETECTION_THRESHOLD: f64 = 1e-9;
