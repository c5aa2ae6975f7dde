use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Orthonormality and measurability threshold.
    pub orth: f64,
    /// Relative singular value threshold for kernels and ranks.
    pub rank: f64,
    /// Relative change that stops power iteration.
    pub iter: f64,
    pub max_iter: usize,
    /// Relative threshold for subspace invariance tests.
    pub inv: f64,
    /// Relative threshold for support membership.
    pub supp: f64,
    /// Relative tolerance defining the peak set of |E(uw)|.
    pub peak: f64,
    /// Largest principal-angle sine accepted as containment.
    pub angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            orth: 1e-10,
            rank: 1e-10,
            iter: 1e-12,
            max_iter: 10_000,
            inv: 1e-8,
            supp: 1e-12,
            peak: 1e-9,
            angle: 1e-8,
        }
    }
}

/// Everything an evaluation needs besides its operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol: Tolerances,
    /// Seed for power-iteration starting vectors.
    pub seed: u64,
    /// Largest exponent of the dyadic m-grid `1, 2, 4, ..., 2^m_max_exp`.
    pub m_max_exp: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol: Tolerances::default(),
            seed: 0,
            m_max_exp: 14,
        }
    }
}

impl Settings {
    pub fn m_grid(&self) -> Vec<u64> {
        (0..=self.m_max_exp).map(|k| 1u64 << k).collect()
    }
}
