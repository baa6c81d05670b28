//! Dense complex tensors, matrix factorizations and tensor-network contraction.

mod linalg;
mod network;
mod tensor;

pub use linalg::{
    adjoint, eigenvalues, eigh, haar_unitary, identity, kron, mat_from_row_major, mat_to_row_major, matmul_into,
    matmul_mat, operator_norm, polar_unitary, qr_r, singular_values, svd, unitarity_residual, Spectrum, SpectrumKind,
    Svd, CLIP_RELATIVE,
};
pub use network::{ContractionPlan, Label, TensorNetwork};
pub use tensor::{contract, DenseTensor};

pub use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Environment variable overriding the default memory budget, in bytes.
pub const BUDGET_ENV: &str = "RTM_MEMORY_BUDGET_BYTES";

const BYTES_PER_ENTRY: u128 = 16;

/// Upper bound on the size of any single dense object an operation may allocate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_bytes: u128,
}

impl Default for Budget {
    /// 2^26 complex amplitudes.
    fn default() -> Self {
        Self { max_bytes: (1u128 << 26) * BYTES_PER_ENTRY }
    }
}

impl Budget {
    pub fn from_bytes(max_bytes: u128) -> Self {
        Self { max_bytes }
    }

    /// Default budget, overridden by `RTM_MEMORY_BUDGET_BYTES` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u128>()
                .map(Self::from_bytes)
                .map_err(|_| Error::Config(format!("{BUDGET_ENV}={v:?} is not a byte count"))),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn max_elements(&self) -> f64 {
        (self.max_bytes / BYTES_PER_ENTRY) as f64
    }

    pub fn check_elements(&self, elements: f64, what: &str) -> Result<()> {
        if elements > self.max_elements() {
            return Err(Error::Resource {
                what: what.to_string(),
                required_bytes: (elements * BYTES_PER_ENTRY as f64) as u128,
                budget_bytes: self.max_bytes,
            });
        }
        Ok(())
    }
}

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Deterministic seed derived from a parent seed and a key (SplitMix64 mixing).
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    key.iter().fold(mix(seed), |acc, &k| mix(acc ^ mix(k)))
}
