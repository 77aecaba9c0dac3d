use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every validation in the crate.
///
/// All comparisons are absolute and use the largest entrywise modulus of the
/// defect matrix (for example `max |P² − P|` for idempotency).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// State norms and density traces.
    pub norm: f64,
    /// Hermiticity, `A = A†`.
    pub herm: f64,
    /// Orthonormality of bases, pairwise orthogonality and completeness of decompositions.
    pub orth: f64,
    /// Lowest admissible eigenvalue is `-psd`.
    pub psd: f64,
    /// `U†U = I`.
    pub unit: f64,
    /// Projector idempotency and integral trace.
    pub proj: f64,
    /// Commutator norms when deciding compatibility.
    pub comm: f64,
    /// Weights at or below this count as impossible outcomes.
    pub null: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: 1e-10,
            herm: 1e-10,
            orth: 1e-10,
            psd: 1e-9,
            unit: 1e-10,
            proj: 1e-10,
            comm: 1e-10,
            null: 1e-12,
        }
    }
}

/// Partial tolerance overrides, as they appear in scenario files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null: Option<f64>,
    /// Consistency threshold on off-diagonal decoherence entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<f64>,
}

impl ToleranceOverrides {
    pub fn is_empty(&self) -> bool {
        *self == ToleranceOverrides::default()
    }

    pub fn apply(&self, base: Tolerances) -> Tolerances {
        Tolerances {
            norm: self.norm.unwrap_or(base.norm),
            herm: self.herm.unwrap_or(base.herm),
            orth: self.orth.unwrap_or(base.orth),
            psd: self.psd.unwrap_or(base.psd),
            unit: self.unit.unwrap_or(base.unit),
            proj: self.proj.unwrap_or(base.proj),
            comm: self.comm.unwrap_or(base.comm),
            null: self.null.unwrap_or(base.null),
        }
    }
}

/// Default consistency threshold for a family with `histories` members.
pub fn default_consistency_tol(histories: usize) -> f64 {
    1e-8 * histories.max(1) as f64
}
