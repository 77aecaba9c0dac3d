//! Histories, chain operators and the decoherence functional.
//!
//! A [`Family`] fixes one decomposition per time slot together with the
//! dynamics and the initial state at `t0`. Its histories are all index
//! tuples of the Cartesian product, ordered lexicographically with the last
//! slot varying fastest. The decoherence matrix
//!
//! ```text
//! D(α, β) = Tr[ K(α) ρ0 K(β)† ],   K(α) = P_αn U(tn, tn−1) ⋯ P_α1 U(t1, t0)
//! ```
//!
//! is Hermitian, positive semidefinite and has unit trace; its diagonal gives
//! the history weights, which are probabilities only when the off-diagonal
//! entries vanish.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::events::Decomposition;
use crate::exec::Execution;
use crate::linalg::{
    eigh, inner, DensityOperator, LinalgError, Operator, StateVector, Unitary, C64, ZERO,
};
use crate::tolerance::{default_consistency_tol, Tolerances};

/// Largest family, in histories, for which a decoherence matrix is formed.
pub const MAX_HISTORIES: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("{what} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("family needs at least one time slot")]
    NoSlots,
    #[error("dynamics needs at least one segment")]
    NoSegments,
    #[error("segment {index} has invalid duration {duration}")]
    InvalidDuration { index: usize, duration: f64 },
    #[error("slot step {step} outside 1..={steps}")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("slot steps must be strictly increasing ({prev} then {next})")]
    StepsNotIncreasing { prev: usize, next: usize },
    #[error("history has {found} indices, family has {expected} slots")]
    HistoryLength { expected: usize, found: usize },
    #[error("index {index} out of range for slot {slot} ({len} members)")]
    IndexOutOfRange { slot: usize, index: usize, len: usize },
    #[error("family has {count} histories, above the limit of {limit}")]
    TooManyHistories { count: usize, limit: usize },
    #[error(
        "inconsistent family: |D({alpha}, {beta})| = {magnitude:.6e} exceeds tolerance {tol:.3e}"
    )]
    InconsistentFamily {
        alpha: String,
        beta: String,
        magnitude: f64,
        tol: f64,
    },
    #[error("outcome {history} has weight {weight:.3e}, too small to condition on")]
    NullOutcome { history: String, weight: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

// ---------------------------------------------------------------------------
// Dynamics

#[derive(Clone, Debug)]
pub struct Segment {
    pub duration: f64,
    pub unitary: Arc<Unitary>,
}

/// Piecewise unitary evolution over the grid `t0 = 0 < t1 < … < tm`.
///
/// Segment `k` (1-based step `k`) carries the state from `t(k−1)` to `t(k)`.
#[derive(Clone, Debug)]
pub struct Dynamics {
    dim: usize,
    segments: Vec<Segment>,
}

impl Dynamics {
    pub fn new(segments: Vec<(f64, Unitary)>) -> Result<Self, HistoryError> {
        let dim = segments.first().ok_or(HistoryError::NoSegments)?.1.dim();
        let mut out = Vec::with_capacity(segments.len());
        for (index, (duration, u)) in segments.into_iter().enumerate() {
            if !(duration.is_finite() && duration >= 0.0) {
                return Err(HistoryError::InvalidDuration { index, duration });
            }
            if u.dim() != dim {
                return Err(HistoryError::DimensionMismatch {
                    what: format!("segment {index}"),
                    expected: dim,
                    found: u.dim(),
                });
            }
            out.push(Segment {
                duration,
                unitary: Arc::new(u),
            });
        }
        Ok(Dynamics { dim, segments: out })
    }

    /// `steps` unit-duration identity segments.
    pub fn identity(dim: usize, steps: usize) -> Self {
        let u = Arc::new(Unitary::identity(dim));
        Dynamics {
            dim,
            segments: (0..steps.max(1))
                .map(|_| Segment {
                    duration: 1.0,
                    unitary: u.clone(),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Grid times `t0 = 0, t1, …, tm`.
    pub fn times(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        for s in &self.segments {
            t.push(t.last().unwrap() + s.duration);
        }
        t
    }

    /// Ordered product of the segment unitaries carrying `t(from)` to `t(to)`.
    pub fn propagator(&self, from: usize, to: usize) -> Operator {
        let mut out = Operator::identity(self.dim);
        for s in &self.segments[from..to] {
            out = s.unitary.as_operator().matmul(&out);
        }
        out
    }

    fn propagate(&self, from: usize, to: usize, v: &[C64]) -> Vec<C64> {
        let mut v = v.to_vec();
        for s in &self.segments[from..to] {
            v = s.unitary.as_operator().apply(&v);
        }
        v
    }

    /// The dynamics from step `from` onwards, re-based at `t0 = 0`.
    pub fn suffix(&self, from: usize) -> Result<Self, HistoryError> {
        if from >= self.segments.len() {
            return Err(HistoryError::StepOutOfRange {
                step: from,
                steps: self.segments.len(),
            });
        }
        Ok(Dynamics {
            dim: self.dim,
            segments: self.segments[from..].to_vec(),
        })
    }

    /// Same grid and entrywise-identical unitaries.
    pub fn same_as(&self, other: &Dynamics) -> bool {
        self.dim == other.dim
            && self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                a.duration == b.duration
                    && (Arc::ptr_eq(&a.unitary, &b.unitary) || a.unitary == b.unitary)
            })
    }
}

// ---------------------------------------------------------------------------
// Families and histories

/// One projector index per slot of a family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    pub indices: Vec<usize>,
}

impl History {
    pub fn new(indices: Vec<usize>) -> Self {
        History { indices }
    }
}

#[derive(Clone, Debug)]
pub struct Slot {
    /// Grid step `k ≥ 1`, i.e. time `t(k)`.
    pub step: usize,
    pub decomposition: Arc<Decomposition>,
}

impl Slot {
    pub fn new(step: usize, decomposition: Arc<Decomposition>) -> Self {
        Slot {
            step,
            decomposition,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Family {
    slots: Vec<Slot>,
    dynamics: Arc<Dynamics>,
    initial: Arc<DensityOperator>,
}

impl Family {
    pub fn new(
        slots: Vec<Slot>,
        dynamics: Arc<Dynamics>,
        initial: Arc<DensityOperator>,
    ) -> Result<Self, HistoryError> {
        if slots.is_empty() {
            return Err(HistoryError::NoSlots);
        }
        let dim = dynamics.dim();
        if initial.dim() != dim {
            return Err(HistoryError::DimensionMismatch {
                what: "initial state".into(),
                expected: dim,
                found: initial.dim(),
            });
        }
        let mut prev = 0;
        for (k, slot) in slots.iter().enumerate() {
            if slot.step == 0 || slot.step > dynamics.steps() {
                return Err(HistoryError::StepOutOfRange {
                    step: slot.step,
                    steps: dynamics.steps(),
                });
            }
            if slot.step <= prev {
                return Err(HistoryError::StepsNotIncreasing {
                    prev,
                    next: slot.step,
                });
            }
            prev = slot.step;
            if slot.decomposition.dim() != dim {
                return Err(HistoryError::DimensionMismatch {
                    what: format!("decomposition at slot {k}"),
                    expected: dim,
                    found: slot.decomposition.dim(),
                });
            }
        }
        Ok(Family {
            slots,
            dynamics,
            initial,
        })
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn dynamics(&self) -> &Arc<Dynamics> {
        &self.dynamics
    }

    pub fn initial(&self) -> &Arc<DensityOperator> {
        &self.initial
    }

    pub fn steps(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.step).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        let grid = self.dynamics.times();
        self.slots.iter().map(|s| grid[s.step]).collect()
    }

    /// Number of histories (product of slot sizes), saturating.
    pub fn len(&self) -> usize {
        self.slots
            .iter()
            .fold(1usize, |acc, s| acc.saturating_mul(s.decomposition.len()))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// History at lexicographic position `flat`.
    pub fn history(&self, mut flat: usize) -> History {
        let mut indices = vec![0; self.slots.len()];
        for (k, slot) in self.slots.iter().enumerate().rev() {
            let n = slot.decomposition.len();
            indices[k] = flat % n;
            flat /= n;
        }
        History { indices }
    }

    pub fn histories(&self) -> impl Iterator<Item = History> + '_ {
        (0..self.len()).map(|i| self.history(i))
    }

    pub fn position(&self, h: &History) -> Result<usize, HistoryError> {
        self.check(h)?;
        Ok(self
            .slots
            .iter()
            .zip(&h.indices)
            .fold(0, |acc, (s, &i)| acc * s.decomposition.len() + i))
    }

    pub fn check(&self, h: &History) -> Result<(), HistoryError> {
        if h.indices.len() != self.slots.len() {
            return Err(HistoryError::HistoryLength {
                expected: self.slots.len(),
                found: h.indices.len(),
            });
        }
        for (slot, (s, &index)) in self.slots.iter().zip(&h.indices).enumerate() {
            if index >= s.decomposition.len() {
                return Err(HistoryError::IndexOutOfRange {
                    slot,
                    index,
                    len: s.decomposition.len(),
                });
            }
        }
        Ok(())
    }

    /// `(a, b, c)` from the slot labels.
    pub fn label(&self, h: &History) -> String {
        let parts: Vec<&str> = self
            .slots
            .iter()
            .zip(&h.indices)
            .map(|(s, &i)| s.decomposition.label(i))
            .collect();
        format!("({})", parts.join(", "))
    }

    /// Replaces the decomposition at slot `k`.
    pub fn with_slot(&self, k: usize, decomposition: Arc<Decomposition>) -> Result<Self, HistoryError> {
        let mut slots = self.slots.clone();
        slots[k].decomposition = decomposition;
        Family::new(slots, self.dynamics.clone(), self.initial.clone())
    }

    /// The first `k` slots with the same dynamics and initial state.
    pub fn prefix(&self, k: usize) -> Result<Self, HistoryError> {
        Family::new(
            self.slots[..k.min(self.slots.len())].to_vec(),
            self.dynamics.clone(),
            self.initial.clone(),
        )
    }

    /// Slots `k..` restarted from `initial` placed at the time of slot `k − 1`.
    pub fn tail(&self, k: usize, initial: Arc<DensityOperator>) -> Result<Self, HistoryError> {
        if k == 0 || k >= self.slots.len() {
            return Err(HistoryError::NoSlots);
        }
        let origin = self.slots[k - 1].step;
        let dynamics = Arc::new(self.dynamics.suffix(origin)?);
        let slots = self.slots[k..]
            .iter()
            .map(|s| Slot::new(s.step - origin, s.decomposition.clone()))
            .collect();
        Family::new(slots, dynamics, initial)
    }

    /// Same dimension, grid steps, dynamics and initial state.
    pub fn same_setting(&self, other: &Family) -> bool {
        self.dim() == other.dim()
            && self.steps() == other.steps()
            && (Arc::ptr_eq(&self.dynamics, &other.dynamics)
                || self.dynamics.same_as(&other.dynamics))
            && (Arc::ptr_eq(&self.initial, &other.initial) || self.initial == other.initial)
    }
}

/// `K(α) = P_αn U(tn, tn−1) ⋯ P_α1 U(t1, t0)`.
pub fn chain_operator(h: &History, f: &Family) -> Result<Operator, HistoryError> {
    f.check(h)?;
    let mut k = Operator::identity(f.dim());
    let mut step = 0;
    for (slot, &i) in f.slots.iter().zip(&h.indices) {
        k = f.dynamics.propagator(step, slot.step).matmul(&k);
        k = slot.decomposition.projector(i).op().matmul(&k);
        step = slot.step;
    }
    Ok(k)
}

// ---------------------------------------------------------------------------
// Decoherence matrix

/// Hermitian matrix `D(α, β)` over the histories of a family.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceMatrix {
    n: usize,
    entries: Vec<C64>,
    labels: Vec<String>,
}

impl DecoherenceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, alpha: usize, beta: usize) -> C64 {
        self.entries[alpha * self.n + beta]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Real parts of the diagonal: the history weights.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.get(a, a).re).collect()
    }

    pub fn weight_sum(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in a..self.n {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let op = Operator::from_vec(self.n, self.entries.clone()).expect("finite entries");
        eigh(&op).values.first().copied().unwrap_or(0.0)
    }

    pub fn to_operator(&self) -> Operator {
        Operator::from_vec(self.n, self.entries.clone()).expect("finite entries")
    }

    /// Largest off-diagonal magnitude under `condition` and the first pair attaining it.
    pub fn max_off_diagonal(&self, condition: Condition) -> (f64, Option<(usize, usize)>) {
        let mut best = (0.0, None);
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                let z = self.get(a, b);
                let m = match condition {
                    Condition::Medium => z.norm(),
                    Condition::Weak => z.re.abs(),
                };
                if best.1.is_none() || m > best.0 {
                    best = (m, Some((a, b)));
                }
            }
        }
        best
    }

    /// `|D(α,β)| / √(D(α,α) D(β,β))`, zero when either weight vanishes.
    pub fn normalized_coherence(&self, alpha: usize, beta: usize) -> f64 {
        let w = (self.get(alpha, alpha).re * self.get(beta, beta).re).max(0.0).sqrt();
        if w == 0.0 {
            0.0
        } else {
            self.get(alpha, beta).norm() / w
        }
    }

    /// Entrywise maximum difference; `None` when sizes differ.
    pub fn max_abs_diff(&self, other: &DecoherenceMatrix) -> Option<f64> {
        (self.n == other.n).then(|| {
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
    }
}

pub fn decoherence_matrix(f: &Family) -> Result<DecoherenceMatrix, HistoryError> {
    decoherence_matrix_with(f, Execution::default())
}

/// Evaluates `D(α,β) = Σ_k w_k ⟨K(β)v_k | K(α)v_k⟩` over the pure components
/// `ρ0 = Σ_k w_k |v_k⟩⟨v_k|`, branching state vectors slot by slot.
pub fn decoherence_matrix_with(f: &Family, exec: Execution) -> Result<DecoherenceMatrix, HistoryError> {
    let n = f.len();
    if n > MAX_HISTORIES {
        return Err(HistoryError::TooManyHistories {
            count: n,
            limit: MAX_HISTORIES,
        });
    }
    let ensemble = f.initial.ensemble();
    let branches: Vec<Vec<Vec<C64>>> = ensemble
        .iter()
        .map(|(_, v)| branch_vectors(f, v, exec))
        .collect();
    let weights: Vec<f64> = ensemble.iter().map(|(w, _)| *w).collect();

    // Upper triangle including the diagonal, one row per task.
    let rows: Vec<Vec<C64>> = exec.map(n, |a| {
        (a..n)
            .map(|b| {
                branches
                    .iter()
                    .zip(&weights)
                    .map(|(vs, &w)| inner(&vs[b], &vs[a]) * w)
                    .sum()
            })
            .collect()
    });
    let mut entries = vec![ZERO; n * n];
    for (a, row) in rows.into_iter().enumerate() {
        for (off, z) in row.into_iter().enumerate() {
            let b = a + off;
            if a == b {
                entries[a * n + a] = C64::new(z.re, 0.0);
            } else {
                entries[a * n + b] = z;
                entries[b * n + a] = z.conj();
            }
        }
    }
    let labels = f.histories().map(|h| f.label(&h)).collect();
    Ok(DecoherenceMatrix { n, entries, labels })
}

/// `K(α)|v⟩` for every history, in lexicographic order.
fn branch_vectors(f: &Family, v: &[C64], exec: Execution) -> Vec<Vec<C64>> {
    let mut level = vec![v.to_vec()];
    let mut step = 0;
    for slot in &f.slots {
        let d = &slot.decomposition;
        let from = step;
        let parents = std::mem::take(&mut level);
        let children: Vec<Vec<Vec<C64>>> = exec.map(parents.len(), |i| {
            let p = &parents[i];
            if p.iter().all(|z| *z == ZERO) {
                return vec![p.clone(); d.len()];
            }
            let moved = f.dynamics.propagate(from, slot.step, p);
            d.projectors().iter().map(|q| q.op().apply(&moved)).collect()
        });
        level = children.into_iter().flatten().collect();
        step = slot.step;
    }
    level
}

// ---------------------------------------------------------------------------
// Consistency and probabilities

/// Which off-diagonal part must vanish.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `D(α,β) = 0` for `α ≠ β`.
    #[default]
    Medium,
    /// `Re D(α,β) = 0` for `α ≠ β`.
    Weak,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Medium => "medium",
            Condition::Weak => "weak",
        })
    }
}

/// Threshold and condition for consistency decisions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConsistencyOptions {
    /// Absolute threshold on off-diagonal magnitudes; `None` means `1e-8 × N`.
    pub tol: Option<f64>,
    pub condition: Condition,
}

impl ConsistencyOptions {
    pub fn with_tol(tol: f64) -> Self {
        ConsistencyOptions {
            tol: Some(tol),
            condition: Condition::Medium,
        }
    }

    pub fn resolve(&self, histories: usize) -> f64 {
        self.tol.unwrap_or_else(|| default_consistency_tol(histories))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub condition: Condition,
    pub tol: f64,
    pub max_off_diagonal: f64,
    /// First `(α, β)`, `α < β`, attaining the maximum.
    pub witness: Option<(usize, usize)>,
}

pub fn is_consistent(d: &DecoherenceMatrix, opts: &ConsistencyOptions) -> ConsistencyReport {
    let tol = opts.resolve(d.len());
    let (max_off_diagonal, witness) = d.max_off_diagonal(opts.condition);
    ConsistencyReport {
        consistent: max_off_diagonal <= tol,
        condition: opts.condition,
        tol,
        max_off_diagonal,
        witness,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryProbability {
    pub label: String,
    pub probability: f64,
}

/// Diagonal weights clamped to `[0, 1]`; refuses inconsistent families.
pub fn probabilities(
    d: &DecoherenceMatrix,
    opts: &ConsistencyOptions,
) -> Result<Vec<HistoryProbability>, HistoryError> {
    let report = is_consistent(d, opts);
    if !report.consistent {
        let (a, b) = report.witness.expect("inconsistency needs a witness pair");
        return Err(HistoryError::InconsistentFamily {
            alpha: d.labels[a].clone(),
            beta: d.labels[b].clone(),
            magnitude: report.max_off_diagonal,
            tol: report.tol,
        });
    }
    Ok(d.labels
        .iter()
        .zip(d.diagonal())
        .map(|(label, w)| HistoryProbability {
            label: label.clone(),
            probability: w.clamp(0.0, 1.0),
        })
        .collect())
}

/// Diagonal weights without any consistency requirement. Not probabilities
/// unless the family is consistent.
pub fn formal_weights(d: &DecoherenceMatrix) -> Vec<HistoryProbability> {
    d.labels
        .iter()
        .zip(d.diagonal())
        .map(|(label, w)| HistoryProbability {
            label: label.clone(),
            probability: w,
        })
        .collect()
}

/// `ρ' = K(h) ρ0 K(h)† / Tr[K(h) ρ0 K(h)†]`, the state at the time of the last slot.
pub fn condition_on_outcome(
    h: &History,
    f: &Family,
    tol: &Tolerances,
) -> Result<DensityOperator, HistoryError> {
    f.check(h)?;
    let mut step = 0;
    let mut components: Vec<(f64, Vec<C64>)> = f.initial.ensemble().to_vec();
    for (slot, &i) in f.slots.iter().zip(&h.indices) {
        let p = slot.decomposition.projector(i).op();
        for (_, v) in components.iter_mut() {
            *v = p.apply(&f.dynamics.propagate(step, slot.step, v));
        }
        step = slot.step;
    }
    let weight: f64 = components
        .iter()
        .map(|(w, v)| w * v.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    if weight <= tol.null {
        return Err(HistoryError::NullOutcome {
            history: f.label(h),
            weight,
        });
    }
    if f.initial.as_pure().is_some() {
        let (_, v) = components.pop().expect("pure state has one component");
        return Ok(DensityOperator::pure(StateVector::normalized(v)?));
    }
    let mut rho = Operator::zeros(f.dim());
    for (w, v) in &components {
        rho = &rho + &Operator::outer(v, v).scale_real(w / weight);
    }
    Ok(DensityOperator::mixed_trusted(rho))
}
