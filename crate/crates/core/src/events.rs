//! Projectors as properties, and projective decompositions of the identity.
//!
//! A [`Decomposition`] is a labelled list of mutually orthogonal projectors
//! summing to the identity: the sample space of one time slot in a family.

use std::fmt;

use thiserror::Error;

use crate::linalg::{
    self, validate, LinalgError, Operator, OperatorKind, StateVector, ValidationReport, C64,
};
use crate::tolerance::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("direction must be a unit vector (norm {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("not a projector: {0}")]
    NotProjector(ValidationReport),
    #[error("projector trace {trace} is not an integer")]
    NonIntegralRank { trace: f64 },
    #[error("zero projector in decomposition (entry {index})")]
    ZeroProjector { index: usize },
    #[error("projector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{projectors} projectors but {labels} labels")]
    LabelCount { projectors: usize, labels: usize },
    #[error("invalid label {0:?}")]
    BadLabel(String),
    #[error("decomposition has no projectors")]
    Empty,
    #[error("orthogonality violation between {i} and {j}: |P{i}·P{j}| = {violation:.6e}")]
    Orthogonality { i: usize, j: usize, violation: f64 },
    #[error("completeness violation: |ΣP − I| = {violation:.6e}")]
    Completeness { violation: f64 },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Orthogonal projector onto a subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    op: Operator,
    rank: usize,
}

impl Projector {
    pub fn new(op: Operator, tol: &Tolerances) -> Result<Self, EventError> {
        let report = validate(&op, OperatorKind::Projector, tol);
        if !report.passed() {
            return Err(EventError::NotProjector(report));
        }
        let trace = op.trace().re;
        let rank = trace.round();
        if (trace - rank).abs() >= tol.proj.max(1e-9) {
            return Err(EventError::NonIntegralRank { trace });
        }
        Ok(Projector {
            op,
            rank: rank as usize,
        })
    }

    /// For operators that are projectors by construction.
    pub(crate) fn trusted(op: Operator) -> Self {
        let rank = op.trace().re.round().max(0.0) as usize;
        Projector { op, rank }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_state(state: &StateVector) -> Self {
        Projector {
            op: state.projector(),
            rank: 1,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Projector {
            op: Operator::identity(dim),
            rank: dim,
        }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn tensor(&self, other: &Projector) -> Result<Projector, EventError> {
        Ok(Projector {
            op: linalg::tensor(&self.op, &other.op)?,
            rank: self.rank * other.rank,
        })
    }

    /// `I_left ⊗ P ⊗ I_right`.
    pub fn embed(&self, left: usize, right: usize) -> Result<Projector, EventError> {
        let mut op = self.op.clone();
        if left > 1 {
            op = linalg::tensor(&Operator::identity(left), &op)?;
        }
        if right > 1 {
            op = linalg::tensor(&op, &Operator::identity(right))?;
        }
        Ok(Projector {
            op,
            rank: self.rank * left * right,
        })
    }

    /// `P ≤ Q`, tested as `P·Q = P`.
    pub fn is_below(&self, other: &Projector, tol: f64) -> bool {
        self.rank <= other.rank && self.op.matmul(&other.op).max_abs_diff(&self.op) <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpinSign {
    Plus,
    Minus,
}

impl SpinSign {
    fn factor(self) -> f64 {
        match self {
            SpinSign::Plus => 1.0,
            SpinSign::Minus => -1.0,
        }
    }
}

/// `(I ± n·σ)/2`: projector onto the ±½ eigenstate of spin along `n`.
pub fn spin_projector(direction: [f64; 3], sign: SpinSign) -> Result<Projector, EventError> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(EventError::NonUnitDirection { norm });
    }
    let [nx, ny, nz] = direction.map(|x| x * sign.factor());
    let op = Operator::from_rows(vec![
        vec![C64::new((1.0 + nz) / 2.0, 0.0), C64::new(nx / 2.0, -ny / 2.0)],
        vec![C64::new(nx / 2.0, ny / 2.0), C64::new((1.0 - nz) / 2.0, 0.0)],
    ])?;
    Ok(Projector { op, rank: 1 })
}

/// Exhaustive set of exclusive alternatives: orthogonal projectors summing to `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    dim: usize,
    projectors: Vec<Projector>,
    labels: Vec<String>,
}

/// Validates and assembles a decomposition.
pub fn make_decomposition(
    projectors: Vec<Projector>,
    labels: Vec<String>,
    tol: &Tolerances,
) -> Result<Decomposition, EventError> {
    let d = Decomposition::unchecked(projectors, labels)?;
    d.check_orthogonality(tol.orth)?;
    d.check_completeness(tol.orth)?;
    Ok(d)
}

impl Decomposition {
    pub fn new(
        projectors: Vec<Projector>,
        labels: Vec<String>,
        tol: &Tolerances,
    ) -> Result<Self, EventError> {
        make_decomposition(projectors, labels, tol)
    }

    /// Shape checks only; the algebraic conditions are the caller's responsibility.
    fn unchecked(projectors: Vec<Projector>, labels: Vec<String>) -> Result<Self, EventError> {
        let first = projectors.first().ok_or(EventError::Empty)?;
        let dim = first.dim();
        if projectors.len() != labels.len() {
            return Err(EventError::LabelCount {
                projectors: projectors.len(),
                labels: labels.len(),
            });
        }
        for (index, p) in projectors.iter().enumerate() {
            if p.dim() != dim {
                return Err(EventError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: p.dim(),
                });
            }
            if p.rank == 0 {
                return Err(EventError::ZeroProjector { index });
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() || labels[..i].contains(l) {
                return Err(EventError::BadLabel(l.clone()));
            }
        }
        Ok(Decomposition {
            dim,
            projectors,
            labels,
        })
    }

    pub(crate) fn trusted(projectors: Vec<Projector>, labels: Vec<String>) -> Self {
        let d = Self::unchecked(projectors, labels).expect("malformed trusted decomposition");
        debug_assert!(
            d.dim > 16
                || (d.check_orthogonality(1e-10).is_ok() && d.check_completeness(1e-10).is_ok()),
            "trusted decomposition is not an exhaustive set of exclusive alternatives"
        );
        d
    }

    fn check_orthogonality(&self, tol: f64) -> Result<(), EventError> {
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..self.projectors.len() {
            for j in (i + 1)..self.projectors.len() {
                let v = self.projectors[i]
                    .op
                    .matmul(&self.projectors[j].op)
                    .max_abs();
                if worst.is_none_or(|(_, _, w)| v > w) {
                    worst = Some((i, j, v));
                }
            }
        }
        match worst {
            Some((i, j, violation)) if violation > tol => {
                Err(EventError::Orthogonality { i, j, violation })
            }
            _ => Ok(()),
        }
    }

    fn check_completeness(&self, tol: f64) -> Result<(), EventError> {
        let violation = self.completeness_defect();
        if violation > tol {
            Err(EventError::Completeness { violation })
        } else {
            Ok(())
        }
    }

    /// `max |Σ P_i − I|`.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = Operator::zeros(self.dim);
        for p in &self.projectors {
            sum = &sum + &p.op;
        }
        sum.distance_from_identity()
    }

    /// The trivial decomposition `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Decomposition {
            dim,
            projectors: vec![Projector::identity(dim)],
            labels: vec!["I".to_string()],
        }
    }

    /// Rank-1 decomposition from an orthonormal basis.
    pub fn from_basis(
        basis: &[StateVector],
        labels: Vec<String>,
        tol: &Tolerances,
    ) -> Result<Self, EventError> {
        let projectors = basis.iter().map(Projector::from_state).collect();
        make_decomposition(projectors, labels, tol)
    }

    /// Computational basis `{|0⟩⟨0|, …}` labelled by `labels`.
    pub fn computational(labels: Vec<String>) -> Result<Self, EventError> {
        let dim = labels.len();
        let projectors = (0..dim)
            .map(|k| Projector::from_state(&StateVector::basis(dim, k)))
            .collect();
        Self::unchecked(projectors, labels)
    }

    /// `{[n+], [n−]}` labelled `prefix+` / `prefix-`.
    pub fn spin(direction: [f64; 3], prefix: &str) -> Result<Self, EventError> {
        let plus = spin_projector(direction, SpinSign::Plus)?;
        let minus = spin_projector(direction, SpinSign::Minus)?;
        Self::unchecked(
            vec![plus, minus],
            vec![format!("{prefix}+"), format!("{prefix}-")],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn projector(&self, i: usize) -> &Projector {
        &self.projectors[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn is_trivial(&self) -> bool {
        self.projectors.len() == 1
    }

    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self, EventError> {
        Self::unchecked(self.projectors.clone(), labels)
    }

    /// Sums the projectors in each block of `partition`; labels are joined with `+`.
    pub fn coarse_grain(&self, partition: &[Vec<usize>]) -> Result<Self, EventError> {
        let mut seen = vec![false; self.len()];
        for block in partition {
            if block.is_empty() {
                return Err(EventError::Partition("empty block".into()));
            }
            for &i in block {
                if i >= self.len() {
                    return Err(EventError::Partition(format!("index {i} out of range")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(EventError::Partition(format!("index {i} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(EventError::Partition(format!("index {missing} not covered")));
        }
        let mut projectors = Vec::with_capacity(partition.len());
        let mut labels = Vec::with_capacity(partition.len());
        for block in partition {
            let mut op = Operator::zeros(self.dim);
            let mut rank = 0;
            for &i in block {
                op = &op + &self.projectors[i].op;
                rank += self.projectors[i].rank;
            }
            projectors.push(Projector { op, rank });
            labels.push(
                block
                    .iter()
                    .map(|&i| self.labels[i].as_str())
                    .collect::<Vec<_>>()
                    .join("+"),
            );
        }
        Self::unchecked(projectors, labels)
    }

    /// `I_left ⊗ D ⊗ I_right`, same labels.
    pub fn embed(&self, left: usize, right: usize) -> Result<Self, EventError> {
        let projectors = self
            .projectors
            .iter()
            .map(|p| p.embed(left, right))
            .collect::<Result<Vec<_>, _>>()?;
        Self::unchecked(projectors, self.labels.clone())
    }

    /// Product decomposition `{P_i ⊗ Q_j}` on the tensor-product space.
    pub fn tensor(&self, other: &Decomposition) -> Result<Self, EventError> {
        let mut projectors = Vec::with_capacity(self.len() * other.len());
        let mut labels = Vec::with_capacity(self.len() * other.len());
        for (p, a) in self.projectors.iter().zip(&self.labels) {
            for (q, b) in other.projectors.iter().zip(&other.labels) {
                projectors.push(p.tensor(q)?);
                labels.push(format!("{a}*{b}"));
            }
        }
        Self::unchecked(projectors, labels)
    }

    /// Index of the member equal to `op`, if any.
    pub fn position_of(&self, op: &Operator, tol: f64) -> Option<usize> {
        self.projectors
            .iter()
            .position(|p| p.op.max_abs_diff(op) <= tol)
    }
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels.join(", "))
    }
}

/// Projector `I − Σ P_i` completing a set of orthogonal projectors.
pub fn complement(members: &[&Projector], dim: usize) -> Projector {
    let mut op = Operator::identity(dim);
    let mut rank = dim;
    for p in members {
        op = &op - &p.op;
        rank -= p.rank;
    }
    Projector { op, rank }
}

pub(crate) fn is_identity(op: &Operator, tol: f64) -> bool {
    op.distance_from_identity() <= tol
}
