//! Dense complex operator algebra on finite Hilbert spaces.
//!
//! Operators, unitaries, projectors and density matrices all share the same
//! row-major `dim × dim` storage. Values are immutable once built; every
//! operation returns a fresh value.

use std::borrow::Cow;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::exec::Execution;
use crate::tolerance::Tolerances;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "COHIST_MAX_DIM";
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Current Hilbert-space dimension cap.
pub fn max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&d| d > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square: row {row} has {len} entries, expected {dim}")]
    NotSquare { row: usize, len: usize, dim: usize },
    #[error("empty operator")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("norm violation: |‖ψ‖ − 1| = {violation:.3e} exceeds {tol:.1e}")]
    NotNormalized { violation: f64, tol: f64 },
    #[error("basis has {found} vectors for a {dim}-dimensional space")]
    BasisSize { dim: usize, found: usize },
    #[error("basis is not orthonormal: |⟨b{i}|b{j}⟩ − δ| = {violation:.3e}")]
    NotOrthonormal { i: usize, j: usize, violation: f64 },
    #[error("operator failed {kind} validation: {report}")]
    Invalid {
        kind: OperatorKind,
        report: ValidationReport,
    },
}

// ---------------------------------------------------------------------------
// Operator

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        if self.dim <= 8 {
            for row in self.data.chunks(self.dim) {
                let cells: Vec<String> = row
                    .iter()
                    .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                    .collect();
                writeln!(f, "  [{}]", cells.join(", "))?;
            }
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![ONE; dim])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op.data[i * op.dim + i] = d;
        }
        op
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let diag: Vec<C64> = diag.iter().map(|&d| C64::new(d, 0.0)).collect();
        Self::from_diagonal(&diag)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Operator { dim, data }
    }

    /// Builds from nested rows, rejecting ragged, empty or non-finite input.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != dim {
                return Err(LinalgError::NotSquare {
                    row,
                    len: r.len(),
                    dim,
                });
            }
            data.extend(r);
        }
        Self::from_vec(dim, data)
    }

    /// Builds from a row-major buffer of length `dim²`.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: k / dim,
                col: k % dim,
            });
        }
        Ok(Operator { dim, data })
    }

    /// `|ket⟩⟨bra|`.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Self {
        assert_eq!(ket.len(), bra.len(), "outer product of mismatched vectors");
        Self::from_fn(ket.len(), |i, j| ket[i] * bra[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// `max |A − I|`.
    pub fn distance_from_identity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((self.get(i, j) - target).norm_sqr());
            }
        }
        worst.sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm_sqr());
            }
        }
        worst.sqrt()
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        self.matmul_with(other, Execution::default())
    }

    pub fn matmul_with(&self, other: &Operator, exec: Execution) -> Operator {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        exec.for_each_chunk(&mut out, n, |i, row| {
            let lhs = &self.data[i * n..(i + 1) * n];
            for (k, &a) in lhs.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let rhs = &other.data[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(rhs) {
                    *o += a * b;
                }
            }
        });
        Operator { dim: n, data: out }
    }

    /// `A·B − B·A`.
    pub fn commutator(&self, other: &Operator) -> Operator {
        &self.matmul(other) - &other.matmul(self)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, v.len(), "operator/vector dimension mismatch");
        self.rows().map(|row| dot(row, v)).collect()
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "non-square nalgebra matrix");
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

/// Plain bilinear sum `Σ a_i b_i`.
fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    assert_eq!(a.len(), b.len(), "inner product of mismatched vectors");
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product `a ⊗ b`, subject to the global dimension cap.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator, LinalgError> {
    tensor_capped(a, b, max_dim())
}

pub fn tensor_capped(a: &Operator, b: &Operator, cap: usize) -> Result<Operator, LinalgError> {
    let dim = a
        .dim
        .checked_mul(b.dim)
        .ok_or(LinalgError::DimensionCap { dim: usize::MAX, cap })?;
    if dim > cap {
        return Err(LinalgError::DimensionCap { dim, cap });
    }
    let (m, n) = (a.dim, b.dim);
    let mut data = vec![ZERO; dim * dim];
    for i1 in 0..m {
        for j1 in 0..m {
            let x = a.get(i1, j1);
            if x == ZERO {
                continue;
            }
            for i2 in 0..n {
                let row = (i1 * n + i2) * dim + j1 * n;
                let brow = &b.data[i2 * n..(i2 + 1) * n];
                for (o, &y) in data[row..row + n].iter_mut().zip(brow) {
                    *o = x * y;
                }
            }
        }
    }
    Ok(Operator { dim, data })
}

/// Kronecker product of a list of factors, left to right.
pub fn tensor_all(factors: &[&Operator]) -> Result<Operator, LinalgError> {
    let (first, rest) = factors.split_first().ok_or(LinalgError::Empty)?;
    rest.iter()
        .try_fold((*first).clone(), |acc, f| tensor(&acc, f))
}

pub fn tensor_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

// ---------------------------------------------------------------------------
// States

/// Unit vector in a finite Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    entries: Vec<C64>,
}

impl StateVector {
    pub fn new(entries: Vec<C64>, tol: f64) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::Empty);
        }
        if let Some(k) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite { row: k, col: 0 });
        }
        let violation = (norm(&entries) - 1.0).abs();
        if violation > tol {
            return Err(LinalgError::NotNormalized { violation, tol });
        }
        Ok(StateVector { entries })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(entries: Vec<C64>) -> Result<Self, LinalgError> {
        let n = norm(&entries);
        if !(n.is_finite() && n > 0.0) {
            return Err(LinalgError::NotNormalized {
                violation: 1.0,
                tol: 0.0,
            });
        }
        Ok(StateVector {
            entries: entries.into_iter().map(|z| z / n).collect(),
        })
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut entries = vec![ZERO; dim];
        entries[k] = ONE;
        StateVector { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.entries, &other.entries)
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector {
            entries: tensor_vec(&self.entries, &other.entries),
        }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> Operator {
        Operator::outer(&self.entries, &self.entries)
    }
}

/// Coefficients `c_k = ⟨b_k|ψ⟩` of `state` in an orthonormal `basis`.
pub fn expansion_coefficients(
    state: &StateVector,
    basis: &[StateVector],
    tol: f64,
) -> Result<Vec<C64>, LinalgError> {
    let dim = state.dim();
    if basis.len() != dim {
        return Err(LinalgError::BasisSize {
            dim,
            found: basis.len(),
        });
    }
    for (i, b) in basis.iter().enumerate() {
        if b.dim() != dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim,
                found: b.dim(),
            });
        }
        for (j, c) in basis.iter().enumerate().skip(i) {
            let target = if i == j { ONE } else { ZERO };
            let violation = (b.inner(c) - target).norm();
            if violation > tol {
                return Err(LinalgError::NotOrthonormal { i, j, violation });
            }
        }
    }
    Ok(basis.iter().map(|b| b.inner(state)).collect())
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Hermitian,
    Unitary,
    Projector,
    Density,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Hermitian => "hermitian",
            OperatorKind::Unitary => "unitary",
            OperatorKind::Projector => "projector",
            OperatorKind::Density => "density",
        })
    }
}

/// One defining identity and how far the operator is from satisfying it.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub identity: &'static str,
    pub violation: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.violation <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub kind: OperatorKind,
    pub checks: Vec<IdentityCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }

    pub fn max_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.violation).fold(0.0, f64::max)
    }

    /// Violation recorded for the named identity, if it was checked.
    pub fn violation(&self, identity: &str) -> Option<f64> {
        self.checks
            .iter()
            .find(|c| c.identity == identity)
            .map(|c| c.violation)
    }

    pub fn into_result(self) -> Result<(), LinalgError> {
        if self.passed() {
            Ok(())
        } else {
            Err(LinalgError::Invalid {
                kind: self.kind,
                report: self,
            })
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{} {} (violation {:.3e}, tol {:.1e})",
                    c.identity,
                    if c.passed() { "ok" } else { "FAILED" },
                    c.violation,
                    c.tolerance
                )
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

pub const HERMITICITY: &str = "hermiticity";
pub const UNITARITY: &str = "unitarity";
pub const IDEMPOTENCY: &str = "idempotency";
pub const POSITIVITY: &str = "positivity";
pub const UNIT_TRACE: &str = "unit trace";

/// Checks the algebraic identities defining `kind`. Never fails; inspect the report.
pub fn validate(op: &Operator, kind: OperatorKind, tol: &Tolerances) -> ValidationReport {
    let herm = || IdentityCheck {
        identity: HERMITICITY,
        violation: op.hermiticity_defect(),
        tolerance: tol.herm,
    };
    let checks = match kind {
        OperatorKind::Hermitian => vec![herm()],
        OperatorKind::Unitary => vec![IdentityCheck {
            identity: UNITARITY,
            violation: op.adjoint().matmul(op).distance_from_identity(),
            tolerance: tol.unit,
        }],
        OperatorKind::Projector => vec![
            herm(),
            IdentityCheck {
                identity: IDEMPOTENCY,
                violation: op.matmul(op).max_abs_diff(op),
                tolerance: tol.proj,
            },
        ],
        OperatorKind::Density => {
            let h = herm();
            // Eigenvalues are only meaningful for the Hermitian part.
            let sym = (op + &op.adjoint()).scale_real(0.5);
            let min_eig = eigh(&sym).values.first().copied().unwrap_or(0.0);
            let t = op.trace();
            vec![
                h,
                IdentityCheck {
                    identity: POSITIVITY,
                    violation: (-min_eig).max(0.0),
                    tolerance: tol.psd,
                },
                IdentityCheck {
                    identity: UNIT_TRACE,
                    violation: (t - ONE).norm(),
                    tolerance: tol.norm,
                },
            ]
        }
    };
    ValidationReport { kind, checks }
}

// ---------------------------------------------------------------------------
// Hermitian eigenproblem

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: Operator,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.dim).map(|i| self.vectors.get(i, k)).collect()
    }
}

/// Hermitian eigen-decomposition; only the lower triangle of `op` is read.
pub fn eigh(op: &Operator) -> HermitianEigen {
    let eig = op.to_nalgebra().symmetric_eigen();
    let n = op.dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Operator::from_fn(n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// `exp(−i·t·H)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &Operator, t: f64) -> Operator {
    let eig = eigh(h);
    let n = h.dim;
    let phases: Vec<C64> = eig
        .values
        .iter()
        .map(|&e| C64::from_polar(1.0, -e * t))
        .collect();
    let v = &eig.vectors;
    Operator::from_fn(n, |i, j| {
        (0..n)
            .map(|k| v.get(i, k) * phases[k] * v.get(j, k).conj())
            .sum()
    })
}

// ---------------------------------------------------------------------------
// Unitary

/// An operator known to satisfy `U†U = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(Operator);

impl Unitary {
    pub fn new(op: Operator, tol: &Tolerances) -> Result<Self, LinalgError> {
        validate(&op, OperatorKind::Unitary, tol).into_result()?;
        Ok(Unitary(op))
    }

    /// Wraps an operator that is unitary by construction (tensor products,
    /// controlled sums over a decomposition). Small ones are re-checked in
    /// debug builds.
    pub(crate) fn trusted(op: Operator) -> Self {
        debug_assert!(
            op.dim > 64
                || validate(&op, OperatorKind::Unitary, &Tolerances::default()).passed(),
            "trusted operator is not unitary"
        );
        Unitary(op)
    }

    pub fn identity(dim: usize) -> Self {
        Unitary(Operator::identity(dim))
    }

    /// `exp(−i·t·H)`; `H` must be Hermitian.
    pub fn from_hamiltonian(h: &Operator, t: f64, tol: &Tolerances) -> Result<Self, LinalgError> {
        validate(h, OperatorKind::Hermitian, tol).into_result()?;
        Ok(Unitary(exp_i_hermitian(h, t)))
    }

    pub fn tensor(&self, other: &Unitary) -> Result<Self, LinalgError> {
        Ok(Unitary(tensor(&self.0, &other.0)?))
    }

    pub fn compose(&self, then: &Unitary) -> Self {
        Unitary(then.0.matmul(&self.0))
    }

    pub fn adjoint(&self) -> Self {
        Unitary(self.0.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }
}

impl AsRef<Operator> for Unitary {
    fn as_ref(&self) -> &Operator {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// Density operators

#[derive(Clone, Debug)]
enum DensityRepr {
    Pure(StateVector),
    Mixed(Operator),
}

/// Hermitian, positive semidefinite, unit-trace operator.
///
/// Pure states keep their state vector and never materialize the matrix
/// unless asked, so large pure scenarios stay cheap.
#[derive(Debug)]
pub struct DensityOperator {
    repr: DensityRepr,
    ensemble: OnceLock<Vec<(f64, Vec<C64>)>>,
}

impl Clone for DensityOperator {
    fn clone(&self) -> Self {
        DensityOperator {
            repr: self.repr.clone(),
            ensemble: OnceLock::new(),
        }
    }
}

impl PartialEq for DensityOperator {
    fn eq(&self, other: &Self) -> bool {
        match (&self.repr, &other.repr) {
            (DensityRepr::Pure(a), DensityRepr::Pure(b)) => a == b,
            _ => self.dim() == other.dim() && *self.matrix() == *other.matrix(),
        }
    }
}

impl DensityOperator {
    pub fn pure(state: StateVector) -> Self {
        DensityOperator {
            repr: DensityRepr::Pure(state),
            ensemble: OnceLock::new(),
        }
    }

    /// Validates Hermiticity, positivity and unit trace.
    pub fn mixed(op: Operator, tol: &Tolerances) -> Result<Self, LinalgError> {
        validate(&op, OperatorKind::Density, tol).into_result()?;
        Ok(DensityOperator {
            repr: DensityRepr::Mixed(op),
            ensemble: OnceLock::new(),
        })
    }

    pub(crate) fn mixed_trusted(op: Operator) -> Self {
        DensityOperator {
            repr: DensityRepr::Mixed(op),
            ensemble: OnceLock::new(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::mixed_trusted(Operator::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            DensityRepr::Pure(s) => s.dim(),
            DensityRepr::Mixed(op) => op.dim(),
        }
    }

    pub fn as_pure(&self) -> Option<&StateVector> {
        match &self.repr {
            DensityRepr::Pure(s) => Some(s),
            DensityRepr::Mixed(_) => None,
        }
    }

    pub fn matrix(&self) -> Cow<'_, Operator> {
        match &self.repr {
            DensityRepr::Pure(s) => Cow::Owned(s.projector()),
            DensityRepr::Mixed(op) => Cow::Borrowed(op),
        }
    }

    /// Weighted pure components `ρ = Σ w_k |v_k⟩⟨v_k|` with `w_k > 0`.
    pub fn ensemble(&self) -> &[(f64, Vec<C64>)] {
        self.ensemble.get_or_init(|| match &self.repr {
            DensityRepr::Pure(s) => vec![(1.0, s.entries().to_vec())],
            DensityRepr::Mixed(op) => {
                let eig = eigh(op);
                eig.values
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(k, &w)| (w, eig.vector(k)))
                    .collect()
            }
        })
    }

    /// `U ρ U†` without leaving the pure representation when possible.
    pub fn evolve(&self, u: &Operator) -> Self {
        match &self.repr {
            DensityRepr::Pure(s) => DensityOperator::pure(StateVector {
                entries: u.apply(s.entries()),
            }),
            DensityRepr::Mixed(op) => {
                DensityOperator::mixed_trusted(u.matmul(op).matmul(&u.adjoint()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn sigma_x() -> Operator {
        Operator::from_rows(vec![vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap()
    }

    #[test]
    fn identity_tensor_identity() {
        let i4 = tensor(&Operator::identity(2), &Operator::identity(2)).unwrap();
        assert_eq!(i4, Operator::identity(4));
    }

    #[test]
    fn tensor_block_structure() {
        let p = Operator::from_real_diagonal(&[1.0, 0.0]);
        let t = tensor(&p, &Operator::identity(2)).unwrap();
        assert_eq!(t, Operator::from_real_diagonal(&[1.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn sigma_x_pair_flips_both_qubits() {
        let xx = tensor(&sigma_x(), &sigma_x()).unwrap();
        let out = xx.apply(StateVector::basis(4, 0).entries());
        assert_eq!(out, StateVector::basis(4, 3).entries());
    }

    #[test]
    fn tensor_respects_cap() {
        let a = Operator::identity(8);
        let err = tensor_capped(&a, &a, 32).unwrap_err();
        assert_eq!(err, LinalgError::DimensionCap { dim: 64, cap: 32 });
        assert!(tensor_capped(&a, &a, 64).is_ok());
    }

    #[test]
    fn expansion_in_same_basis() {
        let basis = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
        let c = expansion_coefficients(&basis[0], &basis, 1e-10).unwrap();
        assert_eq!(c, vec![ONE, ZERO]);
    }

    #[test]
    fn expansion_in_x_basis() {
        let xp = StateVector::new(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], 1e-12).unwrap();
        let xm = StateVector::new(vec![c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)], 1e-12).unwrap();
        let coeffs =
            expansion_coefficients(&StateVector::basis(2, 0), &[xp, xm], 1e-10).unwrap();
        for z in coeffs {
            assert!((z - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        }
    }

    #[test]
    fn expansion_rejects_bad_bases() {
        let z = StateVector::basis(2, 0);
        assert!(matches!(
            expansion_coefficients(&z, std::slice::from_ref(&z), 1e-10),
            Err(LinalgError::BasisSize { dim: 2, found: 1 })
        ));
        assert!(matches!(
            expansion_coefficients(&z, &[z.clone(), z.clone()], 1e-10),
            Err(LinalgError::NotOrthonormal { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn projector_validation_examples() {
        let tol = Tolerances::default();
        let r = validate(&Operator::from_real_diagonal(&[1.0, 0.0]), OperatorKind::Projector, &tol);
        assert!(r.passed());
        assert_eq!(r.max_violation(), 0.0);

        let half = Operator::from_fn(2, |_, _| c(0.5));
        assert!(validate(&half, OperatorKind::Projector, &tol).passed());

        let bad = Operator::from_real_diagonal(&[1.0, 0.5]);
        let r = validate(&bad, OperatorKind::Projector, &tol);
        assert!(!r.passed());
        assert!((r.violation(IDEMPOTENCY).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn density_validation_flags_negative_eigenvalue() {
        let tol = Tolerances::default();
        let op = Operator::from_real_diagonal(&[1.5, -0.5]);
        let r = validate(&op, OperatorKind::Density, &tol);
        assert!(!r.passed());
        assert!((r.violation(POSITIVITY).unwrap() - 0.5).abs() < 1e-12);
        assert!(DensityOperator::mixed(op, &tol).is_err());
    }

    #[test]
    fn unnormalized_state_is_rejected() {
        let err = StateVector::new(vec![ONE, ONE], 1e-10).unwrap_err();
        assert!(err.to_string().contains("norm violation"));
    }

    #[test]
    fn exp_of_pauli_is_rotation() {
        let u = exp_i_hermitian(&sigma_x(), 0.3);
        assert!((u.get(0, 0) - c(0.3f64.cos())).norm() < 1e-14);
        assert!((u.get(0, 1) - C64::new(0.0, -(0.3f64.sin()))).norm() < 1e-14);
    }

    #[test]
    fn mixed_ensemble_reconstructs_density() {
        let rho = Operator::from_rows(vec![
            vec![c(0.75), C64::new(0.1, 0.2)],
            vec![C64::new(0.1, -0.2), c(0.25)],
        ])
        .unwrap();
        let d = DensityOperator::mixed(rho.clone(), &Tolerances::default()).unwrap();
        let mut back = Operator::zeros(2);
        for (w, v) in d.ensemble() {
            back = &back + &Operator::outer(v, v).scale_real(*w);
        }
        assert!(back.max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let err = Operator::from_rows(vec![vec![ONE, C64::new(f64::NAN, 0.0)], vec![ZERO, ONE]]);
        assert_eq!(err.unwrap_err(), LinalgError::NonFinite { row: 0, col: 1 });
    }
}
