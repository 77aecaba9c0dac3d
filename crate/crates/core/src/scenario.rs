//! JSON scenario files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. Large operators can be written structurally:
//!
//! ```json
//! {"rows": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]}
//! {"identity": 4}
//! {"tensor": [A, B, ...]}                  // A ⊗ B ⊗ ...
//! {"product": [A, B, ...]}                 // A · B · ...
//! {"controlled": [{"control": P, "target": T}, ...]}   // Σ P ⊗ T
//! ```
//!
//! Dense `rows` leaves are validated in full. Composite nodes are validated
//! through their parts: a tensor product of unitaries is unitary, and a
//! controlled sum over an orthogonal resolution of the identity is unitary
//! when every target is. This keeps loading cheap at large dimension.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{make_decomposition, Decomposition, Projector};
use crate::histories::{ConsistencyOptions, Dynamics, Family, Slot};
use crate::linalg::{
    max_dim, tensor, tensor_vec, validate, DensityOperator, LinalgError, Operator, OperatorKind,
    StateVector, Unitary, C64,
};
use crate::tolerance::{ToleranceOverrides, Tolerances};

pub const FORMAT_VERSION: u32 = 1;

/// `[re, im]`.
pub type Complex = [f64; 2];
/// Row-major complex matrix.
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpExpr {
    Rows(Matrix),
    Identity(usize),
    Tensor(Vec<OpExpr>),
    Product(Vec<OpExpr>),
    Controlled(Vec<ControlTerm>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlTerm {
    pub control: OpExpr,
    pub target: OpExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    State(Vec<Complex>),
    /// Tensor product of the listed state vectors.
    Product(Vec<Vec<Complex>>),
    Density(OpExpr),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<OpExpr>,
    /// Hermitian generator `H`; the segment evolves by `exp(-i H duration)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<OpExpr>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledProjector {
    pub label: String,
    pub matrix: OpExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpec {
    pub direction: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionSpec {
    Projectors(Vec<LabeledProjector>),
    /// `{[n+], [n-]}` on the leading qubit, tensored with the identity on the rest.
    Spin(SpinSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub step: usize,
    pub decomposition: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub slots: Vec<SlotSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub name: String,
    pub dimension: usize,
    pub initial: InitialSpec,
    pub dynamics: Vec<SegmentSpec>,
    pub decompositions: BTreeMap<String, DecompositionSpec>,
    pub families: BTreeMap<String, FamilySpec>,
    #[serde(default, skip_serializing_if = "ToleranceOverrides::is_empty")]
    pub tolerances: ToleranceOverrides,
}

impl ScenarioFile {
    /// Canonical text: pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario files always serialize");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("{at}: {message}")]
    Invalid { at: String, message: String },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("unknown decomposition `{0}`")]
    UnknownDecomposition(String),
}

fn invalid(at: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        at: at.into(),
        message: message.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn complex(c: &Complex) -> C64 {
    C64::new(c[0], c[1])
}

fn vector(entries: &[Complex], at: &str) -> Result<Vec<C64>, ScenarioError> {
    if entries.is_empty() {
        return Err(invalid(at, "empty vector"));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid(at, "non-finite entry"));
    }
    Ok(entries.iter().map(complex).collect())
}

/// What an expression must turn out to be.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Want {
    Any,
    Of(OperatorKind),
}

struct Evaluator<'a> {
    tol: &'a Tolerances,
}

impl Evaluator<'_> {
    fn check(&self, op: &Operator, want: Want, at: &str) -> Result<(), ScenarioError> {
        if let Want::Of(kind) = want {
            validate(op, kind, self.tol)
                .into_result()
                .map_err(|e| invalid(at, e))?;
        }
        Ok(())
    }

    fn eval(&self, expr: &OpExpr, want: Want, at: &str) -> Result<Operator, ScenarioError> {
        match expr {
            OpExpr::Rows(rows) => {
                let rows = rows
                    .iter()
                    .map(|r| r.iter().map(complex).collect())
                    .collect();
                let op = Operator::from_rows(rows).map_err(|e| invalid(at, e))?;
                cap(op.dim(), at)?;
                self.check(&op, want, at)?;
                Ok(op)
            }
            OpExpr::Identity(n) => {
                if *n == 0 {
                    return Err(invalid(at, "identity of dimension 0"));
                }
                cap(*n, at)?;
                let op = Operator::identity(*n);
                if want == Want::Of(OperatorKind::Density) {
                    self.check(&op, want, at)?;
                }
                Ok(op)
            }
            OpExpr::Tensor(factors) => {
                if factors.is_empty() {
                    return Err(invalid(at, "empty tensor product"));
                }
                let mut acc: Option<Operator> = None;
                for (k, f) in factors.iter().enumerate() {
                    let op = self.eval(f, want, &format!("{at}.tensor[{k}]"))?;
                    acc = Some(match acc {
                        None => op,
                        Some(a) => tensor(&a, &op).map_err(|e| invalid(at, e))?,
                    });
                }
                Ok(acc.expect("nonempty"))
            }
            OpExpr::Product(factors) => {
                if factors.is_empty() {
                    return Err(invalid(at, "empty product"));
                }
                // Only unitarity is preserved under products.
                let inner = match want {
                    Want::Of(OperatorKind::Unitary) => want,
                    _ => Want::Any,
                };
                let mut acc: Option<Operator> = None;
                for (k, f) in factors.iter().enumerate() {
                    let op = self.eval(f, inner, &format!("{at}.product[{k}]"))?;
                    acc = Some(match acc {
                        None => op,
                        Some(a) => {
                            if a.dim() != op.dim() {
                                return Err(invalid(
                                    at,
                                    LinalgError::DimensionMismatch {
                                        expected: a.dim(),
                                        found: op.dim(),
                                    },
                                ));
                            }
                            a.matmul(&op)
                        }
                    });
                }
                let op = acc.expect("nonempty");
                if inner != want {
                    self.check(&op, want, at)?;
                }
                Ok(op)
            }
            OpExpr::Controlled(terms) => self.controlled(terms, want, at),
        }
    }

    fn controlled(&self, terms: &[ControlTerm], want: Want, at: &str) -> Result<Operator, ScenarioError> {
        if terms.is_empty() {
            return Err(invalid(at, "empty controlled sum"));
        }
        let mut controls = Vec::with_capacity(terms.len());
        for (k, t) in terms.iter().enumerate() {
            let p = self.eval(
                &t.control,
                Want::Of(OperatorKind::Projector),
                &format!("{at}.controlled[{k}].control"),
            )?;
            controls.push(Projector::trusted(p));
        }
        let labels = (0..terms.len()).map(|k| k.to_string()).collect();
        make_decomposition(controls.clone(), labels, self.tol)
            .map_err(|e| invalid(format!("{at}.controlled"), e))?;
        let inner = match want {
            Want::Of(OperatorKind::Density) => Want::Any,
            w => w,
        };
        let mut sum: Option<Operator> = None;
        for (k, (t, p)) in terms.iter().zip(&controls).enumerate() {
            let target_at = format!("{at}.controlled[{k}].target");
            let target = self.eval(&t.target, inner, &target_at)?;
            let term = tensor(p.op(), &target).map_err(|e| invalid(&target_at, e))?;
            sum = Some(match sum {
                None => term,
                Some(s) if s.dim() == term.dim() => &s + &term,
                Some(s) => {
                    return Err(invalid(
                        &target_at,
                        LinalgError::DimensionMismatch {
                            expected: s.dim(),
                            found: term.dim(),
                        },
                    ))
                }
            });
        }
        let op = sum.expect("nonempty");
        if inner != want {
            self.check(&op, want, at)?;
        }
        Ok(op)
    }
}

fn cap(dim: usize, at: &str) -> Result<(), ScenarioError> {
    let cap = max_dim();
    if dim > cap {
        Err(invalid(at, LinalgError::DimensionCap { dim, cap }))
    } else {
        Ok(())
    }
}

fn expect_dim(found: usize, expected: usize, at: &str) -> Result<(), ScenarioError> {
    if found != expected {
        Err(invalid(at, LinalgError::DimensionMismatch { expected, found }))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Loaded scenarios

/// A validated scenario: state, dynamics, named decompositions and families.
#[derive(Clone, Debug)]
pub struct Scenario {
    file: ScenarioFile,
    initial: Arc<DensityOperator>,
    dynamics: Arc<Dynamics>,
    decompositions: BTreeMap<String, Arc<Decomposition>>,
    families: BTreeMap<String, Family>,
    tolerances: Tolerances,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::from_file(ScenarioFile::parse(text)?)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.format_version != FORMAT_VERSION {
            return Err(ScenarioError::Version(file.format_version));
        }
        let dim = file.dimension;
        if dim == 0 {
            return Err(invalid("dimension", "must be positive"));
        }
        cap(dim, "dimension")?;
        let tolerances = file.tolerances.apply(Tolerances::default());
        let ev = Evaluator { tol: &tolerances };

        let initial = Arc::new(load_initial(&file.initial, dim, &ev)?);

        if file.dynamics.is_empty() {
            return Err(invalid("dynamics", "at least one segment is required"));
        }
        let mut segments = Vec::with_capacity(file.dynamics.len());
        for (k, seg) in file.dynamics.iter().enumerate() {
            let at = format!("dynamics[{k}]");
            let u = match (&seg.unitary, &seg.hamiltonian) {
                (Some(u), None) => {
                    let op = ev.eval(u, Want::Of(OperatorKind::Unitary), &format!("{at}.unitary"))?;
                    expect_dim(op.dim(), dim, &at)?;
                    Unitary::trusted(op)
                }
                (None, Some(h)) => {
                    let at = format!("{at}.hamiltonian");
                    let op = ev.eval(h, Want::Of(OperatorKind::Hermitian), &at)?;
                    expect_dim(op.dim(), dim, &at)?;
                    Unitary::from_hamiltonian(&op, seg.duration, &tolerances)
                        .map_err(|e| invalid(&at, e))?
                }
                _ => return Err(invalid(at, "exactly one of `unitary` or `hamiltonian` is required")),
            };
            segments.push((seg.duration, u));
        }
        let dynamics = Arc::new(Dynamics::new(segments).map_err(|e| invalid("dynamics", e))?);

        let mut decompositions = BTreeMap::new();
        for (name, spec) in &file.decompositions {
            let at = format!("decompositions.{name}");
            let d = load_decomposition(name, spec, dim, &ev, &at)?;
            decompositions.insert(name.clone(), Arc::new(d));
        }

        let mut families = BTreeMap::new();
        for (name, spec) in &file.families {
            let at = format!("families.{name}");
            let slots = spec
                .slots
                .iter()
                .map(|s| {
                    decompositions
                        .get(&s.decomposition)
                        .map(|d| Slot::new(s.step, d.clone()))
                        .ok_or_else(|| invalid(&at, format!("unknown decomposition `{}`", s.decomposition)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let f = Family::new(slots, dynamics.clone(), initial.clone()).map_err(|e| invalid(&at, e))?;
            families.insert(name.clone(), f);
        }

        Ok(Scenario {
            file,
            initial,
            dynamics,
            decompositions,
            families,
            tolerances,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn dim(&self) -> usize {
        self.file.dimension
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    pub fn to_json(&self) -> String {
        self.file.to_json()
    }

    pub fn initial(&self) -> &Arc<DensityOperator> {
        &self.initial
    }

    pub fn dynamics(&self) -> &Arc<Dynamics> {
        &self.dynamics
    }

    pub fn decompositions(&self) -> &BTreeMap<String, Arc<Decomposition>> {
        &self.decompositions
    }

    pub fn decomposition(&self, name: &str) -> Result<&Arc<Decomposition>, ScenarioError> {
        self.decompositions
            .get(name)
            .ok_or_else(|| ScenarioError::UnknownDecomposition(name.to_string()))
    }

    pub fn families(&self) -> &BTreeMap<String, Family> {
        &self.families
    }

    pub fn family(&self, name: &str) -> Result<&Family, ScenarioError> {
        self.families
            .get(name)
            .ok_or_else(|| ScenarioError::UnknownFamily(name.to_string()))
    }

    /// Built-in defaults with the file's overrides applied.
    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    /// Consistency threshold from the file, if it sets one.
    pub fn consistency_options(&self) -> ConsistencyOptions {
        ConsistencyOptions {
            tol: self.file.tolerances.consistency,
            ..Default::default()
        }
    }
}

fn load_initial(spec: &InitialSpec, dim: usize, ev: &Evaluator) -> Result<DensityOperator, ScenarioError> {
    match spec {
        InitialSpec::State(entries) => {
            let v = vector(entries, "initial.state")?;
            expect_dim(v.len(), dim, "initial.state")?;
            let s = StateVector::new(v, ev.tol.norm).map_err(|e| invalid("initial.state", e))?;
            Ok(DensityOperator::pure(s))
        }
        InitialSpec::Product(factors) => {
            if factors.is_empty() {
                return Err(invalid("initial.product", "empty product"));
            }
            let mut acc = vec![C64::new(1.0, 0.0)];
            for (k, f) in factors.iter().enumerate() {
                let at = format!("initial.product[{k}]");
                let v = vector(f, &at)?;
                let s = StateVector::new(v, ev.tol.norm).map_err(|e| invalid(&at, e))?;
                acc = tensor_vec(&acc, s.entries());
                cap(acc.len(), "initial.product")?;
            }
            expect_dim(acc.len(), dim, "initial.product")?;
            let s = StateVector::new(acc, ev.tol.norm).map_err(|e| invalid("initial.product", e))?;
            Ok(DensityOperator::pure(s))
        }
        InitialSpec::Density(expr) => {
            let op = ev.eval(expr, Want::Any, "initial.density")?;
            expect_dim(op.dim(), dim, "initial.density")?;
            DensityOperator::mixed(op, ev.tol).map_err(|e| invalid("initial.density", e))
        }
    }
}

fn load_decomposition(
    name: &str,
    spec: &DecompositionSpec,
    dim: usize,
    ev: &Evaluator,
    at: &str,
) -> Result<Decomposition, ScenarioError> {
    match spec {
        DecompositionSpec::Spin(s) => {
            if !dim.is_multiple_of(2) {
                return Err(invalid(at, "spin shorthand needs an even dimension"));
            }
            Decomposition::spin(s.direction, name)
                .and_then(|d| d.embed(1, dim / 2))
                .map_err(|e| invalid(at, e))
        }
        DecompositionSpec::Projectors(list) => {
            let mut projectors = Vec::with_capacity(list.len());
            let mut labels = Vec::with_capacity(list.len());
            for (k, p) in list.iter().enumerate() {
                let pat = format!("{at}.projectors[{k}]");
                let op = ev.eval(&p.matrix, Want::Of(OperatorKind::Projector), &pat)?;
                expect_dim(op.dim(), dim, &pat)?;
                projectors.push(Projector::trusted(op));
                labels.push(p.label.clone());
            }
            make_decomposition(projectors, labels, ev.tol).map_err(|e| invalid(at, e))
        }
    }
}

// ---------------------------------------------------------------------------
// Helpers for writing files

pub fn complex_of(c: C64) -> Complex {
    [c.re, c.im]
}

pub fn rows_of(op: &Operator) -> OpExpr {
    OpExpr::Rows(
        op.rows()
            .map(|r| r.iter().copied().map(complex_of).collect())
            .collect(),
    )
}

pub fn vector_of(v: &[C64]) -> Vec<Complex> {
    v.iter().copied().map(complex_of).collect()
}
