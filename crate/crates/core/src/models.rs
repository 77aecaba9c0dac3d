//! Built-in scenarios: a single spin, a spin measured by a Stern-Gerlach
//! pointer with environment copies, and the Schrödinger-cat toy.
//!
//! Builders write a [`ScenarioFile`] and load it, so built-ins and user
//! files go through the same validation.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::events::{spin_projector, Decomposition, EventError, SpinSign};
use crate::exec::Execution;
use crate::histories::{
    decoherence_matrix_with, is_consistent, probabilities, ConsistencyOptions, Family, History,
    HistoryError, HistoryProbability, Slot,
};
use crate::linalg::C64;
use crate::scenario::{
    rows_of, vector_of, Complex, ControlTerm, DecompositionSpec, FamilySpec, InitialSpec,
    LabeledProjector, OpExpr, ScenarioError, ScenarioFile, SegmentSpec, SlotSpec, SpinSpec,
    FORMAT_VERSION,
};
use crate::tolerance::ToleranceOverrides;

pub use crate::scenario::Scenario;

/// Largest number of environment qubits a builder accepts.
pub const MAX_ENV_QUBITS: usize = 10;

const DIRECTION_TOL: f64 = 1e-9;

pub const X: [f64; 3] = [1.0, 0.0, 0.0];
pub const Y: [f64; 3] = [0.0, 1.0, 0.0];
pub const Z: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("direction {direction:?} is not a unit vector (|‖n‖ − 1| = {violation:.3e})")]
    Direction { direction: [f64; 3], violation: f64 },
    #[error("{requested} environment qubits exceed the cap of {cap}")]
    EnvCap { requested: usize, cap: usize },
    #[error("at least one environment qubit is required")]
    NoEnvironment,
    #[error("coupling angle {0} is outside (0, π/2]")]
    Angle(f64),
    #[error("source amplitudes are not normalized (|‖(a, b)‖ − 1| = {0:.3e})")]
    Amplitudes(f64),
    #[error("scenario was not built by {0}")]
    WrongScenario(&'static str),
    #[error("`{0}` is already defined differently")]
    NameTaken(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Histories(#[from] HistoryError),
    #[error(transparent)]
    Events(#[from] EventError),
}

fn check_direction(direction: [f64; 3]) -> Result<(), ModelError> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let violation = (norm - 1.0).abs();
    if violation > DIRECTION_TOL || !norm.is_finite() {
        Err(ModelError::Direction {
            direction,
            violation,
        })
    } else {
        Ok(())
    }
}

fn check_env(env_qubits: usize) -> Result<(), ModelError> {
    if env_qubits > MAX_ENV_QUBITS {
        Err(ModelError::EnvCap {
            requested: env_qubits,
            cap: MAX_ENV_QUBITS,
        })
    } else {
        Ok(())
    }
}

/// `|n+⟩ = (cos(θ/2), e^{iφ} sin(θ/2))` for `n = (sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn spin_state(direction: [f64; 3]) -> Result<[C64; 2], ModelError> {
    check_direction(direction)?;
    let [x, y, z] = direction;
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    Ok([
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phi),
    ])
}

fn real(rows: &[&[f64]]) -> OpExpr {
    OpExpr::Rows(
        rows.iter()
            .map(|r| r.iter().map(|&x| [x, 0.0]).collect())
            .collect(),
    )
}

fn ket0_bra0() -> OpExpr {
    real(&[&[1.0, 0.0], &[0.0, 0.0]])
}

fn ket1_bra1() -> OpExpr {
    real(&[&[0.0, 0.0], &[0.0, 1.0]])
}

fn pauli_x() -> OpExpr {
    real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// `op^{⊗n}`, or the 1-dimensional identity when `n = 0`.
fn power(op: OpExpr, n: usize) -> OpExpr {
    if n == 0 {
        OpExpr::Identity(1)
    } else {
        OpExpr::Tensor(vec![op; n])
    }
}

fn zero_ket() -> Vec<Complex> {
    vec![[1.0, 0.0], [0.0, 0.0]]
}

fn controlled(terms: Vec<(OpExpr, OpExpr)>) -> OpExpr {
    OpExpr::Controlled(
        terms
            .into_iter()
            .map(|(control, target)| ControlTerm { control, target })
            .collect(),
    )
}

fn segment(unitary: OpExpr) -> SegmentSpec {
    SegmentSpec {
        duration: 1.0,
        unitary: Some(unitary),
        hamiltonian: None,
    }
}

fn family(slots: &[(usize, &str)]) -> FamilySpec {
    FamilySpec {
        slots: slots
            .iter()
            .map(|&(step, d)| SlotSpec {
                step,
                decomposition: d.to_string(),
            })
            .collect(),
    }
}

fn spin_spec(direction: [f64; 3]) -> DecompositionSpec {
    DecompositionSpec::Spin(SpinSpec { direction })
}

// ---------------------------------------------------------------------------
// Single spin

/// Spin-½ prepared along `init`, identity dynamics, families `x`, `y`, `z`
/// each at a single time.
pub fn build_single_spin(init: [f64; 3]) -> Result<Scenario, ModelError> {
    let state = spin_state(init)?;
    let decompositions = BTreeMap::from([
        ("x".to_string(), spin_spec(X)),
        ("y".to_string(), spin_spec(Y)),
        ("z".to_string(), spin_spec(Z)),
    ]);
    let families = ["x", "y", "z"]
        .iter()
        .map(|&n| (n.to_string(), family(&[(1, n)])))
        .collect();
    let file = ScenarioFile {
        format_version: FORMAT_VERSION,
        name: "single-spin".into(),
        dimension: 2,
        initial: InitialSpec::State(vector_of(&state)),
        dynamics: vec![segment(OpExpr::Identity(2))],
        decompositions,
        families,
        tolerances: ToleranceOverrides::default(),
    };
    Ok(Scenario::from_file(file)?)
}

/// Adds a spin decomposition along `direction` on the leading qubit and a
/// family measuring it at the final time, both called `name`.
pub fn with_spin_family(
    scenario: &Scenario,
    name: &str,
    direction: [f64; 3],
) -> Result<Scenario, ModelError> {
    check_direction(direction)?;
    let mut file = scenario.file().clone();
    let spec = spin_spec(direction);
    let fam = family(&[(file.dynamics.len(), name)]);
    match (file.decompositions.get(name), file.families.get(name)) {
        (Some(d), Some(f)) if *d == spec && *f == fam => return Ok(scenario.clone()),
        (None, None) => {}
        _ => return Err(ModelError::NameTaken(name.to_string())),
    }
    file.decompositions.insert(name.to_string(), spec);
    file.families.insert(name.to_string(), fam);
    Ok(Scenario::from_file(file)?)
}

// ---------------------------------------------------------------------------
// Stern-Gerlach

/// Spin ⊗ pointer ⊗ `env_qubits` environment qubits, spin prepared along `z`.
pub fn build_stern_gerlach(w: [f64; 3], env_qubits: usize) -> Result<Scenario, ModelError> {
    build_stern_gerlach_with(w, env_qubits, Z)
}

/// Spin ⊗ pointer ⊗ environment on the grid `t0 < t1 < t2`.
///
/// Nothing happens between `t0` and `t1`. Between `t1` and `t2` the pointer
/// moves from `ready = point+` to `point±` according to the spin's
/// `w`-component, and the pointer is then copied into every environment
/// qubit. Family `w-framework` measures spin `w` at `t1` and the pointer at
/// `t2`; see [`v_framework`] for other axes.
pub fn build_stern_gerlach_with(
    w: [f64; 3],
    env_qubits: usize,
    init: [f64; 3],
) -> Result<Scenario, ModelError> {
    check_direction(w)?;
    check_env(env_qubits)?;
    let state = spin_state(init)?;
    let env = 1usize << env_qubits;
    let dim = 4 * env;

    let copy = controlled(vec![
        (ket0_bra0(), OpExpr::Identity(env)),
        (ket1_bra1(), power(pauli_x(), env_qubits)),
    ]);
    let flip = OpExpr::Tensor(vec![pauli_x(), OpExpr::Identity(env)]);
    let plus = rows_of(spin_projector(w, SpinSign::Plus)?.op());
    let minus = rows_of(spin_projector(w, SpinSign::Minus)?.op());
    let measure = controlled(vec![
        (plus, copy.clone()),
        (minus, OpExpr::Product(vec![copy, flip])),
    ]);

    let pointer = |label: &str, p: OpExpr| LabeledProjector {
        label: label.to_string(),
        matrix: OpExpr::Tensor(vec![OpExpr::Identity(2), p, OpExpr::Identity(env)]),
    };
    let decompositions = BTreeMap::from([
        (
            "pointer".to_string(),
            DecompositionSpec::Projectors(vec![
                pointer("point+", ket0_bra0()),
                pointer("point-", ket1_bra1()),
            ]),
        ),
        ("w".to_string(), spin_spec(w)),
    ]);
    let families = BTreeMap::from([("w-framework".to_string(), family(&[(1, "w"), (2, "pointer")]))]);

    let mut initial = vec![vector_of(&state), zero_ket()];
    initial.extend(std::iter::repeat_n(zero_ket(), env_qubits));
    let file = ScenarioFile {
        format_version: FORMAT_VERSION,
        name: "stern-gerlach".into(),
        dimension: dim,
        initial: InitialSpec::Product(initial),
        dynamics: vec![segment(OpExpr::Identity(dim)), segment(measure)],
        decompositions,
        families,
        tolerances: ToleranceOverrides::default(),
    };
    Ok(Scenario::from_file(file)?)
}

/// Spin `v`-component at `t1`, pointer at `t2`.
pub fn v_framework(scenario: &Scenario, v: [f64; 3]) -> Result<Family, ModelError> {
    check_direction(v)?;
    let pointer = scenario
        .decomposition("pointer")
        .map_err(|_| ModelError::WrongScenario("build_stern_gerlach"))?;
    if scenario.dynamics().steps() != 2 {
        return Err(ModelError::WrongScenario("build_stern_gerlach"));
    }
    let spin = Decomposition::spin(v, "v")?.embed(1, scenario.dim() / 2)?;
    Ok(Family::new(
        vec![Slot::new(1, spin.into()), Slot::new(2, pointer.clone())],
        scenario.dynamics().clone(),
        scenario.initial().clone(),
    )?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRow {
    pub name: String,
    pub direction: [f64; 3],
    pub consistent: bool,
    /// Largest off-diagonal decoherence-functional magnitude.
    pub witness: f64,
    pub tol: f64,
    /// Present only for consistent frameworks.
    pub probabilities: Option<Vec<HistoryProbability>>,
}

/// Consistency of the `v`-framework for every candidate axis.
pub fn measurement_framework_selection_report(
    scenario: &Scenario,
    candidates: &[(String, [f64; 3])],
    opts: &ConsistencyOptions,
    exec: Execution,
) -> Result<Vec<SelectionRow>, ModelError> {
    candidates
        .iter()
        .map(|(name, v)| {
            let f = v_framework(scenario, *v)?;
            let d = decoherence_matrix_with(&f, exec)?;
            let report = is_consistent(&d, opts);
            Ok(SelectionRow {
                name: name.clone(),
                direction: *v,
                consistent: report.consistent,
                witness: report.max_off_diagonal,
                tol: report.tol,
                probabilities: report
                    .consistent
                    .then(|| probabilities(&d, opts))
                    .transpose()?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cat

/// Cat toy with the source in `(|0⟩ + |1⟩)/√2`.
pub fn build_cat(env_qubits: usize, theta: f64) -> Result<Scenario, ModelError> {
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    build_cat_with(env_qubits, theta, a, a)
}

/// Source ⊗ cat ⊗ environment, source prepared in `a|0⟩ + b|1⟩`.
///
/// Between `t0` and `t1` the source flips the cat (`|0⟩ = live`,
/// `|1⟩ = dead`). Between `t1` and `t2` every environment qubit is rotated by
/// `exp(-iθσx)` when the cat is dead, so the two branches' environments
/// overlap by `cos^n θ`.
///
/// Families: `cat` = {live, dead} at `t2`; `superposition` =
/// {S+, S-, rest} at `t2` with `S± = (|0,live⟩ ± |1,dead⟩)/√2`;
/// `interference` = cat at `t1` followed by superposition at `t2`.
pub fn build_cat_with(env_qubits: usize, theta: f64, a: C64, b: C64) -> Result<Scenario, ModelError> {
    if env_qubits == 0 {
        return Err(ModelError::NoEnvironment);
    }
    check_env(env_qubits)?;
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(ModelError::Angle(theta));
    }
    let violation = ((a.norm_sqr() + b.norm_sqr()).sqrt() - 1.0).abs();
    if violation > 1e-10 || !violation.is_finite() {
        return Err(ModelError::Amplitudes(violation));
    }
    let env = 1usize << env_qubits;
    let dim = 4 * env;

    let (c, s) = (theta.cos(), theta.sin());
    let rotation = OpExpr::Rows(vec![
        vec![[c, 0.0], [0.0, -s]],
        vec![[0.0, -s], [c, 0.0]],
    ]);
    let flip_cat = OpExpr::Tensor(vec![
        controlled(vec![(ket0_bra0(), OpExpr::Identity(2)), (ket1_bra1(), pauli_x())]),
        OpExpr::Identity(env),
    ]);
    let couple = OpExpr::Tensor(vec![
        OpExpr::Identity(2),
        controlled(vec![
            (ket0_bra0(), OpExpr::Identity(env)),
            (ket1_bra1(), power(rotation, env_qubits)),
        ]),
    ]);

    let on_cat = |label: &str, p: OpExpr| LabeledProjector {
        label: label.to_string(),
        matrix: OpExpr::Tensor(vec![OpExpr::Identity(2), p, OpExpr::Identity(env)]),
    };
    let on_pair = |label: &str, rows: &[&[f64]]| LabeledProjector {
        label: label.to_string(),
        matrix: OpExpr::Tensor(vec![real(rows), OpExpr::Identity(env)]),
    };
    let h = 0.5;
    let decompositions = BTreeMap::from([
        (
            "cat".to_string(),
            DecompositionSpec::Projectors(vec![
                on_cat("live", ket0_bra0()),
                on_cat("dead", ket1_bra1()),
            ]),
        ),
        (
            "superposition".to_string(),
            DecompositionSpec::Projectors(vec![
                on_pair("S+", &[&[h, 0.0, 0.0, h], &[0.0; 4], &[0.0; 4], &[h, 0.0, 0.0, h]]),
                on_pair("S-", &[&[h, 0.0, 0.0, -h], &[0.0; 4], &[0.0; 4], &[-h, 0.0, 0.0, h]]),
                on_pair(
                    "rest",
                    &[&[0.0; 4], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0; 4]],
                ),
            ]),
        ),
    ]);
    let families = BTreeMap::from([
        ("cat".to_string(), family(&[(2, "cat")])),
        ("interference".to_string(), family(&[(1, "cat"), (2, "superposition")])),
        ("superposition".to_string(), family(&[(2, "superposition")])),
    ]);

    let mut initial = vec![vector_of(&[a, b]), zero_ket()];
    initial.extend(std::iter::repeat_n(zero_ket(), env_qubits));
    let file = ScenarioFile {
        format_version: FORMAT_VERSION,
        name: "cat".into(),
        dimension: dim,
        initial: InitialSpec::Product(initial),
        dynamics: vec![segment(flip_cat), segment(couple)],
        decompositions,
        families,
        tolerances: ToleranceOverrides::default(),
    };
    Ok(Scenario::from_file(file)?)
}

/// Interference between the live and dead branches after both reach `S+`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatCoherence {
    /// `|D(live·S+, dead·S+)|`.
    pub off_diagonal: f64,
    /// `|D(α, β)| / √(D(α, α) D(β, β))`; equals `|cos θ|^n` for any nonzero source amplitudes.
    pub normalized: f64,
}

pub fn cat_coherence(scenario: &Scenario, exec: Execution) -> Result<CatCoherence, ModelError> {
    let f = scenario
        .family("interference")
        .map_err(|_| ModelError::WrongScenario("build_cat"))?;
    let live = f.position(&History::new(vec![0, 0]))?;
    let dead = f.position(&History::new(vec![1, 0]))?;
    let d = decoherence_matrix_with(f, exec)?;
    Ok(CatCoherence {
        off_diagonal: d.get(live, dead).norm(),
        normalized: d.normalized_coherence(live, dead),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuppressionRow {
    pub env_qubits: usize,
    pub coherence: CatCoherence,
    /// `|cos θ|^n`.
    pub closed_form: f64,
    pub interference_consistent: bool,
    /// Probabilities of `live` and `dead` at the final time.
    pub cat_probabilities: [f64; 2],
}

/// One row per environment size `1..=max_env`.
pub fn cat_suppression(
    max_env: usize,
    theta: f64,
    opts: &ConsistencyOptions,
    exec: Execution,
) -> Result<Vec<SuppressionRow>, ModelError> {
    check_env(max_env)?;
    (1..=max_env)
        .map(|n| {
            let s = build_cat(n, theta)?;
            let coherence = cat_coherence(&s, exec)?;
            let interference = decoherence_matrix_with(s.family("interference")?, exec)?;
            let cat = probabilities(&decoherence_matrix_with(s.family("cat")?, exec)?, opts)?;
            Ok(SuppressionRow {
                env_qubits: n,
                coherence,
                closed_form: theta.cos().abs().powi(n as i32),
                interference_consistent: is_consistent(&interference, opts).consistent,
                cat_probabilities: [cat[0].probability, cat[1].probability],
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Kochen-Specker

/// Eighteen rays in four dimensions, arranged in nine orthogonal bases with
/// every ray in exactly two bases.
const KS_BASES: [[[i8; 4]; 4]; 9] = [
    [[0, 0, 0, 1], [0, 0, 1, 0], [1, 1, 0, 0], [1, -1, 0, 0]],
    [[0, 0, 0, 1], [0, 1, 0, 0], [1, 0, 1, 0], [1, 0, -1, 0]],
    [[1, -1, 1, -1], [1, -1, -1, 1], [1, 1, 0, 0], [0, 0, 1, 1]],
    [[1, -1, 1, -1], [1, 1, 1, 1], [1, 0, -1, 0], [0, 1, 0, -1]],
    [[0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 1], [1, 0, 0, -1]],
    [[1, -1, -1, 1], [1, 1, 1, 1], [1, 0, 0, -1], [0, 1, -1, 0]],
    [[1, 1, -1, 1], [1, 1, 1, -1], [1, -1, 0, 0], [0, 0, 1, 1]],
    [[1, 1, -1, 1], [-1, 1, 1, 1], [1, 0, 1, 0], [0, 1, 0, -1]],
    [[1, 1, 1, -1], [-1, 1, 1, 1], [1, 0, 0, 1], [0, 1, -1, 0]],
];

/// Nine single-time families on a maximally mixed four-level system, one
/// per basis of an eighteen-ray Kochen-Specker set. Every ray has positive
/// weight and appears in two families, so no assignment of one true history
/// per family respects containment.
pub fn build_kochen_specker() -> Result<Scenario, ModelError> {
    let mut rays: Vec<[i8; 4]> = Vec::new();
    let mut decompositions = BTreeMap::new();
    let mut families = BTreeMap::new();
    for (b, basis) in KS_BASES.iter().enumerate() {
        let projectors = basis
            .iter()
            .map(|v| {
                let canon = if v.iter().find(|&&x| x != 0) == Some(&-1) { v.map(|x| -x) } else { *v };
                let index = rays.iter().position(|r| *r == canon).unwrap_or_else(|| {
                    rays.push(canon);
                    rays.len() - 1
                });
                let norm2 = v.iter().map(|&x| f64::from(x * x)).sum::<f64>();
                let rows = (0..4)
                    .map(|i| (0..4).map(|j| [f64::from(v[i] * v[j]) / norm2, 0.0]).collect())
                    .collect();
                LabeledProjector {
                    label: format!("r{:02}", index + 1),
                    matrix: OpExpr::Rows(rows),
                }
            })
            .collect();
        let name = format!("b{}", b + 1);
        decompositions.insert(name.clone(), DecompositionSpec::Projectors(projectors));
        families.insert(name.clone(), family(&[(1, &name)]));
    }
    let q = [0.25, 0.0];
    let file = ScenarioFile {
        format_version: FORMAT_VERSION,
        name: "kochen-specker".into(),
        dimension: 4,
        initial: InitialSpec::Density(OpExpr::Rows(
            (0..4).map(|i| (0..4).map(|j| if i == j { q } else { [0.0, 0.0] }).collect()).collect(),
        )),
        dynamics: vec![segment(OpExpr::Identity(4))],
        decompositions,
        families,
        tolerances: ToleranceOverrides::default(),
    };
    Ok(Scenario::from_file(file)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::decoherence_matrix;

    fn probs(f: &Family) -> Vec<f64> {
        let d = decoherence_matrix(f).unwrap();
        probabilities(&d, &ConsistencyOptions::default())
            .unwrap()
            .iter()
            .map(|p| p.probability)
            .collect()
    }

    #[test]
    fn spin_state_matches_projector() {
        for dir in [X, Y, Z, [0.0, 0.0, -1.0], [0.6, 0.0, 0.8], [-0.48, 0.6, 0.64]] {
            let s = spin_state(dir).unwrap();
            let p = spin_projector(dir, SpinSign::Plus).unwrap();
            let image = p.op().apply(&s);
            for (a, b) in image.iter().zip(&s) {
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_spin_examples() {
        let s = build_single_spin(Z).unwrap();
        assert_eq!(probs(s.family("z").unwrap()), vec![1.0, 0.0]);
        let x = probs(s.family("x").unwrap());
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        assert!(build_single_spin([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn spin_hook_adds_a_family() {
        let s = build_single_spin(Z).unwrap();
        let theta = 0.7f64;
        let s = with_spin_family(&s, "n", [theta.sin(), 0.0, theta.cos()]).unwrap();
        let p = probs(s.family("n").unwrap());
        assert!((p[0] - (theta / 2.0).cos().powi(2)).abs() < 1e-14);
        assert!(matches!(with_spin_family(&s, "n", X), Err(ModelError::NameTaken(_))));
        assert!(with_spin_family(&s, "x", X).is_ok());
    }

    #[test]
    fn stern_gerlach_w_equals_z() {
        for env in 0..=2 {
            let s = build_stern_gerlach(Z, env).unwrap();
            assert_eq!(s.dim(), 4 << env);
            let p = probs(s.family("w-framework").unwrap());
            assert!((p[0] - 1.0).abs() < 1e-14);
            assert!(p[1..].iter().all(|&x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn stern_gerlach_x_framework_witness() {
        let s = build_stern_gerlach(Z, 0).unwrap();
        let d = decoherence_matrix(&v_framework(&s, X).unwrap()).unwrap();
        let r = is_consistent(&d, &ConsistencyOptions::default());
        assert!(!r.consistent);
        assert!((r.max_off_diagonal - 0.25).abs() < 1e-14);
    }

    #[test]
    fn selection_report_flags_other_axes() {
        let s = build_stern_gerlach(Z, 1).unwrap();
        let cands: Vec<(String, [f64; 3])> = vec![
            ("z".into(), Z),
            ("x".into(), X),
            ("y".into(), Y),
            ("-z".into(), [0.0, 0.0, -1.0]),
        ];
        let rows = measurement_framework_selection_report(
            &s,
            &cands,
            &ConsistencyOptions::default(),
            Execution::default(),
        )
        .unwrap();
        let verdicts: Vec<bool> = rows.iter().map(|r| r.consistent).collect();
        assert_eq!(verdicts, vec![true, false, false, true]);
        assert!(rows[0].witness < 1e-12);
        assert!(rows[1].probabilities.is_none());
    }

    #[test]
    fn selection_needs_stern_gerlach() {
        let s = build_single_spin(Z).unwrap();
        assert_eq!(
            v_framework(&s, X).unwrap_err(),
            ModelError::WrongScenario("build_stern_gerlach")
        );
    }

    #[test]
    fn cat_perfect_copies_do_not_interfere() {
        let s = build_cat(2, std::f64::consts::FRAC_PI_2).unwrap();
        let c = cat_coherence(&s, Execution::default()).unwrap();
        assert!(c.normalized < 1e-14 && c.off_diagonal < 1e-14);
        let p = probs(s.family("cat").unwrap());
        assert!((p[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cat_amplitudes_show_up_in_probabilities() {
        let (a, b) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let s = build_cat_with(1, 0.4, a, b).unwrap();
        let p = probs(s.family("cat").unwrap());
        assert!((p[0] - 0.36).abs() < 1e-14 && (p[1] - 0.64).abs() < 1e-14);
        let c = cat_coherence(&s, Execution::default()).unwrap();
        assert!((c.normalized - 0.4f64.cos()).abs() < 1e-13);
    }

    #[test]
    fn cat_weak_coupling_keeps_coherence() {
        let s = build_cat(1, 1e-6).unwrap();
        let c = cat_coherence(&s, Execution::default()).unwrap();
        assert!((c.normalized - 1.0).abs() < 1e-11);
    }

    #[test]
    fn cat_parameter_checks() {
        assert_eq!(build_cat(0, 0.3).unwrap_err(), ModelError::NoEnvironment);
        assert!(matches!(build_cat(11, 0.3), Err(ModelError::EnvCap { .. })));
        assert!(matches!(build_cat(1, 0.0), Err(ModelError::Angle(_))));
        assert!(matches!(build_cat(1, 2.0), Err(ModelError::Angle(_))));
    }

    #[test]
    fn suppression_rows_follow_closed_form() {
        let rows = cat_suppression(4, 0.3, &ConsistencyOptions::default(), Execution::default()).unwrap();
        for r in &rows {
            assert!((r.coherence.normalized - r.closed_form).abs() < 1e-12);
            assert!(!r.interference_consistent);
        }
    }

    #[test]
    fn kochen_specker_rays_are_shared_pairwise() {
        let s = build_kochen_specker().unwrap();
        let mut count = BTreeMap::new();
        for d in s.decompositions().values() {
            for l in d.labels() {
                *count.entry(l.clone()).or_insert(0) += 1;
            }
        }
        assert_eq!(count.len(), 18);
        assert!(count.values().all(|&c| c == 2));
    }

    #[test]
    fn built_scenarios_round_trip() {
        for s in [
            build_single_spin([0.6, 0.0, 0.8]).unwrap(),
            build_stern_gerlach([0.0, 0.6, 0.8], 2).unwrap(),
            build_cat(2, 0.3).unwrap(),
            build_kochen_specker().unwrap(),
        ] {
            let text = s.to_json();
            assert_eq!(Scenario::parse(&text).unwrap().to_json(), text);
        }
    }
}
