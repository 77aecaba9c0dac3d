//! Framework compatibility, common refinement, the single-framework check,
//! framework enumeration and the truth-functional search.
//!
//! Two families over the same setting are compatible when every pair of
//! projectors at each slot commutes and the family of slotwise products is
//! itself consistent.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::events::{is_identity, Decomposition, EventError, Projector};
use crate::exec::Execution;
use crate::histories::{
    decoherence_matrix_with, is_consistent, probabilities, ConsistencyOptions, ConsistencyReport,
    DecoherenceMatrix, Dynamics, Family, History, HistoryError, HistoryProbability, Slot,
};
use crate::linalg::DensityOperator;
use crate::tolerance::Tolerances;

/// Default cap on the number of grid selections tried by [`enumerate_frameworks`].
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;
/// Default cap on the assignment space of [`universal_truth_functional_exists`].
pub const DEFAULT_TRUTH_BUDGET: u64 = 1 << 20;
/// Decoherence matrices closer than this are taken as the same framework class.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameworkError {
    #[error("families do not share a setting: {0}")]
    Mismatch(String),
    #[error("projectors do not commute at slot {slot}: |[{first}, {second}]| = {norm:.6e}")]
    NoncommutingSlots {
        slot: usize,
        first: String,
        second: String,
        norm: f64,
    },
    #[error("search space of {size} exceeds the budget of {budget}")]
    BudgetExceeded { size: u128, budget: u64 },
    #[error("family {index} is not consistent (max off-diagonal {magnitude:.6e})")]
    NotConsistent { index: usize, magnitude: f64 },
    #[error("grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Histories(#[from] HistoryError),
    #[error(transparent)]
    Events(#[from] EventError),
}

// ---------------------------------------------------------------------------
// Compatibility

#[derive(Clone, Debug, PartialEq)]
pub enum CompatibilityReason {
    CommutingAndConsistent,
    Noncommuting {
        slot: usize,
        step: usize,
        first: String,
        second: String,
        norm: f64,
    },
    RefinementInconsistent {
        alpha: String,
        beta: String,
        magnitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityVerdict {
    pub compatible: bool,
    pub reason: CompatibilityReason,
}

impl fmt::Display for CompatibilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            CompatibilityReason::CommutingAndConsistent => f.write_str("compatible"),
            CompatibilityReason::Noncommuting {
                step,
                first,
                second,
                norm,
                ..
            } => write!(
                f,
                "noncommuting at step {step}: |[{first}, {second}]| = {norm:.6e}"
            ),
            CompatibilityReason::RefinementInconsistent {
                alpha,
                beta,
                magnitude,
            } => write!(
                f,
                "refinement inconsistent: |D({alpha}, {beta})| = {magnitude:.6e}"
            ),
        }
    }
}

fn require_same_setting(f1: &Family, f2: &Family) -> Result<(), FrameworkError> {
    if f1.dim() != f2.dim() {
        return Err(FrameworkError::Mismatch(format!(
            "dimensions {} and {}",
            f1.dim(),
            f2.dim()
        )));
    }
    if f1.steps() != f2.steps() {
        return Err(FrameworkError::Mismatch(format!(
            "time grids {:?} and {:?}",
            f1.steps(),
            f2.steps()
        )));
    }
    if !f1.same_setting(f2) {
        return Err(FrameworkError::Mismatch(
            "dynamics or initial state differ".into(),
        ));
    }
    Ok(())
}

/// Worst commutator over all slots: `(slot, i, j, norm)`.
fn worst_commutator(f1: &Family, f2: &Family) -> Option<(usize, usize, usize, f64)> {
    let mut worst = None;
    for (k, (s1, s2)) in f1.slots().iter().zip(f2.slots()).enumerate() {
        for (i, p) in s1.decomposition.projectors().iter().enumerate() {
            for (j, q) in s2.decomposition.projectors().iter().enumerate() {
                let norm = p.op().commutator(q.op()).max_abs();
                if worst.is_none_or(|(_, _, _, w)| norm > w) {
                    worst = Some((k, i, j, norm));
                }
            }
        }
    }
    worst
}

pub fn are_compatible(
    f1: &Family,
    f2: &Family,
    opts: &ConsistencyOptions,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, FrameworkError> {
    are_compatible_with(f1, f2, opts, tol, Execution::default())
}

pub fn are_compatible_with(
    f1: &Family,
    f2: &Family,
    opts: &ConsistencyOptions,
    tol: &Tolerances,
    exec: Execution,
) -> Result<CompatibilityVerdict, FrameworkError> {
    require_same_setting(f1, f2)?;
    if let Some((slot, i, j, norm)) = worst_commutator(f1, f2) {
        if norm > tol.comm {
            return Ok(CompatibilityVerdict {
                compatible: false,
                reason: CompatibilityReason::Noncommuting {
                    slot,
                    step: f1.slots()[slot].step,
                    first: f1.slots()[slot].decomposition.label(i).to_string(),
                    second: f2.slots()[slot].decomposition.label(j).to_string(),
                    norm,
                },
            });
        }
    }
    let refined = common_refinement(f1, f2, tol)?;
    let d = decoherence_matrix_with(&refined, exec)?;
    Ok(verdict_from_refinement(&d, opts))
}

fn verdict_from_refinement(d: &DecoherenceMatrix, opts: &ConsistencyOptions) -> CompatibilityVerdict {
    let report = is_consistent(d, opts);
    if report.consistent {
        CompatibilityVerdict {
            compatible: true,
            reason: CompatibilityReason::CommutingAndConsistent,
        }
    } else {
        let (a, b) = report.witness.expect("witness for inconsistency");
        CompatibilityVerdict {
            compatible: false,
            reason: CompatibilityReason::RefinementInconsistent {
                alpha: d.labels()[a].clone(),
                beta: d.labels()[b].clone(),
                magnitude: report.max_off_diagonal,
            },
        }
    }
}

fn refine_decompositions(
    a: &Decomposition,
    b: &Decomposition,
    tol: &Tolerances,
) -> Decomposition {
    let mut projectors = Vec::new();
    let mut labels = Vec::new();
    for (p, la) in a.projectors().iter().zip(a.labels()) {
        for (q, lb) in b.projectors().iter().zip(b.labels()) {
            let prod = p.op().matmul(q.op());
            if prod.max_abs() <= tol.orth {
                continue;
            }
            let label = if is_identity(q.op(), tol.orth) || la == lb {
                la.clone()
            } else if is_identity(p.op(), tol.orth) {
                lb.clone()
            } else {
                format!("{la}&{lb}")
            };
            // Commuting projectors multiply to a projector; symmetrize rounding noise.
            let sym = (&prod + &prod.adjoint()).scale_real(0.5);
            projectors.push(Projector::trusted(sym));
            labels.push(label);
        }
    }
    dedupe_labels(&mut labels);
    Decomposition::trusted(projectors, labels)
}

fn dedupe_labels(labels: &mut [String]) {
    for i in 1..labels.len() {
        if labels[..i].contains(&labels[i]) {
            let mut k = 2;
            while labels[..i].contains(&format!("{}#{k}", labels[i])) {
                k += 1;
            }
            labels[i] = format!("{}#{k}", labels[i]);
        }
    }
}

/// Slotwise nonzero products `P_i·Q_j` of two commuting families.
pub fn common_refinement(f1: &Family, f2: &Family, tol: &Tolerances) -> Result<Family, FrameworkError> {
    require_same_setting(f1, f2)?;
    if let Some((slot, i, j, norm)) = worst_commutator(f1, f2) {
        if norm > tol.comm {
            return Err(FrameworkError::NoncommutingSlots {
                slot,
                first: f1.slots()[slot].decomposition.label(i).to_string(),
                second: f2.slots()[slot].decomposition.label(j).to_string(),
                norm,
            });
        }
    }
    let slots = f1
        .slots()
        .iter()
        .zip(f2.slots())
        .map(|(s1, s2)| {
            let d = if Arc::ptr_eq(&s1.decomposition, &s2.decomposition) || s2.decomposition.is_trivial() {
                s1.decomposition.clone()
            } else if s1.decomposition.is_trivial() {
                s2.decomposition.clone()
            } else {
                Arc::new(refine_decompositions(&s1.decomposition, &s2.decomposition, tol))
            };
            Slot::new(s1.step, d)
        })
        .collect();
    Ok(Family::new(slots, f1.dynamics().clone(), f1.initial().clone())?)
}

// ---------------------------------------------------------------------------
// Single framework rule

#[derive(Clone, Debug, PartialEq)]
pub struct SingleFrameworkVerdict {
    pub accepted: bool,
    /// Positions (in the input list) of the first incompatible pair.
    pub conflict: Option<(usize, usize)>,
    pub reason: CompatibilityReason,
}

/// Decides whether the given histories may be combined in one description.
pub fn single_framework_check(
    histories: &[(History, &Family)],
    opts: &ConsistencyOptions,
    tol: &Tolerances,
) -> Result<SingleFrameworkVerdict, FrameworkError> {
    for (h, f) in histories {
        f.check(h)?;
    }
    // Histories drawn from the same family share its verdict.
    let mut distinct: Vec<usize> = Vec::new();
    for (i, (_, f)) in histories.iter().enumerate() {
        if !distinct.iter().any(|&d| std::ptr::eq(histories[d].1, *f)) {
            distinct.push(i);
        }
    }
    for (n, &i) in distinct.iter().enumerate() {
        for &j in &distinct[n + 1..] {
            let v = are_compatible(histories[i].1, histories[j].1, opts, tol)?;
            if !v.compatible {
                return Ok(SingleFrameworkVerdict {
                    accepted: false,
                    conflict: Some((i, j)),
                    reason: v.reason,
                });
            }
        }
    }
    if let Some((&first, rest)) = distinct.split_first() {
        let mut joint = histories[first].1.clone();
        for &j in rest {
            joint = common_refinement(&joint, histories[j].1, tol)?;
        }
        let v = verdict_from_refinement(&decoherence_matrix_with(&joint, Execution::default())?, opts);
        if !v.compatible {
            return Ok(SingleFrameworkVerdict {
                accepted: false,
                conflict: None,
                reason: v.reason,
            });
        }
    }
    Ok(SingleFrameworkVerdict {
        accepted: true,
        conflict: None,
        reason: CompatibilityReason::CommutingAndConsistent,
    })
}

// ---------------------------------------------------------------------------
// Enumeration

/// Candidate decompositions for one time slot.
#[derive(Clone, Debug)]
pub struct GridSlot {
    pub step: usize,
    pub candidates: Vec<(String, Arc<Decomposition>)>,
}

#[derive(Clone, Debug)]
pub struct FrameworkEntry {
    /// One index into each grid slot's candidate list.
    pub selection: Vec<usize>,
    pub names: Vec<String>,
    pub family: Family,
    pub report: ConsistencyReport,
    pub probabilities: Vec<HistoryProbability>,
    /// Frameworks with identical decoherence matrices share a class.
    pub class: usize,
}

impl FrameworkEntry {
    pub fn id(&self) -> String {
        self.names.join("/")
    }
}

/// Undirected incompatibility edges between framework ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IncompatibilityGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl IncompatibilityGraph {
    /// One `a -- b` line per edge.
    pub fn to_edge_list(&self) -> String {
        self.edges
            .iter()
            .map(|&(a, b)| format!("{} -- {}\n", self.nodes[a], self.nodes[b]))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub tried: u64,
    pub frameworks: Vec<FrameworkEntry>,
    pub graph: IncompatibilityGraph,
}

/// Tests every selection of one candidate per grid slot for consistency.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_frameworks(
    dynamics: &Arc<Dynamics>,
    initial: &Arc<DensityOperator>,
    grid: &[GridSlot],
    opts: &ConsistencyOptions,
    tol: &Tolerances,
    budget: u64,
    exec: Execution,
) -> Result<Enumeration, FrameworkError> {
    if grid.is_empty() || grid.iter().any(|g| g.candidates.is_empty()) {
        return Err(FrameworkError::EmptyGrid);
    }
    let size = grid
        .iter()
        .fold(1u128, |acc, g| acc.saturating_mul(g.candidates.len() as u128));
    if size > budget as u128 {
        return Err(FrameworkError::BudgetExceeded { size, budget });
    }
    let total = size as usize;
    let selection_of = |mut flat: usize| {
        let mut sel = vec![0; grid.len()];
        for (k, g) in grid.iter().enumerate().rev() {
            sel[k] = flat % g.candidates.len();
            flat /= g.candidates.len();
        }
        sel
    };

    // Families are independent; evaluate them in parallel and keep grid order.
    type Evaluated = Option<(Vec<usize>, Family, DecoherenceMatrix, ConsistencyReport)>;
    let evaluated = exec.map(total, |flat| -> Result<Evaluated, FrameworkError> {
        let sel = selection_of(flat);
        let slots = grid
            .iter()
            .zip(&sel)
            .map(|(g, &i)| Slot::new(g.step, g.candidates[i].1.clone()))
            .collect();
        let family = Family::new(slots, dynamics.clone(), initial.clone())?;
        let d = decoherence_matrix_with(&family, Execution::Sequential)?;
        let report = is_consistent(&d, opts);
        Ok(report.consistent.then_some((sel, family, d, report)))
    });

    let mut frameworks = Vec::new();
    let mut matrices: Vec<DecoherenceMatrix> = Vec::new();
    let mut class_reps: Vec<usize> = Vec::new();
    for item in evaluated {
        let Some((selection, family, d, report)) = item? else {
            continue;
        };
        let class = class_reps
            .iter()
            .position(|&r| {
                matrices[r]
                    .max_abs_diff(&d)
                    .is_some_and(|m| m <= EQUIVALENCE_TOL)
            })
            .unwrap_or_else(|| {
                class_reps.push(matrices.len());
                class_reps.len() - 1
            });
        let names = grid
            .iter()
            .zip(&selection)
            .map(|(g, &i)| format!("{}@{}", g.candidates[i].0, g.step))
            .collect();
        frameworks.push(FrameworkEntry {
            selection,
            names,
            family,
            probabilities: probabilities(&d, opts)?,
            report,
            class,
        });
        matrices.push(d);
    }

    let n = frameworks.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let verdicts = exec.map(pairs.len(), |k| {
        let (a, b) = pairs[k];
        are_compatible_with(
            &frameworks[a].family,
            &frameworks[b].family,
            opts,
            tol,
            Execution::Sequential,
        )
    });
    let mut edges = Vec::new();
    for (&pair, v) in pairs.iter().zip(verdicts) {
        if !v?.compatible {
            edges.push(pair);
        }
    }
    Ok(Enumeration {
        tried: size as u64,
        graph: IncompatibilityGraph {
            nodes: frameworks.iter().map(FrameworkEntry::id).collect(),
            edges,
        },
        frameworks,
    })
}

// ---------------------------------------------------------------------------
// Truth functionals

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TruthOutcome {
    /// Position (lexicographic history index) of the true history in each family.
    Exists(Vec<usize>),
    NoneExists,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthSearch {
    pub outcome: TruthOutcome,
    /// Product of the family sizes: every way of marking one history per family true.
    pub search_space: u128,
    /// Assignments decided so far, either visited or ruled out with their subtree.
    pub covered: u128,
    /// Containment relations `h1 ≤ h2` between histories of different families.
    pub containments: usize,
}

impl TruthSearch {
    pub fn exists(&self) -> bool {
        matches!(self.outcome, TruthOutcome::Exists(_))
    }
}

/// Slotwise `P1·P2 = P1`.
fn history_below(f1: &Family, h1: &History, f2: &Family, h2: &History, tol: f64) -> bool {
    f1.slots()
        .iter()
        .zip(f2.slots())
        .zip(h1.indices.iter().zip(&h2.indices))
        .all(|((s1, s2), (&i, &j))| {
            s1.decomposition
                .projector(i)
                .is_below(s2.decomposition.projector(j), tol)
        })
}

/// Exhaustive search for a truth assignment over several consistent families.
///
/// Each family gets exactly one true history, of weight above `tol.null`,
/// and whenever a true history is slotwise contained in a history of another
/// family that history must be true as well. Candidates are tried in order
/// of decreasing probability (ties by history index), so a single family
/// yields its most probable history.
pub fn universal_truth_functional_exists(
    families: &[&Family],
    opts: &ConsistencyOptions,
    tol: &Tolerances,
    budget: u64,
) -> Result<TruthSearch, FrameworkError> {
    let search_space = families
        .iter()
        .fold(1u128, |acc, f| acc.saturating_mul(f.len() as u128));
    if search_space > budget as u128 {
        return Err(FrameworkError::BudgetExceeded {
            size: search_space,
            budget,
        });
    }
    if let Some((first, rest)) = families.split_first() {
        for f in rest {
            require_same_setting(first, f)?;
        }
    }

    // Candidate order per family.
    let mut domains: Vec<Vec<usize>> = Vec::with_capacity(families.len());
    for (index, f) in families.iter().enumerate() {
        let d = decoherence_matrix_with(f, Execution::default())?;
        let report = is_consistent(&d, opts);
        if !report.consistent {
            return Err(FrameworkError::NotConsistent {
                index,
                magnitude: report.max_off_diagonal,
            });
        }
        let p = probabilities(&d, opts)?;
        let mut dom: Vec<usize> = (0..f.len()).filter(|&i| p[i].probability > tol.null).collect();
        dom.sort_by(|&a, &b| p[b].probability.total_cmp(&p[a].probability).then(a.cmp(&b)));
        domains.push(dom);
    }

    // implied[a][h] = (b, h2) pairs forced true when history h of family a is true.
    let mut implied: Vec<Vec<Vec<(usize, usize)>>> =
        families.iter().map(|f| vec![Vec::new(); f.len()]).collect();
    let mut containments = 0;
    for (a, fa) in families.iter().enumerate() {
        for &h1 in &domains[a] {
            let hist1 = fa.history(h1);
            for (b, fb) in families.iter().enumerate() {
                if a == b {
                    continue;
                }
                for h2 in 0..fb.len() {
                    if history_below(fa, &hist1, fb, &fb.history(h2), tol.orth) {
                        implied[a][h1].push((b, h2));
                        containments += 1;
                    }
                }
            }
        }
    }

    let sizes: Vec<u128> = families.iter().map(|f| f.len() as u128).collect();
    let mut search = Backtrack {
        domains: &domains,
        implied: &implied,
        sizes: &sizes,
        choice: vec![usize::MAX; families.len()],
        covered: 0,
    };
    let found = search.descend(0);
    let outcome = if found {
        TruthOutcome::Exists(search.choice.clone())
    } else {
        TruthOutcome::NoneExists
    };
    Ok(TruthSearch {
        outcome,
        search_space,
        covered: search.covered,
        containments,
    })
}

struct Backtrack<'a> {
    domains: &'a [Vec<usize>],
    implied: &'a [Vec<Vec<(usize, usize)>>],
    sizes: &'a [u128],
    choice: Vec<usize>,
    covered: u128,
}

impl Backtrack<'_> {
    /// Number of complete assignments below depth `depth`.
    fn subtree(&self, depth: usize) -> u128 {
        self.sizes[depth + 1..].iter().product()
    }

    fn admissible(&self, depth: usize, h: usize) -> bool {
        for &(b, hb) in &self.implied[depth][h] {
            if b < depth && self.choice[b] != hb {
                return false;
            }
        }
        for b in 0..depth {
            for &(c, hc) in &self.implied[b][self.choice[b]] {
                if c == depth && hc != h {
                    return false;
                }
            }
        }
        true
    }

    fn descend(&mut self, depth: usize) -> bool {
        if depth == self.domains.len() {
            self.covered += 1;
            return true;
        }
        let below = self.subtree(depth);
        // Zero-weight histories are never true.
        let dead = self.sizes[depth] - self.domains[depth].len() as u128;
        self.covered += dead * below;
        for k in 0..self.domains[depth].len() {
            let h = self.domains[depth][k];
            if !self.admissible(depth, h) {
                self.covered += below;
                continue;
            }
            self.choice[depth] = h;
            if self.descend(depth + 1) {
                return true;
            }
        }
        self.choice[depth] = usize::MAX;
        false
    }
}
