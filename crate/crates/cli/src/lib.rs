//! Commands behind the `cohist` binary. Each returns an [`AnalysisReport`]
//! whose `exit_status` is 0 for a positive result and 1 for a negative one;
//! load and usage problems are [`CliError`]s and exit with 2.

pub mod report;

use std::path::Path;

use cohist::frameworks::{
    are_compatible, enumerate_frameworks, universal_truth_functional_exists, CompatibilityReason,
    FrameworkError, GridSlot, TruthOutcome,
};
use cohist::histories::{formal_weights, HistoryProbability};
use cohist::models::{
    build_cat, build_single_spin, build_stern_gerlach_with, cat_suppression,
    measurement_framework_selection_report, with_spin_family, ModelError, Scenario,
};
use cohist::scenario::ScenarioError;
use cohist::{decoherence_matrix, is_consistent, probabilities, Condition, ConsistencyOptions, Execution, Family};
use thiserror::Error;

pub use report::AnalysisReport;
use report::*;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Load(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Flags shared by every analysis.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Settings {
    /// Consistency threshold; overrides the scenario file.
    pub tol: Option<f64>,
    pub weak_condition: bool,
    pub raw_weights: bool,
}

impl Settings {
    fn options(&self, scenario: &Scenario) -> ConsistencyOptions {
        ConsistencyOptions {
            tol: self.tol.or(scenario.consistency_options().tol),
            condition: if self.weak_condition {
                Condition::Weak
            } else {
                Condition::Medium
            },
        }
    }
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    Ok(Scenario::load(path)?)
}

fn weights(ps: &[HistoryProbability]) -> Vec<Weight> {
    ps.iter()
        .map(|p| Weight {
            label: p.label.clone(),
            value: p.probability,
        })
        .collect()
}

fn select<'a>(scenario: &'a Scenario, names: &[String]) -> Result<Vec<(String, &'a Family)>, CliError> {
    if names.is_empty() {
        return Ok(scenario
            .families()
            .iter()
            .map(|(n, f)| (n.clone(), f))
            .collect());
    }
    names
        .iter()
        .map(|n| Ok((n.clone(), scenario.family(n)?)))
        .collect()
}

fn family_result(name: &str, f: &Family, opts: &ConsistencyOptions, raw: bool) -> Result<FamilyResult, CliError> {
    let d = decoherence_matrix(f).map_err(|e| CliError::Usage(e.to_string()))?;
    let r = is_consistent(&d, opts);
    let probs = if r.consistent {
        Some(weights(&probabilities(&d, opts).map_err(|e| CliError::Usage(e.to_string()))?))
    } else {
        None
    };
    Ok(FamilyResult {
        name: name.to_string(),
        histories: d.len(),
        condition: r.condition.to_string(),
        tolerance: r.tol,
        consistent: r.consistent,
        max_off_diagonal: r.max_off_diagonal,
        witness: r
            .witness
            .filter(|_| !r.consistent)
            .map(|(a, b)| [d.labels()[a].clone(), d.labels()[b].clone()]),
        probabilities: probs,
        formal_weights: (raw && !r.consistent).then(|| weights(&formal_weights(&d))),
    })
}

fn families_report(
    command: &str,
    scenario: &Scenario,
    names: &[String],
    settings: &Settings,
) -> Result<AnalysisReport, CliError> {
    let opts = settings.options(scenario);
    let mut report = AnalysisReport::new(command, scenario.name());
    for (name, f) in select(scenario, names)? {
        report
            .families
            .push(family_result(&name, f, &opts, settings.raw_weights)?);
    }
    report.exit_status = i32::from(report.families.iter().any(|f| !f.consistent));
    Ok(report)
}

/// Verdict, largest off-diagonal and (when consistent) probabilities per family.
pub fn cmd_consistency(path: &Path, names: &[String], settings: &Settings) -> Result<AnalysisReport, CliError> {
    families_report("consistency", &load(path)?, names, settings)
}

/// Like [`cmd_consistency`]; inconsistent families only show formal weights
/// when `raw_weights` is set.
pub fn cmd_probabilities(path: &Path, names: &[String], settings: &Settings) -> Result<AnalysisReport, CliError> {
    families_report("probabilities", &load(path)?, names, settings)
}

fn framework_error(e: FrameworkError) -> CliError {
    CliError::Usage(e.to_string())
}

/// Pairwise compatibility of the named families.
pub fn cmd_compatibility(path: &Path, names: &[String], settings: &Settings) -> Result<AnalysisReport, CliError> {
    let scenario = load(path)?;
    let opts = settings.options(&scenario);
    let fams = select(&scenario, names)?;
    let mut pairs = Vec::new();
    let mut edges = Vec::new();
    for i in 0..fams.len() {
        for j in (i + 1)..fams.len() {
            let v = are_compatible(fams[i].1, fams[j].1, &opts, scenario.tolerances()).map_err(framework_error)?;
            let (reason, magnitude) = match &v.reason {
                CompatibilityReason::CommutingAndConsistent => ("commuting, refinement consistent".to_string(), 0.0),
                CompatibilityReason::Noncommuting { step, first, second, norm, .. } => {
                    (format!("[{first}, {second}] != 0 at step {step}"), *norm)
                }
                CompatibilityReason::RefinementInconsistent { alpha, beta, magnitude } => {
                    (format!("refinement inconsistent at {alpha} / {beta}"), *magnitude)
                }
            };
            if !v.compatible {
                edges.push([fams[i].0.clone(), fams[j].0.clone()]);
            }
            pairs.push(PairVerdict {
                a: fams[i].0.clone(),
                b: fams[j].0.clone(),
                compatible: v.compatible,
                reason,
                magnitude,
            });
        }
    }
    let mut report = AnalysisReport::new("compatibility", scenario.name());
    report.exit_status = i32::from(!edges.is_empty());
    report.compatibility = Some(CompatibilityResult {
        families: fams.into_iter().map(|(n, _)| n).collect(),
        pairs,
        edges,
    });
    Ok(report)
}

/// Parses `STEP:name,name,...`.
pub fn parse_slot(spec: &str) -> Result<(usize, Vec<String>), CliError> {
    let bad = || CliError::Usage(format!("slot `{spec}` is not of the form STEP:name[,name...]"));
    let (step, names) = spec.split_once(':').ok_or_else(bad)?;
    let step = step.trim().parse().map_err(|_| bad())?;
    let names: Vec<String> = names
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(bad());
    }
    Ok((step, names))
}

/// Every selection of one decomposition per slot; consistent ones are listed
/// with the incompatibility edges between them.
pub fn cmd_enumerate(
    path: &Path,
    slots: &[String],
    budget: u64,
    settings: &Settings,
) -> Result<AnalysisReport, CliError> {
    let scenario = load(path)?;
    let opts = settings.options(&scenario);
    if slots.is_empty() {
        return Err(CliError::Usage("at least one --slot is required".into()));
    }
    let mut grid = Vec::new();
    for spec in slots {
        let (step, names) = parse_slot(spec)?;
        let candidates = names
            .into_iter()
            .map(|n| Ok((n.clone(), scenario.decomposition(&n)?.clone())))
            .collect::<Result<Vec<_>, CliError>>()?;
        grid.push(GridSlot { step, candidates });
    }
    let e = enumerate_frameworks(
        scenario.dynamics(),
        scenario.initial(),
        &grid,
        &opts,
        scenario.tolerances(),
        budget,
        Execution::default(),
    )
    .map_err(framework_error)?;
    let mut report = AnalysisReport::new("enumerate", scenario.name());
    report.exit_status = i32::from(e.frameworks.is_empty());
    report.enumeration = Some(EnumerationResult {
        tried: e.tried,
        edges: e
            .graph
            .edges
            .iter()
            .map(|&(a, b)| [e.graph.nodes[a].clone(), e.graph.nodes[b].clone()])
            .collect(),
        frameworks: e
            .frameworks
            .iter()
            .map(|f| FrameworkResult {
                id: f.id(),
                class: f.class,
                max_off_diagonal: f.report.max_off_diagonal,
                probabilities: weights(&f.probabilities),
            })
            .collect(),
    });
    Ok(report)
}

/// Searches for one true history per family respecting containment.
pub fn cmd_truth_functional(
    path: &Path,
    names: &[String],
    budget: u64,
    settings: &Settings,
) -> Result<AnalysisReport, CliError> {
    let scenario = load(path)?;
    let opts = settings.options(&scenario);
    let fams = select(&scenario, names)?;
    let refs: Vec<&Family> = fams.iter().map(|(_, f)| *f).collect();
    let r = universal_truth_functional_exists(&refs, &opts, scenario.tolerances(), budget)
        .map_err(framework_error)?;
    let assignment = match &r.outcome {
        TruthOutcome::Exists(choice) => Some(
            fams.iter()
                .zip(choice)
                .map(|((n, f), &h)| TruthAssignment {
                    family: n.clone(),
                    history: f.label(&f.history(h)),
                })
                .collect(),
        ),
        TruthOutcome::NoneExists => None,
    };
    let mut report = AnalysisReport::new("truth-functional", scenario.name());
    report.exit_status = i32::from(assignment.is_none());
    report.truth = Some(TruthResult {
        families: fams.into_iter().map(|(n, _)| n).collect(),
        exists: assignment.is_some(),
        assignment,
        search_space: r.search_space as u64,
        covered: r.covered as u64,
        containments: r.containments,
    });
    Ok(report)
}

// ---------------------------------------------------------------------------
// Demos

#[derive(Clone, Debug, PartialEq)]
pub enum Demo {
    Spin {
        init: String,
        measure: String,
    },
    SternGerlach {
        w: String,
        v: Vec<String>,
        env: usize,
        init: String,
    },
    Cat {
        env: usize,
        theta: f64,
    },
}

/// `x`, `-y`, or `a,b,c`.
pub fn parse_direction(s: &str) -> Result<[f64; 3], CliError> {
    let named = match s.trim() {
        "x" | "+x" => Some([1.0, 0.0, 0.0]),
        "y" | "+y" => Some([0.0, 1.0, 0.0]),
        "z" | "+z" => Some([0.0, 0.0, 1.0]),
        "-x" => Some([-1.0, 0.0, 0.0]),
        "-y" => Some([0.0, -1.0, 0.0]),
        "-z" => Some([0.0, 0.0, -1.0]),
        _ => None,
    };
    if let Some(d) = named {
        return Ok(d);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("direction `{s}` is neither x/y/z nor `a,b,c`")))?;
    <[f64; 3]>::try_from(parts)
        .map_err(|_| CliError::Usage(format!("direction `{s}` needs three components")))
}

fn family_name(token: &str) -> String {
    if token.contains(',') {
        "n".to_string()
    } else {
        token.trim().trim_start_matches('+').to_string()
    }
}

/// Builds a model, runs its analysis and returns the scenario alongside.
pub fn cmd_demo(demo: &Demo, settings: &Settings) -> Result<(AnalysisReport, Scenario), CliError> {
    match demo {
        Demo::Spin { init, measure } => {
            let name = family_name(measure);
            let s = with_spin_family(&build_single_spin(parse_direction(init)?)?, &name, parse_direction(measure)?)?;
            let mut report = families_report("demo spin", &s, &[name], settings)?;
            report.scenario = s.name().to_string();
            Ok((report, s))
        }
        Demo::SternGerlach { w, v, env, init } => {
            let s = build_stern_gerlach_with(parse_direction(w)?, *env, parse_direction(init)?)?;
            let opts = settings.options(&s);
            let mut report = families_report("demo stern-gerlach", &s, &["w-framework".to_string()], settings)?;
            let cands = v
                .iter()
                .map(|t| Ok((t.clone(), parse_direction(t)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let rows = measurement_framework_selection_report(&s, &cands, &opts, Execution::default())?;
            report.selection = Some(
                rows.iter()
                    .map(|r| SelectionResult {
                        name: r.name.clone(),
                        direction: r.direction,
                        consistent: r.consistent,
                        witness: r.witness,
                        tolerance: r.tol,
                        probabilities: r.probabilities.as_deref().map(weights),
                    })
                    .collect(),
            );
            // Only the w-framework verdict decides the exit status.
            Ok((report, s))
        }
        Demo::Cat { env, theta } => {
            let s = build_cat(*env, *theta)?;
            let opts = settings.options(&s);
            let names = ["cat".to_string(), "interference".to_string()];
            let mut report = families_report("demo cat", &s, &names, settings)?;
            let rows = cat_suppression(*env, *theta, &opts, Execution::default())?;
            report.suppression = Some(
                rows.iter()
                    .map(|r| SuppressionResult {
                        env_qubits: r.env_qubits,
                        coherence: r.coherence.normalized,
                        closed_form: r.closed_form,
                        off_diagonal: r.coherence.off_diagonal,
                        interference_consistent: r.interference_consistent,
                        p_live: r.cat_probabilities[0],
                        p_dead: r.cat_probabilities[1],
                    })
                    .collect(),
            );
            // The cat framework itself is always consistent; interference is expected to fail.
            report.exit_status = i32::from(!report.families[0].consistent);
            Ok((report, s))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_parsing() {
        assert_eq!(parse_slot("2:x, z").unwrap(), (2, vec!["x".to_string(), "z".to_string()]));
        assert!(parse_slot("x,z").is_err());
        assert!(parse_slot("1:").is_err());
    }

    #[test]
    fn direction_parsing() {
        assert_eq!(parse_direction("-z").unwrap(), [0.0, 0.0, -1.0]);
        assert_eq!(parse_direction("0.6,0,0.8").unwrap(), [0.6, 0.0, 0.8]);
        assert!(parse_direction("0.6,0").is_err());
        assert!(parse_direction("up").is_err());
    }

    #[test]
    fn spin_demo_measures_x() {
        let demo = Demo::Spin { init: "z".into(), measure: "x".into() };
        let (r, _) = cmd_demo(&demo, &Settings::default()).unwrap();
        let p = r.families[0].probabilities.as_ref().unwrap();
        assert!((p[0].value - 0.5).abs() < 1e-15 && (p[1].value - 0.5).abs() < 1e-15);
        assert_eq!(r.exit_status, 0);
    }

    #[test]
    fn tolerance_precedence() {
        let s = build_single_spin([0.0, 0.0, 1.0]).unwrap();
        let mut file = s.file().clone();
        file.tolerances.consistency = Some(0.5);
        let s = Scenario::from_file(file).unwrap();
        assert_eq!(Settings::default().options(&s).tol, Some(0.5));
        let cli = Settings { tol: Some(0.1), ..Default::default() };
        assert_eq!(cli.options(&s).tol, Some(0.1));
        let plain = build_single_spin([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(Settings::default().options(&plain).tol, None);
    }
}
