//! Analysis reports and their two renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub name: String,
    pub histories: usize,
    pub condition: String,
    pub tolerance: f64,
    pub consistent: bool,
    pub max_off_diagonal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<Weight>>,
    /// Diagonal weights of an inconsistent family; formal weights, not probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formal_weights: Option<Vec<Weight>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a: String,
    pub b: String,
    pub compatible: bool,
    pub reason: String,
    /// Commutator norm or refinement off-diagonal; 0 when compatible.
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityResult {
    pub families: Vec<String>,
    pub pairs: Vec<PairVerdict>,
    pub edges: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameworkResult {
    pub id: String,
    pub class: usize,
    pub max_off_diagonal: f64,
    pub probabilities: Vec<Weight>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub tried: u64,
    pub frameworks: Vec<FrameworkResult>,
    pub edges: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthAssignment {
    pub family: String,
    pub history: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthResult {
    pub families: Vec<String>,
    pub exists: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<TruthAssignment>>,
    pub search_space: u64,
    pub covered: u64,
    pub containments: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub name: String,
    pub direction: [f64; 3],
    pub consistent: bool,
    pub witness: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<Weight>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuppressionResult {
    pub env_qubits: usize,
    pub coherence: f64,
    pub closed_form: f64,
    pub off_diagonal: f64,
    pub interference_consistent: bool,
    pub p_live: f64,
    pub p_dead: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub command: String,
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<FamilyResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compatibility: Option<CompatibilityResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration: Option<EnumerationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<SelectionResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppression: Option<Vec<SuppressionResult>>,
    pub exit_status: i32,
}

impl AnalysisReport {
    pub fn new(command: &str, scenario: &str) -> Self {
        AnalysisReport {
            command: command.to_string(),
            scenario: scenario.to_string(),
            families: Vec::new(),
            compatibility: None,
            enumeration: None,
            truth: None,
            selection: None,
            suppression: None,
            exit_status: 0,
        }
    }

    pub fn to_machine(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command:  {}", self.command);
        let _ = writeln!(out, "scenario: {}", self.scenario);
        if !self.families.is_empty() {
            render_families(&mut out, &self.families);
        }
        if let Some(c) = &self.compatibility {
            render_compatibility(&mut out, c);
        }
        if let Some(e) = &self.enumeration {
            render_enumeration(&mut out, e);
        }
        if let Some(t) = &self.truth {
            render_truth(&mut out, t);
        }
        if let Some(rows) = &self.selection {
            render_selection(&mut out, rows);
        }
        if let Some(rows) = &self.suppression {
            render_suppression(&mut out, rows);
        }
        let _ = writeln!(out, "\nexit status: {}", self.exit_status);
        out
    }
}

/// Twelve significant digits, fixed notation where that stays readable.
pub fn probability(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

pub fn scientific(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.6e}")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Left-aligned columns separated by two spaces.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if k + 1 == cells.len() {
                s.push_str(c);
            } else {
                s.push_str(c);
                s.extend(std::iter::repeat_n(' ', w - c.chars().count() + 2));
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
}

fn weights(out: &mut String, title: &str, ws: &[Weight], value_header: &str) {
    let _ = writeln!(out, "\n{title}");
    let rows: Vec<Vec<String>> = ws
        .iter()
        .map(|w| vec![w.label.clone(), probability(w.value)])
        .collect();
    table(out, &["history", value_header], &rows);
}

fn render_families(out: &mut String, families: &[FamilyResult]) {
    let _ = writeln!(out, "\nfamilies");
    let rows: Vec<Vec<String>> = families
        .iter()
        .map(|f| {
            vec![
                f.name.clone(),
                f.histories.to_string(),
                f.condition.clone(),
                scientific(f.tolerance),
                if f.consistent { "consistent" } else { "inconsistent" }.to_string(),
                scientific(f.max_off_diagonal),
                f.witness
                    .as_ref()
                    .map_or_else(|| "-".to_string(), |[a, b]| format!("{a} / {b}")),
            ]
        })
        .collect();
    table(
        out,
        &["family", "histories", "condition", "tolerance", "verdict", "max |D(a,b)|", "witness"],
        &rows,
    );
    for f in families {
        if let Some(p) = &f.probabilities {
            weights(out, &format!("probabilities: {}", f.name), p, "probability");
        }
        if let Some(w) = &f.formal_weights {
            weights(
                out,
                &format!("formal weights: {} (formal weight — not a probability)", f.name),
                w,
                "formal weight",
            );
        }
    }
}

fn render_compatibility(out: &mut String, c: &CompatibilityResult) {
    let _ = writeln!(out, "\ncompatibility");
    let rows: Vec<Vec<String>> = c
        .pairs
        .iter()
        .map(|p| {
            vec![
                p.a.clone(),
                p.b.clone(),
                yes_no(p.compatible).to_string(),
                p.reason.clone(),
                scientific(p.magnitude),
            ]
        })
        .collect();
    table(out, &["family", "family", "compatible", "reason", "magnitude"], &rows);
    let _ = writeln!(out, "\nincompatibility edges: {}", c.edges.len());
    for [a, b] in &c.edges {
        let _ = writeln!(out, "{a} -- {b}");
    }
}

fn render_enumeration(out: &mut String, e: &EnumerationResult) {
    let _ = writeln!(
        out,
        "\nframeworks: {} consistent of {} tried",
        e.frameworks.len(),
        e.tried
    );
    let rows: Vec<Vec<String>> = e
        .frameworks
        .iter()
        .map(|f| vec![f.id.clone(), f.class.to_string(), scientific(f.max_off_diagonal)])
        .collect();
    table(out, &["framework", "class", "max |D(a,b)|"], &rows);
    for f in &e.frameworks {
        weights(out, &format!("probabilities: {}", f.id), &f.probabilities, "probability");
    }
    let _ = writeln!(out, "\nincompatibility edges: {}", e.edges.len());
    for [a, b] in &e.edges {
        let _ = writeln!(out, "{a} -- {b}");
    }
}

fn render_truth(out: &mut String, t: &TruthResult) {
    let _ = writeln!(out, "\ntruth functional over {} families", t.families.len());
    let _ = writeln!(out, "exists:       {}", yes_no(t.exists));
    let _ = writeln!(out, "search space: {}", t.search_space);
    let _ = writeln!(out, "covered:      {}", t.covered);
    let _ = writeln!(out, "containments: {}", t.containments);
    if let Some(a) = &t.assignment {
        let rows: Vec<Vec<String>> = a
            .iter()
            .map(|x| vec![x.family.clone(), x.history.clone()])
            .collect();
        let _ = writeln!(out);
        table(out, &["family", "true history"], &rows);
    }
}

fn render_selection(out: &mut String, rows: &[SelectionResult]) {
    let _ = writeln!(out, "\nframework selection");
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format!("({}, {}, {})", r.direction[0], r.direction[1], r.direction[2]),
                if r.consistent { "consistent" } else { "inconsistent" }.to_string(),
                scientific(r.witness),
                scientific(r.tolerance),
            ]
        })
        .collect();
    table(out, &["v", "direction", "verdict", "witness", "tolerance"], &cells);
    for r in rows {
        if let Some(p) = &r.probabilities {
            weights(out, &format!("probabilities: v = {}", r.name), p, "probability");
        }
    }
}

fn render_suppression(out: &mut String, rows: &[SuppressionResult]) {
    let _ = writeln!(out, "\ninterference suppression");
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.env_qubits.to_string(),
                probability(r.coherence),
                probability(r.closed_form),
                scientific(r.off_diagonal),
                yes_no(r.interference_consistent).to_string(),
                probability(r.p_live),
                probability(r.p_dead),
            ]
        })
        .collect();
    table(
        out,
        &["env", "coherence", "|cos θ|^n", "|D(a,b)|", "consistent", "p(live)", "p(dead)"],
        &cells,
    );
}
