//! Static verification suite: graph, operator identities, classical bounds
//! and settings-table mappings. Needs no simulation output.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::hv::{max_chi13_noncontextual, max_chi4_constrained, Chi4Outcome};
use crate::linalg::{frobenius_distance, CMat3};
use crate::model::{KsModel, Triangle, CLASSICAL_BOUND_CHI13, CLASSICAL_BOUND_CHI4, QUANTUM_CHI13, QUANTUM_CHI4};
use crate::pulse::{alpha, covered_pairs, verify_mapping, MeasurementSetting, ALPHA_DISPLAY_TOL};

pub const CHI13_OPERATOR_TOL: f64 = 1e-9;
pub const CHI4_OPERATOR_TOL: f64 = 1e-12;
pub const EXPECTED_EDGES: usize = 24;
pub const EXPECTED_TRIANGLES: [Triangle; 4] = [(1, 2, 3), (1, 4, 7), (2, 5, 8), (3, 6, 9)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn run_verification(model: &KsModel, settings: &[MeasurementSetting]) -> VerifyReport {
    let mut checks = Vec::new();
    let g = &model.graph;

    checks.push(check(
        "edge count",
        g.edges.len() == EXPECTED_EDGES,
        format!("{} edges (expected {EXPECTED_EDGES})", g.edges.len()),
    ));
    let want: BTreeSet<Triangle> = EXPECTED_TRIANGLES.into_iter().collect();
    checks.push(check(
        "triangles",
        g.triangles == want,
        format!("found {:?}", g.triangles),
    ));

    let i3 = CMat3::identity();
    let d13 = frobenius_distance(&model.chi13_operator(), &i3.scale_real(QUANTUM_CHI13));
    checks.push(check(
        "chi13 operator",
        d13 < CHI13_OPERATOR_TOL,
        format!("||chi13 - (83/3) I||_F = {d13:.3e}"),
    ));
    let d4 = frobenius_distance(&model.chi4_operator(), &i3.scale_real(QUANTUM_CHI4));
    checks.push(check(
        "chi4 operator",
        d4 < CHI4_OPERATOR_TOL,
        format!("||chi4 - (4/3) I||_F = {d4:.3e}"),
    ));

    let b13 = max_chi13_noncontextual(model);
    checks.push(check(
        "classical bound chi13",
        b13.maximum == CLASSICAL_BOUND_CHI13,
        format!(
            "classical bound χ13 = {} over {} assignments ({} maximizers)",
            b13.maximum, b13.enumerated, b13.argmax_count
        ),
    ));
    match max_chi4_constrained(model) {
        Chi4Outcome::Bound(b4) => checks.push(check(
            "classical bound chi4",
            b4.maximum == CLASSICAL_BOUND_CHI4,
            format!(
                "classical bound χ4 = {} over {} admissible assignments",
                b4.maximum, b4.admissible_count
            ),
        )),
        Chi4Outcome::Uncolorable { enumerated } => checks.push(check(
            "classical bound chi4",
            false,
            format!("no admissible assignment among {enumerated}"),
        )),
    }

    let a = alpha();
    checks.push(check(
        "alpha",
        (a - 0.392 * PI).abs() < ALPHA_DISPLAY_TOL,
        format!("alpha = {a:.9} rad = {:.5} pi", a / PI),
    ));
    for s in settings {
        let (passed, detail) = match verify_mapping(s) {
            Ok(r) => (true, format!("max deficit {:.3e}", r.max_deficit())),
            Err(e) => (false, e.to_string()),
        };
        checks.push(check(&format!("mapping {}", s.id), passed, detail));
    }
    let covered = covered_pairs(settings);
    let missing: Vec<_> = g.edges.iter().filter(|e| !covered.contains(e)).collect();
    checks.push(check(
        "edge coverage",
        missing.is_empty(),
        if missing.is_empty() {
            format!("all {} edges jointly measurable", g.edges.len())
        } else {
            format!("uncovered edges {missing:?}")
        },
    ));
    VerifyReport { checks }
}
