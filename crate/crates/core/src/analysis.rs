//! Estimates with error bars from count tables, readout-error correction and
//! assembly of the two contextuality witnesses.
//!
//! Uncertainties propagate by quadrature over independent terms. Singles are
//! pooled over every first detection on a ray (single chains and the first
//! step of pair chains); edge joints pool both interrogation orders.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Edge, KsModel, CLASSICAL_BOUND_CHI13, CLASSICAL_BOUND_CHI4};
use crate::sim::{CountTable, StateCounts, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub corrected: bool,
    pub sample_size: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            corrected: false,
            sample_size: 0,
        }
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.value, self.stderr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionModel {
    pub eps_dark_to_bright: f64,
    pub eps_bright_to_dark: f64,
}

impl ConfusionModel {
    pub fn new(eps_dark_to_bright: f64, eps_bright_to_dark: f64) -> Self {
        ConfusionModel {
            eps_dark_to_bright,
            eps_bright_to_dark,
        }
    }

    /// `1 - eps_D - eps_B`, the determinant of the 2x2 confusion matrix.
    pub fn contrast(&self) -> f64 {
        1.0 - self.eps_dark_to_bright - self.eps_bright_to_dark
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.contrast();
        if k.is_nan() || k <= 0.0 {
            return Err(Error::NotInvertible(k));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.eps_dark_to_bright == 0.0 && self.eps_bright_to_dark == 0.0
    }
}

pub fn estimate_probability(dark_count: u64, shots: u64) -> Result<Estimate> {
    if shots == 0 {
        return Err(Error::Estimate("no shots".into()));
    }
    if dark_count > shots {
        return Err(Error::Estimate(format!("{dark_count} dark counts exceed {shots} shots")));
    }
    let n = shots as f64;
    let p = dark_count as f64 / n;
    let stderr = if dark_count == 0 || dark_count == shots {
        3.0 / n
    } else {
        (p * (1.0 - p) / n).sqrt()
    };
    Ok(Estimate {
        value: p,
        stderr,
        corrected: false,
        sample_size: shots,
    })
}

/// Constrained binomial ML inversion of a single detection.
pub fn correct_ml(raw: &Estimate, confusion: &ConfusionModel) -> Result<Estimate> {
    confusion.validate()?;
    let k = confusion.contrast();
    Ok(Estimate {
        value: ((raw.value - confusion.eps_bright_to_dark) / k).clamp(0.0, 1.0),
        stderr: raw.stderr / k,
        corrected: true,
        sample_size: raw.sample_size,
    })
}

/// Inverts the two-step product likelihood for a dark-dark joint:
/// `q_DD = k^2 p_ij + eps_B k (p_i + p_j) + eps_B^2`, with the marginals
/// taken from already-corrected singles.
pub fn correct_pair(raw: &Estimate, p_i: f64, p_j: f64, confusion: &ConfusionModel) -> Result<Estimate> {
    confusion.validate()?;
    let k = confusion.contrast();
    let eb = confusion.eps_bright_to_dark;
    let value = (raw.value - eb * k * (p_i + p_j) - eb * eb) / (k * k);
    Ok(Estimate {
        value: value.clamp(0.0, 1.0),
        stderr: raw.stderr / (k * k),
        corrected: true,
        sample_size: raw.sample_size,
    })
}

/// `<V_i>` for every ray and `<V_i V_j>` for every edge.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub singles: BTreeMap<usize, Estimate>,
    pub pairs: BTreeMap<Edge, Estimate>,
}

impl EstimateSet {
    pub fn single(&self, i: usize) -> Result<&Estimate> {
        self.singles
            .get(&i)
            .ok_or_else(|| Error::MissingEstimate(format!("<V_{i}>")))
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<&Estimate> {
        self.pairs
            .get(&(i.min(j), i.max(j)))
            .ok_or_else(|| Error::MissingEstimate(format!("<V_{i} V_{j}>")))
    }

    /// Exact expectation values, with zero stderr.
    pub fn exact(singles: impl IntoIterator<Item = (usize, f64)>, pairs: impl IntoIterator<Item = (Edge, f64)>) -> Self {
        EstimateSet {
            singles: singles.into_iter().map(|(i, v)| (i, Estimate::exact(v))).collect(),
            pairs: pairs.into_iter().map(|(e, v)| (e, Estimate::exact(v))).collect(),
        }
    }
}

fn check_table(t: &CountTable) -> Result<()> {
    if !t.is_consistent() {
        return Err(Error::Estimate(format!("count table {} is inconsistent", t.sub_experiment)));
    }
    Ok(())
}

/// Raw estimates, or corrected ones when `confusion` is given.
pub fn estimates_from_counts(
    tables: &[CountTable],
    model: &KsModel,
    confusion: Option<&ConfusionModel>,
) -> Result<EstimateSet> {
    let mut first: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    let mut joint: BTreeMap<Edge, (u64, u64)> = BTreeMap::new();
    for t in tables {
        check_table(t)?;
        let e = first.entry(t.chain[0]).or_default();
        e.0 += t.first_dark();
        e.1 += t.shots;
        if let [i, j] = t.chain[..] {
            let e = joint.entry((i.min(j), i.max(j))).or_default();
            e.0 += t.count(Symbol::DD);
            e.1 += t.shots;
        }
    }
    let mut out = EstimateSet::default();
    for ray in model.rays.iter().map(|r| r.index) {
        let &(dark, shots) = first
            .get(&ray)
            .ok_or_else(|| Error::MissingEstimate(format!("<V_{ray}>: no detections")))?;
        let raw = estimate_probability(dark, shots)?;
        let est = match confusion {
            Some(c) => correct_ml(&raw, c)?,
            None => raw,
        };
        out.singles.insert(ray, est);
    }
    for &(i, j) in &model.graph.edges {
        let &(dd, shots) = joint
            .get(&(i, j))
            .ok_or_else(|| Error::MissingEstimate(format!("<V_{i} V_{j}>: no pair chain")))?;
        let raw = estimate_probability(dd, shots)?;
        let est = match confusion {
            Some(c) => correct_pair(&raw, out.singles[&i].value, out.singles[&j].value, c)?,
            None => raw,
        };
        out.pairs.insert((i, j), est);
    }
    Ok(out)
}

/// Witness as `constant + sum c_i <V_i> + sum c_ij <V_i V_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub constant: f64,
    pub singles: BTreeMap<usize, f64>,
    pub pairs: BTreeMap<Edge, f64>,
}

impl LinearForm {
    fn add_single(&mut self, i: usize, c: f64) {
        *self.singles.entry(i).or_default() += c;
    }

    fn add_pair(&mut self, i: usize, j: usize, c: f64) {
        *self.pairs.entry((i.min(j), i.max(j))).or_default() += c;
    }

    pub fn evaluate(&self, set: &EstimateSet) -> Result<Estimate> {
        let mut value = self.constant;
        let mut var = 0.0;
        let mut corrected = false;
        let mut n = 0;
        for (&i, &c) in &self.singles {
            let e = set.single(i)?;
            value += c * e.value;
            var += (c * e.stderr).powi(2);
            corrected |= e.corrected;
            n += e.sample_size;
        }
        for (&(i, j), &c) in &self.pairs {
            let e = set.pair(i, j)?;
            value += c * e.value;
            var += (c * e.stderr).powi(2);
            corrected |= e.corrected;
            n += e.sample_size;
        }
        Ok(Estimate {
            value,
            stderr: var.sqrt(),
            corrected,
            sample_size: n,
        })
    }
}

/// chi13 in terms of projector expectations:
/// `<A_i> = 1 - 2<V_i>`,
/// `<A_iA_j> = 1 - 2<V_i> - 2<V_j> + 4<V_iV_j>`,
/// `-<A_iA_jA_k> = -1 + 2 sum V - 4 sum VV` with the `8<VVV>` term dropped.
pub fn chi13_linear_form(model: &KsModel) -> LinearForm {
    let co = &model.coefficients;
    let mut f = LinearForm {
        constant: 0.0,
        singles: BTreeMap::new(),
        pairs: BTreeMap::new(),
    };
    for ray in model.rays.iter().map(|r| r.index) {
        let mu = co.mu(ray) as f64;
        f.constant += mu;
        f.add_single(ray, -2.0 * mu);
    }
    for (&(i, j), &mu) in &co.mu_ij {
        let mu = mu as f64;
        f.constant -= mu;
        f.add_single(i, 2.0 * mu);
        f.add_single(j, 2.0 * mu);
        f.add_pair(i, j, -4.0 * mu);
    }
    for (&(i, j, k), &mu) in &co.mu_ijk {
        let mu = mu as f64;
        f.constant -= mu;
        for r in [i, j, k] {
            f.add_single(r, 2.0 * mu);
        }
        for (a, b) in [(i, j), (i, k), (j, k)] {
            f.add_pair(a, b, -4.0 * mu);
        }
    }
    f.singles.retain(|_, c| *c != 0.0);
    f.pairs.retain(|_, c| *c != 0.0);
    f
}

pub fn assemble_chi13(set: &EstimateSet, model: &KsModel) -> Result<Estimate> {
    chi13_linear_form(model).evaluate(set)
}

pub fn assemble_chi4(set: &EstimateSet) -> Result<Estimate> {
    let form = LinearForm {
        constant: 0.0,
        singles: (10..=13).map(|i| (i, 1.0)).collect(),
        pairs: BTreeMap::new(),
    };
    form.evaluate(set)
}

/// `(value - bound) / stderr`.
pub fn significance(est: &Estimate, classical_bound: f64) -> Result<f64> {
    if est.stderr.is_nan() || est.stderr <= 0.0 {
        return Err(Error::ZeroStderr);
    }
    Ok((est.value - classical_bound) / est.stderr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateResult {
    pub state: String,
    pub fidelity: Option<f64>,
    pub raw_chi13: Estimate,
    pub corrected_chi13: Estimate,
    pub raw_chi4: Estimate,
    pub corrected_chi4: Estimate,
    pub significance_chi13: f64,
    pub significance_chi4: f64,
}

pub fn analyze_state(counts: &StateCounts, model: &KsModel, confusion: &ConfusionModel) -> Result<StateResult> {
    let raw = estimates_from_counts(&counts.tables, model, None)?;
    let corrected = estimates_from_counts(&counts.tables, model, Some(confusion))?;
    let corrected_chi13 = assemble_chi13(&corrected, model)?;
    let corrected_chi4 = assemble_chi4(&corrected)?;
    Ok(StateResult {
        state: counts.state.clone(),
        fidelity: None,
        raw_chi13: assemble_chi13(&raw, model)?,
        raw_chi4: assemble_chi4(&raw)?,
        significance_chi13: significance(&corrected_chi13, CLASSICAL_BOUND_CHI13 as f64)?,
        significance_chi4: significance(&corrected_chi4, CLASSICAL_BOUND_CHI4 as f64)?,
        corrected_chi13,
        corrected_chi4,
    })
}

pub const RESULTS_CSV_HEADER: &str = "state,fidelity,raw_chi13,raw_chi13_stderr,chi13,chi13_stderr,\
significance_chi13,raw_chi4,raw_chi4_stderr,chi4,chi4_stderr,significance_chi4";

fn fmt_fidelity(f: Option<f64>) -> String {
    f.map(|f| format!("{f:.6}")).unwrap_or_default()
}

pub fn results_csv(results: &[StateResult]) -> String {
    let mut s = String::from(RESULTS_CSV_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.3},{:.6},{:.6},{:.6},{:.6},{:.3}",
            r.state,
            fmt_fidelity(r.fidelity),
            r.raw_chi13.value,
            r.raw_chi13.stderr,
            r.corrected_chi13.value,
            r.corrected_chi13.stderr,
            r.significance_chi13,
            r.raw_chi4.value,
            r.raw_chi4.stderr,
            r.corrected_chi4.value,
            r.corrected_chi4.stderr,
            r.significance_chi4,
        );
    }
    s
}

/// Fixed-width table for terminals.
pub fn results_text(results: &[StateResult]) -> String {
    let mut s = format!(
        "{:<7} {:>8} {:>18} {:>18} {:>7} {:>16} {:>16} {:>7}\n",
        "state", "fidelity", "raw chi13", "chi13", "sigma", "raw chi4", "chi4", "sigma"
    );
    let pm = |e: &Estimate, d: usize| format!("{:.d$}({:.d$})", e.value, e.stderr, d = d);
    for r in results {
        let _ = writeln!(
            s,
            "{:<7} {:>8} {:>18} {:>18} {:>7.1} {:>16} {:>16} {:>7.1}",
            r.state,
            r.fidelity.map(|f| format!("{f:.4}")).unwrap_or_else(|| "-".into()),
            pm(&r.raw_chi13, 3),
            pm(&r.corrected_chi13, 3),
            r.significance_chi13,
            pm(&r.raw_chi4, 4),
            pm(&r.corrected_chi4, 4),
            r.significance_chi4,
        );
    }
    s
}
