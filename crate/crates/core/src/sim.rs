//! Monte Carlo simulation of the sequential fluorescence-detection experiment.
//!
//! Each shot prepares the state, applies the setting unitary, swaps the
//! interrogated ray's slot onto the dark state |3>, and detects. Pair chains
//! continue to a second swap and detection only when the first readout is
//! dark. Collapse always follows the true projective outcome; the
//! stop/continue decision follows the (possibly misread) readout.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::ConfusionModel;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat3, CVec3, DensityMatrix, C64};
use crate::model::KsModel;
use crate::pulse::{setting_by_id, swap_pulse, MeasurementSetting};

pub const DEFAULT_SHOTS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateDefinition {
    Pure { amplitudes: CVec3 },
    Mixed { density: DensityMatrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub label: String,
    pub definition: StateDefinition,
}

impl StateSpec {
    pub fn pure(label: &str, amplitudes: CVec3) -> Result<Self> {
        if !amplitudes.is_normalized() {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("state {label} is not normalized"),
            });
        }
        Ok(StateSpec {
            label: label.to_string(),
            definition: StateDefinition::Pure { amplitudes },
        })
    }

    pub fn mixed(label: &str, density: CMat3) -> Result<Self> {
        Ok(StateSpec {
            label: label.to_string(),
            definition: StateDefinition::Mixed {
                density: DensityMatrix::new(density)?,
            },
        })
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.definition, StateDefinition::Pure { .. })
    }

    pub fn density(&self) -> DensityMatrix {
        match &self.definition {
            StateDefinition::Pure { amplitudes } => {
                DensityMatrix::pure(amplitudes).expect("validated at construction")
            }
            StateDefinition::Mixed { density } => *density,
        }
    }

    /// Re-check invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match &self.definition {
            StateDefinition::Pure { amplitudes } if !amplitudes.is_normalized() => {
                Err(Error::InvalidDensityMatrix {
                    reason: format!("state {} is not normalized", self.label),
                })
            }
            StateDefinition::Pure { .. } => Ok(()),
            StateDefinition::Mixed { density } => DensityMatrix::new(*density.matrix()).map(|_| ()),
        }
    }
}

/// psi1..psi9 pure, rho10..rho12 mixed.
pub fn default_state_roster() -> Vec<StateSpec> {
    let r3 = 1.0 / 3f64.sqrt();
    let unit = |a: f64, b: f64, cc: f64| CVec3::real(a, b, cc).normalized().expect("nonzero");
    let psi7 = CVec3::real(0.5, 0.5, SQRT_2 / 2.0);
    let psi8 = CVec3::new(c(r3, 0.0), C64::from_polar(r3, FRAC_PI_4), c(r3, 0.0));
    let psi9 = CVec3::new(c(SQRT_2 / 2.0, 0.0), c(0.0, 0.5), c(0.5, 0.0));
    let rho12 = psi7.outer(&psi7).scale_real(0.8) + CMat3::diag([0.2 / 3.0; 3]);
    let pure = [
        ("psi1", CVec3::basis(1)),
        ("psi2", CVec3::basis(2)),
        ("psi3", CVec3::basis(3)),
        ("psi4", unit(1.0, 1.0, 1.0)),
        ("psi5", unit(-1.0, 1.0, 1.0)),
        ("psi6", unit(0.0, 1.0, -1.0)),
        ("psi7", psi7),
        ("psi8", psi8),
        ("psi9", psi9),
    ];
    let mut out: Vec<StateSpec> = pure
        .into_iter()
        .map(|(l, v)| StateSpec::pure(l, v).expect("roster states are normalized"))
        .collect();
    out.push(StateSpec::mixed("rho10", CMat3::diag([1.0 / 3.0; 3])).expect("valid"));
    out.push(StateSpec::mixed("rho11", CMat3::diag([0.5, 0.5, 0.0])).expect("valid"));
    out.push(StateSpec::mixed("rho12", rho12).expect("valid"));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    Ideal,
    Flip,
    PhotonCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    /// Probability that a dark (|3>) outcome is read as bright.
    pub eps_dark_to_bright: f64,
    /// Probability that a bright outcome is read as dark.
    pub eps_bright_to_dark: f64,
    pub lambda_bright: f64,
    pub lambda_dark: f64,
    pub threshold: u32,
    pub prep_depolarization: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::experimental()
    }
}

impl NoiseModel {
    /// Flip-mode readout with the experiment's 1.0% / 2.1% misassignment.
    pub fn experimental() -> Self {
        NoiseModel {
            mode: NoiseMode::Flip,
            eps_dark_to_bright: 0.010,
            eps_bright_to_dark: 0.021,
            lambda_bright: 10.0,
            lambda_dark: -(0.99f64).ln(),
            threshold: 1,
            prep_depolarization: 0.0,
        }
    }

    pub fn ideal() -> Self {
        NoiseModel {
            mode: NoiseMode::Ideal,
            ..NoiseModel::experimental()
        }
    }

    pub fn photon_count() -> Self {
        NoiseModel {
            mode: NoiseMode::PhotonCount,
            ..NoiseModel::experimental()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("eps_dark_to_bright", self.eps_dark_to_bright),
            ("eps_bright_to_dark", self.eps_bright_to_dark),
            ("prep_depolarization", self.prep_depolarization),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Noise(format!("{name} = {p} outside [0, 1]")));
            }
        }
        for (name, l) in [("lambda_bright", self.lambda_bright), ("lambda_dark", self.lambda_dark)] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::Noise(format!("{name} = {l} must be finite and >= 0")));
            }
        }
        if self.threshold < 1 {
            return Err(Error::Noise("threshold must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective per-detection misassignment rates implied by this model.
    pub fn confusion(&self) -> ConfusionModel {
        match self.mode {
            NoiseMode::Ideal => ConfusionModel::new(0.0, 0.0),
            NoiseMode::Flip => ConfusionModel::new(self.eps_dark_to_bright, self.eps_bright_to_dark),
            NoiseMode::PhotonCount => {
                let below = |lambda: f64| poisson_cdf_below(lambda, self.threshold);
                ConfusionModel::new(1.0 - below(self.lambda_dark), below(self.lambda_bright))
            }
        }
    }

    fn readout<R: Rng + ?Sized>(&self, outcome: Outcome, rng: &mut R) -> Outcome {
        match self.mode {
            NoiseMode::Ideal => outcome,
            NoiseMode::Flip => {
                let eps = match outcome {
                    Outcome::Dark => self.eps_dark_to_bright,
                    Outcome::Bright => self.eps_bright_to_dark,
                };
                if eps > 0.0 && rng.random::<f64>() < eps {
                    outcome.flipped()
                } else {
                    outcome
                }
            }
            NoiseMode::PhotonCount => {
                let lambda = match outcome {
                    Outcome::Dark => self.lambda_dark,
                    Outcome::Bright => self.lambda_bright,
                };
                let photons = if lambda > 0.0 {
                    Poisson::new(lambda).expect("lambda validated").sample(rng) as u64
                } else {
                    0
                };
                if photons >= self.threshold as u64 {
                    Outcome::Bright
                } else {
                    Outcome::Dark
                }
            }
        }
    }
}

/// `P(Poisson(lambda) < n)`.
fn poisson_cdf_below(lambda: f64, n: u32) -> f64 {
    let mut term = (-lambda).exp();
    let mut sum = 0.0;
    for k in 0..n {
        sum += term;
        term *= lambda / (k + 1) as f64;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Photons scattered: the state was |1> or |2>.
    Bright,
    /// No photons: the state was |3>.
    Dark,
}

impl Outcome {
    fn flipped(self) -> Outcome {
        match self {
            Outcome::Bright => Outcome::Dark,
            Outcome::Dark => Outcome::Bright,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Detection {
    pub readout: Outcome,
    pub collapsed: DensityMatrix,
    pub true_outcome: Outcome,
}

/// Probability of the dark outcome, `<3|rho|3>`, clamped against roundoff.
pub fn dark_probability(rho: &DensityMatrix) -> f64 {
    rho.population(3).clamp(0.0, 1.0)
}

/// Post-measurement state for a given true outcome.
pub fn collapse(rho: &DensityMatrix, outcome: Outcome) -> Result<DensityMatrix> {
    match outcome {
        Outcome::Dark => {
            if dark_probability(rho) <= 0.0 {
                return Err(Error::ImpossibleBranch("dark outcome has zero probability".into()));
            }
            Ok(DensityMatrix::basis(3))
        }
        Outcome::Bright => {
            let mut m = *rho.matrix();
            for k in 0..3 {
                m[(2, k)] = c(0.0, 0.0);
                m[(k, 2)] = c(0.0, 0.0);
            }
            let tr = m.trace().re;
            if tr <= 0.0 {
                return Err(Error::ImpossibleBranch("bright outcome has zero probability".into()));
            }
            Ok(DensityMatrix::from_trusted(m.scale_real(1.0 / tr)))
        }
    }
}

/// One fluorescence detection with collapse.
pub fn detect<R: Rng + ?Sized>(rho: &DensityMatrix, noise: &NoiseModel, rng: &mut R) -> Result<Detection> {
    let p_dark = dark_probability(rho);
    let true_outcome = if rng.random::<f64>() < p_dark {
        Outcome::Dark
    } else {
        Outcome::Bright
    };
    let collapsed = collapse(rho, true_outcome)?;
    Ok(Detection {
        readout: noise.readout(true_outcome, rng),
        collapsed,
        true_outcome,
    })
}

/// Recorded per-shot symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Bright at the first detection.
    B,
    /// Dark at the only detection of a single chain.
    D,
    /// Dark, then bright.
    DB,
    /// Dark, then dark.
    DD,
}

impl Symbol {
    pub fn as_str(self) -> &'static str {
        match self {
            Symbol::B => "B",
            Symbol::D => "D",
            Symbol::DB => "DB",
            Symbol::DD => "DD",
        }
    }

    pub fn parse(s: &str) -> Option<Symbol> {
        match s {
            "B" => Some(Symbol::B),
            "D" => Some(Symbol::D),
            "DB" => Some(Symbol::DB),
            "DD" => Some(Symbol::DD),
            _ => None,
        }
    }

    pub fn legal_for(chain_len: usize) -> &'static [Symbol] {
        match chain_len {
            1 => &[Symbol::B, Symbol::D],
            _ => &[Symbol::B, Symbol::DB, Symbol::DD],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubExperiment {
    pub id: String,
    pub setting: String,
    /// One ray (single) or two rays (sequential pair), in interrogation order.
    pub chain: Vec<usize>,
    pub shots: u64,
}

impl SubExperiment {
    pub fn chain_label(&self) -> String {
        self.chain
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlanLayout {
    /// One single chain per observable plus one pair chain per edge.
    #[default]
    Canonical,
    /// Every edge interrogated in both orders, with no single chains; the
    /// singles come from first-detection marginals.
    BothOrders,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub layout: PlanLayout,
    pub sub_experiments: Vec<SubExperiment>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.sub_experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sub_experiments.is_empty()
    }

    /// Shots per state across the whole plan.
    pub fn total_realizations(&self) -> u64 {
        self.sub_experiments.iter().map(|s| s.shots).sum()
    }

    pub fn pair_count(&self) -> usize {
        self.sub_experiments.iter().filter(|s| s.chain.len() == 2).count()
    }
}

pub fn build_plan(
    model: &KsModel,
    settings: &[MeasurementSetting],
    shots_per_subexperiment: u64,
    layout: PlanLayout,
) -> Result<Plan> {
    if shots_per_subexperiment == 0 {
        return Err(Error::Plan("shots per sub-experiment must be positive".into()));
    }
    let mut subs = Vec::new();
    if layout == PlanLayout::Canonical {
        for ray in model.rays.iter().map(|r| r.index) {
            let s = settings
                .iter()
                .find(|s| s.maps(ray))
                .ok_or_else(|| Error::Plan(format!("ray v{ray} is not mapped by any setting")))?;
            subs.push(SubExperiment {
                id: format!("single-v{ray}@{}", s.id),
                setting: s.id.clone(),
                chain: vec![ray],
                shots: shots_per_subexperiment,
            });
        }
    }
    for &(i, j) in &model.graph.edges {
        let s = settings
            .iter()
            .find(|s| s.maps(i) && s.maps(j))
            .ok_or_else(|| Error::Plan(format!("edge ({i},{j}) has no covering setting")))?;
        let orders: &[(usize, usize)] = match layout {
            PlanLayout::Canonical => &[(i, j)],
            PlanLayout::BothOrders => &[(i, j), (j, i)],
        };
        for &(a, b) in orders {
            subs.push(SubExperiment {
                id: format!("pair-v{a}-v{b}@{}", s.id),
                setting: s.id.clone(),
                chain: vec![a, b],
                shots: shots_per_subexperiment,
            });
        }
    }
    Ok(Plan {
        layout,
        sub_experiments: subs,
    })
}

/// Counts for one sub-experiment on one state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub sub_experiment: String,
    pub setting: String,
    pub chain: Vec<usize>,
    pub shots: u64,
    pub counts: BTreeMap<Symbol, u64>,
    /// `(master seed, stream)` the shots were drawn from.
    pub seed: (u64, u64),
}

impl CountTable {
    fn new(sub_experiment: &str, setting: &str, chain: Vec<usize>, seed: (u64, u64)) -> Self {
        let counts = Symbol::legal_for(chain.len()).iter().map(|&s| (s, 0)).collect();
        CountTable {
            sub_experiment: sub_experiment.to_string(),
            setting: setting.to_string(),
            chain,
            shots: 0,
            counts,
            seed,
        }
    }

    pub fn count(&self, s: Symbol) -> u64 {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    /// Shots whose first readout was dark.
    pub fn first_dark(&self) -> u64 {
        self.count(Symbol::D) + self.count(Symbol::DB) + self.count(Symbol::DD)
    }

    fn record(&mut self, s: Symbol) {
        *self.counts.get_mut(&s).expect("symbol legal for chain") += 1;
        self.shots += 1;
    }

    pub fn is_consistent(&self) -> bool {
        let legal = Symbol::legal_for(self.chain.len());
        self.counts.keys().all(|s| legal.contains(s)) && self.counts.values().sum::<u64>() == self.shots
    }
}

/// Slots of the chain's rays after the setting unitary, and the swap
/// matrices that bring each ray onto |3> in turn.
fn chain_swaps(setting: &MeasurementSetting, chain: &[usize]) -> Result<Vec<CMat3>> {
    let mut slots: Vec<usize> = chain
        .iter()
        .map(|&r| {
            setting
                .slot_of(r)
                .ok_or_else(|| Error::Plan(format!("ray v{r} is not mapped in setting {}", setting.id)))
        })
        .collect::<Result<_>>()?;
    let mut swaps = Vec::with_capacity(chain.len());
    for k in 0..chain.len() {
        let slot = slots[k];
        if slot == 3 {
            swaps.push(CMat3::identity());
            continue;
        }
        swaps.push(swap_pulse(slot)?.matrix());
        // The swap exchanges `slot` with 3 for every ray still to come.
        for s in slots.iter_mut().skip(k + 1) {
            if *s == 3 {
                *s = slot;
            } else if *s == slot {
                *s = 3;
            }
        }
    }
    Ok(swaps)
}

fn sample_outcome<R: Rng + ?Sized>(p_dark: f64, rng: &mut R) -> Outcome {
    if rng.random::<f64>() < p_dark {
        Outcome::Dark
    } else {
        Outcome::Bright
    }
}

/// Prepared state after optional depolarization.
pub fn prepare(state: &DensityMatrix, noise: &NoiseModel) -> DensityMatrix {
    if noise.prep_depolarization > 0.0 {
        state.depolarize(noise.prep_depolarization)
    } else {
        *state
    }
}

pub fn run_single<R: Rng + ?Sized>(
    state: &DensityMatrix,
    setting: &MeasurementSetting,
    ray: usize,
    noise: &NoiseModel,
    shots: u64,
    rng: &mut R,
) -> Result<CountTable> {
    run_chain(state, setting, &[ray], noise, shots, rng, (0, 0), "single")
}

pub fn run_pair<R: Rng + ?Sized>(
    state: &DensityMatrix,
    setting: &MeasurementSetting,
    ray_i: usize,
    ray_j: usize,
    noise: &NoiseModel,
    shots: u64,
    rng: &mut R,
) -> Result<CountTable> {
    run_chain(state, setting, &[ray_i, ray_j], noise, shots, rng, (0, 0), "pair")
}

#[allow(clippy::too_many_arguments)]
fn run_chain<R: Rng + ?Sized>(
    state: &DensityMatrix,
    setting: &MeasurementSetting,
    chain: &[usize],
    noise: &NoiseModel,
    shots: u64,
    rng: &mut R,
    seed: (u64, u64),
    id: &str,
) -> Result<CountTable> {
    noise.validate()?;
    if chain.is_empty() || chain.len() > 2 {
        return Err(Error::Plan(format!("chain of length {} unsupported", chain.len())));
    }
    let swaps = chain_swaps(setting, chain)?;
    let u = setting.compile();
    let first = prepare(state, noise).evolve(&(swaps[0] * u));
    let p1 = dark_probability(&first);

    // The true first outcome leaves one of two post-states; cache the
    // second-stage dark probability for each.
    let second_p = |outcome: Outcome| -> Option<f64> {
        let post = collapse(&first, outcome).ok()?;
        Some(dark_probability(&post.evolve(&swaps[1])))
    };
    let (p2_after_dark, p2_after_bright) = if chain.len() == 2 {
        (second_p(Outcome::Dark), second_p(Outcome::Bright))
    } else {
        (None, None)
    };

    let mut table = CountTable::new(id, &setting.id, chain.to_vec(), seed);
    for _ in 0..shots {
        let t1 = sample_outcome(p1, rng);
        let r1 = noise.readout(t1, rng);
        if r1 == Outcome::Bright {
            table.record(Symbol::B);
            continue;
        }
        if chain.len() == 1 {
            table.record(Symbol::D);
            continue;
        }
        let p2 = match t1 {
            Outcome::Dark => p2_after_dark,
            Outcome::Bright => p2_after_bright,
        }
        .ok_or_else(|| Error::ImpossibleBranch("sampled a zero-probability outcome".into()))?;
        let t2 = sample_outcome(p2, rng);
        match noise.readout(t2, rng) {
            Outcome::Bright => table.record(Symbol::DB),
            Outcome::Dark => table.record(Symbol::DD),
        }
    }
    Ok(table)
}

/// 64-bit FNV-1a; stable across platforms and compiler versions.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for a (state, sub-experiment) unit of work.
pub fn stream_id(state_label: &str, sub_experiment: &str) -> u64 {
    splitmix64(fnv1a(state_label.as_bytes()) ^ splitmix64(fnv1a(sub_experiment.as_bytes())))
}

/// Independent ChaCha stream keyed by the master seed; the stream id
/// selects a disjoint counter space.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub state: String,
    pub tables: Vec<CountTable>,
}

/// Runs every sub-experiment of the plan on every state. Work units run in
/// parallel; results are identical for any thread count.
pub fn run_roster(
    roster: &[StateSpec],
    plan: &Plan,
    settings: &[MeasurementSetting],
    noise: &NoiseModel,
    master_seed: u64,
) -> Result<Vec<StateCounts>> {
    noise.validate()?;
    for s in roster {
        s.validate()?;
    }
    let units: Vec<(usize, usize)> = (0..roster.len())
        .flat_map(|a| (0..plan.len()).map(move |b| (a, b)))
        .collect();
    let tables: Vec<CountTable> = units
        .par_iter()
        .map(|&(si, ei)| {
            let spec = &roster[si];
            let sub = &plan.sub_experiments[ei];
            let setting = setting_by_id(settings, &sub.setting)?;
            let stream = stream_id(&spec.label, &sub.id);
            let mut rng = stream_rng(master_seed, stream);
            run_chain(
                &spec.density(),
                setting,
                &sub.chain,
                noise,
                sub.shots,
                &mut rng,
                (master_seed, stream),
                &sub.id,
            )
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<StateCounts> = roster
        .iter()
        .map(|s| StateCounts {
            state: s.label.clone(),
            tables: Vec::with_capacity(plan.len()),
        })
        .collect();
    for ((si, _), t) in units.into_iter().zip(tables) {
        out[si].tables.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, random_density_matrix};
    use crate::model::quantum_expectation;
    use crate::pulse::settings_table;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn setting(id: &str) -> MeasurementSetting {
        setting_by_id(&settings_table(), id).unwrap().clone()
    }

    #[test]
    fn roster_definitions() {
        let r = default_state_roster();
        assert_eq!(r.len(), 12);
        assert!(frobenius_distance(r[0].density().matrix(), &CMat3::diag([1.0, 0.0, 0.0])) < 1e-15);
        let third = CMat3::from_real([[1.0 / 3.0; 3]; 3]);
        assert!(frobenius_distance(r[3].density().matrix(), &third) < 1e-12);
        let rho10 = r[9].density();
        let e = crate::linalg::hermitian_eig(rho10.matrix()).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        for s in &r {
            s.validate().unwrap();
            assert_eq!(s.is_pure(), s.label.starts_with("psi"));
        }
    }

    #[test]
    fn detect_dark_state_ideal() {
        let mut g = rng(1);
        let dark = DensityMatrix::basis(3);
        for _ in 0..100 {
            let d = detect(&dark, &NoiseModel::ideal(), &mut g).unwrap();
            assert_eq!(d.readout, Outcome::Dark);
            assert_eq!(d.true_outcome, Outcome::Dark);
            assert_eq!(d.collapsed, DensityMatrix::basis(3));
        }
    }

    #[test]
    fn detect_flip_rates() {
        let mut g = rng(2);
        let n = 200_000;
        let noise = NoiseModel::experimental();
        let dark = DensityMatrix::basis(3);
        let bright = DensityMatrix::basis(1);
        let misread_dark = (0..n)
            .filter(|_| detect(&dark, &noise, &mut g).unwrap().readout == Outcome::Bright)
            .count() as f64
            / n as f64;
        let misread_bright = (0..n)
            .filter(|_| detect(&bright, &noise, &mut g).unwrap().readout == Outcome::Dark)
            .count() as f64
            / n as f64;
        let tol = |p: f64| 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((misread_dark - 0.010).abs() < tol(0.010), "{misread_dark}");
        assert!((misread_bright - 0.021).abs() < tol(0.021), "{misread_bright}");
    }

    #[test]
    fn collapse_correctness() {
        let mut g = rng(3);
        for _ in 0..200 {
            let rho = random_density_matrix(&mut g);
            let dark = collapse(&rho, Outcome::Dark).unwrap();
            assert_eq!(dark, DensityMatrix::basis(3));
            let bright = collapse(&rho, Outcome::Bright).unwrap();
            assert!(bright.population(3).abs() < 1e-12);
            assert!((bright.matrix().trace().re - 1.0).abs() < 1e-12);
            DensityMatrix::new(*bright.matrix()).unwrap();
        }
        assert!(collapse(&DensityMatrix::basis(3), Outcome::Bright).is_err());
        assert!(collapse(&DensityMatrix::basis(1), Outcome::Dark).is_err());
    }

    #[test]
    fn photon_count_rates() {
        let noise = NoiseModel::photon_count();
        let conf = noise.confusion();
        assert!((conf.eps_dark_to_bright - 0.010).abs() < 1e-12);
        assert!((conf.eps_bright_to_dark - (-10f64).exp()).abs() < 1e-15);
        // Poisson(10) thresholding cannot produce a 2.1% bright misread.
        assert!(conf.eps_bright_to_dark < 1e-4);
        let mut g = rng(4);
        let n = 200_000;
        let dark = DensityMatrix::basis(3);
        let f = (0..n)
            .filter(|_| detect(&dark, &noise, &mut g).unwrap().readout == Outcome::Bright)
            .count() as f64
            / n as f64;
        assert!((f - 0.010).abs() < 4.0 * (0.01 * 0.99 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn noise_validation() {
        let mut n = NoiseModel::experimental();
        n.eps_bright_to_dark = 1.5;
        assert!(n.validate().is_err());
        let mut n = NoiseModel::experimental();
        n.threshold = 0;
        assert!(n.validate().is_err());
        let mut n = NoiseModel::experimental();
        n.lambda_dark = -1.0;
        assert!(n.validate().is_err());
        assert!(NoiseModel::experimental().validate().is_ok());
    }

    #[test]
    fn single_examples() {
        let mut g = rng(5);
        let m1 = setting("M1");
        let t = run_single(&DensityMatrix::basis(3), &m1, 3, &NoiseModel::ideal(), 1000, &mut g).unwrap();
        assert_eq!(t.count(Symbol::D), 1000);
        assert!(run_single(&DensityMatrix::basis(1), &m1, 13, &NoiseModel::ideal(), 10, &mut g).is_err());

        let n = 100_000;
        for id in ["M6", "M8"] {
            let t = run_single(&DensityMatrix::basis(1), &setting(id), 13, &NoiseModel::ideal(), n, &mut g).unwrap();
            let f = t.count(Symbol::D) as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt(), "{id}: {f}");
        }
    }

    #[test]
    fn pair_ideal_never_double_dark() {
        let mut g = rng(6);
        let model = KsModel::build();
        let settings = settings_table();
        let rho = random_density_matrix(&mut g);
        for &(i, j) in &model.graph.edges {
            let s = settings.iter().find(|s| s.maps(i) && s.maps(j)).unwrap();
            for (a, b) in [(i, j), (j, i)] {
                let t = run_pair(&rho, s, a, b, &NoiseModel::ideal(), 2000, &mut g).unwrap();
                assert_eq!(t.count(Symbol::DD), 0, "edge ({a},{b})");
                assert!(t.is_consistent());
            }
        }
    }

    #[test]
    fn pair_on_aligned_state() {
        let mut g = rng(7);
        let model = KsModel::build();
        // psi = v4, pair (4, 1) in M3: first detection always dark, second always bright.
        let rho = DensityMatrix::pure(&model.ray(4).unit()).unwrap();
        let t = run_pair(&rho, &setting("M3"), 4, 1, &NoiseModel::ideal(), 1000, &mut g).unwrap();
        assert_eq!(t.count(Symbol::B), 0);
        assert_eq!(t.count(Symbol::DB), 1000);
    }

    #[test]
    fn pair_flip_noise_double_dark_is_small() {
        let mut g = rng(8);
        let n = 100_000;
        let rho = DensityMatrix::maximally_mixed();
        let t = run_pair(&rho, &setting("M1"), 1, 2, &NoiseModel::experimental(), n, &mut g).unwrap();
        let f = t.count(Symbol::DD) as f64 / n as f64;
        // eB (1 - eD - eB)(p_i + p_j) + eB^2 for p_i = p_j = 1/3.
        let (ed, eb) = (0.010, 0.021);
        let want = eb * (1.0 - ed - eb) * (2.0 / 3.0) + eb * eb;
        assert!(f > 2e-3 && f < 3e-2, "{f}");
        assert!((f - want).abs() < 4.0 * (want / n as f64).sqrt(), "{f} vs {want}");
    }

    #[test]
    fn pair_swap_bookkeeping_when_first_ray_leaves_slot_three() {
        // M2 maps v8 to |3> and v5 to |1>: interrogating (8, 5) needs no first
        // swap, and the second swap must bring |1> up.
        let model = KsModel::build();
        let rho = DensityMatrix::pure(&model.ray(5).unit()).unwrap();
        let mut g = rng(9);
        let t = run_pair(&rho, &setting("M2"), 8, 5, &NoiseModel::ideal(), 500, &mut g).unwrap();
        assert_eq!(t.count(Symbol::B), 500);
        // Reverse: v5 at |1> first, then v8 has moved from |3> to |1>.
        let rho = DensityMatrix::pure(&model.ray(5).unit()).unwrap();
        let t = run_pair(&rho, &setting("M2"), 5, 8, &NoiseModel::ideal(), 500, &mut g).unwrap();
        assert_eq!(t.count(Symbol::DB), 500);
    }

    #[test]
    fn plan_structure() {
        let model = KsModel::build();
        let settings = settings_table();
        let plan = build_plan(&model, &settings, DEFAULT_SHOTS, PlanLayout::Canonical).unwrap();
        assert_eq!(plan.pair_count(), 24);
        assert_eq!(plan.len(), 37);
        assert_eq!(plan.total_realizations(), 37 * DEFAULT_SHOTS);
        let e14 = plan.sub_experiments.iter().find(|s| s.chain == vec![1, 4]).unwrap();
        assert_eq!(e14.setting, "M3");
        for sub in &plan.sub_experiments {
            let s = setting_by_id(&settings, &sub.setting).unwrap();
            assert!(sub.chain.iter().all(|&r| s.maps(r)));
            if sub.chain.len() == 2 {
                assert!(model.graph.contains(sub.chain[0], sub.chain[1]));
            }
        }
        let both = build_plan(&model, &settings, DEFAULT_SHOTS, PlanLayout::BothOrders).unwrap();
        assert_eq!(both.len(), 48);
        assert_eq!(both.total_realizations(), 480_000);
        assert!(build_plan(&model, &settings, 0, PlanLayout::Canonical).is_err());
    }

    #[test]
    fn plan_fails_without_covering_setting() {
        let model = KsModel::build();
        let settings: Vec<_> = settings_table().into_iter().take(4).collect();
        assert!(matches!(
            build_plan(&model, &settings, 10, PlanLayout::Canonical),
            Err(Error::Plan(_))
        ));
    }

    #[test]
    fn single_chain_matches_trace_formula() {
        let model = KsModel::build();
        let settings = settings_table();
        let plan = build_plan(&model, &settings, 20_000, PlanLayout::Canonical).unwrap();
        let roster = default_state_roster();
        let counts = run_roster(&roster, &plan, &settings, &NoiseModel::ideal(), 99).unwrap();
        for (spec, sc) in roster.iter().zip(&counts) {
            for t in sc.tables.iter().filter(|t| t.chain.len() == 1) {
                let p = quantum_expectation(&spec.density(), model.observables.projector(t.chain[0])).unwrap();
                let f = t.count(Symbol::D) as f64 / t.shots as f64;
                let tol = 4.0 * (p * (1.0 - p)).max(0.0).sqrt() / (t.shots as f64).sqrt() + 1e-12;
                assert!((f - p).abs() <= tol, "{} v{}: {f} vs {p}", spec.label, t.chain[0]);
            }
        }
    }

    #[test]
    fn roster_is_deterministic_across_thread_counts() {
        let model = KsModel::build();
        let settings = settings_table();
        let plan = build_plan(&model, &settings, 500, PlanLayout::Canonical).unwrap();
        let roster = default_state_roster();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_roster(&roster, &plan, &settings, &NoiseModel::experimental(), 42).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, run(1));
        let other = run_roster(&roster, &plan, &settings, &NoiseModel::experimental(), 43).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn streams_differ_per_unit() {
        assert_ne!(stream_id("psi1", "a"), stream_id("psi1", "b"));
        assert_ne!(stream_id("psi1", "a"), stream_id("psi2", "a"));
        assert_eq!(stream_id("psi1", "a"), stream_id("psi1", "a"));
        let mut a = stream_rng(1, 5);
        let mut b = stream_rng(1, 6);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn depolarization_mixes_state() {
        let mut noise = NoiseModel::ideal();
        noise.prep_depolarization = 0.3;
        let p = prepare(&DensityMatrix::basis(1), &noise);
        assert!((p.population(1) - (0.7 + 0.1)).abs() < 1e-15);
        assert!((p.population(3) - 0.1).abs() < 1e-15);
    }
}
