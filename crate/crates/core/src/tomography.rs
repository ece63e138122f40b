//! Qutrit state tomography with the |3>-only detector.
//!
//! Each setting rotates the state and then measures the three basis
//! populations in separate sub-runs (swap the target level onto |3>, detect).
//! Reconstruction is linear least squares over the nine real Hermitian
//! parameters followed by eigenvalue clipping.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{correct_ml, estimate_probability};
use crate::error::{Error, Result};
use crate::linalg::{c, fidelity, hermitian_eig, CMat3, DensityMatrix, C64};
use crate::pulse::{compile_pulses, swap_pulse, Pulse};
use crate::sim::{detect, prepare, stream_id, stream_rng, NoiseModel, Outcome, StateSpec};

/// Relative singular-value cutoff for the response-map rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographySetting {
    pub id: String,
    /// Chronological pulses.
    pub pulses: Vec<Pulse>,
    #[serde(skip)]
    pub unitary: CMat3,
}

impl TomographySetting {
    pub fn new(id: &str, pulses: Vec<Pulse>) -> Self {
        let unitary = compile_pulses(&pulses);
        TomographySetting {
            id: id.to_string(),
            pulses,
            unitary,
        }
    }

    /// Exact outcome probabilities `<k| U rho U^dagger |k>`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> [f64; 3] {
        let r = rho.evolve(&self.unitary);
        [r.population(1), r.population(2), r.population(3)]
    }
}

fn pulse(channel: u8, theta: f64, phi: f64) -> Pulse {
    match channel {
        1 => Pulse::r1(theta, phi),
        _ => Pulse::r2(theta, phi),
    }
    .expect("fixed angles are in range")
}

fn base_settings() -> Vec<TomographySetting> {
    vec![
        TomographySetting::new("T-I", vec![]),
        TomographySetting::new("T-R1x", vec![pulse(1, FRAC_PI_2, 0.0)]),
        TomographySetting::new("T-R1y", vec![pulse(1, FRAC_PI_2, FRAC_PI_2)]),
        TomographySetting::new("T-R2x", vec![pulse(2, FRAC_PI_2, 0.0)]),
        TomographySetting::new("T-R2y", vec![pulse(2, FRAC_PI_2, FRAC_PI_2)]),
    ]
}

/// Composed settings appended, in order, until the response map is complete.
fn extension_settings() -> Vec<TomographySetting> {
    vec![
        TomographySetting::new("T-R2x-R1x", vec![pulse(2, FRAC_PI_2, 0.0), pulse(1, FRAC_PI_2, 0.0)]),
        TomographySetting::new("T-R2x-R1y", vec![pulse(2, FRAC_PI_2, 0.0), pulse(1, FRAC_PI_2, FRAC_PI_2)]),
        TomographySetting::new("T-R1x-R2x", vec![pulse(1, FRAC_PI_2, 0.0), pulse(2, FRAC_PI_2, 0.0)]),
        TomographySetting::new("T-R1x-R2y", vec![pulse(1, FRAC_PI_2, 0.0), pulse(2, FRAC_PI_2, FRAC_PI_2)]),
    ]
}

/// Orthonormal Hermitian basis: three diagonal units, then symmetric and
/// antisymmetric off-diagonal pairs.
fn hermitian_basis() -> [CMat3; 9] {
    let mut out = [CMat3::zeros(); 9];
    for k in 0..3 {
        out[k][(k, k)] = c(1.0, 0.0);
    }
    let s = FRAC_1_SQRT_2;
    for (n, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        out[3 + 2 * n][(a, b)] = c(s, 0.0);
        out[3 + 2 * n][(b, a)] = c(s, 0.0);
        out[4 + 2 * n][(a, b)] = c(0.0, -s);
        out[4 + 2 * n][(b, a)] = c(0.0, s);
    }
    out
}

/// Rows `Tr(U^dagger |k><k| U B_a)` for every setting and outcome.
pub fn response_map(settings: &[TomographySetting]) -> DMatrix<f64> {
    let basis = hermitian_basis();
    let mut m = DMatrix::zeros(3 * settings.len(), 9);
    for (s, setting) in settings.iter().enumerate() {
        let ud = setting.unitary.adjoint();
        for k in 0..3 {
            let mut ek = CMat3::zeros();
            ek[(k, k)] = c(1.0, 0.0);
            let effect = ek.conjugate_by(&ud);
            for (a, b) in basis.iter().enumerate() {
                m[(3 * s + k, a)] = (effect * *b).trace().re;
            }
        }
    }
    m
}

pub fn response_rank(settings: &[TomographySetting]) -> usize {
    let sv = response_map(settings).singular_values();
    let max = sv.max();
    sv.iter().filter(|&&x| x > RANK_TOL * max).count()
}

/// Default settings, extended until the response map has rank 9.
pub fn tomography_settings() -> Result<Vec<TomographySetting>> {
    let mut settings = base_settings();
    let mut extra = extension_settings().into_iter();
    while response_rank(&settings) < 9 {
        match extra.next() {
            Some(s) => settings.push(s),
            None => {
                return Err(Error::RankDeficient {
                    rank: response_rank(&settings),
                })
            }
        }
    }
    Ok(settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub setting: String,
    /// Estimated populations of |1>, |2>, |3> after the setting rotation.
    pub probabilities: [f64; 3],
    pub shots: u64,
}

pub fn exact_tables(rho: &DensityMatrix, settings: &[TomographySetting]) -> Vec<ProbabilityTable> {
    settings
        .iter()
        .map(|s| ProbabilityTable {
            setting: s.id.clone(),
            probabilities: s.probabilities(rho),
            shots: 0,
        })
        .collect()
}

/// Dark fraction when level `k` is swapped onto |3>.
fn measure_level<R: Rng + ?Sized>(
    rotated: &DensityMatrix,
    level: usize,
    noise: &NoiseModel,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    let state = if level == 3 {
        *rotated
    } else {
        rotated.evolve(&swap_pulse(level)?.matrix())
    };
    let mut dark = 0;
    for _ in 0..shots {
        if detect(&state, noise, rng)?.readout == Outcome::Dark {
            dark += 1;
        }
    }
    let raw = estimate_probability(dark, shots)?;
    Ok(correct_ml(&raw, &noise.confusion())?.value)
}

/// Three sub-runs per setting, each readout-corrected with the noise model's
/// confusion rates.
pub fn simulate_tomography<R: Rng + ?Sized>(
    state: &DensityMatrix,
    settings: &[TomographySetting],
    noise: &NoiseModel,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<ProbabilityTable>> {
    noise.validate()?;
    if shots == 0 {
        return Err(Error::Plan("tomography needs at least one shot".into()));
    }
    let prepared = prepare(state, noise);
    settings
        .iter()
        .map(|s| {
            let rotated = prepared.evolve(&s.unitary);
            let mut probabilities = [0.0; 3];
            for (k, p) in probabilities.iter_mut().enumerate() {
                *p = measure_level(&rotated, k + 1, noise, shots, rng)?;
            }
            Ok(ProbabilityTable {
                setting: s.id.clone(),
                probabilities,
                shots,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub fidelity_to_target: Option<f64>,
    /// Euclidean misfit of the unconstrained least-squares solution.
    pub residual: f64,
    pub projected: bool,
}

pub fn reconstruct(
    tables: &[ProbabilityTable],
    settings: &[TomographySetting],
    target: Option<&DensityMatrix>,
) -> Result<ReconstructionResult> {
    let mut used = Vec::with_capacity(tables.len());
    let mut rhs = Vec::with_capacity(3 * tables.len());
    for t in tables {
        let s = settings
            .iter()
            .find(|s| s.id == t.setting)
            .ok_or_else(|| Error::UnknownSetting(t.setting.clone()))?;
        used.push(s.clone());
        rhs.extend_from_slice(&t.probabilities);
    }
    let a = response_map(&used);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&x| x > RANK_TOL * max).count();
    if rank < 9 {
        return Err(Error::RankDeficient { rank });
    }
    let x = svd
        .solve(&b, RANK_TOL * max)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = (&a * &x - &b).norm();

    let basis = hermitian_basis();
    let mut m = CMat3::zeros();
    for (xa, ba) in x.iter().zip(&basis) {
        m = m + ba.scale_real(*xa);
    }
    let (rho, projected) = project(&m)?;
    let fidelity_to_target = target.map(|t| fidelity(&rho, t)).transpose()?;
    Ok(ReconstructionResult {
        rho,
        fidelity_to_target,
        residual,
        projected,
    })
}

/// Nearest density matrix by eigenvalue clipping and trace renormalization.
fn project(m: &CMat3) -> Result<(DensityMatrix, bool)> {
    if let Ok(rho) = DensityMatrix::new(*m) {
        return Ok((rho, false));
    }
    let eig = hermitian_eig(m)?;
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    if total.is_nan() || total <= 0.0 {
        return Ok((DensityMatrix::maximally_mixed(), true));
    }
    let out = eig.map_values(|v| v.max(0.0) / total);
    // Restore exact Hermiticity lost to roundoff.
    let sym = (out + out.adjoint()).scale_real(0.5);
    Ok((DensityMatrix::new(sym)?, true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTomography {
    pub state: String,
    pub tables: Vec<ProbabilityTable>,
    pub result: ReconstructionResult,
}

/// Simulates and reconstructs every state in parallel; deterministic per
/// master seed regardless of thread count.
pub fn run_tomography(
    roster: &[StateSpec],
    settings: &[TomographySetting],
    noise: &NoiseModel,
    shots: u64,
    master_seed: u64,
) -> Result<Vec<StateTomography>> {
    roster
        .par_iter()
        .map(|spec| {
            let mut rng = stream_rng(master_seed, stream_id(&spec.label, "tomography"));
            let target = spec.density();
            let tables = simulate_tomography(&target, settings, noise, shots, &mut rng)?;
            let result = reconstruct(&tables, settings, Some(&target))?;
            Ok(StateTomography {
                state: spec.label.clone(),
                tables,
                result,
            })
        })
        .collect()
}

/// `re,im` pairs with 12 significant digits, one matrix row per line.
pub fn format_density_matrix(rho: &DensityMatrix) -> String {
    let m = rho.matrix();
    let fmt = |z: C64| format!("{:.11e},{:.11e}", z.re, z.im);
    (0..3)
        .map(|r| (0..3).map(|col| fmt(m[(r, col)])).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, random_density_matrix};
    use crate::sim::default_state_roster;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_set_is_extended_to_full_rank() {
        assert_eq!(response_rank(&base_settings()), 7);
        let s = tomography_settings().unwrap();
        assert_eq!(response_rank(&s), 9);
        assert_eq!(s.len(), 7);
        assert_eq!(s[5].id, "T-R2x-R1x");
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = hermitian_basis();
        for (i, x) in b.iter().enumerate() {
            assert!(x.is_hermitian());
            for (j, y) in b.iter().enumerate() {
                let ip = (x.adjoint() * *y).trace();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - want).abs() < 1e-15 && ip.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_setting_gives_diagonal() {
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(&mut g);
        let p = base_settings()[0].probabilities(&rho);
        for (k, pk) in p.iter().enumerate() {
            assert!((pk - rho.population(k + 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn simulation_examples() {
        let mut g = ChaCha8Rng::seed_from_u64(2);
        let settings = tomography_settings().unwrap();
        let ideal = NoiseModel::ideal();
        let t = simulate_tomography(&DensityMatrix::basis(3), &settings[..1], &ideal, 1000, &mut g).unwrap();
        assert_eq!(t[0].probabilities, [0.0, 0.0, 1.0]);

        let n = 100_000;
        let mixed = simulate_tomography(&DensityMatrix::maximally_mixed(), &settings, &ideal, n, &mut g).unwrap();
        let tol = 4.0 * (2.0 / 9.0 / n as f64).sqrt();
        for t in &mixed {
            assert!(t.probabilities.iter().all(|p| (p - 1.0 / 3.0).abs() < tol), "{t:?}");
        }

        let r1x = &settings[1..2];
        assert!((r1x[0].probabilities(&DensityMatrix::basis(1))[2] - 0.5).abs() < 1e-15);
        let t = simulate_tomography(&DensityMatrix::basis(1), r1x, &ideal, n, &mut g).unwrap();
        assert!((t[0].probabilities[2] - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn exact_round_trips() {
        let settings = tomography_settings().unwrap();
        let psi1 = DensityMatrix::basis(1);
        let r = reconstruct(&exact_tables(&psi1, &settings), &settings, Some(&psi1)).unwrap();
        assert!(frobenius_distance(r.rho.matrix(), psi1.matrix()) < 1e-9);
        assert!((r.fidelity_to_target.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.residual < 1e-10);

        let rho12 = default_state_roster()[11].density();
        let r = reconstruct(&exact_tables(&rho12, &settings), &settings, None).unwrap();
        assert!(frobenius_distance(r.rho.matrix(), rho12.matrix()) < 1e-9);
        assert!(!r.projected);

        let mut g = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rho = random_density_matrix(&mut g);
            let r = reconstruct(&exact_tables(&rho, &settings), &settings, None).unwrap();
            assert!(frobenius_distance(r.rho.matrix(), rho.matrix()) < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_tables_are_rejected() {
        let settings = tomography_settings().unwrap();
        let rho = DensityMatrix::maximally_mixed();
        let tables = exact_tables(&rho, &settings[..5]);
        assert!(matches!(
            reconstruct(&tables, &settings, None),
            Err(Error::RankDeficient { rank: 7 })
        ));
        let mut bad = exact_tables(&rho, &settings);
        bad[0].setting = "nope".into();
        assert!(matches!(reconstruct(&bad, &settings, None), Err(Error::UnknownSetting(_))));
    }

    #[test]
    fn statistical_round_trip_psi7() {
        // Clipping leaves spurious weight of order the shot noise, so the
        // infidelity falls with shots but not quadratically.
        let settings = tomography_settings().unwrap();
        let psi7 = default_state_roster()[6].density();
        let mean_infidelity = |shots: u64| {
            (0..2)
                .map(|seed| {
                    let mut g = ChaCha8Rng::seed_from_u64(seed);
                    let t = simulate_tomography(&psi7, &settings, &NoiseModel::ideal(), shots, &mut g).unwrap();
                    let f = reconstruct(&t, &settings, Some(&psi7)).unwrap().fidelity_to_target.unwrap();
                    assert!(f >= 0.98, "{shots} shots: {f}");
                    1.0 - f
                })
                .sum::<f64>()
                / 2.0
        };
        assert!(mean_infidelity(100_000) < mean_infidelity(10_000));
    }

    #[test]
    fn format_has_twelve_digits() {
        let s = format_density_matrix(&DensityMatrix::maximally_mixed());
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("3.33333333333e-1,0.00000000000e0"), "{s}");
    }

    proptest! {
        #[test]
        fn corrupted_tables_still_physical(noise in proptest::collection::vec(-0.5f64..0.5, 21)) {
            let settings = tomography_settings().unwrap();
            let mut tables = exact_tables(&DensityMatrix::basis(2), &settings);
            for (t, d) in tables.iter_mut().flat_map(|t| t.probabilities.iter_mut()).zip(&noise) {
                *t += d;
            }
            let r = reconstruct(&tables, &settings, None).unwrap();
            prop_assert!(DensityMatrix::new(*r.rho.matrix()).is_ok());
        }
    }
}
