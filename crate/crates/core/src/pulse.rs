//! Two-tone microwave rotations and the 16 measurement settings.
//!
//! Pulses are listed chronologically, so a setting compiles to
//! `U = P_n ... P_2 P_1`. Global phases are never compared; all mapping
//! checks use overlap moduli.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat3, CVec3, C64};
use crate::model::{rays, Edge};

/// Overlap deficit allowed when checking a mapped ray.
pub const MAPPING_TOL: f64 = 1e-9;
/// Allowed distance between the exact alpha and its rounded display value.
pub const ALPHA_DISPLAY_TOL: f64 = 2e-3;

/// `2 arcsin(1/sqrt(3))`, displayed in the pulse table as `0.392 pi`.
pub fn alpha() -> f64 {
    2.0 * (1.0 / 3f64.sqrt()).asin()
}

/// Rotation on the |1> <-> |3> transition.
pub fn r1_matrix(theta: f64, phi: f64) -> CMat3 {
    let (s, co) = (theta / 2.0).sin_cos();
    let e = C64::from_polar(1.0, phi);
    let mut m = CMat3::identity();
    m[(0, 0)] = c(co, 0.0);
    m[(0, 2)] = e * s;
    m[(2, 0)] = -e.conj() * s;
    m[(2, 2)] = c(co, 0.0);
    m
}

/// Rotation on the |2> <-> |3> transition.
pub fn r2_matrix(theta: f64, phi: f64) -> CMat3 {
    let (s, co) = (theta / 2.0).sin_cos();
    let e = C64::from_polar(1.0, phi);
    let mut m = CMat3::identity();
    m[(1, 1)] = c(co, 0.0);
    m[(1, 2)] = -e.conj() * s;
    m[(2, 1)] = e * s;
    m[(2, 2)] = c(co, 0.0);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Tone resonant with |1> <-> |3>.
    Omega1,
    /// Tone resonant with |2> <-> |3>.
    Omega2,
}

impl Channel {
    pub fn number(self) -> u8 {
        match self {
            Channel::Omega1 => 1,
            Channel::Omega2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub channel: Channel,
    pub theta: f64,
    pub phi: f64,
}

impl Pulse {
    pub fn new(channel: Channel, theta: f64, phi: f64) -> Result<Self> {
        for (name, value) in [("theta", theta), ("phi", phi)] {
            if !(0.0..2.0 * PI).contains(&value) {
                return Err(Error::PulseRange { name, value });
            }
        }
        Ok(Pulse { channel, theta, phi })
    }

    pub fn r1(theta: f64, phi: f64) -> Result<Self> {
        Self::new(Channel::Omega1, theta, phi)
    }

    pub fn r2(theta: f64, phi: f64) -> Result<Self> {
        Self::new(Channel::Omega2, theta, phi)
    }

    pub fn matrix(&self) -> CMat3 {
        match self.channel {
            Channel::Omega1 => r1_matrix(self.theta, self.phi),
            Channel::Omega2 => r2_matrix(self.theta, self.phi),
        }
    }
}

/// Compose pulses given in chronological order.
pub fn compile_pulses(pulses: &[Pulse]) -> CMat3 {
    pulses
        .iter()
        .fold(CMat3::identity(), |u, p| p.matrix() * u)
}

/// One row of the settings table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSetting {
    pub id: String,
    /// `(basis state, ray index)`, basis states in 1..=3.
    pub mapping: Vec<(usize, usize)>,
    pub pulses: Vec<Pulse>,
}

impl MeasurementSetting {
    /// Basis slot the ray is mapped onto, if any.
    pub fn slot_of(&self, ray: usize) -> Option<usize> {
        self.mapping
            .iter()
            .find_map(|&(b, r)| (r == ray).then_some(b))
    }

    pub fn maps(&self, ray: usize) -> bool {
        self.slot_of(ray).is_some()
    }

    pub fn rays(&self) -> impl Iterator<Item = usize> + '_ {
        self.mapping.iter().map(|&(_, r)| r)
    }

    pub fn compile(&self) -> CMat3 {
        compile_pulses(&self.pulses)
    }
}

pub fn compile(setting: &MeasurementSetting) -> CMat3 {
    setting.compile()
}

pub fn settings_table() -> Vec<MeasurementSetting> {
    let a = alpha();
    let r1 = |t: f64, p: f64| Pulse::r1(t, p).expect("table angles in range");
    let r2 = |t: f64, p: f64| Pulse::r2(t, p).expect("table angles in range");
    let h = PI / 2.0;
    type Row = (Vec<(usize, usize)>, Vec<Pulse>);
    let rows: Vec<Row> = vec![
        (vec![(1, 1), (2, 2), (3, 3)], vec![]),
        (vec![(1, 5), (2, 2), (3, 8)], vec![r1(h, PI)]),
        (vec![(1, 1), (2, 4), (3, 7)], vec![r2(h, 0.0)]),
        (vec![(1, 9), (2, 3), (3, 6)], vec![r2(PI, PI), r1(h, PI)]),
        (vec![(2, 4), (3, 10)], vec![r2(h, 0.0), r1(a, 0.0)]),
        (vec![(2, 4), (3, 13)], vec![r2(h, 0.0), r1(a, PI)]),
        (vec![(1, 5), (3, 11)], vec![r1(h, PI), r2(a, PI)]),
        (vec![(1, 5), (3, 13)], vec![r1(h, PI), r2(a, 0.0)]),
        (vec![(1, 6), (3, 12)], vec![r2(PI, 0.0), r1(h, PI), r2(a, 0.0)]),
        (vec![(1, 6), (2, 13)], vec![r2(PI, PI), r1(h, 0.0), r2(PI - a, 0.0)]),
        (vec![(2, 7), (3, 11)], vec![r2(h, PI), r1(a, PI)]),
        (vec![(1, 12), (2, 7)], vec![r2(h, PI), r1(PI - a, PI)]),
        (vec![(1, 8), (3, 10)], vec![r1(h, 0.0), r2(a, 0.0)]),
        (vec![(1, 8), (2, 12)], vec![r1(h, 0.0), r2(PI - a, 0.0)]),
        (vec![(1, 10), (2, 9)], vec![r1(PI, 0.0), r2(h, 0.0), r1(PI - a, 0.0)]),
        (vec![(2, 9), (3, 11)], vec![r1(PI, PI), r2(h, PI), r1(a, 0.0)]),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(k, (mapping, pulses))| MeasurementSetting {
            id: format!("M{}", k + 1),
            mapping,
            pulses,
        })
        .collect()
}

pub fn setting_by_id<'a>(settings: &'a [MeasurementSetting], id: &str) -> Result<&'a MeasurementSetting> {
    settings
        .iter()
        .find(|s| s.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::UnknownSetting(id.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingEntry {
    pub basis: usize,
    pub ray: usize,
    /// `|<basis| U |v_ray>|` for the unit ray.
    pub overlap: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingReport {
    pub setting: String,
    pub entries: Vec<MappingEntry>,
}

impl MappingReport {
    pub fn max_deficit(&self) -> f64 {
        self.entries.iter().map(|e| e.deficit).fold(0.0, f64::max)
    }
}

/// Checks that every mapped ray lands on its basis state up to phase.
pub fn verify_mapping(setting: &MeasurementSetting) -> Result<MappingReport> {
    let u = setting.compile();
    let all = rays();
    let mut entries = Vec::with_capacity(setting.mapping.len());
    for &(basis, ray) in &setting.mapping {
        let image = u.apply(&all[ray - 1].unit());
        let overlap = CVec3::basis(basis).inner(&image).norm();
        let deficit = (1.0 - overlap).abs();
        if deficit > MAPPING_TOL {
            return Err(Error::MappingFailure {
                setting: setting.id.clone(),
                ray,
                basis,
                deficit,
            });
        }
        entries.push(MappingEntry {
            basis,
            ray,
            overlap,
            deficit,
        });
    }
    Ok(MappingReport {
        setting: setting.id.clone(),
        entries,
    })
}

/// Edges jointly measurable in some setting: every pair of co-mapped rays.
pub fn covered_pairs(settings: &[MeasurementSetting]) -> BTreeSet<Edge> {
    let mut out = BTreeSet::new();
    for s in settings {
        let r: Vec<usize> = s.rays().collect();
        for (k, &a) in r.iter().enumerate() {
            for &b in &r[k + 1..] {
                out.insert((a.min(b), a.max(b)));
            }
        }
    }
    out
}

/// The pulse that exchanges `|basis>` with the dark state |3>.
pub fn swap_pulse(basis: usize) -> Result<Pulse> {
    match basis {
        1 => Pulse::r1(PI, 0.0),
        2 => Pulse::r2(PI, 0.0),
        3 => Err(Error::SwapOnDetectionState),
        other => Err(Error::Plan(format!("basis state |{other}> does not exist"))),
    }
}

/// Fixed apparatus constants. Frequencies are in MHz (angular frequency / 2 pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardwareParams {
    pub omega1_mhz: f64,
    pub omega2_offset_mhz: f64,
    pub rabi_two_pi_time_us: f64,
    pub b_field_gauss: f64,
    pub doppler_cooling_us: f64,
    pub optical_pumping_us: f64,
}

impl Default for HardwareParams {
    fn default() -> Self {
        HardwareParams {
            omega1_mhz: 12642.8213,
            omega2_offset_mhz: 7.6372,
            rabi_two_pi_time_us: 29.5,
            b_field_gauss: 5.455,
            doppler_cooling_us: 1000.0,
            optical_pumping_us: 3.0,
        }
    }
}

impl HardwareParams {
    pub fn pulse_duration_us(&self, pulse: &Pulse) -> f64 {
        pulse.theta / (2.0 * PI) * self.rabi_two_pi_time_us
    }

    /// Rabi frequency in kHz.
    pub fn rabi_frequency_khz(&self) -> f64 {
        1e3 / self.rabi_two_pi_time_us
    }
}

/// Schedule text: a header, the cooling and pumping windows, then one line
/// per pulse as `pulse,<channel>,<theta/pi>,<phi/pi>,<duration_us>`.
pub fn render_schedule(setting: &MeasurementSetting, extra_pulses: &[Pulse], hw: &HardwareParams) -> String {
    let mut s = String::new();
    writeln!(s, "# setting {}", setting.id).unwrap();
    writeln!(
        s,
        "# omega1_mhz={:.4} omega2_offset_mhz={:.4} rabi_2pi_us={:.4} b_field_gauss={:.4}",
        hw.omega1_mhz, hw.omega2_offset_mhz, hw.rabi_two_pi_time_us, hw.b_field_gauss
    )
    .unwrap();
    writeln!(s, "# kind,channel,theta_over_pi,phi_over_pi,duration_us").unwrap();
    writeln!(s, "cooling,,,,{:.4}", hw.doppler_cooling_us).unwrap();
    writeln!(s, "pumping,,,,{:.4}", hw.optical_pumping_us).unwrap();
    for p in setting.pulses.iter().chain(extra_pulses.iter()) {
        writeln!(
            s,
            "pulse,{},{:.4},{:.4},{:.4}",
            p.channel.number(),
            p.theta / PI,
            p.phi / PI,
            hw.pulse_duration_us(p)
        )
        .unwrap();
    }
    s
}

pub fn emit_schedule(
    setting: &MeasurementSetting,
    extra_pulses: &[Pulse],
    hw: &HardwareParams,
    destination: &Path,
) -> Result<()> {
    std::fs::write(destination, render_schedule(setting, extra_pulses, hw))
        .map_err(|e| Error::io(destination, e))
}

/// Machine-readable dump of the settings table.
pub fn settings_dump(settings: &[MeasurementSetting]) -> String {
    let mut s = String::new();
    writeln!(s, "# setting: id | basis->ray ... | channel(theta/pi,phi/pi) ...").unwrap();
    for st in settings {
        let map: Vec<String> = st.mapping.iter().map(|(b, r)| format!("|{b}>->v{r}")).collect();
        let pulses: Vec<String> = st
            .pulses
            .iter()
            .map(|p| format!("R{}({:.6},{:.6})", p.channel.number(), p.theta / PI, p.phi / PI))
            .collect();
        writeln!(s, "{} | {} | {}", st.id, map.join(" "), pulses.join(" ")).unwrap();
    }
    s
}
