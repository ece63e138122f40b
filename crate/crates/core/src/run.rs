//! Run configuration and the file-producing commands behind the CLI.
//!
//! Every output except `manifest.json` is a pure function of the resolved
//! config, so reruns with the same seed are byte-identical at any thread
//! count.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_state, results_csv, results_text, StateResult, RESULTS_CSV_HEADER};
use crate::error::{Error, Result};
use crate::model::{KsModel, CLASSICAL_BOUND_CHI13, CLASSICAL_BOUND_CHI4, QUANTUM_CHI13, QUANTUM_CHI4};
use crate::pulse::{emit_schedule, setting_by_id, settings_table, HardwareParams};
use crate::sim::{
    build_plan, default_state_roster, run_roster, NoiseModel, PlanLayout, StateCounts, StateSpec, DEFAULT_SHOTS,
};
use crate::tomography::{format_density_matrix, run_tomography, tomography_settings, StateTomography};

pub const COUNTS_FILE: &str = "counts.csv";
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_TXT: &str = "results.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOMOGRAPHY_CSV: &str = "tomography.csv";
pub const DENSITY_FILE: &str = "density_matrices.txt";
pub const PLOT_DATA_FILE: &str = "plot_data.tsv";
pub const REFERENCE_LINES_FILE: &str = "reference_lines.tsv";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct StateSelection {
    /// Default-roster labels to include; empty means all twelve.
    pub roster: Vec<String>,
    /// Extra user-defined states, run after the roster.
    pub custom: Vec<StateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub shots_per_subexperiment: u64,
    pub layout: PlanLayout,
    pub noise: NoiseModel,
    pub states: StateSelection,
    pub tomography: bool,
    pub tomography_shots: u64,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 1,
            shots_per_subexperiment: DEFAULT_SHOTS,
            layout: PlanLayout::Canonical,
            noise: NoiseModel::experimental(),
            states: StateSelection::default(),
            tomography: true,
            tomography_shots: DEFAULT_SHOTS,
            output_dir: PathBuf::from("run"),
            formats: vec![ReportFormat::Csv, ReportFormat::Text],
        }
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots_per_subexperiment == 0 {
            return Err(Error::Config("shots_per_subexperiment must be positive".into()));
        }
        if self.tomography && self.tomography_shots == 0 {
            return Err(Error::Config("tomography_shots must be positive".into()));
        }
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.noise
            .confusion()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.resolve_states().map(|_| ())
    }

    /// Roster selection followed by custom states, with unique labels.
    pub fn resolve_states(&self) -> Result<Vec<StateSpec>> {
        let roster = default_state_roster();
        let mut out: Vec<StateSpec> = if self.states.roster.is_empty() {
            roster
        } else {
            self.states
                .roster
                .iter()
                .map(|l| {
                    roster
                        .iter()
                        .find(|s| &s.label == l)
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("unknown roster state {l}")))
                })
                .collect::<Result<_>>()?
        };
        for s in &self.states.custom {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
            out.push(s.clone());
        }
        let mut seen = BTreeSet::new();
        for s in &out {
            if !valid_label(&s.label) {
                return Err(Error::Config(format!("state label {:?} must be [A-Za-z0-9_-]+", s.label)));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(Error::Config(format!("duplicate state label {}", s.label)));
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no states selected".into()));
        }
        Ok(out)
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub const COUNTS_CSV_HEADER: &str = "state,sub_experiment,setting,chain,symbol,count,master_seed,stream";

pub fn counts_csv(counts: &[StateCounts]) -> String {
    let mut s = String::from(COUNTS_CSV_HEADER);
    s.push('\n');
    for sc in counts {
        for t in &sc.tables {
            let chain = t.chain.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("-");
            for (sym, n) in &t.counts {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{:016x}",
                    sc.state,
                    t.sub_experiment,
                    t.setting,
                    chain,
                    sym.as_str(),
                    n,
                    t.seed.0,
                    t.seed.1
                );
            }
        }
    }
    s
}

pub fn tomography_csv(tomo: &[StateTomography]) -> String {
    let mut s = String::from("state,fidelity,residual,projected,purity\n");
    for t in tomo {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6e},{},{:.6}",
            t.state,
            t.result.fidelity_to_target.unwrap_or(f64::NAN),
            t.result.residual,
            t.result.projected,
            t.result.rho.purity()
        );
    }
    s
}

pub fn density_matrices_text(tomo: &[StateTomography]) -> String {
    let mut s = String::from("# rows of re,im pairs\n");
    for t in tomo {
        let _ = writeln!(
            s,
            "# {} fidelity={:.6}\n{}",
            t.state,
            t.result.fidelity_to_target.unwrap_or(f64::NAN),
            format_density_matrix(&t.result.rho)
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    created_unix_seconds: u64,
    config: &'a RunConfig,
    sub_experiments_per_state: usize,
    shots_per_state: u64,
    outputs: Vec<String>,
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, subs: usize, shots: u64, outputs: &[PathBuf]) -> Result<PathBuf> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        created_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: cfg,
        sub_experiments_per_state: subs,
        shots_per_state: shots,
        outputs: outputs
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    write(dir, MANIFEST_FILE, &serde_json::to_string_pretty(&m).expect("serializable"))
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub counts: Vec<StateCounts>,
    pub results: Vec<StateResult>,
    pub tomography: Option<Vec<StateTomography>>,
    pub files: Vec<PathBuf>,
}

/// Roster through plan, analysis and optional tomography, with results in
/// memory and on disk.
pub fn simulate(cfg: &RunConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let states = cfg.resolve_states()?;
    let model = KsModel::build();
    let settings = settings_table();
    let plan = build_plan(&model, &settings, cfg.shots_per_subexperiment, cfg.layout)?;
    let counts = run_roster(&states, &plan, &settings, &cfg.noise, cfg.master_seed)?;
    let confusion = cfg.noise.confusion();
    let mut results = counts
        .iter()
        .map(|c| analyze_state(c, &model, &confusion))
        .collect::<Result<Vec<_>>>()?;
    let tomography = if cfg.tomography {
        let t = run_tomography(&states, &tomography_settings()?, &cfg.noise, cfg.tomography_shots, cfg.master_seed)?;
        for (r, t) in results.iter_mut().zip(&t) {
            r.fidelity = t.result.fidelity_to_target;
        }
        Some(t)
    } else {
        None
    };

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut files = vec![write(dir, COUNTS_FILE, &counts_csv(&counts))?];
    if cfg.formats.contains(&ReportFormat::Csv) || cfg.formats.is_empty() {
        files.push(write(dir, RESULTS_CSV, &results_csv(&results))?);
    }
    if cfg.formats.contains(&ReportFormat::Text) {
        files.push(write(dir, RESULTS_TXT, &results_text(&results))?);
    }
    if let Some(t) = &tomography {
        files.push(write(dir, TOMOGRAPHY_CSV, &tomography_csv(t))?);
        files.push(write(dir, DENSITY_FILE, &density_matrices_text(t))?);
    }
    let manifest = write_manifest(dir, "simulate", cfg, plan.len(), plan.total_realizations(), &files)?;
    files.push(manifest);
    Ok(SimulationOutput {
        counts,
        results,
        tomography,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct TomographyOutput {
    pub states: Vec<StateTomography>,
    /// Mean fidelity over pure states, if any.
    pub mean_pure_fidelity: Option<f64>,
    pub files: Vec<PathBuf>,
}

pub fn tomography(cfg: &RunConfig) -> Result<TomographyOutput> {
    cfg.validate()?;
    let states = cfg.resolve_states()?;
    let settings = tomography_settings()?;
    let tomo = run_tomography(&states, &settings, &cfg.noise, cfg.tomography_shots, cfg.master_seed)?;
    let pure: Vec<f64> = states
        .iter()
        .zip(&tomo)
        .filter(|(s, _)| s.is_pure())
        .filter_map(|(_, t)| t.result.fidelity_to_target)
        .collect();
    let mean_pure_fidelity = (!pure.is_empty()).then(|| pure.iter().sum::<f64>() / pure.len() as f64);
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut files = vec![
        write(dir, TOMOGRAPHY_CSV, &tomography_csv(&tomo))?,
        write(dir, DENSITY_FILE, &density_matrices_text(&tomo))?,
    ];
    let shots = 3 * settings.len() as u64 * cfg.tomography_shots;
    files.push(write_manifest(dir, "tomography", cfg, 3 * settings.len(), shots, &files)?);
    Ok(TomographyOutput {
        states: tomo,
        mean_pure_fidelity,
        files,
    })
}

/// Hardware constants from TOML; missing fields keep their defaults.
pub fn load_hardware(path: &Path) -> Result<HardwareParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One schedule file per setting, `<id>.schedule.csv`.
pub fn compile_schedules(ids: &[String], hw: &HardwareParams, dir: &Path) -> Result<Vec<PathBuf>> {
    let settings = settings_table();
    let chosen: Vec<_> = if ids.is_empty() {
        settings.iter().collect()
    } else {
        ids.iter()
            .map(|id| setting_by_id(&settings, id))
            .collect::<Result<_>>()?
    };
    ensure_dir(dir)?;
    chosen
        .into_iter()
        .map(|s| {
            let path = dir.join(format!("{}.schedule.csv", s.id));
            emit_schedule(s, &[], hw, &path)?;
            Ok(path)
        })
        .collect()
}

/// One row of `results.csv` as read back by the report command.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub state: String,
    pub fidelity: Option<f64>,
    pub chi13: f64,
    pub chi13_stderr: f64,
    pub significance_chi13: f64,
    pub chi4: f64,
    pub chi4_stderr: f64,
    pub significance_chi4: f64,
}

pub fn parse_results_csv(text: &str, path: &Path) -> Result<Vec<ResultRow>> {
    let bad = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(RESULTS_CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 12 {
                return Err(bad(n + 2, "expected 12 fields"));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad(n + 2, &format!("bad number {:?}", f[k])));
            Ok(ResultRow {
                state: f[0].to_string(),
                fidelity: if f[1].is_empty() { None } else { Some(num(1)?) },
                chi13: num(4)?,
                chi13_stderr: num(5)?,
                significance_chi13: num(6)?,
                chi4: num(9)?,
                chi4_stderr: num(10)?,
                significance_chi4: num(11)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub rows: Vec<ResultRow>,
    pub reference_lines: Vec<(&'static str, f64)>,
    pub files: Vec<PathBuf>,
}

pub fn reference_lines() -> Vec<(&'static str, f64)> {
    vec![
        ("chi13_classical", CLASSICAL_BOUND_CHI13 as f64),
        ("chi13_quantum", QUANTUM_CHI13),
        ("chi4_classical", CLASSICAL_BOUND_CHI4 as f64),
        ("chi4_quantum", QUANTUM_CHI4),
    ]
}

/// Aggregated table plus plot data (x = state, y = value with error bar).
pub fn report(run_dir: &Path) -> Result<ReportOutput> {
    if !run_dir.is_dir() {
        return Err(Error::io(
            run_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run directory not found"),
        ));
    }
    let path = run_dir.join(RESULTS_CSV);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rows = parse_results_csv(&text, &path)?;

    let mut plot = String::from("x\tstate\tchi13\tchi13_err\tchi4\tchi4_err\n");
    for (x, r) in rows.iter().enumerate() {
        let _ = writeln!(
            plot,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            x + 1,
            r.state,
            r.chi13,
            r.chi13_stderr,
            r.chi4,
            r.chi4_stderr
        );
    }
    let refs = reference_lines();
    let mut ref_text = String::from("name\ty\n");
    for (name, y) in &refs {
        let _ = writeln!(ref_text, "{name}\t{y:.6}");
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "{:<8} {:>18} {:>7} {:>16} {:>7} {:>8}", "state", "chi13", "sigma", "chi4", "sigma", "fidelity");
    for r in &rows {
        let _ = writeln!(
            summary,
            "{:<8} {:>18} {:>7.1} {:>16} {:>7.1} {:>8}",
            r.state,
            format!("{:.3}({:.3})", r.chi13, r.chi13_stderr),
            r.significance_chi13,
            format!("{:.4}({:.4})", r.chi4, r.chi4_stderr),
            r.significance_chi4,
            r.fidelity.map(|f| format!("{f:.4}")).unwrap_or_else(|| "-".into())
        );
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&ResultRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let min_sig = rows.iter().map(|r| r.significance_chi13).fold(f64::INFINITY, f64::min);
        let _ = writeln!(
            summary,
            "mean chi13 {:.3}, mean chi4 {:.4}, weakest chi13 violation {:.1} sigma",
            mean(&|r| r.chi13),
            mean(&|r| r.chi4),
            min_sig
        );
    }
    let files = vec![
        write(run_dir, PLOT_DATA_FILE, &plot)?,
        write(run_dir, REFERENCE_LINES_FILE, &ref_text)?,
        write(run_dir, REPORT_FILE, &summary)?,
    ];
    Ok(ReportOutput {
        rows,
        reference_lines: refs,
        files,
    })
}
