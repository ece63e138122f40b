use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qutrit_ks::model::KsModel;
use qutrit_ks::pulse::{settings_table, HardwareParams};
use qutrit_ks::run::{self, RunConfig};
use qutrit_ks::sim::{NoiseMode, PlanLayout};
use qutrit_ks::verify::run_verification;
use qutrit_ks::Error;

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "qutrit-ks", version, about = "Qutrit Kochen-Specker contextuality simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static checks: graph, operators, classical bounds, settings table.
    Verify {
        /// Print the machine-readable report instead of text.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write pulse schedules for measurement settings.
    Compile {
        /// Setting ids (M1..M16); all when omitted.
        settings: Vec<String>,
        #[arg(long, default_value = "schedules")]
        out_dir: PathBuf,
        /// TOML file with hardware constants.
        #[arg(long)]
        hw: Option<PathBuf>,
        /// Override the Rabi 2π time in microseconds.
        #[arg(long)]
        rabi_2pi_us: Option<f64>,
    },
    /// Run the state roster through the measurement plan and analysis.
    Simulate(RunArgs),
    /// Simulated tomography of the selected states.
    Tomography(RunArgs),
    /// Aggregate a simulate run into a table and plot data.
    Report { run_dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Ideal,
    Flip,
    PhotonCount,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Canonical,
    BothOrders,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per sub-experiment (and per tomography sub-run).
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    eps_dark_to_bright: Option<f64>,
    #[arg(long)]
    eps_bright_to_dark: Option<f64>,
    #[arg(long)]
    depolarization: Option<f64>,
    /// Comma-separated roster labels, e.g. psi1,psi7,rho10.
    #[arg(long, value_delimiter = ',')]
    states: Option<Vec<String>>,
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    #[arg(long)]
    no_tomography: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(n) = self.shots {
            cfg.shots_per_subexperiment = n;
            cfg.tomography_shots = n;
        }
        if let Some(n) = self.noise {
            cfg.noise.mode = match n {
                NoiseArg::Ideal => NoiseMode::Ideal,
                NoiseArg::Flip => NoiseMode::Flip,
                NoiseArg::PhotonCount => NoiseMode::PhotonCount,
            };
        }
        if let Some(e) = self.eps_dark_to_bright {
            cfg.noise.eps_dark_to_bright = e;
        }
        if let Some(e) = self.eps_bright_to_dark {
            cfg.noise.eps_bright_to_dark = e;
        }
        if let Some(p) = self.depolarization {
            cfg.noise.prep_depolarization = p;
        }
        if let Some(s) = &self.states {
            cfg.states.roster = s.clone();
        }
        if let Some(l) = self.layout {
            cfg.layout = match l {
                LayoutArg::Canonical => PlanLayout::Canonical,
                LayoutArg::BothOrders => PlanLayout::BothOrders,
            };
        }
        if self.no_tomography {
            cfg.tomography = false;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn load_hw(path: Option<&PathBuf>, rabi: Option<f64>) -> Result<HardwareParams, Error> {
    let mut hw = match path {
        Some(p) => run::load_hardware(p)?,
        None => HardwareParams::default(),
    };
    if let Some(t) = rabi {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("rabi_2pi_us must be positive, got {t}")));
        }
        hw.rabi_two_pi_time_us = t;
    }
    Ok(hw)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Verify { json, out } => {
            let report = run_verification(&KsModel::build(), &settings_table());
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.render_text());
            }
            if let Some(p) = out {
                std::fs::write(&p, report.to_json()).map_err(|source| Error::Io { path: p, source })?;
            }
            Ok(if report.all_passed() { 0 } else { EXIT_VERIFY })
        }
        Command::Compile {
            settings,
            out_dir,
            hw,
            rabi_2pi_us,
        } => {
            let hw = load_hw(hw.as_ref(), rabi_2pi_us)?;
            for p in run::compile_schedules(&settings, &hw, &out_dir)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let out = run::simulate(&cfg)?;
            print!("{}", qutrit_ks::analysis::results_text(&out.results));
            println!("wrote {} files to {}", out.files.len(), cfg.output_dir.display());
            Ok(0)
        }
        Command::Tomography(args) => {
            let cfg = args.resolve()?;
            let out = run::tomography(&cfg)?;
            for s in &out.states {
                println!(
                    "{:<8} fidelity {:.4}{}",
                    s.state,
                    s.result.fidelity_to_target.unwrap_or(f64::NAN),
                    if s.result.projected { " (projected)" } else { "" }
                );
            }
            if let Some(f) = out.mean_pure_fidelity {
                println!("mean fidelity (pure states) {f:.4}");
            }
            Ok(0)
        }
        Command::Report { run_dir } => {
            let out = run::report(&run_dir)?;
            print!("{}", std::fs::read_to_string(run_dir.join(run::REPORT_FILE)).unwrap_or_default());
            println!(
                "{} data rows, {} reference lines",
                out.rows.len(),
                out.reference_lines.len()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
