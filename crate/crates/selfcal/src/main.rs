use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use selfcal::config::{ConfigError, ScenarioConfig};
use selfcal::export::{self, FilterExport};
use selfcal::harness::{self, HarnessError};
use selfcal_core::array::ImpairmentEnsemble;
use selfcal_core::calibration::CompensationMode;

/// Receiver-array self-calibration: simulate, calibrate and score null forming.
#[derive(Parser)]
#[command(name = "selfcal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate impairments and a loopback capture.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Also write the capture as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Estimate offsets and design compensators from a capture file.
    Calibrate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        capture: PathBuf,
    },
    /// Score exported filters against a ground-truth ensemble.
    Evaluate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        filters: PathBuf,
    },
    /// Repeat the full pipeline over several noise powers.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated noise powers (default: 7 points from 1e-8 to 1e-2).
        #[arg(long, value_delimiter = ',')]
        sigma2_list: Option<Vec<f64>>,
    },
    /// Simulate, calibrate and evaluate, writing every artifact.
    Run {
        #[command(flatten)]
        source: Source,
    },
    /// Run one or more seeds and compare against the `[check]` thresholds.
    Check {
        #[command(flatten)]
        source: Source,
        /// Number of consecutive impairment and noise seeds to run.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// List built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fir,
    DirectFrequency,
}

#[derive(Args)]
struct Source {
    /// Built-in scenario (see `selfcal presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Impairment seed; the noise seed is offset by the same amount.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pilot_seed: Option<u64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mode: Option<ModeArg>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig, HarnessError> {
        let mut cfg = match (&self.preset, &self.config) {
            (_, Some(path)) => ScenarioConfig::load(path)?,
            (Some(name), None) => ScenarioConfig::preset(name)?,
            (None, None) => ScenarioConfig::preset("paper-sim")?,
        };
        if let Some(s) = self.seed {
            let shift = s.wrapping_sub(cfg.impairments.seed);
            cfg.impairments.seed = s;
            cfg.noise.seed = cfg.noise.seed.wrapping_add(shift);
        }
        if let Some(s) = self.pilot_seed {
            cfg.pilot.seed = s;
        }
        if let Some(v) = self.sigma2 {
            cfg.noise.sigma2 = v;
        }
        if let Some(v) = self.channels {
            cfg.array.channels = v;
        }
        if let Some(v) = self.n {
            cfg.pilot.n = v;
        }
        if let Some(v) = self.lambda {
            cfg.calibration.lambda = v;
        }
        if let Some(m) = self.mode {
            cfg.calibration.mode = match m {
                ModeArg::Fir => CompensationMode::Fir,
                ModeArg::DirectFrequency => CompensationMode::DirectFrequency,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| Path::new("runs").join(cfg.name.as_deref().unwrap_or("scenario")))
    }
}

fn print_scores(label: &str, q: f64, std: f64) {
    println!("{label:<10} Q_avg {q:>9.2} dB   Q_std {std:>9.2} dB");
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Presets => {
            for name in selfcal::config::preset_names() {
                println!("{name}");
            }
        }
        Command::Simulate { source, csv } => {
            let cfg = source.load()?;
            let dir = source.out_dir(&cfg);
            let (_, ensemble, captures) = harness::simulate(&cfg)?;
            harness::write_simulation(&dir, &cfg, &ensemble, &captures, csv)?;
            println!(
                "wrote {} ({} channels x {} samples)",
                dir.join("capture.acal").display(),
                captures.num_channels(),
                captures.len()
            );
        }
        Command::Calibrate { source, capture } => {
            let cfg = source.load()?;
            let dir = source.out_dir(&cfg);
            let cal = harness::calibrate_from_file(&capture, &cfg)?;
            let path = dir.join("filters.json");
            let text = serde_json::to_string_pretty(&cal.export).expect("filters serialize") + "\n";
            selfcal::write_atomic(&path, text.as_bytes()).map_err(|e| HarnessError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            for r in &cal.export.channels {
                println!(
                    "channel {:>2}: tau {:>9.4}  phi {:>8.4} rad  peak {:.4}",
                    r.channel, r.tau, r.phi, r.peak_magnitude
                );
            }
            println!("wrote {} (latency {} samples)", path.display(), cal.export.latency);
        }
        Command::Evaluate {
            source,
            ensemble,
            filters,
        } => {
            let cfg = source.load()?;
            let ensemble: ImpairmentEnsemble = harness::read_json(&ensemble)?;
            let filters: FilterExport = harness::read_json(&filters)?;
            let eval = harness::evaluate_filters(&cfg, &ensemble, &filters)?;
            let dir = source.out_dir(&cfg);
            let path = dir.join("q_per_bin.csv");
            let mut buf = Vec::new();
            export::write_per_bin_csv(&mut buf, &eval.pre, &eval.post, None).expect("in-memory write");
            selfcal::write_atomic(&path, &buf).map_err(|e| HarnessError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            print_scores("pre", eval.pre.q_avg_db, eval.pre.q_std_db);
            print_scores("post", eval.post.q_avg_db, eval.post.q_std_db);
        }
        Command::Sweep { source, sigma2_list } => {
            let cfg = source.load()?;
            let dir = source.out_dir(&cfg);
            let list = sigma2_list.unwrap_or_else(harness::default_sweep);
            let out = harness::run_noise_sweep(&cfg, &list, Some(&dir))?;
            println!("{:>10} {:>10} {:>10} {:>10}", "sigma2", "pre_dB", "post_dB", "onestage_dB");
            for r in &out.rows {
                let o = r.q_onestage_db.map_or("-".to_string(), |v| format!("{v:.2}"));
                println!("{:>10.1e} {:>10.2} {:>10.2} {:>10}", r.sigma2, r.q_pre_db, r.q_post_db, o);
            }
            println!("spearman(sigma2, post) = {:.3}", out.spearman_post);
            println!("wrote {}", dir.join("sweep.csv").display());
        }
        Command::Run { source } => {
            let cfg = source.load()?;
            let out = harness::run_scenario(&cfg, &source.out_dir(&cfg))?;
            print_scores("pre", out.summary.pre.q_avg_db, out.summary.pre.q_std_db);
            print_scores("post", out.summary.post.q_avg_db, out.summary.post.q_std_db);
            if let Some(o) = out.summary.onestage {
                print_scores("one-stage", o.q_avg_db, o.q_std_db);
            }
            println!("artifacts in {}", out.dir.display());
        }
        Command::Check { source, seeds } => {
            let cfg = source.load()?;
            let Some(thresholds) = cfg.check.clone() else {
                return Err(ConfigError::Field {
                    field: "check",
                    message: "scenario defines no [check] thresholds".into(),
                }
                .into());
            };
            if seeds == 0 {
                return Err(ConfigError::Field {
                    field: "seeds",
                    message: "must be at least 1".into(),
                }
                .into());
            }
            let root = source.out_dir(&cfg);
            let mut failed = 0;
            for i in 0..seeds {
                let mut c = cfg.clone();
                c.impairments.seed = cfg.impairments.seed.wrapping_add(i);
                c.noise.seed = cfg.noise.seed.wrapping_add(i);
                let dir = root.join(format!("seed-{}", c.impairments.seed));
                let out = harness::run_scenario(&c, &dir)?;
                for line in harness::check_summary(&out.summary, &thresholds) {
                    failed += usize::from(!line.passed);
                    println!(
                        "{} seed {}: {} ({:.2} vs {:.2})",
                        if line.passed { "PASS" } else { "FAIL" },
                        c.impairments.seed,
                        line.name,
                        line.value,
                        line.threshold
                    );
                }
            }
            if failed > 0 {
                return Err(HarnessError::Check { failed });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
