use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use catbath::config::{parse_config, ScenarioConfig};
use catbath::models::{effective_rates, CouplerParams};
use catbath::presets;
use catbath::scenario::{self, fmt_f64};
use catbath::Error;

#[derive(Parser)]
#[command(name = "catbath", version, about = "Lindblad simulations of an rf-SQUID ring and its two-photon bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        out: RunArgs,
    },
    /// Run a shipped preset (see `preset --list`).
    Preset {
        /// Preset name, e.g. fig3c.
        name: Option<String>,
        /// List the presets and exit.
        #[arg(long)]
        list: bool,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        out: RunArgs,
    },
    /// Effective two-photon and dephasing rates of a coupler.
    Rates {
        #[arg(long)]
        chi_a: f64,
        #[arg(long)]
        chi_b: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa_a: f64,
        #[arg(long)]
        kappa_b: f64,
        /// Real part of the probe drive.
        #[arg(long)]
        epsilon: f64,
        /// Imaginary part of the probe drive.
        #[arg(long, default_value_t = 0.0)]
        epsilon_im: f64,
    },
    /// Compare the full two-mode coupler against the effective signal model.
    ValidateCoupler {
        config: PathBuf,
        /// Write validation.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a scenario at its audit dimension and report the largest observable drift.
    AuditTruncation {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Output directory (default: the scenario's output.dir, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent runs (default: the scenario's workers setting).
    #[arg(long)]
    workers: Option<usize>,
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    parse_config(&fs::read_to_string(path)?)
}

fn run(cfg: &ScenarioConfig, args: &RunArgs) -> Result<bool, Error> {
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let workers = args.workers.unwrap_or(cfg.workers);
    let outcome = scenario::run_scenario(cfg, &out, workers)?;
    for f in &outcome.files {
        println!("{}  {}", f.sha256, out.join(&f.path).display());
    }
    let mut ok = true;
    for r in &outcome.runs {
        let dir = if r.run.is_empty() { out.clone() } else { out.join(&r.run) };
        match &r.failure {
            None => println!("run {:<16} ok      {:8.2} s  {}", display_run(&r.run), r.wall_time_s, dir.display()),
            Some(e) => {
                ok = false;
                println!("run {:<16} FAILED  {:8.2} s  {}: {e}", display_run(&r.run), r.wall_time_s, dir.display());
            }
        }
    }
    Ok(ok)
}

fn display_run(label: &str) -> &str {
    if label.is_empty() {
        "-"
    } else {
        label
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => load(&config).and_then(|c| run(&c, &out)),
        Command::Preset { name, list, print, out } => {
            if list || name.is_none() {
                for p in presets::PRESETS {
                    println!("{:<24} {}", p.name, p.summary);
                }
                Ok(true)
            } else {
                let name = name.expect("checked");
                match presets::get(&name) {
                    None => Err(Error::InvalidParameter { name: "preset", reason: format!("unknown preset \"{name}\"") }),
                    Some(p) if print => {
                        print!("{}", p.text);
                        Ok(true)
                    }
                    Some(p) => parse_config(p.text).and_then(|c| run(&c, &out)),
                }
            }
        }
        Command::Rates { chi_a, chi_b, kappa_a, kappa_b, epsilon, epsilon_im } => {
            CouplerParams::new(chi_a, chi_b, kappa_a, kappa_b, Complex64::new(epsilon, epsilon_im)).and_then(|c| {
                let r = effective_rates(&c)?;
                println!("quantity,value");
                println!("beta0,{}", fmt_f64(c.beta0()));
                println!("gamma2,{}", fmt_f64(r.gamma2));
                println!("gamma_perp,{}", fmt_f64(r.gamma_perp));
                println!("separation,{}", fmt_f64(scenario::scale_separation(&c)));
                Ok(true)
            })
        }
        Command::ValidateCoupler { config, out } => load(&config).and_then(|c| {
            let r = scenario::validate_coupler(&c)?;
            if let Some(w) = &r.warning {
                eprintln!("warning: {w}");
            }
            let csv = scenario::coupler_report_csv(&r);
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("validation.csv"), &csv)?;
            }
            print!("{csv}");
            println!("# separation {}", fmt_f64(r.separation));
            println!("# gamma2 {} gamma_perp {}", fmt_f64(r.gamma2), fmt_f64(r.gamma_perp));
            println!("# max trace distance {}", fmt_f64(r.max_distance));
            Ok(true)
        }),
        Command::AuditTruncation { config, workers } => load(&config).and_then(|c| {
            let r = scenario::audit_truncation(&c, workers.unwrap_or(c.workers))?;
            println!("run,source,quantity,max_drift");
            for row in &r.rows {
                println!("{},{},{},{}", display_run(&row.run), row.source, row.quantity, fmt_f64(row.max_drift));
            }
            println!("# dim {} vs {}: max drift {}", r.dim, r.audit_dim, fmt_f64(r.max_drift));
            Ok(true)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Error::Config(errs)) => {
            eprintln!("error: invalid scenario:");
            for e in errs {
                eprintln!("  - {e}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
