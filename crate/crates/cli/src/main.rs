use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msflux_cli::{load_config, run_scenario, Overrides};

#[derive(Parser)]
#[command(
    name = "msflux",
    version,
    about = "Simulates an incompressible multicomponent cross-diffusion mixture on the periodic torus"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario from a config file or a built-in preset name.
    Run {
        /// Path to a TOML configuration, or a preset name.
        config: String,
        /// Write artifacts here instead of the configured directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the perturbation seed recorded in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a field snapshot every this many time units.
        #[arg(long, value_name = "T")]
        snapshot_every: Option<f64>,
        /// Suppress the summary on stdout.
        #[arg(long)]
        quiet: bool,
    },
    /// Run the invariant and property suite on built-in scenarios.
    Verify {
        /// Print only failing checks.
        #[arg(long)]
        quiet: bool,
    },
    /// Print the regime certificate of a configuration.
    Certificate {
        /// Path to a TOML configuration, or a preset name.
        config: String,
    },
    /// List built-in presets, or print one preset's TOML.
    Presets {
        /// Preset name to print.
        name: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run {
            config,
            output_dir,
            seed,
            snapshot_every,
            quiet,
        } => {
            let (cfg, name) = load_config(&config)?;
            let overrides = Overrides {
                output_dir,
                seed,
                snapshot_every,
                quiet,
            };
            let outcome = run_scenario(&cfg, &name, &overrides)?;
            if !quiet {
                eprintln!("artifacts written to {}", outcome.output_dir.display());
            }
            Ok(ExitCode::from(outcome.exit_code as u8))
        }
        Cmd::Verify { quiet } => {
            let checks = msflux_cli::verify::run_all();
            let mut failed = 0usize;
            for c in &checks {
                if c.pass {
                    if !quiet {
                        println!("PASS {:32} {}", c.name, c.detail);
                    }
                } else {
                    failed += 1;
                    println!("FAIL {:32} {}", c.name, c.detail);
                }
            }
            println!("{} checks, {} failed", checks.len(), failed);
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Cmd::Certificate { config } => {
            let (cfg, _) = load_config(&config)?;
            let flat: Vec<f64> = cfg.species.delta.iter().flatten().copied().collect();
            let table = msflux_core::mixture::DiffusionTable::new(cfg.species.n, &flat)?;
            let cert = msflux_core::diagnostics::compute_certificate(
                &cfg.species.c_bar,
                &table,
                cfg.diagnostics.c_s_param,
                cfg.diagnostics.c_poincare_param,
            );
            print!("{}", msflux_cli::report::render_certificate(&cert));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Presets { name } => {
            match name {
                Some(name) => match msflux_cli::presets::preset_toml(&name) {
                    Some(toml) => print!("{toml}"),
                    None => {
                        eprintln!("unknown preset {name:?}");
                        return Ok(ExitCode::from(1));
                    }
                },
                None => {
                    for (name, blurb) in msflux_cli::presets::preset_catalog() {
                        println!("{name:24} {blurb}");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
