//! Run orchestration: stepping loop, cadence sampling, snapshot writes and
//! on-disk reports. File writes happen between steps, never concurrently
//! with stepping.

use std::path::{Path, PathBuf};

use msflux_core::diagnostics::{
    self, monitor_invariants, MonitorConfig, RunRecord, Termination,
};
use msflux_core::integrate::{self, Scheme, StepperConfig};

use crate::config::{RunConfig, SchemeSpec};
use crate::error::CliError;
use crate::presets::build_scenario;
use crate::report::{self, SummaryInputs};
use crate::snapshot;

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub snapshot_every: Option<f64>,
    pub quiet: bool,
}

pub struct RunOutcome {
    pub record: RunRecord<f64>,
    pub output_dir: PathBuf,
    pub exit_code: i32,
}

fn stepper_config(cfg: &RunConfig) -> StepperConfig<f64> {
    StepperConfig {
        scheme: match cfg.scheme_spec() {
            SchemeSpec::Explicit => Scheme::Explicit,
            SchemeSpec::SemiImplicit => Scheme::SemiImplicit,
        },
        dt: cfg.stepper.dt,
        t_end: cfg.stepper.t_end,
        cfl_safety: cfg.stepper.cfl_safety,
        linear_solver_tol: cfg.stepper.linear_solver_tol,
        max_linear_iters: cfg.stepper.max_linear_iters,
    }
}

/// Executes a validated configuration and writes the requested artifacts.
pub fn run_scenario(
    cfg: &RunConfig,
    scenario_name: &str,
    overrides: &Overrides,
) -> Result<RunOutcome, CliError> {
    let (mut sc, seed) = build_scenario(cfg, overrides.seed)?;
    let stepper = stepper_config(cfg);
    let monitor = MonitorConfig {
        s_norm: cfg.diagnostics.s_norm,
        cadence: cfg.diagnostics.cadence,
    };

    let out_dir = overrides
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let snap_dir = out_dir.join("snapshots");
    if overrides.snapshot_every.is_some() {
        std::fs::create_dir_all(&snap_dir).map_err(|e| CliError::Io {
            path: snap_dir.display().to_string(),
            source: e,
        })?;
    }

    let mut record = RunRecord::new();
    record.push(monitor_invariants(&sc.ws, &sc.table, &sc.state, &monitor)?);

    let total_steps = (((stepper.t_end - sc.state.t) / stepper.dt).ceil()).max(0.0) as usize;
    let cadence = if monitor.cadence > 0 {
        monitor.cadence
    } else {
        (total_steps / 200).max(1)
    };

    let mut next_snapshot = overrides.snapshot_every.map(|every| sc.state.t + every);
    let mut step_index = 0usize;
    while sc.state.t < stepper.t_end - stepper.dt * 1e-9 {
        let remaining = stepper.t_end - sc.state.t;
        let dt = remaining.min(stepper.dt);
        match integrate::step(&sc.state, &stepper, &sc.ws, &sc.table, dt) {
            Ok(next) => sc.state = next,
            Err(err) => {
                record.terminate(Termination::Breach(err.to_string()));
                break;
            }
        }
        step_index += 1;
        let at_end = sc.state.t >= stepper.t_end - stepper.dt * 1e-9;
        if step_index % cadence == 0 || at_end {
            record.push(monitor_invariants(&sc.ws, &sc.table, &sc.state, &monitor)?);
        }
        if let (Some(every), Some(due)) = (overrides.snapshot_every, next_snapshot) {
            if sc.state.t + 1e-12 >= due {
                let name = format!("t_{:.6}.bin", sc.state.t);
                snapshot::write_snapshot(&sc.state, &snap_dir.join(name))?;
                next_snapshot = Some(due + every);
            }
        }
    }
    if record.termination == Termination::Incomplete {
        record.terminate(Termination::Completed);
    }

    // Final snapshot so a run can always be resumed.
    if overrides.snapshot_every.is_some() {
        let name = format!("t_{:.6}.bin", sc.state.t);
        snapshot::write_snapshot(&sc.state, &snap_dir.join(name))?;
    }

    let window = if cfg.diagnostics.fit_window.len() == 2 {
        (cfg.diagnostics.fit_window[0], cfg.diagnostics.fit_window[1])
    } else {
        let t0 = record.samples.first().map(|s| s.t).unwrap_or(0.0);
        let t1 = record.samples.last().map(|s| s.t).unwrap_or(0.0);
        (t0, t1)
    };
    let fit = diagnostics::fit_decay_rate(&record.samples, window, diagnostics::NormColumn::L2).ok();
    record.fitted_rate = fit;

    let certificate = diagnostics::compute_certificate(
        &cfg.species.c_bar,
        &sc.table,
        cfg.diagnostics.c_s_param,
        cfg.diagnostics.c_poincare_param,
    );

    let summary = SummaryInputs {
        scenario: scenario_name,
        seed,
        record: &record,
        fit,
        certificate: &certificate,
    };
    if cfg.output.formats.iter().any(|f| f == "csv") {
        report::write_csv(&out_dir.join("diagnostics.csv"), &record.samples)?;
    }
    if cfg.output.formats.iter().any(|f| f == "summary") {
        report::write_summary(&out_dir.join("summary.txt"), &summary)?;
    }
    if !overrides.quiet {
        print!("{}", report::render_summary(&summary));
    }

    let exit_code = if record.completed() { 0 } else { 2 };
    Ok(RunOutcome {
        record,
        output_dir: out_dir,
        exit_code,
    })
}

/// Loads a configuration from a file path or a built-in preset name.
pub fn load_config(arg: &str) -> Result<(RunConfig, String), CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let cfg = crate::config::parse_config(path)?;
        Ok((cfg, arg.to_string()))
    } else if let Some(toml) = crate::presets::preset_toml(arg) {
        let cfg = crate::config::parse_config_str(&toml)?;
        Ok((cfg, arg.to_string()))
    } else {
        Err(CliError::Io {
            path: arg.to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file and no such preset (see `msflux presets`)",
            ),
        })
    }
}
