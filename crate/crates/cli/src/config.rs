//! Run configuration: TOML schema, validation and the typed form handed to
//! the runner.
//!
//! Validation is total: a malformed file produces either a parse error or
//! the full list of offending keys, never a panic.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, ValidationIssue};

/// Raw TOML schema. Everything optional has a default, so minimal files
/// stay minimal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub species: SpeciesSection,
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub u_bar: UBarSection,
    pub stepper: StepperSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    pub n: usize,
    pub c_bar: Vec<f64>,
    /// Full matrix, row major; diagonal zero.
    pub delta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub eps: f64,
    /// "zero" | "sine" | "random" | "file:<path>"
    pub init: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_modes")]
    pub modes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_modes() -> Vec<usize> {
    vec![1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UBarSection {
    /// "zero" | "constant" | "stream"
    pub preset: String,
    #[serde(default)]
    pub scale: f64,
    /// Component values for the constant preset (one per dimension).
    #[serde(default)]
    pub values: Vec<f64>,
}

impl Default for UBarSection {
    fn default() -> Self {
        Self {
            preset: "zero".to_string(),
            scale: 0.0,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    /// "explicit" | "semi-implicit"
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_lin_tol")]
    pub linear_solver_tol: f64,
    #[serde(default = "default_lin_iters")]
    pub max_linear_iters: usize,
}

fn default_cfl() -> f64 {
    0.9
}

fn default_lin_tol() -> f64 {
    1e-10
}

fn default_lin_iters() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_s_norm")]
    pub s_norm: usize,
    /// Steps between samples; 0 picks a cadence giving at least 200 samples.
    #[serde(default)]
    pub cadence: usize,
    #[serde(default = "default_unit")]
    pub c_s_param: f64,
    #[serde(default = "default_unit")]
    pub c_poincare_param: f64,
    /// Optional fit window [t0, t1]; defaults to the full run.
    #[serde(default)]
    pub fit_window: Vec<f64>,
}

fn default_s_norm() -> usize {
    2
}

fn default_unit() -> f64 {
    1.0
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            s_norm: default_s_norm(),
            cadence: 0,
            c_s_param: 1.0,
            c_poincare_param: 1.0,
            fit_window: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_outdir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_outdir() -> String {
    "out".to_string()
}

fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "summary".to_string()]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_outdir(),
            formats: default_formats(),
        }
    }
}

/// Typed perturbation source after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    Sine,
    Random,
    File(PathBuf),
}

/// Typed convection-velocity preset after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum UBarSpec {
    Zero,
    Constant(Vec<f64>),
    Stream { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSpec {
    Explicit,
    SemiImplicit,
}

impl RunConfig {
    pub fn init_spec(&self) -> InitSpec {
        let init = self.perturbation.init.as_str();
        if let Some(path) = init.strip_prefix("file:") {
            InitSpec::File(PathBuf::from(path))
        } else {
            match init {
                "zero" => InitSpec::Zero,
                "sine" => InitSpec::Sine,
                _ => InitSpec::Random,
            }
        }
    }

    pub fn u_bar_spec(&self) -> UBarSpec {
        match self.u_bar.preset.as_str() {
            "constant" => UBarSpec::Constant(self.u_bar.values.clone()),
            "stream" => UBarSpec::Stream {
                scale: self.u_bar.scale,
            },
            _ => UBarSpec::Zero,
        }
    }

    pub fn scheme_spec(&self) -> SchemeSpec {
        if self.stepper.scheme == "semi-implicit" {
            SchemeSpec::SemiImplicit
        } else {
            SchemeSpec::Explicit
        }
    }

    /// Checks every cross-field constraint; returns all problems found.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let mut push = |key: &str, reason: String| {
            issues.push(ValidationIssue {
                key: key.to_string(),
                reason,
            });
        };

        let dim = self.grid.dim;
        if !(1..=3).contains(&dim) {
            push("grid.dim", format!("must be 1, 2 or 3, got {dim}"));
        }
        let m = self.grid.points_per_axis;
        if m < 8 || !m.is_power_of_two() {
            push(
                "grid.points_per_axis",
                format!("must be a power of two >= 8, got {m}"),
            );
        }

        let n = self.species.n;
        if n < 2 {
            push("species.n", format!("need at least 2 species, got {n}"));
        }
        if self.species.c_bar.len() != n {
            push(
                "species.c_bar",
                format!("expected {n} entries, got {}", self.species.c_bar.len()),
            );
        }
        if self.species.c_bar.iter().any(|&v| !(v > 0.0)) {
            push("species.c_bar", "strictly positive required".to_string());
        }
        if self.species.delta.len() != n
            || self.species.delta.iter().any(|row| row.len() != n)
        {
            push("species.delta", format!("expected an {n} x {n} matrix"));
        } else {
            for i in 0..n {
                for j in 0..n {
                    let v = self.species.delta[i][j];
                    if i == j {
                        if v != 0.0 {
                            push("species.delta", format!("diagonal entry ({i},{i}) must be 0"));
                        }
                    } else if !(v > 0.0) {
                        push("species.delta", "must be positive".to_string());
                    } else if v != self.species.delta[j][i] {
                        push(
                            "species.delta",
                            format!("entries ({i},{j}) and ({j},{i}) differ"),
                        );
                    }
                }
            }
        }

        let eps = self.perturbation.eps;
        if !(eps > 0.0 && eps <= 1.0) {
            push("perturbation.eps", format!("must lie in (0, 1], got {eps}"));
        }
        let init = self.perturbation.init.as_str();
        if !(init == "zero" || init == "sine" || init == "random" || init.starts_with("file:")) {
            push(
                "perturbation.init",
                format!("unknown preset {init:?} (zero|sine|random|file:<path>)"),
            );
        }
        if self.perturbation.amplitude < 0.0 {
            push("perturbation.amplitude", "must be nonnegative".to_string());
        }
        if (init == "sine" || init == "random") && self.perturbation.modes.is_empty() {
            push("perturbation.modes", "at least one mode required".to_string());
        }
        if self.perturbation.modes.iter().any(|&k| k == 0) {
            push("perturbation.modes", "modes must be >= 1".to_string());
        }
        if m >= 8 {
            let cutoff = m / 3;
            if self.perturbation.modes.iter().any(|&k| k > cutoff) {
                push(
                    "perturbation.modes",
                    format!("modes above the dealiasing cutoff {cutoff} are discarded"),
                );
            }
        }

        match self.u_bar.preset.as_str() {
            "zero" => {}
            "constant" => {
                if self.u_bar.values.len() != dim {
                    push(
                        "u_bar.values",
                        format!("expected {dim} components, got {}", self.u_bar.values.len()),
                    );
                }
            }
            "stream" => {
                if dim < 2 {
                    push(
                        "u_bar.preset",
                        "stream preset needs dim >= 2 (1-d solenoidal fields are constant)"
                            .to_string(),
                    );
                }
            }
            other => push("u_bar.preset", format!("unknown preset {other:?}")),
        }

        match self.stepper.scheme.as_str() {
            "explicit" | "semi-implicit" => {}
            other => push("stepper.scheme", format!("unknown scheme {other:?}")),
        }
        if !(self.stepper.dt > 0.0) {
            push("stepper.dt", "must be positive".to_string());
        }
        if !(self.stepper.t_end > 0.0) {
            push("stepper.t_end", "must be positive".to_string());
        }
        if !(self.stepper.cfl_safety > 0.0 && self.stepper.cfl_safety <= 1.0) {
            push("stepper.cfl_safety", "must lie in (0, 1]".to_string());
        }
        if !(self.stepper.linear_solver_tol > 0.0) {
            push("stepper.linear_solver_tol", "must be positive".to_string());
        }
        if self.stepper.max_linear_iters == 0 {
            push("stepper.max_linear_iters", "must be at least 1".to_string());
        }

        if self.diagnostics.s_norm > 8 {
            push("diagnostics.s_norm", "capped at 8".to_string());
        }
        if !(self.diagnostics.c_s_param > 0.0) {
            push("diagnostics.c_s_param", "must be positive".to_string());
        }
        if !(self.diagnostics.c_poincare_param > 0.0) {
            push("diagnostics.c_poincare_param", "must be positive".to_string());
        }
        if !(self.diagnostics.fit_window.is_empty() || self.diagnostics.fit_window.len() == 2) {
            push(
                "diagnostics.fit_window",
                "expected [t0, t1] or nothing".to_string(),
            );
        }

        for f in &self.output.formats {
            if f != "csv" && f != "summary" {
                push("output.formats", format!("unknown format {f:?} (csv|summary)"));
            }
        }

        issues
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_config_str(&text)
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let issues = cfg.validate();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Validation(issues))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
dim = 1
points_per_axis = 64

[species]
n = 2
c_bar = [1.0, 1.0]
delta = [[0.0, 1.0], [1.0, 0.0]]

[perturbation]
eps = 0.001
init = "sine"

[stepper]
scheme = "explicit"
dt = 0.004
t_end = 1.0
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.grid.points_per_axis, 64);
        assert_eq!(cfg.init_spec(), InitSpec::Sine);
        assert_eq!(cfg.u_bar_spec(), UBarSpec::Zero);
        assert_eq!(cfg.scheme_spec(), SchemeSpec::Explicit);
    }

    #[test]
    fn nonpositive_delta_is_named() {
        let bad = MINIMAL.replace("[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, -1.0], [-1.0, 0.0]]");
        match parse_config_str(&bad) {
            Err(CliError::Validation(issues)) => {
                assert!(issues
                    .iter()
                    .any(|i| i.key == "species.delta" && i.reason.contains("positive")));
            }
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn zero_c_bar_entry_is_named() {
        let bad = MINIMAL.replace("c_bar = [1.0, 1.0]", "c_bar = [0.0, 2.0]");
        match parse_config_str(&bad) {
            Err(CliError::Validation(issues)) => {
                assert!(issues
                    .iter()
                    .any(|i| i.key == "species.c_bar" && i.reason.contains("strictly positive")));
            }
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn multiple_issues_are_collected() {
        let bad = MINIMAL
            .replace("dim = 1", "dim = 5")
            .replace("dt = 0.004", "dt = -1.0");
        match parse_config_str(&bad) {
            Err(CliError::Validation(issues)) => {
                assert!(issues.len() >= 2);
                assert!(issues.iter().any(|i| i.key == "grid.dim"));
                assert!(issues.iter().any(|i| i.key == "stepper.dt"));
            }
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let bad = format!("{MINIMAL}\n[grid2]\nfoo = 1\n");
        assert!(matches!(parse_config_str(&bad), Err(CliError::Parse(_))));
    }
}
