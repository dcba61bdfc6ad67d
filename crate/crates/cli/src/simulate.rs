//! Flat TOML configuration for simulation runs.
//!
//! Every key is optional except `model`. The resolved configuration, with
//! all defaults filled in, is echoed to stdout and written next to the
//! reports so a run can be repeated from its output directory alone.

use std::path::Path;

use metric_uq::sim::{
    run_coverage_experiment, run_selection_experiment, ExperimentConfig, Method, ModelSpec,
};
use metric_uq::D2Choice;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    GaussianHomo,
    GaussianHetero,
    Distributional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Coverage,
    Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: ModelName,
    pub experiment: Option<Experiment>,
    pub p: Option<usize>,
    pub s: Option<usize>,
    pub rho: Option<f64>,
    pub series_length: Option<usize>,
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
    pub active: Option<usize>,
    pub grid_size: Option<usize>,
    pub n_values: Option<Vec<usize>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub k_values: Option<Vec<usize>>,
    pub method: Option<Method>,
    pub replications: Option<usize>,
    pub eval_size: Option<usize>,
    pub seed: Option<u64>,
    pub d2: Option<D2Choice>,
    pub selection_alpha: Option<f64>,
}

/// Parses `text`; errors carry the line and, when available, the key.
pub fn parse_config(text: &str) -> CliResult<SimulationConfig> {
    toml::from_str(text).map_err(|e| {
        let mut context = String::new();
        if let Some(span) = e.span() {
            let start = span.start.min(text.len());
            let line_no = text[..start].matches('\n').count() + 1;
            context = format!("line {line_no}");
            let line = text.lines().nth(line_no - 1).unwrap_or("");
            if let Some((key, _)) = line.split_once('=') {
                context.push_str(&format!(" key {}", key.trim()));
            }
            context.push_str(": ");
        }
        CliError::new("CONFIG_PARSE", format!("{context}{}", e.message()))
    })
}

fn distributional_only(cfg: &SimulationConfig) -> Vec<&'static str> {
    let mut keys = Vec::new();
    for (set, key) in [
        (cfg.series_length.is_some(), "series_length"),
        (cfg.intercept.is_some(), "intercept"),
        (cfg.slope.is_some(), "slope"),
        (cfg.active.is_some(), "active"),
        (cfg.grid_size.is_some(), "grid_size"),
    ] {
        if set {
            keys.push(key);
        }
    }
    keys
}

/// Fills in defaults. The returned config has every key set.
pub fn resolve(cfg: &SimulationConfig) -> CliResult<(Experiment, ExperimentConfig)> {
    let experiment = cfg.experiment.unwrap_or_default();
    let p = cfg.p.unwrap_or(5);
    let rho = cfg.rho.unwrap_or(0.2);
    let model = match cfg.model {
        ModelName::GaussianHomo | ModelName::GaussianHetero => {
            if let Some(key) = distributional_only(cfg).first() {
                return Err(CliError::new(
                    "CONFIG_PARSE",
                    format!("key {key}: only valid for the distributional model"),
                ));
            }
            let s = cfg.s.unwrap_or(2);
            if cfg.model == ModelName::GaussianHomo {
                ModelSpec::GaussianHomo { p, s, rho }
            } else {
                ModelSpec::GaussianHetero { p, s, rho }
            }
        }
        ModelName::Distributional => {
            if cfg.s.is_some() {
                return Err(CliError::new("CONFIG_PARSE", "key s: not used by the distributional model"));
            }
            let default_active = match experiment {
                Experiment::Coverage => p,
                Experiment::Selection => 1,
            };
            ModelSpec::Distributional {
                p,
                rho,
                series_length: cfg.series_length.unwrap_or(300),
                intercept: cfg.intercept.unwrap_or(100.0),
                slope: cfg.slope.unwrap_or(5.0),
                active: cfg.active.unwrap_or(default_active),
                grid_size: cfg.grid_size.unwrap_or(100),
            }
        }
    };
    if experiment == Experiment::Selection && cfg.model != ModelName::Distributional {
        return Err(CliError::new(
            "CONFIG_PARSE",
            "key experiment: selection runs need the distributional model",
        ));
    }
    let mut config = ExperimentConfig::new(model);
    if let Some(method) = cfg.method {
        config.method = method;
        if method != Method::Homoscedastic && config.k_values.is_empty() {
            config.k_values = vec![10, 20, 50, 100];
        }
    }
    macro_rules! take {
        ($($field:ident),*) => {$(
            if let Some(v) = cfg.$field.clone() {
                config.$field = v;
            }
        )*};
    }
    take!(n_values, alpha_grid, k_values, replications, eval_size, seed, d2, selection_alpha);
    if config.method == Method::Homoscedastic && cfg.k_values.is_none() {
        config.k_values.clear();
    }
    config
        .validate()
        .map_err(|e| CliError::new("CONFIG_INVALID", e.to_string()))?;
    Ok((experiment, config))
}

/// Flat echo of a resolved configuration, same keys as the input file.
pub fn echo(experiment: Experiment, config: &ExperimentConfig) -> String {
    let (model, p, s, rho, dist) = match &config.model {
        ModelSpec::GaussianHomo { p, s, rho } => (ModelName::GaussianHomo, *p, Some(*s), *rho, None),
        ModelSpec::GaussianHetero { p, s, rho } => (ModelName::GaussianHetero, *p, Some(*s), *rho, None),
        ModelSpec::Distributional {
            p,
            rho,
            series_length,
            intercept,
            slope,
            active,
            grid_size,
        } => (
            ModelName::Distributional,
            *p,
            None,
            *rho,
            Some((*series_length, *intercept, *slope, *active, *grid_size)),
        ),
    };
    let flat = SimulationConfig {
        model,
        experiment: Some(experiment),
        p: Some(p),
        s,
        rho: Some(rho),
        series_length: dist.map(|d| d.0),
        intercept: dist.map(|d| d.1),
        slope: dist.map(|d| d.2),
        active: dist.map(|d| d.3),
        grid_size: dist.map(|d| d.4),
        n_values: Some(config.n_values.clone()),
        alpha_grid: Some(config.alpha_grid.clone()),
        k_values: Some(config.k_values.clone()),
        method: Some(config.method),
        replications: Some(config.replications),
        eval_size: Some(config.eval_size),
        seed: Some(config.seed),
        d2: Some(config.d2),
        selection_alpha: Some(config.selection_alpha),
    };
    toml::to_string(&flat).expect("flat config serializes")
}

/// Runs the experiment and writes its CSVs plus `resolved.toml` into `out`.
/// Nothing is written unless the whole run succeeds.
pub fn run(config_path: &Path, out: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::new("IO", format!("{}: {e}", config_path.display())))?;
    let (experiment, config) = resolve(&parse_config(&text)?)?;
    let resolved = echo(experiment, &config);
    print!("{resolved}");

    let (files, runtime) = match experiment {
        Experiment::Coverage => {
            let report = run_coverage_experiment(&config)?;
            (
                vec![
                    ("coverage_rows.csv", report.rows_csv()),
                    ("coverage_summary.csv", report.summary_csv()),
                ],
                report.runtime,
            )
        }
        Experiment::Selection => {
            let report = run_selection_experiment(&config)?;
            (
                vec![
                    ("selection_rows.csv", report.rows_csv()),
                    ("selection_summary.csv", report.summary_csv()),
                ],
                report.runtime,
            )
        }
    };
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::new("IO", format!("{}: {e}", out.display())))?;
    write_atomic(&out.join("resolved.toml"), resolved.as_bytes())?;
    for (name, body) in &files {
        write_atomic(&out.join(name), body.as_bytes())?;
    }
    eprintln!("finished in {:.1} s", runtime.as_secs_f64());
    Ok(())
}
