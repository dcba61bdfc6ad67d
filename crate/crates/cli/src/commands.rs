use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use metric_uq::dcov;
use metric_uq::region::{
    fit_heteroscedastic_conformal, fit_heteroscedastic_knn, fit_homoscedastic, fit_unconditional,
    fit_unconditional_split, residuals, split,
};
use metric_uq::selection::{select_variables, SelectionConfig};
use metric_uq::{rng, Center, GlobalFrechetModel, MetricPoint, PredictionRegion, Space};

use crate::data::{
    describe, load_dataset, load_dataset_in, load_responses_in, parse_list, points_in, read_table,
    space_from_args, DataArgs, SpaceArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{load_json, save_json, write_atomic};

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Model file to write (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let data = load_dataset(&args.data, &args.space)?;
    let model = GlobalFrechetModel::fit(&data.x, &data.y, &data.space)?;
    save_json(&args.out, &model)?;
    println!("n={} p={} space={}", model.n(), model.p(), describe(model.space()));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Constant radius from held-out residuals.
    Homo,
    /// Local radius from the k nearest held-out residuals.
    Knn,
    /// kNN radius shifted by a calibration split.
    Conformal,
    /// Ball around the Fréchet mean of the responses, no predictors.
    Unconditional,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Fitted model (JSON); optional for the unconditional mode.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Held-out predictors; not used by the unconditional mode.
    #[arg(long)]
    pub predictors: Option<PathBuf>,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub raw_series: bool,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub k: Option<usize>,
    /// Fractions `a,b`: conformal mode splits the held-out rows into a
    /// kNN part and a calibration part; unconditional mode splits into a
    /// center part and a radius part.
    #[arg(long, value_parser = parse_list)]
    pub splits: Option<std::vec::Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Region file to write (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

fn mode_args(msg: impl Into<String>) -> CliError {
    CliError::new("MODE_ARGS", msg)
}

fn check_mode_args(args: &RegionArgs) -> CliResult<()> {
    let needs_k = matches!(args.mode, Mode::Knn | Mode::Conformal);
    match (needs_k, args.k) {
        (true, None) => return Err(mode_args("--k is required for knn and conformal modes")),
        (false, Some(_)) => return Err(mode_args("--k applies to knn and conformal modes only")),
        _ => {}
    }
    match (args.mode, &args.splits) {
        (Mode::Conformal, None) => {
            return Err(mode_args("conformal mode needs --splits a,b for the calibration split"))
        }
        (Mode::Homo | Mode::Knn, Some(_)) => {
            return Err(mode_args("--splits applies to conformal and unconditional modes only"))
        }
        (_, Some(s)) if s.len() != 2 => return Err(mode_args("--splits takes exactly two fractions")),
        _ => {}
    }
    if args.mode != Mode::Unconditional && (args.model.is_none() || args.predictors.is_none()) {
        return Err(mode_args("this mode needs --model and --predictors"));
    }
    if args.mode == Mode::Unconditional && args.predictors.is_some() {
        return Err(mode_args("unconditional mode does not use --predictors"));
    }
    if args.model.is_some() && args.space.space.is_some() {
        return Err(mode_args("--space conflicts with --model; the model fixes the space"));
    }
    Ok(())
}

pub fn region(args: &RegionArgs) -> CliResult<()> {
    check_mode_args(args)?;
    let model: Option<GlobalFrechetModel> = match &args.model {
        Some(path) => Some(load_json(path, "model")?),
        None => None,
    };

    let (region, held_out) = if args.mode == Mode::Unconditional {
        let (space, y) = match &model {
            Some(m) => (m.space().clone(), load_responses_in(&args.responses, m.space(), args.raw_series)?),
            None => {
                let table = read_table(&args.responses, args.raw_series)?;
                if table.rows.is_empty() {
                    return Err(CliError::new("EMPTY_DATA", format!("{} has no data rows", args.responses.display())));
                }
                let space = space_from_args(&args.space, &table, args.raw_series)?;
                let y = points_in(&space, &table, args.raw_series, &args.responses)?;
                (space, y)
            }
        };
        let region = match &args.splits {
            Some(s) => fit_unconditional_split(&y, args.alpha, &space, s[0] / (s[0] + s[1]), args.seed)?,
            None => fit_unconditional(&y, args.alpha, &space, args.seed)?,
        };
        (region, None)
    } else {
        let model = model.expect("checked above");
        let data = DataArgs {
            predictors: args.predictors.clone().expect("checked above"),
            responses: args.responses.clone(),
            raw_series: args.raw_series,
        };
        let held = load_dataset_in(&data, model.space())?;
        if held.x.cols() != model.p() {
            return Err(CliError::new(
                "DATA_SHAPE",
                format!("model has {} predictors, data has {}", model.p(), held.x.cols()),
            ));
        }
        let rule = match args.mode {
            Mode::Homo => fit_homoscedastic(&residuals(&model, &held.x, &held.y, args.seed)?, args.alpha)?,
            Mode::Knn => {
                let sample = residuals(&model, &held.x, &held.y, args.seed)?;
                fit_heteroscedastic_knn(&sample, args.alpha, args.k.unwrap())?
            }
            Mode::Conformal => {
                let fractions = args.splits.as_ref().unwrap();
                let parts = split(held.x.rows(), fractions, args.seed)?;
                let pick = |idx: &[usize]| idx.iter().map(|&i| held.y[i].clone()).collect::<Vec<_>>();
                let local = residuals(
                    &model,
                    &held.x.select_rows(&parts.train),
                    &pick(&parts.train),
                    rng::child_seed(args.seed, 1),
                )?;
                let calib = residuals(
                    &model,
                    &held.x.select_rows(&parts.test),
                    &pick(&parts.test),
                    rng::child_seed(args.seed, 2),
                )?;
                fit_heteroscedastic_conformal(&local, &calib, args.alpha, args.k.unwrap())?
            }
            Mode::Unconditional => unreachable!(),
        };
        let space = model.space().clone();
        (PredictionRegion::new(Center::Model(model), rule, args.alpha, space)?, Some(held))
    };

    save_json(&args.out, &region)?;
    let mut report = format!("mode={:?} alpha={}\n", args.mode, args.alpha).to_lowercase();
    match region.radius_rule().constant() {
        Some(r) => writeln!(report, "radius={r}").unwrap(),
        None => {
            let held = held_out.expect("local radii come from held-out data");
            let mut radii: Vec<f64> = held.x.iter_rows().map(|x| region.radius_at(x)).collect();
            radii.sort_by(f64::total_cmp);
            let mean = radii.iter().sum::<f64>() / radii.len() as f64;
            let median = radii[(radii.len() - 1) / 2];
            writeln!(
                report,
                "radius_min={} radius_median={median} radius_mean={mean} radius_max={}",
                radii[0],
                radii[radii.len() - 1]
            )
            .unwrap();
        }
    }
    print!("{report}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Region file written by `region`.
    #[arg(long)]
    pub region: PathBuf,
    /// Predictors; optional for unconditional regions.
    #[arg(long)]
    pub predictors: Option<PathBuf>,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub raw_series: bool,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Per-row `(distance, radius, inside)`.
fn evaluate(args: &EvalArgs) -> CliResult<Vec<(f64, f64, bool)>> {
    let region: PredictionRegion = load_json(&args.region, "region")?;
    let space: &Space = region.space();
    let (rows, y): (Vec<Vec<f64>>, Vec<MetricPoint>) = match &args.predictors {
        Some(p) => {
            let data = DataArgs {
                predictors: p.clone(),
                responses: args.responses.clone(),
                raw_series: args.raw_series,
            };
            let held = load_dataset_in(&data, space)?;
            (held.x.iter_rows().map(<[f64]>::to_vec).collect(), held.y)
        }
        None => {
            if !matches!(region.center(), Center::Fixed(_)) || region.radius_rule().constant().is_none() {
                return Err(mode_args("this region depends on predictors; pass --predictors"));
            }
            let y = load_responses_in(&args.responses, space, args.raw_series)?;
            (vec![Vec::new(); y.len()], y)
        }
    };
    rows.iter()
        .zip(&y)
        .map(|(x, yi)| {
            let center = region.center_at(x)?;
            let distance = space.distance_d2(yi, &center)?;
            let radius = region.radius_at(x);
            Ok((distance, radius, region.contains(x, yi)?))
        })
        .collect()
}

pub fn contains(args: &EvalArgs) -> CliResult<()> {
    let mut csv = String::from("row,distance,radius,inside\n");
    for (i, (d, r, inside)) in evaluate(args)?.into_iter().enumerate() {
        writeln!(csv, "{},{d},{r},{inside}", i + 1).unwrap();
    }
    emit(args.out.as_deref(), &csv)
}

pub fn coverage(args: &EvalArgs) -> CliResult<()> {
    let results = evaluate(args)?;
    let inside = results.iter().filter(|t| t.2).count();
    let text = format!(
        "n={} inside={inside} coverage={}\n",
        results.len(),
        inside as f64 / results.len() as f64
    );
    emit(args.out.as_deref(), &text)
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of permutations B.
    #[arg(long, default_value_t = dcov::DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn test_homoscedastic(args: &TestArgs) -> CliResult<()> {
    if args.permutations == 0 {
        return Err(CliError::new("BAD_B", "--permutations must be at least 1"));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::new("INVALID_ARGUMENT", "--level must lie in (0, 1)"));
    }
    let model: GlobalFrechetModel = load_json(&args.model, "model")?;
    let held = load_dataset_in(&args.data, model.space())?;
    let sample = residuals(&model, &held.x, &held.y, args.seed)?;
    let (decision, result) =
        dcov::decide_algorithm(&held.x, sample.residuals(), args.level, args.permutations, args.seed)?;
    println!("statistic={}", result.statistic);
    println!("dcov_squared={}", result.dcov_squared);
    println!("p_value={}", result.p_value);
    println!("permutations={}", result.permutations);
    println!("level={}", args.level);
    println!("decision={decision}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Family-wise level; each variable is tested at alpha / p.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Train / test fractions.
    #[arg(long, value_parser = parse_list, default_value = "0.5,0.5")]
    pub splits: std::vec::Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn select(args: &SelectArgs) -> CliResult<()> {
    let [train, test] = args.splits[..] else {
        return Err(CliError::new("INVALID_ARGUMENT", "--splits takes exactly two fractions"));
    };
    let data = load_dataset(&args.data, &args.space)?;
    let config = SelectionConfig {
        alpha: args.alpha,
        split: [train, test],
        seed: args.seed,
        local: false,
        names: Some(data.names.clone()),
    };
    let reports = select_variables(&data.x, &data.y, &data.space, &config)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::new("IO", e.to_string());
    out.write_record(["Variable No.", "Variable Name", "Selected", "Raw p-value"])
        .map_err(io)?;
    for r in &reports {
        out.write_record([
            (r.variable_index + 1).to_string(),
            r.name.clone().unwrap_or_default(),
            if r.selected { "yes" } else { "no" }.to_string(),
            r.p_value_raw.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = out.into_inner().map_err(|e| CliError::new("IO", e.to_string()))?;
    emit(args.out.as_deref(), &String::from_utf8(bytes).expect("csv output is utf-8"))
}
