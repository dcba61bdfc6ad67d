//! CSV ingestion of predictor and response files.
//!
//! Both files carry a header row. Responses are one point per row: `m`
//! coordinates (euclidean), `M` quantile values or a raw series
//! (wasserstein), or `r²` row-major Laplacian entries.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use metric_uq::metric::{
    empirical_quantiles, laplacian_violation, midpoint_grid, DEFAULT_GRID_SIZE, LAPLACIAN_TOLERANCE,
};
use metric_uq::{D2Choice, MetricPoint, PredictorMatrix, Space, SpaceKind};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceName {
    Euclidean,
    Wasserstein,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum D2Arg {
    SameAsD1,
    SupNorm,
    Frobenius,
    Euclidean,
}

impl From<D2Arg> for D2Choice {
    fn from(d: D2Arg) -> Self {
        match d {
            D2Arg::SameAsD1 => D2Choice::SameAsD1,
            D2Arg::SupNorm => D2Choice::SupNorm,
            D2Arg::Frobenius => D2Choice::Frobenius,
            D2Arg::Euclidean => D2Choice::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Predictor CSV (header row, n × p).
    #[arg(long)]
    pub predictors: PathBuf,
    /// Response CSV (header row, one point per row).
    #[arg(long)]
    pub responses: PathBuf,
    /// Wasserstein responses are raw series, one (possibly ragged) row each.
    #[arg(long)]
    pub raw_series: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    #[arg(long, value_enum)]
    pub space: Option<SpaceName>,
    /// Distance used for the ball radius.
    #[arg(long, value_enum, default_value = "same-as-d1")]
    pub d2: D2Arg,
    /// Size of the midpoint quantile grid (wasserstein).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Support bounds `lo,hi` for quantile values (wasserstein).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub bounds: Option<(f64, f64)>,
    /// Bound `W` on edge weights (laplacian).
    #[arg(long)]
    pub edge_bound: Option<f64>,
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect()
}

/// Header plus numeric rows. Empty cells are skipped when `ragged`.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path, ragged: bool) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(ragged)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            if ragged && cell.is_empty() {
                continue;
            }
            let v = cell.parse::<f64>().map_err(|_| {
                CliError::new(
                    "CSV_PARSE",
                    format!("{} line {line} column {}: {cell:?} is not a number", path.display(), col + 1),
                )
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if let csv::ErrorKind::Io(_) = e.kind() {
        return CliError::new("IO", format!("{}: {e}", path.display()));
    }
    if let csv::ErrorKind::UnequalLengths { pos, expected_len, len } = e.kind() {
        let line = pos.as_ref().map_or(0, |p| p.line());
        return CliError::new(
            "DATA_SHAPE",
            format!("{} line {line}: expected {expected_len} fields, found {len}", path.display()),
        );
    }
    CliError::new("CSV_PARSE", format!("{}: {e}", path.display()))
}

/// Predictor matrix and column names.
pub fn load_predictors(path: &Path) -> CliResult<(Vec<String>, PredictorMatrix)> {
    let table = read_table(path, false)?;
    if table.rows.is_empty() {
        return Err(CliError::new("EMPTY_DATA", format!("{} has no data rows", path.display())));
    }
    let x = PredictorMatrix::from_rows(&table.rows)?;
    Ok((table.header, x))
}

/// Builds the response space from flags and the shape of the response file.
pub fn space_from_args(args: &SpaceArgs, table: &Table, raw_series: bool) -> CliResult<Space> {
    let Some(name) = args.space else {
        return Err(CliError::new("SPACE_ARGS", "--space is required"));
    };
    let cols = table.header.len();
    let kind = match name {
        SpaceName::Euclidean => SpaceKind::Euclidean { dim: cols },
        SpaceName::Wasserstein => {
            let m = if raw_series {
                args.grid.unwrap_or(DEFAULT_GRID_SIZE)
            } else {
                if let Some(m) = args.grid.filter(|&m| m != cols) {
                    return Err(CliError::new(
                        "DATA_SHAPE",
                        format!("--grid {m} but the response file has {cols} quantile columns"),
                    ));
                }
                cols
            };
            SpaceKind::Wasserstein {
                grid: midpoint_grid(m),
                bounds: args.bounds,
            }
        }
        SpaceName::Laplacian => {
            let nodes = (cols as f64).sqrt().round() as usize;
            if nodes * nodes != cols {
                return Err(CliError::new(
                    "DATA_SHAPE",
                    format!("laplacian responses need r² columns, found {cols}"),
                ));
            }
            let Some(edge_bound) = args.edge_bound else {
                return Err(CliError::new("SPACE_ARGS", "laplacian space needs --edge-bound"));
            };
            SpaceKind::Laplacian { nodes, edge_bound }
        }
    };
    if name != SpaceName::Wasserstein && (args.grid.is_some() || args.bounds.is_some()) {
        return Err(CliError::new("SPACE_ARGS", "--grid and --bounds apply to the wasserstein space only"));
    }
    Ok(Space::new(kind, args.d2.into())?)
}

/// Turns response rows into points of `space`.
pub fn points_in(space: &Space, table: &Table, raw_series: bool, path: &Path) -> CliResult<Vec<MetricPoint>> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let context = |e: CliError| CliError::new(e.code, format!("{} row {}: {}", path.display(), i + 1, e.message));
            let values = match space.kind() {
                SpaceKind::Wasserstein { grid, .. } if raw_series => {
                    empirical_quantiles(row, grid).map_err(|e| context(e.into()))?
                }
                SpaceKind::Laplacian { nodes, edge_bound } => {
                    if row.len() == nodes * nodes {
                        if let Some(why) = laplacian_violation(*nodes, row, *edge_bound, LAPLACIAN_TOLERANCE) {
                            return Err(context(CliError::new("INVALID_LAPLACIAN", why)));
                        }
                    }
                    row.clone()
                }
                _ => row.clone(),
            };
            space.point(values).map_err(|e| context(e.into()))
        })
        .collect()
}

/// A predictor/response pair with matching rows.
pub struct Dataset {
    pub names: Vec<String>,
    pub x: PredictorMatrix,
    pub y: Vec<MetricPoint>,
    pub space: Space,
}

fn check_rows(x: &PredictorMatrix, responses: &Table, data: &DataArgs) -> CliResult<()> {
    if responses.rows.len() != x.rows() {
        return Err(CliError::new(
            "DATA_SHAPE",
            format!(
                "{} has {} rows but {} has {}",
                data.predictors.display(),
                x.rows(),
                data.responses.display(),
                responses.rows.len()
            ),
        ));
    }
    Ok(())
}

/// Loads a dataset whose space is described by command-line flags.
pub fn load_dataset(data: &DataArgs, space_args: &SpaceArgs) -> CliResult<Dataset> {
    let (names, x) = load_predictors(&data.predictors)?;
    let table = read_table(&data.responses, data.raw_series)?;
    check_rows(&x, &table, data)?;
    let space = space_from_args(space_args, &table, data.raw_series)?;
    let y = points_in(&space, &table, data.raw_series, &data.responses)?;
    Ok(Dataset { names, x, y, space })
}

/// Loads a dataset in a space fixed by a saved model or region.
pub fn load_dataset_in(data: &DataArgs, space: &Space) -> CliResult<Dataset> {
    let (names, x) = load_predictors(&data.predictors)?;
    let table = read_table(&data.responses, data.raw_series)?;
    check_rows(&x, &table, data)?;
    let y = points_in(space, &table, data.raw_series, &data.responses)?;
    Ok(Dataset {
        names,
        x,
        y,
        space: space.clone(),
    })
}

/// Responses alone, for regions that ignore predictors.
pub fn load_responses_in(path: &Path, space: &Space, raw_series: bool) -> CliResult<Vec<MetricPoint>> {
    let table = read_table(path, raw_series)?;
    if table.rows.is_empty() {
        return Err(CliError::new("EMPTY_DATA", format!("{} has no data rows", path.display())));
    }
    points_in(space, &table, raw_series, path)
}

pub fn describe(space: &Space) -> String {
    let kind = match space.kind() {
        SpaceKind::Euclidean { dim } => format!("euclidean(dim={dim})"),
        SpaceKind::Wasserstein { grid, bounds } => match bounds {
            Some((lo, hi)) => format!("wasserstein(grid={}, bounds=[{lo}, {hi}])", grid.len()),
            None => format!("wasserstein(grid={})", grid.len()),
        },
        SpaceKind::Laplacian { nodes, edge_bound } => format!("laplacian(nodes={nodes}, edge_bound={edge_bound})"),
    };
    let d2 = match space.d2_choice() {
        D2Choice::SameAsD1 => "same-as-d1",
        D2Choice::SupNorm => "sup-norm",
        D2Choice::Frobenius => "frobenius",
        D2Choice::Euclidean => "euclidean",
    };
    format!("{kind} d2={d2}")
}
