//! Command-line driver. Exit status 0 on success, 1 on usage errors and 2 on
//! data or validation errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bandwidth::{optimize_bandwidths, BandwidthSearchConfig};
use crate::domain::{incidents_in, Bandwidths, DensitySurface, GridSpec2D, GridSpec3D, Incident, LandUseGrid, TimeWindow};
use crate::error::Error;
use crate::estimators::stkde_volume;
use crate::evaluation::pipeline::{run_evaluation, BandwidthChoice, EvaluationConfig};
use crate::evaluation::{
    build_prediction_groups, compare_methods, scale_lattice, select_hotspots, Method, PaiCurve, MEAN_MONTH_DAYS,
};
use crate::io::{self, IncidentTable, TimeEncoding};
use crate::kernels::KernelId;
use crate::significance::{
    build_null_ensemble, classify_significance, marginalize_time, SignificanceLevel, DEFAULT_ALPHA, DEFAULT_REPLICATES,
};
use crate::synth::{drifting_cluster_spec, generate_incidents, generate_landuse, DriftingParams};

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "stkde", version, about = "Space-time kernel density hotspot mapping and evaluation")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search bandwidths by leave-one-out likelihood.
    Optimize(OptimizeArgs),
    /// Write STKDE slices as density_t<k>.asc.
    Estimate(EstimateArgs),
    /// Monte-Carlo significance of an STKDE estimate.
    Significance(SignificanceArgs),
    /// Select hotspot cells from a surface and significance mask.
    Hotspots(HotspotsArgs),
    /// Rolling evaluation of the selected methods.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic land use and incident set.
    Synth(SynthArgs),
    /// ANOVA and Welch t-tests on a PAI CSV.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Land-use ESRI ASCII grid; defines the grid and eligible cells.
    #[arg(long)]
    landuse: Option<PathBuf>,
    /// Cell size in meters. Without --landuse the grid covers the incidents.
    #[arg(long)]
    grid_cell: Option<f64>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    incidents: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Temporal resolution in days (lower temporal search bound).
    #[arg(long, default_value_t = 1.0)]
    t_bin: f64,
    /// hx_min,hx_max,hy_min,hy_max,ht_min,ht_max
    #[arg(long)]
    search_bounds: Option<String>,
    /// Lattice points per axis.
    #[arg(long, default_value_t = 12)]
    lattice: usize,
}

#[derive(Args, Debug)]
struct WindowArgs {
    /// Window start (day number, or date for dated incidents). Default: first incident.
    #[arg(long)]
    t_start: Option<String>,
    /// Window end (exclusive). Default: just past the last incident.
    #[arg(long)]
    t_end: Option<String>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    incidents: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// hx,hy,ht
    #[arg(long)]
    bandwidths: String,
    #[arg(long, default_value_t = 1.0)]
    t_bin: f64,
    /// Number of time bins; overrides the window end.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LevelArg {
    Cell,
    Voxel,
}

impl From<LevelArg> for SignificanceLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Cell => SignificanceLevel::Cell,
            LevelArg::Voxel => SignificanceLevel::Voxel,
        }
    }
}

#[derive(Args, Debug)]
struct SignificanceArgs {
    #[arg(long)]
    incidents: PathBuf,
    #[arg(long)]
    landuse: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// hx,hy,ht
    #[arg(long)]
    bandwidths: String,
    #[arg(long, default_value_t = 1.0)]
    t_bin: f64,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "cell")]
    level: LevelArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct HotspotsArgs {
    #[arg(long)]
    surface: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    landuse: PathBuf,
    /// Percent of the study area.
    #[arg(long)]
    area_pct: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    incidents: PathBuf,
    #[arg(long)]
    landuse: PathBuf,
    /// hx,hy,ht; searched on pre-forecast incidents when omitted.
    #[arg(long)]
    bandwidths: Option<String>,
    /// hx_min,hx_max,hy_min,hy_max,ht_min,ht_max
    #[arg(long)]
    search_bounds: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    t_bin: f64,
    /// First forecast start (date for dated incidents, else day number).
    #[arg(long)]
    first_forecast: String,
    /// Forecast window length in days.
    #[arg(long, default_value_t = 7)]
    horizon: u64,
    /// Training length in days. Default: the preceding calendar month for
    /// dated incidents, 30.4375 days otherwise.
    #[arg(long)]
    training: Option<f64>,
    #[arg(long, default_value_t = 8)]
    groups: usize,
    #[arg(long, default_value_t = 0.0)]
    scale_min: f64,
    #[arg(long, default_value_t = 25.0)]
    scale_max: f64,
    #[arg(long, default_value_t = 0.1)]
    scale_step: f64,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "cell")]
    level: LevelArg,
    /// Comma-separated subset of STKDE,SKDE,PROMAP.
    #[arg(long, default_value = "STKDE,SKDE,PROMAP")]
    methods: String,
    /// Skip writing per-group rasters.
    #[arg(long)]
    no_rasters: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 60)]
    cols: usize,
    #[arg(long, default_value_t = 60)]
    rows: usize,
    #[arg(long, default_value_t = 100.0)]
    grid_cell: f64,
    #[arg(long, default_value_t = 0.6)]
    eligible_fraction: f64,
    #[arg(long, default_value_t = 365.0)]
    days: f64,
    /// Write ISO timestamps counted from this date instead of day numbers.
    #[arg(long)]
    start_date: Option<NaiveDate>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// PAI CSV written by `evaluate`.
    #[arg(long)]
    pai: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI on `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} workers: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Optimize(a) => optimize(a),
        Command::Estimate(a) => estimate(a),
        Command::Significance(a) => significance(a),
        Command::Hotspots(a) => hotspots(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::Compare(a) => compare(a),
    }
}

fn parse_floats(s: &str, n: usize, flag: &str) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("{flag}: expected {n} comma-separated numbers, got `{s}`")))?;
    if v.len() != n {
        return usage(format!("{flag}: expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_bandwidths(s: &str) -> CliResult<Bandwidths> {
    let v = parse_floats(s, 3, "--bandwidths")?;
    Bandwidths::new(v[0], v[1], v[2]).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_bounds(s: &str) -> CliResult<([f64; 3], [f64; 3])> {
    let v = parse_floats(s, 6, "--search-bounds")?;
    Ok(([v[0], v[2], v[4]], [v[1], v[3], v[5]]))
}

fn parse_methods(s: &str) -> CliResult<Vec<Method>> {
    let methods: Vec<Method> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e: Error| CliError::Usage(format!("--methods: {e}")))?;
    if methods.is_empty() {
        return usage("--methods: select at least one method");
    }
    Ok(methods)
}

/// A time flag as days: a date under calendar encoding, a number otherwise.
fn parse_time(s: &str, table: &IncidentTable, flag: &str) -> CliResult<f64> {
    match table.encoding {
        TimeEncoding::Days => s
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("{flag}: expected a day number, got `{s}`"))),
        TimeEncoding::Calendar { epoch } => {
            let dt = io::parse_datetime(s).ok_or_else(|| CliError::Usage(format!("{flag}: expected a date, got `{s}`")))?;
            let start = epoch.and_hms_opt(0, 0, 0).unwrap();
            Ok((dt - start).num_seconds() as f64 / 86_400.0)
        }
    }
}

fn read_incidents(path: &Path) -> CliResult<IncidentTable> {
    let table = io::read_incidents_csv(path)?;
    for r in &table.rejected {
        log::warn!("{}:{}: skipped row: {}", path.display(), r.line, r.reason);
    }
    Ok(table)
}

fn check_cell(cell: Option<f64>) -> CliResult<Option<f64>> {
    match cell {
        Some(c) if !(c > 0.0 && c.is_finite()) => usage(format!("--grid-cell must be positive, got {c}")),
        other => Ok(other),
    }
}

/// Grid and land use from --landuse, or a bounding grid with every cell eligible.
fn resolve_grid(args: &GridArgs, incidents: &[Incident]) -> CliResult<LandUseGrid> {
    let cell = check_cell(args.grid_cell)?;
    if let Some(path) = &args.landuse {
        let lu = io::read_landuse(path)?;
        if let Some(c) = cell {
            if c != lu.spec().cell_size() {
                return usage(format!("--grid-cell {c} differs from the land-use cell size {}", lu.spec().cell_size()));
            }
        }
        return Ok(lu);
    }
    let Some(c) = cell else {
        return usage("either --landuse or --grid-cell is required");
    };
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in incidents {
        x0 = x0.min(i.x);
        y0 = y0.min(i.y);
        x1 = x1.max(i.x);
        y1 = y1.max(i.y);
    }
    let x0 = (x0 / c).floor() * c;
    let y0 = (y0 / c).floor() * c;
    let n_cols = ((x1 - x0) / c).floor() as usize + 1;
    let n_rows = ((y1 - y0) / c).floor() as usize + 1;
    Ok(LandUseGrid::all_eligible(GridSpec2D::new(x0, y0, c, n_cols, n_rows)?))
}

fn resolve_window(args: &WindowArgs, table: &IncidentTable) -> CliResult<TimeWindow> {
    let start = match &args.t_start {
        Some(s) => parse_time(s, table, "--t-start")?,
        None => table.incidents.iter().map(|i| i.t).fold(f64::INFINITY, f64::min).floor(),
    };
    let end = match &args.t_end {
        Some(s) => parse_time(s, table, "--t-end")?,
        None => table.incidents.iter().map(|i| i.t).fold(f64::NEG_INFINITY, f64::max).floor() + 1.0,
    };
    TimeWindow::new(start, end).map_err(|e| CliError::Usage(e.to_string()))
}

fn check_t_bin(t_bin: f64) -> CliResult<()> {
    if t_bin > 0.0 && t_bin.is_finite() {
        Ok(())
    } else {
        usage(format!("--t-bin must be positive, got {t_bin}"))
    }
}

fn check_null(replicates: usize, alpha: f64) -> CliResult<()> {
    if replicates == 0 {
        return usage("--replicates must be at least 1");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return usage(format!("--alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn bins_for(window: TimeWindow, t_bin: f64) -> usize {
    ((window.length() / t_bin) - 1e-9).ceil().max(1.0) as usize
}

fn optimize(a: OptimizeArgs) -> CliResult<()> {
    check_t_bin(a.t_bin)?;
    let table = read_incidents(&a.incidents)?;
    let lu = resolve_grid(&a.grid, &table.incidents)?;
    let span = table.incidents.iter().map(|i| i.t).fold(f64::NEG_INFINITY, f64::max)
        - table.incidents.iter().map(|i| i.t).fold(f64::INFINITY, f64::min);
    let mut config = match &a.search_bounds {
        Some(s) => {
            let (lo, hi) = parse_bounds(s)?;
            BandwidthSearchConfig::new(lo, hi)
        }
        None => BandwidthSearchConfig::default_for(lu.spec(), a.t_bin, span.max(2.0 * a.t_bin)),
    };
    config.lattice = [a.lattice; 3];
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let r = optimize_bandwidths(&table.incidents, &config, KernelId::Epanechnikov)?;
    println!("h_x {}", r.bw.h_x());
    println!("h_y {}", r.bw.h_y());
    println!("h_t {}", r.bw.h_t());
    println!("log_likelihood {}", r.log_likelihood);
    println!("evaluations {}", r.evaluations);
    Ok(())
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Data(e.into()))
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    check_t_bin(a.t_bin)?;
    let bw = parse_bandwidths(&a.bandwidths)?;
    let table = read_incidents(&a.incidents)?;
    let lu = resolve_grid(&a.grid, &table.incidents)?;
    let window = resolve_window(&a.window, &table)?;
    let n_bins = match a.bins {
        Some(0) => return usage("--bins must be at least 1"),
        Some(n) => n,
        None => bins_for(window, a.t_bin),
    };
    let spec = GridSpec3D::new(*lu.spec(), window.start(), a.t_bin, n_bins)?;
    let volume = stkde_volume(&table.incidents, &spec, bw, KernelId::Epanechnikov)?;
    create_dir(&a.out)?;
    for k in 0..n_bins {
        let slice = DensitySurface::new(*lu.spec(), volume.slice(k).to_vec())?;
        io::write_surface(&a.out.join(format!("density_t{k}.asc")), &slice)?;
    }
    println!("wrote {n_bins} slices to {}", a.out.display());
    Ok(())
}

fn bool_values(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect()
}

fn significance(a: SignificanceArgs) -> CliResult<()> {
    check_t_bin(a.t_bin)?;
    check_null(a.replicates, a.alpha)?;
    let bw = parse_bandwidths(&a.bandwidths)?;
    let table = read_incidents(&a.incidents)?;
    let lu = io::read_landuse(&a.landuse)?;
    let window = resolve_window(&a.window, &table)?;
    let observed = incidents_in(&table.incidents, window);
    if observed.is_empty() {
        return Err(Error::EmptyIncidents.into());
    }
    let spec = GridSpec3D::new(*lu.spec(), window.start(), a.t_bin, bins_for(window, a.t_bin))?;
    let kernel = KernelId::Epanechnikov;
    let level: SignificanceLevel = a.level.into();
    let volume = stkde_volume(&observed, &spec, bw, kernel)?;
    let ensemble = build_null_ensemble(observed.len(), &lu, window, &spec, bw, kernel, a.replicates, a.seed, level)?;
    create_dir(&a.out)?;
    match level {
        SignificanceLevel::Cell => {
            let surface = marginalize_time(&volume);
            let sig = classify_significance(&surface, &ensemble, a.alpha)?;
            io::write_surface(&a.out.join("density.asc"), &surface)?;
            io::write_masked(&a.out.join("p_values.asc"), &sig.p_values, &lu)?;
            io::write_masked(&a.out.join("significant.asc"), &bool_values(&sig.significant), &lu)?;
            println!("significant cells {}", sig.significant_count());
        }
        SignificanceLevel::Voxel => {
            let sig = classify_significance(&volume, &ensemble, a.alpha)?;
            let cells = lu.spec().cell_count();
            for k in 0..spec.n_bins() {
                let range = k * cells..(k + 1) * cells;
                let slice = DensitySurface::new(*lu.spec(), volume.slice(k).to_vec())?;
                io::write_surface(&a.out.join(format!("density_t{k}.asc")), &slice)?;
                io::write_masked(&a.out.join(format!("p_values_t{k}.asc")), &sig.p_values[range.clone()], &lu)?;
                io::write_masked(
                    &a.out.join(format!("significant_t{k}.asc")),
                    &bool_values(&sig.significant[range]),
                    &lu,
                )?;
            }
            println!("significant voxels {}", sig.significant_count());
        }
    }
    Ok(())
}

fn hotspots(a: HotspotsArgs) -> CliResult<()> {
    if !(a.area_pct > 0.0 && a.area_pct <= 100.0) {
        return usage(format!("--area-pct must lie in (0, 100], got {}", a.area_pct));
    }
    let surface = io::read_surface(&a.surface)?;
    let (mask_spec, mask) = io::read_mask(&a.mask)?;
    let lu = io::read_landuse(&a.landuse)?;
    if !mask_spec.aligned_with(surface.spec()) {
        return Err(Error::Misaligned("mask and surface grids differ".into()).into());
    }
    let sel = select_hotspots(&surface, &mask, &lu, a.area_pct)?;
    let mut values = vec![0.0; surface.values().len()];
    for &c in &sel.cells {
        values[c] = 1.0;
    }
    io::write_masked(&a.out, &values, &lu)?;
    println!("hotspot cells {} of {} (feasible: {})", sel.cells.len(), sel.target, sel.feasible);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    check_t_bin(a.t_bin)?;
    check_null(a.replicates, a.alpha)?;
    let methods = parse_methods(&a.methods)?;
    if a.groups == 0 || a.horizon == 0 {
        return usage("--groups and --horizon must be positive");
    }
    let scales = scale_lattice(a.scale_min, a.scale_max, a.scale_step).map_err(|e| CliError::Usage(e.to_string()))?;
    let table = read_incidents(&a.incidents)?;
    let lu = io::read_landuse(&a.landuse)?;
    let t_min = table.incidents.iter().map(|i| i.t).fold(f64::INFINITY, f64::min);
    let t_max = table.incidents.iter().map(|i| i.t).fold(f64::NEG_INFINITY, f64::max);
    let data_window = TimeWindow::new(t_min.floor(), t_max.floor() + 1.0)?;
    let first = parse_time(&a.first_forecast, &table, "--first-forecast")?;

    let groups = match (a.training, table.encoding) {
        (Some(days), _) => {
            if !(days > 0.0) {
                return usage("--training must be positive");
            }
            build_prediction_groups(data_window, first, a.horizon as f64, days, a.groups)?
        }
        (None, TimeEncoding::Calendar { epoch }) => {
            let first_date = io::parse_datetime(&a.first_forecast)
                .map(|d| d.date())
                .ok_or_else(|| CliError::Usage("--first-forecast: expected a date".into()))?;
            io::calendar_prediction_groups(epoch, data_window, first_date, a.horizon, a.groups)?
        }
        (None, TimeEncoding::Days) => {
            build_prediction_groups(data_window, first, a.horizon as f64, MEAN_MONTH_DAYS, a.groups)?
        }
    };

    let bandwidths = match &a.bandwidths {
        Some(s) => BandwidthChoice::Fixed(parse_bandwidths(s)?),
        None => {
            let cfg = match &a.search_bounds {
                Some(s) => {
                    let (lo, hi) = parse_bounds(s)?;
                    BandwidthSearchConfig::new(lo, hi)
                }
                None => {
                    let training = groups.iter().map(|g| g.training.length()).fold(0.0, f64::max);
                    BandwidthSearchConfig::default_for(lu.spec(), a.t_bin, training.max(2.0 * a.t_bin))
                }
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            BandwidthChoice::Search(cfg)
        }
    };
    let config = EvaluationConfig {
        groups,
        methods,
        bandwidths,
        kernel: KernelId::Epanechnikov,
        t_bin: a.t_bin,
        replicates: a.replicates,
        alpha: a.alpha,
        master_seed: a.seed,
        level: a.level.into(),
        promap: None,
        scales,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_evaluation(&table.incidents, &lu, &config)?;

    create_dir(&a.out)?;
    let mut per_group: BTreeMap<Method, Vec<(usize, PaiCurve)>> = BTreeMap::new();
    for g in &result.groups {
        for (m, run) in &g.methods {
            per_group.entry(*m).or_default().push((g.group.index, run.curve.clone()));
            if !a.no_rasters {
                let stem = format!("group{}_{}", g.group.index, m.name().to_ascii_lowercase());
                io::write_surface(&a.out.join(format!("{stem}_density.asc")), &run.surface)?;
                io::write_masked(&a.out.join(format!("{stem}_significant.asc")), &bool_values(&run.significant), &lu)?;
            }
        }
    }
    io::write_pai_csv(&a.out.join("pai.csv"), &per_group, &result.consolidated)?;
    io::write_compare_csv(&a.out.join("compare.csv"), &result.comparison)?;

    let bw = result.bandwidths;
    println!("bandwidths {} {} {}", bw.h_x(), bw.h_y(), bw.h_t());
    for (m, mean) in &result.comparison.mean_pai {
        match mean {
            Some(v) => println!("{m} mean PAI {v:.4}"),
            None => println!("{m} mean PAI n/a"),
        }
    }
    Ok(())
}

fn format_time(t: f64, start: Option<NaiveDate>) -> String {
    match start {
        None => t.to_string(),
        Some(d) => {
            let base: NaiveDateTime = d.and_hms_opt(0, 0, 0).unwrap();
            let dt = base + chrono::Duration::microseconds((t * 86_400e6).round() as i64);
            dt.format("%Y-%m-%dT%H:%M:%S%.6f").to_string()
        }
    }
}

fn synth(a: SynthArgs) -> CliResult<()> {
    if a.cols == 0 || a.rows == 0 {
        return usage("--cols and --rows must be positive");
    }
    check_cell(Some(a.grid_cell))?;
    if !(a.days > 0.0) {
        return usage("--days must be positive");
    }
    let spec = GridSpec2D::new(0.0, 0.0, a.grid_cell, a.cols, a.rows)?;
    let lu = generate_landuse(spec, a.eligible_fraction, a.seed)?;
    let window = TimeWindow::new(0.0, a.days)?;
    let process = drifting_cluster_spec(&spec, window, &DriftingParams::default(), a.seed);
    let incidents = generate_incidents(&process, &lu, window)?;
    create_dir(&a.out)?;
    io::write_landuse(&a.out.join("landuse.asc"), &lu)?;
    let mut text = String::from("id,x,y,t\n");
    for i in &incidents {
        text.push_str(&format!("{},{},{},{}\n", i.id, i.x, i.y, format_time(i.t, a.start_date)));
    }
    io::write_atomic(&a.out.join("incidents.csv"), text.as_bytes())?;
    println!("wrote {} incidents to {}", incidents.len(), a.out.display());
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult<()> {
    let table = io::read_pai_csv(&a.pai)?;
    let curves: BTreeMap<Method, Vec<PaiCurve>> = table
        .groups
        .into_iter()
        .map(|(m, groups)| (m, groups.into_values().collect()))
        .collect();
    let comparison = compare_methods(&curves)?;
    io::write_compare_csv(&a.out, &comparison)?;
    for (m, mean) in &comparison.mean_pai {
        if let Some(v) = mean {
            println!("{m} mean PAI {v:.4}");
        }
    }
    Ok(())
}
