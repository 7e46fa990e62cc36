//! Command-line front end.
//!
//! Every run resolves its flags into a [`RunConfig`], computes all artifacts in
//! memory and only then writes them, together with `config.json`, into the
//! output directory. `privcov --config DIR/config.json --out OTHER` repeats a
//! run exactly.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::coverage::{heatmap_grid, privacy_profile, HeatmapGrid};
use crate::data::{load_csv, normalize, Dataset};
use crate::erm::{train, BaseSolution, ModelPoint, TrainOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::Error;
use crate::mechanism::{derive_seed, perturb, sample_models, sample_noise_seeded, MechanismParams};
use crate::neighbors::{build_neighbor_set, validate_neighbor_set, NeighborSet};
use crate::plot::Chart;
use crate::stats::log_grid;
use crate::sweep::{
    run_sweep, PlateauParams, SweepConfig, SweepResult, DEFAULT_POINTS_PER_DECADE, DEFAULT_SAMPLES, DEFAULT_TAU,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_BOUND: i32 = 5;

const DEFAULT_OUT: &str = "privcov-out";

#[derive(Debug, Parser)]
#[command(name = "privcov", version, about = "Coverage-based privacy analysis of output-perturbed logistic regression")]
struct Cli {
    /// Repeat the run recorded in a config.json; replaces the subcommand and data flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Comma-separated feature columns.
    #[arg(long, global = true, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long, global = true)]
    label: Option<String>,
    /// Label value mapped to +1; every other value maps to -1.
    #[arg(long, global = true)]
    positive_label: Option<String>,
    /// Keep only the first N rows.
    #[arg(long, global = true)]
    rows: Option<usize>,
    #[arg(long, global = true, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Command>,
}

/// Either one ε or a log-spaced grid.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EpsilonArgs {
    #[arg(long, conflicts_with_all = ["eps_min", "eps_max"])]
    pub epsilon: Option<f64>,
    #[arg(long, requires = "eps_max")]
    pub eps_min: Option<f64>,
    #[arg(long, requires = "eps_min")]
    pub eps_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_POINTS_PER_DECADE)]
    pub points_per_decade: usize,
}

impl EpsilonArgs {
    fn single(&self) -> Result<f64, Failure> {
        match (self.epsilon, self.eps_min) {
            (Some(e), None) => Ok(e),
            (_, Some(_)) => Err(Failure::Usage("this command takes a single --epsilon, not a grid".into())),
            (None, None) => Err(Failure::Usage("--epsilon is required".into())),
        }
    }

    fn grid(&self) -> Result<Vec<f64>, Failure> {
        match (self.epsilon, self.eps_min, self.eps_max) {
            (Some(e), None, None) => Ok(vec![e]),
            (None, Some(lo), Some(hi)) => {
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Failure::Usage(format!("need 0 < --eps-min <= --eps-max, got {lo} and {hi}")));
                }
                if self.points_per_decade == 0 {
                    return Err(Failure::Usage("--points-per-decade must be positive".into()));
                }
                Ok(log_grid(lo, hi, self.points_per_decade))
            }
            _ => Err(Failure::Usage("give either --epsilon or both --eps-min and --eps-max".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Train the base model; writes model.json.
    Train,
    /// Sphere bounds and worst-case points of every neighbor; writes neighbors.csv.
    Neighbors {
        /// Also retrain every neighbor and report the deviation.
        #[arg(long)]
        validate: bool,
    },
    /// Compare worst-case points with full retraining; writes validation.csv and summary.json.
    Validate {
        /// Exit with status 5 when the maximum relative deviation exceeds this.
        #[arg(long, default_value_t = 0.05)]
        bound: f64,
    },
    /// Model points drawn from the base mechanism and selected neighbor mechanisms.
    Sample {
        #[command(flatten)]
        eps: EpsilonArgs,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Comma-separated neighbor indices.
        #[arg(long, value_delimiter = ',')]
        neighbors: Vec<usize>,
    },
    /// Per-ε samples from the base and the first neighbors' mechanisms.
    Scatter {
        #[command(flatten)]
        eps: EpsilonArgs,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Number of neighbors, taken in row order.
        #[arg(long, default_value_t = 50)]
        neighbor_count: usize,
        #[arg(long)]
        svg: bool,
    },
    /// Privacy profile at one model point.
    Profile {
        #[command(flatten)]
        eps: EpsilonArgs,
        /// `center`, `sample`, or comma-separated coordinates.
        #[arg(long, default_value = "center")]
        model_point: String,
        /// Also write a loss heatmap on an N×N lattice (2 features only).
        #[arg(long)]
        heatmap_resolution: Option<usize>,
    },
    /// Typical profiles and per-neighbor losses over an ε grid.
    Sweep {
        #[command(flatten)]
        eps: EpsilonArgs,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Ranks tracked in ranks.csv.
        #[arg(long, value_delimiter = ',')]
        ranks: Vec<usize>,
        /// Neighbors that get curves; all when omitted.
        #[arg(long, value_delimiter = ',')]
        neighbors: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long)]
        svg: bool,
    },
}

impl Command {
    fn is_randomized(&self) -> bool {
        match self {
            Command::Train | Command::Neighbors { .. } | Command::Validate { .. } => false,
            Command::Profile { model_point, .. } => model_point == "sample",
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub path: PathBuf,
    pub features: Vec<String>,
    pub label: String,
    pub positive_label: String,
    pub rows: Option<usize>,
}

/// Everything needed to repeat a run, except where its output goes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub data: DataSpec,
    pub lambda: f64,
    pub tol: f64,
    pub seed: Option<u64>,
    pub command: Command,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Index { .. } | Error::Dimension { .. } => EXIT_USAGE,
        Error::NoConvergence { .. } | Error::Numerical(_) | Error::Regime(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Files produced by one run, in write order.
struct Output {
    files: Vec<(String, Vec<u8>)>,
    status: i32,
}

impl Output {
    fn new() -> Self {
        Self { files: Vec::new(), status: EXIT_OK }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }
}

/// CSV with a header, floats in shortest round-trip form.
struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Result<Self, Failure> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(Error::from)?;
        Ok(Self { writer })
    }

    fn row(&mut self, cells: &[String]) -> Result<(), Failure> {
        self.writer.write_record(cells).map_err(Error::from)?;
        Ok(())
    }

    fn finish(self) -> Result<Vec<u8>, Failure> {
        self.writer.into_inner().map_err(|e| Failure::Lib(Error::Io(e.into_error())))
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn indexed(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|j| format!("{prefix}_{j}")).collect()
}

fn coords(p: &ModelPoint) -> impl Iterator<Item = String> + '_ {
    p.as_slice().iter().map(|&v| num(v))
}

/// Runs the CLI on the process arguments and returns the exit status.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Runs the CLI on explicit arguments (the first one is the program name).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let result = resolve(cli).and_then(|cfg| {
        if let Some(seed) = cfg.seed {
            eprintln!("privcov {}: master seed {seed}", cfg.version);
        }
        let output = execute(&cfg)?;
        write_outputs(&out, &cfg, &output)?;
        Ok(output.status)
    });
    match result {
        Ok(status) => status,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve(cli: Cli) -> Result<RunConfig, Failure> {
    let cfg = if let Some(path) = &cli.config {
        if cli.command.is_some() {
            return Err(Failure::Usage("--config cannot be combined with a subcommand".into()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?;
        RunConfig { version: env!("CARGO_PKG_VERSION").to_string(), ..cfg }
    } else {
        let command = cli.command.ok_or_else(|| Failure::Usage("a subcommand or --config is required".into()))?;
        let missing = |flag: &str| Failure::Usage(format!("--{flag} is required"));
        if cli.features.is_empty() {
            return Err(missing("features"));
        }
        RunConfig {
            version: env!("CARGO_PKG_VERSION").to_string(),
            data: DataSpec {
                path: cli.data.ok_or_else(|| missing("data"))?,
                features: cli.features,
                label: cli.label.ok_or_else(|| missing("label"))?,
                positive_label: cli.positive_label.ok_or_else(|| missing("positive-label"))?,
                rows: cli.rows,
            },
            lambda: cli.lambda,
            tol: cli.tol,
            seed: cli.seed,
            command,
        }
    };
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Failure::Usage(format!("--lambda must be positive, got {}", cfg.lambda)));
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Failure::Usage(format!("--tol must be positive, got {}", cfg.tol)));
    }
    if cfg.command.is_randomized() && cfg.seed.is_none() {
        return Err(Failure::Usage("this command draws random samples and needs --seed".into()));
    }
    Ok(cfg)
}

fn write_outputs(dir: &Path, cfg: &RunConfig, output: &Output) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let mut config = serde_json::to_vec_pretty(cfg).map_err(Error::from)?;
    config.push(b'\n');
    std::fs::write(dir.join("config.json"), config).map_err(Error::from)?;
    for (name, bytes) in &output.files {
        std::fs::write(dir.join(name), bytes).map_err(Error::from)?;
    }
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let spec = &cfg.data;
    let mut raw = load_csv(&spec.path, &spec.features, &spec.label, &spec.positive_label)?;
    if let Some(n) = spec.rows {
        raw = raw.head(n)?;
    }
    Ok(normalize(&raw)?)
}

fn train_opts(cfg: &RunConfig) -> TrainOptions {
    TrainOptions { tol: cfg.tol, max_iter: DEFAULT_MAX_ITER }
}

fn base_solution(cfg: &RunConfig, data: &Dataset) -> Result<BaseSolution, Failure> {
    Ok(train(data, cfg.lambda, train_opts(cfg))?)
}

fn neighbor_set(cfg: &RunConfig, data: &Dataset) -> Result<NeighborSet, Failure> {
    let base = base_solution(cfg, data)?;
    Ok(build_neighbor_set(&base, data)?)
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.expect("seed presence checked when resolving the config")
}

fn execute(cfg: &RunConfig) -> Result<Output, Failure> {
    let data = load(cfg)?;
    match &cfg.command {
        Command::Train => cmd_train(cfg, &data),
        Command::Neighbors { validate } => cmd_neighbors(cfg, &data, *validate),
        Command::Validate { bound } => cmd_validate(cfg, &data, *bound),
        Command::Sample { eps, samples, neighbors } => cmd_sample(cfg, &data, eps.single()?, *samples, neighbors),
        Command::Scatter { eps, samples, neighbor_count, svg } => {
            cmd_scatter(cfg, &data, &eps.grid()?, *samples, *neighbor_count, *svg)
        }
        Command::Profile { eps, model_point, heatmap_resolution } => {
            cmd_profile(cfg, &data, eps.single()?, model_point, *heatmap_resolution)
        }
        Command::Sweep { eps, samples, ranks, neighbors, tau, svg } => {
            let mut sc = SweepConfig::new(eps.grid()?, *samples, seed(cfg));
            sc.rank_indices_of_interest = ranks.clone();
            sc.neighbor_indices = (!neighbors.is_empty()).then(|| neighbors.clone());
            sc.plateau = PlateauParams { tau: *tau, ..PlateauParams::default() };
            cmd_sweep(cfg, &data, &sc, *svg)
        }
    }
}

#[derive(Serialize)]
struct ModelFile<'a> {
    theta: &'a [f64],
    objective: f64,
    grad_norm: f64,
    n: usize,
    d: usize,
    lambda: f64,
    iterations: usize,
}

fn cmd_train(cfg: &RunConfig, data: &Dataset) -> Result<Output, Failure> {
    let base = base_solution(cfg, data)?;
    let mut out = Output::new();
    out.json(
        "model.json",
        &ModelFile {
            theta: base.model.as_slice(),
            objective: base.objective,
            grad_norm: base.grad_norm,
            n: base.n,
            d: base.model.dim(),
            lambda: base.lambda,
            iterations: base.iterations,
        },
    )?;
    Ok(out)
}

fn cmd_neighbors(cfg: &RunConfig, data: &Dataset, validate: bool) -> Result<Output, Failure> {
    let set = neighbor_set(cfg, data)?;
    let d = data.d();
    let report = if validate { Some(validate_neighbor_set(&set, data, train_opts(cfg))?) } else { None };

    let mut header = vec!["i".to_string()];
    header.extend(indexed("R", d));
    header.push("r".into());
    header.extend(indexed("A_wc", d));
    if report.is_some() {
        header.extend(indexed("A_exact", d));
        header.push("rel_deviation".into());
    }
    let mut table = Table::new(&header)?;
    for (i, (bound, wc)) in set.bounds.iter().zip(&set.wc_points).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(coords(&bound.center));
        row.push(num(bound.radius));
        row.extend(coords(wc));
        if let Some(r) = &report {
            row.extend(coords(&r.rows[i].exact));
            row.push(num(r.rows[i].rel_deviation));
        }
        table.row(&row)?;
    }
    let mut out = Output::new();
    out.add("neighbors.csv", table.finish()?);
    Ok(out)
}

#[derive(Serialize)]
struct ValidationSummary {
    n: usize,
    max: f64,
    mean: f64,
    argmax: usize,
    bound: f64,
    passed: bool,
}

fn cmd_validate(cfg: &RunConfig, data: &Dataset, bound: f64) -> Result<Output, Failure> {
    let set = neighbor_set(cfg, data)?;
    let report = validate_neighbor_set(&set, data, train_opts(cfg))?;
    let mut table = Table::new(&["i".into(), "rel_deviation".into()])?;
    for r in &report.rows {
        table.row(&[r.index.to_string(), num(r.rel_deviation)])?;
    }
    let passed = report.max <= bound;
    let mut out = Output::new();
    out.add("validation.csv", table.finish()?);
    out.json(
        "summary.json",
        &ValidationSummary {
            n: report.rows.len(),
            max: report.max,
            mean: report.mean,
            argmax: report.argmax,
            bound,
            passed,
        },
    )?;
    if !passed {
        eprintln!("max relative deviation {} exceeds bound {bound} (row {})", report.max, report.argmax);
        out.status = EXIT_BOUND;
    }
    Ok(out)
}

fn check_indices(indices: &[usize], n: usize) -> Result<(), Failure> {
    match indices.iter().find(|&&i| i >= n) {
        Some(&index) => Err(Error::Index { index, len: n }.into()),
        None => Ok(()),
    }
}

fn check_samples(k: usize) -> Result<(), Failure> {
    if k == 0 {
        Err(Failure::Usage("--samples must be positive".into()))
    } else {
        Ok(())
    }
}

/// Source tag and neighbor index (empty for the base) of mechanism `src`.
fn source_cells(src: Option<usize>) -> [String; 2] {
    match src {
        None => ["base".into(), String::new()],
        Some(i) => ["neighbor".into(), i.to_string()],
    }
}

/// Stream id of a mechanism: 0 for the base, `i + 1` for neighbor `i`.
fn source_stream(src: Option<usize>) -> u64 {
    src.map_or(0, |i| i as u64 + 1)
}

fn cmd_sample(cfg: &RunConfig, data: &Dataset, epsilon: f64, k: usize, neighbors: &[usize]) -> Result<Output, Failure> {
    check_samples(k)?;
    check_indices(neighbors, data.n())?;
    let set = neighbor_set(cfg, data)?;
    let params = MechanismParams::new(epsilon, cfg.lambda, data.n(), data.d())?;
    let sources: Vec<Option<usize>> = std::iter::once(None).chain(neighbors.iter().map(|&i| Some(i))).collect();

    let mut header = vec!["source".to_string(), "neighbor_index".into(), "sample".into()];
    header.extend(indexed("theta", data.d()));
    let mut table = Table::new(&header)?;
    for src in sources {
        let center = src.map_or(&set.base.model, |i| &set.wc_points[i]);
        let draws = sample_models(center, &params, derive_seed(seed(cfg), &[source_stream(src)]), k)?;
        for (s, m) in draws.iter().enumerate() {
            let mut row = source_cells(src).to_vec();
            row.push(s.to_string());
            row.extend(coords(m));
            table.row(&row)?;
        }
    }
    let mut out = Output::new();
    out.add("samples.csv", table.finish()?);
    Ok(out)
}

fn cmd_scatter(
    cfg: &RunConfig,
    data: &Dataset,
    grid: &[f64],
    k: usize,
    neighbor_count: usize,
    svg: bool,
) -> Result<Output, Failure> {
    check_samples(k)?;
    let set = neighbor_set(cfg, data)?;
    let m = neighbor_count.min(set.len());
    let sources: Vec<Option<usize>> = std::iter::once(None).chain((0..m).map(Some)).collect();

    let mut header = vec!["epsilon".to_string(), "source".into(), "neighbor_index".into(), "sample".into()];
    header.extend(indexed("theta", data.d()));
    let mut table = Table::new(&header)?;
    let mut out = Output::new();
    for (g, &eps) in grid.iter().enumerate() {
        let params = MechanismParams::new(eps, cfg.lambda, data.n(), data.d())?;
        let mut chart = Chart::new(format!("epsilon = {eps}"), "theta_0", "theta_1");
        for &src in &sources {
            let center = src.map_or(&set.base.model, |i| &set.wc_points[i]);
            let stream = derive_seed(seed(cfg), &[g as u64, source_stream(src)]);
            let draws = sample_models(center, &params, stream, k)?;
            for (s, p) in draws.iter().enumerate() {
                let mut row = vec![num(eps)];
                row.extend(source_cells(src));
                row.push(s.to_string());
                row.extend(coords(p));
                table.row(&row)?;
            }
            if svg {
                let label = src.map_or("base".to_string(), |i| format!("neighbor {i}"));
                chart.push(label, draws.iter().map(plane).collect());
            }
        }
        if svg {
            out.add(&format!("scatter_{g:03}.svg"), chart.scatter().into_bytes());
        }
    }
    out.files.insert(0, ("scatter.csv".into(), table.finish()?));
    Ok(out)
}

/// First two coordinates (the second is 0 in one dimension).
fn plane(p: &ModelPoint) -> (f64, f64) {
    let s = p.as_slice();
    (s[0], s.get(1).copied().unwrap_or(0.0))
}

fn parse_point(spec: &str, d: usize) -> Result<ModelPoint, Failure> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("invalid --model-point {spec:?}: {e}")))?;
    if values.len() != d {
        return Err(Error::Dimension { expected: d, got: values.len() }.into());
    }
    Ok(ModelPoint::new(values)?)
}

#[derive(Serialize)]
struct ProfileSummary<'a> {
    epsilon: f64,
    beta: f64,
    model_point: &'a ModelPoint,
    most_vulnerable: Option<usize>,
}

fn cmd_profile(
    cfg: &RunConfig,
    data: &Dataset,
    epsilon: f64,
    model_point: &str,
    heatmap_resolution: Option<usize>,
) -> Result<Output, Failure> {
    let set = neighbor_set(cfg, data)?;
    let base = &set.base.model;
    let params = MechanismParams::new(epsilon, cfg.lambda, data.n(), data.d())?;
    let m = match model_point {
        "center" => base.clone(),
        "sample" => perturb(base, &sample_noise_seeded(&params, seed(cfg), &[0]))?,
        spec => parse_point(spec, data.d())?,
    };
    let profile = privacy_profile(base, &set, &m, params.beta)?;

    let mut table = Table::new(&["rank".into(), "neighbor_index".into(), "abs_loss".into(), "d_xyM".into()])?;
    for (rank, l) in profile.ranked_losses.iter().enumerate() {
        table.row(&[rank.to_string(), l.neighbor_index.to_string(), num(l.abs_loss), num(l.d_xym)])?;
    }
    let mut out = Output::new();
    out.add("profile.csv", table.finish()?);
    out.json(
        "profile.json",
        &ProfileSummary {
            epsilon,
            beta: params.beta,
            model_point: &m,
            most_vulnerable: profile.most_vulnerable().map(|l| l.neighbor_index),
        },
    )?;

    if let Some(res) = heatmap_resolution {
        let grid = HeatmapGrid::around(base, &set, &m, res);
        let map = heatmap_grid(base, &set, &grid, &m, params.beta)?;
        let mut cells = Table::new(&["x".into(), "y".into(), "abs_loss".into()])?;
        for c in &map.field {
            cells.row(&[num(c.x), num(c.y), num(c.abs_loss)])?;
        }
        let mut stars = Table::new(&["neighbor_index".into(), "x".into(), "y".into(), "abs_loss".into()])?;
        for s in &map.stars {
            stars.row(&[s.neighbor_index.to_string(), num(s.x), num(s.y), num(s.abs_loss)])?;
        }
        out.add("heatmap.csv", cells.finish()?);
        out.add("heatmap_stars.csv", stars.finish()?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct RangeFile {
    eps_low: Option<f64>,
    eps_high: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CollapseFile {
    neighbors_with_onset: usize,
    excluded: Vec<usize>,
    product_ratio: f64,
    spearman: f64,
}

fn cmd_sweep(cfg: &RunConfig, data: &Dataset, sc: &SweepConfig, svg: bool) -> Result<Output, Failure> {
    let set = neighbor_set(cfg, data)?;
    let result = run_sweep(&set, sc)?;
    let mut out = Output::new();

    let mut profiles = Table::new(&["epsilon", "rank", "mean", "stderr", "normalized", "beta"].map(String::from))?;
    for p in &result.profiles {
        for r in 0..p.normalized.len() {
            profiles.row(&[
                num(p.epsilon),
                r.to_string(),
                num(p.mean_abs_loss_by_rank[r]),
                num(p.stderr_by_rank[r]),
                num(p.normalized[r]),
                num(p.beta),
            ])?;
        }
    }
    out.add("profiles.csv", profiles.finish()?);

    let mut neighbors = Table::new(
        &["epsilon", "i", "mean", "stderr", "mean_abs", "abs_stderr", "normalized_abs", "beta"].map(String::from),
    )?;
    for c in &result.neighbors {
        for p in &c.points {
            neighbors.row(&[
                num(p.epsilon),
                c.neighbor_index.to_string(),
                num(p.mean_loss),
                num(p.stderr),
                num(p.mean_abs_loss),
                num(p.abs_stderr),
                num(p.normalized_abs),
                num(p.beta),
            ])?;
        }
    }
    out.add("neighbors.csv", neighbors.finish()?);

    let mut onsets = Table::new(&["i", "onset_lo", "onset_hi", "distance", "product"].map(String::from))?;
    for c in &result.neighbors {
        let o = c.plateau_onset;
        onsets.row(&[
            c.neighbor_index.to_string(),
            opt_num(o.map(|b| b.lo)),
            opt_num(o.map(|b| b.hi)),
            num(c.distance),
            opt_num(o.map(|b| b.beta() * c.distance)),
        ])?;
    }
    out.add("onsets.csv", onsets.finish()?);

    if !sc.rank_indices_of_interest.is_empty() {
        let mut ranks = Table::new(&["rank", "epsilon", "beta", "normalized", "normalized_stderr"].map(String::from))?;
        for &r in &sc.rank_indices_of_interest {
            for p in result.rank_curve(r) {
                ranks.row(&[
                    r.to_string(),
                    num(p.epsilon),
                    num(p.beta),
                    num(p.normalized),
                    num(p.normalized_stderr),
                ])?;
            }
        }
        out.add("ranks.csv", ranks.finish()?);
    }

    let range = match result.epsilon_range() {
        Ok(r) => RangeFile { eps_low: Some(r.eps_low), eps_high: Some(r.eps_high), error: None },
        Err(e) => {
            eprintln!("warning: {e}");
            RangeFile { eps_low: None, eps_high: None, error: Some(e.to_string()) }
        }
    };
    out.json("range.json", &range)?;

    let collapse = result.scaling_collapse();
    out.json(
        "collapse.json",
        &CollapseFile {
            neighbors_with_onset: collapse.rows.len(),
            excluded: collapse.excluded.clone(),
            product_ratio: collapse.product_ratio,
            spearman: collapse.spearman,
        },
    )?;

    if svg {
        out.add("ranks.svg", rank_chart(&result, &sc.rank_indices_of_interest).lines().into_bytes());
        out.add("neighbors.svg", neighbor_chart(&result).lines().into_bytes());
    }
    Ok(out)
}

fn rank_chart(result: &SweepResult, ranks: &[usize]) -> Chart {
    let n = result.profiles.first().map_or(0, |p| p.normalized.len());
    let ranks: Vec<usize> = if ranks.is_empty() && n > 0 { vec![0, n / 2, n - 1] } else { ranks.to_vec() };
    let mut chart = Chart::new("Typical profile by rank", "beta", "mean |l| / beta").log_x().log_y();
    for r in ranks {
        chart.push(format!("rank {r}"), result.rank_curve(r).iter().map(|p| (p.beta, p.normalized)).collect());
    }
    chart
}

/// Up to eight neighbors spread over the distance spectrum.
fn neighbor_chart(result: &SweepResult) -> Chart {
    let mut curves: Vec<_> = result.neighbors.iter().collect();
    curves.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.neighbor_index.cmp(&b.neighbor_index)));
    let picks = curves.len().min(8);
    let mut chart = Chart::new("Per-neighbor mean |l| / beta", "beta", "mean |l| / beta").log_x().log_y();
    for k in 0..picks {
        let c = curves[k * (curves.len() - 1) / (picks - 1).max(1)];
        chart.push(
            format!("neighbor {}", c.neighbor_index),
            c.points.iter().map(|p| (p.beta, p.normalized_abs)).collect(),
        );
    }
    chart
}
