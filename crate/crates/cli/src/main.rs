//! `mm`: command-line access to metric measure spaces, learned metrics and
//! k-means diagnostics.
//!
//! Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 budget exceeded,
//! 4 disconnected graph. `MM_THREADS` caps the worker pool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mmspace::cloud::PointCloud;
use mmspace::diffusion::diffusion_distances_for_cloud;
use mmspace::fermat_isomap::{fermat_distance_matrix, isomap_distance_matrix};
use mmspace::fpp::{fpp_barycenter_track, shape_defect, FppInstance, Shell, WeightLaw, DEFAULT_SHELL};
use mmspace::harness::{run_experiment, sample, ExperimentConfig, Generator};
use mmspace::io::{load_space, read_points, write_matrix, write_points_csv};
use mmspace::mm_space::{k_means_exact_with_budget, k_means_pam, validate_matrix, DEFAULT_TIE_TOL};
use mmspace::quantize::{epsilon_net_graph_on, quantize, Density1d, NetSpace};
use mmspace::voronoi::{enlarged_cell, voronoi_cells};
use mmspace::wasserstein::{learned_wasserstein_kmeans, GroundEstimator, KMeansSolver};
use mmspace::{CenterSet, MmError, Result};

#[derive(Parser)]
#[command(name = "mm", version, about = "Metric measure spaces, learned metrics and Fréchet k-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an i.i.d. sample and write it as CSV.
    Sample(SampleArgs),
    /// Pairwise distances of a point cloud under a learned metric.
    Dist(DistArgs),
    /// Fréchet k-means on a finite space.
    Kmeans(KmeansArgs),
    /// Voronoi cells (or enlarged cells) of a center set.
    Voronoi(VoronoiArgs),
    /// k-medoids of sample groups in Wasserstein distance over a learned ground metric.
    Wkmeans(WkmeansArgs),
    /// Barycenters of first-passage percolation balls.
    Fpp(FppArgs),
    /// Lloyd quantization of a sample or a 1-D density.
    Quantize(QuantizeArgs),
    /// ε-net graph approximation of a built-in length space.
    Net(NetArgs),
    /// Run a configuration-driven convergence experiment.
    Experiment(ExperimentArgs),
    /// Check the metric axioms of a space or matrix.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    Interval,
    Circle,
    Torus,
    Gaussian,
    Mixture,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    generator: GeneratorKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    low: f64,
    #[arg(long, default_value_t = 1.0)]
    high: f64,
    /// Gaussian center, comma separated.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    center: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Mixture centers: points separated by ';', coordinates by ','.
    #[arg(long, allow_hyphen_values = true)]
    centers: Option<String>,
    /// Mixture scales, comma separated.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Euclid,
    Fermat,
    Isomap,
    Diffusion,
}

#[derive(Args)]
struct GroundArgs {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of eigenpairs kept by diffusion.
    #[arg(long = "eig", default_value_t = 10)]
    eig: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

impl GroundArgs {
    fn estimator(&self, method: Method) -> Result<GroundEstimator> {
        Ok(match method {
            Method::Euclid => GroundEstimator::Euclid,
            Method::Fermat => GroundEstimator::Fermat { alpha: self.alpha },
            Method::Isomap => GroundEstimator::Isomap {
                eps: self.eps.ok_or_else(|| invalid("isomap needs --eps"))?,
            },
            Method::Diffusion => GroundEstimator::Diffusion {
                sigma: self.sigma.ok_or_else(|| invalid("diffusion needs --sigma"))?,
                k: self.eig,
                t: self.t,
            },
        })
    }
}

#[derive(Args)]
struct DistArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long = "in")]
    input: PathBuf,
    /// `.csv` writes CSV with a label header; anything else the binary format.
    #[arg(long)]
    out: PathBuf,
    /// For diffusion: write {eigenvalues, gap_warnings} here.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    #[command(flatten)]
    ground: GroundArgs,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, conflicts_with = "pam")]
    exact: bool,
    #[arg(long)]
    pam: bool,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn solver(&self) -> KMeansSolver {
        if self.pam {
            KMeansSolver::Pam {
                restarts: self.restarts,
                seed: self.seed,
            }
        } else {
            KMeansSolver::Exact
        }
    }
}

#[derive(Args)]
struct KmeansArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Cap on exact enumeration candidates.
    #[arg(long, default_value_t = 2_000_000)]
    budget: u128,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VoronoiArgs {
    #[arg(long)]
    space: PathBuf,
    /// Center indices, comma separated.
    #[arg(long)]
    centers: String,
    /// Report the enlarged cells W(δ) instead.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WkmeansArgs {
    #[arg(long, num_args = 1.., required = true)]
    groups: Vec<PathBuf>,
    #[arg(long = "ground-method", value_enum, default_value = "euclid")]
    ground_method: Method,
    #[command(flatten)]
    ground: GroundArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FppArgs {
    #[arg(long)]
    dim: usize,
    /// `det:C`, `exp:RATE` or `unif:A,B`.
    #[arg(long)]
    law: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Radii, comma separated and ascending.
    #[arg(long, allow_hyphen_values = true)]
    t: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Relative shell width for routing, or `restricted`.
    #[arg(long, default_value_t = DEFAULT_SHELL.to_string())]
    shell: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long = "in", conflicts_with = "density")]
    input: Option<PathBuf>,
    /// `uniform:A,B` or `gaussian:MEAN,STD`.
    #[arg(long, allow_hyphen_values = true)]
    density: Option<String>,
    /// Discretization cells for --density.
    #[arg(long, default_value_t = 10_000)]
    cells: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetKind {
    Circle,
    Torus,
    Box,
}

#[derive(Args)]
struct NetArgs {
    #[arg(long, value_enum)]
    space: NetKind,
    /// Equispaced net points per axis.
    #[arg(long)]
    points: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.0)]
    low: f64,
    #[arg(long, default_value_t = 1.0)]
    high: f64,
    /// Grid points per axis for measuring the net radius off the circle.
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Space descriptor or matrix file.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn invalid(msg: &str) -> MmError {
    MmError::InvalidArgument(msg.to_string())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| MmError::InvalidArgument(format!("bad {what} value '{p}'")))
        })
        .collect()
}

fn emit(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let generator = match a.generator {
        GeneratorKind::Interval => Generator::Interval { low: a.low, high: a.high },
        GeneratorKind::Circle => Generator::Circle,
        GeneratorKind::Torus => Generator::Torus,
        GeneratorKind::Gaussian => Generator::Gaussian {
            center: parse_list(&a.center, "center")?,
            scale: a.scale,
        },
        GeneratorKind::Mixture => {
            let centers = a
                .centers
                .as_deref()
                .ok_or_else(|| invalid("mixture needs --centers"))?
                .split(';')
                .map(|c| parse_list(c, "center"))
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let scales = parse_list(a.scales.as_deref().ok_or_else(|| invalid("mixture needs --scales"))?, "scale")?;
            Generator::Mixture { centers, scales }
        }
    };
    let cloud = sample(&generator, a.n, a.seed)?;
    match a.out {
        Some(path) => write_points_csv(&path, &cloud),
        None => {
            for x in cloud.points() {
                let row: Vec<String> = x.iter().map(|v| mmspace::io::format_f64(*v)).collect();
                println!("{}", row.join(","));
            }
            Ok(())
        }
    }
}

fn cmd_dist(a: DistArgs) -> Result<()> {
    let cloud = read_points(&a.input)?;
    let labels: Vec<String> = (0..cloud.len()).map(|i| i.to_string()).collect();
    let matrix = match a.method {
        Method::Euclid => cloud.euclidean_matrix(),
        Method::Fermat => fermat_distance_matrix(&cloud, a.ground.alpha)?,
        Method::Isomap => isomap_distance_matrix(&cloud, a.ground.eps.ok_or_else(|| invalid("isomap needs --eps"))?)?,
        Method::Diffusion => {
            let sigma = a.ground.sigma.ok_or_else(|| invalid("diffusion needs --sigma"))?;
            let (dd, decomp) = diffusion_distances_for_cloud(&cloud, sigma, a.ground.eig, a.ground.t)?;
            if let Some(path) = &a.spectrum {
                let dump = json!({
                    "eigenvalues": decomp.eigenvalues,
                    "gap_warnings": decomp.gap_warnings,
                    "quotient_classes": dd.quotient_classes,
                });
                emit(Some(path), &dump)?;
            }
            dd.matrix
        }
    };
    write_matrix(&a.out, &matrix, &labels)
}

fn cmd_kmeans(a: KmeansArgs) -> Result<()> {
    let space = load_space(&a.space)?;
    let solution = if a.solver.pam {
        k_means_pam(&space, a.k, a.p, a.solver.restarts, a.solver.seed)?
    } else {
        k_means_exact_with_budget(&space, a.k, a.p, DEFAULT_TIE_TOL, a.budget)?
    };
    let labels: Vec<Vec<&str>> = solution
        .minimizers
        .iter()
        .map(|s| s.indices().iter().map(|&i| space.labels()[i].as_str()).collect())
        .collect();
    let mut value = to_value(&solution)?;
    value["minimizer_labels"] = to_value(&labels)?;
    emit(a.out.as_deref(), &value)
}

fn cmd_voronoi(a: VoronoiArgs) -> Result<()> {
    let space = load_space(&a.space)?;
    let centers = CenterSet::new(parse_list(&a.centers, "center index")?)?;
    let map: serde_json::Map<String, Value> = match a.delta {
        None => voronoi_cells(&space, &centers)?
            .to_map()
            .into_iter()
            .map(|(c, cell)| Ok((c.to_string(), to_value(&cell)?)))
            .collect::<Result<_>>()?,
        Some(delta) => centers
            .indices()
            .iter()
            .map(|&c| Ok((c.to_string(), to_value(&enlarged_cell(&space, &centers, c, delta)?)?)))
            .collect::<Result<_>>()?,
    };
    emit(a.out.as_deref(), &Value::Object(map))
}

fn cmd_wkmeans(a: WkmeansArgs) -> Result<()> {
    let groups = a.groups.iter().map(|g| read_points(g)).collect::<Result<Vec<PointCloud>>>()?;
    let estimator = a.ground.estimator(a.ground_method)?;
    let result = learned_wasserstein_kmeans(&groups, estimator, a.k, a.p, a.solver.solver())?;
    let measures: Vec<Value> = result
        .measures
        .iter()
        .map(|m| json!({"ground_ref": "pooled", "indices": m.ground_indices(), "masses": m.masses()}))
        .collect();
    let value = json!({
        "groups": a.groups,
        "ground": estimator,
        "solution": result.solution,
        "wasserstein_distances": (0..result.space.len()).map(|i| result.space.dist().row(i).to_vec()).collect::<Vec<_>>(),
        "measures": measures,
    });
    emit(a.out.as_deref(), &value)
}

fn cmd_fpp(a: FppArgs) -> Result<()> {
    let law: WeightLaw = a.law.parse()?;
    let ts: Vec<f64> = parse_list(&a.t, "t")?;
    if ts.is_empty() {
        return Err(invalid("--t needs at least one value"));
    }
    let shell = if a.shell == "restricted" {
        Shell::Restricted
    } else {
        Shell::Expanded(a.shell.parse().map_err(|_| invalid("--shell must be a number or 'restricted'"))?)
    };
    let horizon = ts.iter().copied().fold(0.0, f64::max);
    let instance = FppInstance::new(a.dim, law, a.seed, horizon)?;
    let records = fpp_barycenter_track(&instance, &ts, a.p, shell)?;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let mut v = to_value(&r)?;
        v["barycenter_norm"] = json!(r.norm());
        v["defect"] = match shape_defect(&instance, r.t, shell) {
            Ok(d) => to_value(&d)?,
            Err(MmError::Unsupported(_) | MmError::BudgetExceeded { .. }) => Value::Null,
            Err(e) => return Err(e),
        };
        out.push(v);
    }
    emit(a.out.as_deref(), &json!({"instance": instance, "records": out}))
}

fn parse_density(s: &str) -> Result<Density1d> {
    let (kind, args) = s.split_once(':').ok_or_else(|| invalid("density must look like kind:a,b"))?;
    let v: Vec<f64> = parse_list(args, "density parameter")?;
    match (kind, v.as_slice()) {
        ("uniform", [low, high]) => Ok(Density1d::Uniform { low: *low, high: *high }),
        ("gaussian", [mean, std]) => Ok(Density1d::Gaussian { mean: *mean, std: *std }),
        _ => Err(MmError::InvalidArgument(format!("unknown density '{s}'"))),
    }
}

fn cmd_quantize(a: QuantizeArgs) -> Result<()> {
    let (cloud, weights) = match (&a.input, &a.density) {
        (Some(path), None) => (read_points(path)?, None),
        (None, Some(d)) => {
            let (c, w) = parse_density(d)?.discretize(a.cells)?;
            (c, Some(w))
        }
        _ => return Err(invalid("give exactly one of --in and --density")),
    };
    let q = quantize(&cloud, weights.as_deref(), a.n, a.p, a.restarts, a.seed)?;
    let mut value = to_value(&q)?;
    value["wasserstein"] = json!(q.wasserstein());
    emit(a.out.as_deref(), &value)
}

fn cmd_net(a: NetArgs) -> Result<()> {
    let space = match a.space {
        NetKind::Circle => NetSpace::Circle,
        NetKind::Torus => NetSpace::Torus { dim: a.dim },
        NetKind::Box => NetSpace::Box {
            dim: a.dim,
            low: a.low,
            high: a.high,
        },
    };
    let net = space.grid(a.points);
    let g = epsilon_net_graph_on(&space, &net, a.eps, a.resolution)?;
    let n = net.len();
    let mut sup_error: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            sup_error = sup_error.max((g.distances.get(i, j) - space.distance(&net[i], &net[j])).abs());
        }
    }
    let value = json!({
        "space": space,
        "points": n,
        "eps": g.eps,
        "diam": g.diam,
        "net_radius": g.net_radius,
        "admissibility_bound": g.eps * g.eps / (4.0 * g.diam),
        "admissible": g.admissible,
        "sup_error": sup_error,
    });
    emit(a.out.as_deref(), &value)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let result = run_experiment(&cfg)?;
    match a.out.or_else(|| cfg.output.clone()) {
        Some(dir) => result.write(&dir),
        None => {
            print!("{}", result.to_csv()?);
            Ok(())
        }
    }
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let space = load_space(&a.space)?;
    let report = validate_matrix(space.dist(), a.tol);
    emit(a.out.as_deref(), &to_value(&report)?)
}

fn exit_code(e: &MmError) -> u8 {
    match e {
        MmError::InvalidArgument(_) | MmError::Parse(_) | MmError::Io(_) | MmError::Unsupported(_) => 2,
        MmError::BudgetExceeded { .. } => 3,
        MmError::Disconnected { .. } => 4,
        MmError::Internal(_) => 1,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| MmError::InvalidArgument(format!("MM_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(invalid("MM_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| MmError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<()> {
        configure_threads()?;
        match cli.command {
            Command::Sample(a) => cmd_sample(a),
            Command::Dist(a) => cmd_dist(a),
            Command::Kmeans(a) => cmd_kmeans(a),
            Command::Voronoi(a) => cmd_voronoi(a),
            Command::Wkmeans(a) => cmd_wkmeans(a),
            Command::Fpp(a) => cmd_fpp(a),
            Command::Quantize(a) => cmd_quantize(a),
            Command::Net(a) => cmd_net(a),
            Command::Experiment(a) => cmd_experiment(a),
            Command::Validate(a) => cmd_validate(a),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
