use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::defect::{covering_radius, metric_defect};
use super::sample::{sample, Generator, DEFAULT_GRID_RESOLUTION};
use crate::error::{MmError, Result};
use crate::io::{format_f64, sha256_hex};
use crate::matrix::DistanceMatrix;
use crate::mm_space::{
    k_means_exact, k_means_pam, one_sided_center_deviation, FiniteMetricMeasureSpace,
    DEFAULT_TIE_TOL,
};
use crate::seed;
use crate::voronoi::{cluster_deviation, voronoi_cells};
use crate::wasserstein::GroundEstimator;

pub const CSV_COLUMNS: [&str; 12] = [
    "n",
    "trial",
    "status",
    "objective",
    "n_minimizers",
    "centers",
    "center_deviation",
    "deviation_reference",
    "cluster_deviation",
    "metric_defect",
    "covering_radius",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum ExperimentSolver {
    #[default]
    Exact,
    /// Each trial derives its own PAM seed from the master seed.
    Pam { restarts: usize },
}

/// A convergence experiment. In TOML, scalar keys come first, then the
/// `[generator]` and `[metric]` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub p: f64,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: ExperimentSolver,
    /// Closed-form limit centers; without it the largest-n first trial is the reference.
    #[serde(default)]
    pub target: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
    /// Directory for `results.csv` and `summary.json`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub generator: Generator,
    pub metric: GroundEstimator,
}

fn default_grid() -> usize {
    DEFAULT_GRID_RESOLUTION
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| MmError::Parse(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Parses and validates a config file; relative sample-file and output
    /// paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Generator::File { path: p } = &mut cfg.generator {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut cfg.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MmError::invalid("sample_sizes must be nonempty and strictly ascending"));
        }
        if self.sample_sizes[0] == 0 {
            return Err(MmError::invalid("sample sizes must be positive"));
        }
        if self.trials == 0 {
            return Err(MmError::invalid("trials must be at least 1"));
        }
        if self.k == 0 {
            return Err(MmError::invalid("k must be at least 1"));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(MmError::invalid("p must be >= 1"));
        }
        if let Some(t) = &self.target {
            if t.is_empty() || t.iter().any(Vec::is_empty) {
                return Err(MmError::invalid("target must be a nonempty list of points"));
            }
        }
        self.generator.validate()
    }

    /// Digest of the resolved configuration, defaults included.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub trial: usize,
    pub ok: bool,
    pub objective: Option<f64>,
    pub n_minimizers: Option<usize>,
    /// Best minimizer, in ambient coordinates.
    pub centers: Vec<Vec<f64>>,
    pub center_deviation: Option<f64>,
    pub deviation_reference: String,
    pub cluster_deviation: Option<f64>,
    pub metric_defect: Option<f64>,
    pub covering_radius: Option<f64>,
    pub error: String,
}

impl TrialRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
        let centers = self
            .centers
            .iter()
            .map(|c| c.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.n.to_string(),
            self.trial.to_string(),
            if self.ok { "ok" } else { "failed" }.to_string(),
            opt(self.objective),
            self.n_minimizers.map(|m| m.to_string()).unwrap_or_default(),
            centers,
            opt(self.center_deviation),
            self.deviation_reference.clone(),
            opt(self.cluster_deviation),
            opt(self.metric_defect),
            opt(self.covering_radius),
            self.error.clone(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub trials: usize,
    pub failed: usize,
    pub median_objective: Option<f64>,
    pub median_center_deviation: Option<f64>,
    pub median_cluster_deviation: Option<f64>,
    pub median_metric_defect: Option<f64>,
    pub median_covering_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub csv_columns: Vec<String>,
    pub reference: String,
    pub sizes: Vec<SizeSummary>,
    /// `(n, trial, error)` for every failed trial.
    pub failed_trials: Vec<(usize, usize, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Sorted by `(n, trial)`.
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| MmError::Internal(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| MmError::Internal(e.to_string()))
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    /// Writes `results.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.to_csv()?)?;
        fs::write(dir.join("summary.json"), self.summary_json()?)?;
        Ok(())
    }
}

/// Everything a trial produces before deviations are measured.
struct Outcome {
    objective: f64,
    /// Minimizer family in ambient coordinates; the first member is the best.
    family: Vec<Vec<Vec<f64>>>,
    /// Voronoi cells of the best minimizer, as ambient points.
    cells: Vec<Vec<Vec<f64>>>,
    metric_defect: Option<f64>,
    covering_radius: Option<f64>,
}

fn run_trial(cfg: &ExperimentConfig, grid: Option<&[Vec<f64>]>, n: usize, trial: usize) -> Result<Outcome> {
    let gen = &cfg.generator;
    let cloud = sample(gen, n, seed::derive(cfg.seed, &[seed::tag("trial"), n as u64, trial as u64]))?;
    let (ground, class_of) = cfg.metric.estimate(&cloud)?;
    let m = ground.len();
    let mut weights = vec![0.0; m];
    for &c in &class_of {
        weights[c] += 1.0 / n as f64;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let labels = (0..m).map(|i| i.to_string()).collect();
    let space = FiniteMetricMeasureSpace::new(labels, ground.clone(), weights)?;
    let k = cfg.k.min(m);
    let solution = match cfg.solver {
        ExperimentSolver::Exact => k_means_exact(&space, k, cfg.p, DEFAULT_TIE_TOL)?,
        ExperimentSolver::Pam { restarts } => k_means_pam(
            &space,
            k,
            cfg.p,
            restarts,
            seed::derive(cfg.seed, &[seed::tag("pam"), n as u64, trial as u64]),
        )?,
    };

    let mut representative = vec![usize::MAX; m];
    for (i, &c) in class_of.iter().enumerate() {
        if representative[c] == usize::MAX {
            representative[c] = i;
        }
    }
    let ambient = |g: usize| cloud.point(representative[g]).to_vec();
    let family = solution
        .minimizers
        .iter()
        .map(|s| s.indices().iter().map(|&g| ambient(g)).collect())
        .collect();
    let partition = voronoi_cells(&space, solution.best())?;
    let cells = partition
        .cells
        .iter()
        .map(|cell| {
            (0..n)
                .filter(|&i| cell.contains(&class_of[i]))
                .map(|i| cloud.point(i).to_vec())
                .collect()
        })
        .collect();

    let rows = cloud.to_rows();
    let metric_defect = match cfg.metric {
        GroundEstimator::Euclid | GroundEstimator::Isomap { .. } => {
            let truth = DistanceMatrix::symmetric_from_fn(n, |i, j| gen.geodesic(&rows[i], &rows[j]));
            Some(metric_defect(&ground, &truth)?)
        }
        _ => None,
    };
    let covering_radius = match grid {
        Some(g) => Some(covering_radius(g, &rows, |a, b| gen.geodesic(a, b))?),
        None => None,
    };
    Ok(Outcome {
        objective: solution.objective,
        family,
        cells,
        metric_defect,
        covering_radius,
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Runs every `(n, trial)` in parallel; failures are recorded, not propagated.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid = cfg.generator.reference_grid(cfg.grid_resolution);
    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let outcomes: Vec<Result<Outcome>> = jobs
        .par_iter()
        .map(|&(n, t)| run_trial(cfg, grid.as_deref(), n, t))
        .collect();

    let largest = *cfg.sample_sizes.last().expect("validated nonempty");
    let (reference_label, ref_family, ref_cells) = match &cfg.target {
        Some(t) => ("target".to_string(), Some(vec![t.clone()]), None),
        None => {
            let idx = jobs.iter().position(|&j| j == (largest, 0)).expect("reference job");
            match &outcomes[idx] {
                Ok(o) => ("self-reference".to_string(), Some(o.family.clone()), Some(o.cells.clone())),
                Err(_) => ("self-reference (failed)".to_string(), None, None),
            }
        }
    };
    let dist = |a: &Vec<f64>, b: &Vec<f64>| cfg.generator.geodesic(a, b);

    let mut rows = Vec::with_capacity(jobs.len());
    for (&(n, trial), outcome) in jobs.iter().zip(outcomes) {
        let row = match outcome {
            Ok(o) => {
                let deviation = match &ref_family {
                    Some(f) => Some(one_sided_center_deviation(&o.family, f, dist)),
                    None => None,
                };
                let cluster = match &ref_cells {
                    Some(c) => Some(cluster_deviation(&o.cells, c, dist)),
                    None => None,
                };
                let err = [&deviation, &cluster]
                    .into_iter()
                    .flatten()
                    .find_map(|r| r.as_ref().err().map(|e| e.to_string()));
                TrialRow {
                    n,
                    trial,
                    ok: err.is_none(),
                    objective: Some(o.objective),
                    n_minimizers: Some(o.family.len()),
                    centers: o.family[0].clone(),
                    center_deviation: deviation.and_then(|r| r.ok()),
                    deviation_reference: reference_label.clone(),
                    cluster_deviation: cluster.and_then(|r| r.ok()),
                    metric_defect: o.metric_defect,
                    covering_radius: o.covering_radius,
                    error: err.unwrap_or_default(),
                }
            }
            Err(e) => TrialRow {
                n,
                trial,
                ok: false,
                objective: None,
                n_minimizers: None,
                centers: Vec::new(),
                center_deviation: None,
                deviation_reference: reference_label.clone(),
                cluster_deviation: None,
                metric_defect: None,
                covering_radius: None,
                error: e.to_string(),
            },
        };
        rows.push(row);
    }
    rows.sort_by_key(|r| (r.n, r.trial));

    let mut by_size: BTreeMap<usize, Vec<&TrialRow>> = BTreeMap::new();
    for r in &rows {
        by_size.entry(r.n).or_default().push(r);
    }
    let sizes = by_size
        .into_iter()
        .map(|(n, rs)| {
            let col = |f: fn(&TrialRow) -> Option<f64>| median(rs.iter().filter_map(|r| f(r)).collect());
            SizeSummary {
                n,
                trials: rs.len(),
                failed: rs.iter().filter(|r| !r.ok).count(),
                median_objective: col(|r| r.objective),
                median_center_deviation: col(|r| r.center_deviation),
                median_cluster_deviation: col(|r| r.cluster_deviation),
                median_metric_defect: col(|r| r.metric_defect),
                median_covering_radius: col(|r| r.covering_radius),
            }
        })
        .collect();
    let failed_trials = rows
        .iter()
        .filter(|r| !r.ok)
        .map(|r| (r.n, r.trial, r.error.clone()))
        .collect();
    Ok(ExperimentResult {
        summary: Summary {
            config_hash: cfg.hash(),
            config: cfg.clone(),
            csv_columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
            reference: reference_label,
            sizes,
            failed_trials,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
k = 1
p = 2.0
sample_sizes = [20, 40]
trials = 2
seed = 5
target = [[0.5]]

[generator]
kind = "interval"

[metric]
method = "fermat"
alpha = 2.0
"#;

    #[test]
    fn config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
        assert_eq!(cfg.generator, Generator::Interval { low: 0.0, high: 1.0 });
        assert_eq!(cfg.metric, GroundEstimator::Fermat { alpha: 2.0 });
        assert_eq!(cfg.solver, ExperimentSolver::Exact);
        assert_eq!(cfg.grid_resolution, DEFAULT_GRID_RESOLUTION);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
        cfg.sample_sizes = vec![40, 20];
        assert!(cfg.validate().is_err());
        cfg.sample_sizes = vec![20];
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("k = 1").is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap());
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.ok));
        assert_eq!(a.summary.reference, "target");
        let header = a.to_csv().unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, CSV_COLUMNS.join(","));
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
        cfg.metric = GroundEstimator::Isomap { eps: 1e-6 };
        cfg.target = None;
        let r = run_experiment(&cfg).unwrap();
        assert!(r.rows.iter().all(|r| !r.ok));
        assert_eq!(r.summary.failed_trials.len(), 4);
        assert_eq!(r.summary.reference, "self-reference (failed)");
    }
}
