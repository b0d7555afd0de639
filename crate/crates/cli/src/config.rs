//! Project configuration: an optional JSON file overlaid by command-line
//! flags. Relative paths in the file are taken relative to the file.

use std::path::{Path, PathBuf};

use clap::Args;
use reseq_core::graphseq::SolverConfig;
use reseq_core::metrics::Metric;
use reseq_core::outliers::{DEFAULT_K, DEFAULT_QUANTILE};
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    /// Image files or directories of images.
    pub images: Vec<PathBuf>,
    pub features: Option<PathBuf>,
    /// A precomputed distance matrix; skips the metric entirely.
    pub matrix: Option<PathBuf>,
    /// Defaults to lpips when a feature archive is given, l2-image otherwise.
    pub metric: Option<Metric>,
    pub weights: Option<PathBuf>,
    pub k: usize,
    pub quantile: f64,
    pub no_prune: bool,
    pub solver: SolverConfig,
    pub exclude: Vec<String>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            features: None,
            matrix: None,
            metric: None,
            weights: None,
            k: DEFAULT_K,
            quantile: DEFAULT_QUANTILE,
            no_prune: false,
            solver: SolverConfig::default(),
            exclude: Vec::new(),
        }
    }
}

/// Flags shared by every pipeline command.
#[derive(Debug, Clone, Default, Args)]
pub struct ProjectArgs {
    /// JSON project file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Image files or directories (repeatable)
    #[arg(long, value_name = "PATH", num_args = 1..)]
    pub images: Vec<PathBuf>,
    /// PFA1 feature archive
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// PDM1 distance matrix to use instead of computing one
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    /// lpips, cosine, l2-image or l2-feature
    #[arg(long)]
    pub metric: Option<Metric>,
    /// Calibration weights JSON ({layer: [w, ...]})
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    /// Nearest neighbours in the outlier statistic
    #[arg(long)]
    pub k: Option<usize>,
    /// Quantile of the fitted distribution used as the outlier threshold
    #[arg(long)]
    pub quantile: Option<f64>,
    /// Skip outlier pruning
    #[arg(long)]
    pub no_prune: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest instance solved exactly
    #[arg(long)]
    pub exact_threshold: Option<usize>,
    #[arg(long)]
    pub two_opt_passes: Option<usize>,
    /// Random restarts of the heuristic solver
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Frame ids to drop before anything else (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::contract(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ProjectConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::contract(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.images.iter_mut().for_each(rebase);
        config.features.as_mut().map(rebase);
        config.matrix.as_mut().map(rebase);
        config.weights.as_mut().map(rebase);
        Ok(config)
    }

    /// The config file (if any) with the flags laid over it, every path
    /// checked to exist.
    pub fn resolve(args: &ProjectArgs) -> CliResult<Self> {
        let mut c = match &args.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        if !args.images.is_empty() {
            c.images = args.images.clone();
        }
        if args.features.is_some() {
            c.features = args.features.clone();
        }
        if args.matrix.is_some() {
            c.matrix = args.matrix.clone();
        }
        if args.metric.is_some() {
            c.metric = args.metric;
        }
        if args.weights.is_some() {
            c.weights = args.weights.clone();
        }
        c.k = args.k.unwrap_or(c.k);
        c.quantile = args.quantile.unwrap_or(c.quantile);
        c.no_prune |= args.no_prune;
        c.solver.seed = args.seed.unwrap_or(c.solver.seed);
        c.solver.exact_threshold = args.exact_threshold.unwrap_or(c.solver.exact_threshold);
        c.solver.two_opt_passes = args.two_opt_passes.unwrap_or(c.solver.two_opt_passes);
        c.solver.random_restarts = args.restarts.unwrap_or(c.solver.random_restarts);
        if !args.exclude.is_empty() {
            c.exclude = args.exclude.clone();
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> CliResult<()> {
        let paths = self
            .images
            .iter()
            .chain(&self.features)
            .chain(&self.matrix)
            .chain(&self.weights);
        for p in paths {
            if !p.exists() {
                return Err(Failure::contract(format!("input path {} does not exist", p.display())));
            }
        }
        if self.k == 0 {
            return Err(Failure::contract("k must be at least 1"));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Failure::contract(format!("quantile must lie in (0, 1), got {}", self.quantile)));
        }
        Ok(())
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(if self.features.is_some() { Metric::Lpips } else { Metric::L2Image })
    }
}
