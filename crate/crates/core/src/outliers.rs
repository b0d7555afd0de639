//! Outlier gating.
//!
//! Each frame gets a statistic `X_i`: the mean distance to its `k` nearest
//! neighbours. A four-parameter generalized gamma distribution is fitted to
//! the `X_i` by maximum likelihood, and frames whose statistic exceeds the
//! fitted `q`-quantile are removed in a single pass.
//!
//! Density, for `x > μ` and `z = (x − μ) / β`:
//!
//! ```text
//! f(x) = γ / (β Γ(α)) · z^(αγ − 1) · exp(−z^γ)
//! ```
//!
//! and `F(x) = P(α, z^γ)` with `P` the regularized lower incomplete gamma.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameset::DistanceMatrix;
use crate::numeric::{ln_gamma, nelder_mead, regularized_lower_gamma, NelderMeadOptions};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_QUANTILE: f64 = 0.9;
pub const MIN_FIT_SAMPLES: usize = 8;

/// `X_i` for every frame of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnStatistic {
    pub k: usize,
    pub values: Vec<f64>,
}

/// Mean of the `k` smallest off-diagonal entries of each row; ties are
/// broken by ascending frame index.
pub fn knn_mean_distance(m: &DistanceMatrix, k: usize) -> Result<KnnStatistic> {
    let n = m.n();
    if k == 0 {
        return Err(Error::contract("k must be at least 1"));
    }
    if n <= k {
        return Err(Error::contract(format!(
            "{n} frames cannot supply {k} neighbours each; use k <= {}",
            n.saturating_sub(1)
        )));
    }
    let values = (0..n)
        .map(|i| {
            let mut row: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (m.get(i, j), j)).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            row[..k].iter().map(|(d, _)| d).sum::<f64>() / k as f64
        })
        .collect();
    Ok(KnnStatistic { k, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenGammaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl GenGammaParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, mu: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma, mu };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.alpha) && positive(self.beta) && positive(self.gamma) && self.mu.is_finite()) {
            return Err(Error::contract(format!(
                "invalid generalized gamma parameters alpha={} beta={} gamma={} mu={}",
                self.alpha, self.beta, self.gamma, self.mu
            )));
        }
        Ok(())
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= self.mu {
            return f64::NEG_INFINITY;
        }
        let ln_z = ((x - self.mu) / self.beta).ln();
        self.gamma.ln() - self.beta.ln() - ln_gamma(self.alpha) + (self.alpha * self.gamma - 1.0) * ln_z
            - (self.gamma * ln_z).exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.mu {
            return 0.0;
        }
        let z = (x - self.mu) / self.beta;
        regularized_lower_gamma(self.alpha, z.powf(self.gamma))
    }

    /// Inverse CDF by bracketing bisection followed by Newton refinement.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::contract(format!("quantile level {q} outside (0, 1)")));
        }
        self.validate()?;
        // work in t = x − μ so the location shift is exact
        let cdf = |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                regularized_lower_gamma(self.alpha, (t / self.beta).powf(self.gamma))
            }
        };
        let mut lo = 0.0;
        let mut hi = self.beta;
        while cdf(hi) < q {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Fit(format!("quantile {q} could not be bracketed")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-10 * hi {
                break;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..20 {
            let density = self.pdf(self.mu + t);
            if !(density > 0.0 && density.is_finite()) {
                break;
            }
            let next = t - (cdf(t) - q) / density;
            if !(next > lo && next < hi) {
                break;
            }
            let done = (next - t).abs() <= 1e-15 * t.abs();
            t = next;
            if done {
                break;
            }
        }
        Ok(self.mu + t)
    }
}

/// Density at `x` for the given parameters; zero at or below `mu`.
pub fn gengamma_pdf(x: f64, alpha: f64, beta: f64, gamma: f64, mu: f64) -> Result<f64> {
    Ok(GenGammaParams::new(alpha, beta, gamma, mu)?.pdf(x))
}

pub fn gengamma_cdf(x: f64, params: &GenGammaParams) -> f64 {
    params.cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenGammaFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    #[serde(rename = "loglik")]
    pub log_likelihood: f64,
    /// The fitted distribution's quantile at `quantile_level`.
    #[serde(rename = "T")]
    pub threshold_t: f64,
    #[serde(rename = "q")]
    pub quantile_level: f64,
    /// False when the winning optimizer run hit its iteration cap.
    pub converged: bool,
}

impl GenGammaFit {
    pub fn params(&self) -> GenGammaParams {
        GenGammaParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            mu: self.mu,
        }
    }
}

pub fn gengamma_quantile(fit: &GenGammaFit, q: f64) -> Result<f64> {
    fit.params().quantile(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenGammaConfig {
    /// Nelder-Mead starts per location grid point (the first is deterministic).
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub grid_points: usize,
    pub quantile: f64,
}

impl Default for GenGammaConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            seed: 0,
            max_iters: 2000,
            tol: 1e-10,
            grid_points: 32,
            quantile: DEFAULT_QUANTILE,
        }
    }
}

// log-space box for (α, β / mean(x − μ), γ)
const LN_ALPHA_BOUND: f64 = 7.0;
const LN_BETA_BOUND: f64 = 14.0;
const LN_GAMMA_BOUND: f64 = 5.0;

/// Samples shifted by a fixed location, with the sums the profile likelihood needs.
struct Profile<'a> {
    mu: f64,
    ln_t: Vec<f64>,
    sum_ln_t: f64,
    ln_scale: f64,
    _samples: &'a [f64],
}

impl<'a> Profile<'a> {
    fn new(samples: &'a [f64], mu: f64) -> Self {
        let ln_t: Vec<f64> = samples.iter().map(|x| (x - mu).ln()).collect();
        let sum_ln_t = ln_t.iter().sum();
        let mean = samples.iter().map(|x| x - mu).sum::<f64>() / samples.len() as f64;
        Self {
            mu,
            ln_t,
            sum_ln_t,
            ln_scale: mean.ln(),
            _samples: samples,
        }
    }

    /// Log-likelihood at `θ = (ln α, ln β, ln γ)`; `-inf` outside the box.
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let (la, lb, lg) = (theta[0], theta[1], theta[2]);
        if la.abs() > LN_ALPHA_BOUND || (lb - self.ln_scale).abs() > LN_BETA_BOUND || lg.abs() > LN_GAMMA_BOUND {
            return f64::NEG_INFINITY;
        }
        let (alpha, gamma) = (la.exp(), lg.exp());
        let n = self.ln_t.len() as f64;
        let power_sum: f64 = self.ln_t.iter().map(|lt| (gamma * (lt - lb)).exp()).sum();
        let ll = n * (lg - lb - ln_gamma(alpha)) + (alpha * gamma - 1.0) * (self.sum_ln_t - n * lb) - power_sum;
        if ll.is_finite() {
            ll
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone)]
struct ProfileFit {
    mu: f64,
    theta: Vec<f64>,
    log_likelihood: f64,
    converged: bool,
}

fn fit_profile(samples: &[f64], mu: f64, starts: &[Vec<f64>], opts: &NelderMeadOptions) -> ProfileFit {
    let profile = Profile::new(samples, mu);
    let mut best: Option<ProfileFit> = None;
    for start in starts {
        let m = nelder_mead(|th| -profile.log_likelihood(th), start, opts);
        let ll = -m.value;
        if best.as_ref().is_none_or(|b| ll > b.log_likelihood) {
            best = Some(ProfileFit {
                mu: profile.mu,
                theta: m.x,
                log_likelihood: ll,
                converged: m.converged,
            });
        }
    }
    best.expect("at least one start")
}

/// Maximum-likelihood generalized gamma fit.
///
/// The location `μ` is profiled: a grid of `grid_points` values spanning
/// `[min − range, min − ε]` with `ε = 1e-6 · range`, each optimized over
/// `(ln α, ln β, ln γ)` by Nelder-Mead from `restarts` starts, followed by a
/// golden-section refinement of `μ` between the best grid point's neighbours.
pub fn fit_gengamma_mle(samples: &[f64], config: &GenGammaConfig) -> Result<GenGammaFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Fit(format!("non-finite sample {bad}")));
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) {
        return Err(Error::Fit("no spread: all samples are equal".into()));
    }
    if config.grid_points < 2 || config.restarts == 0 {
        return Err(Error::contract("need at least 2 grid points and 1 restart"));
    }
    let opts = NelderMeadOptions {
        max_iters: config.max_iters,
        f_tol: config.tol,
        x_tol: 1e-8,
        initial_step: 0.5,
    };
    let mu_hi = min - 1e-6 * range;
    let grid: Vec<f64> = (0..config.grid_points)
        .map(|k| mu_hi - range * k as f64 / (config.grid_points - 1) as f64)
        .collect();

    let starts_for = |k: usize, mu: f64| -> Vec<Vec<f64>> {
        let mean = samples.iter().map(|x| x - mu).sum::<f64>() / samples.len() as f64;
        let base = vec![0.0, mean.ln(), 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(k as u64);
        let mut starts = vec![base.clone()];
        for _ in 1..config.restarts {
            starts.push(base.iter().map(|b| b + rng.random_range(-1.0..1.0)).collect());
        }
        starts
    };

    let fits: Vec<ProfileFit> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &mu)| fit_profile(samples, mu, &starts_for(k, mu), &opts))
        .collect();
    let best_k = (0..fits.len())
        .max_by(|&a, &b| {
            fits[a]
                .log_likelihood
                .total_cmp(&fits[b].log_likelihood)
                .then(b.cmp(&a))
        })
        .unwrap();
    let mut best = fits[best_k].clone();

    // golden-section refinement of μ around the winning grid point
    let mut lo = grid[(best_k + 1).min(grid.len() - 1)];
    let mut hi = grid[best_k.saturating_sub(1)];
    let warm = best.theta.clone();
    let refine = |mu: f64| {
        let mut starts = starts_for(grid.len(), mu);
        starts.insert(0, warm.clone());
        fit_profile(samples, mu, &starts, &opts)
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = refine(x1);
    let mut f2 = refine(x2);
    for _ in 0..40 {
        if hi - lo <= 1e-9 * range {
            break;
        }
        if f1.log_likelihood >= f2.log_likelihood {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = refine(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = refine(x2);
        }
    }
    for cand in [f1, f2] {
        if cand.log_likelihood > best.log_likelihood {
            best = cand;
        }
    }

    if !best.log_likelihood.is_finite() {
        return Err(Error::Fit("no parameter set with finite likelihood found".into()));
    }
    let params = GenGammaParams::new(best.theta[0].exp(), best.theta[1].exp(), best.theta[2].exp(), best.mu)?;
    let threshold_t = params.quantile(config.quantile)?;
    Ok(GenGammaFit {
        alpha: params.alpha,
        beta: params.beta,
        gamma: params.gamma,
        mu: params.mu,
        log_likelihood: best.log_likelihood,
        threshold_t,
        quantile_level: config.quantile,
        converged: best.converged,
    })
}

/// Log-likelihood of `samples` under `params`.
pub fn gengamma_log_likelihood(samples: &[f64], params: &GenGammaParams) -> f64 {
    samples.iter().map(|&x| params.ln_pdf(x)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    #[serde(rename = "removed")]
    pub removed_ids: Vec<String>,
    #[serde(rename = "kept")]
    pub kept_ids: Vec<String>,
    /// `X_i` per frame id, in matrix order.
    pub stats: IndexMap<String, f64>,
    pub k: usize,
    pub fit: GenGammaFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub k: usize,
    pub quantile: f64,
    pub fit: GenGammaConfig,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            quantile: DEFAULT_QUANTILE,
            fit: GenGammaConfig::default(),
        }
    }
}

/// One-shot removal of every frame with `X_i > T`.
pub fn prune_outliers(m: &DistanceMatrix, config: &PruneConfig) -> Result<(DistanceMatrix, PruneReport)> {
    let stats = knn_mean_distance(m, config.k)?;
    let fit_config = GenGammaConfig {
        quantile: config.quantile,
        ..config.fit
    };
    let fit = fit_gengamma_mle(&stats.values, &fit_config)?;
    let ids = m.frame_ids();
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for (i, &x) in stats.values.iter().enumerate() {
        if x > fit.threshold_t {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    if kept.len() < 2 {
        return Err(Error::Prune {
            message: format!(
                "pruning would leave {} of {} frames (threshold {})",
                kept.len(),
                m.n(),
                fit.threshold_t
            ),
            original: Box::new(m.clone()),
        });
    }
    let pruned = m.select(&kept)?;
    let report = PruneReport {
        removed_ids: removed.iter().map(|&i| ids[i].clone()).collect(),
        kept_ids: kept.iter().map(|&i| ids[i].clone()).collect(),
        stats: ids.iter().cloned().zip(stats.values.iter().copied()).collect(),
        k: config.k,
        fit,
    };
    Ok((pruned, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(values: Vec<Vec<f64>>) -> DistanceMatrix {
        let n = values.len();
        let ids = (0..n).map(|i| format!("f{i}")).collect();
        DistanceMatrix::new(ids, values.into_iter().flatten().map(|v| v as f32).collect(), "t").unwrap()
    }

    #[test]
    fn knn_mean_of_two_smallest() {
        let m = matrix(vec![
            vec![0.0, 0.2, 0.5, 0.1],
            vec![0.2, 0.0, 0.3, 0.3],
            vec![0.5, 0.3, 0.0, 0.4],
            vec![0.1, 0.3, 0.4, 0.0],
        ]);
        let s = knn_mean_distance(&m, 2).unwrap();
        assert!((s.values[0] - 0.15).abs() < 1e-7);
        // k = n - 1 is the row mean without the diagonal
        let s = knn_mean_distance(&m, 3).unwrap();
        assert!((s.values[2] - 1.2 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn knn_constant_rows() {
        let m = matrix(vec![vec![0.0, 2.0, 2.0], vec![2.0, 0.0, 2.0], vec![2.0, 2.0, 0.0]]);
        assert_eq!(knn_mean_distance(&m, 2).unwrap().values, vec![2.0; 3]);
    }

    #[test]
    fn knn_rejects_large_k() {
        let m = matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let err = knn_mean_distance(&m, 2).unwrap_err();
        assert!(err.to_string().contains("k <= 1"), "{err}");
    }

    #[test]
    fn pdf_below_location_is_zero() {
        assert_eq!(gengamma_pdf(0.5, 2.0, 1.0, 1.5, 1.0).unwrap(), 0.0);
        assert_eq!(gengamma_pdf(1.0, 2.0, 1.0, 1.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn pdf_exponential_value() {
        let v = gengamma_pdf(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn pdf_rejects_invalid_parameters() {
        assert!(gengamma_pdf(1.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(gengamma_pdf(1.0, 1.0, -1.0, 1.0, 0.0).is_err());
        assert!(gengamma_pdf(1.0, 1.0, 1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn exponential_quantile_is_ln10() {
        let p = GenGammaParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let q = p.quantile(0.9).unwrap();
        assert!((q - 10f64.ln()).abs() < 1e-9, "{q}");
    }

    #[test]
    fn quantile_rejects_bad_levels() {
        let p = GenGammaParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(p.quantile(0.0).is_err());
        assert!(p.quantile(1.0).is_err());
        assert!(p.quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_is_location_equivariant() {
        let base = GenGammaParams::new(2.0, 0.7, 1.5, 0.0).unwrap();
        let shifted = GenGammaParams::new(2.0, 0.7, 1.5, 3.25).unwrap();
        for q in [0.1, 0.5, 0.9] {
            let d = shifted.quantile(q).unwrap() - base.quantile(q).unwrap();
            assert!((d - 3.25).abs() < 1e-9);
        }
        assert!(base.quantile(0.5).unwrap() < base.quantile(0.9).unwrap());
    }

    #[test]
    fn cdf_of_quantile_round_trips() {
        let p = GenGammaParams::new(0.8, 2.0, 2.5, -1.0).unwrap();
        for q in [0.1, 0.5, 0.9] {
            let x = p.quantile(q).unwrap();
            assert!((p.cdf(x) - q).abs() < 1e-8);
        }
    }

    #[test]
    fn all_equal_samples_fail() {
        let err = fit_gengamma_mle(&[0.5; 12], &GenGammaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Fit(ref m) if m.contains("no spread")), "{err}");
    }

    #[test]
    fn too_few_samples_fail() {
        assert!(fit_gengamma_mle(&[1.0, 2.0, 3.0], &GenGammaConfig::default()).is_err());
    }

    #[test]
    fn prune_fit_error_leaves_matrix_alone() {
        // complete graph with equal weights: every X_i is identical
        let n = 10;
        let m = DistanceMatrix::from_upper((0..n).map(|i| format!("f{i}")).collect(), "t", |_, _| 1.0).unwrap();
        assert!(matches!(prune_outliers(&m, &PruneConfig::default()), Err(Error::Fit(_))));
    }
}
