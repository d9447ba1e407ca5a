//! Monte Carlo harness for the generalization gap `|F_X(D) − E f_x(D)|`.
//!
//! The expectation is replaced by a plug-in mean over a large holdout sample
//! (with its standard error). The supremum over all dictionaries is not
//! estimable, so a sweep evaluates the gap at a handful of dictionaries
//! (learned, random or planted) and keeps the largest: a lower proxy for the
//! sup-gap that the bound η controls.
//!
//! All randomness descends from the distribution's seed through
//! [`child_seed`], keyed by `(purpose, n, trial)`, so results do not depend
//! on thread scheduling.
//!
//! # Export format
//!
//! [`export`] writes `<path>` as CSV with the header
//! `n,trial,train_F,holdout_F,gap,eta` (reals with 17 significant digits)
//! and a sidecar `<path>.json`:
//!
//! ```text
//! {
//!   "format": "gap-curve", "version": 1, "log_base": "e",
//!   "config":   <ExperimentConfig>,
//!   "seeds":    { "master": u64, "holdout": u64, "dictionaries": [u64],
//!                 "train": [[n, trial, seed], ...] },
//!   "fit":      null | { "slope", "intercept", "slope_inv_sqrt",
//!                        "intercept_inv_sqrt", "mean_gaps": [{"n", "mean_gap"}] },
//!   "rows":     [{ "n", "trial", "std_error", "converged", "dict_index" }],
//!   "warnings": [string]
//! }
//! ```

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{auto_lipschitz, compute_beta, compute_eta, hoeffding_tail};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::learning::{learn, LearnConfig};
use crate::model::{Dictionary, Penalty, SignalSet};
use crate::seeding::child_seed;
use crate::sparse_coding::{batch_code, SolverConfig};

const TAG_TRAIN: u64 = 1;
const TAG_HOLDOUT: u64 = 2;
const TAG_DICT: u64 = 3;
const TAG_LEARN: u64 = 4;

pub const CSV_HEADER: &str = "n,trial,train_F,holdout_F,gap,eta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    UniformSphere,
    UniformBall,
    /// `x = Dα / max(1, ‖Dα‖₂)` for a fixed random `D` and `k`-sparse `α`.
    PlantedSparse,
}

fn default_one() -> usize {
    1
}

fn default_scale() -> f64 {
    1.0
}

/// A law supported on the unit ball of `ℝ^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    /// Planted-sparse only: seed of the planted dictionary.
    #[serde(default)]
    pub true_dict_seed: u64,
    /// Planted-sparse only: nonzeros per sample.
    #[serde(default = "default_one")]
    pub sparsity_k: usize,
    /// Planted-sparse only: nonzero magnitudes are drawn from
    /// `coeff_scale·[0.5, 1)` with a random sign.
    #[serde(default = "default_scale")]
    pub coeff_scale: f64,
    /// Planted-sparse only: number of planted atoms. A sweep fills in its
    /// own `d` when this is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
}

impl DistributionSpec {
    pub fn uniform_sphere(m: usize, seed: u64) -> Self {
        DistributionSpec {
            kind: DistributionKind::UniformSphere,
            m,
            seed,
            true_dict_seed: 0,
            sparsity_k: 1,
            coeff_scale: 1.0,
            atoms: None,
        }
    }

    pub fn uniform_ball(m: usize, seed: u64) -> Self {
        DistributionSpec {
            kind: DistributionKind::UniformBall,
            ..Self::uniform_sphere(m, seed)
        }
    }

    pub fn planted_sparse(
        m: usize,
        atoms: usize,
        sparsity_k: usize,
        coeff_scale: f64,
        true_dict_seed: u64,
        seed: u64,
    ) -> Self {
        DistributionSpec {
            kind: DistributionKind::PlantedSparse,
            m,
            seed,
            true_dict_seed,
            sparsity_k,
            coeff_scale,
            atoms: Some(atoms),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DistributionSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m", "must be at least 1"));
        }
        if self.kind == DistributionKind::PlantedSparse {
            let atoms = self.atoms.ok_or_else(|| {
                Error::param("atoms", "planted-sparse needs the number of planted atoms")
            })?;
            if atoms == 0 {
                return Err(Error::param("atoms", "must be at least 1"));
            }
            if self.sparsity_k == 0 || self.sparsity_k > atoms {
                return Err(Error::param(
                    "sparsity_k",
                    format!("must lie in 1..={atoms}"),
                ));
            }
            if !(self.coeff_scale >= 0.0 && self.coeff_scale.is_finite()) {
                return Err(Error::param("coeff_scale", "must be nonnegative"));
            }
        }
        Ok(())
    }

    /// The planted dictionary, for planted-sparse laws.
    pub fn planted_dictionary(&self) -> Result<Option<Dictionary>> {
        self.validate()?;
        match (self.kind, self.atoms) {
            (DistributionKind::PlantedSparse, Some(atoms)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.true_dict_seed);
                Dictionary::random(self.m, atoms, &mut rng).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// `n` independent draws, deterministic in `(seed, n)`.
    pub fn sample(&self, n: usize) -> Result<SignalSet> {
        self.validate()?;
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        let m = self.m;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut x = Array2::zeros((m, n));
        let planted = self.planted_dictionary()?;
        for mut col in x.axis_iter_mut(Axis(1)) {
            match self.kind {
                DistributionKind::UniformSphere | DistributionKind::UniformBall => {
                    loop {
                        col.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
                        let r = col.dot(&col).sqrt();
                        if r > 1e-12 {
                            col /= r;
                            break;
                        }
                    }
                    if self.kind == DistributionKind::UniformBall {
                        col *= rng.random::<f64>().powf(1.0 / m as f64);
                    }
                }
                DistributionKind::PlantedSparse => {
                    let dict = planted.as_ref().expect("validated planted spec");
                    let support = rand::seq::index::sample(&mut rng, dict.d(), self.sparsity_k);
                    let mut alpha = Array1::<f64>::zeros(dict.d());
                    for j in support.iter() {
                        let magnitude = self.coeff_scale * rng.random_range(0.5..1.0);
                        alpha[j] = if rng.random::<bool>() {
                            magnitude
                        } else {
                            -magnitude
                        };
                    }
                    let v = dict.atoms().dot(&alpha);
                    let r = v.dot(&v).sqrt();
                    col.assign(&(v / r.max(1.0)));
                }
            }
        }
        SignalSet::new(x)
    }
}

/// Holdout estimate of `E f_x(D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub mean: f64,
    /// Sample standard deviation over `√holdout_n`.
    pub std_error: f64,
    /// Every holdout solve converged.
    pub converged: bool,
}

fn expectation_on(
    holdout: &SignalSet,
    dict: &Dictionary,
    pen: &Penalty,
    coding: &SolverConfig,
) -> Result<Expectation> {
    let results = batch_code(holdout, dict, pen, coding)?;
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.objective).sum::<f64>() / n;
    let var = results
        .iter()
        .map(|r| (r.objective - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    Ok(Expectation {
        mean,
        std_error: (var / n).sqrt(),
        converged: results.iter().all(|r| r.converged),
    })
}

/// Plug-in mean of `f_x(D)` over `holdout_n` fresh draws from `dist`.
pub fn estimate_expected_f(
    dict: &Dictionary,
    dist: &DistributionSpec,
    pen: &Penalty,
    holdout_n: usize,
    coding: &SolverConfig,
) -> Result<Expectation> {
    if holdout_n < 2 {
        return Err(Error::param("holdout_n", "must be at least 2"));
    }
    let holdout = dist.sample(holdout_n)?;
    expectation_on(&holdout, dict, pen, coding)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictSource {
    /// Learn `D̂` on each training set.
    Learned,
    /// `random_dicts` fixed random dictionaries.
    Random,
    /// The planted dictionary of a planted-sparse law.
    Planted,
}

fn default_holdout() -> usize {
    100_000
}

fn default_random_dicts() -> usize {
    10
}

fn default_confidence() -> f64 {
    1.0
}

fn default_source() -> DictSource {
    DictSource::Random
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Data law; its seed is the master seed of the sweep.
    pub dist: DistributionSpec,
    pub pen: Penalty,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_holdout")]
    pub holdout_n: usize,
    #[serde(default = "default_source")]
    pub dict_source: DictSource,
    #[serde(default = "default_random_dicts")]
    pub random_dicts: usize,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default = "default_confidence")]
    pub confidence_x: f64,
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    /// Validates and returns warnings for legal but questionable settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.dist.validate().or_else(|e| match e {
            Error::InvalidParameter { name: "atoms", .. } if self.dist.atoms.is_none() => Ok(()),
            other => Err(other),
        })?;
        if self.d == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::param("n_grid", "must not be empty"));
        }
        if self.n_grid[0] < 2 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "n_grid",
                "must be strictly increasing with every n ≥ 2",
            ));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.holdout_n < 2 {
            return Err(Error::param("holdout_n", "must be at least 2"));
        }
        if self.dict_source == DictSource::Random && self.random_dicts == 0 {
            return Err(Error::param("random_dicts", "must be at least 1"));
        }
        if self.dict_source == DictSource::Planted
            && self.dist.kind != DistributionKind::PlantedSparse
        {
            return Err(Error::param(
                "dict_source",
                "planted needs a planted-sparse distribution",
            ));
        }
        if !(self.confidence_x >= 0.0 && self.confidence_x.is_finite()) {
            return Err(Error::param("confidence_x", "must be nonnegative"));
        }
        self.learn.validate()?;
        let mut warnings = Vec::new();
        let max_n = *self.n_grid.last().unwrap();
        if self.holdout_n < 10 * max_n {
            warnings.push(format!(
                "holdout_n = {} is below 10 x max(n_grid) = {}; the expectation estimate may dominate the gap",
                self.holdout_n,
                10 * max_n
            ));
        }
        if self.n_grid[0] < 3 {
            warnings.push("n = 2 is below the range n ≥ 3 where log n ≥ 1".to_string());
        }
        Ok(warnings)
    }

    fn resolved_dist(&self) -> DistributionSpec {
        let mut dist = self.dist.clone();
        if dist.kind == DistributionKind::PlantedSparse && dist.atoms.is_none() {
            dist.atoms = Some(self.d);
        }
        dist
    }
}

/// One CSV line of a gap curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRecord {
    pub n: usize,
    pub trial: usize,
    pub train_f: f64,
    pub holdout_f: f64,
    pub gap: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub record: GapRecord,
    /// Standard error of `holdout_f`.
    pub std_error: f64,
    /// Every solve behind this row converged.
    pub converged: bool,
    /// Which evaluated dictionary attained the gap.
    pub dict_index: usize,
    pub train_seed: u64,
}

/// Least-squares fit of `log(mean gap)` against `log √(log n / n)`, and for
/// comparison against `log(1/√n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_inv_sqrt: f64,
    pub intercept_inv_sqrt: f64,
    pub mean_gaps: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct GapCurve {
    pub config: ExperimentConfig,
    pub rows: Vec<GapRow>,
    /// `None` with fewer than two sample sizes or a zero mean gap.
    pub fit: Option<RateFit>,
    pub holdout_seed: u64,
    pub dict_seeds: Vec<u64>,
    pub warnings: Vec<String>,
}

impl GapCurve {
    /// Rows where the gap exceeds η even after discounting three standard
    /// errors of the holdout estimate.
    pub fn envelope_violations(&self) -> Vec<&GapRow> {
        self.rows
            .iter()
            .filter(|r| r.record.gap - 3.0 * r.std_error > r.record.eta)
            .collect()
    }
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Rate fit over per-n mean gaps.
pub fn fit_rate(mean_gaps: &[(usize, f64)]) -> Option<RateFit> {
    if mean_gaps.len() < 2
        || mean_gaps
            .iter()
            .any(|&(n, g)| g.is_nan() || g <= 0.0 || n < 2)
    {
        return None;
    }
    let ys: Vec<f64> = mean_gaps.iter().map(|&(_, g)| g.ln()).collect();
    let log_rate: Vec<f64> = mean_gaps
        .iter()
        .map(|&(n, _)| {
            let n = n as f64;
            0.5 * (n.ln() / n).ln()
        })
        .collect();
    let log_inv_sqrt: Vec<f64> = mean_gaps
        .iter()
        .map(|&(n, _)| -0.5 * (n as f64).ln())
        .collect();
    let (slope, intercept) = ols(&log_rate, &ys);
    let (slope_inv_sqrt, intercept_inv_sqrt) = ols(&log_inv_sqrt, &ys);
    Some(RateFit {
        slope,
        intercept,
        slope_inv_sqrt,
        intercept_inv_sqrt,
        mean_gaps: mean_gaps.to_vec(),
    })
}

/// For every `n` in the grid and every trial: draw a training set, evaluate
/// the gap at the configured dictionaries, and record η for `(n, m, d)` with
/// the automatically derived Lipschitz constant.
pub fn gap_sweep(cfg: &ExperimentConfig) -> Result<GapCurve> {
    let warnings = cfg.validate()?;
    let dist = cfg.resolved_dist();
    dist.validate()?;
    let (m, d, pen) = (dist.m, cfg.d, cfg.pen);
    let master = dist.seed;
    let coding = &cfg.learn.coding;

    let beta = compute_beta(m, d, auto_lipschitz(&pen, d))?;
    let etas = cfg
        .n_grid
        .iter()
        .map(|&n| compute_eta(n as u64, beta, cfg.confidence_x))
        .collect::<Result<Vec<f64>>>()?;

    let holdout_seed = child_seed(master, &[TAG_HOLDOUT]);
    let holdout = dist.with_seed(holdout_seed).sample(cfg.holdout_n)?;

    let (fixed, dict_seeds): (Vec<Dictionary>, Vec<u64>) = match cfg.dict_source {
        DictSource::Random => {
            let seeds: Vec<u64> = (0..cfg.random_dicts as u64)
                .map(|k| child_seed(master, &[TAG_DICT, k]))
                .collect();
            let dicts = seeds
                .iter()
                .map(|&s| Dictionary::random(m, d, &mut ChaCha8Rng::seed_from_u64(s)))
                .collect::<Result<Vec<_>>>()?;
            (dicts, seeds)
        }
        DictSource::Planted => {
            let planted = dist.planted_dictionary()?.ok_or_else(|| {
                Error::param("dict_source", "planted needs a planted-sparse distribution")
            })?;
            if planted.d() != d {
                return Err(Error::Dimension(format!(
                    "planted dictionary has {} atoms, d = {d}",
                    planted.d()
                )));
            }
            (vec![planted], vec![dist.true_dict_seed])
        }
        DictSource::Learned => (Vec::new(), Vec::new()),
    };
    let fixed_expectations = fixed
        .iter()
        .map(|dict| expectation_on(&holdout, dict, &pen, coding))
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize, usize)> = cfg
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..cfg.trials).map(move |t| (k, n, t)))
        .collect();

    let rows = tasks
        .par_iter()
        .map(|&(k, n, trial)| -> Result<GapRow> {
            let train_seed = child_seed(master, &[TAG_TRAIN, n as u64, trial as u64]);
            let train = dist.with_seed(train_seed).sample(n)?;
            let learned;
            let evaluated: Vec<(&Dictionary, Expectation)> =
                if cfg.dict_source == DictSource::Learned {
                    let learn_cfg = LearnConfig {
                        seed: child_seed(cfg.learn.seed, &[TAG_LEARN, n as u64, trial as u64]),
                        ..cfg.learn.clone()
                    };
                    learned = learn(&train, m, d, &pen, &learn_cfg)?.final_dict;
                    let e = expectation_on(&holdout, &learned, &pen, coding)?;
                    vec![(&learned, e)]
                } else {
                    fixed
                        .iter()
                        .zip(fixed_expectations.iter().copied())
                        .collect()
                };
            let mut best: Option<GapRow> = None;
            for (index, (dict, expectation)) in evaluated.into_iter().enumerate() {
                let results = batch_code(&train, dict, &pen, coding)?;
                let train_f = results.iter().map(|r| r.objective).sum::<f64>() / n as f64;
                let gap = (train_f - expectation.mean).abs();
                if best.as_ref().is_none_or(|b| gap > b.record.gap) {
                    best = Some(GapRow {
                        record: GapRecord {
                            n,
                            trial,
                            train_f,
                            holdout_f: expectation.mean,
                            gap,
                            eta: etas[k],
                        },
                        std_error: expectation.std_error,
                        converged: expectation.converged && results.iter().all(|r| r.converged),
                        dict_index: index,
                        train_seed,
                    });
                }
            }
            Ok(best.expect("at least one dictionary is evaluated"))
        })
        .collect::<Result<Vec<GapRow>>>()?;

    let mean_gaps: Vec<(usize, f64)> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let gaps: Vec<f64> = rows
                .iter()
                .filter(|r| r.record.n == n)
                .map(|r| r.record.gap)
                .collect();
            (n, gaps.iter().sum::<f64>() / gaps.len() as f64)
        })
        .collect();

    Ok(GapCurve {
        config: cfg.clone(),
        fit: fit_rate(&mean_gaps),
        rows,
        holdout_seed,
        dict_seeds,
        warnings,
    })
}

/// Outcome of a fixed-dictionary concentration check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceReport {
    pub n: usize,
    pub tau: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub frequency: f64,
    /// `2·exp(−nτ²)`
    pub bound: f64,
    /// Binomial standard error at the bound's probability.
    pub binomial_std_error: f64,
    pub holdout: Expectation,
}

impl ExceedanceReport {
    pub fn passes(&self) -> bool {
        self.frequency <= self.bound + 3.0 * self.binomial_std_error
    }
}

/// Frequency over `trials` training sets of size `n` of the event
/// `|F_X(D) − Ê f| > τ/√8`, to be compared with `2·exp(−nτ²)`.
#[allow(clippy::too_many_arguments)]
pub fn hoeffding_exceedance(
    dict: &Dictionary,
    dist: &DistributionSpec,
    pen: &Penalty,
    n: usize,
    tau: f64,
    trials: usize,
    holdout_n: usize,
    coding: &SolverConfig,
) -> Result<ExceedanceReport> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", "must be nonnegative"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let holdout = estimate_expected_f(
        dict,
        &dist.with_seed(child_seed(dist.seed, &[TAG_HOLDOUT])),
        pen,
        holdout_n,
        coding,
    )?;
    let threshold = tau / 8f64.sqrt();
    let exceeded = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let train = dist
                .with_seed(child_seed(dist.seed, &[TAG_TRAIN, n as u64, t as u64]))
                .sample(n)?;
            let results = batch_code(&train, dict, pen, coding)?;
            let f = results.iter().map(|r| r.objective).sum::<f64>() / n as f64;
            Ok((f - holdout.mean).abs() > threshold)
        })
        .collect::<Result<Vec<bool>>>()?;
    let exceedances = exceeded.iter().filter(|&&e| e).count();
    let bound = hoeffding_tail(n as u64, tau);
    let p = bound.min(1.0);
    Ok(ExceedanceReport {
        n,
        tau,
        trials,
        exceedances,
        frequency: exceedances as f64 / trials as f64,
        bound,
        binomial_std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        holdout,
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the CSV at `path` and the JSON sidecar at `path` + `.json`.
/// Returns the sidecar path.
pub fn export(curve: &GapCurve, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &curve.rows {
        let r = &row.record;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            r.trial,
            format_f64(r.train_f),
            format_f64(r.holdout_f),
            format_f64(r.gap),
            format_f64(r.eta)
        ));
    }
    File::create(path)
        .and_then(|mut f| f.write_all(csv.as_bytes()))
        .map_err(|e| Error::io(path, e))?;

    let sidecar = json!({
        "format": "gap-curve",
        "version": 1,
        "log_base": "e",
        "config": curve.config,
        "seeds": {
            "master": curve.config.dist.seed,
            "holdout": curve.holdout_seed,
            "dictionaries": curve.dict_seeds,
            "train": curve.rows.iter().map(|r| json!([r.record.n, r.record.trial, r.train_seed])).collect::<Vec<_>>(),
        },
        "fit": curve.fit.as_ref().map(|f| json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "slope_inv_sqrt": f.slope_inv_sqrt,
            "intercept_inv_sqrt": f.intercept_inv_sqrt,
            "mean_gaps": f.mean_gaps.iter().map(|(n, g)| json!({"n": n, "mean_gap": g})).collect::<Vec<_>>(),
        })),
        "rows": curve.rows.iter().map(|r| json!({
            "n": r.record.n,
            "trial": r.record.trial,
            "std_error": r.std_error,
            "converged": r.converged,
            "dict_index": r.dict_index,
        })).collect::<Vec<_>>(),
        "warnings": curve.warnings,
    });
    let sidecar_file = sidecar_path(path);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar is plain JSON");
    std::fs::write(&sidecar_file, text).map_err(|e| Error::io(&sidecar_file, e))?;
    Ok(sidecar_file)
}

/// Reads a CSV written by [`export`].
pub fn import_csv(path: impl AsRef<Path>) -> Result<Vec<GapRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| Error::parse(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::parse(path, format!("expected header {CSV_HEADER}")));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e))?;
        let int = |i: usize| {
            record[i]
                .parse::<usize>()
                .map_err(|e| Error::parse(path, e))
        };
        let real = |i: usize| record[i].parse::<f64>().map_err(|e| Error::parse(path, e));
        out.push(GapRecord {
            n: int(0)?,
            trial: int(1)?,
            train_f: real(2)?,
            holdout_f: real(3)?,
            gap: real(4)?,
            eta: real(5)?,
        });
    }
    Ok(out)
}
