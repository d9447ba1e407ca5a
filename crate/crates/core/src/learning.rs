//! Alternating minimization of `ℒ_X(D, A) = (1/2n)‖X − DA‖_F² + (1/n)Σ g(α_i)`
//! over unit-norm dictionaries and coefficients.
//!
//! Coefficient block: batch sparse coding, keeping the previous column
//! whenever it is still at least as good under the new dictionary. Dictionary
//! block: projected gradient on the product of spheres with a backtracking
//! test on the projected iterate. Both blocks are non-increasing in `ℒ_X`,
//! so the recorded trace is monotone.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoeffMatrix, Dictionary, Penalty, SignalSet};
use crate::sparse_coding::{batch_code, objective, ordered_mean, SolverConfig};

/// Projected-gradient steps per dictionary update.
const DICT_MAX_STEPS: usize = 100;
/// Early stop once the relative decrease stays below this ...
const EARLY_STOP_REL: f64 = 1e-8;
/// ... for this many consecutive rounds.
const EARLY_STOP_ROUNDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Seeded Gaussian columns, normalized.
    RandomAtoms,
    /// `d` randomly chosen training signals, normalized.
    DataAtoms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub outer_iters: usize,
    pub dict_step_shrink: f64,
    pub dict_grad_tol: f64,
    pub init_mode: InitMode,
    pub seed: u64,
    pub coding: SolverConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            outer_iters: 50,
            dict_step_shrink: 0.5,
            dict_grad_tol: 1e-8,
            init_mode: InitMode::DataAtoms,
            seed: 0,
            coding: SolverConfig::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::param("outer_iters", "must be at least 1"));
        }
        if !(self.dict_step_shrink > 0.0 && self.dict_step_shrink < 1.0) {
            return Err(Error::param("dict_step_shrink", "must lie in (0, 1)"));
        }
        if !(self.dict_grad_tol > 0.0 && self.dict_grad_tol.is_finite()) {
            return Err(Error::param("dict_grad_tol", "must be positive"));
        }
        self.coding.validate()
    }
}

#[derive(Debug, Clone)]
pub struct LearnTrace {
    /// `ℒ_X(D_t, A_t)` after each coefficient step.
    pub objectives: Vec<f64>,
    pub final_dict: Dictionary,
    /// Coefficients coded against `final_dict`.
    pub final_coeffs: CoeffMatrix,
    /// Number of dead atoms that were re-seeded.
    pub replaced_atoms: usize,
}

/// Scales every column to unit norm. A zero column `j` becomes the standard
/// basis vector `e_{j mod m}`.
pub fn project_atoms(mut atoms: Array2<f64>) -> Result<Dictionary> {
    if atoms.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dictionary"));
    }
    let m = atoms.nrows();
    for (j, mut col) in atoms.axis_iter_mut(Axis(1)).enumerate() {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 && norm.is_finite() {
            col /= norm;
        } else {
            col.fill(0.0);
            col[j % m] = 1.0;
        }
    }
    Dictionary::new(atoms)
}

fn check_shapes(set: &SignalSet, coeffs: &CoeffMatrix, dict: &Dictionary) -> Result<()> {
    if set.m() != dict.m() || coeffs.d() != dict.d() || coeffs.n() != set.n() {
        return Err(Error::Dimension(format!(
            "signals {}x{}, coefficients {}x{}, dictionary {}x{}",
            set.m(),
            set.n(),
            coeffs.d(),
            coeffs.n(),
            dict.m(),
            dict.d()
        )));
    }
    Ok(())
}

/// `(1/2n)‖X − DA‖_F²`.
fn fit(set: &SignalSet, coeffs: &CoeffMatrix, atoms: &Array2<f64>) -> f64 {
    let r = &set.signals() - &atoms.dot(&coeffs.coeffs());
    0.5 * r.iter().map(|v| v * v).sum::<f64>() / set.n() as f64
}

/// Projected-gradient descent on the fit term over unit-norm dictionaries,
/// with `A` fixed. The result never has a larger `ℒ_X(·, A)` than `start`.
pub fn dict_update(
    set: &SignalSet,
    coeffs: &CoeffMatrix,
    start: &Dictionary,
    cfg: &LearnConfig,
) -> Result<Dictionary> {
    check_shapes(set, coeffs, start)?;
    cfg.validate()?;
    let n = set.n() as f64;
    let a = coeffs.coeffs();
    let aat = a.dot(&a.t()) / n;
    let xat = set.signals().dot(&a.t()) / n;
    let curvature = aat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if curvature == 0.0 {
        return Ok(start.clone());
    }
    // fit(D) up to a constant: ½⟨D, D·AAᵀ/n⟩ − ⟨D, XAᵀ/n⟩
    let model = |d: &Array2<f64>| {
        let dg = d.dot(&aat);
        0.5 * (d * &dg).sum() - (d * &xat).sum()
    };

    let mut dict = start.atoms().to_owned();
    let mut value = model(&dict);
    let mut t = 1.0 / curvature;
    for _ in 0..DICT_MAX_STEPS {
        let grad = dict.dot(&aat) - &xat;
        let (next, next_value, diff_norm) = loop {
            let cand = project_atoms(&dict - &(&grad * t))?.into_atoms();
            let diff = &cand - &dict;
            let cand_value = model(&cand);
            let bound =
                value + (&grad * &diff).sum() + diff.iter().map(|v| v * v).sum::<f64>() / (2.0 * t);
            if cand_value <= bound + 8.0 * f64::EPSILON * value.abs().max(1.0) || t < 1e-30 {
                break (
                    cand,
                    cand_value,
                    diff.iter().map(|v| v * v).sum::<f64>().sqrt(),
                );
            }
            t *= cfg.dict_step_shrink;
        };
        if next_value > value {
            break;
        }
        dict = next;
        value = next_value;
        if diff_norm / t <= cfg.dict_grad_tol {
            break;
        }
        t /= cfg.dict_step_shrink;
    }
    if fit(set, coeffs, &dict) > fit(set, coeffs, &start.atoms().to_owned()) {
        return Ok(start.clone());
    }
    Dictionary::new(dict)
}

fn initial_dictionary(set: &SignalSet, d: usize, cfg: &LearnConfig) -> Result<Dictionary> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.init_mode {
        InitMode::RandomAtoms => Dictionary::random(set.m(), d, &mut rng),
        InitMode::DataAtoms => {
            let n = set.n();
            let picks: Vec<usize> = if n >= d {
                rand::seq::index::sample(&mut rng, n, d).into_vec()
            } else {
                (0..d).map(|_| rng.random_range(0..n)).collect()
            };
            let mut atoms = Array2::zeros((set.m(), d));
            for (j, &i) in picks.iter().enumerate() {
                atoms.column_mut(j).assign(&set.signal(i));
            }
            project_atoms(atoms)
        }
    }
}

/// Re-seeds atoms whose coefficient row is identically zero with the worst
/// represented signals. Leaves `ℒ_X(·, A)` unchanged because those atoms
/// carry no weight.
fn replace_dead_atoms(
    set: &SignalSet,
    coeffs: &CoeffMatrix,
    dict: Dictionary,
) -> Result<(Dictionary, usize)> {
    let a = coeffs.coeffs();
    let dead: Vec<usize> = (0..dict.d())
        .filter(|&j| a.row(j).iter().all(|&v| v == 0.0))
        .collect();
    if dead.is_empty() {
        return Ok((dict, 0));
    }
    let residual = &set.signals() - &dict.atoms().dot(&a);
    let mut worst: Vec<(f64, usize)> = residual
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c))
        .enumerate()
        .map(|(i, r)| (r, i))
        .filter(|(r, _)| *r > 0.0)
        .collect();
    worst.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut atoms = dict.into_atoms();
    let mut replaced = 0;
    for (&j, &(_, i)) in dead.iter().zip(worst.iter()) {
        atoms.column_mut(j).assign(&set.signal(i));
        replaced += 1;
    }
    Ok((project_atoms(atoms)?, replaced))
}

/// Alternates coding and dictionary updates for up to `outer_iters` rounds.
pub fn learn(
    set: &SignalSet,
    m: usize,
    d: usize,
    pen: &Penalty,
    cfg: &LearnConfig,
) -> Result<LearnTrace> {
    cfg.validate()?;
    if set.m() != m {
        return Err(Error::Dimension(format!(
            "signals have dimension {}, expected m = {m}",
            set.m()
        )));
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    let mut dict = initial_dictionary(set, d, cfg)?;
    let mut previous: Option<Vec<Array1<f64>>> = None;
    let mut objectives = Vec::with_capacity(cfg.outer_iters);
    let mut flat_rounds = 0;
    let mut replaced_atoms = 0;
    let mut coeffs = CoeffMatrix::zeros(d, set.n());

    for round in 0..cfg.outer_iters {
        let results = batch_code(set, &dict, pen, &cfg.coding)?;
        let mut columns = Vec::with_capacity(set.n());
        let mut values = Vec::with_capacity(set.n());
        for (i, r) in results.into_iter().enumerate() {
            let fresh = Array1::from(r.coeffs);
            let mut best = (r.objective, fresh);
            if let Some(prev) = &previous {
                let old = objective(set.signal(i), &dict, prev[i].view(), pen)?;
                if old < best.0 {
                    best = (old, prev[i].clone());
                }
            }
            values.push(best.0);
            columns.push(best.1);
        }
        let value = ordered_mean(values.into_iter());
        coeffs = CoeffMatrix::from_columns(d, &columns)?;
        previous = Some(columns);

        if let Some(&last) = objectives.last() {
            let rel = (last - value) / f64::max(last, f64::MIN_POSITIVE);
            flat_rounds = if rel < EARLY_STOP_REL {
                flat_rounds + 1
            } else {
                0
            };
        }
        objectives.push(value);
        if flat_rounds >= EARLY_STOP_ROUNDS || round + 1 == cfg.outer_iters {
            break;
        }

        let (revived, count) = replace_dead_atoms(set, &coeffs, dict)?;
        replaced_atoms += count;
        dict = dict_update(set, &coeffs, &revived, cfg)?;
    }
    Ok(LearnTrace {
        objectives,
        final_dict: dict,
        final_coeffs: coeffs,
        replaced_atoms,
    })
}
