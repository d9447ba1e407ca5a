//! Per-signal sparse coding `f_x(D) = inf_α ½‖x − Dα‖₂² + g(α)`.
//!
//! When the penalty has a cheap prox the solver is an accelerated
//! proximal-gradient method with backtracking and a monotone restart rule,
//! so the objective never increases between accepted iterates. How the
//! penalty is handled depends on its shape:
//!
//! | penalty        | treatment                                              |
//! |----------------|--------------------------------------------------------|
//! | `q = p`        | separable prox, one scalar problem per coordinate      |
//! | `p = 2, q ≠ 2` | radial prox, one scalar problem on `‖α‖₂`              |
//! | otherwise      | reweighted least squares on a smoothed `‖·‖_p` with    |
//! |                | ε-continuation, then pruning against the exact penalty |
//!
//! Non-convex penalties (`p < 1` or `q < 1`) are solved from several starts
//! and the best end point wins. Every solve is finally compared against
//! `α = 0`, which guarantees `objective ≤ ½‖x‖₂²`.

mod brute_force;
mod prox;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    l1_bound_from_penalty, penalty_eval, CoeffMatrix, Dictionary, Penalty, SignalSet,
};

pub use brute_force::{brute_force_code, GridSearch};
use prox::scalar_prox;

/// Outcome of coding one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingResult {
    pub coeffs: Vec<f64>,
    /// `½‖x − Dα‖₂² + g(α)` at `coeffs`, evaluated directly.
    pub objective: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CodingResult {
    pub(crate) fn at(
        x: ArrayView1<'_, f64>,
        dict: ArrayView2<'_, f64>,
        pen: &Penalty,
        coeffs: Array1<f64>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let residual = &x - &dict.dot(&coeffs);
        let residual_norm = residual.dot(&residual).sqrt();
        let objective = 0.5 * residual_norm * residual_norm + penalty_eval(coeffs.view(), pen);
        CodingResult {
            coeffs: coeffs.to_vec(),
            objective,
            residual_norm,
            iterations,
            converged,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Backtracking factor in (0, 1).
    pub step_shrink: f64,
    /// Stop once the gradient mapping's sup-norm falls below this.
    pub grad_tol: f64,
    pub obj_tol: f64,
    /// Number of starts for non-convex penalties.
    pub restarts: usize,
    /// Final smoothing of `‖·‖_p` on the reweighted path; continuation
    /// starts from `max(1e-2, smoothing_eps)`.
    pub smoothing_eps: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            step_shrink: 0.5,
            grad_tol: 1e-10,
            obj_tol: 1e-8,
            restarts: 5,
            smoothing_eps: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::param("step_shrink", "must lie in (0, 1)"));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::param("grad_tol", "must be positive"));
        }
        if !(self.obj_tol > 0.0 && self.obj_tol.is_finite()) {
            return Err(Error::param("obj_tol", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be at least 1"));
        }
        if !(self.smoothing_eps > 0.0 && self.smoothing_eps.is_finite()) {
            return Err(Error::param("smoothing_eps", "must be positive"));
        }
        Ok(())
    }
}

fn check_signal(x: ArrayView1<'_, f64>, dict: &Dictionary) -> Result<()> {
    if x.len() != dict.m() {
        return Err(Error::Dimension(format!(
            "signal has length {}, dictionary has {} rows",
            x.len(),
            dict.m()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    Ok(())
}

/// `ℒ_x(D, α) = ½‖x − Dα‖₂² + g(α)` for one sample.
pub fn objective(
    x: ArrayView1<'_, f64>,
    dict: &Dictionary,
    a: ArrayView1<'_, f64>,
    pen: &Penalty,
) -> Result<f64> {
    check_signal(x, dict)?;
    if a.len() != dict.d() {
        return Err(Error::Dimension(format!(
            "coefficients have length {}, dictionary has {} atoms",
            a.len(),
            dict.d()
        )));
    }
    let residual = &x - &dict.atoms().dot(&a);
    Ok(0.5 * residual.dot(&residual) + penalty_eval(a, pen))
}

#[derive(Debug, Clone, Copy)]
enum PenaltyForm {
    /// `scale · Σ|α_i|^exponent`
    Separable {
        exponent: f64,
        scale: f64,
    },
    /// `scale · ‖α‖₂^exponent`
    Radial {
        exponent: f64,
        scale: f64,
    },
    Smoothed,
}

struct Problem<'a> {
    pen: &'a Penalty,
    form: PenaltyForm,
    gram: Array2<f64>,
    corr: Array1<f64>,
    half_x_sq: f64,
}

struct Run {
    coeffs: Array1<f64>,
    iterations: usize,
    converged: bool,
}

impl<'a> Problem<'a> {
    fn new(x: ArrayView1<'_, f64>, dict: &Dictionary, pen: &'a Penalty) -> Self {
        let atoms = dict.atoms();
        let form = if pen.is_separable() {
            PenaltyForm::Separable {
                exponent: pen.p(),
                scale: pen.lambda().powf(-pen.p()),
            }
        } else if pen.p() == 2.0 {
            PenaltyForm::Radial {
                exponent: pen.q(),
                scale: pen.lambda().powf(-pen.q()),
            }
        } else {
            PenaltyForm::Smoothed
        };
        Problem {
            pen,
            form,
            gram: atoms.t().dot(&atoms),
            corr: atoms.t().dot(&x),
            half_x_sq: 0.5 * x.dot(&x),
        }
    }

    fn fit(&self, a: &Array1<f64>) -> f64 {
        self.half_x_sq - self.corr.dot(a) + 0.5 * a.dot(&self.gram.dot(a))
    }

    fn fit_grad(&self, a: &Array1<f64>) -> Array1<f64> {
        self.gram.dot(a) - &self.corr
    }

    /// Value, gradient and IRLS weights of `λ^{-q}(Σ(α_i² + ε)^{p/2})^{q/p}`.
    /// The gradient equals `μ·w ⊙ α` with the returned `(μ, w)`.
    fn smoothed_penalty(&self, a: &Array1<f64>, eps: f64) -> (f64, f64, Array1<f64>) {
        let (p, q) = (self.pen.p(), self.pen.q());
        let scale = self.pen.lambda().powf(-q);
        let terms = a.mapv(|v| v * v + eps);
        let sum: f64 = terms.iter().map(|t| t.powf(0.5 * p)).sum();
        if sum == 0.0 {
            return (0.0, 0.0, Array1::zeros(a.len()));
        }
        let mu = scale * q * sum.powf(q / p - 1.0);
        let weights = terms.mapv(|t| if t == 0.0 { 0.0 } else { t.powf(0.5 * p - 1.0) });
        (scale * sum.powf(q / p), mu, weights)
    }

    fn smoothed_total(&self, a: &Array1<f64>, eps: f64) -> f64 {
        self.fit(a) + self.smoothed_penalty(a, eps).0
    }

    fn total(&self, a: &Array1<f64>) -> f64 {
        self.fit(a) + penalty_eval(a.view(), self.pen)
    }

    /// `prox_{t·g}(z)` for the separable and radial forms.
    fn prox(&self, z: Array1<f64>, t: f64) -> Array1<f64> {
        match self.form {
            PenaltyForm::Separable { exponent, scale } => {
                z.mapv(|v| scalar_prox(v, t * scale, exponent))
            }
            PenaltyForm::Radial { exponent, scale } => {
                let norm = z.dot(&z).sqrt();
                if norm == 0.0 {
                    return z;
                }
                let r = scalar_prox(norm, t * scale, exponent);
                z * (r / norm)
            }
            PenaltyForm::Smoothed => unreachable!("smoothed penalties are solved by reweighting"),
        }
    }

    /// One backtracked forward-backward step from `y`. Returns the new point
    /// and the sup-norm of the gradient mapping.
    fn step(&self, y: &Array1<f64>, t: &mut f64, shrink: f64) -> (Array1<f64>, f64) {
        let fy = self.fit(y);
        let grad = self.fit_grad(y);
        loop {
            let cand = self.prox(y - &(&grad * *t), *t);
            let diff = &cand - y;
            let model = fy + grad.dot(&diff) + diff.dot(&diff) / (2.0 * *t);
            let fc = self.fit(&cand);
            if fc <= model + 8.0 * f64::EPSILON * fy.abs().max(1.0) || *t < 1e-30 {
                let gm = diff.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / *t;
                return (cand, gm);
            }
            *t *= shrink;
        }
    }

    /// Accelerated proximal gradient with function-value restart. Iterates
    /// are monotone in `total`.
    fn descend(&self, start: Array1<f64>, cfg: &SolverConfig) -> Run {
        let mut x = start;
        let mut fx = self.total(&x);
        let mut x_prev = x.clone();
        let mut theta = 1.0_f64;
        let mut t = 1.0_f64;
        let mut stalled = 0usize;
        for it in 1..=cfg.max_iters {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let momentum = (theta - 1.0) / theta_next;
            let y = if momentum > 0.0 {
                &x + &((&x - &x_prev) * momentum)
            } else {
                x.clone()
            };
            let (mut cand, mut gm) = self.step(&y, &mut t, cfg.step_shrink);
            let mut fc = self.total(&cand);
            let mut next_theta = theta_next;
            if fc > fx {
                next_theta = 1.0;
                if momentum > 0.0 {
                    (cand, gm) = self.step(&x, &mut t, cfg.step_shrink);
                    fc = self.total(&cand);
                }
                if fc > fx {
                    // no descent left at working precision
                    return Run {
                        coeffs: x,
                        iterations: it,
                        converged: true,
                    };
                }
            }
            let decrease = fx - fc;
            x_prev = std::mem::replace(&mut x, cand);
            fx = fc;
            theta = next_theta;
            if gm <= cfg.grad_tol {
                return Run {
                    coeffs: x,
                    iterations: it,
                    converged: true,
                };
            }
            if decrease <= 1e-3 * cfg.obj_tol {
                stalled += 1;
                if stalled >= 20 {
                    return Run {
                        coeffs: x,
                        iterations: it,
                        converged: true,
                    };
                }
            } else {
                stalled = 0;
            }
        }
        Run {
            coeffs: x,
            iterations: cfg.max_iters,
            converged: false,
        }
    }

    /// Iteratively reweighted least squares on the ε-smoothed objective: the
    /// direction `−(G + μW)⁻¹∇F_ε` is a descent direction because `G + μW` is
    /// positive definite, and an Armijo search keeps `F_ε` monotone.
    fn reweighted(&self, start: Array1<f64>, eps: f64, cfg: &SolverConfig, budget: usize) -> Run {
        let d = start.len();
        let damping = 1e-12 * self.gram.diag().fold(1.0_f64, |m, &v| m.max(v));
        let mut a = start;
        let mut fa = self.smoothed_total(&a, eps);
        for it in 1..=budget {
            let (_, mu, w) = self.smoothed_penalty(&a, eps);
            let grad = self.fit_grad(&a) + &(&w * &a * mu);
            let mut system = self.gram.clone();
            for i in 0..d {
                system[[i, i]] += mu * w[i];
            }
            let Some(dir) = cholesky_solve(&system, damping, &grad.mapv(|g| -g)) else {
                return Run {
                    coeffs: a,
                    iterations: it,
                    converged: false,
                };
            };
            let slope = grad.dot(&dir);
            let mut s = 1.0;
            let (next, f_next) = loop {
                let cand = &a + &(&dir * s);
                let fc = self.smoothed_total(&cand, eps);
                if fc <= fa + 1e-4 * s * slope || s < 1e-20 {
                    break (cand, fc);
                }
                s *= cfg.step_shrink;
            };
            let moved = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * s;
            if f_next > fa {
                return Run {
                    coeffs: a,
                    iterations: it,
                    converged: true,
                };
            }
            let decrease = fa - f_next;
            a = next;
            fa = f_next;
            if moved <= cfg.grad_tol || decrease <= 1e-3 * cfg.obj_tol * fa.abs().max(1e-300) {
                return Run {
                    coeffs: a,
                    iterations: it,
                    converged: true,
                };
            }
        }
        Run {
            coeffs: a,
            iterations: budget,
            converged: false,
        }
    }

    /// Zeroes coordinates, smallest first, while that does not increase the
    /// exact objective. Smoothing leaves tiny nonzeros where the exact
    /// penalty has a cusp.
    fn prune(&self, mut a: Array1<f64>) -> Array1<f64> {
        let mut order: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0.0).collect();
        order.sort_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()));
        let mut best = self.total(&a);
        for i in order {
            let kept = a[i];
            a[i] = 0.0;
            let value = self.total(&a);
            if value <= best {
                best = value;
            } else {
                a[i] = kept;
            }
        }
        a
    }

    fn solve_from(&self, start: Array1<f64>, cfg: &SolverConfig) -> Run {
        match self.form {
            PenaltyForm::Smoothed => {
                let floor = cfg.smoothing_eps;
                let mut stages = vec![];
                let mut eps = 1e-2_f64.max(floor);
                while eps > floor * 1.000001 {
                    stages.push(eps);
                    eps /= 10.0;
                }
                stages.push(floor);
                let mut coeffs = start;
                let mut best = (self.total(&coeffs), coeffs.clone());
                let mut iterations = 0;
                let mut converged = false;
                for eps in stages {
                    let budget = cfg.max_iters.saturating_sub(iterations).max(1);
                    let run = self.reweighted(coeffs, eps, cfg, budget);
                    coeffs = run.coeffs;
                    iterations += run.iterations;
                    converged = run.converged;
                    let value = self.total(&coeffs);
                    if value < best.0 {
                        best = (value, coeffs.clone());
                    }
                }
                let pruned = self.prune(best.1);
                Run {
                    coeffs: pruned,
                    iterations,
                    converged,
                }
            }
            _ => self.descend(start, cfg),
        }
    }
}

/// Solves `(G + μI)a = b` for a small symmetric positive definite system.
fn cholesky_solve(gram: &Array2<f64>, mu: f64, rhs: &Array1<f64>) -> Option<Array1<f64>> {
    let n = rhs.len();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = gram[[i, j]] + if i == j { mu } else { 0.0 };
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[[i, k]] * y[k]).sum();
        y[i] = (rhs[i] - s) / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[k]).sum();
        x[i] = (y[i] - s) / l[[i, i]];
    }
    Some(x)
}

fn l1(a: &Array1<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Uniform draw from the ℓ1 ball of the given radius.
fn l1_ball_point<R: Rng>(d: usize, radius: f64, rng: &mut R) -> Array1<f64> {
    let weights: Vec<f64> = (0..=d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    Array1::from_iter(weights[..d].iter().map(|w| {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        sign * radius * w / total
    }))
}

/// Best code supported on a single atom. On `a·e_j` every `‖·‖_p` equals
/// `|a|`, so each candidate is one scalar prox with exponent `q`.
fn best_one_sparse(problem: &Problem<'_>, pen: &Penalty, d: usize) -> Array1<f64> {
    let c = pen.lambda().powf(-pen.q());
    let mut best = (0.0, 0, 0.0);
    for j in 0..d {
        let z = problem.corr[j];
        let a = scalar_prox(z, c, pen.q());
        // objective change relative to α = 0, using ‖d_j‖ = 1
        let delta = 0.5 * a * a - a * z + c * a.abs().powf(pen.q());
        if delta < best.0 {
            best = (delta, j, a);
        }
    }
    let mut out = Array1::zeros(d);
    out[best.1] = best.2;
    out
}

/// Starting points: zero; for non-convex penalties also the ridge solution,
/// the best 1-sparse code and random points in the ℓ1 ball that must contain
/// every minimizer.
fn starts(problem: &Problem<'_>, pen: &Penalty, d: usize, cfg: &SolverConfig) -> Vec<Array1<f64>> {
    let mut out = vec![Array1::zeros(d)];
    if pen.is_convex() || cfg.restarts < 2 {
        return out;
    }
    let radius = l1_bound_from_penalty(problem.half_x_sq, pen, d);
    let mut ridge =
        cholesky_solve(&problem.gram, 1e-2, &problem.corr).unwrap_or_else(|| Array1::zeros(d));
    let ridge_l1 = l1(&ridge);
    if ridge_l1 > radius && ridge_l1 > 0.0 {
        ridge *= radius / ridge_l1;
    }
    out.push(ridge);
    out.push(best_one_sparse(problem, pen, d));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 2..cfg.restarts {
        out.push(l1_ball_point(d, radius, &mut rng));
    }
    out
}

/// `true` when `(obj_a, l1_a)` should replace the incumbent `(obj_b, l1_b)`.
fn improves(obj_a: f64, l1_a: f64, obj_b: f64, l1_b: f64) -> bool {
    obj_a < obj_b || (obj_a == obj_b && l1_a < l1_b)
}

/// Codes one signal. The returned objective is an upper bound on `f_x(D)`
/// and never exceeds `½‖x‖₂²`.
pub fn sparse_code(
    x: ArrayView1<'_, f64>,
    dict: &Dictionary,
    pen: &Penalty,
    cfg: &SolverConfig,
) -> Result<CodingResult> {
    check_signal(x, dict)?;
    cfg.validate()?;
    let d = dict.d();
    let atoms = dict.atoms();
    if x.iter().all(|&v| v == 0.0) {
        return Ok(CodingResult::at(x, atoms, pen, Array1::zeros(d), 0, true));
    }
    let problem = Problem::new(x, dict, pen);

    let mut best = CodingResult::at(x, atoms, pen, Array1::zeros(d), 0, false);
    let mut best_l1 = 0.0;
    let mut iterations = 0;
    let mut any_converged = false;
    for start in starts(&problem, pen, d, cfg) {
        let run = problem.solve_from(start, cfg);
        iterations += run.iterations;
        any_converged |= run.converged;
        let cand = CodingResult::at(x, atoms, pen, run.coeffs, run.iterations, run.converged);
        let cand_l1 = cand.l1_norm();
        if improves(cand.objective, cand_l1, best.objective, best_l1) {
            best_l1 = cand_l1;
            best = cand;
        }
    }
    if best_l1 == 0.0 {
        best.converged = any_converged;
    }
    best.iterations = iterations;
    Ok(best)
}

fn check_set(set: &SignalSet, dict: &Dictionary) -> Result<()> {
    if set.m() != dict.m() {
        return Err(Error::Dimension(format!(
            "signals have dimension {}, dictionary has {} rows",
            set.m(),
            dict.m()
        )));
    }
    Ok(())
}

/// Codes every signal; results are in column order regardless of scheduling.
pub fn batch_code(
    set: &SignalSet,
    dict: &Dictionary,
    pen: &Penalty,
    cfg: &SolverConfig,
) -> Result<Vec<CodingResult>> {
    check_set(set, dict)?;
    cfg.validate()?;
    let signals = set.signals();
    (0..set.n())
        .into_par_iter()
        .map(|i| sparse_code(signals.column(i), dict, pen, cfg))
        .collect()
}

/// Mean in index order, so the result does not depend on thread count.
pub(crate) fn ordered_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// `F_X(D) = (1/n) Σ f_{x_i}(D)` together with the stacked coefficients.
pub fn batch_objective(
    set: &SignalSet,
    dict: &Dictionary,
    pen: &Penalty,
    cfg: &SolverConfig,
) -> Result<(f64, CoeffMatrix)> {
    let results = batch_code(set, dict, pen, cfg)?;
    let mean = ordered_mean(results.iter().map(|r| r.objective));
    let columns: Vec<Array1<f64>> = results
        .into_iter()
        .map(|r| Array1::from(r.coeffs))
        .collect();
    Ok((mean, CoeffMatrix::from_columns(dict.d(), &columns)?))
}

/// Membership of `A` in the ε-near-solution set: every column satisfies
/// `ℒ_{x_i}(D, α_i) ≤ f_{x_i}(D) + ε`, with `f_{x_i}(D)` taken from
/// `oracle_objectives`.
pub fn is_eps_near_solution(
    set: &SignalSet,
    dict: &Dictionary,
    coeffs: &CoeffMatrix,
    pen: &Penalty,
    eps: f64,
    oracle_objectives: &[f64],
) -> Result<bool> {
    check_set(set, dict)?;
    if coeffs.n() != set.n() || coeffs.d() != dict.d() || oracle_objectives.len() != set.n() {
        return Err(Error::Dimension(format!(
            "{} signals, {}x{} coefficients, {} oracle values, {} atoms",
            set.n(),
            coeffs.d(),
            coeffs.n(),
            oracle_objectives.len(),
            dict.d()
        )));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::param("eps", "must be nonnegative"));
    }
    for (i, (x, a)) in set
        .signals()
        .axis_iter(Axis(1))
        .zip(coeffs.coeffs().axis_iter(Axis(1)))
        .enumerate()
    {
        if objective(x, dict, a, pen)? > oracle_objectives[i] + eps {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn scalar_dict() -> Dictionary {
        Dictionary::new(array![[1.0]]).unwrap()
    }

    fn pen(p: f64, q: f64, l: f64) -> Penalty {
        Penalty::new(p, q, l).unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = scalar_dict();
        let x = array![0.8];
        assert_relative_eq!(
            objective(x.view(), &d, array![0.3].view(), &pen(1.0, 1.0, 2.0)).unwrap(),
            0.275,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            objective(x.view(), &d, array![0.0].view(), &pen(0.5, 2.0, 1.0)).unwrap(),
            0.32
        );

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dict = Dictionary::random(4, 3, &mut rng).unwrap();
        let a = array![0.2, -0.1, 0.05];
        let x = dict.atoms().dot(&a);
        assert_relative_eq!(
            objective(x.view(), &dict, a.view(), &pen(1.0, 1.0, 4.0)).unwrap(),
            0.35 / 4.0,
            epsilon = 1e-15
        );
        assert!(objective(
            array![1.0, 0.0].view(),
            &dict,
            a.view(),
            &pen(1.0, 1.0, 1.0)
        )
        .is_err());
    }

    #[test]
    fn soft_threshold_instance() {
        let r = sparse_code(
            array![0.8].view(),
            &scalar_dict(),
            &pen(1.0, 1.0, 2.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(r.coeffs[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(r.objective, 0.275, epsilon = 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn zero_signal_codes_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dict = Dictionary::random(3, 5, &mut rng).unwrap();
        for p in [pen(1.0, 1.0, 1.0), pen(0.5, 0.5, 1.0), pen(1.5, 0.7, 2.0)] {
            let r =
                sparse_code(Array1::zeros(3).view(), &dict, &p, &SolverConfig::default()).unwrap();
            assert_eq!(r.objective, 0.0);
            assert!(r.coeffs.iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn lasso_zero_solution_when_correlations_small() {
        // max_j |<d_j, x>| ≤ 1/λ  ⇒  α = 0 is optimal
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dict = Dictionary::random(3, 4, &mut rng).unwrap();
        let x = array![0.1, -0.05, 0.08];
        let corr = dict.atoms().t().dot(&x);
        let max_corr = corr.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let lambda = 0.99 / max_corr;
        let r = sparse_code(
            x.view(),
            &dict,
            &pen(1.0, 1.0, lambda),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(r.coeffs.iter().all(|&a| a == 0.0), "{:?}", r.coeffs);
        assert_relative_eq!(r.objective, 0.5 * x.dot(&x));
    }

    #[test]
    fn ridge_closed_form_on_orthonormal_dictionary() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dict = Dictionary::new(array![[s, -s], [s, s]]).unwrap();
        let x = array![0.3, -0.5];
        let r = sparse_code(
            x.view(),
            &dict,
            &pen(2.0, 2.0, 1.0),
            &SolverConfig::default(),
        )
        .unwrap();
        let expected = dict.atoms().t().dot(&x) / 3.0;
        for (a, e) in r.coeffs.iter().zip(expected.iter()) {
            assert_relative_eq!(*a, *e, epsilon = 1e-9);
        }
        // α = Dᵀx/3 and f = ‖x‖²/3 when g = ‖α‖² and D is orthonormal
        assert_relative_eq!(r.objective, x.dot(&x) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn group_lasso_radial_prox() {
        // p = 2, q = 1 on an orthonormal basis is block soft-thresholding
        let dict = Dictionary::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let x = array![0.6, 0.8];
        let r = sparse_code(
            x.view(),
            &dict,
            &pen(2.0, 1.0, 4.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(r.coeffs[0], 0.6 * 0.75, epsilon = 1e-10);
        assert_relative_eq!(r.coeffs[1], 0.8 * 0.75, epsilon = 1e-10);
    }

    #[test]
    fn smoothed_path_matches_separable_special_case() {
        // (p=1, q=2) on one atom: ½(a − z)² + a²/λ², a = z/(1 + 2/λ²)
        let x = array![0.9];
        let r = sparse_code(
            x.view(),
            &scalar_dict(),
            &pen(1.0, 2.0, 1.5),
            &SolverConfig::default(),
        )
        .unwrap();
        let expected = 0.9 / (1.0 + 2.0 / 2.25);
        assert_relative_eq!(r.coeffs[0], expected, epsilon = 1e-5);
    }

    #[test]
    fn objective_never_exceeds_zero_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for k in 0..300 {
            let m = rng.random_range(1..5);
            let d = rng.random_range(1..6);
            let dict = Dictionary::random(m, d, &mut rng).unwrap();
            let mut x = Array1::from_iter((0..m).map(|_| rng.random_range(-1.0f64..1.0)));
            let nx = x.dot(&x).sqrt();
            if nx > 1.0 {
                x /= nx;
            }
            let pn = pen(
                rng.random_range(0.3..3.0),
                rng.random_range(0.3..3.0),
                rng.random_range(0.2..5.0),
            );
            let cfg = SolverConfig {
                seed: k,
                ..SolverConfig::default()
            };
            let r = sparse_code(x.view(), &dict, &pn, &cfg).unwrap();
            let half = 0.5 * x.dot(&x);
            assert!(r.objective >= 0.0 && r.objective <= half + 1e-12);
            assert!(r.residual_norm <= (2.0 * r.objective).sqrt() + 1e-12);
            assert!(r.residual_norm <= x.dot(&x).sqrt() + 1e-12);
            assert_relative_eq!(
                r.objective,
                objective(x.view(), &dict, Array1::from(r.coeffs.clone()).view(), &pn).unwrap(),
                epsilon = 1e-14
            );
            assert!(r.l1_norm() <= l1_bound_from_penalty(half, &pn, d) + 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dict = Dictionary::random(3, 3, &mut rng).unwrap();
        let x = array![0.4, -0.3, 0.2];
        let cfg = SolverConfig {
            seed: 77,
            ..SolverConfig::default()
        };
        let a = sparse_code(x.view(), &dict, &pen(0.5, 0.5, 1.0), &cfg).unwrap();
        let b = sparse_code(x.view(), &dict, &pen(0.5, 0.5, 1.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = scalar_dict();
        let cfg = SolverConfig::default();
        assert!(matches!(
            sparse_code(array![f64::NAN].view(), &d, &pen(1.0, 1.0, 1.0), &cfg),
            Err(Error::NonFinite(_))
        ));
        let bad = SolverConfig {
            step_shrink: 1.0,
            ..SolverConfig::default()
        };
        assert!(sparse_code(array![0.1].view(), &d, &pen(1.0, 1.0, 1.0), &bad).is_err());
    }

    #[test]
    fn batch_objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dict = Dictionary::random(3, 4, &mut rng).unwrap();
        let cfg = SolverConfig::default();
        let p = pen(1.0, 1.0, 3.0);

        let zeros = SignalSet::new(Array2::zeros((3, 5))).unwrap();
        assert_eq!(batch_objective(&zeros, &dict, &p, &cfg).unwrap().0, 0.0);

        let x = array![0.3, 0.5, -0.2];
        let single = sparse_code(x.view(), &dict, &p, &cfg).unwrap();
        let one = SignalSet::new(x.clone().insert_axis(Axis(1))).unwrap();
        let (f1, a1) = batch_objective(&one, &dict, &p, &cfg).unwrap();
        assert_eq!(f1, single.objective);
        assert_eq!(a1.column(0).to_vec(), single.coeffs);

        let mut twice = Array2::zeros((3, 2));
        twice.column_mut(0).assign(&x);
        twice.column_mut(1).assign(&x);
        let (f2, _) = batch_objective(&SignalSet::new(twice).unwrap(), &dict, &p, &cfg).unwrap();
        assert_relative_eq!(f2, single.objective, epsilon = 1e-15);
    }

    #[test]
    fn eps_near_solution_membership() {
        let dict = Dictionary::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let set = SignalSet::new(array![[0.8, 0.1], [0.2, -0.6]]).unwrap();
        let p = pen(1.0, 1.0, 2.0);
        let cfg = SolverConfig::default();
        let results = batch_code(&set, &dict, &p, &cfg).unwrap();
        let oracle: Vec<f64> = results.iter().map(|r| r.objective).collect();
        let (_, a) = batch_objective(&set, &dict, &p, &cfg).unwrap();
        assert!(is_eps_near_solution(&set, &dict, &a, &p, 0.0, &oracle).unwrap());

        let zero = CoeffMatrix::zeros(2, 2);
        let eps = set
            .norms()
            .iter()
            .zip(&oracle)
            .map(|(n, f)| 0.5 * n * n - f)
            .fold(0.0, f64::max);
        assert!(is_eps_near_solution(&set, &dict, &zero, &p, eps, &oracle).unwrap());
        assert!(!is_eps_near_solution(&set, &dict, &zero, &p, 0.5 * eps, &oracle).unwrap());

        let mut perturbed = a.coeffs().to_owned();
        perturbed[[0, 0]] += 0.5;
        let perturbed = CoeffMatrix::new(perturbed).unwrap();
        assert!(!is_eps_near_solution(&set, &dict, &perturbed, &p, 0.0, &oracle).unwrap());

        assert!(
            is_eps_near_solution(&set, &dict, &CoeffMatrix::zeros(3, 2), &p, 0.0, &oracle).is_err()
        );
    }
}
