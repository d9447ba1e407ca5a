//! Domain types and the elementary norm inequalities shared by every other
//! module.
//!
//! All types validate on construction and are immutable afterwards.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on `‖d_j‖₂ = 1` for dictionary atoms.
pub const TOL_UNIT: f64 = 1e-9;
/// Slack on `‖x‖₂ ≤ 1` for signals.
pub const TOL_BALL: f64 = 1e-12;

/// The sparsity penalty `g(α) = ‖α/λ‖_p^q`.
///
/// `p < 1` gives a quasi-norm; `q ≠ p` makes the penalty non-separable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty")]
pub struct Penalty {
    p: f64,
    q: f64,
    lambda: f64,
}

#[derive(Deserialize)]
struct RawPenalty {
    p: f64,
    q: f64,
    lambda: f64,
}

impl TryFrom<RawPenalty> for Penalty {
    type Error = Error;

    fn try_from(raw: RawPenalty) -> Result<Self> {
        Penalty::new(raw.p, raw.q, raw.lambda)
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(
            name,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

impl Penalty {
    pub fn new(p: f64, q: f64, lambda: f64) -> Result<Self> {
        Ok(Penalty {
            p: positive("p", p)?,
            q: positive("q", q)?,
            lambda: positive("lambda", lambda)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `q = p`: the penalty is a sum of per-coordinate terms.
    pub fn is_separable(&self) -> bool {
        self.p == self.q
    }

    /// `p ≥ 1` and `q ≥ 1`: the penalty is a convex function of α.
    pub fn is_convex(&self) -> bool {
        self.p >= 1.0 && self.q >= 1.0
    }
}

/// An `m × d` matrix whose columns (atoms) have unit ℓ2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    /// Wraps `atoms`, rejecting any column whose norm is off by more than
    /// [`TOL_UNIT`]. Accepted columns are renormalized exactly.
    pub fn new(mut atoms: Array2<f64>) -> Result<Self> {
        let (m, d) = atoms.dim();
        if m == 0 || d == 0 {
            return Err(Error::Dimension(format!(
                "dictionary must be at least 1x1, got {m}x{d}"
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary"));
        }
        for (j, mut col) in atoms.axis_iter_mut(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if (norm - 1.0).abs() > TOL_UNIT {
                return Err(Error::NotUnitNorm { column: j, norm });
            }
            col /= norm;
        }
        Ok(Dictionary { atoms })
    }

    /// Columns drawn from a standard Gaussian and normalized, which is the
    /// uniform distribution on each sphere factor.
    pub fn random<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::Dimension(format!(
                "dictionary must be at least 1x1, got {m}x{d}"
            )));
        }
        let mut atoms = Array2::zeros((m, d));
        for mut col in atoms.axis_iter_mut(Axis(1)) {
            loop {
                col.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
                let norm = col.dot(&col).sqrt();
                if norm > 1e-12 {
                    col /= norm;
                    break;
                }
            }
        }
        Ok(Dictionary { atoms })
    }

    pub fn atoms(&self) -> ArrayView2<'_, f64> {
        self.atoms.view()
    }

    pub fn into_atoms(self) -> Array2<f64> {
        self.atoms
    }

    /// Signal dimension.
    pub fn m(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms.
    pub fn d(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, j: usize) -> ArrayView1<'_, f64> {
        self.atoms.column(j)
    }
}

/// `n` signals stacked as the columns of an `m × n` matrix, each inside the
/// closed unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    signals: Array2<f64>,
}

impl SignalSet {
    pub fn new(signals: Array2<f64>) -> Result<Self> {
        let (m, n) = signals.dim();
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!(
                "signal set must be at least 1x1, got {m}x{n}"
            )));
        }
        if signals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signals"));
        }
        for (i, col) in signals.axis_iter(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 + TOL_BALL {
                return Err(Error::OutsideBall { column: i, norm });
            }
        }
        Ok(SignalSet { signals })
    }

    pub fn signals(&self) -> ArrayView2<'_, f64> {
        self.signals.view()
    }

    pub fn signal(&self, i: usize) -> ArrayView1<'_, f64> {
        self.signals.column(i)
    }

    pub fn m(&self) -> usize {
        self.signals.nrows()
    }

    pub fn n(&self) -> usize {
        self.signals.ncols()
    }

    /// Euclidean norm of every signal, in column order.
    pub fn norms(&self) -> Vec<f64> {
        self.signals
            .axis_iter(Axis(1))
            .map(|c| c.dot(&c).sqrt())
            .collect()
    }
}

/// A `d × n` coefficient matrix, one column per signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    coeffs: Array2<f64>,
}

impl CoeffMatrix {
    pub fn new(coeffs: Array2<f64>) -> Result<Self> {
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        Ok(CoeffMatrix { coeffs })
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        CoeffMatrix {
            coeffs: Array2::zeros((d, n)),
        }
    }

    /// Stacks per-sample coefficient vectors as columns.
    pub fn from_columns(d: usize, columns: &[Array1<f64>]) -> Result<Self> {
        let mut coeffs = Array2::zeros((d, columns.len()));
        for (i, c) in columns.iter().enumerate() {
            if c.len() != d {
                return Err(Error::Dimension(format!(
                    "coefficient column {i} has length {}, expected {d}",
                    c.len()
                )));
            }
            coeffs.column_mut(i).assign(c);
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> ArrayView2<'_, f64> {
        self.coeffs.view()
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.coeffs.column(i)
    }

    pub fn d(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn n(&self) -> usize {
        self.coeffs.ncols()
    }
}

/// `(Σ|v_i|^p)^{1/p}` for any `p > 0`; the zero vector has norm 0 for every p.
pub fn lp_norm(v: ArrayView1<'_, f64>, p: f64) -> Result<f64> {
    let p = positive("p", p)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector"));
    }
    Ok(lp_norm_unchecked(v, p))
}

/// Scaled by the largest magnitude so that tiny `p` neither overflows nor
/// underflows.
pub(crate) fn lp_norm_unchecked(v: ArrayView1<'_, f64>, p: f64) -> f64 {
    let scale = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
        return scale * s.sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// `g(v) = ‖v/λ‖_p^q`.
pub fn penalty_eval(v: ArrayView1<'_, f64>, pen: &Penalty) -> f64 {
    if pen.is_separable() {
        let inv = 1.0 / pen.lambda;
        if pen.p == 1.0 {
            return v.iter().map(|x| x.abs()).sum::<f64>() * inv;
        }
        if pen.p == 2.0 {
            return v.iter().map(|x| x * x).sum::<f64>() * inv * inv;
        }
        return v.iter().map(|x| (x.abs() * inv).powf(pen.p)).sum();
    }
    (lp_norm_unchecked(v, pen.p) / pen.lambda).powf(pen.q)
}

/// `d^{(1 − 1/p)_+}`, the constant in `‖v‖₁ ≤ d^{(1−1/p)_+}‖v‖_p` for
/// vectors of length `d`.
pub fn l1_factor(p: f64, d: usize) -> f64 {
    let exponent = (1.0 - 1.0 / p).max(0.0);
    if exponent == 0.0 {
        1.0
    } else {
        (d as f64).powf(exponent)
    }
}

/// Radius `λ·d^{(1−1/p)_+}·t^{1/q}` of the ℓ1 ball containing every `v` with
/// `g(v) ≤ t`.
pub fn l1_bound_from_penalty(t: f64, pen: &Penalty, d: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    pen.lambda * l1_factor(pen.p, d) * t.powf(1.0 / pen.q)
}

/// The `‖·‖_{1→2}` distance: largest Euclidean distance between matching
/// atoms.
pub fn dict_distance(a: &Dictionary, b: &Dictionary) -> Result<f64> {
    if a.atoms.dim() != b.atoms.dim() {
        return Err(Error::Dimension(format!(
            "dictionaries are {:?} and {:?}",
            a.atoms.dim(),
            b.atoms.dim()
        )));
    }
    Ok(a.atoms
        .axis_iter(Axis(1))
        .zip(b.atoms.axis_iter(Axis(1)))
        .map(|(u, v)| {
            u.iter()
                .zip(v.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}
