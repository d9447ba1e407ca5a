//! Grid-search oracle for `f_x(D)` on tiny dictionaries.
//!
//! The search box `[−w, w]^d` defaults to the ℓ1 radius that every
//! minimizer must satisfy, so the box always contains the global minimizer.
//! An odd number of grid points puts the origin on the lattice, which
//! matters for quasi-norm penalties whose minimizers sit on coordinate axes.
//!
//! Up to [`EXHAUSTIVE_BUDGET`] lattice points are evaluated exhaustively.
//! Larger lattices (in practice `d = 3` with thousands of points per axis)
//! are searched in two passes: every point of a centred sub-lattice with
//! stride `k`, then the full-resolution lattice inside a `±k` window around
//! each of the best [`REFINE_CANDIDATES`] coarse local minima.

use ndarray::{Array1, ArrayView1};

use super::CodingResult;
use crate::error::{Error, Result};
use crate::model::{l1_bound_from_penalty, Dictionary, Penalty};

pub const MAX_ATOMS: usize = 3;
const EXHAUSTIVE_BUDGET: usize = 4_100_000;
const REFINE_CANDIDATES: usize = 16;

/// Grid minimizer plus a resolution estimate.
#[derive(Debug, Clone)]
pub struct GridSearch {
    pub coding: CodingResult,
    /// Distance between adjacent lattice values.
    pub spacing: f64,
    /// Largest objective increase from the grid minimizer to any adjacent
    /// lattice point: the scale on which the grid can misjudge `f_x(D)`.
    pub grid_error: f64,
    pub evaluations: usize,
}

struct Lattice {
    values: Vec<f64>,
    /// Per-axis penalty contribution of each lattice value.
    pen_part: Vec<f64>,
    separable: bool,
    outer_power: f64,
    gram: [[f64; MAX_ATOMS]; MAX_ATOMS],
    corr: [f64; MAX_ATOMS],
    half_x_sq: f64,
    d: usize,
}

impl Lattice {
    fn eval(&self, idx: &[usize]) -> f64 {
        let mut a = [0.0; MAX_ATOMS];
        let mut pen = 0.0;
        for (i, &k) in idx.iter().enumerate() {
            a[i] = self.values[k];
            pen += self.pen_part[k];
        }
        if !self.separable {
            pen = pen.powf(self.outer_power);
        }
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..self.d {
            lin += self.corr[i] * a[i];
            let row: f64 = self.gram[i][..self.d]
                .iter()
                .zip(a)
                .map(|(g, v)| g * v)
                .sum();
            quad += a[i] * row;
        }
        self.half_x_sq - lin + 0.5 * quad + pen
    }
}

/// Visits every index tuple in the Cartesian product of `axes`.
fn for_each_tuple(axes: &[Vec<usize>], mut f: impl FnMut(&[usize])) {
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let d = axes.len();
    let mut pos = vec![0usize; d];
    let mut idx: Vec<usize> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&idx);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            pos[axis] += 1;
            if pos[axis] < axes[axis].len() {
                idx[axis] = axes[axis][pos[axis]];
                break;
            }
            pos[axis] = 0;
            idx[axis] = axes[axis][0];
        }
    }
}

fn window(center: usize, radius: usize, len: usize) -> Vec<usize> {
    (center.saturating_sub(radius)..=(center + radius).min(len - 1)).collect()
}

/// Exhaustive (or two-pass, see module docs) grid minimization of
/// `½‖x − Dα‖₂² + g(α)` over `[−w, w]^d` with `grid_points` values per axis.
/// `grid_half_width = None` uses the ℓ1 radius `λ·d^{(1−1/p)_+}·(½‖x‖₂²)^{1/q}`.
pub fn brute_force_code(
    x: ArrayView1<'_, f64>,
    dict: &Dictionary,
    pen: &Penalty,
    grid_half_width: Option<f64>,
    grid_points: usize,
) -> Result<GridSearch> {
    let (m, d) = (dict.m(), dict.d());
    if d > MAX_ATOMS {
        return Err(Error::Infeasible(format!(
            "grid search refuses d = {d}; at most {MAX_ATOMS} atoms"
        )));
    }
    if grid_points < 11 {
        return Err(Error::param("grid_points", "must be at least 11"));
    }
    if x.len() != m {
        return Err(Error::Dimension(format!(
            "signal has length {}, dictionary has {m} rows",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    let half_x_sq = 0.5 * x.dot(&x);
    let width = match grid_half_width {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => {
            return Err(Error::param(
                "grid_half_width",
                format!("must be positive, got {w}"),
            ))
        }
        None => l1_bound_from_penalty(half_x_sq, pen, d),
    };
    if width == 0.0 {
        return Ok(GridSearch {
            coding: CodingResult::at(x, dict.atoms(), pen, Array1::zeros(d), 1, true),
            spacing: 0.0,
            grid_error: 0.0,
            evaluations: 1,
        });
    }

    let spacing = 2.0 * width / (grid_points - 1) as f64;
    let center = (grid_points - 1) as f64 / 2.0;
    let values: Vec<f64> = (0..grid_points)
        .map(|k| (k as f64 - center) * spacing)
        .collect();
    let separable = pen.is_separable();
    let inv = 1.0 / pen.lambda();
    let pen_part = values
        .iter()
        .map(|v| {
            let s = (v.abs() * inv).powf(pen.p());
            if s.is_finite() {
                s
            } else {
                0.0
            }
        })
        .collect();
    let atoms = dict.atoms();
    let mut gram = [[0.0; MAX_ATOMS]; MAX_ATOMS];
    let mut corr = [0.0; MAX_ATOMS];
    for i in 0..d {
        corr[i] = atoms.column(i).dot(&x);
        for (j, g) in gram[i][..d].iter_mut().enumerate() {
            *g = atoms.column(i).dot(&atoms.column(j));
        }
    }
    let lattice = Lattice {
        values,
        pen_part,
        separable,
        outer_power: pen.q() / pen.p(),
        gram,
        corr,
        half_x_sq,
        d,
    };

    let mut evaluations = 0usize;
    let mut best_idx = vec![0usize; d];
    let mut best_val = f64::INFINITY;
    let consider =
        |idx: &[usize], evaluations: &mut usize, best_idx: &mut Vec<usize>, best_val: &mut f64| {
            *evaluations += 1;
            let v = lattice.eval(idx);
            if v < *best_val {
                *best_val = v;
                best_idx.copy_from_slice(idx);
            }
            v
        };

    let full = (grid_points as f64).powi(d as i32);
    if full <= EXHAUSTIVE_BUDGET as f64 {
        let axes = vec![(0..grid_points).collect::<Vec<_>>(); d];
        for_each_tuple(&axes, |idx| {
            consider(idx, &mut evaluations, &mut best_idx, &mut best_val);
        });
    } else {
        let mid = (grid_points - 1) / 2;
        let coarse_axis = |k: usize| -> Vec<usize> {
            let below = mid / k;
            let above = (grid_points - 1 - mid) / k;
            (0..=below + above)
                .map(|j| mid + j * k - below * k)
                .collect()
        };
        let mut stride = 2;
        while (coarse_axis(stride).len() as f64).powi(d as i32) > EXHAUSTIVE_BUDGET as f64 {
            stride += 1;
        }
        let axis = coarse_axis(stride);
        let n_axis = axis.len();
        let axes = vec![axis.clone(); d];
        let mut coarse = Vec::with_capacity(n_axis.pow(d as u32));
        for_each_tuple(&axes, |idx| {
            coarse.push(consider(
                idx,
                &mut evaluations,
                &mut best_idx,
                &mut best_val,
            ));
        });

        // coarse local minima, in flat row-major order of the coarse lattice
        let strides: Vec<usize> = (0..d).map(|a| n_axis.pow((d - 1 - a) as u32)).collect();
        let mut minima: Vec<(f64, usize)> = Vec::new();
        let offsets: Vec<Vec<usize>> = vec![vec![0, 1, 2]; d];
        for (flat, &v) in coarse.iter().enumerate() {
            let pos: Vec<usize> = strides.iter().map(|s| (flat / s) % n_axis).collect();
            let mut is_min = true;
            for_each_tuple(&offsets, |off| {
                if !is_min || off.iter().all(|&o| o == 1) {
                    return;
                }
                let mut nb = 0;
                for a in 0..d {
                    let p = pos[a] as isize + off[a] as isize - 1;
                    if p < 0 || p >= n_axis as isize {
                        return;
                    }
                    nb += p as usize * strides[a];
                }
                if coarse[nb] < v {
                    is_min = false;
                }
            });
            if is_min {
                minima.push((v, flat));
            }
        }
        minima.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, flat) in minima.iter().take(REFINE_CANDIDATES) {
            let windows: Vec<Vec<usize>> = strides
                .iter()
                .map(|s| window(axis[(flat / s) % n_axis], stride, grid_points))
                .collect();
            for_each_tuple(&windows, |idx| {
                consider(idx, &mut evaluations, &mut best_idx, &mut best_val);
            });
        }
    }

    let neighbourhood: Vec<Vec<usize>> = best_idx
        .iter()
        .map(|&k| window(k, 1, grid_points))
        .collect();
    let mut grid_error = 0.0_f64;
    for_each_tuple(&neighbourhood, |idx| {
        grid_error = grid_error.max(lattice.eval(idx) - best_val);
    });

    let coeffs = Array1::from_iter(best_idx.iter().map(|&k| lattice.values[k]));
    Ok(GridSearch {
        coding: CodingResult::at(x, dict.atoms(), pen, coeffs, evaluations, true),
        spacing,
        grid_error,
        evaluations,
    })
}
