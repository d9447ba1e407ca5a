//! Fixed-seed self-checks: the solver against the grid oracle, and the
//! inequalities the bound rests on.

use dlbound::bounds::{compute_beta, compute_eta, empirical_l, proof_constants, required_samples};
use dlbound::learning::project_atoms;
use dlbound::model::{dict_distance, l1_bound_from_penalty, l1_factor, lp_norm};
use dlbound::sparse_coding::{brute_force_code, sparse_code};
use dlbound::{Dictionary, Penalty, SignalSet, SolverConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct CheckRow {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
}

fn ball_point(rng: &mut ChaCha8Rng, m: usize) -> Array1<f64> {
    let mut v = Array1::from_iter((0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let r = v.dot(&v).sqrt();
    v *= rng.random::<f64>().powf(1.0 / m as f64) / r;
    v
}

fn pen(p: f64, q: f64, lambda: f64) -> Penalty {
    Penalty::new(p, q, lambda).expect("check penalties are valid")
}

fn oracle_equivalence() -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let shapes = [
        (1.0, 1.0),
        (2.0, 2.0),
        (0.5, 0.5),
        (0.5, 1.0),
        (1.0, 2.0),
        (2.0, 1.0),
    ];
    let cases = 60;
    let mut failures = 0;
    for k in 0..cases {
        let m = rng.random_range(1..=3);
        let d = rng.random_range(1..=2);
        let dict = Dictionary::random(m, d, &mut rng).expect("valid shape");
        let x = ball_point(&mut rng, m);
        let (p, q) = shapes[k % shapes.len()];
        let pn = pen(p, q, rng.random_range(0.5..2.0));
        let fast = sparse_code(x.view(), &dict, &pn, &SolverConfig::default());
        let grid = brute_force_code(x.view(), &dict, &pn, None, 2001);
        match (fast, grid) {
            (Ok(f), Ok(g))
                if (f.objective - g.coding.objective).abs() <= (2.0 * g.grid_error).max(1e-3) => {}
            _ => failures += 1,
        }
    }
    CheckRow {
        name: "solver vs grid oracle",
        cases,
        failures,
    }
}

fn objective_range() -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let cases = 500;
    let mut failures = 0;
    for _ in 0..cases {
        let m = rng.random_range(1..=8);
        let d = rng.random_range(1..=12);
        let dict = Dictionary::random(m, d, &mut rng).expect("valid shape");
        let x = ball_point(&mut rng, m);
        let pn = pen(
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.1..10.0),
        );
        let half = 0.5 * x.dot(&x);
        let ok = sparse_code(x.view(), &dict, &pn, &SolverConfig::default()).is_ok_and(|r| {
            let radius = l1_bound_from_penalty(half, &pn, d);
            r.objective >= 0.0
                && r.objective <= half + 1e-12
                && r.l1_norm() <= radius * (1.0 + 1e-6) + 1e-12
        });
        failures += usize::from(!ok);
    }
    CheckRow {
        name: "objective range, l1 radius",
        cases,
        failures,
    }
}

fn holder() -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let cases = 1000;
    let mut failures = 0;
    for _ in 0..cases {
        let d = rng.random_range(1..=20);
        let p = rng.random_range(0.2..4.0);
        let v = Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let l1: f64 = v.iter().map(|a| a.abs()).sum();
        let ok = lp_norm(v.view(), p).is_ok_and(|lp| l1 <= l1_factor(p, d) * lp * (1.0 + 1e-12));
        failures += usize::from(!ok);
    }
    CheckRow {
        name: "l1 vs lp norm",
        cases,
        failures,
    }
}

fn lipschitz() -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let cases = 40;
    let mut failures = 0;
    for _ in 0..cases {
        let mut x = Array2::zeros((2, 3));
        for i in 0..3 {
            x.column_mut(i).assign(&ball_point(&mut rng, 2));
        }
        let set = SignalSet::new(x).expect("points lie in the ball");
        let pn = pen(
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
        );
        let d0 = Dictionary::random(2, 2, &mut rng).expect("valid shape");
        let scale = 10f64.powf(rng.random_range(-2.0..0.0));
        let moved = d0
            .atoms()
            .mapv(|v| v + scale * rng.sample::<f64, _>(StandardNormal));
        let Ok(d1) = project_atoms(moved) else {
            failures += 1;
            continue;
        };
        let f = |dict: &Dictionary| -> Option<f64> {
            let mut total = 0.0;
            for i in 0..set.n() {
                total += brute_force_code(set.signal(i), dict, &pn, None, 201)
                    .ok()?
                    .coding
                    .objective;
            }
            Some(total / set.n() as f64)
        };
        let ok = match (f(&d0), f(&d1), dict_distance(&d0, &d1)) {
            (Some(a), Some(b), Ok(dist)) => {
                (a - b).abs() <= empirical_l(&set, &pn, 2) * dist * (1.0 + 1e-2)
            }
            _ => false,
        };
        failures += usize::from(!ok);
    }
    CheckRow {
        name: "empirical Lipschitz",
        cases,
        failures,
    }
}

fn proof_identity() -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut cases = 0;
    let mut failures = 0;
    while cases < 100 {
        let (m, d) = (rng.random_range(1..=32), rng.random_range(1..=64));
        let l = 10f64.powf(rng.random_range(-1.0..2.0));
        let x = rng.random_range(0.0..10.0);
        let n = 10f64.powf(rng.random_range(2.0..8.0)) as u64;
        let Ok(pc) = proof_constants(n, m, d, l, x) else {
            continue;
        };
        cases += 1;
        let log_gap = (m * d) as f64 * (3.0 / pc.epsilon_net).ln() - n as f64 * pc.tau * pc.tau + x;
        failures += usize::from(log_gap.exp_m1().abs() > 1e-10);
    }
    CheckRow {
        name: "net/tail identity",
        cases,
        failures,
    }
}

fn inversion() -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let cases = 20;
    let mut failures = 0;
    for _ in 0..cases {
        let (m, d) = (rng.random_range(1..=32), rng.random_range(1..=64));
        let l = rng.random_range(0.5..20.0);
        let x = rng.random_range(0.0..5.0);
        let target = 10f64.powf(rng.random_range(-2.5..0.0));
        let ok = (|| -> dlbound::Result<bool> {
            let n = required_samples(target, m, d, l, x)?;
            let beta = compute_beta(m, d, l)?;
            let below = compute_eta(n, beta, x)? <= target;
            let minimal = n == 3 || compute_eta(n - 1, beta, x)? > target;
            Ok(below && minimal)
        })()
        .unwrap_or(false);
        failures += usize::from(!ok);
    }
    CheckRow {
        name: "sample-size inversion",
        cases,
        failures,
    }
}

pub fn run_all() -> Vec<CheckRow> {
    vec![
        oracle_equivalence(),
        objective_range(),
        holder(),
        lipschitz(),
        proof_identity(),
        inversion(),
    ]
}
