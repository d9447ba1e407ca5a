//! Constants of the uniform deviation bound
//!
//! ```text
//! sup_{D ∈ 𝔇(m,d)} |F_X(D) − E f_x(D)| ≤ η(n, m, d, L)     w.p. ≥ 1 − 2e^{−x}
//! η = 2√(β log n / n) + √((β + x/√8) / n),   β = (md/8)·max{log(6√8·L), 1}
//! ```
//!
//! for signals drawn from any law supported on the unit ball and any
//! `L > λ·d^{(1−1/p)_+}·(1/2)^{1/q}`.
//!
//! Logarithms are natural throughout. Every formula here is an
//! exact-arithmetic statement; the functions evaluate it in `f64`, so
//! identities hold to rounding only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{l1_factor, Penalty, SignalSet};

/// Relative bump applied to the worst-case Lipschitz constant when `L` is
/// derived automatically, so that the strict hypothesis `L > L_worst` holds.
pub const STRICTNESS_BUMP: f64 = 1e-9;

/// Per-signal ℓ1 radius `λ·d^{(1−1/p)_+}·(½‖x‖²)^{1/q}`.
fn l1_radius(norm: f64, pen: &Penalty, d: usize) -> f64 {
    let half_sq = 0.5 * norm * norm;
    if half_sq == 0.0 {
        0.0
    } else {
        pen.lambda() * l1_factor(pen.p(), d) * half_sq.powf(1.0 / pen.q())
    }
}

/// Dictionary-independent Lipschitz constant of `F_X`:
/// `L_X = (1/n) Σ ‖x_i‖₂ · λ·d^{(1−1/p)_+}·(½‖x_i‖₂²)^{1/q}`.
pub fn empirical_l(set: &SignalSet, pen: &Penalty, d: usize) -> f64 {
    let norms = set.norms();
    norms.iter().map(|&r| r * l1_radius(r, pen, d)).sum::<f64>() / norms.len() as f64
}

/// Dictionary-independent curvature constant as printed:
/// `C_X = (1/2n) Σ λ·d^{(1−1/p)_+}·(½‖x_i‖₂²)^{1/q}`.
pub fn empirical_c(set: &SignalSet, pen: &Penalty, d: usize) -> f64 {
    let norms = set.norms();
    norms.iter().map(|&r| l1_radius(r, pen, d)).sum::<f64>() / (2.0 * norms.len() as f64)
}

/// The squared reading `(1/2n) Σ (λ·d^{(1−1/p)_+}·(½‖x_i‖₂²)^{1/q})²`, which
/// is what bounding `(1/2n) Σ ‖α_i‖₁²` term by term gives.
pub fn empirical_c_squared(set: &SignalSet, pen: &Penalty, d: usize) -> f64 {
    let norms = set.norms();
    norms
        .iter()
        .map(|&r| {
            let b = l1_radius(r, pen, d);
            b * b
        })
        .sum::<f64>()
        / (2.0 * norms.len() as f64)
}

/// `λ·d^{(1−1/p)_+}·(1/2)^{1/q}`: the supremum of `L_X` over signal sets in
/// the unit ball, hence the threshold above which `P(L_X > L) = 0`.
pub fn worst_case_l(pen: &Penalty, d: usize) -> f64 {
    pen.lambda() * l1_factor(pen.p(), d) * 0.5f64.powf(1.0 / pen.q())
}

/// Supremum of `C_X` over signal sets in the unit ball.
pub fn worst_case_c(pen: &Penalty, d: usize) -> f64 {
    0.5 * worst_case_l(pen, d)
}

/// [`worst_case_l`] times `1 + STRICTNESS_BUMP`.
pub fn auto_lipschitz(pen: &Penalty, d: usize) -> f64 {
    worst_case_l(pen, d) * (1.0 + STRICTNESS_BUMP)
}

fn check_dims(m: usize, d: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    Ok(())
}

fn check_confidence(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "confidence",
            format!("must be a nonnegative finite number, got {x}"),
        ))
    }
}

fn check_lipschitz(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "L",
            format!("must be a positive finite number, got {l}"),
        ))
    }
}

/// `log 𝒩_ε(𝔇(m,d)) ≤ md·log(3/ε)`.
pub fn log_covering_number(m: usize, d: usize, eps: f64) -> Result<f64> {
    check_dims(m, d)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, 1), got {eps}"),
        ));
    }
    Ok((m * d) as f64 * (3.0 / eps).ln())
}

/// The tighter `md·log(1 + 2/ε)`, valid for every `ε > 0`.
pub fn log_covering_number_tight(m: usize, d: usize, eps: f64) -> Result<f64> {
    check_dims(m, d)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    Ok((m * d) as f64 * (2.0 / eps).ln_1p())
}

/// `2·exp(−nτ²)`, which bounds `P(|F_X(D) − E f_x(D)| > τ/√8)` for any fixed D.
pub fn hoeffding_tail(n: u64, tau: f64) -> f64 {
    2.0 * (-(n as f64) * tau * tau).exp()
}

/// `β = (md/8)·max{log(6√8·L), 1}`.
pub fn compute_beta(m: usize, d: usize, lipschitz: f64) -> Result<f64> {
    check_dims(m, d)?;
    check_lipschitz(lipschitz)?;
    let arg = (6.0 * 8f64.sqrt() * lipschitz).ln();
    Ok((m * d) as f64 / 8.0 * arg.max(1.0))
}

fn eta_unchecked(n: f64, beta: f64, x: f64) -> f64 {
    2.0 * (beta * n.ln() / n).sqrt() + ((beta + x / 8f64.sqrt()) / n).sqrt()
}

/// `η = 2√(β log n / n) + √((β + x/√8)/n)`.
///
/// `n = 2` is accepted, but the bound's derivation uses `log n ≥ 1`, i.e.
/// `n ≥ 3`.
pub fn compute_eta(n: u64, beta: f64, confidence_x: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("n", format!("must be at least 2, got {n}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    check_confidence(confidence_x)?;
    Ok(eta_unchecked(n as f64, beta, confidence_x))
}

/// Net radius and deviation level used to assemble η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofConstants {
    /// `ε = (1/2L)√(β log n / n)`
    pub epsilon_net: f64,
    /// `τ = √((md·log(3/ε) + x)/n)`
    pub tau: f64,
    /// `γ = τ/√8`
    pub gamma: f64,
    /// `|𝒩_ε·2e^{−nτ²} / 2e^{−x} − 1|` with `𝒩_ε = (3/ε)^{md}`, computed in
    /// the log domain.
    pub identity_rel_error: f64,
}

/// Fails with [`Error::Infeasible`] when `ε ∉ (0, 1)`, which happens when n
/// is too small for the `(m, d, L)` configuration.
pub fn proof_constants(
    n: u64,
    m: usize,
    d: usize,
    lipschitz: f64,
    confidence_x: f64,
) -> Result<ProofConstants> {
    check_confidence(confidence_x)?;
    let beta = compute_beta(m, d, lipschitz)?;
    if n < 2 {
        return Err(Error::param("n", format!("must be at least 2, got {n}")));
    }
    let nf = n as f64;
    let epsilon_net = (beta * nf.ln() / nf).sqrt() / (2.0 * lipschitz);
    if !(epsilon_net > 0.0 && epsilon_net < 1.0) {
        return Err(Error::Infeasible(format!(
            "net radius {epsilon_net} is outside (0, 1); n = {n} is too small for m = {m}, d = {d}, L = {lipschitz}"
        )));
    }
    let log_cover = log_covering_number(m, d, epsilon_net)?;
    let tau = ((log_cover + confidence_x) / nf).sqrt();
    let gamma = tau / 8f64.sqrt();
    let log_lhs = log_cover + 2f64.ln() - nf * tau * tau;
    let log_rhs = 2f64.ln() - confidence_x;
    Ok(ProofConstants {
        epsilon_net,
        tau,
        gamma,
        identity_rel_error: (log_lhs - log_rhs).exp_m1().abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub m: usize,
    pub d: usize,
    pub pen: Penalty,
    pub n: u64,
    /// The `x` in the confidence level `1 − 2e^{−x}`.
    pub confidence_x: f64,
    /// `None` derives [`auto_lipschitz`].
    pub lipschitz: Option<f64>,
}

impl BoundInputs {
    /// The Lipschitz constant the bound will use, validated against the
    /// strict hypothesis `L > L_worst`.
    pub fn resolved_lipschitz(&self) -> Result<f64> {
        check_dims(self.m, self.d)?;
        let worst = worst_case_l(&self.pen, self.d);
        match self.lipschitz {
            None => Ok(auto_lipschitz(&self.pen, self.d)),
            Some(l) => {
                check_lipschitz(l)?;
                if l <= worst {
                    return Err(Error::param(
                        "L",
                        format!(
                            "must exceed lambda * d^((1-1/p)+) * (1/2)^(1/q) = {worst}, got {l}"
                        ),
                    ));
                }
                Ok(l)
            }
        }
    }
}

/// Every constant of the bound for one configuration. Serializes to a flat
/// JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Empirical `L_X` when signals were supplied, otherwise its supremum
    /// over the unit ball.
    #[serde(rename = "L_X")]
    pub l_x: f64,
    #[serde(rename = "C_X")]
    pub c_x: f64,
    pub c_x_squared: f64,
    #[serde(rename = "L_worst")]
    pub l_worst: f64,
    /// Lipschitz constant used for β.
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub beta: f64,
    pub eta: f64,
    pub log_covering: f64,
    pub epsilon_net: f64,
    pub tau: f64,
    pub gamma: f64,
    pub hoeffding_tail: f64,
    pub identity_rel_error: f64,
}

pub fn full_report(inputs: &BoundInputs, signals: Option<&SignalSet>) -> Result<BoundReport> {
    let BoundInputs {
        m,
        d,
        pen,
        n,
        confidence_x,
        ..
    } = *inputs;
    let lipschitz = inputs.resolved_lipschitz()?;
    let beta = compute_beta(m, d, lipschitz)?;
    let eta = compute_eta(n, beta, confidence_x)?;
    let pc = proof_constants(n, m, d, lipschitz, confidence_x)?;
    let l_worst = worst_case_l(&pen, d);
    let (l_x, c_x, c_x_squared) = match signals {
        Some(set) => {
            if set.m() != m {
                return Err(Error::Dimension(format!(
                    "signals have dimension {}, expected m = {m}",
                    set.m()
                )));
            }
            (
                empirical_l(set, &pen, d),
                empirical_c(set, &pen, d),
                empirical_c_squared(set, &pen, d),
            )
        }
        None => {
            let c = worst_case_c(&pen, d);
            (l_worst, c, 2.0 * c * c)
        }
    };
    Ok(BoundReport {
        l_x,
        c_x,
        c_x_squared,
        l_worst,
        lipschitz,
        beta,
        eta,
        log_covering: log_covering_number(m, d, pc.epsilon_net)?,
        epsilon_net: pc.epsilon_net,
        tau: pc.tau,
        gamma: pc.gamma,
        hoeffding_tail: hoeffding_tail(n, pc.tau),
        identity_rel_error: pc.identity_rel_error,
    })
}

/// Largest sample count searched by [`required_samples`].
pub const MAX_SAMPLES: u64 = 1 << 62;

/// Smallest `n ≥ 3` with `η(n) ≤ target_eta`, by doubling then bisection
/// (η is strictly decreasing for `n ≥ 3`).
pub fn required_samples(
    target_eta: f64,
    m: usize,
    d: usize,
    lipschitz: f64,
    confidence_x: f64,
) -> Result<u64> {
    if !(target_eta > 0.0 && target_eta.is_finite()) {
        return Err(Error::param(
            "target-eta",
            format!("must be positive, got {target_eta}"),
        ));
    }
    check_confidence(confidence_x)?;
    let beta = compute_beta(m, d, lipschitz)?;
    let eta = |n: u64| eta_unchecked(n as f64, beta, confidence_x);
    if eta(3) <= target_eta {
        return Ok(3);
    }
    let mut hi = 6u64;
    while eta(hi) > target_eta {
        if hi >= MAX_SAMPLES {
            return Err(Error::Infeasible(format!(
                "eta = {target_eta} needs more than 2^62 samples"
            )));
        }
        hi = (hi * 2).min(MAX_SAMPLES);
    }
    let mut lo = hi / 2;
    // invariant: eta(lo) > target ≥ eta(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eta(mid) <= target_eta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn pen(p: f64, q: f64, l: f64) -> Penalty {
        Penalty::new(p, q, l).unwrap()
    }

    /// n signals, the i-th with norm `norms[i]`, along the first axis.
    fn set_with_norms(m: usize, norms: &[f64]) -> SignalSet {
        let mut x = Array2::zeros((m, norms.len()));
        for (i, &r) in norms.iter().enumerate() {
            x[[0, i]] = r;
        }
        SignalSet::new(x).unwrap()
    }

    #[test]
    fn empirical_constants() {
        let unit = set_with_norms(3, &[1.0, 1.0, 1.0]);
        assert_relative_eq!(empirical_l(&unit, &pen(0.5, 1.0, 1.0), 7), 0.5);
        assert_relative_eq!(empirical_c(&unit, &pen(0.5, 1.0, 1.0), 7), 0.25);
        let zero = set_with_norms(3, &[0.0, 0.0]);
        assert_eq!(empirical_l(&zero, &pen(2.0, 2.0, 3.0), 5), 0.0);
        assert_eq!(empirical_c(&zero, &pen(2.0, 2.0, 3.0), 5), 0.0);
        // high-precision reference values
        let two = set_with_norms(2, &[1.0, 0.5]);
        assert_relative_eq!(
            empirical_l(&two, &pen(2.0, 2.0, 2.0), 4),
            1.7677669529663688,
            epsilon = 1e-15
        );
        let one = set_with_norms(1, &[1.0]);
        for d in [1, 5, 40] {
            assert_relative_eq!(
                empirical_c(&one, &pen(1.0, 2.0, 3.0), d),
                1.0606601717798212,
                epsilon = 1e-15
            );
        }
        assert_relative_eq!(empirical_c_squared(&one, &pen(1.0, 1.0, 1.0), 3), 0.125);
    }

    #[test]
    fn worst_case_examples() {
        for p in [0.1, 0.5, 0.99] {
            assert_relative_eq!(worst_case_l(&pen(p, 1.0, 1.0), 50), 0.5);
        }
        assert_relative_eq!(worst_case_l(&pen(2.0, 1.0, 1.0), 9), 1.5);
        let a = worst_case_l(&pen(1.5, 0.7, 1.3), 6);
        assert_relative_eq!(worst_case_l(&pen(1.5, 0.7, 2.6), 6), 2.0 * a);
    }

    #[test]
    fn covering_examples() {
        assert_relative_eq!(
            log_covering_number(4, 6, 0.3).unwrap(),
            55.262042231857096,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            log_covering_number(1, 1, 0.5).unwrap(),
            1.791759469228055,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            log_covering_number(2, 3, 1.0 - 1e-12).unwrap(),
            6.0 * 3f64.ln(),
            epsilon = 1e-10
        );
        assert!(log_covering_number(2, 3, 1.0).is_err());
        assert!(log_covering_number(2, 3, 0.0).is_err());
        assert!(
            log_covering_number_tight(2, 3, 0.3).unwrap()
                <= log_covering_number(2, 3, 0.3).unwrap()
        );
    }

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_tail(10, 0.0), 2.0);
        assert_relative_eq!(
            hoeffding_tail(1000, 0.1),
            9.07998595249697e-5,
            max_relative = 1e-12
        );
        let (a, b) = (hoeffding_tail(37, 0.23), hoeffding_tail(74, 0.23));
        assert_relative_eq!(b, a * a / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn beta_examples() {
        assert_relative_eq!(
            compute_beta(16, 32, 0.5).unwrap(),
            136.85331580851377,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            compute_beta(16, 32, 0.5).unwrap(),
            64.0 * (3.0 * 8f64.sqrt()).ln(),
            max_relative = 1e-15
        );
        assert_eq!(compute_beta(4, 6, 0.1).unwrap(), 3.0);
        assert!(compute_beta(4, 6, 0.0).is_err());
    }

    #[test]
    fn eta_examples() {
        let beta = 2.5;
        assert_relative_eq!(
            compute_eta(3, beta, 0.0).unwrap(),
            2.0 * (beta * 3f64.ln() / 3.0).sqrt() + (beta / 3.0).sqrt()
        );
        assert_relative_eq!(
            compute_eta(1_000_000, 136.85, 0.0).unwrap(),
            0.09866156133776743,
            max_relative = 1e-13
        );
        assert!(compute_eta(1, 1.0, 0.0).is_err());
        assert!(compute_eta(10, 1.0, -1.0).is_err());
    }

    #[test]
    fn proof_constant_examples() {
        let pc = proof_constants(1_000_000, 16, 32, 0.5, 0.0).unwrap();
        assert_relative_eq!(pc.epsilon_net, 0.04348216219836522, max_relative = 1e-13);
        assert_relative_eq!(pc.tau, 0.04655981733605629, max_relative = 1e-13);
        assert_relative_eq!(pc.gamma, 0.01646138128456619, max_relative = 1e-13);
        assert!(pc.identity_rel_error < 1e-10);
        let more = proof_constants(1_000_000, 16, 32, 0.5, 5.0).unwrap();
        assert_eq!(more.epsilon_net, pc.epsilon_net);
        assert!(more.tau > pc.tau);
        assert!(matches!(
            proof_constants(10, 16, 32, 0.5, 0.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn report_example_one() {
        let m = 8;
        let d = 16;
        let inputs = BoundInputs {
            m,
            d,
            pen: pen(0.5, 1.0, 1.0),
            n: 1_000_000,
            confidence_x: 0.0,
            lipschitz: None,
        };
        let r = full_report(&inputs, None).unwrap();
        let expected = (m * d) as f64 / 8.0 * (3.0 * 8f64.sqrt()).ln();
        assert_relative_eq!(r.beta, expected, max_relative = 1e-8);
        assert_eq!(
            r.eta,
            compute_eta(inputs.n, compute_beta(m, d, r.lipschitz).unwrap(), 0.0).unwrap()
        );
        assert_eq!(r.l_worst, 0.5);

        let zeros = SignalSet::new(Array2::zeros((m, 4))).unwrap();
        let rz = full_report(&inputs, Some(&zeros)).unwrap();
        assert_eq!((rz.l_x, rz.c_x), (0.0, 0.0));
        assert_eq!(rz.l_worst, r.l_worst);

        let low = BoundInputs {
            lipschitz: Some(0.5),
            ..inputs.clone()
        };
        assert!(matches!(
            full_report(&low, None),
            Err(Error::InvalidParameter { name: "L", .. })
        ));
    }

    #[test]
    fn report_json_field_names() {
        let inputs = BoundInputs {
            m: 4,
            d: 4,
            pen: pen(1.0, 1.0, 1.0),
            n: 5000,
            confidence_x: 1.0,
            lipschitz: None,
        };
        let set = SignalSet::new(array![[0.5, 0.1], [0.0, 0.2], [0.1, 0.0], [0.0, 0.3]]).unwrap();
        let json = serde_json::to_value(full_report(&inputs, Some(&set)).unwrap()).unwrap();
        for key in [
            "L_X",
            "C_X",
            "L_worst",
            "beta",
            "eta",
            "log_covering",
            "epsilon_net",
            "tau",
            "gamma",
            "hoeffding_tail",
        ] {
            let v = json.get(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(v.as_f64().unwrap().is_finite());
        }
    }

    #[test]
    fn required_samples_examples() {
        let beta_l = 0.5;
        let n = required_samples(0.1, 16, 32, beta_l, 0.0).unwrap();
        assert_eq!(n, 971_648);
        let beta = compute_beta(16, 32, beta_l).unwrap();
        assert!(compute_eta(n, beta, 0.0).unwrap() <= 0.1);
        assert!(compute_eta(n - 1, beta, 0.0).unwrap() > 0.1);
        assert_eq!(required_samples(10.0, 4, 4, 1.0, 0.0).unwrap(), 3);
        assert!(matches!(
            required_samples(1e-12, 4, 4, 1.0, 0.0),
            Err(Error::Infeasible(_))
        ));
        assert!(required_samples(0.0, 4, 4, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn required_samples_round_trip(n0 in 3u64..5_000_000, m in 1usize..20, d in 1usize..20, l in 0.05..20.0f64, x in 0.0..10.0f64) {
            let beta = compute_beta(m, d, l).unwrap();
            let target = compute_eta(n0, beta, x).unwrap();
            let n = required_samples(target, m, d, l, x).unwrap();
            prop_assert_eq!(n, n0);
        }

        #[test]
        fn beta_has_floor(m in 1usize..50, d in 1usize..50, l in 1e-6..1e6f64) {
            prop_assert!(compute_beta(m, d, l).unwrap() >= (m * d) as f64 / 8.0);
        }

        #[test]
        fn eta_decreasing(n in 3u64..1_000_000_000, beta in 0.1..1e4f64, x in 0.0..50.0f64) {
            prop_assert!(compute_eta(2 * n, beta, x).unwrap() < compute_eta(n, beta, x).unwrap());
            prop_assert!(compute_eta(n + 1, beta, x).unwrap() < compute_eta(n, beta, x).unwrap());
        }

        #[test]
        fn empirical_l_below_worst_case(norms in prop::collection::vec(0.0..1.0f64, 1..20), p in 0.2..4.0f64, q in 0.2..4.0f64, lambda in 0.1..10.0f64, d in 1usize..30) {
            let set = set_with_norms(2, &norms);
            let pn = pen(p, q, lambda);
            prop_assert!(empirical_l(&set, &pn, d) <= worst_case_l(&pn, d) * (1.0 + 1e-12));
        }

        #[test]
        fn covering_identity(n in 1000u64..10_000_000, m in 1usize..12, d in 1usize..12, l in 0.5..10.0f64, x in 0.0..20.0f64) {
            if let Ok(pc) = proof_constants(n, m, d, l, x) {
                prop_assert!(pc.identity_rel_error <= 1e-10);
            }
        }
    }
}
