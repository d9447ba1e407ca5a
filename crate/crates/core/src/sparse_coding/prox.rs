//! One-dimensional proximal maps of `c·|a|^r`.

/// `argmin_a ½(a − z)² + c·|a|^r` for `c ≥ 0`, `r > 0`.
///
/// `r = 1` and `r = 2` are closed form. Otherwise the minimizer has the sign
/// of `z` and magnitude in `[0, |z|]`; the interior stationary point is found
/// by safeguarded Newton on the derivative and compared with `a = 0`, so the
/// result is the global minimizer for `r < 1` too. Ties go to 0.
pub(crate) fn scalar_prox(z: f64, c: f64, r: f64) -> f64 {
    if c == 0.0 {
        return z;
    }
    if r == 1.0 {
        return z.signum() * (z.abs() - c).max(0.0);
    }
    if r == 2.0 {
        return z / (1.0 + 2.0 * c);
    }
    let za = z.abs();
    if za == 0.0 {
        return 0.0;
    }
    // h(a) = ½(a − za)² + c·a^r on a > 0
    let dh = |a: f64| a - za + c * r * a.powf(r - 1.0);
    let d2h = |a: f64| 1.0 + c * r * (r - 1.0) * a.powf(r - 2.0);
    let h = |a: f64| 0.5 * (a - za) * (a - za) + c * a.powf(r);

    let root = if r > 1.0 {
        // h is strictly convex, h'(0+) = −za < 0 < h'(za)
        increasing_root(0.0, za, dh, d2h)
    } else {
        // h is concave below the inflection point and convex above it
        let inflection = (c * r * (1.0 - r)).powf(1.0 / (2.0 - r));
        if inflection >= za || dh(inflection) >= 0.0 {
            return 0.0;
        }
        increasing_root(inflection, za, dh, d2h)
    };
    if r < 1.0 && h(root) >= 0.5 * za * za {
        return 0.0;
    }
    z.signum() * root
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`,
/// Newton steps falling back to bisection whenever they leave the bracket.
fn increasing_root(
    mut lo: f64,
    mut hi: f64,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
) -> f64 {
    let mut a = hi;
    for _ in 0..200 {
        let v = f(a);
        if v == 0.0 {
            return a;
        }
        if v < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let slope = df(a);
        let newton = a - v / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - a).abs() <= 4.0 * f64::EPSILON * a.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        a = next;
    }
    a
}
