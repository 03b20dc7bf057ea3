//! Small numerical toolbox: adaptive quadrature, scalar maximization,
//! special functions, and seed derivation.

use crate::{Result, SimError};

pub use libm::erfc;

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
///
/// Direct evaluation is fine up to x ~ 26 (erfc underflows around 26.5,
/// exp(x^2) overflows just past that); beyond, the asymptotic series is
/// accurate to better than 1e-12.
pub fn erfcx(x: f64) -> f64 {
    if x < 26.0 {
        (x * x).exp() * erfc(x)
    } else {
        let inv2 = 1.0 / (x * x);
        (1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2) / (x * core::f64::consts::PI.sqrt())
    }
}

fn simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fa, fm, fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) < 1e-12 * (b.abs() + a.abs() + 1.0) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(SimError::QuadratureNonConvergent);
    }
    let l = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance
/// `rel_tol` (with a small absolute floor so integrals that are genuinely
/// zero terminate).
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(SimError::invalid("integration bounds", "must be finite"));
    }
    if b <= a {
        return Ok(0.0);
    }
    // coarse composite-Simpson scan for the magnitude of the integral,
    // so the recursion tolerance is genuinely relative
    let n = 64;
    let h = (b - a) / n as f64;
    let mut coarse = 0.0f64;
    for i in 0..n {
        let x0 = a + i as f64 * h;
        coarse += h / 6.0 * (f(x0).abs() + 4.0 * f(x0 + 0.5 * h).abs() + f(x0 + h).abs());
    }
    let abs_tol = (coarse * rel_tol).max(1e-300);
    let (whole, fa, fm, fb) = simpson(&mut f, a, b);
    adapt(&mut f, a, b, fa, fm, fb, whole, abs_tol, 48)
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]` to an
/// abscissa tolerance `tol`. Returns `(argmax, max)`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// SplitMix64 step, used to derive independent per-stage seeds from one
/// scenario seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Format with six significant digits (CSV export convention).
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // trim trailing zeros but keep at least one digit after the point
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        let t = t.strip_suffix('.').unwrap_or(t);
        t.to_string()
    } else {
        s
    }
}
