//! Observable extraction: lifetime fits, g²(0), HOM peak areas and the
//! peak-area ratio M, overlap inversion, cavity coupling, and source
//! brightness.

use serde::{Deserialize, Serialize};

pub use crate::detector::CorrelationHistogram;
use crate::detector::LifetimeHistogram;
use crate::{require_finite, Result, SimError};

/// Weighted least-squares exponential fit of a decay histogram tail.
///
/// The tail starts two rise widths past the peak (the rise width is
/// estimated from the half-maximum crossing, so detector jitter is skipped
/// automatically) and ends at the last bin with at least 10 counts. Fits
/// log-counts vs time with Poisson weights; returns `(t1_ps, sigma_ps)`.
pub fn fit_lifetime(h: &LifetimeHistogram) -> Result<(f64, f64)> {
    let peak_idx = h
        .counts
        .iter()
        .enumerate()
        .max_by_key(|(_, &c)| c)
        .map(|(i, _)| i)
        .ok_or_else(|| SimError::invalid("histogram", "empty"))?;
    let peak = h.counts[peak_idx];
    if peak == 0 {
        return Err(SimError::InsufficientCounts(0));
    }
    let half_idx = h.counts[..=peak_idx]
        .iter()
        .position(|&c| c * 2 >= peak)
        .unwrap_or(peak_idx);
    let rise = peak_idx - half_idx;
    let start = peak_idx + 2 * rise + 1;
    // the tail ends where the decay first drains below 10 counts; counts
    // further out (wrap-around from the next period, background) are not
    // part of the decay
    let end = if start < h.counts.len() {
        match h.counts[start..].iter().position(|&c| c < 10) {
            Some(0) => start,
            Some(p) => start + p - 1,
            None => h.counts.len() - 1,
        }
    } else {
        0
    };
    if end <= start {
        return Err(SimError::InsufficientCounts(0));
    }
    let tail: u64 = h.counts[start..=end].iter().sum();
    if tail < 100 {
        return Err(SimError::InsufficientCounts(tail));
    }
    // weighted linear regression of ln(c) on t, weights w = c
    // (var[ln c] ~ 1/c for Poisson counts)
    let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    for i in start..=end {
        let c = h.counts[i] as f64;
        if c < 1.0 {
            continue;
        }
        let w = c;
        sw += w;
        sx += w * h.bin_center_ps(i);
        sy += w * c.ln();
    }
    let (xm, ym) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0f64, 0.0f64);
    for i in start..=end {
        let c = h.counts[i] as f64;
        if c < 1.0 {
            continue;
        }
        let dx = h.bin_center_ps(i) - xm;
        sxx += c * dx * dx;
        sxy += c * dx * (c.ln() - ym);
    }
    if sxx == 0.0 {
        return Err(SimError::InsufficientCounts(tail));
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(SimError::invalid("histogram", "tail does not decay"));
    }
    let t1 = -1.0 / slope;
    let slope_sigma = (1.0 / sxx).sqrt();
    let t1_sigma = slope_sigma / (slope * slope);
    Ok((t1, t1_sigma))
}

/// Full width of the histogram peak at 1/e of its maximum, by linear
/// interpolation of the crossings.
pub fn width_at_inv_e(h: &LifetimeHistogram) -> Result<f64> {
    let peak_idx = h
        .counts
        .iter()
        .enumerate()
        .max_by_key(|(_, &c)| c)
        .map(|(i, _)| i)
        .ok_or_else(|| SimError::invalid("histogram", "empty"))?;
    let peak = h.counts[peak_idx] as f64;
    if peak <= 0.0 {
        return Err(SimError::InsufficientCounts(0));
    }
    let level = peak / std::f64::consts::E;
    let crossing = |i_below: usize, i_above: usize| -> f64 {
        let (c0, c1) = (h.counts[i_below] as f64, h.counts[i_above] as f64);
        let (t0, t1) = (h.bin_center_ps(i_below), h.bin_center_ps(i_above));
        if (c1 - c0).abs() < f64::EPSILON {
            return 0.5 * (t0 + t1);
        }
        t0 + (level - c0) / (c1 - c0) * (t1 - t0)
    };
    let mut left = h.bin_center_ps(0);
    for i in (0..peak_idx).rev() {
        if (h.counts[i] as f64) < level {
            left = crossing(i, i + 1);
            break;
        }
    }
    let mut right = h.bin_center_ps(h.counts.len() - 1);
    for i in peak_idx + 1..h.counts.len() {
        if (h.counts[i] as f64) < level {
            right = crossing(i, i - 1);
            break;
        }
    }
    Ok(right - left)
}

/// g²(0) extracted from a pulsed coincidence histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Report {
    pub g2_zero: f64,
    /// One-standard-deviation uncertainty from the side-peak area spread.
    pub sigma: f64,
    pub central_area: f64,
    pub peak_areas: Vec<f64>,
    /// Set when adjacent peaks fail to separate (inter-peak minimum above
    /// 20 % of the peak maximum).
    pub overlap_warning: bool,
}

/// Integrate pulsed-correlation peaks over ±period/2 windows and form
/// g²(0) = central area / mean side area. The uncertainty is the relative
/// standard deviation of the side-peak areas.
pub fn g2_zero(
    h: &CorrelationHistogram,
    rep_period_ps: f64,
    n_side_peaks: usize,
) -> Result<G2Report> {
    if !(rep_period_ps > 0.0) {
        return Err(SimError::invalid("rep_period_ps", "must be > 0"));
    }
    if n_side_peaks < 3 {
        return Err(SimError::invalid("n_side_peaks", "need at least 3 side peaks"));
    }
    let span = h.half_bins as f64 * h.bin_ps;
    if span + h.bin_ps / 2.0 < (n_side_peaks as f64 + 0.5) * rep_period_ps {
        return Err(SimError::invalid(
            "window_ps",
            "histogram span too small for requested side peaks",
        ));
    }
    let n = n_side_peaks as i64;
    let mut areas = vec![0.0f64; (2 * n + 1) as usize];
    for (i, &c) in h.counts.iter().enumerate() {
        let center = h.bin_center_ps(i);
        let m = (center / rep_period_ps).round() as i64;
        if m.abs() <= n {
            areas[(m + n) as usize] += c as f64;
        }
    }
    let central_area = areas[n as usize];
    let side: Vec<f64> = areas
        .iter()
        .enumerate()
        .filter(|&(i, _)| i as i64 != n)
        .map(|(_, &a)| a)
        .collect();
    let mean = side.iter().sum::<f64>() / side.len() as f64;
    if mean <= 0.0 {
        return Err(SimError::DivisionByZero("mean side-peak area"));
    }
    let var = side.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / side.len() as f64;
    let g2 = central_area / mean;
    let sigma = var.sqrt() / mean * g2.max(f64::MIN_POSITIVE);
    // peak-separation check: compare counts near window boundaries with
    // the tallest bin
    let max_bin = h.counts.iter().copied().max().unwrap_or(0) as f64;
    let mut boundary_min = f64::INFINITY;
    for m in -n..n {
        let boundary = (m as f64 + 0.5) * rep_period_ps;
        let idx = ((boundary / h.bin_ps) + h.half_bins as f64).round() as usize;
        if idx < h.counts.len() {
            boundary_min = boundary_min.min(h.counts[idx] as f64);
        }
    }
    let overlap_warning = max_bin > 0.0 && boundary_min.is_finite() && boundary_min > 0.2 * max_bin;
    Ok(G2Report {
        g2_zero: g2,
        sigma,
        central_area,
        peak_areas: side,
        overlap_warning,
    })
}

/// Areas of the five central-cluster HOM peaks at -2Δt, -Δt, 0, +Δt, +2Δt,
/// each integrated over a ±Δt/2 window.
pub fn hom_peak_areas(
    h: &CorrelationHistogram,
    delta_t_ps: f64,
    _rep_period_ps: f64,
) -> Result<[f64; 5]> {
    if !(delta_t_ps > 0.0) {
        return Err(SimError::invalid("delta_t_ps", "must be > 0"));
    }
    // peak width estimated from the core of the outer (+2Δt) peak: the
    // Gaussian-equivalent sigma of the bins above half maximum. The
    // exponential tails always overlap somewhat at realistic arm delays;
    // the error fires only when even the peak cores fail to separate.
    let outer = slice_histogram(h, 2.0 * delta_t_ps, delta_t_ps);
    if let Some(width) = core_sigma(&outer) {
        if delta_t_ps < 3.0 * width {
            return Err(SimError::WindowOverlap(format!(
                "arm delay {delta_t_ps} ps < 3 x peak core width {width:.0} ps"
            )));
        }
    }
    let mut areas = [0.0f64; 5];
    for (i, &c) in h.counts.iter().enumerate() {
        let center = h.bin_center_ps(i);
        let m = (center / delta_t_ps).round() as i64;
        if m.abs() <= 2 {
            areas[(m + 2) as usize] += c as f64;
        }
    }
    Ok(areas)
}

/// Moment-based width of a histogram peak: the standard deviation of the
/// bins at or above half maximum. `None` when the peak is empty.
fn core_sigma(h: &LifetimeHistogram) -> Option<f64> {
    let peak = *h.counts.iter().max()?;
    if peak == 0 {
        return None;
    }
    let (mut sw, mut sx) = (0.0f64, 0.0f64);
    for (i, &c) in h.counts.iter().enumerate() {
        if c * 2 >= peak {
            sw += c as f64;
            sx += c as f64 * h.bin_center_ps(i);
        }
    }
    let mean = sx / sw;
    let mut sv = 0.0f64;
    for (i, &c) in h.counts.iter().enumerate() {
        if c * 2 >= peak {
            let d = h.bin_center_ps(i) - mean;
            sv += c as f64 * d * d;
        }
    }
    Some((sv / sw).sqrt().max(h.bin_ps))
}

/// Extract the sub-histogram covering `center ± half_span` as a
/// delay-zeroed decay histogram (for peak-width estimation).
fn slice_histogram(h: &CorrelationHistogram, center_ps: f64, span_ps: f64) -> LifetimeHistogram {
    let counts = h
        .counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| (h.bin_center_ps(i) - center_ps).abs() <= span_ps / 2.0)
        .map(|(_, &c)| c)
        .collect();
    LifetimeHistogram {
        bin_ps: h.bin_ps,
        counts,
    }
}

/// Peak-area ratio M = A₃ / (A₂ + A₄).
pub fn m_ratio(a2: f64, a3: f64, a4: f64) -> Result<f64> {
    if a2 + a4 <= 0.0 {
        return Err(SimError::DivisionByZero("A2 + A4"));
    }
    Ok(a3 / (a2 + a4))
}

/// Forward model for the central HOM peak-area ratio at two-photon
/// emission probability `g_star`, overlap `v`, beamsplitter `(r, t)`, and
/// residual distinguishability `epsilon`:
///
/// M = (1 + 2g★) / (2 (1 + g★)) − (1−ε)² r² t² V / ((1+g★)(r³t + r t³))
pub fn forward_m(g_star: f64, v: f64, r: f64, t: f64, epsilon: f64) -> f64 {
    let bound = (1.0 + 2.0 * g_star) / (2.0 * (1.0 + g_star));
    let e2 = (1.0 - epsilon) * (1.0 - epsilon);
    bound - e2 * r * r * t * t * v / ((1.0 + g_star) * (r.powi(3) * t + r * t.powi(3)))
}

/// Result of inverting the forward M model for the overlap V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VInversion {
    pub v: f64,
    /// M at V = 0: values below this certify two-photon interference.
    pub m_bound: f64,
    /// Set when the inverted V falls outside [0, 1].
    pub out_of_range: bool,
}

/// Invert the forward M model:
/// V = [ (1+2g★)/(2(1+g★)) − M ] (1+g★)(r³t + r t³) / ((1−ε)² r² t²).
pub fn invert_v(m: f64, g_star: f64, r: f64, t: f64, epsilon: f64) -> Result<VInversion> {
    require_finite("m", m)?;
    if g_star < 0.0 {
        return Err(SimError::invalid("g_star", "must be >= 0"));
    }
    if (r + t - 1.0).abs() > 1e-9 || !(0.0..=1.0).contains(&r) {
        return Err(SimError::invalid("beamsplitter", "r + t must equal 1"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SimError::invalid("epsilon", "must be in [0, 1]"));
    }
    if epsilon >= 1.0 {
        return Err(SimError::NoInterference);
    }
    if r == 0.0 || t == 0.0 {
        return Err(SimError::DivisionByZero("r^2 t^2"));
    }
    let m_bound = (1.0 + 2.0 * g_star) / (2.0 * (1.0 + g_star));
    let e2 = (1.0 - epsilon) * (1.0 - epsilon);
    let v = (m_bound - m) * (1.0 + g_star) * (r.powi(3) * t + r * t.powi(3)) / (e2 * r * r * t * t);
    Ok(VInversion {
        v,
        m_bound,
        out_of_range: !(0.0..=1.0).contains(&v),
    })
}

/// Full HOM analysis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub m: f64,
    pub g_star: f64,
    pub v: f64,
    /// Poisson uncertainty of the peak areas propagated through the
    /// inversion.
    pub v_sigma: f64,
    pub m_bound: f64,
    pub v_out_of_range: bool,
}

/// Assemble the HOM report from the five peak areas, propagating Poisson
/// counting errors through M and the V inversion.
pub fn hom_report(
    areas: [f64; 5],
    g_star: f64,
    r: f64,
    t: f64,
    epsilon: f64,
) -> Result<HomReport> {
    let [a1, a2, a3, a4, a5] = areas;
    if areas.iter().any(|&a| a < 0.0) {
        return Err(SimError::invalid("areas", "must be >= 0"));
    }
    let m = m_ratio(a2, a3, a4)?;
    let inv = invert_v(m, g_star, r, t, epsilon)?;
    let s24 = a2 + a4;
    let m_var = a3 / (s24 * s24) + a3 * a3 * (a2 + a4) / s24.powi(4);
    let e2 = (1.0 - epsilon) * (1.0 - epsilon);
    let dv_dm = (1.0 + g_star) * (r.powi(3) * t + r * t.powi(3)) / (e2 * r * r * t * t);
    Ok(HomReport {
        a1,
        a2,
        a3,
        a4,
        a5,
        m,
        g_star,
        v: inv.v,
        v_sigma: dv_dm * m_var.sqrt(),
        m_bound: inv.m_bound,
        v_out_of_range: inv.out_of_range,
    })
}

/// Cavity branch used when inverting the transmission dip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CavityBranch {
    #[default]
    Undercoupled,
    Overcoupled,
}

/// Taper-cavity coupling inferred from the on-resonance transmission dip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityReport {
    pub t_dip: f64,
    pub k: f64,
    pub eta: f64,
    pub branch: CavityBranch,
}

/// On-resonance transmission of a coupled cavity: T = ((1−K)/(1+K))².
pub fn cavity_transmission(k: f64) -> f64 {
    let x = (1.0 - k) / (1.0 + k);
    x * x
}

/// Invert the transmission dip for the coupling parameter K and the
/// out-coupling fraction η = 1/(1 + 1/K).
pub fn cavity_coupling(t_dip: f64, branch: CavityBranch) -> Result<CavityReport> {
    if !(0.0..=1.0).contains(&t_dip) {
        return Err(SimError::invalid("t_dip", "must be in [0, 1]"));
    }
    let s = t_dip.sqrt();
    let k = match branch {
        CavityBranch::Undercoupled => (1.0 - s) / (1.0 + s),
        CavityBranch::Overcoupled => {
            if s >= 1.0 {
                return Err(SimError::DivisionByZero("1 - sqrt(T)"));
            }
            (1.0 + s) / (1.0 - s)
        }
    };
    let eta = if k == 0.0 { 0.0 } else { 1.0 / (1.0 + 1.0 / k) };
    Ok(CavityReport {
        t_dip,
        k,
        eta,
        branch,
    })
}

/// Source brightness estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessReport {
    pub i_sat_cps: f64,
    pub rep_rate_hz: f64,
    /// Total setup detection efficiency (taper x filter x SPAD).
    pub zeta: f64,
    /// Source efficiency ξ = I_sat / (R_rep ζ).
    pub xi: f64,
    pub xi_sigma: Option<f64>,
}

/// Source efficiency from the saturated detected count rate:
/// ξ = I_sat / (R_rep · ζ). An optional count-rate standard deviation
/// propagates linearly.
pub fn brightness(
    i_sat_cps: f64,
    rep_rate_hz: f64,
    zeta: f64,
    i_sat_sigma_cps: Option<f64>,
) -> Result<BrightnessReport> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(SimError::invalid("zeta", "must be in (0, 1]"));
    }
    if !(rep_rate_hz > 0.0) {
        return Err(SimError::invalid("rep_rate_hz", "must be > 0"));
    }
    if i_sat_cps < 0.0 {
        return Err(SimError::invalid("i_sat_cps", "must be >= 0"));
    }
    Ok(BrightnessReport {
        i_sat_cps,
        rep_rate_hz,
        zeta,
        xi: i_sat_cps / (rep_rate_hz * zeta),
        xi_sigma: i_sat_sigma_cps.map(|s| s / (rep_rate_hz * zeta)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{correlate, TimeTag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn self_fit_recovers_lifetime() {
        let bin = 32.0;
        let counts: Vec<u64> = (0..400)
            .map(|i| {
                let t = (i as f64 + 0.5) * bin;
                (1e5 * (-t / 625.0).exp()).round() as u64
            })
            .collect();
        let h = LifetimeHistogram { bin_ps: bin, counts };
        let (t1, sigma) = fit_lifetime(&h).unwrap();
        assert!((t1 - 625.0).abs() < 6.25, "t1 = {t1}");
        assert!(sigma < 6.25);
    }

    #[test]
    fn fit_rejects_sparse_histograms() {
        let h = LifetimeHistogram {
            bin_ps: 32.0,
            counts: vec![20, 12, 8, 5, 2, 1, 0, 0],
        };
        assert!(matches!(
            fit_lifetime(&h),
            Err(SimError::InsufficientCounts(_))
        ));
    }

    #[test]
    fn inv_e_width_of_gaussian() {
        // intensity envelope exp(-(t-c)^2 / sigma^2) has 1/e full width
        // 2 sigma; sigma = 185 -> 370
        let bin = 8.0;
        let counts: Vec<u64> = (0..500)
            .map(|i| {
                let t = (i as f64 + 0.5) * bin;
                let x = (t - 2000.0) / 185.0;
                (1e6 * (-x * x).exp()).round() as u64
            })
            .collect();
        let h = LifetimeHistogram { bin_ps: bin, counts };
        let w = width_at_inv_e(&h).unwrap();
        assert!((w - 370.0).abs() < 10.0, "width = {w}");
    }

    fn poisson_tags(rate_per_ps: f64, duration_ps: f64, channel: u8, seed: u64) -> Vec<TimeTag> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = Exp::new(rate_per_ps).unwrap();
        let mut t = 0.0;
        let mut out = Vec::new();
        loop {
            t += exp.sample(&mut rng);
            if t > duration_ps {
                break;
            }
            out.push(TimeTag {
                ticks: (t / 4.0).round() as u64,
                channel,
            });
        }
        out
    }

    #[test]
    fn coherent_light_has_unit_g2() {
        let a = poisson_tags(2e-4, 5e8, 0, 1);
        let b = poisson_tags(2e-4, 5e8, 1, 2);
        let h = correlate(&a, &b, 512.0, 7.5 * 12_500.0).unwrap();
        let rep = g2_zero(&h, 12_500.0, 6).unwrap();
        assert!(
            (rep.g2_zero - 1.0).abs() < 4.0 * rep.sigma.max(0.01),
            "g2 = {} +/- {}",
            rep.g2_zero,
            rep.sigma
        );
        // flat histogram: the peak-overlap warning must trip
        assert!(rep.overlap_warning);
    }

    #[test]
    fn single_photon_stream_has_zero_g2() {
        // one photon per pulse randomly split between the two channels:
        // no same-pulse pairs, so the central peak is empty
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let delay = Exp::new(1.0 / 625.0f64).unwrap();
        for i in 0..200_000u64 {
            let t = i as f64 * 12_500.0 + delay.sample(&mut rng);
            let tag = TimeTag {
                ticks: (t / 4.0).round() as u64,
                channel: 0,
            };
            if rng.random::<bool>() {
                a.push(tag);
            } else {
                b.push(tag);
            }
        }
        let h = correlate(&a, &b, 512.0, 7.5 * 12_500.0).unwrap();
        let rep = g2_zero(&h, 12_500.0, 6).unwrap();
        assert!(rep.g2_zero < 0.01, "g2 = {}", rep.g2_zero);
        assert!(!rep.overlap_warning);
    }

    #[test]
    fn g2_requires_enough_span() {
        let h = CorrelationHistogram {
            bin_ps: 512.0,
            half_bins: 10,
            counts: vec![0; 21],
            rep_period_ps: None,
            n_periods: None,
        };
        assert!(g2_zero(&h, 12_500.0, 6).is_err());
    }

    #[test]
    fn m_ratio_basics() {
        assert_eq!(m_ratio(1.0, 1.0, 1.0).unwrap(), 0.5);
        assert!(matches!(
            m_ratio(0.0, 1.0, 0.0),
            Err(SimError::DivisionByZero(_))
        ));
    }

    #[test]
    fn v_inversion_paper_triples() {
        let cases = [
            (0.40, 0.16, 0.392, 0.569),
            (0.49, 0.29, 0.316, 0.612),
            (0.31, 0.20, 0.656, 0.583),
        ];
        for (m, g, v_expect, bound_expect) in cases {
            let inv = invert_v(m, g, 0.5, 0.5, 0.0).unwrap();
            assert!((inv.v - v_expect).abs() < 0.01, "V = {} vs {v_expect}", inv.v);
            assert!(
                (inv.m_bound - bound_expect).abs() < 0.005,
                "bound = {} vs {bound_expect}",
                inv.m_bound
            );
            assert!(!inv.out_of_range);
        }
    }

    #[test]
    fn balanced_inversion_reduces_to_linear_form() {
        // r = t = 1/2, eps = 0: V = (1 + 2g) - 2 M (1 + g)
        let (m, g) = (0.37, 0.22);
        let inv = invert_v(m, g, 0.5, 0.5, 0.0).unwrap();
        let linear = (1.0 + 2.0 * g) - 2.0 * m * (1.0 + g);
        assert!((inv.v - linear).abs() < 1e-12);
    }

    #[test]
    fn forward_invert_round_trip() {
        for &(g, v, r, eps) in &[
            (0.16, 0.39, 0.5, 0.0),
            (0.29, 0.32, 0.45, 0.1),
            (0.0, 1.0, 0.6, 0.0),
            (0.5, 0.2, 0.5, 0.3),
        ] {
            let m = forward_m(g, v, r, 1.0 - r, eps);
            let inv = invert_v(m, g, r, 1.0 - r, eps).unwrap();
            assert!((inv.v - v).abs() < 1e-12);
        }
    }

    #[test]
    fn inversion_rejects_distinguishable_setup() {
        assert!(matches!(
            invert_v(0.5, 0.1, 0.5, 0.5, 1.0),
            Err(SimError::NoInterference)
        ));
    }

    #[test]
    fn hom_report_propagates_errors() {
        let areas = [1000.0, 1000.0, 490.0, 1000.0, 1000.0];
        let rep = hom_report(areas, 0.29, 0.5, 0.5, 0.0).unwrap();
        assert!((rep.m - 0.245).abs() < 1e-12);
        assert!(rep.v_sigma > 0.0 && rep.v_sigma < 0.1);
        assert!(!rep.v_out_of_range);
    }

    #[test]
    fn cavity_coupling_cases() {
        let r = cavity_coupling(1.0, CavityBranch::Undercoupled).unwrap();
        assert_eq!((r.k, r.eta), (0.0, 0.0));
        let r = cavity_coupling(0.0, CavityBranch::Undercoupled).unwrap();
        assert_eq!(r.k, 1.0);
        assert!((r.eta - 0.5).abs() < 1e-15);
        // paper operating point: K = 0.33
        let t = cavity_transmission(0.33);
        assert!((t - 0.254).abs() < 0.001);
        let r = cavity_coupling(t, CavityBranch::Undercoupled).unwrap();
        assert!((r.k - 0.33).abs() < 1e-12);
        assert!((r.eta - 0.248).abs() < 0.002);
    }

    #[test]
    fn cavity_round_trip_both_branches() {
        for &k in &[0.05, 0.33, 0.9, 1.5, 4.0] {
            let t = cavity_transmission(k);
            let branch = if k <= 1.0 {
                CavityBranch::Undercoupled
            } else {
                CavityBranch::Overcoupled
            };
            let r = cavity_coupling(t, branch).unwrap();
            assert!((r.k - k).abs() < 1e-12, "k = {k} -> {}", r.k);
        }
    }

    #[test]
    fn brightness_round_trip() {
        assert_eq!(brightness(0.0, 8e7, 0.03125, None).unwrap().xi, 0.0);
        // zeta = 0.5 * 0.5 * 0.125; xi = 0.119 at 80 MHz -> 297 500 cps
        let i_sat: f64 = 0.119 * 8e7 * 0.03125;
        assert!((i_sat - 297_500.0).abs() < 1e-6);
        let rep = brightness(i_sat, 8e7, 0.03125, Some(5_000.0)).unwrap();
        assert!((rep.xi - 0.119).abs() < 1e-12);
        assert!((rep.xi_sigma.unwrap() - 0.002).abs() < 1e-12);
        // two channels combine by addition
        assert!((0.119 + 0.102 - 0.221f64).abs() < 1e-12);
    }

    #[test]
    fn report_json_field_names() {
        let rep = hom_report([1.0, 2.0, 1.0, 2.0, 1.0], 0.2, 0.5, 0.5, 0.0).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["a1", "a2", "a3", "a4", "a5", "m", "v", "v_sigma", "m_bound"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let g2 = G2Report {
            g2_zero: 0.16,
            sigma: 0.01,
            central_area: 1.0,
            peak_areas: vec![],
            overlap_warning: false,
        };
        let json = serde_json::to_value(g2).unwrap();
        assert!(json.get("g2_zero").is_some() && json.get("sigma").is_some());
        let cav = cavity_coupling(0.25, CavityBranch::Undercoupled).unwrap();
        let json = serde_json::to_value(cav).unwrap();
        assert!(json.get("k").is_some() && json.get("eta").is_some());
        let b = brightness(1000.0, 8e7, 0.03, None).unwrap();
        assert!(serde_json::to_value(b).unwrap().get("xi").is_some());
    }
}
