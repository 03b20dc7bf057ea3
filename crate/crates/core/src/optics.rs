//! Passive optics: beamsplitters, the unbalanced Mach-Zehnder
//! interferometer for two-photon interference, and the mean wavepacket
//! overlap integral that sets the interference contrast.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::emitter::{GateWindow, PhotonRecord};
use crate::numeric::integrate;
use crate::{require_finite, Result, SimError};

/// Lossless beamsplitter with intensity reflectance `r` and transmittance
/// `t`; `r + t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterSpec {
    pub r: f64,
    pub t: f64,
}

impl BeamsplitterSpec {
    pub fn balanced() -> Self {
        BeamsplitterSpec { r: 0.5, t: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("beamsplitter.r", self.r)?;
        require_finite("beamsplitter.t", self.t)?;
        if !(0.0..=1.0).contains(&self.r) || !(0.0..=1.0).contains(&self.t) {
            return Err(SimError::invalid("beamsplitter", "r and t must be in [0, 1]"));
        }
        if (self.r + self.t - 1.0).abs() > 1e-9 {
            return Err(SimError::invalid("beamsplitter", "r + t must equal 1"));
        }
        Ok(())
    }
}

/// Unbalanced Mach-Zehnder configuration for two-photon interference:
/// long-arm delay `delta_t_ps` (matched to the excitation pulse-pair
/// separation), residual distinguishability `epsilon`, and the two
/// beamsplitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomConfig {
    pub delta_t_ps: f64,
    pub epsilon: f64,
    pub bs1: BeamsplitterSpec,
    pub bs2: BeamsplitterSpec,
}

impl HomConfig {
    pub fn validate(&self) -> Result<()> {
        require_finite("hom.delta_t_ps", self.delta_t_ps)?;
        if self.delta_t_ps <= 0.0 {
            return Err(SimError::invalid("hom.delta_t_ps", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(SimError::invalid("hom.epsilon", "must be in [0, 1]"));
        }
        self.bs1.validate()?;
        self.bs2.validate()?;
        Ok(())
    }
}

/// A single-photon wavepacket as seen at the interference beamsplitter:
/// exponential intensity envelope starting at `start_ps`, optionally
/// apodized by a Gaussian gate window, with pure-dephasing rate
/// `alpha_per_ps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatedWavepacket {
    pub start_ps: f64,
    pub t1_ps: f64,
    pub alpha_per_ps: f64,
    pub gate_window: Option<GateWindow>,
}

impl GatedWavepacket {
    fn envelope(&self, t: f64) -> f64 {
        if t < self.start_ps {
            return 0.0;
        }
        let mut q = (-(t - self.start_ps) / self.t1_ps).exp();
        if let Some(g) = self.gate_window {
            let x = (t - g.center_ps) / g.sigma_ps;
            q *= (-x * x).exp();
        }
        q
    }

    /// Integration domain where the intensity envelope is non-negligible.
    fn support(&self) -> (f64, f64) {
        let mut lo = self.start_ps;
        let mut hi = self.start_ps + 45.0 * self.t1_ps;
        if let Some(g) = self.gate_window {
            lo = lo.max(g.center_ps - 12.0 * g.sigma_ps);
            hi = hi.min(g.center_ps + 12.0 * g.sigma_ps);
        }
        (lo, hi)
    }
}

/// Mean two-photon wavepacket overlap
///
/// V = ∬ p̃_a(t) p̃_b(t') exp(-(α_a + α_b) |t - t'|) dt dt'
///
/// with p̃ the normalized intensity envelopes. Evaluated by nested adaptive
/// quadrature to a relative tolerance of 1e-6.
pub fn mean_overlap(a: &GatedWavepacket, b: &GatedWavepacket) -> Result<f64> {
    let (lo_a, hi_a) = a.support();
    let (lo_b, hi_b) = b.support();
    if hi_a <= lo_a || hi_b <= lo_b {
        return Err(SimError::NonNormalizableEnvelope);
    }
    let norm_a = integrate(|t| a.envelope(t), lo_a, hi_a, 1e-8)?;
    let norm_b = integrate(|t| b.envelope(t), lo_b, hi_b, 1e-8)?;
    if !(norm_a > 1e-290) || !(norm_b > 1e-290) {
        return Err(SimError::NonNormalizableEnvelope);
    }
    let alpha = a.alpha_per_ps + b.alpha_per_ps;
    let v = integrate(
        |t| {
            let qa = a.envelope(t);
            if qa == 0.0 {
                return 0.0;
            }
            // the |t - t'| kernel has a kink at t' = t; split there
            let mid = t.clamp(lo_b, hi_b);
            let kernel = |tp: f64| b.envelope(tp) * (-alpha * (t - tp).abs()).exp();
            let inner = integrate(kernel, lo_b, mid, 1e-8).unwrap_or(0.0)
                + integrate(kernel, mid, hi_b, 1e-8).unwrap_or(0.0);
            qa * inner
        },
        lo_a,
        hi_a,
        1e-6,
    )?;
    Ok((v / (norm_a * norm_b)).clamp(0.0, 1.0))
}

/// Route each photon independently through one beamsplitter: transmitted
/// (channel a) with probability `bs.t`, reflected (channel b) otherwise.
/// Returns the sorted arrival-time lists for the two output channels.
pub fn hbt_route(
    photons: &[PhotonRecord],
    bs: &BeamsplitterSpec,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    bs.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    for p in photons {
        if rng.random::<f64>() < bs.t {
            out_a.push(p.emit_time_ps);
        } else {
            out_b.push(p.emit_time_ps);
        }
    }
    out_a.sort_by(f64::total_cmp);
    out_b.sort_by(f64::total_cmp);
    Ok((out_a, out_b))
}

/// Cache key for the pair overlap: relative geometry of the two wavepackets
/// quantized to 0.01 ps (V is translation invariant).
#[derive(PartialEq, Eq, Hash)]
struct OverlapKey {
    rel_start: i64,
    t1_a: u64,
    t1_b: u64,
    alpha_sum: u64,
    gate_a: Option<(i64, u64)>,
    gate_b: Option<(i64, u64)>,
}

fn quantize(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

impl OverlapKey {
    fn new(a: &GatedWavepacket, b: &GatedWavepacket) -> Self {
        let gate_rel = |wp: &GatedWavepacket| {
            wp.gate_window
                .map(|g| (quantize(g.center_ps - wp.start_ps), g.sigma_ps.to_bits()))
        };
        OverlapKey {
            rel_start: quantize(b.start_ps - a.start_ps),
            t1_a: a.t1_ps.to_bits(),
            t1_b: b.t1_ps.to_bits(),
            alpha_sum: (a.alpha_per_ps + b.alpha_per_ps).to_bits(),
            gate_a: gate_rel(a),
            gate_b: gate_rel(b),
        }
    }
}

/// Wavepacket of `p` delayed by `shift_ps` (an interferometer arm delays
/// the whole envelope, gate window included).
fn shifted_wavepacket(p: &PhotonRecord, shift_ps: f64) -> GatedWavepacket {
    GatedWavepacket {
        start_ps: p.pulse_time_ps + shift_ps,
        t1_ps: p.wavepacket.t1_ps,
        alpha_per_ps: p.wavepacket.alpha_per_ps,
        gate_window: p.gate_window.map(|g| GateWindow {
            center_ps: g.center_ps + shift_ps,
            sigma_ps: g.sigma_ps,
        }),
    }
}

/// Route a photon stream through the unbalanced Mach-Zehnder.
///
/// Each photon takes the long arm (delay `delta_t_ps`) with probability
/// `bs1.r`. At the second beamsplitter, a photon from the early pulse of a
/// pair that took the long arm overlaps with the photon from the late pulse
/// that took the short arm; such pairs interfere with contrast
/// `(1 - epsilon)^2 V`, where V is the mean wavepacket overlap. All other
/// photons route independently.
///
/// Returns the sorted arrival-time lists of the two output channels.
pub fn hom_route(
    photons: &[PhotonRecord],
    cfg: &HomConfig,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = photons.len();

    // first beamsplitter: choose arms, compute arrival times at bs2
    let long_arm: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < cfg.bs1.r).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let arrival =
        |i: usize| photons[i].emit_time_ps + if long_arm[i] { cfg.delta_t_ps } else { 0.0 };
    order.sort_by(|&i, &j| arrival(i).total_cmp(&arrival(j)));

    // pair up photons that meet at bs2 in the intended combination: early
    // pulse via long arm with late pulse of the same pair via short arm.
    // The interference contrast applied below is the ensemble-mean overlap,
    // which already averages over emission-time jitter, so every intended
    // combination pairs regardless of the realized arrival gap.
    let mut partner: Vec<Option<usize>> = vec![None; n];
    {
        let mut by_period: HashMap<u64, (Vec<usize>, Vec<usize>)> = HashMap::new();
        for &i in &order {
            let (early, late) = by_period.entry(photons[i].pulse_index / 2).or_default();
            if photons[i].pulse_index.is_multiple_of(2) {
                if long_arm[i] {
                    early.push(i);
                }
            } else if !long_arm[i] {
                late.push(i);
            }
        }
        for (early, late) in by_period.values() {
            // candidate lists inherit arrival order; match greedily
            for (&e, &l) in early.iter().zip(late.iter()) {
                partner[e] = Some(l);
                partner[l] = Some(e);
            }
        }
    }

    let (r, t) = (cfg.bs2.r, cfg.bs2.t);
    let dist = (1.0 - cfg.epsilon) * (1.0 - cfg.epsilon);
    let mut overlap_cache: HashMap<OverlapKey, f64> = HashMap::new();
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    let mut emitted: Vec<bool> = vec![false; n];

    for &i in &order {
        if emitted[i] {
            continue;
        }
        emitted[i] = true;
        match partner[i] {
            Some(j) => {
                emitted[j] = true;
                let (e, l) = if photons[i].pulse_index.is_multiple_of(2) { (i, j) } else { (j, i) };
                let wp_e = shifted_wavepacket(&photons[e], cfg.delta_t_ps);
                let wp_l = shifted_wavepacket(&photons[l], 0.0);
                let key = OverlapKey::new(&wp_e, &wp_l);
                let v = match overlap_cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = mean_overlap(&wp_e, &wp_l)?;
                        overlap_cache.insert(key, v);
                        v
                    }
                };
                let contrast = dist * v;
                let p_split = r * r + t * t - 2.0 * r * t * contrast;
                let p_both_a = r * t * (1.0 + contrast);
                let u = rng.random::<f64>();
                // the late photon took the short arm: it entered input 0,
                // the early photon input 1
                if u < p_split {
                    // within the split outcome, input 0 exits to a with
                    // the independent-particle weight t^2 : r^2
                    if rng.random::<f64>() < t * t / (t * t + r * r) {
                        out_a.push(arrival(l));
                        out_b.push(arrival(e));
                    } else {
                        out_a.push(arrival(e));
                        out_b.push(arrival(l));
                    }
                } else if u < p_split + p_both_a {
                    out_a.push(arrival(e));
                    out_a.push(arrival(l));
                } else {
                    out_b.push(arrival(e));
                    out_b.push(arrival(l));
                }
            }
            None => {
                // unpaired photon routes independently; the exit
                // probability depends on which input it entered
                let p_a = if long_arm[i] { r } else { t };
                if rng.random::<f64>() < p_a {
                    out_a.push(arrival(i));
                } else {
                    out_b.push(arrival(i));
                }
            }
        }
    }
    out_a.sort_by(f64::total_cmp);
    out_b.sort_by(f64::total_cmp);
    Ok((out_a, out_b))
}
