//! Synchronized electro-optic amplitude modulator: stochastic per-photon
//! gating plus the analytic transmission theory (gate/emission overlap
//! integral, its closed form, and delay optimization).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::emitter::{GateWindow, PhotonRecord};
use crate::numeric::{erfc, erfcx, fmt_sig6, golden_max, integrate};
use crate::{Result, SimError};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Temporal profile of the intensity gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateProfile {
    Gaussian,
    Rectangular,
}

/// Electro-optic gate parameters. `t_mod_ps` is the full width of the
/// intensity gate at its 1/e point, i.e. 2 sigma of the Gaussian profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub t_mod_ps: f64,
    /// Gate-center offset relative to the excitation pulse, ps.
    pub delay_ps: f64,
    /// Off-state suppression in dB (> 0; may be infinite).
    pub extinction_db: f64,
    /// Broadband insertion loss in dB (>= 0; may be infinite).
    pub insertion_loss_db: f64,
    pub profile: GateProfile,
}

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_mod_ps > 0.0) || !self.t_mod_ps.is_finite() {
            return Err(SimError::invalid("gate.t_mod_ps", "must be finite and > 0"));
        }
        if !self.delay_ps.is_finite() {
            return Err(SimError::invalid("gate.delay_ps", "must be finite"));
        }
        if !(self.extinction_db > 0.0) {
            return Err(SimError::invalid("gate.extinction_db", "must be > 0"));
        }
        if !(self.insertion_loss_db >= 0.0) {
            return Err(SimError::invalid("gate.insertion_loss_db", "must be >= 0"));
        }
        Ok(())
    }

    /// Gaussian sigma of the intensity profile: T_mod / 2.
    pub fn sigma_ps(&self) -> f64 {
        self.t_mod_ps / 2.0
    }

    fn loss_factor(&self) -> f64 {
        if self.insertion_loss_db.is_finite() {
            10f64.powf(-self.insertion_loss_db / 10.0)
        } else {
            0.0
        }
    }

    fn extinction_floor(&self) -> f64 {
        if self.extinction_db.is_finite() {
            10f64.powf(-self.extinction_db / 10.0)
        } else {
            0.0
        }
    }

    /// Intensity transmission probability at time `t_ps` for a photon from
    /// the pulse at `pulse_time_ps`. Bounded between the extinction floor
    /// and the insertion-loss ceiling.
    pub fn value(&self, t_ps: f64, pulse_time_ps: f64) -> f64 {
        let x = t_ps - pulse_time_ps - self.delay_ps;
        let sigma = self.sigma_ps();
        let shape = match self.profile {
            GateProfile::Gaussian => (-(x / sigma) * (x / sigma)).exp(),
            GateProfile::Rectangular => {
                if x.abs() <= sigma {
                    1.0
                } else {
                    0.0
                }
            }
        };
        self.loss_factor() * shape.max(self.extinction_floor())
    }
}

/// Gate a photon stream: each photon independently survives with the
/// transmission probability at its emission time. Survivors carry the gate
/// window for the downstream overlap computation.
pub fn apply_gate(gate: &GateSpec, photons: &[PhotonRecord], seed: u64) -> Result<Vec<PhotonRecord>> {
    gate.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = match gate.profile {
        GateProfile::Gaussian => Some(gate.sigma_ps()),
        GateProfile::Rectangular => None,
    };
    let mut out = Vec::with_capacity(photons.len());
    for p in photons {
        let pr = gate.value(p.emit_time_ps, p.pulse_time_ps);
        if rng.random::<f64>() < pr {
            let mut kept = *p;
            kept.gate_window = window.map(|sigma_ps| GateWindow {
                center_ps: p.pulse_time_ps + gate.delay_ps,
                sigma_ps,
            });
            out.push(kept);
        }
    }
    Ok(out)
}

/// Closed-form transmitted fraction of an exponential wavepacket (lifetime
/// `t1_ps`) through a Gaussian intensity gate of full 1/e width `t_mod_ps`
/// centered `delay_ps` after the excitation pulse.
///
/// f = (a s sqrt(pi)/2) exp(a^2 s^2/4 - a d) erfc(a s/2 - d/s),
/// with a = 1/T1 and s = T_mod/2. The scaled form with erfcx is used when
/// the erfc argument is large.
pub fn closed_form_transmission(t1_ps: f64, t_mod_ps: f64, delay_ps: f64) -> f64 {
    let a = 1.0 / t1_ps;
    let s = t_mod_ps / 2.0;
    let u = a * s / 2.0 - delay_ps / s;
    let pref = a * s * SQRT_PI / 2.0;
    if u <= 8.0 {
        pref * (a * a * s * s / 4.0 - a * delay_ps).exp() * erfc(u)
    } else {
        // exp(a^2 s^2/4 - a d - u^2) = exp(-(d/s)^2)
        pref * (-(delay_ps / s) * (delay_ps / s)).exp() * erfcx(u)
    }
}

/// Transmitted fraction by adaptive quadrature of the emission/gate overlap
/// integral (relative tolerance 1e-8), checked against the closed form to
/// 1e-6.
pub fn analytic_transmission(t1_ps: f64, t_mod_ps: f64, delay_ps: f64) -> Result<f64> {
    if !(t1_ps > 0.0) || !(t_mod_ps > 0.0) {
        return Err(SimError::invalid("transmission", "t1_ps and t_mod_ps must be > 0"));
    }
    let a = 1.0 / t1_ps;
    let s = t_mod_ps / 2.0;
    let hi = (delay_ps + 10.0 * s).max(10.0 * s);
    let q = integrate(
        |t| a * (-a * t).exp() * (-((t - delay_ps) / s) * ((t - delay_ps) / s)).exp(),
        0.0,
        hi,
        1e-8,
    )?;
    let closed = closed_form_transmission(t1_ps, t_mod_ps, delay_ps);
    if (q - closed).abs() > 1e-6 * closed.max(1e-9) {
        return Err(SimError::ClosedFormMismatch {
            quadrature: q,
            closed,
        });
    }
    Ok(q)
}

/// Maximize the transmitted fraction over the gate delay. Bracketed
/// golden-section search on [-2 T_mod, T1 + 2 T_mod] to 0.1 ps; the result
/// is checked for a local maximum.
pub fn optimal_delay(t1_ps: f64, t_mod_ps: f64) -> Result<(f64, f64)> {
    if !(t1_ps > 0.0) || !(t_mod_ps > 0.0) {
        return Err(SimError::invalid("optimal_delay", "inputs must be > 0"));
    }
    let (d, f) = golden_max(
        |d| closed_form_transmission(t1_ps, t_mod_ps, d),
        -2.0 * t_mod_ps,
        t1_ps + 2.0 * t_mod_ps,
        0.1,
    );
    let h = 1.0;
    if closed_form_transmission(t1_ps, t_mod_ps, d - h) > f + 1e-12
        || closed_form_transmission(t1_ps, t_mod_ps, d + h) > f + 1e-12
    {
        return Err(SimError::invalid(
            "optimal_delay",
            "transmission not locally maximal at search result",
        ));
    }
    Ok((d, f))
}

/// One point of a transmission curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t_mod_ps: f64,
    pub f_max: f64,
    pub f_with_loss: f64,
    pub delay_ps: f64,
}

/// Optimal-delay transmission versus gate width for one lifetime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionCurve {
    pub t1_ps: f64,
    pub insertion_loss_db: f64,
    pub points: Vec<CurvePoint>,
}

/// Tabulate optimal transmissions over a gate-width grid, one curve per
/// lifetime. Grid points are evaluated in parallel; output order follows
/// the input grids.
pub fn transmission_curve(
    t1_list: &[f64],
    t_mod_grid: &[f64],
    insertion_loss_db: f64,
) -> Result<Vec<TransmissionCurve>> {
    if t1_list.is_empty() || t_mod_grid.is_empty() {
        return Err(SimError::invalid("transmission_curve", "empty grid"));
    }
    let loss = 10f64.powf(-insertion_loss_db / 10.0);
    t1_list
        .iter()
        .map(|&t1| {
            let points = t_mod_grid
                .par_iter()
                .map(|&tm| {
                    let (delay_ps, f_max) = optimal_delay(t1, tm)?;
                    Ok(CurvePoint {
                        t_mod_ps: tm,
                        f_max,
                        f_with_loss: f_max * loss,
                        delay_ps,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TransmissionCurve {
                t1_ps: t1,
                insertion_loss_db,
                points,
            })
        })
        .collect()
}

/// CSV export: `t_mod_ps,f_max,f_with_loss,delay_ps`, six significant
/// digits. Multiple curves are concatenated with a `t1_ps` column prefix.
pub fn write_curve_csv<W: Write>(curves: &[TransmissionCurve], mut w: W) -> Result<()> {
    let multi = curves.len() > 1;
    if multi {
        writeln!(w, "t1_ps,t_mod_ps,f_max,f_with_loss,delay_ps")?;
    } else {
        writeln!(w, "t_mod_ps,f_max,f_with_loss,delay_ps")?;
    }
    for c in curves {
        for p in &c.points {
            if multi {
                write!(w, "{},", fmt_sig6(c.t1_ps))?;
            }
            writeln!(
                w,
                "{},{},{},{}",
                fmt_sig6(p.t_mod_ps),
                fmt_sig6(p.f_max),
                fmt_sig6(p.f_with_loss),
                fmt_sig6(p.delay_ps)
            )?;
        }
    }
    Ok(())
}
