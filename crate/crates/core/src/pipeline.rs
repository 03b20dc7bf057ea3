//! Scenario configuration and end-to-end runs: emitter → optional gate →
//! interferometer → detectors → correlator → analysis report, plus the
//! parameter sweeps used for figure-style tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::analysis::{
    g2_zero, hom_peak_areas, hom_report, G2Report, HomReport,
};
use crate::detector::{
    correlate, detect, start_stop_histogram, CorrelationHistogram, LifetimeHistogram, SpadSpec,
    TcspcConfig, TimeTag,
};
use crate::emitter::{sample_emission, EmitterSpec, PulsePattern, PumpConfig};
use crate::gate::{closed_form_transmission, optimal_delay, apply_gate, GateSpec};
use crate::numeric::{derive_seed, fmt_sig6};
use crate::optics::{hbt_route, hom_route, BeamsplitterSpec, HomConfig};
use crate::{Result, SimError};

const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_n_side_peaks() -> usize {
    6
}

/// Interferometer selection for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interferometer {
    Hbt { bs: BeamsplitterSpec },
    Hom(HomConfig),
}

/// Analysis stage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    /// Correlation window half-span, ps.
    pub window_ps: f64,
    #[serde(default = "default_n_side_peaks")]
    pub n_side_peaks: usize,
    /// Two-photon emission probability fed to the HOM inversion
    /// (typically the g²(0) of a matching HBT run).
    #[serde(default)]
    pub g_star: Option<f64>,
}

/// Optional output file paths for batch runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default)]
    pub tags: Option<String>,
    #[serde(default)]
    pub histogram: Option<String>,
    #[serde(default)]
    pub report: Option<String>,
}

/// Complete, self-contained description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub emitter: EmitterSpec,
    pub pump: PumpConfig,
    #[serde(default)]
    pub gate: Option<GateSpec>,
    pub interferometer: Interferometer,
    pub detector_a: SpadSpec,
    pub detector_b: SpadSpec,
    pub tcspc: TcspcConfig,
    pub analysis: AnalysisParams,
    #[serde(default)]
    pub outputs: Option<OutputPaths>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SimError::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}"),
            ));
        }
        self.emitter.validate()?;
        self.pump.validate()?;
        if let Some(g) = &self.gate {
            g.validate()?;
            if g.delay_ps.abs() > self.pump.period_ps() {
                return Err(SimError::invalid(
                    "gate.delay_ps",
                    "gate delay exceeds one repetition period",
                ));
            }
        }
        match &self.interferometer {
            Interferometer::Hbt { bs } => bs.validate()?,
            Interferometer::Hom(cfg) => {
                cfg.validate()?;
                match self.pump.pulse_pattern {
                    PulsePattern::Pair { dt_ps } if (dt_ps - cfg.delta_t_ps).abs() < 1e-9 => {}
                    PulsePattern::Pair { dt_ps } => {
                        return Err(SimError::invalid(
                            "pump.pulse_pattern.dt_ps",
                            format!(
                                "pulse-pair separation {dt_ps} ps must match interferometer.delta_t_ps {}",
                                cfg.delta_t_ps
                            ),
                        ));
                    }
                    PulsePattern::Single => {
                        return Err(SimError::invalid(
                            "pump.pulse_pattern",
                            "hom interferometer requires the pair pulse pattern",
                        ));
                    }
                }
            }
        }
        self.detector_a.validate()?;
        self.detector_b.validate()?;
        self.tcspc.validate()?;
        if !(self.analysis.window_ps > 0.0) {
            return Err(SimError::invalid("analysis.window_ps", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-stage RNG streams derived from the scenario seed.
mod stream {
    pub const EMITTER: u64 = 1;
    pub const GATE: u64 = 2;
    pub const ROUTE: u64 = 3;
    pub const DETECTOR_A: u64 = 4;
    pub const DETECTOR_B: u64 = 5;
}

/// Analysis result of a run, matching the interferometer kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    G2(G2Report),
    Hom(HomReport),
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub tags_a: Vec<TimeTag>,
    pub tags_b: Vec<TimeTag>,
    pub correlation: CorrelationHistogram,
    pub report: Report,
}

/// Execute a scenario end to end. Fully deterministic: the scenario
/// (including its seed) fixes every output bit.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let seed = scenario.pump.seed;
    let mut pump = scenario.pump.clone();
    pump.seed = derive_seed(seed, stream::EMITTER);
    let photons = sample_emission(&scenario.emitter, &pump)?;
    let photons = match &scenario.gate {
        Some(g) => apply_gate(g, &photons, derive_seed(seed, stream::GATE))?,
        None => photons,
    };
    let (times_a, times_b) = match &scenario.interferometer {
        Interferometer::Hbt { bs } => hbt_route(&photons, bs, derive_seed(seed, stream::ROUTE))?,
        Interferometer::Hom(cfg) => hom_route(&photons, cfg, derive_seed(seed, stream::ROUTE))?,
    };
    let tags_a = detect(
        &times_a,
        &scenario.detector_a,
        0,
        derive_seed(seed, stream::DETECTOR_A),
    )?;
    let tags_b = detect(
        &times_b,
        &scenario.detector_b,
        1,
        derive_seed(seed, stream::DETECTOR_B),
    )?;
    let mut correlation = correlate(
        &tags_a,
        &tags_b,
        scenario.tcspc.bin_ps,
        scenario.analysis.window_ps,
    )?;
    correlation.rep_period_ps = Some(scenario.pump.period_ps());
    correlation.n_periods = Some(scenario.pump.n_periods);
    let report = match &scenario.interferometer {
        Interferometer::Hbt { .. } => Report::G2(g2_zero(
            &correlation,
            scenario.pump.period_ps(),
            scenario.analysis.n_side_peaks,
        )?),
        Interferometer::Hom(cfg) => {
            let g_star = scenario.analysis.g_star.ok_or_else(|| {
                SimError::invalid("analysis.g_star", "required for hom analysis")
            })?;
            let areas = hom_peak_areas(&correlation, cfg.delta_t_ps, scenario.pump.period_ps())?;
            Report::Hom(hom_report(
                areas,
                g_star,
                cfg.bs2.r,
                cfg.bs2.t,
                cfg.epsilon,
            )?)
        }
    };
    Ok(RunResult {
        tags_a,
        tags_b,
        correlation,
        report,
    })
}

/// Start-stop lifetime trace of a scenario's (optionally gated) emission,
/// recorded on detector A with the excitation pulses as triggers.
pub fn run_lifetime(scenario: &Scenario) -> Result<LifetimeHistogram> {
    scenario.validate()?;
    let seed = scenario.pump.seed;
    let mut pump = scenario.pump.clone();
    pump.seed = derive_seed(seed, stream::EMITTER);
    let photons = sample_emission(&scenario.emitter, &pump)?;
    let photons = match &scenario.gate {
        Some(g) => apply_gate(g, &photons, derive_seed(seed, stream::GATE))?,
        None => photons,
    };
    let times: Vec<f64> = photons.iter().map(|p| p.emit_time_ps).collect();
    let tags = detect(
        &times,
        &scenario.detector_a,
        0,
        derive_seed(seed, stream::DETECTOR_A),
    )?;
    let triggers: Vec<f64> = (0..scenario.pump.n_periods)
        .map(|k| k as f64 * scenario.pump.period_ps())
        .collect();
    start_stop_histogram(&triggers, &tags, scenario.tcspc.bin_ps)
}

/// One row of a pump-power sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerPoint {
    pub power_rel: f64,
    pub g2_zero: f64,
    pub sigma: f64,
}

/// g²(0) versus relative pump power. Each grid point runs with seed
/// `base seed + grid index`; points execute in parallel, rows keep grid
/// order.
pub fn sweep_power(scenario: &Scenario, grid: &[f64]) -> Result<Vec<PowerPoint>> {
    if grid.is_empty() {
        return Err(SimError::invalid("grid", "must be nonempty"));
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut s = scenario.clone();
            s.pump.power_rel = p;
            s.pump.seed = scenario.pump.seed + i as u64;
            match run(&s)?.report {
                Report::G2(r) => Ok(PowerPoint {
                    power_rel: p,
                    g2_zero: r.g2_zero,
                    sigma: r.sigma,
                }),
                Report::Hom(_) => Err(SimError::invalid(
                    "interferometer",
                    "power sweep requires an hbt scenario",
                )),
            }
        })
        .collect()
}

/// One row of a gate-width sweep. `t_mod_ps` is `None` for the ungated
/// reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TmodPoint {
    pub t_mod_ps: Option<f64>,
    pub g2_zero: f64,
    pub sigma: f64,
    /// Analytic transmission at the optimal delay including insertion
    /// loss (1 for the ungated point).
    pub throughput: f64,
}

/// g²(0) versus gate width. Each gated point re-optimizes the gate delay
/// for its width; seeds follow `base + grid index`.
pub fn sweep_t_mod(scenario: &Scenario, grid: &[Option<f64>]) -> Result<Vec<TmodPoint>> {
    if grid.is_empty() {
        return Err(SimError::invalid("grid", "must be nonempty"));
    }
    let template_gate = scenario.gate.ok_or_else(|| {
        SimError::invalid("gate", "t_mod sweep requires a gate in the scenario")
    })?;
    grid.par_iter()
        .enumerate()
        .map(|(i, &t_mod)| {
            let mut s = scenario.clone();
            s.pump.seed = scenario.pump.seed + i as u64;
            let throughput = match t_mod {
                Some(tm) => {
                    let (delay, f_max) = optimal_delay(scenario.emitter.t1_ps, tm)?;
                    s.gate = Some(GateSpec {
                        t_mod_ps: tm,
                        delay_ps: delay,
                        ..template_gate
                    });
                    f_max * 10f64.powf(-template_gate.insertion_loss_db / 10.0)
                }
                None => {
                    s.gate = None;
                    1.0
                }
            };
            match run(&s)?.report {
                Report::G2(r) => Ok(TmodPoint {
                    t_mod_ps: t_mod,
                    g2_zero: r.g2_zero,
                    sigma: r.sigma,
                    throughput,
                }),
                Report::Hom(_) => Err(SimError::invalid(
                    "interferometer",
                    "t_mod sweep requires an hbt scenario",
                )),
            }
        })
        .collect()
}

/// One row of a repetition-rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepRatePoint {
    pub rep_rate_hz: f64,
    pub counts_per_s: f64,
}

/// Detected count rate versus repetition rate (should scale near-linearly
/// while gating keeps inter-pulse background suppressed).
pub fn sweep_rep_rate(scenario: &Scenario, grid: &[f64]) -> Result<Vec<RepRatePoint>> {
    if grid.is_empty() {
        return Err(SimError::invalid("grid", "must be nonempty"));
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, &rate)| {
            let mut s = scenario.clone();
            s.pump.rep_rate_hz = rate;
            s.pump.seed = scenario.pump.seed + i as u64;
            let result = run(&s)?;
            let duration_s = s.pump.n_periods as f64 * s.pump.period_ps() * 1e-12;
            let counts = (result.tags_a.len() + result.tags_b.len()) as f64;
            Ok(RepRatePoint {
                rep_rate_hz: rate,
                counts_per_s: counts / duration_s,
            })
        })
        .collect()
}

/// CSV export of a power sweep: `power_rel,g2_zero,sigma`.
pub fn write_power_csv<W: Write>(rows: &[PowerPoint], mut w: W) -> Result<()> {
    writeln!(w, "power_rel,g2_zero,sigma")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            fmt_sig6(r.power_rel),
            fmt_sig6(r.g2_zero),
            fmt_sig6(r.sigma)
        )?;
    }
    Ok(())
}

/// CSV export of a gate-width sweep:
/// `t_mod_ps,g2_zero,sigma,throughput` (empty width = ungated).
pub fn write_t_mod_csv<W: Write>(rows: &[TmodPoint], mut w: W) -> Result<()> {
    writeln!(w, "t_mod_ps,g2_zero,sigma,throughput")?;
    for r in rows {
        let tm = r.t_mod_ps.map(fmt_sig6).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{}",
            tm,
            fmt_sig6(r.g2_zero),
            fmt_sig6(r.sigma),
            fmt_sig6(r.throughput)
        )?;
    }
    Ok(())
}

/// CSV export of a repetition-rate sweep: `rep_rate_hz,counts_per_s`.
pub fn write_rep_rate_csv<W: Write>(rows: &[RepRatePoint], mut w: W) -> Result<()> {
    writeln!(w, "rep_rate_hz,counts_per_s")?;
    for r in rows {
        writeln!(w, "{},{}", fmt_sig6(r.rep_rate_hz), fmt_sig6(r.counts_per_s))?;
    }
    Ok(())
}

/// Analytic gate throughput of a scenario (1 when ungated), for report
/// annotations.
pub fn gate_throughput(scenario: &Scenario) -> f64 {
    match &scenario.gate {
        Some(g) => {
            closed_form_transmission(scenario.emitter.t1_ps, g.t_mod_ps, g.delay_ps)
                * 10f64.powf(-g.insertion_loss_db / 10.0)
        }
        None => 1.0,
    }
}
