//! Detection chain: SPAD model (efficiency thinning, Gaussian timing
//! jitter, dead time), time tags at fixed 4 ps resolution, start-stop
//! lifetime histograms, full cross-correlation, and tag file formats.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

use crate::numeric::fmt_sig6;
use crate::{require_finite, Result, SimError};

/// Timing resolution of the counting electronics: one tick = 4 ps.
pub const RESOLUTION_PS: u64 = 4;

fn default_dark_rate() -> f64 {
    0.0
}

/// Single-photon avalanche diode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpadSpec {
    /// Detection probability per incident photon.
    pub efficiency: f64,
    /// Gaussian timing jitter standard deviation, ps.
    pub jitter_sigma_ps: f64,
    /// Minimum separation between clicks on one channel, ps.
    pub dead_time_ps: f64,
    /// Reserved; must currently be 0.
    #[serde(default = "default_dark_rate")]
    pub dark_rate_hz: f64,
}

impl SpadSpec {
    /// Thick-junction Si SPAD: 12.5 % efficiency, ~700 ps FWHM jitter.
    pub fn thick() -> Self {
        SpadSpec {
            efficiency: 0.125,
            jitter_sigma_ps: 700.0 / 2.355,
            dead_time_ps: 0.0,
            dark_rate_hz: 0.0,
        }
    }

    /// Thin-junction red-enhanced Si SPAD: 6 % efficiency, ~100 ps FWHM
    /// jitter.
    pub fn red_enhanced() -> Self {
        SpadSpec {
            efficiency: 0.06,
            jitter_sigma_ps: 100.0 / 2.355,
            dead_time_ps: 0.0,
            dark_rate_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(SimError::invalid("spad.efficiency", "must be in [0, 1]"));
        }
        require_finite("spad.jitter_sigma_ps", self.jitter_sigma_ps)?;
        if self.jitter_sigma_ps < 0.0 {
            return Err(SimError::invalid("spad.jitter_sigma_ps", "must be >= 0"));
        }
        require_finite("spad.dead_time_ps", self.dead_time_ps)?;
        if self.dead_time_ps < 0.0 {
            return Err(SimError::invalid("spad.dead_time_ps", "must be >= 0"));
        }
        if self.dark_rate_hz != 0.0 {
            return Err(SimError::invalid(
                "spad.dark_rate_hz",
                "dark counts are reserved and not implemented; must be 0",
            ));
        }
        Ok(())
    }
}

/// One detector click: channel id plus timestamp in 4 ps ticks from run
/// start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTag {
    pub ticks: u64,
    pub channel: u8,
}

impl TimeTag {
    pub fn time_ps(&self) -> f64 {
        (self.ticks * RESOLUTION_PS) as f64
    }
}

/// Counting-electronics acquisition mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcspcMode {
    Histogram,
    TimeTagged,
}

/// Counting-electronics configuration. `resolution_ps` is fixed at 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcspcConfig {
    pub mode: TcspcMode,
    pub bin_ps: f64,
    #[serde(default = "TcspcConfig::default_resolution")]
    pub resolution_ps: f64,
}

impl TcspcConfig {
    fn default_resolution() -> f64 {
        RESOLUTION_PS as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution_ps != RESOLUTION_PS as f64 {
            return Err(SimError::invalid("tcspc.resolution_ps", "must be 4"));
        }
        let res = RESOLUTION_PS as f64;
        if !(self.bin_ps > 0.0) || (self.bin_ps / res).fract() != 0.0 {
            return Err(SimError::invalid(
                "tcspc.bin_ps",
                "must be a positive multiple of 4 ps",
            ));
        }
        Ok(())
    }
}

/// Run a photon arrival stream (absolute times in ps, sorted) through one
/// SPAD: Bernoulli thinning, Gaussian jitter, quantization to 4 ps ticks
/// (round half up), then dead-time filtering on the quantized tags.
pub fn detect(arrivals_ps: &[f64], spad: &SpadSpec, channel: u8, seed: u64) -> Result<Vec<TimeTag>> {
    spad.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = if spad.jitter_sigma_ps > 0.0 {
        Some(Normal::new(0.0, spad.jitter_sigma_ps).expect("validated sigma"))
    } else {
        None
    };
    let mut ticks: Vec<u64> = Vec::with_capacity(arrivals_ps.len());
    for &t in arrivals_ps {
        if spad.efficiency < 1.0 && rng.random::<f64>() >= spad.efficiency {
            continue;
        }
        let mut t = t;
        if let Some(j) = &jitter {
            t += j.sample(&mut rng);
        }
        let q = (t / RESOLUTION_PS as f64 + 0.5).floor();
        if q < 0.0 {
            continue;
        }
        ticks.push(q as u64);
    }
    ticks.sort_unstable();
    // dead-time filter after quantization
    let dead_ticks = (spad.dead_time_ps / RESOLUTION_PS as f64).ceil() as u64;
    let mut tags = Vec::with_capacity(ticks.len());
    let mut last: Option<u64> = None;
    for t in ticks {
        if let Some(l) = last {
            if dead_ticks > 0 && t < l + dead_ticks {
                continue;
            }
        }
        last = Some(t);
        tags.push(TimeTag { ticks: t, channel });
    }
    Ok(tags)
}

/// Uniformly binned one-dimensional histogram starting at delay zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeHistogram {
    pub bin_ps: f64,
    pub counts: Vec<u64>,
}

impl LifetimeHistogram {
    pub fn bin_center_ps(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_ps
    }
}

/// Histogram of the first click after each trigger. The recorded span is
/// one trigger period (inferred from the minimum trigger spacing).
pub fn start_stop_histogram(
    trigger_times_ps: &[f64],
    tags: &[TimeTag],
    bin_ps: f64,
) -> Result<LifetimeHistogram> {
    if !(bin_ps > 0.0) {
        return Err(SimError::invalid("bin_ps", "must be > 0"));
    }
    let span = trigger_times_ps
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let span = if span.is_finite() { span } else { bin_ps };
    let n_bins = (span / bin_ps).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut i_tag = 0usize;
    for &trig in trigger_times_ps {
        while i_tag < tags.len() && tags[i_tag].time_ps() < trig {
            i_tag += 1;
        }
        if i_tag == tags.len() {
            break;
        }
        let delay = tags[i_tag].time_ps() - trig;
        if delay < span {
            let bin = (delay / bin_ps) as usize;
            if bin < n_bins {
                counts[bin] += 1;
            }
        }
    }
    Ok(LifetimeHistogram { bin_ps, counts })
}

/// Symmetric coincidence histogram: `counts[half_bins]` is the τ = 0 bin
/// and `counts` has `2 * half_bins + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_ps: f64,
    pub half_bins: usize,
    pub counts: Vec<u64>,
    /// Acquisition metadata, carried for reporting.
    pub rep_period_ps: Option<f64>,
    pub n_periods: Option<u64>,
}

impl CorrelationHistogram {
    pub fn bin_center_ps(&self, i: usize) -> f64 {
        (i as f64 - self.half_bins as f64) * self.bin_ps
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Full cross-correlation of two sorted tag streams: every pair
/// `(t_b - t_a)` within ±`window_ps` is binned with bin width `bin_ps`
/// (a multiple of 4 ps), bins centered on integer multiples of the bin
/// width, rounding half away from zero.
pub fn correlate(
    tags_a: &[TimeTag],
    tags_b: &[TimeTag],
    bin_ps: f64,
    window_ps: f64,
) -> Result<CorrelationHistogram> {
    let res = RESOLUTION_PS as f64;
    if !(bin_ps > 0.0) || (bin_ps / res).fract() != 0.0 {
        return Err(SimError::invalid("bin_ps", "must be a positive multiple of 4 ps"));
    }
    if !(window_ps > 0.0) {
        return Err(SimError::invalid("window_ps", "must be > 0"));
    }
    let bin_ticks = (bin_ps / res) as i64;
    let half_bins = (window_ps / bin_ps).round().max(1.0) as i64;
    // a pair lands inside the histogram iff its rounded bin index is
    // within ±half_bins; the largest admissible |dt| in ticks follows
    // from the half-away-from-zero rounding rule below
    let max_dt = half_bins * bin_ticks + (bin_ticks - 1) / 2;
    let mut counts = vec![0u64; (2 * half_bins + 1) as usize];
    let mut lo = 0usize;
    for a in tags_a {
        let ta = a.ticks as i64;
        while lo < tags_b.len() && (tags_b[lo].ticks as i64) < ta - max_dt {
            lo += 1;
        }
        for b in &tags_b[lo..] {
            let dt = b.ticks as i64 - ta;
            if dt > max_dt {
                break;
            }
            let adt = dt.abs();
            // round half away from zero to the nearest bin center
            let k = (2 * adt + bin_ticks) / (2 * bin_ticks);
            if k <= half_bins {
                let idx = (half_bins + dt.signum() * k) as usize;
                counts[idx] += 1;
            }
        }
    }
    Ok(CorrelationHistogram {
        bin_ps,
        half_bins: half_bins as usize,
        counts,
        rep_period_ps: None,
        n_periods: None,
    })
}

const TAG_MAGIC: &[u8; 8] = b"SPSLTTAG";
const TAG_VERSION: u32 = 1;

/// Write tags in the binary format: magic `SPSLTTAG`, u32 version (little
/// endian), then 9-byte records of u64 ticks (LE) + u8 channel.
pub fn write_tags_binary<W: Write>(tags: &[TimeTag], mut w: W) -> Result<()> {
    w.write_all(TAG_MAGIC)?;
    w.write_all(&TAG_VERSION.to_le_bytes())?;
    for t in tags {
        w.write_all(&t.ticks.to_le_bytes())?;
        w.write_all(&[t.channel])?;
    }
    Ok(())
}

/// Read the binary tag format, reporting the byte offset of any
/// malformation.
pub fn read_tags_binary<R: Read>(mut r: R) -> Result<Vec<TimeTag>> {
    let mut header = [0u8; 12];
    let n = read_up_to(&mut r, &mut header)?;
    if n < 8 || &header[..8] != TAG_MAGIC {
        return Err(SimError::TagFormat {
            offset: 0,
            message: "missing SPSLTTAG magic".into(),
        });
    }
    if n < 12 {
        return Err(SimError::TagFormat {
            offset: 8,
            message: "truncated version field".into(),
        });
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != TAG_VERSION {
        return Err(SimError::TagFormat {
            offset: 8,
            message: format!("unsupported version {version}"),
        });
    }
    let mut tags = Vec::new();
    let mut offset = 12u64;
    let mut rec = [0u8; 9];
    loop {
        let n = read_up_to(&mut r, &mut rec)?;
        if n == 0 {
            break;
        }
        if n < 9 {
            return Err(SimError::TagFormat {
                offset,
                message: format!("truncated record ({n} of 9 bytes)"),
            });
        }
        tags.push(TimeTag {
            ticks: u64::from_le_bytes(rec[..8].try_into().unwrap()),
            channel: rec[8],
        });
        offset += 9;
    }
    Ok(tags)
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(filled)
}

/// CSV tag export: header `ticks,channel`.
pub fn write_tags_csv<W: Write>(tags: &[TimeTag], mut w: W) -> Result<()> {
    writeln!(w, "ticks,channel")?;
    for t in tags {
        writeln!(w, "{},{}", t.ticks, t.channel)?;
    }
    Ok(())
}

/// CSV tag import (header `ticks,channel`).
pub fn read_tags_csv<R: BufRead>(r: R) -> Result<Vec<TimeTag>> {
    let mut tags = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "ticks,channel" {
                return Err(SimError::TagFormat {
                    offset: 0,
                    message: "expected header `ticks,channel`".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let parse = |s: Option<&str>| -> Option<u64> { s?.trim().parse().ok() };
        let ticks = parse(parts.next());
        let channel = parse(parts.next());
        match (ticks, channel) {
            (Some(t), Some(c)) if c <= u8::MAX as u64 => tags.push(TimeTag {
                ticks: t,
                channel: c as u8,
            }),
            _ => {
                return Err(SimError::TagFormat {
                    offset: 0,
                    message: format!("bad CSV record on line {}", i + 1),
                })
            }
        }
    }
    Ok(tags)
}

/// Histogram CSV export: header `bin_center_ps,counts`.
pub fn write_lifetime_csv<W: Write>(h: &LifetimeHistogram, mut w: W) -> Result<()> {
    writeln!(w, "bin_center_ps,counts")?;
    for (i, &c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{}", fmt_sig6(h.bin_center_ps(i)), c)?;
    }
    Ok(())
}

/// Histogram CSV export: header `bin_center_ps,counts`.
pub fn write_correlation_csv<W: Write>(h: &CorrelationHistogram, mut w: W) -> Result<()> {
    writeln!(w, "bin_center_ps,counts")?;
    for (i, &c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{}", fmt_sig6(h.bin_center_ps(i)), c)?;
    }
    Ok(())
}
