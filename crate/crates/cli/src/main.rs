//! `sps` — batch front end for the single-photon source simulator.
//!
//! Subcommands: `run`, `sweep`, `analyze`, `eom-curve`, `cavity`,
//! `brightness`, `invert-v`. Scenario configuration lives in a JSON file;
//! a handful of flags override file values for quick parameter scans.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime
//! error (I/O, malformed data, non-convergence).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use sps_core::analysis::{brightness, cavity_coupling, g2_zero, hom_peak_areas, hom_report, invert_v, CavityBranch};
use sps_core::detector::{
    correlate, read_tags_binary, read_tags_csv, write_correlation_csv, write_tags_binary, TimeTag,
};
use sps_core::gate::{transmission_curve, write_curve_csv};
use sps_core::pipeline::{
    run, sweep_power, sweep_rep_rate, sweep_t_mod, write_power_csv, write_rep_rate_csv,
    write_t_mod_csv, Report, Scenario,
};
use sps_core::{Result, SimError};

#[derive(Parser)]
#[command(
    name = "sps",
    version,
    about = "Simulator and analysis toolkit for temporally gated single-photon sources"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario end to end and print the analysis report
    Run(RunArgs),
    /// Sweep a scenario parameter and print a CSV table
    Sweep(SweepArgs),
    /// Analyze a recorded time-tag file
    Analyze(AnalyzeArgs),
    /// Tabulate the optimal gate transmission versus gate width
    EomCurve(EomCurveArgs),
    /// Invert a cavity transmission dip for the coupling parameters
    Cavity(CavityArgs),
    /// Source-efficiency estimate from a saturated count rate
    Brightness(BrightnessArgs),
    /// Invert the peak-area ratio M for the wavepacket overlap V
    InvertV(InvertVArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the correlation bin width (ps)
    #[arg(long)]
    bin_ps: Option<f64>,
    /// Override the relative pump power
    #[arg(long)]
    power_rel: Option<f64>,
    /// Override the number of repetition periods
    #[arg(long)]
    n_periods: Option<u64>,
    /// Override the gate width (ps); requires a gate in the scenario
    #[arg(long)]
    t_mod_ps: Option<f64>,
    /// Override the gate delay (ps); requires a gate in the scenario
    #[arg(long)]
    gate_delay_ps: Option<f64>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Power,
    TMod,
    RepRate,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept parameter: pump power, gate width, or repetition rate
    #[arg(long, value_enum)]
    kind: SweepKind,
    /// Scenario JSON file (the sweep template)
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated grid values; `ungated` is allowed in a t-mod grid
    #[arg(long)]
    grid: String,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisKind {
    G2,
    Hom,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Time-tag file (binary `SPSLTTAG`, or CSV when the path ends in .csv)
    #[arg(long)]
    tags: PathBuf,
    #[arg(long, value_enum)]
    kind: AnalysisKind,
    /// Correlation bin width (ps, multiple of the 4 ps tick)
    #[arg(long)]
    bin_ps: f64,
    /// Correlation window half-span (ps)
    #[arg(long)]
    window_ps: f64,
    /// Repetition period (ps); required for g2
    #[arg(long)]
    rep_period_ps: Option<f64>,
    /// Side peaks per direction in the g2 average
    #[arg(long, default_value_t = 6)]
    n_side_peaks: usize,
    /// Interferometer delay (ps); required for hom
    #[arg(long)]
    delta_t_ps: Option<f64>,
    /// Two-photon emission probability; required for hom
    #[arg(long)]
    g_star: Option<f64>,
    /// Interference beamsplitter reflectance
    #[arg(long, default_value_t = 0.5)]
    bs_r: f64,
    /// Interference beamsplitter transmittance
    #[arg(long, default_value_t = 0.5)]
    bs_t: f64,
    /// Residual distinguishability
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EomCurveArgs {
    /// Comma-separated emitter lifetimes (ps)
    #[arg(long)]
    t1_ps: String,
    /// Explicit comma-separated gate widths (ps)
    #[arg(long)]
    t_mod_ps: Option<String>,
    /// Linear grid start (ps), used when --t-mod-ps is absent
    #[arg(long)]
    t_mod_min: Option<f64>,
    /// Linear grid end (ps)
    #[arg(long)]
    t_mod_max: Option<f64>,
    /// Linear grid size
    #[arg(long, default_value_t = 25)]
    points: usize,
    /// Insertion loss (dB)
    #[arg(long, default_value_t = 0.0)]
    il_db: f64,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Undercoupled,
    Overcoupled,
}

#[derive(Args)]
struct CavityArgs {
    /// On-resonance transmission dip T
    #[arg(long)]
    t_dip: f64,
    #[arg(long, value_enum, default_value_t = BranchArg::Undercoupled)]
    branch: BranchArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BrightnessArgs {
    /// Detected count rate at saturation (counts/s)
    #[arg(long)]
    i_sat_cps: f64,
    #[arg(long)]
    rep_rate_hz: f64,
    /// Total setup detection efficiency
    #[arg(long)]
    zeta: f64,
    /// Count-rate standard deviation (counts/s)
    #[arg(long)]
    i_sat_sigma_cps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvertVArgs {
    /// Measured peak-area ratio M
    #[arg(long)]
    m: f64,
    /// Two-photon emission probability
    #[arg(long)]
    g_star: f64,
    #[arg(long, default_value_t = 0.5)]
    bs_r: f64,
    #[arg(long, default_value_t = 0.5)]
    bs_t: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!("error: {e}");
        let code = match e {
            SimError::InvalidParameter { .. } => 1,
            _ => 2,
        };
        std::process::exit(code);
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::EomCurve(a) => cmd_eom_curve(a),
        Command::Cavity(a) => cmd_cavity(a),
        Command::Brightness(a) => cmd_brightness(a),
        Command::InvertV(a) => cmd_invert_v(a),
    }
}

/// Write `content` to the path, or to stdout when no path is given.
fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(content.as_bytes())?;
            f.flush()?;
        }
        None => {
            print!("{content}");
            std::io::stdout().flush()?;
        }
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| SimError::invalid("report", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    serde_json::from_str(&text)
        .map_err(|e| SimError::invalid("scenario", format!("{}: {e}", path.display())))
}

fn parse_f64_list(field: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| SimError::invalid(field, format!("bad number `{}`", tok.trim())))
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.pump.seed = seed;
    }
    if let Some(bin) = args.bin_ps {
        scenario.tcspc.bin_ps = bin;
    }
    if let Some(p) = args.power_rel {
        scenario.pump.power_rel = p;
    }
    if let Some(n) = args.n_periods {
        scenario.pump.n_periods = n;
    }
    if args.t_mod_ps.is_some() || args.gate_delay_ps.is_some() {
        let gate = scenario.gate.as_mut().ok_or_else(|| {
            SimError::invalid("gate", "--t-mod-ps/--gate-delay-ps require a gate in the scenario")
        })?;
        if let Some(tm) = args.t_mod_ps {
            gate.t_mod_ps = tm;
        }
        if let Some(d) = args.gate_delay_ps {
            gate.delay_ps = d;
        }
    }
    let result = run(&scenario)?;
    if let Some(outputs) = &scenario.outputs {
        if let Some(path) = &outputs.tags {
            let mut tags: Vec<TimeTag> = result
                .tags_a
                .iter()
                .chain(result.tags_b.iter())
                .copied()
                .collect();
            tags.sort_by_key(|t| (t.ticks, t.channel));
            write_tags_binary(&tags, BufWriter::new(File::create(path)?))?;
        }
        if let Some(path) = &outputs.histogram {
            write_correlation_csv(&result.correlation, BufWriter::new(File::create(path)?))?;
        }
        if let Some(path) = &outputs.report {
            emit(&Some(PathBuf::from(path)), &to_json(&result.report)?)?;
        }
    }
    emit(&args.out, &to_json(&result.report)?)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.pump.seed = seed;
    }
    let mut csv = Vec::new();
    match args.kind {
        SweepKind::Power => {
            let grid = parse_f64_list("grid", &args.grid)?;
            write_power_csv(&sweep_power(&scenario, &grid)?, &mut csv)?;
        }
        SweepKind::TMod => {
            let grid: Vec<Option<f64>> = args
                .grid
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    if tok.eq_ignore_ascii_case("ungated") {
                        Ok(None)
                    } else {
                        tok.parse::<f64>().map(Some).map_err(|_| {
                            SimError::invalid("grid", format!("bad gate width `{tok}`"))
                        })
                    }
                })
                .collect::<Result<_>>()?;
            write_t_mod_csv(&sweep_t_mod(&scenario, &grid)?, &mut csv)?;
        }
        SweepKind::RepRate => {
            let grid = parse_f64_list("grid", &args.grid)?;
            write_rep_rate_csv(&sweep_rep_rate(&scenario, &grid)?, &mut csv)?;
        }
    }
    let csv = String::from_utf8(csv).expect("csv writers emit utf-8");
    emit(&args.out, &csv)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let is_csv = args
        .tags
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let file = File::open(&args.tags)?;
    let tags = if is_csv {
        read_tags_csv(BufReader::new(file))?
    } else {
        read_tags_binary(BufReader::new(file))?
    };
    let mut a: Vec<TimeTag> = tags.iter().filter(|t| t.channel == 0).copied().collect();
    let mut b: Vec<TimeTag> = tags.iter().filter(|t| t.channel == 1).copied().collect();
    a.sort_by_key(|t| t.ticks);
    b.sort_by_key(|t| t.ticks);
    let correlation = correlate(&a, &b, args.bin_ps, args.window_ps)?;
    let report = match args.kind {
        AnalysisKind::G2 => {
            let period = args
                .rep_period_ps
                .ok_or_else(|| SimError::invalid("rep_period_ps", "required for g2 analysis"))?;
            Report::G2(g2_zero(&correlation, period, args.n_side_peaks)?)
        }
        AnalysisKind::Hom => {
            let delta_t = args
                .delta_t_ps
                .ok_or_else(|| SimError::invalid("delta_t_ps", "required for hom analysis"))?;
            let g_star = args
                .g_star
                .ok_or_else(|| SimError::invalid("g_star", "required for hom analysis"))?;
            let areas = hom_peak_areas(&correlation, delta_t, args.rep_period_ps.unwrap_or(0.0))?;
            Report::Hom(hom_report(areas, g_star, args.bs_r, args.bs_t, args.epsilon)?)
        }
    };
    emit(&args.out, &to_json(&report)?)
}

fn cmd_eom_curve(args: EomCurveArgs) -> Result<()> {
    let t1_list = parse_f64_list("t1_ps", &args.t1_ps)?;
    let grid = match &args.t_mod_ps {
        Some(list) => parse_f64_list("t_mod_ps", list)?,
        None => {
            let (lo, hi) = match (args.t_mod_min, args.t_mod_max) {
                (Some(lo), Some(hi)) if hi > lo && args.points >= 2 => (lo, hi),
                _ => {
                    return Err(SimError::invalid(
                        "t_mod",
                        "provide --t-mod-ps or --t-mod-min/--t-mod-max with --points >= 2",
                    ))
                }
            };
            let step = (hi - lo) / (args.points - 1) as f64;
            (0..args.points).map(|i| lo + i as f64 * step).collect()
        }
    };
    let curves = transmission_curve(&t1_list, &grid, args.il_db)?;
    let mut csv = Vec::new();
    write_curve_csv(&curves, &mut csv)?;
    emit(&args.out, &String::from_utf8(csv).expect("utf-8 csv"))
}

fn cmd_cavity(args: CavityArgs) -> Result<()> {
    let branch = match args.branch {
        BranchArg::Undercoupled => CavityBranch::Undercoupled,
        BranchArg::Overcoupled => CavityBranch::Overcoupled,
    };
    emit(&args.out, &to_json(&cavity_coupling(args.t_dip, branch)?)?)
}

fn cmd_brightness(args: BrightnessArgs) -> Result<()> {
    let report = brightness(
        args.i_sat_cps,
        args.rep_rate_hz,
        args.zeta,
        args.i_sat_sigma_cps,
    )?;
    emit(&args.out, &to_json(&report)?)
}

fn cmd_invert_v(args: InvertVArgs) -> Result<()> {
    let inv = invert_v(args.m, args.g_star, args.bs_r, args.bs_t, args.epsilon)?;
    emit(&args.out, &to_json(&inv)?)
}
