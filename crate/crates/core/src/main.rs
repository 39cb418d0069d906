#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use photonstat::bootstrap::BootstrapConfig;
use photonstat::config::{RunConfig, SCHEMA_VERSION, SEED_ENV};
use photonstat::correlation::{g2_tau, g2_tau_detailed, gn_zero_with, CorrelationEstimate};
use photonstat::experiments::{
    fit_quadratic, power_sweep_prepared, prepare_source, reproduce_fig2, statistics_sweep,
    calibrate_absorber, ExcitationModel,
};
use photonstat::instruments::{extract_g2, hbt_scan_with, HbtOptions};
use photonstat::report::{self, Metadata};
use photonstat::seeding::{derive_seed, stream};
use photonstat::source::{coherence_time, generate};
use photonstat::{Error, FieldTrace, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "photonstat", version, about = "Photon-statistics simulation and two-photon absorption experiments")]
struct Cli {
    /// TOML run configuration (built-in defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file and PHOTONSTAT_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Shot noise and readout noise.
    #[arg(long, global = true, value_enum)]
    noise: Option<Toggle>,
    /// Format of the result printed on stdout.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a source trace and a summary of its statistics.
    Simulate {
        #[arg(long)]
        source: String,
    },
    /// Estimate g2(tau) from a trace file.
    G2 {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated delays in seconds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        delays: Vec<f64>,
    },
    /// Estimate g(n)(0) from a trace file.
    Gn {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        order: u32,
    },
    /// Simulated two-photon-detector Michelson scan and g2(0) extraction.
    Hbt {
        #[arg(long)]
        source: String,
    },
    /// Power sweep for one source and fluorophore, or a g2 sweep of tunable sources.
    Sweep {
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        fluorophore: Option<String>,
        /// Comma-separated g2(0) targets; compares tunable sources with the coherent reference.
        #[arg(long, value_delimiter = ',')]
        g2: Option<Vec<f64>>,
    },
    /// Thermal versus coherent sweeps for all fluorophores with fits and ratios.
    #[command(name = "reproduce-fig2")]
    ReproduceFig2,
    /// Re-render plots and print the summary of an existing report directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

struct Context {
    config: RunConfig,
    meta: Metadata,
    out: PathBuf,
    format: Format,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let env = std::env::var(SEED_ENV).ok();
    config.apply_seed_override(cli.seed, env.as_deref())?;
    if let Some(noise) = cli.noise {
        let on = noise == Toggle::On;
        config.experiment.noise = on;
        if !on {
            config.hbt.readout_noise = 0.0;
        }
    }
    Ok(config)
}

fn emit(ctx: &Context, csv: &str, json: &serde_json::Value) {
    match ctx.format {
        Format::Csv => print!("{csv}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&ctx.meta.stamp(json.clone())).unwrap()),
    }
}

fn bootstrap_cfg(ctx: &Context) -> BootstrapConfig {
    BootstrapConfig {
        seed: derive_seed(ctx.config.master_seed, stream::BOOTSTRAP, 0),
        ..BootstrapConfig::default()
    }
}

fn write_estimate(ctx: &Context, stem: &str, est: &CorrelationEstimate) -> Result<()> {
    report::write_csv(&ctx.out.join(format!("{stem}.csv")), &ctx.meta, &est.to_csv())?;
    report::write_json(&ctx.out.join(format!("{stem}.json")), &ctx.meta, est.to_json())?;
    emit(ctx, &est.to_csv(), &est.to_json());
    Ok(())
}

fn cmd_simulate(ctx: &Context, name: &str) -> Result<()> {
    let cfg = &ctx.config;
    let spec = cfg.source(name)?;
    let dt = cfg.trace.dt_s;
    let trace = generate(
        &spec,
        cfg.trace.samples as f64 * dt,
        dt,
        derive_seed(cfg.master_seed, stream::SOURCE_TRACE, 0),
    )?;
    report::ensure_dir(&ctx.out)?;
    let bin = ctx.out.join(format!("{name}.bin"));
    trace.save(&bin)?;
    let g2 = gn_zero_with(&trace, 2, &bootstrap_cfg(ctx))?;
    let tc = coherence_time(&trace).ok();
    let summary = json!({
        "source": name,
        "samples": trace.len(),
        "dt_s": trace.dt,
        "carrier_rad_per_s": trace.carrier_freq,
        "mean_power_w": trace.mean_power(),
        "g2_zero": g2.values[0],
        "g2_std_err": g2.std_errors[0],
        "g2_expected": spec.expected_g2(),
        "coherence_time_s": tc,
        "nominal_coherence_time_s": spec.nominal_coherence_time(),
        "trace_file": format!("{name}.bin"),
    });
    report::write_json(&ctx.out.join(format!("{name}_summary.json")), &ctx.meta, summary.clone())?;
    let csv = format!(
        "source,mean_power_w,g2_zero,g2_std_err\n{name},{},{},{}\n",
        trace.mean_power(),
        g2.values[0],
        g2.std_errors[0]
    );
    emit(ctx, &csv, &summary);
    Ok(())
}

fn cmd_g2(ctx: &Context, path: &Path, delays: &[f64]) -> Result<()> {
    let trace = FieldTrace::load(path)?;
    let est = g2_tau_detailed(&trace, delays, &bootstrap_cfg(ctx))?.estimate;
    write_estimate(ctx, "g2", &est)
}

fn cmd_gn(ctx: &Context, path: &Path, order: u32) -> Result<()> {
    let trace = FieldTrace::load(path)?;
    let est = gn_zero_with(&trace, order, &bootstrap_cfg(ctx))?;
    write_estimate(ctx, &format!("g{order}"), &est)
}

/// Symmetric fine grid through zero plus a tail grid.
fn hbt_delays(ctx: &Context, tc: f64) -> Result<(Vec<f64>, (f64, f64))> {
    let h = &ctx.config.hbt;
    if h.fine_points < 3 || h.tail_points < 1 || !(h.tail_start_tc > h.fine_span_tc) || !(h.tail_end_tc > h.tail_start_tc) {
        return Err(Error::Config(
            "hbt grid needs fine_points >= 3, tail_points >= 1 and fine_span_tc < tail_start_tc < tail_end_tc".into(),
        ));
    }
    let span = h.fine_span_tc * tc;
    let half = h.fine_points / 2;
    let mut delays: Vec<f64> = (-(half as i64)..=half as i64)
        .map(|i| span * i as f64 / half as f64)
        .collect();
    let (a, b) = (h.tail_start_tc * tc, h.tail_end_tc * tc);
    let m = h.tail_points;
    delays.extend((0..m).map(|i| if m == 1 { a } else { a + (b - a) * i as f64 / (m - 1) as f64 }));
    Ok((delays, (a, b)))
}

fn cmd_hbt(ctx: &Context, name: &str) -> Result<()> {
    let cfg = &ctx.config;
    let spec = cfg.source(name)?;
    let dt = cfg.trace.dt_s;
    let duration = cfg.hbt.samples as f64 * dt;
    let trace = generate(&spec, duration, dt, derive_seed(cfg.master_seed, stream::SOURCE_TRACE, 100))?;
    let tc = spec.nominal_coherence_time().min(duration / 40.0);
    let (delays, tail) = hbt_delays(ctx, tc)?;
    let opts = HbtOptions {
        filter: cfg.hbt.filter,
        linear_background: cfg.hbt.linear_background,
        readout_noise: cfg.hbt.readout_noise,
        seed: derive_seed(cfg.master_seed, stream::READOUT, 0),
        ..HbtOptions::default()
    };
    let scan = hbt_scan_with(&trace, &delays, &opts)?;
    let est = extract_g2(&scan, tail, Some(tc))?;
    let direct = g2_tau(&trace, &[0.0])?;
    let (g, se) = est.at_zero().expect("scan contains zero delay");
    let summary = json!({
        "source": name,
        "g2_extracted": g,
        "g2_extracted_std_err": se,
        "g2_direct": direct.values[0],
        "g2_direct_std_err": direct.std_errors[0],
        "g2_expected": spec.expected_g2(),
        "coherence_time_ref_s": tc,
        "tail_window_s": [tail.0, tail.1],
        "fringe_period_s": scan.fringe_period,
    });
    report::write_csv(&ctx.out.join(format!("hbt_{name}_interferogram.csv")), &ctx.meta, &scan.to_csv())?;
    report::write_csv(&ctx.out.join(format!("hbt_{name}_g2.csv")), &ctx.meta, &est.to_csv())?;
    report::write_json(&ctx.out.join(format!("hbt_{name}.json")), &ctx.meta, summary.clone())?;
    let csv = format!("source,g2_extracted,std_err,g2_direct\n{name},{g},{se},{}\n", direct.values[0]);
    emit(ctx, &csv, &summary);
    Ok(())
}

fn cmd_sweep(ctx: &Context, source: Option<&str>, fluorophore: Option<&str>, g2: Option<&[f64]>) -> Result<()> {
    let cfg = &ctx.config;
    let mut setup = cfg.fig2_setup()?;
    if let Some(f) = fluorophore {
        setup.absorbers = vec![cfg.absorber(f)?];
    }
    if let Some(targets) = g2 {
        if let Some(s) = source {
            setup.thermal.spec = cfg.source(s)?;
        }
        let points = statistics_sweep(&setup, targets)?;
        let mut csv = String::from("target_g2,measured_g2,measured_g2_std_err,ratio,ratio_std_err\n");
        for p in &points {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                p.target_g2, p.measured_g2, p.measured_g2_std_err, p.ratio, p.ratio_std_err
            ));
        }
        let value = json!({ "fluorophore": setup.absorbers[0].name, "points": points });
        report::write_csv(&ctx.out.join("g2_sweep.csv"), &ctx.meta, &csv)?;
        report::write_json(&ctx.out.join("g2_sweep.json"), &ctx.meta, value.clone())?;
        emit(ctx, &csv, &value);
        return Ok(());
    }
    let name = source.ok_or_else(|| Error::Config("sweep needs --source or --g2".into()))?;
    let spec = cfg.source(name)?;
    let entry = &setup.absorbers[0];
    let prepared = prepare_source(name, &spec, &setup.sweep, derive_seed(cfg.master_seed, stream::SOURCE_TRACE, 0))?;
    let reference_omega = if setup.sweep.excitation == ExcitationModel::Trace {
        prepared.omega
    } else {
        spec.carrier_freq()
    };
    let absorber = calibrate_absorber(
        &entry.spec,
        &setup.chain,
        reference_omega,
        setup.calibration_power,
        entry.reference_counts,
    )?;
    let sweep = power_sweep_prepared(
        &prepared,
        &absorber,
        &setup.chain,
        &setup.sweep,
        derive_seed(cfg.master_seed, stream::SWEEP, 0),
    )?;
    let fit = fit_quadratic(&sweep)?;
    let stem = format!("sweep_{name}_{}", entry.name);
    report::write_csv(&ctx.out.join(format!("{stem}.csv")), &ctx.meta, &sweep.to_csv())?;
    let value = json!({ "source": prepared, "sweep": sweep, "fit": fit });
    report::write_json(&ctx.out.join(format!("{stem}_fit.json")), &ctx.meta, value.clone())?;
    emit(ctx, &sweep.to_csv(), &value);
    Ok(())
}

fn cmd_reproduce(ctx: &Context) -> Result<()> {
    let setup = ctx.config.fig2_setup()?;
    let result = reproduce_fig2(&setup)?;
    report::write_fig2_report(&ctx.out, &result, &ctx.meta)?;
    let summary = report::summary(&result);
    match ctx.format {
        Format::Csv => print!("{summary}"),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "ratios": result.ratios(),
                "passed": result.passed,
                "error_budget": result.error_budget,
            }))
            .unwrap()
        ),
    }
    if !result.passed {
        let (lo, hi) = result.acceptance_band;
        let detail: Vec<String> = result
            .panels
            .iter()
            .filter(|p| !p.within_band)
            .map(|p| format!("{} ratio {:.3} +/- {:.3}", p.fluorophore, p.ratio, p.ratio_std_err))
            .collect();
        return Err(Error::Acceptance(format!(
            "ratios outside [{lo}, {hi}]: {}",
            detail.join("; ")
        )));
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let (result, meta) = report::read_fig2_report(dir)?;
    report::render_plots(dir, &result, &meta)?;
    print!("{}", report::summary(&result));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let config = load_config(&cli)?;
    let meta = Metadata {
        schema_version: SCHEMA_VERSION,
        master_seed: config.master_seed,
        config_hash: config.hash(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("photonstat-out"));
    let ctx = Context {
        config,
        meta,
        out,
        format: cli.format,
    };
    log::info!("master seed {}, config hash {}", ctx.meta.master_seed, ctx.meta.config_hash);
    match &cli.command {
        Command::Simulate { source } => cmd_simulate(&ctx, source),
        Command::G2 { trace, delays } => cmd_g2(&ctx, trace, delays),
        Command::Gn { trace, order } => cmd_gn(&ctx, trace, *order),
        Command::Hbt { source } => cmd_hbt(&ctx, source),
        Command::Sweep { source, fluorophore, g2 } => {
            cmd_sweep(&ctx, source.as_deref(), fluorophore.as_deref(), g2.as_deref())
        }
        Command::ReproduceFig2 => cmd_reproduce(&ctx),
        Command::Report { dir } => cmd_report(dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(2);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
