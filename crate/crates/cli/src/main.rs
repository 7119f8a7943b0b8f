use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fploc_core::harness::{
    analyze_kl, evaluate_on_trace, ingest_trace, run_experiment, run_exponent, run_spatial_map, write_exponent_csv,
    write_kl_csv, write_spatial_csv, ConfigMap, ExperimentConfig, Trace,
};
use fploc_core::placement::place_new_anchors;
use fploc_core::Error;

#[derive(Parser, Debug)]
#[command(name = "fploc", version, about = "Hypothesis-testing analysis and simulation of RSS fingerprinting")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides `run.seed` (and `placement.seed` for place-anchors).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// simulate: append every per-trial error after the summary table.
    #[arg(long, global = true)]
    raw: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Localization-error statistics, one row per sweep value.
    Simulate,
    /// Mean error at every raster point of the region.
    SpatialMap {
        /// Raster pitch in meters; overrides `spatial.resolution`.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Raster of the level-curve field ℓ(u, e) or its approximation ℓ̃(u).
    AnalyzeKl,
    /// Monte Carlo error exponent of a binary test.
    Exponent,
    /// Choose locations for additional anchors.
    PlaceAnchors {
        /// Number of anchors to add; overrides `placement.count`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Build a training database from a measurement trace.
    IngestTrace { trace: PathBuf },
    /// Localize every location of one trace against another.
    EvaluateTrace { train: PathBuf, eval: PathBuf },
}

fn load_config(cli: &Cli) -> Result<ConfigMap, Error> {
    let mut map = match &cli.config {
        Some(p) => ConfigMap::load(p)?,
        None => ConfigMap::new(),
    };
    if let Some(s) = cli.seed {
        map.set("run.seed", &s.to_string())?;
        if matches!(cli.command, Command::PlaceAnchors { .. }) {
            map.set("placement.seed", &s.to_string())?;
        }
    }
    match &cli.command {
        Command::SpatialMap { resolution: Some(r) } => map.set("spatial.resolution", &r.to_string())?,
        Command::PlaceAnchors { count: Some(c) } => map.set("placement.count", &c.to_string())?,
        _ => {}
    }
    Ok(map)
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Error> {
    let map = load_config(cli)?;
    let cfg = ExperimentConfig::from_map(&map)?;
    match &cli.command {
        Command::Simulate => {
            let res = run_experiment(&cfg)?;
            res.write_csv(&mut *out)?;
            if cli.raw {
                writeln!(out)?;
                res.write_raw_csv(&mut *out)?;
            }
        }
        Command::SpatialMap { .. } => {
            let cells = run_spatial_map(&cfg, cfg.spatial_resolution)?;
            write_spatial_csv(&cells, &mut *out)?;
        }
        Command::AnalyzeKl => write_kl_csv(&analyze_kl(&cfg)?, &mut *out)?,
        Command::Exponent => {
            let (est, theory) = run_exponent(&cfg)?;
            for n in &est.dropped {
                eprintln!("warning: no errors observed at n = {n}; dropped from the fit");
            }
            write_exponent_csv(&est, theory, &mut *out)?;
        }
        Command::PlaceAnchors { .. } => {
            if cfg.placement.count == 0 {
                return Err(Error::Config {
                    field: "placement.count".into(),
                    message: "must be at least 1 to place anchors".into(),
                });
            }
            let plan = place_new_anchors(
                &cfg.base_anchors,
                &cfg.region,
                cfg.placement.count,
                cfg.placement.method,
                cfg.placement.seed,
            )?;
            plan.write_csv(&mut *out)?;
        }
        Command::IngestTrace { trace } => {
            let (_, db, aps) = ingest_trace(trace)?;
            for (i, a) in aps.iter().enumerate() {
                eprintln!("ap_id {i} = {a}");
            }
            db.write_csv(&mut *out)?;
        }
        Command::EvaluateTrace { train, eval } => {
            let ev = evaluate_on_trace(&Trace::load(train)?, &Trace::load(eval)?, cfg.k, cfg.weighted)?;
            ev.write_csv(&mut *out)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::Parse { .. } | Error::DuplicateKey(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };

    let mut buf = Vec::new();
    let result = pool.install(|| run(&cli, &mut buf)).and_then(|()| match &cli.out {
        Some(p) => File::create(p)?.write_all(&buf).map_err(Error::from),
        None => io::stdout().write_all(&buf).map_err(Error::from),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
