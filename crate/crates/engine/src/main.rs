use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use brain_core::netcore::io;
use brain_core::resilience::{
    er_sweep_table, format_sweep_table, linspace, percolate_network, CouplingFn, ErSweep, PercolationOptions,
    SelfDynamics, SweepParam,
};
use brain_core::streams::{
    drift_eval_curve, format_curve, generate_stream, read_stream, tpcr, tpsr, write_stream, DriftKind, NearestCentroid,
    StreamSpec, TaskRecord, DEFAULT_SCALE,
};
use brain_engine::config::{GeneratorConfig, Injection};
use brain_engine::scenario::generate_network;
use brain_engine::store::{read_log, RunStore, LOG_FILE};
use brain_engine::{api, replay, Engine, EngineConfig, Mode};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "brain", version, about = "Industrial-chain resilience engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the closed loop offline for a number of ticks.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        ticks: u64,
        /// `tick:node:duration:magnitude`, repeatable.
        #[arg(long)]
        inject: Vec<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Persist the run log and snapshots here.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Approve every proposed plan at the end of its tick.
        #[arg(long)]
        approve_all: bool,
    },
    /// Giant components of a network file or a generated two-layer network.
    Percolate {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 4.0)]
        mean_degree: f64,
        #[arg(long, default_value_t = 0.5)]
        coupling: f64,
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write the network as JSON.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Hysteresis sweep on Erdos-Renyi layers with the reduced dynamics.
    Sweep {
        #[arg(long, value_enum, default_value_t = ParamArg::MeanDegree)]
        param: ParamArg,
        #[arg(long, default_value_t = 1.0)]
        from: f64,
        #[arg(long, default_value_t = 5.0)]
        to: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 3.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
    },
    /// Drifting stream utilities.
    Stream {
        #[command(subcommand)]
        cmd: StreamCmd,
    },
    /// Prequential curve of a stream file, or TPCR/TPSR of a task file.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Serve the HTTP API with a background ticker.
    Serve {
        #[arg(long, env = "BRAIN_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Replay a run log and compare with its latest snapshot.
    Replay {
        #[arg(long)]
        data_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum StreamCmd {
    /// Generate a preset stream as CSV.
    Gen {
        #[arg(long, value_enum, default_value_t = DriftArg::Abrupt)]
        kind: DriftArg,
        /// Divides the full preset length.
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Windowed accuracy and macro recall of a nearest-centroid learner.
    Curve {
        stream: PathBuf,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        /// Stop learning after this many samples.
        #[arg(long)]
        freeze_after: Option<u64>,
    },
    /// TPCR and TPSR of a JSONL file of `{input, output, gold}` records.
    Tasks { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Autonomous,
    Supervised,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    MeanDegree,
    Coupling,
    Occupation,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriftArg {
    Abrupt,
    Gradual,
    Incremental,
    Repeating,
}

fn parse_injection(s: &str) -> Result<Injection> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        bail!("injection must be tick:node:duration:magnitude, got {s}");
    }
    Ok(Injection {
        tick: parts[0].parse()?,
        node: parts[1].parse()?,
        duration: parts[2].parse()?,
        magnitude: parts[3].parse()?,
    })
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    Ok(EngineConfig::load(path)?)
}

fn simulate(
    config: Option<PathBuf>,
    ticks: u64,
    inject: Vec<String>,
    mode: Option<ModeArg>,
    data_dir: Option<PathBuf>,
    approve_all: bool,
) -> Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    for s in &inject {
        cfg.scenario.injections.push(parse_injection(s)?);
    }
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::Autonomous => Mode::Autonomous,
            ModeArg::Supervised => Mode::Supervised,
        };
    }
    let mut engine = match data_dir {
        Some(d) => {
            cfg.data_dir = d;
            Engine::open(cfg)?
        }
        None => Engine::new(cfg)?,
    };
    for _ in 0..ticks {
        let o = engine.tick()?;
        if let Some(a) = &o.alert {
            println!("tick {}: alert {a}", o.tick);
        }
        if let Some(p) = &o.plan {
            println!("tick {}: plan {p} proposed", o.tick);
            if approve_all && engine.state().mode == Mode::Supervised {
                engine.approve(p, None, Some("approved from the command line".into()))?;
            }
        }
        for x in &o.executed {
            println!("tick {}: executed {x}", o.tick);
        }
        if let Some(f) = &o.failed {
            println!("tick {}: action failed: {f}", o.tick);
        }
    }
    engine.flush()?;
    engine.write_snapshot()?;
    let s = engine.state();
    println!(
        "ticks={} alerts={} plans={} executed={} nodes={}",
        s.tick,
        s.alerts.len(),
        s.plans.len(),
        s.executed.len(),
        engine.network().total_nodes()
    );
    Ok(())
}

fn percolate(network: Option<PathBuf>, gen: GeneratorConfig, phi: f64, seed: u64, save: Option<PathBuf>) -> Result<()> {
    let net = match network {
        Some(p) => io::read_file(&p).with_context(|| format!("reading {}", p.display()))?,
        None => generate_network(&gen, seed)?,
    };
    if let Some(p) = save {
        io::write_file(&net, &p)?;
    }
    let r = percolate_network(&net, &vec![phi; net.layers().len()], PercolationOptions::default())?;
    println!("layer,nodes,S");
    for (l, s) in net.layers().iter().zip(&r.s) {
        println!("{},{},{s:.6}", l.name, l.node_count());
    }
    println!("giant_fraction={:.6} converged={}", r.fraction(), r.converged);
    Ok(())
}

fn serve(config: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let port = cfg.port;
    let period = cfg.tick_interval_ms;
    let engine = Engine::open(cfg)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let handle = api::spawn(engine);
        let ticker = (period > 0).then(|| api::spawn_ticker(handle.clone(), Duration::from_millis(period)));
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        tracing::info!(port, "listening");
        axum::serve(listener, api::router(handle.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        if let Some(t) = ticker {
            t.abort();
        }
        handle.shutdown().await?;
        anyhow::Ok(())
    })
}

fn verify_replay(dir: &Path) -> Result<()> {
    let records = read_log(&dir.join(LOG_FILE))?;
    let state = replay(&records)?;
    println!("records={} tick={} phase={:?}", records.len(), state.tick, state.phase);
    match RunStore::latest_snapshot(dir)? {
        None => println!("no snapshot to compare"),
        Some(snap) => {
            let n = usize::try_from(snap.seq)?;
            if n > records.len() {
                bail!(
                    "snapshot at seq {} is ahead of the log ({} records)",
                    snap.seq,
                    records.len()
                );
            }
            let prefix = replay(&records[..n])?;
            if prefix != snap {
                bail!("replayed state differs from snapshot at seq {}", snap.seq);
            }
            println!("snapshot at seq {} matches replay", snap.seq);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().cmd {
        Cmd::Simulate {
            config,
            ticks,
            inject,
            mode,
            data_dir,
            approve_all,
        } => simulate(config, ticks, inject, mode, data_dir, approve_all),
        Cmd::Percolate {
            network,
            nodes,
            mean_degree,
            coupling,
            phi,
            seed,
            save,
        } => percolate(
            network,
            GeneratorConfig {
                nodes,
                mean_degree,
                coupling,
            },
            phi,
            seed,
            save,
        ),
        Cmd::Sweep {
            param,
            from,
            to,
            points,
            layers,
            c,
            q,
            phi,
            delimiter,
        } => {
            let param = match param {
                ParamArg::MeanDegree => SweepParam::MeanDegree,
                ParamArg::Coupling => SweepParam::Coupling,
                ParamArg::Occupation => SweepParam::Occupation,
            };
            let rows = er_sweep_table(
                ErSweep { layers, c, q, phi },
                param,
                &linspace(from, to, points),
                SelfDynamics::Logistic { k: 1.0 },
                CouplingFn::Linear,
                1.0,
                PercolationOptions::default(),
            )?;
            emit(&format_sweep_table(&rows, delimiter))
        }
        Cmd::Stream {
            cmd: StreamCmd::Gen { kind, scale, seed, out },
        } => {
            let kind = match kind {
                DriftArg::Abrupt => DriftKind::Abrupt,
                DriftArg::Gradual => DriftKind::Gradual,
                DriftArg::Incremental => DriftKind::Incremental,
                DriftArg::Repeating => DriftKind::Repeating,
            };
            let (spec, n) = StreamSpec::desk_preset(kind, scale, seed)?;
            let text = write_stream(&spec, &generate_stream(&spec, n)?);
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => emit(&text)?,
            }
            Ok(())
        }
        Cmd::Eval {
            cmd:
                EvalCmd::Curve {
                    stream,
                    window,
                    freeze_after,
                },
        } => {
            let text = std::fs::read_to_string(&stream).with_context(|| format!("reading {}", stream.display()))?;
            let records = read_stream(&text)?;
            let mut model = match freeze_after {
                Some(w) => NearestCentroid::frozen_after(w),
                None => NearestCentroid::new(),
            };
            emit(&format_curve(&drift_eval_curve(&mut model, &records, window)?))
        }
        Cmd::Eval {
            cmd: EvalCmd::Tasks { file },
        } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let records = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| serde_json::from_str::<TaskRecord>(l).with_context(|| format!("line {}", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            println!(
                "tasks={} tpcr={:.6} tpsr={:.6}",
                records.len(),
                tpcr(&records)?,
                tpsr(&records)?
            );
            Ok(())
        }
        Cmd::Serve { config } => serve(config),
        Cmd::Replay { data_dir } => verify_replay(&data_dir),
    }
}
