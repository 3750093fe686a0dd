//! `relaysim`: run relay-network BER campaigns from experiment files.
//!
//! Exit status is 0 on success, 1 for configuration or usage errors and 2
//! for failures while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use relaysim_core::config::{parse_config, Experiment};
use relaysim_core::engine::{exact_ber_small, sweep, Campaign, GroupKnowledge, SweepAxis};
use relaysim_core::output::{self, Manifest, ManifestEntry};
use relaysim_core::Error;

#[derive(Parser)]
#[command(name = "relaysim", version, about = "Decode-and-forward relay network BER simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment file.
    config: PathBuf,
    /// Only run the named experiment.
    #[arg(long)]
    experiment: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "RELAYSIM_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep and write one CSV per experiment plus a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Replace every experiment's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the per-group pmfs or marginals each experiment's detectors use.
    Pmf {
        #[command(flatten)]
        common: Common,
    },
    /// Check the experiment file and exit.
    Validate { config: PathBuf },
    /// Compare simulated BER with the exact value on small known-CSI networks.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config } => {
            parse_config(&config)?;
            Ok(())
        }
        Command::Simulate { common, out, seed } => {
            let experiments = load(&common, seed)?;
            with_threads(common.threads, |threads| simulate(&common.config, &experiments, &out, seed, threads))
        }
        Command::Pmf { common } => {
            let experiments = load(&common, None)?;
            with_threads(common.threads, |_| print_pmfs(&experiments))
        }
        Command::Oracle { common } => {
            let experiments = load(&common, None)?;
            with_threads(common.threads, |_| oracle(&experiments))
        }
    }
}

fn load(common: &Common, seed: Option<u64>) -> Result<Vec<Experiment>, Failure> {
    let mut experiments = parse_config(&common.config)?;
    if let Some(name) = &common.experiment {
        experiments.retain(|e| &e.name == name);
        if experiments.is_empty() {
            return Err(Failure::Config(format!("no experiment named `{name}` in {}", common.config.display())));
        }
    }
    if let Some(s) = seed {
        experiments.iter_mut().for_each(|e| e.config.seed = s);
    }
    Ok(experiments)
}

fn with_threads<T>(
    threads: Option<usize>,
    f: impl FnOnce(usize) -> Result<T, Failure> + Send,
) -> Result<T, Failure>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Runtime(format!("cannot start worker threads: {e}")))?;
    pool.install(|| f(rayon::current_num_threads()))
}

fn simulate(
    config_path: &Path,
    experiments: &[Experiment],
    out: &Path,
    seed: Option<u64>,
    threads: usize,
) -> Result<(), Failure> {
    let text = std::fs::read(config_path)
        .map_err(|source| Error::Read { path: config_path.to_path_buf(), source })?;
    let started = Instant::now();
    let mut entries = Vec::new();
    for e in experiments {
        let points = match &e.sweep {
            Some(s) if s.values.is_empty() => {
                eprintln!("warning: experiment `{}` has an empty sweep; writing only the header", e.name);
                Vec::new()
            }
            _ => e.run()?,
        };
        let path = output::write_csv(out, &e.name, &points)?;
        println!("{}", path.display());
        entries.push(ManifestEntry {
            experiment: e.name.clone(),
            seed: e.config.seed,
            points: points.len(),
            csv: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        });
    }
    let manifest = Manifest {
        tool: "relaysim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_path: config_path.display().to_string(),
        config_sha256: output::sha256_hex(&text),
        seed_override: seed,
        threads,
        wall_time_s: started.elapsed().as_secs_f64(),
        finished_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        experiments: entries,
    };
    output::write_manifest(out, &manifest)?;
    Ok(())
}

fn print_pmfs(experiments: &[Experiment]) -> Result<(), Failure> {
    println!("experiment,group,kind,index,value");
    for e in experiments {
        let campaign = Campaign::new(&e.config)?;
        let Some(pipeline) = campaign.pipeline() else {
            return Err(Failure::Config(format!(
                "experiment `{}` redraws its side information every trial; use csi_redraw = \"per_campaign\"",
                e.name
            )));
        };
        for (g, knowledge) in pipeline.groups().iter().enumerate() {
            let group = g + 1;
            match knowledge {
                GroupKnowledge::None => {}
                GroupKnowledge::Joint(pmf) => {
                    for (k, p) in pmf.probs().iter().enumerate() {
                        println!("{},{group},joint,{k},{}", e.name, output::format_g(*p));
                    }
                }
                GroupKnowledge::Marginals { estimated, exchanged } => {
                    for (i, p) in estimated.p_correct().iter().enumerate() {
                        println!("{},{group},p_correct,{i},{}", e.name, output::format_g(*p));
                    }
                    if exchanged != estimated {
                        for (i, p) in exchanged.p_correct().iter().enumerate() {
                            println!("{},{group},p_correct_exchanged,{i},{}", e.name, output::format_g(*p));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn oracle(experiments: &[Experiment]) -> Result<(), Failure> {
    println!("experiment,point,exact_ber,simulated_ber,ci95,within_3se");
    for e in experiments {
        let configs = e.point_configs()?;
        let exact: Vec<_> = configs.iter().map(exact_ber_small).collect();
        if let Some(Err(err)) = exact.iter().find(|r| r.is_err()) {
            eprintln!("skipping experiment `{}`: {err}", e.name);
            continue;
        }
        let points = match &e.sweep {
            Some(s) => sweep(&e.config, s.axis, &s.values)?,
            None => sweep(&e.config, SweepAxis::SnrDb, &[e.config.snr_db])?,
        };
        for (i, (p, x)) in points.iter().zip(exact).enumerate() {
            let x = x?;
            let est = &p.estimate;
            let ok = (est.ber - x).abs() <= 3.0 * est.std_error().max(1.0 / est.trials as f64);
            println!(
                "{},{i},{},{},{},{ok}",
                e.name,
                output::format_g(x),
                output::format_g(est.ber),
                output::format_g(est.ci95_halfwidth)
            );
        }
    }
    Ok(())
}
