use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ascsim_core::autonomy::{
    assess_scal, characteristics_check, self_assessment, CapabilityProfile, ManifoldConfig,
    ScalLevel, SelfAssessment,
};
use ascsim_core::scenario::ScenarioOverrides;
use ascsim_core::{Scenario, SimTime, Simulation};
use ascsim_service::files::{
    read_scenario, replay_file, snapshot_text, write_log, write_snapshot, EVENTS_FILE,
    SNAPSHOT_FILE,
};
use ascsim_service::{router, LiveConfig, LiveHandle, Pacing};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ascsim", version, about = "Autonomous supply chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write its event log and final snapshot.
    Run(RunArgs),
    /// Serve the live simulation over HTTP.
    Serve(ServeArgs),
    /// Print the SCAL level of a simulated run or of a profile file.
    Assess(AssessArgs),
    /// Fold an event log into its snapshot.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON; the bundled case study when omitted.
    #[arg(long, env = "ASCSIM_SCENARIO")]
    scenario: Option<PathBuf>,
    #[arg(long, env = "ASCSIM_SEED")]
    seed: Option<u64>,
    /// Simulated seconds per wall-clock second in live mode.
    #[arg(long, env = "ASCSIM_TIME_SCALE")]
    time_scale: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let overrides = ScenarioOverrides {
            seed: self.seed,
            time_scale: self.time_scale,
        };
        Ok(read_scenario(self.scenario.as_deref(), overrides)?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Stop at this simulated second instead of running to quiescence.
    #[arg(long)]
    until: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also print the autonomy assessment of the run.
    #[arg(long)]
    assess: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, env = "ASCSIM_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory holding `events.ndjson`; an existing log is resumed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Require this bearer token on every request.
    #[arg(long, env = "ASCSIM_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    until: Option<f64>,
    /// Assess a capability profile JSON instead of running the scenario.
    #[arg(long, conflicts_with_all = ["scenario", "seed", "until"])]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// The `events.ndjson` to fold.
    log: PathBuf,
    /// Snapshot file to write; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn simulate(scenario: Scenario, until: Option<f64>) -> Result<Simulation> {
    let mut sim = Simulation::new(scenario);
    match until {
        Some(s) if !(s.is_finite() && s >= 0.0) => bail!("--until must be a non-negative number of seconds"),
        Some(s) => {
            sim.advance(SimTime::from_secs_f64(s));
        }
        None => {
            sim.run_to_quiescence();
        }
    }
    Ok(sim)
}

fn print_level(level: &ScalLevel) {
    println!("{level}");
    for line in &level.rationale {
        println!("  {line}");
    }
    println!("  human involvement: {}", level.human_involvement());
}

fn print_assessment(a: &SelfAssessment) {
    print_level(&a.scal);
    println!(
        "autonomy point: intelligence {:.3}, automation {:.3} ({})",
        a.point.intelligence, a.point.automation, a.region
    );
    if !a.characteristics.missing.is_empty() {
        println!("characteristics missing: {}", a.characteristics.missing.join(", "));
    }
    for v in &a.characteristics.violations {
        println!("characteristics violation: {v}");
    }
}

fn run(args: RunArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    let sim = simulate(scenario, args.until)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let log_path = args.out.join(EVENTS_FILE);
    let snap_path = args.out.join(SNAPSHOT_FILE);
    write_log(&log_path, sim.log())?;
    write_snapshot(&snap_path, &sim.snapshot())?;
    for o in sim.world().orders.values() {
        println!("{} {} {:?}", o.order_id, o.buyer, o.status);
    }
    println!("{} events, sim time {}", sim.log().len(), sim.now());
    println!("wrote {} and {}", log_path.display(), snap_path.display());
    if args.assess {
        let a = self_assessment(sim.scenario(), sim.log().events(), ManifoldConfig::default())?;
        print_assessment(&a);
    }
    Ok(())
}

fn assess(args: AssessArgs) -> Result<()> {
    if let Some(path) = args.profile {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let profile: CapabilityProfile =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        print_level(&assess_scal(&profile)?);
        let c = characteristics_check(&profile);
        for v in &c.violations {
            println!("characteristics violation: {v}");
        }
        return Ok(());
    }
    let sim = simulate(args.scenario.load()?, args.until)?;
    let a = self_assessment(sim.scenario(), sim.log().events(), ManifoldConfig::default())?;
    print_assessment(&a);
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let snapshot = replay_file(&args.log)?;
    match args.out {
        Some(p) => write_snapshot(&p, &snapshot)?,
        None => print!("{}", snapshot_text(&snapshot)),
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    let log_path = match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Some(dir.join(EVENTS_FILE))
        }
        None => None,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let mut config = LiveConfig::new(
            scenario.clone(),
            Pacing::Realtime {
                time_scale: scenario.time_scale,
            },
        );
        config.log_path = log_path.clone();
        let live = LiveHandle::start(config)?;
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        println!("ascsim listening on http://{}", listener.local_addr()?);
        if let Some(p) = log_path.as_deref().map(Path::display) {
            println!("event log: {p}");
        }
        axum::serve(listener, router(live, args.token))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Serve(a) => serve(a),
        Command::Assess(a) => assess(a),
        Command::Replay(a) => replay(a),
    }
}
