//! The live simulation behind the API. One driver task owns the
//! [`Simulation`]; requests reach it through a command channel and read a
//! published copy of the log and snapshot.

use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard};
use std::time::Duration;

use ascsim_core::model::{EntityId, OrderLine};
use ascsim_core::{Event, Scenario, SimError, SimTime, Simulation, Snapshot};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;

use crate::files::{read_log, FileError, LogWriter};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Simulated seconds advance `time_scale` times faster than the wall clock.
    Realtime { time_scale: f64 },
    /// Time moves only through [`LiveHandle::advance_to`].
    Manual,
}

#[derive(Debug, Error)]
pub enum LiveError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error("persisted log does not match this scenario: {0}")]
    Restore(SimError),
    #[error("the simulation has stopped")]
    Stopped,
}

/// What readers see. Replaced only under the write lock, so a reader never
/// observes half of a command's events.
#[derive(Debug)]
pub struct ReadModel {
    pub events: Vec<Event>,
    pub snapshot: Snapshot,
    pub now: SimTime,
}

impl ReadModel {
    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn since(&self, seq: u64) -> &[Event] {
        let start = (seq as usize).min(self.events.len());
        &self.events[start..]
    }
}

enum Command {
    PlaceOrder {
        buyer: EntityId,
        lines: Vec<OrderLine>,
        reply: oneshot::Sender<Result<String, SimError>>,
    },
    AdvanceTo {
        until: SimTime,
        reply: oneshot::Sender<()>,
    },
}

#[derive(Clone)]
pub struct LiveHandle {
    scenario: Arc<Scenario>,
    read: Arc<RwLock<ReadModel>>,
    head: watch::Receiver<u64>,
    commands: mpsc::Sender<Command>,
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub scenario: Scenario,
    pub pacing: Pacing,
    /// `events.ndjson` to append to; an existing file is replayed first.
    pub log_path: Option<PathBuf>,
    pub tick: Duration,
}

impl LiveConfig {
    pub fn new(scenario: Scenario, pacing: Pacing) -> Self {
        LiveConfig {
            scenario,
            pacing,
            log_path: None,
            tick: Duration::from_millis(100),
        }
    }
}

struct Driver {
    sim: Simulation,
    published: usize,
    writer: Option<LogWriter>,
    read: Arc<RwLock<ReadModel>>,
    head: watch::Sender<u64>,
}

impl Driver {
    fn publish(&mut self) {
        let fresh = &self.sim.log().events()[self.published..];
        if let Some(w) = &mut self.writer {
            if let Err(e) = w.append(fresh) {
                eprintln!("ascsim: failed to persist events: {e}");
            }
        }
        let fresh = fresh.to_vec();
        self.published += fresh.len();
        {
            let mut r = self.read.write().expect("read model lock");
            r.events.extend(fresh);
            r.snapshot = self.sim.snapshot();
            r.now = self.sim.now();
        }
        self.head.send_replace(self.sim.log().last_seq());
    }
}

impl LiveHandle {
    /// Builds (or restores from the log file) the simulation and spawns its
    /// driver on the current tokio runtime.
    pub fn start(config: LiveConfig) -> Result<LiveHandle, LiveError> {
        let scenario = config.scenario.clone();
        let existing = config
            .log_path
            .as_ref()
            .filter(|p| std::fs::metadata(p).is_ok_and(|m| m.len() > 0));
        let (sim, persisted) = match existing {
            Some(p) => {
                let log = read_log(p)?;
                let sim = Simulation::restore(scenario.clone(), &log).map_err(LiveError::Restore)?;
                (sim, log.len())
            }
            None => (Simulation::new(scenario.clone()), 0),
        };
        let writer = match &config.log_path {
            Some(p) => Some(LogWriter::open(p)?),
            None => None,
        };
        let read = Arc::new(RwLock::new(ReadModel {
            events: sim.log().events()[..persisted].to_vec(),
            snapshot: sim.snapshot(),
            now: sim.now(),
        }));
        let (head_tx, head_rx) = watch::channel(persisted as u64);
        let (cmd_tx, cmd_rx) = mpsc::channel(64);
        let mut driver = Driver {
            sim,
            published: persisted,
            writer,
            read: read.clone(),
            head: head_tx,
        };
        driver.publish();
        tokio::spawn(drive(driver, cmd_rx, config.pacing, config.tick));
        Ok(LiveHandle {
            scenario: Arc::new(scenario),
            read,
            head: head_rx,
            commands: cmd_tx,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn read(&self) -> RwLockReadGuard<'_, ReadModel> {
        self.read.read().expect("read model lock")
    }

    /// Changes whenever new events are published.
    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.head.clone()
    }

    pub async fn place_order(
        &self,
        buyer: EntityId,
        lines: Vec<OrderLine>,
    ) -> Result<Result<String, SimError>, LiveError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::PlaceOrder { buyer, lines, reply })
            .await
            .map_err(|_| LiveError::Stopped)?;
        rx.await.map_err(|_| LiveError::Stopped)
    }

    /// Moves simulated time forward; mainly for [`Pacing::Manual`].
    pub async fn advance_to(&self, until: SimTime) -> Result<(), LiveError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::AdvanceTo { until, reply })
            .await
            .map_err(|_| LiveError::Stopped)?;
        rx.await.map_err(|_| LiveError::Stopped)
    }
}

async fn drive(mut d: Driver, mut commands: mpsc::Receiver<Command>, pacing: Pacing, tick: Duration) {
    let wall_start = Instant::now();
    let sim_start = d.sim.now();
    let target = move || match pacing {
        Pacing::Realtime { time_scale } => {
            Some(sim_start + SimTime::from_secs_f64(wall_start.elapsed().as_secs_f64() * time_scale))
        }
        Pacing::Manual => None,
    };
    let mut ticker = tokio::time::interval(tick);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            cmd = commands.recv() => {
                let Some(cmd) = cmd else { break };
                if let Some(t) = target() {
                    d.sim.advance(t);
                }
                match cmd {
                    Command::PlaceOrder { buyer, lines, reply } => {
                        let r = d.sim.place_order(&buyer, lines);
                        d.publish();
                        let _ = reply.send(r);
                    }
                    Command::AdvanceTo { until, reply } => {
                        d.sim.advance(until);
                        d.publish();
                        let _ = reply.send(());
                    }
                }
            }
            _ = ticker.tick(), if matches!(pacing, Pacing::Realtime { .. }) => {
                if let Some(t) = target() {
                    d.sim.advance(t);
                    d.publish();
                }
            }
        }
    }
}
