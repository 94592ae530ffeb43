//! The coordinator: holds the consensus `Z`, never sees features or labels.

use std::time::{Duration, Instant};

use super::audit::{Direction, MessageTrace, TraceHeader};
use super::message::{MessageKind, RoundMessage};
use super::transport::Transport;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Seed};
use crate::optimizer::{aggregate_z, assemble_objective, initial_consensus, outer_converged};

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorConfig {
    pub num_samples: usize,
    pub num_classes: usize,
    /// Consensus weights, one per participant.
    pub zeta: Vec<f64>,
    pub outer_tol: f64,
    pub outer_max: usize,
    pub seed: Seed,
    /// How long to wait for all uploads of one round.
    pub round_timeout: Duration,
}

impl CoordinatorConfig {
    pub fn num_participants(&self) -> usize {
        self.zeta.len()
    }
}

#[derive(Debug, Clone)]
pub struct CoordinatorOutcome {
    pub z: Matrix,
    /// Objective after every completed round.
    pub objective_trace: Vec<f64>,
    pub trace: MessageTrace,
    pub rounds: usize,
    pub converged: bool,
    pub round_durations: Vec<Duration>,
    /// Participant id that registered as label owner.
    pub label_owner: usize,
}

struct Session<L> {
    /// Links indexed by participant id after registration.
    links: Vec<L>,
    trace: MessageTrace,
}

impl<L: Transport> Session<L> {
    fn send(&mut self, id: usize, msg: &RoundMessage) -> Result<()> {
        let bytes = self.links[id].send(msg)?;
        self.trace.record(Direction::Down, bytes, msg);
        Ok(())
    }

    /// Best effort: a participant that has already gone away is ignored.
    fn abort_all(&mut self, round: usize) {
        for id in 0..self.links.len() {
            if let Err(e) = self.send(id, &RoundMessage::abort(round, id)) {
                log::debug!("abort to participant {id} not delivered: {e}");
            }
        }
    }
}

/// Runs the coordinator over one link per participant. Links may be in any
/// order; participants identify themselves when they register.
pub fn coordinator_run<L: Transport>(
    config: &CoordinatorConfig,
    links: Vec<L>,
) -> Result<CoordinatorOutcome> {
    let k = config.num_participants();
    if links.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} links for {k} participants",
            links.len()
        )));
    }
    let header = TraceHeader {
        num_samples: config.num_samples,
        num_classes: config.num_classes,
        num_participants: k,
    };
    let mut trace = MessageTrace::new(header);
    let (links, label_owner) = register(config, links, &mut trace)?;
    let mut session = Session { links, trace };
    match drive(config, &mut session) {
        Ok((z, objective_trace, converged, round_durations)) => Ok(CoordinatorOutcome {
            z,
            rounds: objective_trace.len(),
            objective_trace,
            trace: session.trace,
            converged,
            round_durations,
            label_owner,
        }),
        Err((round, e)) => {
            log::warn!("aborting federation in round {round}: {e}");
            session.abort_all(round);
            Err(e)
        }
    }
}

fn register<L: Transport>(
    config: &CoordinatorConfig,
    links: Vec<L>,
    trace: &mut MessageTrace,
) -> Result<(Vec<L>, usize)> {
    let k = links.len();
    let deadline = Instant::now() + config.round_timeout;
    let mut slots: Vec<Option<L>> = (0..k).map(|_| None).collect();
    let mut owner = None;
    let mut failure = None;
    for (pos, mut link) in links.into_iter().enumerate() {
        if failure.is_some() {
            let _ = link.send(&RoundMessage::abort(0, pos));
            continue;
        }
        let remaining = deadline.saturating_duration_since(Instant::now());
        let msg = match link.recv(remaining) {
            Ok(Some((msg, bytes))) => {
                trace.record(Direction::Up, bytes, &msg);
                msg
            }
            Ok(None) => {
                failure = Some(Error::Abort(format!("link {pos} did not register in time")));
                let _ = link.send(&RoundMessage::abort(0, pos));
                continue;
            }
            Err(e) => {
                failure = Some(e);
                continue;
            }
        };
        let id = msg.participant_id as usize;
        let problem = if msg.kind != MessageKind::Register {
            Some(format!("expected Register, got {}", msg.kind.as_str()))
        } else if id >= k {
            Some(format!("participant id {id} out of range 0..{k}"))
        } else if slots[id].is_some() {
            Some(format!("participant id {id} registered twice"))
        } else if msg.payload.is_some() {
            Some(format!("participant {id} sent a payload with Register"))
        } else if msg.label_owner == Some(true) && owner.is_some() {
            Some(format!("participant {id} is a second label owner"))
        } else {
            None
        };
        if let Some(p) = problem {
            failure = Some(Error::Abort(p));
            let _ = link.send(&RoundMessage::abort(0, id.min(k)));
            continue;
        }
        if msg.label_owner == Some(true) {
            owner = Some(id);
        }
        slots[id] = Some(link);
    }
    let failure = failure.or_else(|| {
        owner
            .is_none()
            .then(|| Error::Abort("no participant owns the labels".into()))
    });
    if let Some(e) = failure {
        for (id, link) in slots.iter_mut().enumerate() {
            if let Some(link) = link {
                let _ = link.send(&RoundMessage::abort(0, id));
            }
        }
        return Err(e);
    }
    let links = slots
        .into_iter()
        .map(|l| l.expect("all slots filled"))
        .collect();
    Ok((links, owner.expect("owner checked")))
}

type Drive = (Matrix, Vec<f64>, bool, Vec<Duration>);

fn drive<L: Transport>(
    config: &CoordinatorConfig,
    session: &mut Session<L>,
) -> std::result::Result<Drive, (usize, Error)> {
    let k = config.num_participants();
    let mut z = initial_consensus(config.num_samples, config.num_classes, config.seed)
        .map_err(|e| (0, e))?;
    for id in 0..k {
        let msg = RoundMessage::consensus(MessageKind::ZBroadcast, 0, id, z.clone());
        session.send(id, &msg).map_err(|e| (0, e))?;
    }

    let mut objective_trace: Vec<f64> = Vec::new();
    let mut durations = Vec::new();
    for round in 1..=config.outer_max {
        let started = Instant::now();
        let deadline = started + config.round_timeout;
        let mut zs = Vec::with_capacity(k);
        let mut parts = Vec::with_capacity(k);
        for id in 0..k {
            let (z_k, part) =
                collect_upload(config, session, id, round, deadline).map_err(|e| (round, e))?;
            zs.push(z_k);
            parts.push(part);
        }
        z = aggregate_z(&zs, &config.zeta).map_err(|e| (round, e))?;
        let obj = assemble_objective(&parts, &zs, &z, &config.zeta);
        let converged = objective_trace
            .last()
            .is_some_and(|&prev| outer_converged(prev, obj, config.outer_tol));
        objective_trace.push(obj);
        let last = converged || round == config.outer_max;
        let kind = if last {
            MessageKind::Converged
        } else {
            MessageKind::ZBroadcast
        };
        for id in 0..k {
            let msg = RoundMessage::consensus(kind, round, id, z.clone());
            session.send(id, &msg).map_err(|e| (round, e))?;
        }
        durations.push(started.elapsed());
        log::debug!("round {round}: objective {obj:.6e}");
        if last {
            return Ok((z, objective_trace, converged, durations));
        }
    }
    unreachable!("outer_max >= 1 always ends in a Converged round")
}

fn collect_upload<L: Transport>(
    config: &CoordinatorConfig,
    session: &mut Session<L>,
    id: usize,
    round: usize,
    deadline: Instant,
) -> Result<(Matrix, f64)> {
    let remaining = deadline.saturating_duration_since(Instant::now());
    let (msg, bytes) = session.links[id]
        .recv(remaining)?
        .ok_or(Error::Timeout(id))?;
    session.trace.record(Direction::Up, bytes, &msg);
    if msg.kind == MessageKind::Abort {
        return Err(Error::Abort(format!("participant {id} aborted")));
    }
    if msg.kind != MessageKind::ZkUpload
        || msg.participant_id as usize != id
        || msg.round as usize != round
    {
        return Err(Error::Abort(format!(
            "expected ZkUpload for round {round} from {id}, got {} for round {} from {}",
            msg.kind.as_str(),
            msg.round,
            msg.participant_id
        )));
    }
    match (msg.payload, msg.objective_part) {
        (Some(z_k), Some(part))
            if z_k.shape() == (config.num_samples, config.num_classes) && part.is_finite() =>
        {
            Ok((z_k, part))
        }
        _ => Err(Error::Abort(format!(
            "malformed upload from participant {id} in round {round}"
        ))),
    }
}
