//! Federated training: one coordinator, `K` participants, message passing only.
//!
//! Participants hold their feature views (and, for one of them, the labels)
//! and exchange nothing but `N x N_c` pseudo-label matrices with the
//! coordinator. Participant steps and the coordinator's aggregation use the
//! same routines as the single-process reference, and the wire encoding
//! round-trips every float exactly, so a federated run reproduces the
//! reference bit for bit.

pub mod audit;
pub mod coordinator;
pub mod message;
pub mod participant;
pub mod transport;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use audit::{audit_trace, Direction, MessageTrace, PrivacyReport, TraceEntry, Violation};
pub use coordinator::{coordinator_run, CoordinatorConfig, CoordinatorOutcome};
pub use message::{MessageKind, RoundMessage};
pub use participant::{participant_run, ParticipantOptions, ParticipantOutcome};
pub use transport::{in_process_pair, InProcessTransport, TcpHub, TcpTransport, Transport};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Seed};
use crate::optimizer::{Hyperparams, LabelMatrix, ParticipantState, ProblemShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    InProcess,
    /// TCP on the loopback interface; port 0 picks a free port.
    Tcp {
        port: u16,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub hyper: Hyperparams,
    pub seed: Seed,
    pub transport: TransportKind,
    pub round_timeout: Duration,
    /// Participant holding the labels.
    pub label_owner: usize,
}

impl FederationConfig {
    pub const DEFAULT_ROUND_TIMEOUT: Duration = Duration::from_secs(60);

    pub fn new(hyper: Hyperparams, seed: Seed, transport: TransportKind) -> Self {
        FederationConfig {
            hyper,
            seed,
            transport,
            round_timeout: Self::DEFAULT_ROUND_TIMEOUT,
            label_owner: 0,
        }
    }

    pub fn coordinator(&self, shape: &ProblemShape) -> CoordinatorConfig {
        CoordinatorConfig {
            num_samples: shape.num_samples,
            num_classes: shape.num_classes,
            zeta: self.hyper.zeta.clone(),
            outer_tol: self.hyper.outer_tol,
            outer_max: self.hyper.outer_max,
            seed: self.seed,
            round_timeout: self.round_timeout,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub coordinator: CoordinatorOutcome,
    /// Final participant states, by participant id.
    pub participants: Vec<ParticipantOutcome>,
}

impl FederatedRun {
    pub fn weights(&self) -> Vec<&Matrix> {
        self.participants.iter().map(|p| &p.state.w).collect()
    }

    pub fn pseudo_labels(&self) -> Vec<&Matrix> {
        self.participants.iter().map(|p| &p.state.z_k).collect()
    }
}

/// Runs coordinator and participants on separate threads of this process.
pub fn run_federated(
    views: &[Matrix],
    labels: &LabelMatrix,
    config: &FederationConfig,
) -> Result<FederatedRun> {
    let options = vec![ParticipantOptions::default(); views.len()];
    run_federated_with(views, labels, config, &options)
}

/// As [`run_federated`], with per-participant options.
pub fn run_federated_with(
    views: &[Matrix],
    labels: &LabelMatrix,
    config: &FederationConfig,
    options: &[ParticipantOptions],
) -> Result<FederatedRun> {
    let shape = ProblemShape::from_views(views, labels.num_classes())?;
    let k = shape.num_participants;
    config.hyper.validate(k)?;
    if options.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} option sets for {k} participants",
            options.len()
        )));
    }
    if config.label_owner >= k {
        return Err(Error::InvalidArgument(format!(
            "label owner {} out of range 0..{k}",
            config.label_owner
        )));
    }
    if labels.matrix().nrows() != shape.num_samples {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.matrix().nrows(),
            shape.num_samples
        )));
    }
    let states = views
        .iter()
        .enumerate()
        .map(|(id, x)| {
            let owner = id == config.label_owner;
            ParticipantState::init(
                id,
                x.clone(),
                owner.then(|| labels.clone()),
                config.hyper.local(id, owner),
                shape.num_classes,
                config.seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let coord = config.coordinator(&shape);

    match config.transport {
        TransportKind::InProcess => {
            let (ends, links): (Vec<_>, Vec<_>) = (0..k).map(|_| in_process_pair()).unzip();
            run_threads(&coord, states, links, ends, options)
        }
        TransportKind::Tcp { port } => {
            let hub = TcpHub::bind(("127.0.0.1", port))?;
            let addr = hub.local_addr()?;
            log::info!("coordinator listening on {addr}");
            std::thread::scope(|scope| {
                let handles: Vec<_> = states
                    .into_iter()
                    .zip(options)
                    .map(|(state, opts)| {
                        let timeout = config.round_timeout;
                        scope.spawn(move || {
                            let link = TcpTransport::connect(addr, timeout)?;
                            participant_run(state, link, opts)
                        })
                    })
                    .collect();
                let outcome = hub
                    .accept(k, config.round_timeout)
                    .and_then(|links| coordinator_run(&coord, links));
                finish(outcome, handles)
            })
        }
    }
}

fn run_threads<L: Transport>(
    coord: &CoordinatorConfig,
    states: Vec<ParticipantState>,
    coordinator_links: Vec<L>,
    participant_links: Vec<L>,
    options: &[ParticipantOptions],
) -> Result<FederatedRun> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = states
            .into_iter()
            .zip(participant_links)
            .zip(options)
            .map(|((state, link), opts)| scope.spawn(move || participant_run(state, link, opts)))
            .collect();
        let outcome = coordinator_run(coord, coordinator_links);
        finish(outcome, handles)
    })
}

/// Joins participant threads. A coordinator error wins over participant
/// errors, which are usually just the echo of its abort.
fn finish(
    outcome: Result<CoordinatorOutcome>,
    handles: Vec<std::thread::ScopedJoinHandle<'_, Result<ParticipantOutcome>>>,
) -> Result<FederatedRun> {
    let joined: Vec<Result<ParticipantOutcome>> = handles
        .into_iter()
        .map(|h| {
            h.join()
                .unwrap_or_else(|_| Err(Error::Abort("participant thread panicked".into())))
        })
        .collect();
    let coordinator = outcome?;
    let participants = joined.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(FederatedRun {
        coordinator,
        participants,
    })
}
