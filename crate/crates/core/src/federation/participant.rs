//! The participant side: owns `X_k` (and `Y` on the label owner), uploads only
//! its pseudo-label matrix `Z_k`.

use std::time::Duration;

use super::message::{MessageKind, RoundMessage};
use super::transport::Transport;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::optimizer::ParticipantState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipantOptions {
    /// Longest wait for the next coordinator message.
    pub idle_timeout: Duration,
    /// Sleep this long before uploading in the given round. Used to simulate
    /// a straggler.
    pub delay: Option<(usize, Duration)>,
}

impl Default for ParticipantOptions {
    fn default() -> Self {
        ParticipantOptions {
            idle_timeout: Duration::from_secs(600),
            delay: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticipantOutcome {
    pub state: ParticipantState,
    /// Consensus matrix from the `Converged` message.
    pub z: Matrix,
    pub rounds: usize,
}

pub fn participant_run<L: Transport>(
    mut state: ParticipantState,
    mut link: L,
    options: &ParticipantOptions,
) -> Result<ParticipantOutcome> {
    let id = state.id;
    link.send(&RoundMessage::register(id, state.is_label_owner()))?;
    let mut rounds = 0;
    loop {
        let (msg, _) = link
            .recv(options.idle_timeout)?
            .ok_or_else(|| Error::Abort(format!("participant {id}: coordinator went silent")))?;
        let round = msg.round as usize;
        match msg.kind {
            MessageKind::ZBroadcast => {
                let z = consensus_payload(msg, &state)?;
                let part = match state.step(&z) {
                    Ok(part) => part,
                    Err(e) => {
                        let _ = link.send(&RoundMessage::abort(round + 1, id));
                        return Err(e);
                    }
                };
                if let Some((r, pause)) = options.delay {
                    if r == round + 1 {
                        std::thread::sleep(pause);
                    }
                }
                link.send(&RoundMessage::upload(
                    round + 1,
                    id,
                    state.z_k.clone(),
                    part,
                ))?;
                rounds = round + 1;
            }
            MessageKind::Converged => {
                let z = consensus_payload(msg, &state)?;
                return Ok(ParticipantOutcome { state, z, rounds });
            }
            MessageKind::Abort => {
                return Err(Error::Abort(format!(
                    "participant {id}: coordinator aborted in round {round}"
                )))
            }
            other => {
                return Err(Error::Abort(format!(
                    "participant {id}: unexpected {} message",
                    other.as_str()
                )))
            }
        }
    }
}

fn consensus_payload(msg: RoundMessage, state: &ParticipantState) -> Result<Matrix> {
    let expected = (state.num_samples(), state.num_classes());
    match msg.payload {
        Some(z) if z.shape() == expected => Ok(z),
        _ => Err(Error::Abort(format!(
            "participant {}: consensus message without a {}x{} matrix",
            state.id, expected.0, expected.1
        ))),
    }
}
