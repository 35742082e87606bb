//! Contract Net task sharing: announce (CFP), bid (PROPOSE/REFUSE), award
//! (ACCEPT/REJECT) and report (INFORM_DONE/FAILURE).
//!
//! A [`Conversation`] negotiates exactly one task in one round. Everything
//! here is pure state-machine logic; time is passed in by the caller.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::event::{SimTime, Task};
use crate::model::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Performative {
    Cfp,
    Propose,
    Refuse,
    Accept,
    Reject,
    InformDone,
    Failure,
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Performative::Cfp => "CFP",
            Performative::Propose => "PROPOSE",
            Performative::Refuse => "REFUSE",
            Performative::Accept => "ACCEPT",
            Performative::Reject => "REJECT",
            Performative::InformDone => "INFORM_DONE",
            Performative::Failure => "FAILURE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Issued,
    Collecting,
    Awarded,
    Completed,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Completed | Phase::Failed)
    }

    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Issued, Collecting)
                | (Collecting, Awarded)
                | (Collecting, Failed)
                | (Awarded, Completed)
                | (Awarded, Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum Response {
    Pending,
    Proposed { bid: f64 },
    Refused { reason: String },
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub conv_id: String,
    pub performative: Performative,
    pub sender: EntityId,
    pub receiver: EntityId,
    pub body: serde_json::Value,
    pub sim_time: SimTime,
}

impl ProtocolMessage {
    pub fn propose(
        conv_id: &str,
        sender: &EntityId,
        receiver: &EntityId,
        bid: f64,
        sim_time: SimTime,
    ) -> Self {
        ProtocolMessage {
            conv_id: conv_id.to_string(),
            performative: Performative::Propose,
            sender: sender.clone(),
            receiver: receiver.clone(),
            body: json!({ "bid": bid }),
            sim_time,
        }
    }

    pub fn refuse(
        conv_id: &str,
        sender: &EntityId,
        receiver: &EntityId,
        reason: &str,
        sim_time: SimTime,
    ) -> Self {
        ProtocolMessage {
            conv_id: conv_id.to_string(),
            performative: Performative::Refuse,
            sender: sender.clone(),
            receiver: receiver.clone(),
            body: json!({ "reason": reason }),
            sim_time,
        }
    }

    pub fn report(
        conv_id: &str,
        performative: Performative,
        sender: &EntityId,
        receiver: &EntityId,
        body: serde_json::Value,
        sim_time: SimTime,
    ) -> Self {
        ProtocolMessage {
            conv_id: conv_id.to_string(),
            performative,
            sender: sender.clone(),
            receiver: receiver.clone(),
            body,
            sim_time,
        }
    }

    pub fn bid(&self) -> Option<f64> {
        self.body.get("bid").and_then(|b| b.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AwardCriterion {
    #[default]
    LowestTotalPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LexicographicEntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AwardPolicy {
    pub criterion: AwardCriterion,
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractNetError {
    #[error("no participants")]
    NoParticipants,
    #[error("participant {0} listed twice")]
    DuplicateParticipant(EntityId),
    #[error("deadline {deadline} is not after {now}")]
    DeadlineInPast { deadline: SimTime, now: SimTime },
    #[error("{0} is not a participant")]
    UnknownParticipant(EntityId),
    #[error("{0} already responded")]
    DuplicateResponse(EntityId),
    #[error("response from {0} arrived after the deadline")]
    AfterDeadline(EntityId),
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("{0} is not the awarded participant")]
    NotWinner(EntityId),
    #[error("{0} not allowed here")]
    IllegalPerformative(Performative),
    #[error("proposal carries no valid bid")]
    InvalidBid,
    #[error("responses still pending before the deadline")]
    StillCollecting,
}

/// Result of closing the bidding round.
#[derive(Debug, Clone, PartialEq)]
pub enum AwardOutcome {
    Awarded {
        winner: EntityId,
        amount: f64,
        /// ACCEPT to the winner first, then one REJECT per other proposer in
        /// participant order.
        messages: Vec<ProtocolMessage>,
        expired: Vec<EntityId>,
    },
    NoBids {
        expired: Vec<EntityId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub conv_id: String,
    pub initiator: EntityId,
    pub task: Task,
    pub participants: Vec<EntityId>,
    pub deadline: SimTime,
    pub phase: Phase,
    pub responses: BTreeMap<EntityId, Response>,
    pub winner: Option<EntityId>,
}

/// Lowest bid wins; equal bids go to the smallest entity id.
pub fn select_winner<'a, I>(bids: I, _policy: AwardPolicy) -> Option<(EntityId, f64)>
where
    I: IntoIterator<Item = (&'a EntityId, f64)>,
{
    bids.into_iter()
        .min_by(|(a_id, a), (b_id, b)| a.total_cmp(b).then_with(|| a_id.cmp(b_id)))
        .map(|(id, bid)| (id.clone(), bid))
}

/// Opens a conversation and produces one CFP per participant.
pub fn issue_cfp(
    conv_id: &str,
    initiator: &EntityId,
    task: Task,
    participants: Vec<EntityId>,
    deadline: SimTime,
    now: SimTime,
) -> Result<(Conversation, Vec<ProtocolMessage>), ContractNetError> {
    if participants.is_empty() {
        return Err(ContractNetError::NoParticipants);
    }
    let mut responses = BTreeMap::new();
    for p in &participants {
        if responses.insert(p.clone(), Response::Pending).is_some() {
            return Err(ContractNetError::DuplicateParticipant(p.clone()));
        }
    }
    if deadline <= now {
        return Err(ContractNetError::DeadlineInPast { deadline, now });
    }
    let body = serde_json::to_value(&task).expect("task serializes");
    let messages = participants
        .iter()
        .map(|p| ProtocolMessage {
            conv_id: conv_id.to_string(),
            performative: Performative::Cfp,
            sender: initiator.clone(),
            receiver: p.clone(),
            body: body.clone(),
            sim_time: now,
        })
        .collect();
    let mut conv = Conversation {
        conv_id: conv_id.to_string(),
        initiator: initiator.clone(),
        task,
        participants,
        deadline,
        phase: Phase::Issued,
        responses,
        winner: None,
    };
    // The CFPs are out as soon as they are produced.
    conv.set_phase(Phase::Collecting);
    Ok((conv, messages))
}

impl Conversation {
    fn set_phase(&mut self, next: Phase) {
        debug_assert!(self.phase.can_transition_to(next), "{:?} -> {next:?}", self.phase);
        self.phase = next;
    }

    pub fn is_resolved(&self) -> bool {
        self.responses.values().all(|r| !matches!(r, Response::Pending))
    }

    pub fn ready_to_award(&self, now: SimTime) -> bool {
        self.phase == Phase::Collecting && (self.is_resolved() || now >= self.deadline)
    }

    pub fn proposals(&self) -> impl Iterator<Item = (&EntityId, f64)> {
        self.participants.iter().filter_map(|p| match self.responses.get(p) {
            Some(Response::Proposed { bid }) => Some((p, *bid)),
            _ => None,
        })
    }

    /// Records a PROPOSE or REFUSE. A late response marks the slot Expired and
    /// reports `AfterDeadline`; the bid is discarded.
    pub fn receive_response(&mut self, msg: &ProtocolMessage) -> Result<(), ContractNetError> {
        if self.phase != Phase::Collecting {
            return Err(ContractNetError::WrongPhase(self.phase));
        }
        if !matches!(msg.performative, Performative::Propose | Performative::Refuse) {
            return Err(ContractNetError::IllegalPerformative(msg.performative));
        }
        let slot = self
            .responses
            .get_mut(&msg.sender)
            .ok_or_else(|| ContractNetError::UnknownParticipant(msg.sender.clone()))?;
        if !matches!(slot, Response::Pending) {
            return Err(ContractNetError::DuplicateResponse(msg.sender.clone()));
        }
        if msg.sim_time > self.deadline {
            *slot = Response::Expired;
            return Err(ContractNetError::AfterDeadline(msg.sender.clone()));
        }
        *slot = match msg.performative {
            Performative::Propose => {
                let bid = msg
                    .bid()
                    .filter(|b| b.is_finite() && *b >= 0.0)
                    .ok_or(ContractNetError::InvalidBid)?;
                Response::Proposed { bid }
            }
            _ => Response::Refused {
                reason: msg
                    .body
                    .get("reason")
                    .and_then(|r| r.as_str())
                    .unwrap_or("unspecified")
                    .to_string(),
            },
        };
        Ok(())
    }

    /// Closes the round. Allowed once every slot is resolved or the deadline
    /// has passed; slots still pending at that point become Expired.
    pub fn award(
        &mut self,
        policy: AwardPolicy,
        now: SimTime,
    ) -> Result<AwardOutcome, ContractNetError> {
        if self.phase != Phase::Collecting {
            return Err(ContractNetError::WrongPhase(self.phase));
        }
        if !self.ready_to_award(now) {
            return Err(ContractNetError::StillCollecting);
        }
        let mut expired = Vec::new();
        for p in &self.participants {
            let slot = self.responses.get_mut(p).expect("slot per participant");
            if matches!(slot, Response::Pending) {
                *slot = Response::Expired;
                expired.push(p.clone());
            }
        }
        let Some((winner, amount)) = select_winner(self.proposals(), policy) else {
            self.set_phase(Phase::Failed);
            return Ok(AwardOutcome::NoBids { expired });
        };
        let mut messages = vec![ProtocolMessage {
            conv_id: self.conv_id.clone(),
            performative: Performative::Accept,
            sender: self.initiator.clone(),
            receiver: winner.clone(),
            body: json!({ "amount": amount }),
            sim_time: now,
        }];
        for (p, bid) in self.proposals() {
            if p != &winner {
                messages.push(ProtocolMessage {
                    conv_id: self.conv_id.clone(),
                    performative: Performative::Reject,
                    sender: self.initiator.clone(),
                    receiver: p.clone(),
                    body: json!({ "bid": bid }),
                    sim_time: now,
                });
            }
        }
        self.winner = Some(winner.clone());
        self.set_phase(Phase::Awarded);
        Ok(AwardOutcome::Awarded {
            winner,
            amount,
            messages,
            expired,
        })
    }

    /// Applies the winner's INFORM_DONE or FAILURE report.
    pub fn complete(&mut self, msg: &ProtocolMessage) -> Result<(), ContractNetError> {
        if self.phase != Phase::Awarded {
            return Err(ContractNetError::WrongPhase(self.phase));
        }
        if self.winner.as_ref() != Some(&msg.sender) {
            return Err(ContractNetError::NotWinner(msg.sender.clone()));
        }
        match msg.performative {
            Performative::InformDone => self.set_phase(Phase::Completed),
            Performative::Failure => self.set_phase(Phase::Failed),
            other => return Err(ContractNetError::IllegalPerformative(other)),
        }
        Ok(())
    }

    /// Abandons a live conversation because the enclosing process failed.
    pub fn abort(&mut self) -> Result<(), ContractNetError> {
        match self.phase {
            Phase::Collecting | Phase::Awarded => {
                self.set_phase(Phase::Failed);
                Ok(())
            }
            other => Err(ContractNetError::WrongPhase(other)),
        }
    }
}
