//! One participant's pass through a bundle.
//!
//! Every state change appends an event. The creation event carries the seed
//! and configuration, so replaying the log through a fresh session repeats
//! every random draw and reproduces the meta-policy state bit for bit.

use std::sync::Arc;

use ardent_core::persist::{hex_digest, particle_set_digest, MetaPolicyDocument};
use ardent_core::rng::{seeded, SimRng};
use ardent_core::{next_explainer, ExplainerOrdering, FilterConfig, InteractionRecord, MetaPolicyState, ParticleSet};
use serde::{Deserialize, Serialize};

use crate::bundle::{TaskBundle, TaskItem};
use crate::error::{Result, ServiceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Ardent,
    Random,
    Favourite,
}

pub const ARMS: [Arm; 3] = [Arm::Ardent, Arm::Random, Arm::Favourite];

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Ardent => "ardent",
            Arm::Random => "random",
            Arm::Favourite => "favourite",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Milliseconds since the Unix epoch, UTC.
    pub ts: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionCreated {
        session_id: String,
        bundle_id: String,
        arm: Arm,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        favourite: Option<usize>,
        seed: u64,
        n_items: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        filter: Option<FilterConfig>,
        /// Digest of the warm-start particles, when Ardent did not start from the prior.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_particles: Option<String>,
    },
    Intended {
        item_index: usize,
        item_id: String,
        context: usize,
        action: usize,
        proposed: usize,
        ordering: Vec<usize>,
    },
    Explanation {
        item_index: usize,
        explainer_id: usize,
    },
    Final {
        item_index: usize,
        action: usize,
        shown: Vec<usize>,
        /// Digest of the serialized meta-policy state after feedback.
        state_digest: String,
    },
}

/// Everything needed to start a session.
#[derive(Clone, Debug)]
pub struct SessionParams {
    pub arm: Arm,
    pub favourite: Option<usize>,
    pub seed: u64,
    pub filter: FilterConfig,
    pub warm_start: Option<ParticleSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViewedExplanation {
    pub explainer_id: usize,
    pub explainer_label: String,
    pub asset_url: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Choosing,
    Reviewing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemView {
    pub session_id: String,
    pub arm: Arm,
    pub item_index: usize,
    pub n_items: usize,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemPayload>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemPayload {
    pub item_id: String,
    pub asset_url: String,
    pub action_labels: Vec<String>,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intended: Option<usize>,
    /// Present only once the intended action is in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportReveal>,
    pub viewed: Vec<ViewedExplanation>,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportReveal {
    pub support_prediction: usize,
    pub support_label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExplanationReply {
    Shown(ViewedExplanation),
    Exhausted { exhausted: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalReply {
    pub recorded: bool,
    pub item_index: usize,
    pub next_index: usize,
    pub complete: bool,
}

#[derive(Clone, Debug)]
pub struct Session {
    id: String,
    bundle: Arc<TaskBundle>,
    arm: Arm,
    favourite: Option<usize>,
    seed: u64,
    cursor: usize,
    intended: Option<usize>,
    ordering: Option<ExplainerOrdering>,
    viewed: Vec<usize>,
    state: MetaPolicyState,
    rng: SimRng,
    log: Vec<Event>,
}

impl Session {
    pub fn create(id: String, bundle: Arc<TaskBundle>, params: SessionParams, now: u64) -> Result<Session> {
        let dims = bundle.dims()?;
        let favourite = match (params.arm, params.favourite) {
            (Arm::Favourite, None) => {
                return Err(ServiceError::InvalidRequest("the favourite arm needs a favourite explainer".into()))
            }
            (_, Some(f)) if f >= dims.n_explainers => {
                return Err(ServiceError::InvalidRequest(format!("favourite {f} is not an explainer id")))
            }
            (_, f) => f,
        };
        let mut rng = seeded(params.seed, 0);
        let mut initial_particles = None;
        let state = match params.arm {
            Arm::Ardent => match params.warm_start {
                Some(ps) => {
                    if ps.dims() != dims {
                        return Err(ServiceError::InvalidRequest(
                            "warm-start particles do not match the bundle".into(),
                        ));
                    }
                    initial_particles = Some(particle_set_digest(&ps));
                    MetaPolicyState::ardent_from(params.filter.clone(), ps, None)?
                }
                None => MetaPolicyState::ardent(params.filter.clone(), dims, &mut rng)?,
            },
            Arm::Random => MetaPolicyState::Random { dims },
            Arm::Favourite => MetaPolicyState::fixed(dims, favourite.expect("checked above"))?,
        };
        let created = EventBody::SessionCreated {
            session_id: id.clone(),
            bundle_id: bundle.id.clone(),
            arm: params.arm,
            favourite,
            seed: params.seed,
            n_items: bundle.items.len(),
            filter: (params.arm == Arm::Ardent).then_some(params.filter),
            initial_particles,
        };
        Ok(Session {
            id,
            arm: params.arm,
            favourite,
            seed: params.seed,
            cursor: 0,
            intended: None,
            ordering: None,
            viewed: Vec::new(),
            state,
            rng,
            log: vec![Event { ts: now, body: created }],
            bundle,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn favourite(&self) -> Option<usize> {
        self.favourite
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_complete(&self) -> bool {
        self.cursor >= self.bundle.items.len()
    }

    pub fn state(&self) -> &MetaPolicyState {
        &self.state
    }

    pub fn events(&self) -> &[Event] {
        &self.log
    }

    /// Canonical JSON of the meta-policy state.
    pub fn state_json(&self) -> String {
        serde_json::to_string(&MetaPolicyDocument::from(&self.state)).expect("state serializes")
    }

    pub fn state_digest(&self) -> String {
        hex_digest(self.state_json().as_bytes())
    }

    fn current(&self) -> Result<&TaskItem> {
        self.bundle
            .items
            .get(self.cursor)
            .ok_or_else(|| ServiceError::Protocol("session is complete".into()))
    }

    fn asset_url(&self, path: &str) -> String {
        format!("/assets/{}/{}", self.bundle.id, path)
    }

    fn explanation(&self, item: &TaskItem, e: usize) -> ViewedExplanation {
        ViewedExplanation {
            explainer_id: e,
            explainer_label: self.bundle.explainer_labels[e].clone(),
            asset_url: self.asset_url(self.bundle.explanation_asset(item, e)),
        }
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.bundle.action_labels.len() {
            return Err(ServiceError::InvalidRequest(format!("action {action} is not an action id")));
        }
        Ok(())
    }

    fn reveal(&self, item: &TaskItem) -> SupportReveal {
        SupportReveal {
            support_prediction: item.support_prediction,
            support_label: self.bundle.action_labels[item.support_prediction].clone(),
            support_confidence: item.support_confidence,
        }
    }

    /// Current item. The support prediction is withheld until the intended
    /// action has been submitted.
    pub fn item_view(&self) -> ItemView {
        let item = self.bundle.items.get(self.cursor).map(|item| ItemPayload {
            item_id: item.id.clone(),
            asset_url: self.asset_url(&item.asset),
            action_labels: self.bundle.action_labels.clone(),
            phase: if self.intended.is_some() {
                Phase::Reviewing
            } else {
                Phase::Choosing
            },
            intended: self.intended,
            support: self.intended.map(|_| self.reveal(item)),
            viewed: self.viewed.iter().map(|&e| self.explanation(item, e)).collect(),
            exhausted: self.viewed.len() == self.bundle.n_explainers(),
        });
        ItemView {
            session_id: self.id.clone(),
            arm: self.arm,
            item_index: self.cursor,
            n_items: self.bundle.items.len(),
            complete: item.is_none(),
            item,
        }
    }

    pub fn submit_intended(&mut self, action: usize, now: u64) -> Result<SupportReveal> {
        let item = self.current()?.clone();
        if self.intended.is_some() {
            return Err(ServiceError::Protocol("intended action already submitted for this item".into()));
        }
        self.check_action(action)?;
        let context = self.bundle.context_of(&item);
        let mut rng = self.rng.clone();
        let ordering = self.state.rank_explainers(context, item.support_prediction, &mut rng)?;
        self.rng = rng;
        self.log.push(Event {
            ts: now,
            body: EventBody::Intended {
                item_index: self.cursor,
                item_id: item.id.clone(),
                context,
                action,
                proposed: item.support_prediction,
                ordering: ordering.as_slice().to_vec(),
            },
        });
        self.intended = Some(action);
        self.ordering = Some(ordering);
        Ok(self.reveal(&item))
    }

    pub fn request_explanation(&mut self, now: u64) -> Result<ExplanationReply> {
        let item = self.current()?.clone();
        let Some(ordering) = &self.ordering else {
            return Err(ServiceError::Protocol("submit the intended action first".into()));
        };
        let Some(e) = next_explainer(ordering, &self.viewed) else {
            return Ok(ExplanationReply::Exhausted { exhausted: true });
        };
        self.viewed.push(e);
        self.log.push(Event {
            ts: now,
            body: EventBody::Explanation {
                item_index: self.cursor,
                explainer_id: e,
            },
        });
        Ok(ExplanationReply::Shown(self.explanation(&item, e)))
    }

    /// Closes the current item. Ardent learns from it before this returns.
    pub fn submit_final(&mut self, action: usize, now: u64) -> Result<FinalReply> {
        let item = self.current()?.clone();
        let Some(intended) = self.intended else {
            return Err(ServiceError::Protocol("submit the intended action first".into()));
        };
        self.check_action(action)?;
        let record = InteractionRecord {
            context: self.bundle.context_of(&item),
            intended,
            proposed: item.support_prediction,
            shown: self.viewed.clone(),
            final_action: action,
        };
        let mut rng = self.rng.clone();
        let state = self.state.clone().record_feedback(&record, &mut rng)?;
        self.rng = rng;
        self.state = state;
        let item_index = self.cursor;
        self.log.push(Event {
            ts: now,
            body: EventBody::Final {
                item_index,
                action,
                shown: record.shown,
                state_digest: self.state_digest(),
            },
        });
        self.cursor += 1;
        self.intended = None;
        self.ordering = None;
        self.viewed.clear();
        Ok(FinalReply {
            recorded: true,
            item_index,
            next_index: self.cursor,
            complete: self.is_complete(),
        })
    }

    /// Rebuilds a session from its exported log, checking every derived
    /// value (proposals, orderings, shown explainers, state digests) along
    /// the way. `warm_start` must be the particle set the original session
    /// started from, if any.
    pub fn replay(bundle: Arc<TaskBundle>, events: &[Event], warm_start: Option<ParticleSet>) -> Result<Session> {
        let mismatch = |index: usize, reason: String| ServiceError::ReplayMismatch { index, reason };
        let Some(first) = events.first() else {
            return Err(mismatch(0, "empty log".into()));
        };
        let EventBody::SessionCreated {
            session_id,
            bundle_id,
            arm,
            favourite,
            seed,
            n_items,
            filter,
            initial_particles,
        } = &first.body
        else {
            return Err(mismatch(0, "log does not start with session creation".into()));
        };
        if *bundle_id != bundle.id || *n_items != bundle.items.len() {
            return Err(mismatch(0, format!("log belongs to bundle {bundle_id:?}")));
        }
        let warm_start = match (initial_particles, warm_start) {
            (None, _) => None,
            (Some(digest), Some(ps)) if *digest == particle_set_digest(&ps) => Some(ps),
            (Some(_), _) => return Err(mismatch(0, "warm-start particles differ from the original".into())),
        };
        let params = SessionParams {
            arm: *arm,
            favourite: *favourite,
            seed: *seed,
            filter: filter.clone().unwrap_or_default(),
            warm_start,
        };
        let mut s = Session::create(session_id.clone(), bundle, params, first.ts)?;
        for (i, ev) in events.iter().enumerate().skip(1) {
            let item_index = match &ev.body {
                EventBody::SessionCreated { .. } => return Err(mismatch(i, "second creation event".into())),
                EventBody::Intended { item_index, .. }
                | EventBody::Explanation { item_index, .. }
                | EventBody::Final { item_index, .. } => *item_index,
            };
            if item_index != s.cursor {
                return Err(mismatch(i, format!("event for item {item_index} at item {}", s.cursor)));
            }
            match &ev.body {
                EventBody::Intended { action, .. } => {
                    s.submit_intended(*action, ev.ts)?;
                }
                EventBody::Explanation { .. } => {
                    s.request_explanation(ev.ts)?;
                }
                EventBody::Final { action, .. } => {
                    s.submit_final(*action, ev.ts)?;
                }
                EventBody::SessionCreated { .. } => unreachable!("rejected above"),
            }
            if s.log.last() != Some(ev) {
                return Err(mismatch(i, "replayed event differs from the logged one".into()));
            }
        }
        Ok(s)
    }
}
