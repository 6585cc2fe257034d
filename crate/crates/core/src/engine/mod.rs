//! Streaming inference: one session per conversation partner.
//!
//! Every ingested partner word is a boundary. The session keeps the partner's
//! words from the last five seconds, runs the classifier with the current
//! dial values and passes the prediction through the emission policy. All
//! timing uses stream time carried by the events, so a replay is exact
//! regardless of wall-clock speed.

mod policy;
mod replay;

pub use policy::{EmissionPolicy, PolicyState, Suppression};
pub use replay::{decision_log_jsonl, replay, DialChange, ReplayOptions};

use std::collections::VecDeque;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::control::{compute_raw_controls, Dials, QuantileMap, RawControls};
use crate::corpus::{tokenize, FrameTimeline, Lexicon, Utterance, WordEvent};
use crate::model::FilmClassifier;
use crate::{Error, Label, Result, Subtype};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub window_ms: u64,
    pub policy: EmissionPolicy,
    /// Span of partner history used for control estimation.
    pub history_ms: u64,
    pub min_history_ms: u64,
    /// Silence that separates partner utterances during estimation.
    pub utterance_pause_ms: u64,
    pub frame_ms: u64,
    /// Apply estimated partner controls to the session dials.
    pub mirroring: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            window_ms: 5000,
            policy: EmissionPolicy::default(),
            history_ms: 60_000,
            min_history_ms: 30_000,
            utterance_pause_ms: 300,
            frame_ms: 50,
            mirroring: false,
        }
    }
}

/// Dial values shared between a session and whoever adjusts them.
///
/// Clones refer to the same dials. Updates are atomic and are picked up by
/// the next ingest.
#[derive(Debug, Clone, Default)]
pub struct DialHandle(Arc<Mutex<Dials>>);

impl DialHandle {
    pub fn new(dials: Dials) -> Self {
        Self(Arc::new(Mutex::new(dials)))
    }

    /// Validate and apply; returns the applied values. Out-of-range input
    /// leaves the dials unchanged.
    pub fn set(&self, c_bc: f64, c_tc: f64) -> Result<Dials> {
        let d = Dials::new(c_bc, c_tc)?;
        *self.0.lock() = d;
        Ok(d)
    }

    pub fn get(&self) -> Dials {
        *self.0.lock()
    }
}

/// One decision at a partner word boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    /// End time of the triggering word.
    pub t_ms: u64,
    pub label: Label,
    pub p_turn_claim: f64,
    pub p_backchannel: f64,
    pub p_stay_silent: f64,
    pub window_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppressed_by: Option<Suppression>,
    pub c_bc: f64,
    pub c_tc: f64,
}

impl DecisionEvent {
    /// Probabilities in class order.
    pub fn probs(&self) -> [f64; 3] {
        [self.p_turn_claim, self.p_backchannel, self.p_stay_silent]
    }
}

/// Result of [`Session::estimate_partner_controls`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerEstimate {
    pub raw: RawControls,
    pub suggested: Dials,
    pub applied: bool,
}

pub struct Session {
    pub id: String,
    model: Arc<FilmClassifier>,
    quantile_map: Option<Arc<QuantileMap>>,
    config: EngineConfig,
    lexicon: Lexicon,
    dials: DialHandle,
    partner: Option<String>,
    window: VecDeque<WordEvent>,
    history: VecDeque<WordEvent>,
    clock_ms: u64,
    policy: PolicyState,
}

const AGENT: &str = "\u{0}agent";

impl Session {
    pub fn new(
        id: impl Into<String>,
        model: Arc<FilmClassifier>,
        quantile_map: Option<Arc<QuantileMap>>,
        config: EngineConfig,
    ) -> Self {
        Self {
            id: id.into(),
            model,
            quantile_map,
            config,
            lexicon: Lexicon::default(),
            dials: DialHandle::default(),
            partner: None,
            window: VecDeque::new(),
            history: VecDeque::new(),
            clock_ms: 0,
            policy: PolicyState::default(),
        }
    }

    pub fn with_lexicon(mut self, lexicon: Lexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn with_dials(mut self, dials: DialHandle) -> Self {
        self.dials = dials;
        self
    }

    pub fn dial_handle(&self) -> DialHandle {
        self.dials.clone()
    }

    pub fn set_controls(&self, c_bc: f64, c_tc: f64) -> Result<Dials> {
        self.dials.set(c_bc, c_tc)
    }

    pub fn controls(&self) -> Dials {
        self.dials.get()
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn window_text(&self) -> String {
        let words: Vec<&str> = self.window.iter().map(|w| w.word.as_str()).collect();
        words.join(" ")
    }

    /// Ingest one partner word and decide at its end.
    ///
    /// Events must arrive in non-decreasing end time. The first speaker seen
    /// becomes the session's partner; words from anyone else are rejected.
    pub fn ingest(&mut self, event: WordEvent) -> Result<DecisionEvent> {
        if event.end_ms < self.clock_ms {
            return Err(Error::OutOfOrder { end_ms: event.end_ms, clock_ms: self.clock_ms });
        }
        if event.end_ms < event.start_ms {
            return Err(Error::invalid("word", "end precedes start"));
        }
        match &self.partner {
            Some(p) if *p != event.speaker => {
                return Err(Error::invalid(
                    "speaker",
                    format!("session partner is {p:?}, got {:?}", event.speaker),
                ))
            }
            Some(_) => {}
            None => self.partner = Some(event.speaker.clone()),
        }

        let t = event.end_ms;
        self.clock_ms = t;
        let w = self.config.window_ms;
        self.window.push_back(event.clone());
        self.window.retain(|x| x.start_ms + w > t);
        let h = self.config.history_ms;
        self.history.push_back(event);
        while self.history.front().is_some_and(|x| x.end_ms + h <= t) {
            self.history.pop_front();
        }

        let dials = self.dials.get();
        let text = self.window_text();
        let probs = self.model.forward_text(&text, &dials.as_array());
        let (label, suppressed_by) = self.policy.apply(&self.config.policy, t, probs);
        Ok(DecisionEvent {
            t_ms: t,
            label,
            p_turn_claim: probs[0],
            p_backchannel: probs[1],
            p_stay_silent: probs[2],
            window_text: text,
            suppressed_by,
            c_bc: dials.c_bc,
            c_tc: dials.c_tc,
        })
    }

    /// Estimate the partner's own dial values from recent history.
    ///
    /// Partner words are grouped into utterances at pauses, backchannels are
    /// identified with the lexicon heuristic and the frame ratios over the
    /// history span are quantile-normalized. Stream time 0 is the session
    /// start, so silence before the partner's first word counts. The
    /// suggestion is applied to the session only in mirroring mode.
    pub fn estimate_partner_controls(&mut self) -> Result<PartnerEstimate> {
        let need = self.config.min_history_ms;
        let have = self.clock_ms;
        let partner = match &self.partner {
            Some(p) if have >= need => p.clone(),
            _ => return Err(Error::InsufficientHistory { have_ms: have, need_ms: need }),
        };
        let span = have.min(self.config.history_ms);
        let origin = self.clock_ms - span;

        let mut utterances: Vec<Utterance> = Vec::new();
        for w in &self.history {
            match utterances.last_mut() {
                Some(u) if w.start_ms < u.end_ms() + self.config.utterance_pause_ms => u.words.push(w.clone()),
                _ => utterances.push(Utterance {
                    speaker: partner.clone(),
                    words: vec![w.clone()],
                    is_backchannel: false,
                    subtype: Subtype::None,
                }),
            }
        }
        for u in &mut utterances {
            u.is_backchannel = self.lexicon.is_backchannel(&tokenize(&u.text()));
        }
        let participants = [partner.clone(), AGENT.to_string()];
        let timeline = FrameTimeline::from_utterances(&participants, &utterances, origin, span, self.config.frame_ms)?;
        let raw = compute_raw_controls(&timeline, &partner)?;
        let suggested = match &self.quantile_map {
            Some(map) => {
                let n = map.normalize(raw);
                Dials { c_bc: n.c_bc, c_tc: n.c_tc }
            }
            None => Dials { c_bc: raw.bc.clamp(0.0, 1.0), c_tc: raw.tc.clamp(0.0, 1.0) },
        };
        if self.config.mirroring {
            self.dials.set(suggested.c_bc, suggested.c_tc)?;
        }
        Ok(PartnerEstimate { raw, suggested, applied: self.config.mirroring })
    }
}
