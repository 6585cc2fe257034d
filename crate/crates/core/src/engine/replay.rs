use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecisionEvent, EngineConfig, Session};
use crate::control::{Dials, QuantileMap};
use crate::corpus::Conversation;
use crate::model::FilmClassifier;
use crate::{Error, Result};

/// Dial values taking effect at a stream time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DialChange {
    pub t_ms: u64,
    pub c_bc: f64,
    pub c_tc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplayOptions {
    pub config: EngineConfig,
    pub initial: Dials,
    /// Wall-clock pacing as a multiple of real time; `None` runs unpaced.
    pub speed: Option<f64>,
}

/// Feed the partner's words of `conv` through a fresh session with `agent`
/// as listener.
///
/// Dial changes apply before the first word ending at or after their time.
/// Pacing only inserts sleeps, so the decisions are the same at any speed.
pub fn replay(
    model: Arc<FilmClassifier>,
    quantile_map: Option<Arc<QuantileMap>>,
    conv: &Conversation,
    agent: &str,
    schedule: &[DialChange],
    options: &ReplayOptions,
) -> Result<Vec<DecisionEvent>> {
    if conv.participant_index(agent).is_none() {
        return Err(Error::invalid("agent", format!("{agent:?} is not a participant")));
    }
    if let Some(s) = options.speed {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("speed", "must be positive"));
        }
    }
    let mut schedule = schedule.to_vec();
    schedule.sort_by_key(|c| c.t_ms);
    let mut pending = schedule.into_iter().peekable();

    let mut session = Session::new(format!("replay-{}", conv.id), model, quantile_map, options.config);
    session.set_controls(options.initial.c_bc, options.initial.c_tc)?;
    let partner = conv.other(agent).to_string();
    let mut out = Vec::new();
    let mut prev = None;
    for w in conv.words_of(&partner) {
        while let Some(c) = pending.next_if(|c| c.t_ms <= w.end_ms) {
            session.set_controls(c.c_bc, c.c_tc)?;
        }
        if let (Some(speed), Some(p)) = (options.speed, prev) {
            let gap_ms = (w.end_ms - p) as f64 / speed;
            std::thread::sleep(Duration::from_secs_f64(gap_ms / 1000.0));
        }
        prev = Some(w.end_ms);
        out.push(session.ingest(w.clone())?);
    }
    Ok(out)
}

/// One JSON object per line.
pub fn decision_log_jsonl(events: &[DecisionEvent]) -> Result<String> {
    let mut s = String::new();
    for e in events {
        s.push_str(&serde_json::to_string(e)?);
        s.push('\n');
    }
    Ok(s)
}
