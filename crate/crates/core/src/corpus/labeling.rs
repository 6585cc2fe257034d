use serde::{Deserialize, Serialize};

use super::{Conversation, FrameTimeline};
use crate::{Label, Subtype};

/// A listener onset counts as an interruption when the speaker falls silent
/// within this long after it.
pub const INTERRUPTION_STOP_MS: u64 = 1000;

/// Silence shorter than this does not end the speaker's activity.
pub const SPEAKER_PAUSE_MS: u64 = 200;

/// Label for one speaker word boundary, seen from one listener.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledBoundary {
    pub listener: String,
    pub speaker: String,
    /// End time of the speaker word.
    pub t_ms: u64,
    pub label: Label,
    pub subtype: Subtype,
}

/// Classify a listener onset against the speaker's frames.
///
/// - speaker inactive at the onset frame: turn-taking
/// - speaker active and silent within [`INTERRUPTION_STOP_MS`]: interruption
/// - speaker active and still talking after that: overlap
pub fn onset_subtype(timeline: &FrameTimeline, speaker: usize, onset_ms: u64) -> Subtype {
    let Some(f0) = timeline.frame_at(onset_ms) else {
        return Subtype::TurnTaking;
    };
    if !timeline.voiced(speaker, f0) {
        return Subtype::TurnTaking;
    }
    let pause_frames = SPEAKER_PAUSE_MS.div_ceil(timeline.frame_ms).max(1) as usize;
    let n = timeline.n_frames;
    let mut f = f0;
    let stop_frame = loop {
        if f >= n {
            break n;
        }
        if !timeline.voiced(speaker, f) {
            let run_end = (f..n).find(|&g| timeline.voiced(speaker, g)).unwrap_or(n);
            if run_end - f >= pause_frames || run_end == n {
                break f;
            }
            f = run_end;
        } else {
            f += 1;
        }
    };
    let stop_ms = timeline.origin_ms + stop_frame as u64 * timeline.frame_ms;
    if stop_ms.saturating_sub(onset_ms) <= INTERRUPTION_STOP_MS {
        Subtype::Interruption
    } else {
        Subtype::Overlap
    }
}

/// Set the turn-claim subtype on every non-backchannel utterance.
pub fn annotate_subtypes(conv: &mut Conversation, timeline: &FrameTimeline) {
    let participants = conv.participants.clone();
    for u in &mut conv.utterances {
        u.subtype = if u.is_backchannel {
            Subtype::None
        } else {
            let other = if u.speaker == participants[0] { 1 } else { 0 };
            onset_subtype(timeline, other, u.start_ms())
        };
    }
}

/// Label every speaker word boundary from both listener perspectives.
///
/// For a boundary at `t` the earliest listener utterance onset in
/// `[t, t + horizon_ms)` decides the label: a backchannel onset gives
/// [`Label::Backchannel`], any other onset [`Label::TurnClaim`] with its
/// subtype. No onset gives [`Label::StaySilent`]. One onset may label several
/// preceding boundaries.
pub fn label_word_boundaries(
    conv: &Conversation,
    timeline: &FrameTimeline,
    horizon_ms: u64,
) -> Vec<LabeledBoundary> {
    let mut out = Vec::new();
    for (li, listener) in conv.participants.iter().enumerate() {
        let speaker = &conv.participants[1 - li];
        let mut onsets: Vec<(u64, bool)> = conv
            .utterances
            .iter()
            .filter(|u| &u.speaker == listener)
            .map(|u| (u.start_ms(), u.is_backchannel))
            .collect();
        onsets.sort_unstable();

        for w in conv.words_of(speaker) {
            let t = w.end_ms;
            let i = onsets.partition_point(|&(o, _)| o < t);
            let (label, subtype) = match onsets.get(i) {
                Some(&(o, true)) if o < t + horizon_ms => (Label::Backchannel, Subtype::None),
                Some(&(o, false)) if o < t + horizon_ms => {
                    (Label::TurnClaim, onset_subtype(timeline, 1 - li, o))
                }
                _ => (Label::StaySilent, Subtype::None),
            };
            out.push(LabeledBoundary {
                listener: listener.clone(),
                speaker: speaker.clone(),
                t_ms: t,
                label,
                subtype,
            });
        }
    }
    out
}
