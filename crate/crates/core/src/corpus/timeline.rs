use serde::{Deserialize, Serialize};

use super::{Conversation, Utterance};
use crate::{Error, Result};

/// Per-frame speaking and backchanneling status for both participants.
///
/// Frame `f` covers the half-open interval `[f·frame_ms, (f+1)·frame_ms)`
/// relative to the timeline origin. A frame in which a participant
/// backchannels is never also counted as speaking for that participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTimeline {
    pub frame_ms: u64,
    pub origin_ms: u64,
    pub n_frames: usize,
    pub participants: [String; 2],
    pub speaking: [Vec<bool>; 2],
    pub backchanneling: [Vec<bool>; 2],
}

impl FrameTimeline {
    pub fn build(conv: &Conversation, frame_ms: u64) -> Result<Self> {
        Self::from_utterances(
            &conv.participants,
            &conv.utterances,
            0,
            conv.duration_ms,
            frame_ms,
        )
    }

    /// Timeline over `[origin_ms, origin_ms + span_ms)`. Words are clipped to
    /// that span.
    pub fn from_utterances(
        participants: &[String; 2],
        utterances: &[Utterance],
        origin_ms: u64,
        span_ms: u64,
        frame_ms: u64,
    ) -> Result<Self> {
        if frame_ms == 0 {
            return Err(Error::invalid("frame_ms", "must be positive"));
        }
        let n_frames = span_ms.div_ceil(frame_ms) as usize;
        let mut speaking = [vec![false; n_frames], vec![false; n_frames]];
        let mut backchanneling = [vec![false; n_frames], vec![false; n_frames]];
        let end_ms = origin_ms + span_ms;

        for u in utterances {
            let Some(p) = participants.iter().position(|x| *x == u.speaker) else {
                continue;
            };
            let track = if u.is_backchannel {
                &mut backchanneling[p]
            } else {
                &mut speaking[p]
            };
            for w in &u.words {
                let start = w.start_ms.max(origin_ms);
                let end = w.end_ms.min(end_ms);
                if end <= start {
                    continue;
                }
                let first = ((start - origin_ms) / frame_ms) as usize;
                let last = ((end - 1 - origin_ms) / frame_ms) as usize;
                for slot in &mut track[first..=last.min(n_frames - 1)] {
                    *slot = true;
                }
            }
        }
        for p in 0..2 {
            for (s, b) in speaking[p].iter_mut().zip(&backchanneling[p]) {
                if *b {
                    *s = false;
                }
            }
        }
        Ok(Self {
            frame_ms,
            origin_ms,
            n_frames,
            participants: participants.clone(),
            speaking,
            backchanneling,
        })
    }

    pub fn index_of(&self, participant: &str) -> Option<usize> {
        self.participants.iter().position(|p| p == participant)
    }

    /// Frame containing the absolute time `t_ms`, if inside the timeline.
    pub fn frame_at(&self, t_ms: u64) -> Option<usize> {
        let f = (t_ms.checked_sub(self.origin_ms)? / self.frame_ms) as usize;
        (f < self.n_frames).then_some(f)
    }

    /// Speaking or backchanneling.
    pub fn voiced(&self, p: usize, f: usize) -> bool {
        self.speaking[p][f] || self.backchanneling[p][f]
    }

    pub fn speaking_frames(&self, p: usize) -> usize {
        self.speaking[p].iter().filter(|&&x| x).count()
    }

    pub fn backchannel_frames(&self, p: usize) -> usize {
        self.backchanneling[p].iter().filter(|&&x| x).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordEvent;
    use crate::Subtype;

    fn one_word(start: u64, end: u64, duration: u64) -> Conversation {
        Conversation {
            id: "c".into(),
            participants: ["a".into(), "b".into()],
            utterances: vec![Utterance {
                speaker: "a".into(),
                words: vec![WordEvent::new("a", "x", start, end)],
                is_backchannel: false,
                subtype: Subtype::None,
            }],
            duration_ms: duration,
            backchannels_annotated: false,
        }
    }

    #[test]
    fn empty_conversation_is_all_false() {
        let conv = Conversation {
            id: "c".into(),
            participants: ["a".into(), "b".into()],
            utterances: vec![],
            duration_ms: 1000,
            backchannels_annotated: false,
        };
        let tl = FrameTimeline::build(&conv, 50).unwrap();
        assert_eq!(tl.n_frames, 20);
        for p in 0..2 {
            assert_eq!(tl.speaking[p].len(), 20);
            assert!(tl.speaking[p].iter().chain(&tl.backchanneling[p]).all(|x| !x));
        }
    }

    #[test]
    fn word_overlapping_three_frames() {
        let tl = FrameTimeline::build(&one_word(100, 210, 1000), 50).unwrap();
        let on: Vec<usize> = (0..tl.n_frames).filter(|&f| tl.speaking[0][f]).collect();
        assert_eq!(on, vec![2, 3, 4]);
    }

    #[test]
    fn word_on_frame_edge_uses_half_open_frames() {
        let tl = FrameTimeline::build(&one_word(100, 150, 1000), 50).unwrap();
        let on: Vec<usize> = (0..tl.n_frames).filter(|&f| tl.speaking[0][f]).collect();
        assert_eq!(on, vec![2]);
    }

    #[test]
    fn zero_frame_rejected() {
        assert!(FrameTimeline::build(&one_word(0, 10, 10), 0).is_err());
    }

    #[test]
    fn partial_final_frame_counts() {
        let tl = FrameTimeline::build(&one_word(1000, 1010, 1010), 50).unwrap();
        assert_eq!(tl.n_frames, 21);
        assert!(tl.speaking[0][20]);
    }
}
