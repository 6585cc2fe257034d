//! Transcript corpus: parsing, backchannel identification, frame timelines,
//! boundary labeling and dual-perspective window extraction.

mod conversation;
mod labeling;
mod lexicon;
mod parse;
pub mod synth;
mod timeline;
mod window;

pub use conversation::{Conversation, NativeTranscript, NativeWord, Utterance, WordEvent};
pub use labeling::{annotate_subtypes, label_word_boundaries, onset_subtype, LabeledBoundary};
pub use lexicon::{detect_backchannels, normalize_token, tokenize, Lexicon};
pub use parse::{parse_transcript, Parsed, TranscriptFormat};
pub use synth::{generate_synthetic_corpus, SynthSpec};
pub use timeline::FrameTimeline;
pub use window::{
    extract_windows, read_windows_jsonl, sort_windows, write_windows_jsonl, Window, WindowConfig,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{compute_raw_controls, ControlParams};
use crate::Result;

/// Settings for turning a timed conversation into labeled windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub frame_ms: u64,
    pub horizon_ms: u64,
    pub window_ms: u64,
    pub stride_ms: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            frame_ms: 50,
            horizon_ms: 500,
            window_ms: 5000,
            stride_ms: 50,
        }
    }
}

/// Output of [`prepare_conversation`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub conversation: Conversation,
    pub timeline: FrameTimeline,
    /// Raw control ratios keyed by participant id.
    pub controls: BTreeMap<String, ControlParams>,
    pub windows: Vec<Window>,
}

/// Run the full per-conversation preparation: backchannel detection, frame
/// timeline, subtype annotation, boundary labels, raw controls and windows.
///
/// Windows carry raw control ratios in both the raw and normalized slots until
/// a quantile map is applied.
pub fn prepare_conversation(
    conversation: &Conversation,
    lexicon: &Lexicon,
    config: &PrepareConfig,
) -> Result<Prepared> {
    let mut conv = detect_backchannels(conversation, lexicon);
    let timeline = FrameTimeline::build(&conv, config.frame_ms)?;
    annotate_subtypes(&mut conv, &timeline);
    let boundaries = label_word_boundaries(&conv, &timeline, config.horizon_ms);

    let mut controls = BTreeMap::new();
    for p in &conv.participants {
        let raw = compute_raw_controls(&timeline, p)?;
        controls.insert(p.clone(), ControlParams::from_raw(raw));
    }

    let windows = extract_windows(
        &conv,
        &boundaries,
        &controls,
        &WindowConfig {
            window_ms: config.window_ms,
            stride_ms: config.stride_ms,
        },
    );
    Ok(Prepared {
        conversation: conv,
        timeline,
        controls,
        windows,
    })
}
