use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conversation::join_words;
use super::{Conversation, LabeledBoundary};
use crate::control::ControlParams;
use crate::{Error, Label, Result, Subtype};

/// A transcript slice ending at a word boundary, seen from one listener.
///
/// Serialized as one JSON-lines record of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub text: String,
    pub label: Label,
    pub subtype: Subtype,
    pub word_count: usize,
    #[serde(flatten)]
    pub controls: ControlParams,
    pub conversation_id: String,
    pub boundary_ms: u64,
    /// The listener.
    pub perspective: String,
}

impl Window {
    /// Deterministic ordering key used across the pipeline.
    pub fn sort_key(&self) -> (&str, u64, &str) {
        (&self.conversation_id, self.boundary_ms, &self.perspective)
    }

    pub fn dials(&self) -> [f64; 2] {
        [self.controls.c_bc, self.controls.c_tc]
    }
}

pub fn sort_windows(windows: &mut [Window]) {
    windows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_ms: u64,
    pub stride_ms: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_ms: 5000,
            stride_ms: 50,
        }
    }
}

/// Cut one window per labeled boundary and listener perspective.
///
/// A window holds the speaker's words with `start > t - window_ms` and
/// `end <= t`. Boundaries of one perspective that fall into the same stride
/// step (`ceil(t / stride_ms)`) collapse into a single window at the last of
/// them, so rapid words share a window. Each window inherits the listener's
/// conversation-level controls. Output is sorted by
/// `(conversation_id, boundary_ms, perspective)`.
pub fn extract_windows(
    conv: &Conversation,
    boundaries: &[LabeledBoundary],
    controls: &BTreeMap<String, ControlParams>,
    config: &WindowConfig,
) -> Vec<Window> {
    let stride = config.stride_ms.max(1);
    let mut out = Vec::new();
    for listener in &conv.participants {
        let speaker = conv.other(listener);
        let words = conv.words_of(speaker);
        let mut bs: Vec<&LabeledBoundary> =
            boundaries.iter().filter(|b| &b.listener == listener).collect();
        bs.sort_by_key(|b| b.t_ms);

        let ctl = controls.get(listener).copied().unwrap_or_default();
        for (i, b) in bs.iter().enumerate() {
            let step = b.t_ms.div_ceil(stride);
            if bs.get(i + 1).is_some_and(|n| n.t_ms.div_ceil(stride) == step) {
                continue;
            }
            let upper = words.partition_point(|w| w.end_ms <= b.t_ms);
            let mut in_window: Vec<_> = words[..upper]
                .iter()
                .rev()
                .take_while(|w| w.end_ms + config.window_ms > b.t_ms)
                .filter(|w| w.start_ms + config.window_ms > b.t_ms)
                .copied()
                .collect();
            if in_window.is_empty() {
                continue;
            }
            in_window.reverse();
            let text = join_words(in_window);
            out.push(Window {
                word_count: text.split_whitespace().count(),
                text,
                label: b.label,
                subtype: b.subtype,
                controls: ctl,
                conversation_id: conv.id.clone(),
                boundary_ms: b.t_ms,
                perspective: listener.clone(),
            });
        }
    }
    sort_windows(&mut out);
    out
}

pub fn write_windows_jsonl(path: &Path, windows: &[Window]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for win in windows {
        serde_json::to_writer(&mut w, win)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_windows_jsonl(path: &Path) -> Result<Vec<Window>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let win: Window = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(win);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{label_word_boundaries, FrameTimeline, WordEvent};

    fn alternating(n_per_speaker: usize) -> Conversation {
        let mut words = Vec::new();
        let mut t = 0;
        for i in 0..n_per_speaker {
            words.push((WordEvent::new("a", format!("a{i}"), t, t + 200), None));
            t += 300;
            words.push((WordEvent::new("b", format!("b{i}"), t, t + 200), None));
            t += 300;
        }
        Conversation::from_words("c", ["a".into(), "b".into()], words).unwrap()
    }

    fn windows_of(conv: &Conversation) -> Vec<Window> {
        let tl = FrameTimeline::build(conv, 50).unwrap();
        let b = label_word_boundaries(conv, &tl, 500);
        extract_windows(conv, &b, &BTreeMap::new(), &WindowConfig::default())
    }

    #[test]
    fn one_window_per_boundary_and_perspective() {
        let conv = alternating(12);
        let ws = windows_of(&conv);
        assert_eq!(ws.len(), 24);
        assert_eq!(ws.iter().filter(|w| w.perspective == "a").count(), 12);
        assert!(ws.iter().all(|w| w.word_count >= 1));
    }

    #[test]
    fn old_words_leave_the_window() {
        let words = vec![
            (WordEvent::new("b", "early", 500, 900), None),
            (WordEvent::new("b", "late", 5800, 6000), None),
            (WordEvent::new("a", "x", 7000, 7100), None),
        ];
        let conv = Conversation::from_words("c", ["a".into(), "b".into()], words).unwrap();
        let ws = windows_of(&conv);
        let at_6000 = ws.iter().find(|w| w.boundary_ms == 6000).unwrap();
        assert_eq!(at_6000.text, "late");
        assert_eq!(at_6000.word_count, 1);
    }

    #[test]
    fn words_within_one_stride_share_a_window() {
        let words = vec![
            (WordEvent::new("b", "in", 1000, 1010), None),
            (WordEvent::new("b", "the", 1010, 1030), None),
            (WordEvent::new("b", "end", 1100, 1300), None),
            (WordEvent::new("a", "x", 3000, 3100), None),
        ];
        let conv = Conversation::from_words("c", ["a".into(), "b".into()], words).unwrap();
        let ws: Vec<Window> = windows_of(&conv)
            .into_iter()
            .filter(|w| w.perspective == "a")
            .collect();
        let texts: Vec<&str> = ws.iter().map(|w| w.text.as_str()).collect();
        assert_eq!(texts, vec!["in the", "in the end"]);
    }

    #[test]
    fn jsonl_round_trip() {
        let ws = windows_of(&alternating(3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.jsonl");
        write_windows_jsonl(&path, &ws).unwrap();
        assert_eq!(read_windows_jsonl(&path).unwrap(), ws);
        let line = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        for key in [
            "text", "label", "subtype", "word_count", "c_bc", "c_tc", "conversation_id",
            "boundary_ms", "perspective",
        ] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn malformed_jsonl_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.jsonl");
        std::fs::write(&path, "\n{\"text\": 1}\n").unwrap();
        match read_windows_jsonl(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
