use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Conversation, NativeTranscript, Window, WordEvent};
use crate::control::ControlParams;
use crate::{Error, Label, Result, Subtype};

/// Supported transcript layouts.
///
/// - `native`: JSON `{id, participants:[a,b], words:[{speaker, word,
///   start_ms, end_ms, backchannel?}]}`.
/// - `candor_like`: CSV with a header naming `speaker`, `start`, `stop`
///   (seconds), `utterance` and optionally `backchannel`. Word times are
///   spread evenly over each row's span; a `backchannel` column marks the
///   corpus as pre-annotated.
/// - `mmf2f_like`: CSV or TSV rows of `(text, label)` with labels `KEEP`,
///   `TURN`, `BACKCHANNEL`. These carry no timing and parse straight into
///   windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptFormat {
    CandorLike,
    Mmf2fLike,
    Native,
}

impl FromStr for TranscriptFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "candor" | "candor_like" | "candor-like" => Ok(Self::CandorLike),
            "mmf2f" | "mmf2f_like" | "mmf2f-like" => Ok(Self::Mmf2fLike),
            "native" | "json" => Ok(Self::Native),
            other => Err(format!("unknown transcript format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Conversation(Conversation),
    /// Untimed, pre-labeled records.
    Windows(Vec<Window>),
}

/// Parse one transcript file. `id` names the conversation when the format
/// does not carry one.
pub fn parse_transcript(raw: &[u8], format: TranscriptFormat, id: &str) -> Result<Parsed> {
    if raw.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::NoUtterances);
    }
    match format {
        TranscriptFormat::Native => parse_native(raw).map(Parsed::Conversation),
        TranscriptFormat::CandorLike => parse_candor(raw, id).map(Parsed::Conversation),
        TranscriptFormat::Mmf2fLike => parse_mmf2f(raw, id).map(Parsed::Windows),
    }
}

fn parse_native(raw: &[u8]) -> Result<Conversation> {
    let t: NativeTranscript = serde_json::from_slice(raw).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    t.into_conversation()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" | "" => Some(false),
        _ => None,
    }
}

fn parse_candor(raw: &[u8], id: &str) -> Result<Conversation> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(raw);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| Error::Parse {
        line: 1,
        message: format!("missing column {name:?}"),
    };
    let speaker_col = col("speaker").ok_or_else(|| missing("speaker"))?;
    let start_col = col("start").ok_or_else(|| missing("start"))?;
    let stop_col = col("stop").ok_or_else(|| missing("stop"))?;
    let text_col = col("utterance").ok_or_else(|| missing("utterance"))?;
    let bc_col = col("backchannel");

    let mut participants: Vec<String> = Vec::new();
    let mut words = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |message: String| Error::Parse { line, message };

        let speaker = field(speaker_col).to_string();
        let seconds = |i: usize, name: &str| {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| bad(format!("bad {name} {:?}", field(i))))
        };
        let start = (seconds(start_col, "start")? * 1000.0).round() as u64;
        let stop = (seconds(stop_col, "stop")? * 1000.0).round() as u64;
        if stop <= start {
            return Err(bad("stop must be after start".into()));
        }
        let flag = match bc_col {
            Some(i) => Some(
                parse_bool(field(i)).ok_or_else(|| bad(format!("bad backchannel {:?}", field(i))))?,
            ),
            None => None,
        };
        if !participants.contains(&speaker) {
            participants.push(speaker.clone());
            if participants.len() > 2 {
                return Err(Error::UnsupportedFormat(format!(
                    "more than two speakers (line {line})"
                )));
            }
        }
        let tokens: Vec<&str> = field(text_col).split_whitespace().collect();
        let n = tokens.len() as u64;
        let span = stop - start;
        for (i, tok) in tokens.iter().enumerate() {
            let i = i as u64;
            let a = start + span * i / n;
            let b = (start + span * (i + 1) / n).max(a + 1);
            words.push((WordEvent::new(speaker.clone(), *tok, a, b), flag));
        }
    }
    if words.is_empty() {
        return Err(Error::NoUtterances);
    }
    if participants.len() != 2 {
        return Err(Error::UnsupportedFormat(format!(
            "{} speaker(s); exactly two are required",
            participants.len()
        )));
    }
    let participants = [participants[0].clone(), participants[1].clone()];
    Conversation::from_words(id, participants, words)
}

/// Map corpus labels onto the three listener classes.
pub fn map_mmf2f_label(s: &str) -> Option<Label> {
    match s.trim().to_ascii_uppercase().as_str() {
        "KEEP" => Some(Label::StaySilent),
        "TURN" => Some(Label::TurnClaim),
        "BACKCHANNEL" => Some(Label::Backchannel),
        _ => None,
    }
}

fn parse_mmf2f(raw: &[u8], id: &str) -> Result<Vec<Window>> {
    let first_line = raw
        .split(|&b| b == b'\n')
        .find(|l| !l.iter().all(u8::is_ascii_whitespace))
        .unwrap_or_default();
    let delimiter = if first_line.contains(&b'\t') { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(raw);

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected (text, label)".into(),
            });
        }
        let label_field = record.get(record.len() - 1).unwrap_or("").trim();
        let text_fields: Vec<&str> = record.iter().take(record.len() - 1).collect();
        let text = text_fields
            .join(if delimiter == b'\t' { " " } else { "," })
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        if i == 0 && text.eq_ignore_ascii_case("text") && label_field.eq_ignore_ascii_case("label") {
            continue;
        }
        let label = map_mmf2f_label(label_field).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown label {label_field:?}"),
        })?;
        let word_count = text.split_whitespace().count();
        if word_count == 0 {
            return Err(Error::Parse {
                line,
                message: "empty text".into(),
            });
        }
        out.push(Window {
            text,
            label,
            subtype: Subtype::None,
            word_count,
            controls: ControlParams::neutral(),
            conversation_id: id.to_string(),
            boundary_ms: out.len() as u64,
            perspective: "listener".into(),
        });
    }
    if out.is_empty() {
        return Err(Error::NoUtterances);
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
