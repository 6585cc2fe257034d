use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{Dials, QuantileMap};
use crate::corpus::Conversation;
use crate::engine::{replay, EngineConfig, ReplayOptions};
use crate::model::FilmClassifier;
use crate::{Label, Result};

/// Probabilities after one partner word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub word: String,
    pub t_ms: u64,
    pub p_turn_claim: f64,
    pub p_backchannel: f64,
    pub p_stay_silent: f64,
    pub label: Label,
}

/// Per-word decisions for `agent` listening to the other participant, with
/// fixed dials.
pub fn trace(
    model: Arc<FilmClassifier>,
    quantile_map: Option<Arc<QuantileMap>>,
    conv: &Conversation,
    agent: &str,
    dials: Dials,
    config: EngineConfig,
) -> Result<Vec<TraceRecord>> {
    let options = ReplayOptions { config, initial: dials, speed: None };
    let decisions = replay(model, quantile_map, conv, agent, &[], &options)?;
    let words = conv.words_of(conv.other(agent));
    Ok(words
        .into_iter()
        .zip(decisions)
        .map(|(w, d)| TraceRecord {
            word: w.word.clone(),
            t_ms: d.t_ms,
            p_turn_claim: d.p_turn_claim,
            p_backchannel: d.p_backchannel,
            p_stay_silent: d.p_stay_silent,
            label: d.label,
        })
        .collect())
}

pub fn trace_jsonl(records: &[TraceRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn trace_csv(records: &[TraceRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| crate::Error::invalid("csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::invalid("csv", e))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Stacked per-word probability bars, one column per word.
pub fn trace_svg(records: &[TraceRecord]) -> String {
    const COL: f64 = 28.0;
    const HEIGHT: f64 = 200.0;
    const TOP: f64 = 20.0;
    const LABELS: f64 = 80.0;
    let colors = ["#d62728", "#1f77b4", "#c7c7c7"];
    let width = COL * records.len().max(1) as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="11">"#,
        TOP + HEIGHT + LABELS
    );
    for (i, (name, color)) in Label::ALL.iter().zip(colors).enumerate() {
        let x = 10.0 + i as f64 * 110.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="4" width="10" height="10" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="13">{name}</text>"#, x + 14.0);
    }
    for (i, r) in records.iter().enumerate() {
        let x = 10.0 + i as f64 * COL;
        let mut y = TOP;
        for (p, color) in [r.p_turn_claim, r.p_backchannel, r.p_stay_silent].into_iter().zip(colors) {
            let h = p * HEIGHT;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.3}" width="{:.1}" height="{h:.3}" fill="{color}"/>"#,
                COL - 2.0
            );
            y += h;
        }
        let _ = writeln!(
            s,
            r#"<text transform="translate({:.1},{:.1}) rotate(60)">{}</text>"#,
            x + 6.0,
            TOP + HEIGHT + 6.0,
            escape(&r.word)
        );
    }
    s.push_str("</svg>\n");
    s
}
