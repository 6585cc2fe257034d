//! Conversation-level control values and their quantile normalization.
//!
//! For a participant with `N` frames in total, `c_bc = N_bc / N` is the share
//! of frames spent backchanneling and `c_tc = N_spk / N` the share spent
//! speaking (backchannels excluded). Raw ratios are heavily skewed, so the
//! model and the user-facing dials work on their empirical-CDF transform.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{FrameTimeline, Window};
use crate::{Error, Result};

/// Raw per-participant frame ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawControls {
    pub bc: f64,
    pub tc: f64,
}

/// Control values attached to a window: normalized dials plus the raw ratios
/// they came from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlParams {
    pub c_bc: f64,
    pub c_tc: f64,
    pub c_bc_raw: f64,
    pub c_tc_raw: f64,
}

impl ControlParams {
    /// Raw ratios, with the normalized slots holding the same values until a
    /// quantile map is applied.
    pub fn from_raw(raw: RawControls) -> Self {
        Self {
            c_bc: raw.bc,
            c_tc: raw.tc,
            c_bc_raw: raw.bc,
            c_tc_raw: raw.tc,
        }
    }

    /// Mid-scale values for records that carry no timing.
    pub fn neutral() -> Self {
        Self {
            c_bc: 0.5,
            c_tc: 0.5,
            c_bc_raw: 0.5,
            c_tc_raw: 0.5,
        }
    }

    pub fn raw(&self) -> RawControls {
        RawControls {
            bc: self.c_bc_raw,
            tc: self.c_tc_raw,
        }
    }
}

pub fn compute_raw_controls(timeline: &FrameTimeline, participant: &str) -> Result<RawControls> {
    if timeline.n_frames == 0 {
        return Err(Error::EmptyConversation);
    }
    let p = timeline
        .index_of(participant)
        .ok_or_else(|| Error::invalid("participant", format!("{participant:?} not in timeline")))?;
    let n = timeline.n_frames as f64;
    Ok(RawControls {
        bc: timeline.backchannel_frames(p) as f64 / n,
        tc: timeline.speaking_frames(p) as f64 / n,
    })
}

/// User-facing dial pair, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dials {
    pub c_bc: f64,
    pub c_tc: f64,
}

impl Default for Dials {
    fn default() -> Self {
        Self { c_bc: 0.5, c_tc: 0.5 }
    }
}

impl Dials {
    pub fn new(c_bc: f64, c_tc: f64) -> Result<Self> {
        for (name, v) in [("c_bc", c_bc), ("c_tc", c_tc)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    if name == "c_bc" { "c_bc" } else { "c_tc" },
                    format!("{v} is outside [0, 1]"),
                ));
            }
        }
        Ok(Self { c_bc, c_tc })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.c_bc, self.c_tc]
    }
}

/// Named dial settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StylePreset {
    /// Rare backchannels, never interrupts.
    Passive,
    /// Frequent backchannels, occasional turn-taking.
    Collaborative,
    /// Infrequent backchannels, frequent floor-taking.
    Assertive,
}

impl StylePreset {
    pub const ALL: [StylePreset; 3] = [Self::Passive, Self::Collaborative, Self::Assertive];

    pub fn dials(self) -> Dials {
        match self {
            Self::Passive => Dials { c_bc: 0.1, c_tc: 0.0 },
            Self::Collaborative => Dials { c_bc: 0.6, c_tc: 0.2 },
            Self::Assertive => Dials { c_bc: 0.1, c_tc: 0.8 },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Passive => "passive",
            Self::Collaborative => "collaborative",
            Self::Assertive => "assertive",
        }
    }
}

impl FromStr for StylePreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "passive" => Ok(Self::Passive),
            "collaborative" => Ok(Self::Collaborative),
            "assertive" => Ok(Self::Assertive),
            other => Err(format!("unknown preset {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Bc,
    Tc,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Bc => "bc",
            Dimension::Tc => "tc",
        })
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bc" | "c_bc" | "backchannel" => Ok(Dimension::Bc),
            "tc" | "c_tc" | "turn_claim" => Ok(Dimension::Tc),
            other => Err(format!("unknown dimension {other:?}")),
        }
    }
}

pub const DEFAULT_N_QUANTILES: usize = 1000;

/// Per-dimension empirical CDF built from sorted reference points.
///
/// With `n` references `x_0 <= … <= x_{n-1}`, reference `i` sits at quantile
/// `i / (n - 1)`; values in between interpolate linearly and values outside
/// clamp to 0 or 1. A value equal to a run of tied interior references maps
/// to the middle of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub bc: Vec<f64>,
    pub tc: Vec<f64>,
}

impl QuantileMap {
    /// Fit both dimensions independently. When a dimension has more than
    /// `n_quantiles` samples, the references are its empirical quantiles at
    /// `n_quantiles` evenly spaced levels.
    pub fn fit(bc: &[f64], tc: &[f64], n_quantiles: usize) -> Result<Self> {
        Ok(Self {
            bc: references(bc, n_quantiles)?,
            tc: references(tc, n_quantiles)?,
        })
    }

    /// Fit from one sample per `(conversation, listener)` found in `windows`.
    pub fn fit_windows(windows: &[Window], n_quantiles: usize) -> Result<Self> {
        let mut seen = std::collections::BTreeMap::new();
        for w in windows {
            seen.entry((w.conversation_id.as_str(), w.perspective.as_str()))
                .or_insert(w.controls.raw());
        }
        let bc: Vec<f64> = seen.values().map(|r| r.bc).collect();
        let tc: Vec<f64> = seen.values().map(|r| r.tc).collect();
        Self::fit(&bc, &tc, n_quantiles)
    }

    fn refs(&self, dim: Dimension) -> &[f64] {
        match dim {
            Dimension::Bc => &self.bc,
            Dimension::Tc => &self.tc,
        }
    }

    pub fn transform(&self, dim: Dimension, raw: f64) -> f64 {
        let r = self.refs(dim);
        let n = r.len();
        if raw.is_nan() || raw <= r[0] {
            return 0.0;
        }
        if raw >= r[n - 1] {
            return 1.0;
        }
        let last = (n - 1) as f64;
        let lo = r.partition_point(|&v| v < raw);
        let hi = r.partition_point(|&v| v <= raw);
        if hi > lo {
            return (lo + hi - 1) as f64 / 2.0 / last;
        }
        let (a, b) = (r[lo - 1], r[lo]);
        ((lo - 1) as f64 + (raw - a) / (b - a)) / last
    }

    /// Interpolated quantile function.
    pub fn inverse_transform(&self, dim: Dimension, p: f64) -> f64 {
        let r = self.refs(dim);
        let pos = p.clamp(0.0, 1.0) * (r.len() - 1) as f64;
        let i = (pos.floor() as usize).min(r.len() - 2);
        let frac = pos - i as f64;
        r[i] + frac * (r[i + 1] - r[i])
    }

    pub fn normalize(&self, raw: RawControls) -> ControlParams {
        ControlParams {
            c_bc: self.transform(Dimension::Bc, raw.bc),
            c_tc: self.transform(Dimension::Tc, raw.tc),
            c_bc_raw: raw.bc,
            c_tc_raw: raw.tc,
        }
    }

    pub fn apply_to_windows(&self, windows: &mut [Window]) {
        for w in windows {
            w.controls = self.normalize(w.controls.raw());
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let map: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        for refs in [&map.bc, &map.tc] {
            if refs.len() < 2 || refs.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::invalid("quantile map", "references must be sorted, n >= 2"));
            }
        }
        Ok(map)
    }
}

fn references(samples: &[f64], n_quantiles: usize) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid("quantile samples", "need at least 2 per dimension"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("quantile samples", "non-finite value"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nq = n_quantiles.max(2);
    if sorted.len() <= nq {
        return Ok(sorted);
    }
    let last = (sorted.len() - 1) as f64;
    Ok((0..nq)
        .map(|k| {
            let pos = k as f64 / (nq - 1) as f64 * last;
            let i = (pos.floor() as usize).min(sorted.len() - 2);
            let frac = pos - i as f64;
            sorted[i] + frac * (sorted[i + 1] - sorted[i])
        })
        .collect())
}
