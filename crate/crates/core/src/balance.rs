//! Bin-stratified balanced downsampling and deterministic train/val/test
//! splitting of labeled windows.
//!
//! Windows are binned by word count. Within a bin `b` every label keeps
//! exactly `n_b = min_y count(b, y)` windows, so short and long windows are
//! balanced separately and the output class totals are equal.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{sort_windows, Window};
use crate::{Error, Label, Result};

/// Word-count bins given by inclusive upper edges; the last bin is open.
///
/// The default is `{1}, {2}, {3-4}, {5-6}, …, {29-30}, {31+}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSpec {
    upper: Vec<usize>,
}

impl Default for BinSpec {
    fn default() -> Self {
        let mut upper = vec![1, 2];
        upper.extend((4..=30).step_by(2));
        Self { upper }
    }
}

impl BinSpec {
    /// `upper` must be strictly increasing and start at 1 or above.
    pub fn from_upper_edges(upper: Vec<usize>) -> Result<Self> {
        if upper.is_empty() || upper[0] == 0 || upper.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bins", "upper edges must be increasing and positive"));
        }
        Ok(Self { upper })
    }

    pub fn len(&self) -> usize {
        self.upper.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `None` for a zero word count.
    pub fn bin_of(&self, word_count: usize) -> Option<usize> {
        (word_count > 0).then(|| self.upper.partition_point(|&u| u < word_count))
    }

    pub fn name(&self, bin: usize) -> String {
        let lo = if bin == 0 { 1 } else { self.upper[bin - 1] + 1 };
        match self.upper.get(bin) {
            None => format!("{lo}+"),
            Some(&hi) if hi == lo => lo.to_string(),
            Some(&hi) => format!("{lo}-{hi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Balanced windows plus their kept counts per `(bin, label)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDataset {
    pub windows: Vec<Window>,
    pub per_bin_counts: BTreeMap<(usize, Label), usize>,
    pub bins: BinSpec,
    /// `None` before splitting.
    pub split: Option<Split>,
}

impl SampledDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn class_totals(&self) -> [usize; 3] {
        let mut t = [0; 3];
        for w in &self.windows {
            t[w.label.index()] += 1;
        }
        t
    }
}

fn count_bins(windows: &[Window], bins: &BinSpec) -> BTreeMap<(usize, Label), usize> {
    let mut counts = BTreeMap::new();
    for w in windows {
        if let Some(b) = bins.bin_of(w.word_count) {
            *counts.entry((b, w.label)).or_insert(0) += 1;
        }
    }
    counts
}

/// Keep `n_b` windows per label in every bin, chosen by a seeded shuffle of
/// each `(bin, label)` bucket. Windows with a zero word count fall in no bin
/// and are dropped. The output is sorted by window key.
pub fn downsample(windows: &[Window], bins: &BinSpec, seed: u64) -> SampledDataset {
    let mut sorted = windows.to_vec();
    sort_windows(&mut sorted);

    let mut buckets: BTreeMap<(usize, Label), Vec<Window>> = BTreeMap::new();
    for w in sorted {
        if let Some(b) = bins.bin_of(w.word_count) {
            buckets.entry((b, w.label)).or_default().push(w);
        }
    }

    let mut kept = Vec::new();
    let mut per_bin_counts = BTreeMap::new();
    for bin in 0..bins.len() {
        let n_b = Label::ALL
            .iter()
            .map(|&y| buckets.get(&(bin, y)).map_or(0, Vec::len))
            .min()
            .unwrap_or(0);
        if n_b == 0 {
            continue;
        }
        for y in Label::ALL {
            let bucket = buckets.get_mut(&(bin, y)).expect("non-empty bucket");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((bin * Label::ALL.len() + y.index()) as u64);
            bucket.shuffle(&mut rng);
            kept.extend(bucket.drain(..n_b));
            per_bin_counts.insert((bin, y), n_b);
        }
    }
    sort_windows(&mut kept);
    SampledDataset {
        windows: kept,
        per_bin_counts,
        bins: bins.clone(),
        split: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self {
            train: 18,
            val: 1,
            test: 1,
        }
    }
}

impl SplitRatio {
    fn total(&self) -> u32 {
        self.train + self.val + self.test
    }

    /// Target sizes: validation and test are rounded, training takes the rest.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let total = self.total() as f64;
        let val = (n as f64 * self.val as f64 / total).round() as usize;
        let test = (n as f64 * self.test as f64 / total).round() as usize;
        [n - val - test, val, test]
    }
}

/// What stays together when splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    /// All windows of a conversation land in the same split.
    #[default]
    Conversation,
    /// Windows are shuffled and cut independently.
    Window,
}

impl FromStr for SplitUnit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "conversation" => Ok(Self::Conversation),
            "window" => Ok(Self::Window),
            other => Err(format!("unknown split unit {other:?}")),
        }
    }
}

/// Deterministic train/val/test split.
///
/// With [`SplitUnit::Window`] sizes match [`SplitRatio::sizes`] exactly.
/// With [`SplitUnit::Conversation`] shuffled conversations are assigned one at
/// a time to the split furthest below its target, so sizes are close to the
/// ratio but depend on conversation sizes.
pub fn split(
    dataset: &SampledDataset,
    ratio: SplitRatio,
    unit: SplitUnit,
    seed: u64,
) -> Result<[SampledDataset; 3]> {
    let n = dataset.windows.len();
    if n < ratio.total().max(20) as usize {
        return Err(Error::DatasetTooSmall);
    }
    let targets = ratio.sizes(n);
    let mut sorted = dataset.windows.clone();
    sort_windows(&mut sorted);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut parts: [Vec<Window>; 3] = Default::default();
    match unit {
        SplitUnit::Window => {
            sorted.shuffle(&mut rng);
            let mut it = sorted.into_iter();
            for (part, &size) in parts.iter_mut().zip(&targets) {
                part.extend(it.by_ref().take(size));
            }
        }
        SplitUnit::Conversation => {
            let mut groups: BTreeMap<String, Vec<Window>> = BTreeMap::new();
            for w in sorted {
                groups.entry(w.conversation_id.clone()).or_default().push(w);
            }
            let mut groups: Vec<Vec<Window>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            for g in groups {
                let deficit = |i: usize| targets[i] as i64 - parts[i].len() as i64;
                let best = (0..3).max_by_key(|&i| (deficit(i), std::cmp::Reverse(i))).unwrap();
                parts[best].extend(g);
            }
        }
    }

    let mut out = parts.map(|p| SampledDataset {
        per_bin_counts: BTreeMap::new(),
        windows: p,
        bins: dataset.bins.clone(),
        split: None,
    });
    for (ds, s) in out.iter_mut().zip(Split::ALL) {
        sort_windows(&mut ds.windows);
        ds.per_bin_counts = count_bins(&ds.windows, &ds.bins);
        ds.split = Some(s);
    }
    Ok(out)
}
