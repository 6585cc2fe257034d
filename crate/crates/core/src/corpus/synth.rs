//! Seeded generator of dyadic transcripts with learnable listener behavior.
//!
//! Speakers talk in phrases of filler words. A phrase may end in a two-word
//! cue. Backchannel cues and turn cues each come in ten levels; cue level `k`
//! carries the threshold `(k + 0.5) / 10`, and a listener responds exactly when
//! their propensity for that behavior exceeds it. Responses therefore follow
//! from the window text plus the listener's conversation-level style, and the
//! empirical response rate of a listener tracks their propensity. Turns end
//! either with a claimed turn cue or, after `max_phrases_per_turn` phrases,
//! with a yield cue that the listener always answers.
//!
//! Timing is chosen so that a response onset falls within 500 ms of both cue
//! words and never within 500 ms of the word before the cue.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Conversation, WordEvent};
use crate::{Error, Result};

pub const FILLERS: &[&str] = &[
    "the", "a", "we", "went", "to", "store", "and", "then", "it", "was", "big", "day", "my",
    "friend", "said", "good", "time", "later", "after", "work", "lunch", "coffee", "movie",
    "park", "weekend", "car", "train", "city", "house", "dog", "cat", "book", "game", "music",
    "family", "dinner", "morning", "night", "trip", "plan", "idea", "project", "meeting",
    "school", "class", "teacher", "kids", "weather", "rain", "sun", "beach", "mountain", "walk",
    "run", "cook", "read", "watch", "play", "bought", "found", "liked", "saw", "made", "new",
];

/// Backchannel-inviting cues, ordered by level.
pub const BACKCHANNEL_CUES: [(&str, &str); 10] = [
    ("basically", "anyway"),
    ("honestly", "though"),
    ("literally", "everywhere"),
    ("remember", "yesterday"),
    ("imagine", "that"),
    ("actually", "crazy"),
    ("seriously", "wild"),
    ("totally", "random"),
    ("pretty", "funny"),
    ("super", "weird"),
];

/// Turn-inviting cues, ordered by level.
pub const TURN_CUES: [(&str, &str); 10] = [
    ("what", "think"),
    ("how", "about"),
    ("does", "sense"),
    ("wouldn't", "agree"),
    ("any", "ideas"),
    ("your", "take"),
    ("can", "explain"),
    ("should", "try"),
    ("did", "ever"),
    ("have", "tried"),
];

/// Ends a turn unconditionally.
pub const YIELD_CUE: (&str, &str) = ("that's", "all");

pub const BACKCHANNEL_TOKENS: &[&str] = &["yeah", "mm-hmm", "uh-huh", "right", "okay", "mhm", "sure", "yep"];

pub fn cue_threshold(level: usize) -> f64 {
    (level as f64 + 0.5) / 10.0
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub conversations: usize,
    pub conversation_ms: u64,
    /// Mean per-participant backchannel propensity.
    pub backchannel_rate: f64,
    /// Mean per-participant turn-claim propensity.
    pub turn_claim_rate: f64,
    /// Propensities are `rate * (1 + spread * U(-1, 1))`, clamped to [0, 1].
    pub rate_spread: f64,
    /// Share of phrase ends carrying a backchannel cue.
    pub backchannel_cue_prob: f64,
    /// Share of phrase ends carrying a turn cue.
    pub turn_cue_prob: f64,
    pub max_phrases_per_turn: usize,
    /// Share of claimed turns where the speaker adds one word after the onset.
    pub interruption_prob: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            conversations: 500,
            conversation_ms: 90_000,
            backchannel_rate: 0.5,
            turn_claim_rate: 0.5,
            rate_spread: 1.0,
            backchannel_cue_prob: 0.35,
            turn_cue_prob: 0.35,
            max_phrases_per_turn: 6,
            interruption_prob: 0.25,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} is outside [0, 1]")))
            }
        };
        unit("backchannel_rate", self.backchannel_rate)?;
        unit("turn_claim_rate", self.turn_claim_rate)?;
        unit("rate_spread", self.rate_spread)?;
        unit("backchannel_cue_prob", self.backchannel_cue_prob)?;
        unit("turn_cue_prob", self.turn_cue_prob)?;
        unit("interruption_prob", self.interruption_prob)?;
        if self.backchannel_cue_prob + self.turn_cue_prob > 1.0 {
            return Err(Error::invalid("cue probabilities", "sum exceeds 1"));
        }
        if self.conversations == 0 {
            return Err(Error::invalid("conversations", "must be at least 1"));
        }
        if self.conversation_ms < 1000 {
            return Err(Error::invalid("conversation_ms", "must be at least 1000"));
        }
        if self.max_phrases_per_turn == 0 {
            return Err(Error::invalid("max_phrases_per_turn", "must be at least 1"));
        }
        Ok(())
    }
}

/// A generated conversation with the propensities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConversation {
    pub conversation: Conversation,
    /// `[backchannel, turn_claim]` propensity per participant.
    pub propensity: [[f64; 2]; 2],
}

pub fn generate_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<Vec<Conversation>> {
    Ok(generate_with_truth(spec, seed)?
        .into_iter()
        .map(|s| s.conversation)
        .collect())
}

pub fn generate_with_truth(spec: &SynthSpec, seed: u64) -> Result<Vec<SyntheticConversation>> {
    spec.validate()?;
    (0..spec.conversations)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            generate_one(spec, format!("syn{seed}-{i:05}"), &mut rng)
        })
        .collect()
}

const BC: usize = 0;
const TC: usize = 1;

struct Writer {
    ids: [String; 2],
    words: Vec<(WordEvent, Option<bool>)>,
}

impl Writer {
    /// Emit a word starting at `start`; returns its end time.
    fn say(&mut self, who: usize, word: &str, start: u64, dur: u64, backchannel: bool) -> u64 {
        let end = start + dur;
        self.words.push((
            WordEvent::new(self.ids[who].clone(), word, start, end),
            Some(backchannel),
        ));
        end
    }
}

/// Cycles through a shuffled permutation of cue levels.
struct Deck {
    cards: Vec<usize>,
}

impl Deck {
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.cards.is_empty() {
            self.cards = (0..10).collect();
            self.cards.shuffle(rng);
        }
        self.cards.pop().unwrap_or(0)
    }
}

fn generate_one(spec: &SynthSpec, id: String, rng: &mut ChaCha8Rng) -> Result<SyntheticConversation> {
    let mut propensity = [[0.0; 2]; 2];
    for p in &mut propensity {
        for (kind, rate) in [spec.backchannel_rate, spec.turn_claim_rate].into_iter().enumerate() {
            let jitter = spec.rate_spread * rng.random_range(-1.0..=1.0);
            p[kind] = (rate * (1.0 + jitter)).clamp(0.0, 1.0);
        }
    }
    let mut decks: Vec<Vec<Deck>> = (0..2)
        .map(|_| (0..2).map(|_| Deck { cards: Vec::new() }).collect())
        .collect();

    let mut out = Writer {
        ids: ["A".to_string(), "B".to_string()],
        words: Vec::new(),
    };
    let mut speaker: usize = rng.random_range(0..2);
    let mut phrases = 0usize;
    let mut t: u64 = rng.random_range(0..=300);

    while t < spec.conversation_ms {
        let listener = 1 - speaker;
        let n_fill = rng.random_range(3..=7);
        let mut last_end = t;
        for _ in 0..n_fill {
            let word = FILLERS[rng.random_range(0..FILLERS.len())];
            last_end = out.say(speaker, word, t, rng.random_range(180..=320), false);
            t = last_end + rng.random_range(10..=60);
        }
        phrases += 1;

        let say_cue = move |out: &mut Writer, rng: &mut ChaCha8Rng, t: u64, cue: (&str, &str)| {
            let e1 = out.say(speaker, cue.0, t, rng.random_range(220..=280), false);
            let s2 = e1 + rng.random_range(10..=40);
            out.say(speaker, cue.1, s2, rng.random_range(220..=280), false)
        };

        if phrases >= spec.max_phrases_per_turn {
            let e = say_cue(&mut out, rng, t, YIELD_CUE);
            t = e + rng.random_range(80..=150);
            speaker = listener;
            phrases = 0;
            continue;
        }

        let r: f64 = rng.random();
        if r < spec.backchannel_cue_prob {
            let level = decks[listener][BC].draw(rng);
            let e = say_cue(&mut out, rng, t, BACKCHANNEL_CUES[level]);
            if propensity[listener][BC] > cue_threshold(level) {
                let onset = e + rng.random_range(80..=150);
                let token = BACKCHANNEL_TOKENS[rng.random_range(0..BACKCHANNEL_TOKENS.len())];
                let bc_end = out.say(listener, token, onset, rng.random_range(250..=350), true);
                t = bc_end + rng.random_range(80..=200);
            } else {
                t = e + rng.random_range(60..=200);
            }
        } else if r < spec.backchannel_cue_prob + spec.turn_cue_prob {
            let level = decks[listener][TC].draw(rng);
            let e = say_cue(&mut out, rng, t, TURN_CUES[level]);
            if propensity[listener][TC] > cue_threshold(level) {
                if rng.random::<f64>() < spec.interruption_prob {
                    let word = FILLERS[rng.random_range(0..FILLERS.len())];
                    let start = e + rng.random_range(10..=40);
                    out.say(speaker, word, start, rng.random_range(180..=320), false);
                }
                t = e + rng.random_range(80..=150);
                speaker = listener;
                phrases = 0;
            } else {
                t = e + rng.random_range(60..=200);
            }
        } else {
            t = last_end + rng.random_range(60..=200);
        }
    }

    let ids = out.ids.clone();
    let conversation = Conversation::from_words(id, ids, out.words)?;
    Ok(SyntheticConversation {
        conversation,
        propensity,
    })
}
