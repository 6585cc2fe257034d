use serde::{Deserialize, Serialize};

use crate::{Error, Result, Subtype};

/// One timestamped word from one speaker. Times are stream milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordEvent {
    pub speaker: String,
    pub word: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl WordEvent {
    pub fn new(speaker: impl Into<String>, word: impl Into<String>, start_ms: u64, end_ms: u64) -> Self {
        Self {
            speaker: speaker.into(),
            word: word.into(),
            start_ms,
            end_ms,
        }
    }
}

/// A maximal run of one speaker's words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub words: Vec<WordEvent>,
    pub is_backchannel: bool,
    pub subtype: Subtype,
}

impl Utterance {
    pub fn start_ms(&self) -> u64 {
        self.words.first().map_or(0, |w| w.start_ms)
    }

    pub fn end_ms(&self) -> u64 {
        self.words.iter().map(|w| w.end_ms).max().unwrap_or(0)
    }

    pub fn text(&self) -> String {
        join_words(&self.words)
    }
}

pub(crate) fn join_words<'a>(words: impl IntoIterator<Item = &'a WordEvent>) -> String {
    let mut out = String::new();
    for w in words {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&w.word);
    }
    out
}

/// A dyadic transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub participants: [String; 2],
    /// Ordered by start time.
    pub utterances: Vec<Utterance>,
    pub duration_ms: u64,
    /// Backchannel flags came from the source and must not be re-derived.
    pub backchannels_annotated: bool,
}

impl Conversation {
    /// Build a conversation from loose words.
    ///
    /// Words are ordered by `(start, end, participant)`. An utterance is a
    /// maximal run of consecutive words from one speaker sharing the same
    /// backchannel flag; words of the other participant interleaved by start
    /// time break the run. `flags` is `Some` when the source annotates
    /// backchannels.
    pub fn from_words(
        id: impl Into<String>,
        participants: [String; 2],
        words: Vec<(WordEvent, Option<bool>)>,
    ) -> Result<Self> {
        if participants[0] == participants[1] {
            return Err(Error::UnsupportedFormat(
                "a conversation needs two distinct participants".into(),
            ));
        }
        if words.is_empty() {
            return Err(Error::NoUtterances);
        }
        let annotated = words.iter().any(|(_, f)| f.is_some());
        let slot = |s: &str| participants.iter().position(|p| p == s);
        for (w, _) in &words {
            if slot(&w.speaker).is_none() {
                return Err(Error::UnsupportedFormat(format!(
                    "speaker {:?} is not one of the two participants",
                    w.speaker
                )));
            }
            if w.end_ms <= w.start_ms {
                return Err(Error::invalid(
                    "word",
                    format!("{:?} at {}ms has end <= start", w.word, w.start_ms),
                ));
            }
        }

        let mut words = words;
        words.sort_by_key(|(w, _)| (w.start_ms, w.end_ms, slot(&w.speaker)));

        let mut utterances: Vec<Utterance> = Vec::new();
        for (w, flag) in words {
            let bc = flag.unwrap_or(false);
            match utterances.last_mut() {
                Some(u) if u.speaker == w.speaker && u.is_backchannel == bc => u.words.push(w),
                _ => utterances.push(Utterance {
                    speaker: w.speaker.clone(),
                    words: vec![w],
                    is_backchannel: bc,
                    subtype: Subtype::None,
                }),
            }
        }
        let duration_ms = utterances.iter().map(Utterance::end_ms).max().unwrap_or(0);
        Ok(Self {
            id: id.into(),
            participants,
            utterances,
            duration_ms,
            backchannels_annotated: annotated,
        })
    }

    pub fn participant_index(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p == id)
    }

    /// The participant that is not `id`.
    pub fn other(&self, id: &str) -> &str {
        if self.participants[0] == id {
            &self.participants[1]
        } else {
            &self.participants[0]
        }
    }

    /// All words of `speaker`, ordered by end time.
    pub fn words_of(&self, speaker: &str) -> Vec<&WordEvent> {
        let mut words: Vec<&WordEvent> = self
            .utterances
            .iter()
            .filter(|u| u.speaker == speaker)
            .flat_map(|u| u.words.iter())
            .collect();
        words.sort_by_key(|w| (w.end_ms, w.start_ms));
        words
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(|u| u.words.len()).sum()
    }

    pub fn to_native(&self) -> NativeTranscript {
        let mut words = Vec::with_capacity(self.word_count());
        for u in &self.utterances {
            for w in &u.words {
                words.push(NativeWord {
                    speaker: w.speaker.clone(),
                    word: w.word.clone(),
                    start_ms: w.start_ms,
                    end_ms: w.end_ms,
                    backchannel: self.backchannels_annotated.then_some(u.is_backchannel),
                });
            }
        }
        NativeTranscript {
            id: self.id.clone(),
            participants: self.participants.to_vec(),
            words,
        }
    }
}

/// On-disk native transcript: one conversation per JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeTranscript {
    pub id: String,
    pub participants: Vec<String>,
    pub words: Vec<NativeWord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeWord {
    pub speaker: String,
    pub word: String,
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backchannel: Option<bool>,
}

impl NativeTranscript {
    pub fn into_conversation(self) -> Result<Conversation> {
        let participants: [String; 2] = match self.participants.len() {
            2 => [self.participants[0].clone(), self.participants[1].clone()],
            n if n > 2 => {
                return Err(Error::UnsupportedFormat(format!(
                    "{n} participants; only dyadic conversations are supported"
                )))
            }
            n => {
                return Err(Error::UnsupportedFormat(format!(
                    "{n} participant(s); exactly two are required"
                )))
            }
        };
        let words = self
            .words
            .into_iter()
            .map(|w| {
                (
                    WordEvent {
                        speaker: w.speaker,
                        word: w.word,
                        start_ms: w.start_ms,
                        end_ms: w.end_ms,
                    },
                    w.backchannel,
                )
            })
            .collect();
        Conversation::from_words(self.id, participants, words)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str, word: &str, a: u64, b: u64) -> (WordEvent, Option<bool>) {
        (WordEvent::new(s, word, a, b), None)
    }

    #[test]
    fn interleaved_words_split_utterances() {
        let conv = Conversation::from_words(
            "c",
            ["a".into(), "b".into()],
            vec![
                w("a", "so", 0, 200),
                w("a", "then", 250, 400),
                w("b", "yeah", 420, 600),
                w("a", "we", 650, 800),
            ],
        )
        .unwrap();
        let spans: Vec<(String, usize)> = conv
            .utterances
            .iter()
            .map(|u| (u.speaker.clone(), u.words.len()))
            .collect();
        assert_eq!(
            spans,
            vec![("a".into(), 2), ("b".into(), 1), ("a".into(), 1)]
        );
        assert_eq!(conv.duration_ms, 800);
        assert!(!conv.backchannels_annotated);
    }

    #[test]
    fn rejects_non_positive_durations() {
        let err = Conversation::from_words("c", ["a".into(), "b".into()], vec![w("a", "x", 10, 10)]);
        assert!(matches!(err, Err(Error::Invalid { .. })));
    }

    #[test]
    fn rejects_third_speaker() {
        let err = Conversation::from_words(
            "c",
            ["a".into(), "b".into()],
            vec![w("a", "x", 0, 10), w("c", "y", 10, 20)],
        );
        assert!(matches!(err, Err(Error::UnsupportedFormat(_))));
    }
}
