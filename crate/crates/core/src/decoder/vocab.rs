use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
/// Separator between the video, OCR and intent blocks.
pub const SEP: usize = 2;
pub const END: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<sep>", "<end>"];

/// Word-level vocabulary. Words are whitespace-separated and case-sensitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, ids }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Specials first, then every distinct corpus word in sorted order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<&str> =
            texts.into_iter().flat_map(str::split_whitespace).filter(|w| !SPECIALS.contains(w)).collect();
        let tokens = SPECIALS.iter().copied().chain(words).map(String::from).collect::<Vec<_>>();
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.ids.get(word).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(SPECIALS[UNK], String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }

    /// Words joined by single spaces; PAD, SEP and END are skipped.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().filter(|&&i| !matches!(i, PAD | SEP | END)).map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIALS.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_are_reserved_and_round_trip() {
        let v = Vocab::build(["call Ravi", "call Maya now", "<sep> x"]);
        assert_eq!(&v.tokens[..4], &SPECIALS);
        assert_eq!(v.len(), 4 + 5);
        assert_eq!(v.decode(&v.encode("call Maya  now")), "call Maya now");
        assert_eq!(v.encode("call Zed"), vec![v.id("call"), UNK]);
        assert_eq!(v.decode(&[SEP, v.id("Ravi"), END, PAD]), "Ravi");
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }
}
