use std::collections::HashMap;

use crate::error::{Error, Result};

/// Word table with dense indices ordered by descending frequency, ties by
/// byte order of the word.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    pub min_count: u64,
    /// Occurrences of retained words in the source sentences.
    pub total_tokens: u64,
}

impl Vocabulary {
    pub fn build<'a, I, S>(sentences: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<[String]> + 'a,
    {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for s in sentences {
            for w in s.as_ref() {
                *freq.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = freq
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words = kept.iter().map(|(w, _)| w.to_string()).collect();
        let counts = kept.iter().map(|&(_, c)| c).collect();
        Ok(Vocabulary::from_parts(words, counts, min_count))
    }

    pub(crate) fn from_parts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let total_tokens = counts.iter().sum();
        Vocabulary {
            words,
            counts,
            index,
            min_count,
            total_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| i as usize)
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}
