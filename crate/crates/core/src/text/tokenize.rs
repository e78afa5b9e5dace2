/// Split text into sentences on `.`, `!`, `?` and each sentence into
/// lowercase alphanumeric tokens. Sentences without tokens are dropped.
pub fn tokenize(body: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut sentence: Vec<String> = Vec::new();
    let mut word = String::new();
    for ch in body.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            sentence.push(std::mem::take(&mut word));
        }
        if matches!(ch, '.' | '!' | '?') && !sentence.is_empty() {
            sentences.push(std::mem::take(&mut sentence));
        }
    }
    if !word.is_empty() {
        sentence.push(word);
    }
    if !sentence.is_empty() {
        sentences.push(sentence);
    }
    sentences
}

/// All tokens of `body` in order, sentence boundaries discarded.
pub fn tokenize_flat(body: &str) -> Vec<String> {
    tokenize(body).into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sentences() {
        assert_eq!(
            tokenize("Hello world. Bye!"),
            vec![vec!["hello", "world"], vec!["bye"]]
        );
    }

    #[test]
    fn empty_and_punctuation_only() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("... !! ?").is_empty());
    }

    #[test]
    fn unicode_and_digits() {
        assert_eq!(
            tokenize("Élan 2017 U.S. vote"),
            vec![vec!["élan", "2017", "u"], vec!["s"], vec!["vote"]]
        );
    }
}
