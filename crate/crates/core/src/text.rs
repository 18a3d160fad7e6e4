//! Token normalization shared by the embedding store and the dataset reader.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes and lowercases a word.
pub fn normalize_word(word: &str) -> String {
    word.nfc().collect::<String>().to_lowercase()
}

/// Splits `text` on Unicode whitespace, strips leading and trailing
/// punctuation from every piece and lowercases it. Inner punctuation
/// (hyphens, apostrophes) and digits are kept; empty pieces are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let word = normalize_word(piece);
            let stripped = word.trim_matches(|c: char| !c.is_alphanumeric());
            (!stripped.is_empty()).then(|| stripped.to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("Берег реки, крутой."),
            vec!["берег", "реки", "крутой"]
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" ... , !! ").is_empty());
    }

    #[test]
    fn keeps_inner_hyphen_and_digits() {
        assert_eq!(tokenize("3-литровая банка"), vec!["3-литровая", "банка"]);
        assert_eq!(tokenize("(1990)"), vec!["1990"]);
    }

    #[test]
    fn nfc_composes_decomposed_input() {
        // "й" written as и + combining breve
        assert_eq!(tokenize("Краи\u{306}"), vec!["край"]);
    }
}
