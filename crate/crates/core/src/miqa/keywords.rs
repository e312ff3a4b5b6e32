use std::collections::BTreeSet;
use std::sync::OnceLock;

static STOPWORD_LIST: &str = include_str!("stopwords.txt");

fn stopwords() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORD_LIST.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Suffix-trimming stemmer. Rules are tried in order and the first match wins;
/// a stem shorter than three characters is never produced.
pub fn stem(word: &str) -> String {
    let n = word.len();
    if !word.is_ascii() {
        return word.to_string();
    }
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if word.ends_with("sses") {
        return word[..n - 2].to_string();
    }
    if n >= 6 && word.ends_with("ing") {
        return word[..n - 3].to_string();
    }
    if n >= 5 && word.ends_with("ed") {
        return word[..n - 2].to_string();
    }
    if n >= 4 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Lowercase, split on non-alphanumerics, drop stopwords, stem.
pub fn keywords(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !is_stopword(w))
        .map(stem)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn questions_reduce_to_content_words() {
        assert_eq!(keywords("Is there a dog?"), set(&["dog"]));
        assert_eq!(keywords("What color is the dog?"), set(&["dog"]));
        assert_eq!(keywords("Is the dog asleep?"), set(&["dog", "asleep"]));
        assert_eq!(keywords("How many Dogs are running?"), set(&["dog", "runn"]));
    }

    #[test]
    fn stemming_rules() {
        assert_eq!(stem("ponies"), "pony");
        assert_eq!(stem("glasses"), "glass");
        assert_eq!(stem("parked"), "park");
        assert_eq!(stem("cats"), "cat");
        assert_eq!(stem("bus"), "bus");
        assert_eq!(stem("grass"), "grass");
        assert_eq!(stem("red"), "red");
        assert_eq!(stem("bring"), "bring");
    }

    #[test]
    fn shipped_list_loads() {
        assert!(is_stopword("the"));
        assert!(!is_stopword("dog"));
        assert!(stopwords().len() > 100);
    }
}
