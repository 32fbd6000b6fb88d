/// Lowercases and splits into maximal runs of word characters (alphanumerics
/// and `_`). Punctuation and whitespace separate tokens and are dropped, so
/// `"don't stop"` becomes `["don", "t", "stop"]`.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let lower = sentence.to_lowercase();
    lower
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("A man is Shooting."), ["a", "man", "is", "shooting"]);
        assert_eq!(tokenize("don't stop"), ["don", "t", "stop"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize(" ,.!? ").is_empty());
        assert_eq!(tokenize("Two\tdogs\u{00a0}RUN—fast"), ["two", "dogs", "run", "fast"]);
        assert_eq!(tokenize("Ünïcode Straße"), ["ünïcode", "straße"]);
    }
}
