//! Small text utilities shared by the matcher, the debate equality check and the metric.

/// Lowercase, trim, collapse internal whitespace and strip punctuation from both ends.
pub fn normalize(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || is_punct(c))
        .to_string()
}

/// Whitespace and case normalization only; punctuation is kept.
pub fn normalize_loose(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Tokens of the normalized text, split on whitespace and punctuation.
pub fn tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(|c: char| c.is_whitespace() || is_punct(c))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…' | '«' | '»' | '。' | '，')
}

/// First `n` characters of `text`, on a char boundary.
pub fn preview(text: &str, n: usize) -> String {
    text.chars().take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_strips_and_collapses() {
        assert_eq!(normalize("  HIGH   life "), "high life");
        assert_eq!(normalize("\"Paris.\""), "paris");
        assert_eq!(normalize("Ki-rin"), "ki-rin");
        assert_eq!(normalize("..."), "");
    }

    #[test]
    fn tokens_split_on_punctuation() {
        assert_eq!(tokens("Paris, France"), vec!["paris", "france"]);
    }

    #[test]
    fn preview_respects_char_boundaries() {
        assert_eq!(preview("héllo", 2), "hé");
    }
}
