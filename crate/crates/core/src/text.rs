//! String normalization shared by labeling, matching and ensemble merging.

/// Lowercases and collapses every whitespace run to a single space, trimming
/// both ends.
pub fn fold(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Key used to deduplicate extracted mentions: [`fold`] plus stripping of
/// leading and trailing punctuation.
pub fn dedup_key(text: &str) -> String {
    let folded = fold(text);
    folded.trim_matches(|c: char| c.is_whitespace() || is_edge_punct(c)).to_string()
}

fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '"'
            | '\''
            | '`'
            | '('
            | ')'
            | '['
            | ']'
            | '{'
            | '}'
            | '\u{2018}'
            | '\u{2019}'
            | '\u{201c}'
            | '\u{201d}'
    )
}

/// Lowercase, underscore-separated file stem for an entity name.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// 64-bit FNV-1a, used to derive per-entity seeds that are stable across
/// platforms and releases.
pub fn stable_hash(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_collapses_whitespace() {
        assert_eq!(fold("  Stage \t III\n"), "stage iii");
        assert_eq!(fold(""), "");
    }

    #[test]
    fn dedup_key_strips_punctuation() {
        assert_eq!(dedup_key(" Metformin, "), "metformin");
        assert_eq!(dedup_key("\"aspirin.\""), "aspirin");
        assert_eq!(dedup_key("HbA1c 6.5%"), "hba1c 6.5%");
    }

    #[test]
    fn slug_is_filesystem_safe() {
        assert_eq!(slug("Medication Taken"), "medication_taken");
        assert_eq!(slug("HbA1c Levels"), "hba1c_levels");
        assert_eq!(slug("Perio Diagnoses"), "perio_diagnoses");
    }
}
