use super::GraphError;

/// Lowercases, trims, and collapses internal whitespace runs into a single `_`.
pub fn normalize_label(text: &str) -> Result<String, GraphError> {
    let mut out = String::with_capacity(text.len());
    for (i, word) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push('_');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    if out.is_empty() {
        Err(GraphError::InvalidLabel(text.to_string()))
    } else {
        Ok(out)
    }
}

/// Whether `label` belongs to the graph vocabulary alphabet `[a-z0-9_']+`.
pub fn is_vocabulary_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'\'')
}
