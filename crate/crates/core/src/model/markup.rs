//! Entity markup inside intent examples: `My favorite movie is [Matrix]{movie}`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkupSpan {
    /// Character offsets into [`IntentExample::text`], end exclusive.
    pub start: usize,
    pub end: usize,
    pub type_name: String,
}

/// One training utterance of an intent node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentExample {
    /// The example as written, including markup.
    pub source: String,
    /// The example with markup removed.
    pub text: String,
    pub spans: Vec<MarkupSpan>,
}

impl IntentExample {
    /// The example with every marked entity replaced by `{type}`.
    pub fn masked(&self) -> String {
        crate::nlu::replace_spans(
            &self.text,
            self.spans
                .iter()
                .map(|s| (s.start, s.end, s.type_name.as_str())),
        )
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &str> {
        self.spans.iter().map(|s| s.type_name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed entity markup at character {position}: {message}")]
pub struct MarkupError {
    /// 1-based character position in the source.
    pub position: usize,
    pub message: String,
}

fn malformed(position: usize, message: &str) -> MarkupError {
    MarkupError {
        position,
        message: message.to_string(),
    }
}

fn is_type_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Parses `[surface]{type}` markup. Brackets and braces are reserved: any
/// occurrence outside a well-formed span is an error.
pub fn parse_markup(source: &str) -> Result<IntentExample, MarkupError> {
    let chars: Vec<char> = source.chars().collect();
    let mut text = String::new();
    let mut text_len = 0usize;
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '[' => {
                let open = i;
                let close = chars[open + 1..]
                    .iter()
                    .position(|&c| matches!(c, ']' | '[' | '{' | '}'))
                    .map(|p| p + open + 1)
                    .filter(|&p| chars[p] == ']')
                    .ok_or_else(|| malformed(open + 1, "unclosed `[`"))?;
                if close == open + 1 {
                    return Err(malformed(open + 1, "empty entity text"));
                }
                if chars.get(close + 1) != Some(&'{') {
                    return Err(malformed(close + 2, "expected `{type}` after `]`"));
                }
                let type_start = close + 2;
                let mut j = type_start;
                while j < chars.len() && is_type_char(chars[j]) {
                    j += 1;
                }
                if j == type_start {
                    return Err(malformed(type_start + 1, "empty entity type"));
                }
                if chars.get(j) != Some(&'}') {
                    return Err(malformed(j + 1, "expected `}` closing the entity type"));
                }
                let surface: String = chars[open + 1..close].iter().collect();
                let start = text_len;
                text.push_str(&surface);
                text_len += close - open - 1;
                spans.push(MarkupSpan {
                    start,
                    end: text_len,
                    type_name: chars[type_start..j].iter().collect(),
                });
                i = j + 1;
            }
            c @ (']' | '{' | '}') => {
                return Err(malformed(i + 1, &format!("unexpected `{c}`")));
            }
            c => {
                text.push(c);
                text_len += 1;
                i += 1;
            }
        }
    }
    Ok(IntentExample {
        source: source.to_string(),
        text,
        spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_movie_example() {
        let ex = parse_markup("My favorite movie is [Matrix]{movie}").unwrap();
        assert_eq!(ex.text, "My favorite movie is Matrix");
        assert_eq!(
            ex.spans,
            vec![MarkupSpan {
                start: 21,
                end: 27,
                type_name: "movie".into()
            }]
        );
        assert_eq!(ex.masked(), "My favorite movie is {movie}");
    }

    #[test]
    fn plain_and_multiple_spans() {
        let ex = parse_markup("no markup here").unwrap();
        assert!(ex.spans.is_empty());
        assert_eq!(ex.masked(), "no markup here");

        let ex = parse_markup("from [Žilina]{city} to [New York]{city}!").unwrap();
        assert_eq!(ex.text, "from Žilina to New York!");
        assert_eq!(ex.masked(), "from {city} to {city}!");
        assert_eq!(ex.spans[1].start, 15);
    }

    #[test]
    fn malformed_markup() {
        for bad in [
            "[Matrix",
            "[Matrix]",
            "[Matrix]{",
            "[Matrix]{movie",
            "[]{movie}",
            "[Matrix]{}",
            "Matrix]{movie}",
            "I said {movie}",
            "[[Matrix]]{movie}",
            "[Mat{rix]{movie}",
        ] {
            assert!(parse_markup(bad).is_err(), "{bad} should be rejected");
        }
        assert_eq!(parse_markup("ab [cd").unwrap_err().position, 4);
    }
}
