//! Case-insensitive regular expressions that remember their source text.

use std::fmt;

use regex::{Regex, RegexBuilder};

#[derive(Clone)]
pub struct Pattern {
    source: String,
    regex: Regex,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Pattern, regex::Error> {
        let regex = RegexBuilder::new(source).case_insensitive(true).build()?;
        Ok(Pattern {
            source: source.to_string(),
            regex,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }

    /// Whether the pattern defines the given numbered or named capture group.
    pub fn has_group(&self, group: &GroupRef) -> bool {
        match group {
            GroupRef::Index(i) => *i < self.regex.captures_len(),
            GroupRef::Name(n) => self.regex.capture_names().flatten().any(|g| g == n),
        }
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({:?})", self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupRef {
    Index(usize),
    Name(String),
}

impl GroupRef {
    pub fn get<'h>(&self, caps: &regex::Captures<'h>) -> Option<regex::Match<'h>> {
        match self {
            GroupRef::Index(i) => caps.get(*i),
            GroupRef::Name(n) => caps.name(n),
        }
    }
}

impl fmt::Display for GroupRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupRef::Index(i) => write!(f, "{i}"),
            GroupRef::Name(n) => f.write_str(n),
        }
    }
}
