//! Response templates with `{scope.name}` slots. `{{` and `}}` are literal
//! braces.

use std::fmt;

use thiserror::Error;

use super::condition::AttributeView;
use super::AttributeRef;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePart {
    Text(String),
    Slot(AttributeRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub parts: Vec<TemplatePart>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid template at character {position}: {message}")]
pub struct TemplateError {
    pub position: usize,
    pub message: String,
}

impl Template {
    pub fn parse(source: &str) -> Result<Template, TemplateError> {
        let chars: Vec<char> = source.chars().collect();
        let mut parts = Vec::new();
        let mut text = String::new();
        let mut i = 0;
        while i < chars.len() {
            match (chars[i], chars.get(i + 1)) {
                ('{', Some('{')) | ('}', Some('}')) => {
                    text.push(chars[i]);
                    i += 2;
                }
                ('{', _) => {
                    let close = chars[i + 1..]
                        .iter()
                        .position(|&c| c == '}')
                        .map(|p| p + i + 1)
                        .ok_or_else(|| TemplateError {
                            position: i + 1,
                            message: "unclosed `{`".into(),
                        })?;
                    let inner: String = chars[i + 1..close].iter().collect();
                    let slot = inner.trim().parse::<AttributeRef>().map_err(|message| {
                        TemplateError {
                            position: i + 2,
                            message,
                        }
                    })?;
                    if !text.is_empty() {
                        parts.push(TemplatePart::Text(std::mem::take(&mut text)));
                    }
                    parts.push(TemplatePart::Slot(slot));
                    i = close + 1;
                }
                ('}', _) => {
                    return Err(TemplateError {
                        position: i + 1,
                        message: "unmatched `}`".into(),
                    })
                }
                (c, _) => {
                    text.push(c);
                    i += 1;
                }
            }
        }
        if !text.is_empty() {
            parts.push(TemplatePart::Text(text));
        }
        Ok(Template { parts })
    }

    pub fn slots(&self) -> impl Iterator<Item = &AttributeRef> {
        self.parts.iter().filter_map(|p| match p {
            TemplatePart::Slot(r) => Some(r),
            TemplatePart::Text(_) => None,
        })
    }

    pub fn render(&self, view: &dyn AttributeView) -> String {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                TemplatePart::Text(t) => out.push_str(t),
                TemplatePart::Slot(r) => out.push_str(&view.get(r).to_string()),
            }
        }
        out
    }
}

/// Prints the template source, escaping literal braces.
impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for part in &self.parts {
            match part {
                TemplatePart::Text(t) => f.write_str(&t.replace('{', "{{").replace('}', "}}"))?,
                TemplatePart::Slot(r) => write!(f, "{{{r}}}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scope;
    use crate::value::Value;

    #[test]
    fn renders_slots() {
        let t = Template::parse("Nice, {session.favMovie}!").unwrap();
        let view = |r: &AttributeRef| {
            if r == &AttributeRef::new(Scope::Session, "favMovie") {
                Value::from("Matrix")
            } else {
                Value::Null
            }
        };
        assert_eq!(t.render(&view), "Nice, Matrix!");
        assert_eq!(t.slots().count(), 1);
        assert_eq!(t.to_string(), "Nice, {session.favMovie}!");
    }

    #[test]
    fn escapes_and_errors() {
        let t = Template::parse("a {{literal}} b").unwrap();
        assert_eq!(t.render(&|_: &AttributeRef| Value::Null), "a {literal} b");
        assert_eq!(Template::parse(&t.to_string()).unwrap(), t);
        assert!(Template::parse("{movie}").is_err());
        assert!(Template::parse("oops }").is_err());
        assert!(Template::parse("{session.x").is_err());
    }
}
