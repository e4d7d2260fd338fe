//! Context-independent, per-turn extraction of attribute values from raw
//! utterances.
//!
//! A rule fires when every one of its patterns matches the utterance
//! (case-insensitively). Fired rules emit their attribute write in
//! declaration order; a capture-group value is taken from the first pattern.

use crate::model::AttributeRef;
use crate::pattern::{GroupRef, Pattern};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum SkimValue {
    Literal(Value),
    Group(GroupRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkimmerRule {
    pub patterns: Vec<Pattern>,
    pub attribute: AttributeRef,
    pub value: SkimValue,
}

impl SkimmerRule {
    fn apply(&self, utterance: &str) -> Option<Value> {
        let (first, rest) = self.patterns.split_first()?;
        let caps = first.regex().captures(utterance)?;
        if !rest.iter().all(|p| p.regex().is_match(utterance)) {
            return None;
        }
        match &self.value {
            SkimValue::Literal(v) => Some(v.clone()),
            SkimValue::Group(g) => g.get(&caps).map(|m| Value::Str(m.as_str().to_string())),
        }
    }
}

/// Runs every rule against the utterance. A rule whose referenced group did
/// not participate in the match does not fire.
pub fn skim(utterance: &str, rules: &[SkimmerRule]) -> Vec<(AttributeRef, Value)> {
    rules
        .iter()
        .filter_map(|rule| {
            rule.apply(utterance)
                .map(|value| (rule.attribute.clone(), value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::Scope;

    fn rule(patterns: &[&str], attr: &str, value: SkimValue) -> SkimmerRule {
        SkimmerRule {
            patterns: patterns.iter().map(|p| Pattern::new(p).unwrap()).collect(),
            attribute: attr.parse().unwrap(),
            value,
        }
    }

    #[test]
    fn brother_mentioned_by_the_way() {
        let rules = [rule(
            &[r"\bbrother\b"],
            "user.has_sibling",
            SkimValue::Literal(Value::Bool(true)),
        )];
        assert_eq!(
            skim("I went to the cinema with my brother yesterday.", &rules),
            vec![(AttributeRef::new(Scope::User, "has_sibling"), Value::Bool(true))]
        );
        assert!(skim("hello", &rules).is_empty());
        assert_eq!(skim("My BROTHER is tall", &rules).len(), 1);
    }

    #[test]
    fn all_patterns_must_match() {
        let rules = [rule(
            &[r"\bcinema\b", r"\bbrother\b"],
            "user.cinema_with_sibling",
            SkimValue::Literal(Value::Bool(true)),
        )];
        assert!(skim("I went to the cinema yesterday.", &rules).is_empty());
        assert_eq!(skim("cinema with my brother", &rules).len(), 1);
    }

    #[test]
    fn capture_groups_come_from_first_pattern() {
        let rules = [
            rule(
                &[r"my name is (\w+)", r"name"],
                "user.name",
                SkimValue::Group(GroupRef::Index(1)),
            ),
            rule(
                &[r"i live in (?P<city>\w+)"],
                "user.city",
                SkimValue::Group(GroupRef::Name("city".into())),
            ),
            rule(&[r"(a)|(b)"], "session.b", SkimValue::Group(GroupRef::Index(2))),
        ];
        let out = skim("My name is Ann and I live in Prague", &rules);
        assert_eq!(
            out,
            vec![
                (AttributeRef::new(Scope::User, "name"), Value::from("Ann")),
                (AttributeRef::new(Scope::User, "city"), Value::from("Prague")),
            ]
        );
        assert!(skim("a", &rules[2..]).is_empty());
        assert_eq!(skim("b", &rules[2..])[0].1, Value::from("b"));
    }

    #[test]
    fn declaration_order_is_kept() {
        let rules = [
            rule(&["x"], "session.v", SkimValue::Literal(Value::from("first"))),
            rule(&["x"], "session.v", SkimValue::Literal(Value::from("second"))),
        ];
        let out = skim("x", &rules);
        assert_eq!(out[0].1, Value::from("first"));
        assert_eq!(out[1].1, Value::from("second"));
    }

    proptest! {
        #[test]
        fn each_rule_fires_at_most_once_in_order(text in "[a-c ]{0,20}") {
            let rules = [
                rule(&["a"], "session.a", SkimValue::Literal(Value::Bool(true))),
                rule(&["b", "c"], "session.bc", SkimValue::Literal(Value::Bool(true))),
                rule(&["(c+)"], "session.c", SkimValue::Group(GroupRef::Index(1))),
            ];
            let out = skim(&text, &rules);
            let names: Vec<_> = out.iter().map(|(r, _)| r.name.clone()).collect();
            let mut expected = Vec::new();
            if text.contains('a') { expected.push("a".to_string()); }
            if text.contains('b') && text.contains('c') { expected.push("bc".to_string()); }
            if text.contains('c') { expected.push("c".to_string()); }
            prop_assert_eq!(names, expected);
            prop_assert_eq!(skim(&text, &rules), out);
        }
    }
}
