//! Rule-based entity recognition.
//!
//! Each [`EntityRule`] contributes regular-expression matchers (its own
//! patterns, a gazetteer built from literal values, or, when neither is
//! given, the built-in patterns of its normalizer). All matches from all
//! rules compete; spans are chosen left to right, longest first, without
//! overlap.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use regex::Captures;
use serde::{Deserialize, Serialize};

use crate::pattern::Pattern;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalizer {
    #[default]
    None,
    Integer,
    Decimal,
    TimeOfDay,
    Date,
    Url,
    Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    /// Character offset of the first character.
    pub start: usize,
    /// Character offset one past the last character.
    pub end: usize,
    pub surface: String,
    pub type_name: String,
    pub normalized: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRule {
    pub type_name: String,
    pub patterns: Vec<Pattern>,
    /// Gazetteer entries, matched as whole words.
    pub values: Vec<String>,
    pub normalizer: Normalizer,
    matchers: Vec<Pattern>,
}

impl EntityRule {
    pub fn new(
        type_name: impl Into<String>,
        patterns: &[&str],
        values: &[&str],
        normalizer: Normalizer,
    ) -> Result<EntityRule, regex::Error> {
        let patterns = patterns
            .iter()
            .map(|p| Pattern::new(p))
            .collect::<Result<Vec<_>, _>>()?;
        let values = values.iter().map(|v| v.to_string()).collect();
        Self::from_parts(type_name.into(), patterns, values, normalizer)
    }

    pub(crate) fn from_parts(
        type_name: String,
        patterns: Vec<Pattern>,
        values: Vec<String>,
        normalizer: Normalizer,
    ) -> Result<EntityRule, regex::Error> {
        let mut matchers = patterns.clone();
        if !values.is_empty() {
            let mut sorted: Vec<&String> = values.iter().filter(|v| !v.trim().is_empty()).collect();
            sorted.sort_by_key(|v| Reverse(v.chars().count()));
            let alternation = sorted
                .iter()
                .map(|v| regex::escape(v.trim()))
                .collect::<Vec<_>>()
                .join("|");
            if !alternation.is_empty() {
                matchers.push(Pattern::new(&format!(r"\b(?:{alternation})\b"))?);
            }
        }
        if matchers.is_empty() {
            for source in builtin_patterns(normalizer) {
                matchers.push(Pattern::new(&source)?);
            }
        }
        Ok(EntityRule {
            type_name,
            patterns,
            values,
            normalizer,
            matchers,
        })
    }

    /// A rule using only the built-in patterns of `normalizer`.
    pub fn builtin(type_name: impl Into<String>, normalizer: Normalizer) -> EntityRule {
        Self::from_parts(type_name.into(), Vec::new(), Vec::new(), normalizer)
            .expect("built-in patterns compile")
    }

    pub fn matches_nothing(&self) -> bool {
        self.matchers.is_empty()
    }
}

pub fn builtin_patterns(normalizer: Normalizer) -> Vec<String> {
    const MONTHS: &str = "january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec";
    const AMPM: &str = r"(?:\s*(?P<ampm>[ap]\.m\.|(?:am|pm)\b))";
    let fixed = |items: &[&str]| -> Vec<String> { items.iter().map(|s| s.to_string()).collect() };
    match normalizer {
        Normalizer::None => Vec::new(),
        Normalizer::Integer => fixed(&[
            r"(?P<value>-?\b\d+)\b",
            r"\b(?P<word>(?:twenty|thirty|forty|fifty|sixty|seventy|eighty|ninety)(?:[\s-](?:one|two|three|four|five|six|seven|eight|nine))?|zero|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen)\b",
        ]),
        Normalizer::Decimal => fixed(&[r"(?P<value>-?\b\d+\.\d+)\b"]),
        Normalizer::Url => fixed(&[r"\b(?:https?://|www\.)[^\s]*[^\s.,!?;:)\]]"]),
        Normalizer::Money => fixed(&[
            r"(?P<symbol>[$€£])\s?(?P<amount>\d+(?:\.\d+)?)\b",
            r"\b(?P<amount>\d+(?:\.\d+)?)\s?(?P<currency>dollars?|usd|euros?|eur|pounds?|gbp)\b",
        ]),
        Normalizer::TimeOfDay => vec![
            format!(r"\b(?P<hour>\d{{1,2}}):(?P<minute>\d{{2}})\b{AMPM}?"),
            format!(r"\b(?P<hour>\d{{1,2}}){AMPM}"),
            r"\b(?P<hour>\d{1,2})\s+o'?clock\b".to_string(),
            r"\b(?P<word>noon|midnight)\b".to_string(),
        ],
        Normalizer::Date => vec![
            r"\b(?P<year>\d{4})-(?P<month>\d{1,2})-(?P<day>\d{1,2})\b".to_string(),
            format!(r"\b(?P<monthname>{MONTHS})\.?\s+(?P<day>\d{{1,2}})(?:st|nd|rd|th)?\b(?:,?\s+(?P<year>\d{{4}})\b)?"),
            format!(r"\b(?P<day>\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?(?P<monthname>{MONTHS})\b(?:,?\s+(?P<year>\d{{4}})\b)?"),
            r"\b(?P<rel>today|tomorrow|yesterday)\b".to_string(),
        ],
    }
}

fn number_word(word: &str) -> Option<i64> {
    const UNITS: [&str; 20] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
        "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
        "nineteen",
    ];
    const TENS: [&str; 8] = [
        "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    ];
    let word = word.to_lowercase();
    let mut parts = word.split([' ', '-']).filter(|p| !p.is_empty());
    let first = parts.next()?;
    let second = parts.next();
    if let Some(t) = TENS.iter().position(|&t| t == first) {
        let tens = (t as i64 + 2) * 10;
        return match second {
            None => Some(tens),
            Some(unit) => UNITS[1..10]
                .iter()
                .position(|&u| u == unit)
                .map(|u| tens + u as i64 + 1),
        };
    }
    if second.is_some() {
        return None;
    }
    UNITS.iter().position(|&u| u == first).map(|u| u as i64)
}

fn month_number(name: &str) -> Option<i64> {
    let name = name.to_lowercase();
    let prefix: String = name.chars().take(3).collect();
    const ABBR: [&str; 12] = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ];
    ABBR.iter().position(|&m| m == prefix).map(|m| m as i64 + 1)
}

fn group<'a>(caps: &Captures<'a>, name: &str) -> Option<&'a str> {
    caps.name(name).map(|m| m.as_str())
}

/// Normalizes a match; `None` rejects it (e.g. `25:99`).
fn normalize(normalizer: Normalizer, caps: &Captures<'_>) -> Option<Value> {
    let surface = caps.get(0)?.as_str();
    match normalizer {
        Normalizer::None => Some(Value::Str(
            group(caps, "value").unwrap_or(surface).to_string(),
        )),
        Normalizer::Url => Some(Value::Str(surface.to_string())),
        Normalizer::Integer => {
            if let Some(word) = group(caps, "word") {
                return number_word(word).map(Value::Int);
            }
            let digits = group(caps, "value").unwrap_or(surface);
            digits.trim().parse::<i64>().ok().map(Value::Int)
        }
        Normalizer::Decimal => {
            let digits = group(caps, "value").unwrap_or(surface);
            digits.trim().parse::<f64>().ok().map(Value::Decimal)
        }
        Normalizer::TimeOfDay => {
            let (mut hour, minute) = match group(caps, "word").map(str::to_lowercase) {
                Some(w) if w == "noon" => (12, 0),
                Some(_) => (0, 0),
                None => (
                    group(caps, "hour")?.parse::<i64>().ok()?,
                    group(caps, "minute").map_or(Some(0), |m| m.parse::<i64>().ok())?,
                ),
            };
            if let Some(ampm) = group(caps, "ampm") {
                if !(1..=12).contains(&hour) {
                    return None;
                }
                let pm = ampm.to_lowercase().starts_with('p');
                hour = match (pm, hour) {
                    (false, 12) => 0,
                    (true, 12) => 12,
                    (true, h) => h + 12,
                    (false, h) => h,
                };
            }
            if hour > 23 || minute > 59 {
                return None;
            }
            Some(Value::map([("hour", Value::Int(hour)), ("minute", Value::Int(minute))]))
        }
        Normalizer::Date => {
            if let Some(rel) = group(caps, "rel") {
                let days = match rel.to_lowercase().as_str() {
                    "today" => 0,
                    "tomorrow" => 1,
                    _ => -1,
                };
                return Some(Value::map([("relativeDays", Value::Int(days))]));
            }
            let month = match group(caps, "monthname") {
                Some(name) => month_number(name)?,
                None => group(caps, "month")?.parse().ok()?,
            };
            let day: i64 = group(caps, "day")?.parse().ok()?;
            if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
                return None;
            }
            let mut fields = vec![("month", Value::Int(month)), ("day", Value::Int(day))];
            if let Some(year) = group(caps, "year") {
                fields.push(("year", Value::Int(year.parse().ok()?)));
            }
            Some(Value::map(fields))
        }
        Normalizer::Money => {
            let amount: f64 = group(caps, "amount")?.parse().ok()?;
            let c = group(caps, "symbol").or(group(caps, "currency"))?.to_lowercase();
            let code = if c == "$" || c.starts_with("dollar") || c == "usd" {
                "USD"
            } else if c == "€" || c.starts_with("euro") || c == "eur" {
                "EUR"
            } else {
                "GBP"
            };
            Some(Value::map([
                ("amount", Value::Decimal(amount)),
                ("currency", Value::from(code)),
            ]))
        }
    }
}

struct Candidate {
    start: usize,
    end: usize,
    order: (usize, usize),
    span: EntitySpan,
}

/// Finds entity spans in `utterance`. Offsets are in characters.
pub fn recognize_entities(utterance: &str, rules: &[EntityRule]) -> Vec<EntitySpan> {
    if utterance.is_empty() {
        return Vec::new();
    }
    let char_at: BTreeMap<usize, usize> = utterance
        .char_indices()
        .enumerate()
        .map(|(ci, (bi, _))| (bi, ci))
        .chain(std::iter::once((utterance.len(), utterance.chars().count())))
        .collect();
    let mut candidates = Vec::new();
    for (rule_idx, rule) in rules.iter().enumerate() {
        for (matcher_idx, matcher) in rule.matchers.iter().enumerate() {
            for caps in matcher.regex().captures_iter(utterance) {
                let whole = caps.get(0).expect("group 0 always participates");
                if whole.is_empty() {
                    continue;
                }
                let Some(normalized) = normalize(rule.normalizer, &caps) else {
                    continue;
                };
                let (start, end) = (char_at[&whole.start()], char_at[&whole.end()]);
                candidates.push(Candidate {
                    start,
                    end,
                    order: (rule_idx, matcher_idx),
                    span: EntitySpan {
                        start,
                        end,
                        surface: whole.as_str().to_string(),
                        type_name: rule.type_name.clone(),
                        normalized,
                    },
                });
            }
        }
    }
    candidates.sort_by_key(|c| (c.start, Reverse(c.end - c.start), c.order));
    let mut spans = Vec::new();
    let mut cursor = 0;
    for c in candidates {
        if c.start >= cursor {
            cursor = c.end;
            spans.push(c.span);
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalized_of(text: &str, rule: &EntityRule) -> Vec<(String, Value)> {
        recognize_entities(text, std::slice::from_ref(rule))
            .into_iter()
            .map(|s| (s.surface, s.normalized))
            .collect()
    }

    fn hm(hour: i64, minute: i64) -> Value {
        Value::map([("hour", Value::Int(hour)), ("minute", Value::Int(minute))])
    }

    #[test]
    fn time_of_day() {
        let rule = EntityRule::builtin("time", Normalizer::TimeOfDay);
        let spans = recognize_entities("wake me at 7:30", std::slice::from_ref(&rule));
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end), (11, 15));
        assert_eq!(spans[0].surface, "7:30");
        assert_eq!(spans[0].normalized, hm(7, 30));

        assert_eq!(normalized_of("at 7:30 pm", &rule), vec![("7:30 pm".into(), hm(19, 30))]);
        assert_eq!(normalized_of("12am sharp", &rule), vec![("12am".into(), hm(0, 0))]);
        assert_eq!(normalized_of("5 o'clock", &rule), vec![("5 o'clock".into(), hm(5, 0))]);
        assert_eq!(normalized_of("at noon", &rule), vec![("noon".into(), hm(12, 0))]);
        assert_eq!(normalized_of("7:30 amazing", &rule), vec![("7:30".into(), hm(7, 30))]);
        assert!(normalized_of("25:99", &rule).is_empty());
        assert!(normalized_of("13pm", &rule).is_empty());
    }

    #[test]
    fn empty_utterance_has_no_entities() {
        let rule = EntityRule::builtin("time", Normalizer::TimeOfDay);
        assert!(recognize_entities("", &[rule]).is_empty());
    }

    #[test]
    fn gazetteer_movie() {
        let rule = EntityRule::new("movie", &[], &["Matrix", "Inception", "The Matrix Reloaded"], Normalizer::None)
            .unwrap();
        let spans = recognize_entities("My favorite movie is Matrix", std::slice::from_ref(&rule));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].type_name, "movie");
        assert_eq!(spans[0].surface, "Matrix");
        assert_eq!((spans[0].start, spans[0].end), (21, 27));
        let spans = recognize_entities("i love the matrix reloaded", &[rule]);
        assert_eq!(spans[0].surface, "the matrix reloaded");
    }

    #[test]
    fn longest_match_wins_across_rules() {
        let rules = [
            EntityRule::builtin("number", Normalizer::Integer),
            EntityRule::builtin("time", Normalizer::TimeOfDay),
        ];
        let spans = recognize_entities("meet at 7:30 with 3 friends", &rules);
        let got: Vec<_> = spans.iter().map(|s| (s.surface.as_str(), s.type_name.as_str())).collect();
        assert_eq!(got, vec![("7:30", "time"), ("3", "number")]);
    }

    #[test]
    fn numbers_dates_urls_money() {
        let int = EntityRule::builtin("n", Normalizer::Integer);
        assert_eq!(
            normalized_of("twenty-one and -4 and seven", &int),
            vec![
                ("twenty-one".into(), Value::Int(21)),
                ("-4".into(), Value::Int(-4)),
                ("seven".into(), Value::Int(7))
            ]
        );
        let dec = EntityRule::builtin("d", Normalizer::Decimal);
        assert_eq!(normalized_of("it costs 2.75", &dec), vec![("2.75".into(), Value::Decimal(2.75))]);

        let date = EntityRule::builtin("date", Normalizer::Date);
        let day = |m: i64, d: i64| Value::map([("month", Value::Int(m)), ("day", Value::Int(d))]);
        assert_eq!(normalized_of("on March 3rd", &date), vec![("March 3rd".into(), day(3, 3))]);
        assert_eq!(
            normalized_of("born 2001-02-28", &date)[0].1,
            Value::map([("year", Value::Int(2001)), ("month", Value::Int(2)), ("day", Value::Int(28))])
        );
        assert_eq!(normalized_of("the 4th of July", &date)[0].1, day(7, 4));
        assert_eq!(
            normalized_of("see you tomorrow", &date)[0].1,
            Value::map([("relativeDays", Value::Int(1))])
        );
        assert!(normalized_of("2001-13-01", &date).is_empty());

        let url = EntityRule::builtin("url", Normalizer::Url);
        assert_eq!(
            normalized_of("see https://example.org/a?b=1.", &url),
            vec![("https://example.org/a?b=1".into(), Value::from("https://example.org/a?b=1"))]
        );

        let money = EntityRule::builtin("money", Normalizer::Money);
        assert_eq!(
            normalized_of("it costs $20 or 15 euros", &money),
            vec![
                ("$20".into(), Value::map([("amount", Value::Decimal(20.0)), ("currency", "USD".into())])),
                ("15 euros".into(), Value::map([("amount", Value::Decimal(15.0)), ("currency", "EUR".into())])),
            ]
        );
    }

    #[test]
    fn offsets_are_characters() {
        let rule = EntityRule::new("city", &[], &["Brno"], Normalizer::None).unwrap();
        let spans = recognize_entities("Žluťoučký Brno", &[rule]);
        assert_eq!((spans[0].start, spans[0].end), (10, 14));
    }

    #[test]
    fn custom_patterns_with_named_value_group() {
        let rule = EntityRule::new("code", &[r"code (?P<value>[A-Z]\d+)"], &[], Normalizer::None).unwrap();
        let spans = recognize_entities("my code X42 please", &[rule]);
        assert_eq!(spans[0].surface, "code X42");
        assert_eq!(spans[0].normalized, Value::from("X42"));
    }
}
