//! Entity masking: recognized entity text is replaced by `{type}` before
//! intent recognition, for the entity types the current context knows about.

use std::collections::BTreeSet;

use super::entities::EntitySpan;
use crate::value::Value;

/// Replaces each `(start, end, type)` character range with `{type}`. Ranges
/// must be sorted and non-overlapping.
pub fn replace_spans<'a>(text: &str, spans: impl IntoIterator<Item = (usize, usize, &'a str)>) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (start, end, type_name) in spans {
        out.extend(&chars[cursor..start]);
        out.push('{');
        out.push_str(type_name);
        out.push('}');
        cursor = end;
    }
    out.extend(&chars[cursor..]);
    out
}

/// Masks every span whose type is in `allowed_types`. Spans must be sorted
/// and non-overlapping, as produced by recognition.
pub fn mask_entities(utterance: &str, spans: &[EntitySpan], allowed_types: &BTreeSet<String>) -> String {
    mask_entities_tracked(utterance, spans, allowed_types).0
}

/// Like [`mask_entities`], also returning the spans of the inserted
/// placeholders within the masked text.
pub fn mask_entities_tracked(
    utterance: &str,
    spans: &[EntitySpan],
    allowed_types: &BTreeSet<String>,
) -> (String, Vec<EntitySpan>) {
    let masked: Vec<&EntitySpan> = spans
        .iter()
        .filter(|s| allowed_types.contains(&s.type_name))
        .collect();
    let text = replace_spans(
        utterance,
        masked.iter().map(|s| (s.start, s.end, s.type_name.as_str())),
    );
    let mut shift: isize = 0;
    let placeholders = masked
        .iter()
        .map(|s| {
            let start = (s.start as isize + shift) as usize;
            let len = s.type_name.chars().count() + 2;
            shift += len as isize - (s.end - s.start) as isize;
            EntitySpan {
                start,
                end: start + len,
                surface: format!("{{{}}}", s.type_name),
                type_name: s.type_name.clone(),
                normalized: Value::Null,
            }
        })
        .collect();
    (text, placeholders)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn span(start: usize, end: usize, type_name: &str, text: &str) -> EntitySpan {
        EntitySpan {
            start,
            end,
            surface: text.chars().skip(start).take(end - start).collect(),
            type_name: type_name.into(),
            normalized: Value::Null,
        }
    }

    fn types(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn movie_example() {
        let u = "My favorite movie is Matrix";
        let spans = [span(21, 27, "movie", u)];
        assert_eq!(mask_entities(u, &spans, &types(&["movie"])), "My favorite movie is {movie}");
        assert_eq!(mask_entities(u, &spans, &types(&[])), u);
    }

    #[test]
    fn adjacent_spans_keep_separator() {
        let u = "7:30,Matrix";
        let spans = [span(0, 4, "time", u), span(5, 11, "movie", u)];
        assert_eq!(mask_entities(u, &spans, &types(&["time", "movie"])), "{time},{movie}");
        assert_eq!(mask_entities(u, &spans, &types(&["movie"])), "7:30,{movie}");
    }

    #[test]
    fn placeholder_spans_point_at_placeholders() {
        let u = "at 7:30 see Žilina";
        let spans = [span(3, 7, "time", u), span(12, 18, "city", u)];
        let (masked, placeholders) = mask_entities_tracked(u, &spans, &types(&["time", "city"]));
        assert_eq!(masked, "at {time} see {city}");
        for p in &placeholders {
            let got: String = masked.chars().skip(p.start).take(p.end - p.start).collect();
            assert_eq!(got, p.surface);
        }
    }

    /// Random utterance with random non-overlapping spans over a small type
    /// alphabet.
    fn arb_case() -> impl Strategy<Value = (String, Vec<EntitySpan>, BTreeSet<String>)> {
        ("[a-zé {}]{0,30}", prop::collection::vec((0usize..40, 1usize..6, 0usize..3), 0..5), prop::collection::btree_set(0usize..3, 0..3))
            .prop_map(|(text, raw, allowed)| {
                let len = text.chars().count();
                let names = ["movie", "time", "city"];
                let mut cuts: Vec<(usize, usize, usize)> = raw
                    .into_iter()
                    .filter(|(s, l, _)| s + l <= len)
                    .map(|(s, l, t)| (s, s + l, t))
                    .collect();
                cuts.sort();
                let mut spans = Vec::new();
                let mut cursor = 0;
                for (s, e, t) in cuts {
                    if s >= cursor {
                        spans.push(span(s, e, names[t], &text));
                        cursor = e;
                    }
                }
                let allowed = allowed.into_iter().map(|i| names[i].to_string()).collect();
                (text, spans, allowed)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn masking_is_idempotent((text, spans, allowed) in arb_case()) {
            let (masked, placeholders) = mask_entities_tracked(&text, &spans, &allowed);
            prop_assert_eq!(mask_entities(&masked, &placeholders, &allowed), masked);
        }

        #[test]
        fn text_outside_masked_spans_is_untouched((text, spans, allowed) in arb_case()) {
            let (masked, placeholders) = mask_entities_tracked(&text, &spans, &allowed);
            let masked_spans: Vec<_> = spans.iter().filter(|s| allowed.contains(&s.type_name)).collect();
            prop_assert_eq!(masked_spans.len(), placeholders.len());
            let original: Vec<char> = text.chars().collect();
            let out: Vec<char> = masked.chars().collect();
            let (mut i, mut j) = (0, 0);
            for (orig, ph) in masked_spans.iter().zip(&placeholders) {
                prop_assert_eq!(&original[i..orig.start], &out[j..ph.start]);
                i = orig.end;
                j = ph.end;
            }
            prop_assert_eq!(&original[i..], &out[j..]);
        }
    }
}
