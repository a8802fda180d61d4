use aste_core::textnorm::{char_len, char_slice, normalize, SpellingLexicon, StopwordSet, TextProcessor};
use proptest::prelude::*;

fn lexicon() -> SpellingLexicon {
    SpellingLexicon::new([("ভাল", "ভালো"), ("দাম", "মূল্য"), ("ডেলিভারি", "ডেলিভারি")]).unwrap()
}

fn bangla_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        6 => "[\u{0980}-\u{09FF}]{1,6}",
        1 => Just(" ".to_string()),
        1 => Just("।".to_string()),
        1 => Just("!!".to_string()),
        1 => Just("😊".to_string()),
        1 => Just("\u{200C}".to_string()),
        1 => Just("ভাল".to_string()),
        1 => Just("abc".to_string()),
    ];
    prop::collection::vec(piece, 0..20).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn normalize_is_idempotent(raw in bangla_text()) {
        let lex = lexicon();
        let once = normalize(&raw, &lex).text;
        prop_assert_eq!(normalize(&once, &lex).text, once);
    }

    #[test]
    fn offset_map_is_monotone_and_in_bounds(raw in bangla_text()) {
        let n = normalize(&raw, &lexicon());
        let pairs = n.offset_map.pairs();
        prop_assert!(pairs.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        prop_assert!(pairs.iter().all(|&(norm, r)| norm <= char_len(&n.text) && r <= char_len(&raw)));
    }

    #[test]
    fn token_spans_round_trip(raw in bangla_text()) {
        let lex = lexicon();
        let processor = TextProcessor::new(lex.clone(), StopwordSet::default());
        let text = processor.process(&raw);
        for i in 0..text.len() {
            for j in i..text.len().min(i + 3) {
                let (s, e) = text.raw_span(i, j).unwrap();
                let sub = char_slice(&raw, s, e).unwrap();
                prop_assert_eq!(normalize(sub, &lex).text, text.span_text(i, j));
            }
        }
    }

    #[test]
    fn tokens_have_no_whitespace(raw in bangla_text()) {
        let text = TextProcessor::default().process(&raw);
        prop_assert!(text.token_strs().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
    }
}

#[test]
fn decomposed_input_composes() {
    // e-kar + aa-kar composes to o-kar
    let n = normalize("ভ\u{09C7}\u{09BE}ল", &SpellingLexicon::default());
    assert_eq!(n.text, "ভ\u{09CB}ল");
    assert_eq!(char_len(&n.text), 3);
}

#[test]
fn spelling_variant_is_rewritten_with_raw_offsets() {
    let processor = TextProcessor::new(lexicon(), StopwordSet::default());
    let raw = "ফোনটা খুব ভাল!";
    let text = processor.process(raw);
    let idx = text.token_strs().position(|t| t == "ভালো").unwrap();
    let (s, e) = text.raw_span(idx, idx).unwrap();
    assert_eq!(char_slice(raw, s, e), Some("ভাল"));
}

#[test]
fn stopwords_are_flagged_not_removed() {
    let processor = TextProcessor::new(SpellingLexicon::default(), StopwordSet::new(["এবং"]));
    let text = processor.process("ক্যামেরা এবং ব্যাটারি");
    assert_eq!(text.len(), 3);
    assert!(text.tokens[1].is_stopword);
}
