use proptest::prelude::*;

use regwatch::fuse::{run_pipeline, PipelineConfig};
use regwatch::ingest::parse_article;
use regwatch::lexicon::Abbreviations;
use regwatch::textcore::{content_token_count, segment_sentences, tokenize};

proptest! {
    #[test]
    fn token_and_sentence_spans_are_valid(text in "\\PC{0,200}") {
        for t in tokenize(&text) {
            prop_assert!(t.span.is_valid_in(&text));
            prop_assert_eq!(t.span.slice(&text), t.surface.as_str());
        }
        let sentences = segment_sentences(&text, &Abbreviations::builtin());
        for w in sentences.windows(2) {
            prop_assert!(w[0].span.end <= w[1].span.start);
        }
        for s in &sentences {
            prop_assert!(s.span.is_valid_in(&text));
            prop_assert!(s.tokens.iter().all(|t| s.span.contains(&t.span)));
        }
    }

    #[test]
    fn content_tokens_ignore_whitespace(words in prop::collection::vec("[A-Za-z0-9$.,%]{1,8}", 0..30), gaps in prop::collection::vec("[ \t\n]{1,4}", 30)) {
        let single = words.join(" ");
        let mut spaced = String::new();
        for (w, g) in words.iter().zip(&gaps) {
            spaced.push_str(w);
            spaced.push_str(g);
        }
        prop_assert_eq!(content_token_count(&single), content_token_count(&spaced));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_invariant_under_whitespace(gap in "[ \t\n]{1,5}") {
        let body = "The Board raised the asset threshold to $3 billion. Comments were received.";
        let spaced = body.replace(' ', &gap);
        let config = PipelineConfig::default();
        let mk = |b: &str| parse_article(&serde_json::json!({
            "id": "w", "title": "t", "publication_date": "2024-01-01", "agencies": [], "body": b
        }).to_string()).unwrap();
        let (a, b) = (run_pipeline(&mk(body), &config), run_pipeline(&mk(&spaced), &config));
        prop_assert_eq!(a.ratio, b.ratio);
        prop_assert_eq!(a.instance, b.instance);
    }
}
