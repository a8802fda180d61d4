use std::sync::OnceLock;

use aste_core::corpus::{AnnotatedReview, Polarity};
use aste_core::pipeline::{self, PipelineConfig, PipelineModel, Resources};
use aste_core::synth::{self, SynthConfig};
use aste_core::textnorm::{normalize, TextProcessor};
use aste_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn resources() -> Resources {
    Resources {
        processor: TextProcessor::default(),
        aspect_terms: synth::aspect_terms(),
        opinion_terms: synth::all_opinion_terms(),
        embedding_store: None,
    }
}

fn corpus() -> Vec<AnnotatedReview> {
    synth::generate(&SynthConfig {
        reviews: 200,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn model() -> &'static PipelineModel {
    static MODEL: OnceLock<PipelineModel> = OnceLock::new();
    MODEL.get_or_init(|| PipelineModel::train(&PipelineConfig::default(), &corpus(), &resources()).unwrap().0)
}

#[test]
fn seeded_review_yields_its_triplet() {
    let raw = "ডেলিভারি  একেবারে চমৎকার! 👍";
    let out = model().extract_text("probe", raw).unwrap();
    assert_eq!(out.len(), 1, "{out:?}");
    let e = &out[0];
    assert_eq!(e.aspect_text, "ডেলিভারি");
    assert_eq!(e.opinion_text, "চমৎকার");
    assert_eq!(e.triplet.polarity, Polarity::Positive);
    assert_eq!((e.triplet.aspect.start, e.triplet.aspect.end), (0, 8));
    assert!(e.confidence > 0.0 && e.confidence <= 1.0);

    let neg = model().extract_text("probe", "ক্যামেরা খুব খারাপ").unwrap();
    assert_eq!(neg.len(), 1);
    assert_eq!(neg[0].triplet.polarity, Polarity::Negative);
}

#[test]
fn empty_and_blank_texts_give_nothing() {
    for raw in ["", "   ", "😊😊", "।।"] {
        assert!(model().extract_text("e", raw).unwrap().is_empty());
    }
}

#[test]
fn extracted_text_matches_tokens() {
    let vocab: Vec<String> = synth::aspect_terms()
        .into_iter()
        .chain(synth::all_opinion_terms())
        .chain(["এবং", "কিন্তু", "।", "!", "😊", "  ", "১০০০ টাকা"].map(String::from))
        .collect();
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut seen = 0;
    for i in 0..1000 {
        let words: Vec<&str> = (0..rng.gen_range(0..10)).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let raw = words.join(if i % 2 == 0 { " " } else { "  " });
        let text = m.processor.process(&raw);
        for e in m.extract_text("x", &raw).unwrap() {
            seen += 1;
            let lex = &m.processor.lexicon;
            assert_eq!(text.span_text(e.aspect_tokens.first, e.aspect_tokens.last), normalize(&e.aspect_text, lex).text);
            assert_eq!(text.span_text(e.opinion_tokens.first, e.opinion_tokens.last), normalize(&e.opinion_text, lex).text);
            assert!(!e.aspect_tokens.overlaps(&e.opinion_tokens));
        }
    }
    assert!(seen > 500, "only {seen} extractions");
}

#[test]
fn bundle_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let m = model();
    m.save(dir.path()).unwrap();
    let loaded = PipelineModel::load(dir.path(), None).unwrap();
    assert_eq!(loaded.digest(), m.digest());
    let test = synth::generate(&SynthConfig {
        reviews: 40,
        seed: 99,
        ..SynthConfig::default()
    })
    .unwrap();
    for r in &test {
        assert_eq!(
            loaded.extract_text(r.id(), &r.review.raw_text).unwrap(),
            m.extract_text(r.id(), &r.review.raw_text).unwrap()
        );
    }
    assert_eq!(pipeline::evaluate(&loaded, &test).unwrap(), pipeline::evaluate(m, &test).unwrap());
}

#[test]
fn tampered_bundle_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    model().save(dir.path()).unwrap();
    let manifest = dir.path().join("manifest.json");
    let text = std::fs::read_to_string(&manifest).unwrap();
    let tampered = text.replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
    assert_ne!(text, tampered);
    std::fs::write(&manifest, tampered).unwrap();
    assert!(PipelineModel::load(dir.path(), None).is_err());
    assert!(PipelineModel::load(&dir.path().join("missing"), None).is_err());
}

#[test]
fn single_class_training_is_refused_at_the_polarity_stage() {
    let only_positive = synth::generate(&SynthConfig {
        reviews: 40,
        polarity_mix: [1.0, 0.0, 0.0],
        ..SynthConfig::default()
    })
    .unwrap();
    let err = PipelineModel::train(&PipelineConfig::default(), &only_positive, &resources()).err().unwrap();
    match &err {
        Error::Stage { stage, source } => {
            assert_eq!(*stage, "polarity");
            assert!(matches!(**source, Error::Degenerate(_)));
        }
        other => panic!("{other}"),
    }
    assert!(err.is_validation());
}

#[test]
fn config_round_trips_and_digest_ignores_paths() {
    let config = PipelineConfig::from_toml_with_overrides(
        "[spanex]\ntau_s = 0.45\n[paths]\ncorpus = \"a.jsonl\"\n",
        &["pairmatch.tau_m=0.35".to_string(), "eval.k=3".to_string()],
    )
    .unwrap();
    assert_eq!(config.spanex.tau_s, 0.45);
    assert_eq!(config.pairmatch.tau_m, 0.35);
    assert_eq!(config.eval.k, 3);
    let back = PipelineConfig::from_toml(&config.to_toml().unwrap()).unwrap();
    assert_eq!(back, config);
    let mut moved = config.clone();
    moved.paths.corpus = Some("elsewhere.jsonl".into());
    assert_eq!(moved.digest(), config.digest());
    assert_ne!(config.clone().with_seed(7).digest(), config.digest());
    assert!(PipelineConfig::from_toml("[spanex]\nbogus = 1\n").is_err());
    assert!(PipelineConfig::from_toml_with_overrides("", &["pairmatch.tau_m=2.0".to_string()]).is_err());
}
