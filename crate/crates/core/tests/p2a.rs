mod common;

use std::sync::OnceLock;

use coartic::ema::{ChannelLayout, OracleArticulator, OracleConfig, SpeakerStats};
use coartic::lexicon::PhonemeSequence;
use coartic::nn::{Linear, Tensor2};
use coartic::p2a::{
    batch_loss_grad, demo_vcv, evaluate, item_loss, train, Articulator, ModelConfig, P2aModel, TrainConfig, TrainItem,
};
use common::{random_tensor, rng, train_on_oracle, Trained};
use std::collections::BTreeMap;

fn stats(speakers: &[&str], channels: usize) -> BTreeMap<String, SpeakerStats> {
    speakers
        .iter()
        .map(|s| {
            (
                s.to_string(),
                SpeakerStats {
                    speaker: s.to_string(),
                    mean: vec![0.0; channels],
                    std: vec![1.0; channels],
                },
            )
        })
        .collect()
}

fn small_model(seed: u64) -> P2aModel {
    let cfg = ModelConfig {
        hidden: 8,
        layers: 2,
        embedding: 6,
        layout: ChannelLayout::new(["TT", "LI"]),
    };
    P2aModel::new(cfg, stats(&["a", "b"], 8), seed).unwrap()
}

fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let oracle = OracleConfig {
            speakers: 4,
            ..OracleConfig::default()
        };
        train_on_oracle(&oracle, 32, 30)
    })
}

#[test]
fn generation_shape_and_determinism() {
    let m = small_model(1);
    let seq = PhonemeSequence::parse("K AE T S").unwrap();
    let g = m.generate(&seq, "a").unwrap();
    assert_eq!(g.ema.frames(), g.timing.total_frames);
    assert_eq!(g.ema.channels(), 8);
    assert_eq!(g, m.generate(&seq, "a").unwrap());
    assert!(m.generate(&seq, "zz").is_err());
}

#[test]
fn identity_speaker_head_is_transparent() {
    let m = small_model(2);
    assert_eq!(m.params.speaker_heads["a"], Linear::identity(8));
    let seq = PhonemeSequence::parse("M AA").unwrap();
    let tr = m.forward(&seq, "a", None).unwrap();
    assert_eq!(&tr.output, tr.shared_output());
}

#[test]
fn explosion_tripwire() {
    let mut m = small_model(3);
    let head = m.params.speaker_heads.get_mut("a").unwrap();
    head.b = Tensor2::from_vec(1, 8, vec![80.0; 8]).unwrap();
    assert!(matches!(
        m.generate(&PhonemeSequence::parse("AA").unwrap(), "a"),
        Err(coartic::Error::Numeric(_))
    ));
}

fn items(n: usize) -> Vec<TrainItem> {
    let mut r = rng(9);
    let seqs = ["P AA T", "S IY", "B OW L D", "N UW", "F AY V"];
    (0..n)
        .map(|i| TrainItem {
            id: format!("u{i}"),
            speaker: if i % 2 == 0 { "a" } else { "b" }.into(),
            phonemes: PhonemeSequence::parse(seqs[i % seqs.len()]).unwrap(),
            target: random_tensor(8 + i, 8, &mut r, 1.0),
        })
        .collect()
}

#[test]
fn batch_loss_ignores_item_order() {
    let m = small_model(4);
    let its = items(5);
    let fwd: Vec<&TrainItem> = its.iter().collect();
    let rev: Vec<&TrainItem> = its.iter().rev().collect();
    let cfg = TrainConfig::default();
    let (la, ga) = batch_loss_grad(&m, &fwd, &cfg).unwrap();
    let (lb, gb) = batch_loss_grad(&m, &rev, &cfg).unwrap();
    assert_eq!(la.to_bits(), lb.to_bits());
    assert_eq!(ga, gb);
    let direct = its.iter().map(|i| item_loss(&m, i, &cfg).unwrap()).sum::<f64>() / 5.0;
    assert!((direct - la).abs() < 1e-9 * la.abs());
}

#[test]
fn same_seed_same_history() {
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 2,
        epochs: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = small_model(5);
        let h = train(&mut m, &items(6), &items(2), &cfg).unwrap();
        (h.to_csv(), m.to_bytes(&[]))
    };
    assert_eq!(run(), run());
}

#[test]
fn overfits_a_single_utterance() {
    let oracle = OracleConfig {
        speakers: 1,
        utterances_per_speaker: 1,
        ..OracleConfig::default()
    };
    let ds = coartic::ema::synth_oracle(&oracle, 3).unwrap();
    let ids = vec![ds.utterances[0].id.clone()];
    let split = coartic::ema::DatasetSplit::from_lists(ids.clone(), vec![]).unwrap();
    let st = coartic::ema::fit_stats(&ds, &split).unwrap();
    let its = coartic::p2a::prepare_items(&ds, &ids, &st).unwrap();
    let cfg = ModelConfig {
        hidden: 32,
        layers: 2,
        embedding: 64,
        layout: oracle.layout.clone(),
    };
    let mut m = P2aModel::new(cfg, st, 1).unwrap();
    let tc = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 1,
        epochs: 500,
        ..TrainConfig::default()
    };
    let initial = item_loss(&m, &its[0], &tc).unwrap();
    train(&mut m, &its, &[], &tc).unwrap();
    let last = item_loss(&m, &its[0], &tc).unwrap();
    assert!(last < 0.05 * initial, "initial {initial}, final {last}");
}

#[test]
fn validation_loss_improves_by_epoch_ten() {
    let t = train_on_oracle(&OracleConfig::default(), 32, 10);
    let e = &t.history.epochs;
    assert!(e[9].val_loss < e[0].val_loss, "{} vs {}", e[9].val_loss, e[0].val_loss);
}

#[test]
fn trained_model_fits_held_out_utterances() {
    let t = trained();
    let fits = evaluate(&t.model, &t.validation, false).unwrap();
    let pcc = fits.iter().map(|f| f.metrics.pcc).sum::<f64>() / fits.len() as f64;
    assert!(pcc > 0.7, "pcc {pcc}");
    let bypass = evaluate(&t.model, &t.validation, true).unwrap();
    assert!(bypass.iter().all(|f| (f.metrics.pcc - 1.0).abs() < 1e-12 && f.metrics.rmse < 1e-12));
}

#[test]
fn vcv_items_parse() {
    for s in ["AH V IY", "AH V AH", "AH Z IY", "AH Z AH"] {
        assert_eq!(PhonemeSequence::parse(s).unwrap().len(), 3);
    }
}

#[test]
fn identical_vcv_inputs_do_not_diverge() {
    let cfg = ModelConfig {
        hidden: 8,
        layers: 1,
        embedding: 6,
        layout: ChannelLayout::default(),
    };
    let channels = cfg.channels();
    let m = P2aModel::new(cfg, stats(&["a"], channels), 6).unwrap();
    let s = PhonemeSequence::parse("AH V IY").unwrap();
    let d = demo_vcv(&m, &s, &s, "a").unwrap();
    assert!(d.divergence.iter().all(|v| *v == 0.0));
    assert_eq!(d.tv_a, d.tv_b);
    assert_eq!(d.onset(0.1), None);
}

fn anticipates(model: &impl Articulator, speaker: &str) {
    for (a, b) in [("AH V IY", "AH V AH"), ("AH Z IY", "AH Z AH")] {
        let (a, b) = (PhonemeSequence::parse(a).unwrap(), PhonemeSequence::parse(b).unwrap());
        let d = demo_vcv(model, &a, &b, speaker).unwrap();
        let onset = d.onset(0.1).expect("members differ");
        let last = d.a.timing.len() - 1;
        let bound = d.a.timing.mu[last] - d.a.timing.sigma[last];
        assert!((onset as f64) < bound, "onset {onset}, bound {bound}");
    }
}

#[test]
fn oracle_vcv_diverges_before_final_vowel() {
    let oracle = OracleArticulator::new(
        OracleConfig {
            analysis_duration: 6,
            ..OracleConfig::default()
        },
        2,
    )
    .unwrap();
    anticipates(&oracle, "spk00");
}

#[test]
fn trained_vcv_diverges_before_final_vowel() {
    let t = trained();
    anticipates(&t.model, &t.model.speakers()[0]);
}

#[test]
fn physical_output_inverts_normalisation() {
    let t = trained();
    let sp = t.model.speakers()[0].clone();
    let g = t.model.generate(&PhonemeSequence::parse("S AA").unwrap(), &sp).unwrap();
    let phys = t.model.physical(&g).unwrap();
    let st = &t.model.stats[&sp];
    for r in 0..g.ema.frames() {
        for c in 0..g.ema.channels() {
            let expect = g.ema.values().get(r, c) * st.std[c] + st.mean[c];
            assert!((phys.values().get(r, c) - expect).abs() < 1e-12);
        }
    }
}
