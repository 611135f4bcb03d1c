mod common;

use coartic::lexicon::{
    enumerate_minimal_pairs, parse_lexicon, read_pairs, write_pairs, Lexicon, MinimalPair, PhonemeSequence,
};
use common::{brute_force_pairs, pinned_lexicon, sub_lexicon};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn as_triples(pairs: &[MinimalPair]) -> Vec<(String, String, usize)> {
    pairs.iter().map(|p| (p.word_a.clone(), p.word_b.clone(), p.trigger_pos)).collect()
}

#[test]
fn enumeration_matches_brute_force_on_sub_lexicons() {
    let full = pinned_lexicon(10_000);
    for seed in 0..100 {
        let lex = sub_lexicon(&full, 50, seed);
        assert_eq!(as_triples(&enumerate_minimal_pairs(&lex)), brute_force_pairs(&lex), "seed {seed}");
    }
}

#[test]
fn dense_sub_lexicon_matches_brute_force() {
    // short words only, so pairs are plentiful
    let full = pinned_lexicon(10_000);
    let short = Lexicon::from_entries(
        full.entries().iter().filter(|e| e.seq.len() <= 3).take(400).map(|e| (e.word.clone(), e.seq.clone())),
    );
    let pairs = enumerate_minimal_pairs(&short);
    assert!(pairs.len() > 100);
    assert_eq!(as_triples(&pairs), brute_force_pairs(&short));
}

#[test]
fn full_snapshot_is_stable() {
    let a = enumerate_minimal_pairs(&pinned_lexicon(10_000));
    let b = enumerate_minimal_pairs(&pinned_lexicon(10_000));
    assert_eq!(write_pairs(&a), write_pairs(&b));
    assert_eq!(read_pairs(&write_pairs(&a)).unwrap(), a);
}

#[test]
fn pinned_lexicon_round_trips() {
    let lex = pinned_lexicon(10_000);
    let again = parse_lexicon(&lex.to_dict_text(), &lex.to_wordlist_text(), lex.len()).unwrap();
    assert_eq!(again, lex);
    for e in lex.entries() {
        assert!(e.seq.tokens().iter().all(|p| !p.symbol().chars().any(|c| c.is_ascii_digit())));
    }
}

#[test]
fn pairs_differ_at_one_position() {
    for p in enumerate_minimal_pairs(&pinned_lexicon(3000)) {
        let diffs = (0..p.len()).filter(|&i| p.seq_a.tokens()[i] != p.seq_b.tokens()[i]).count();
        assert_eq!(diffs, 1);
        assert!(p.word_a < p.word_b);
    }
}

fn small_lexicon() -> impl Strategy<Value = Vec<(String, String)>> {
    let phones = prop::sample::select(vec!["P", "B", "AE", "T", "D", "IY", "S"]);
    prop::collection::btree_map("[a-z]{1,4}", prop::collection::vec(phones, 1..4), 1..25).prop_map(|m| {
        m.into_iter().map(|(w, ph)| (w, ph.join(" "))).collect()
    })
}

proptest! {
    #[test]
    fn enumeration_ignores_input_order(words in small_lexicon(), rot in 0usize..25) {
        // distinct pronunciations so that homophone collapse cannot depend on order
        let mut seen = BTreeSet::new();
        let words: Vec<_> = words.into_iter().filter(|(_, p)| seen.insert(p.clone())).collect();
        let lex = |ws: &[(String, String)]| {
            Lexicon::from_entries(ws.iter().map(|(w, p)| (w.clone(), PhonemeSequence::parse(p).unwrap())))
        };
        let mut rotated = words.clone();
        rotated.rotate_left(rot % words.len());
        rotated.reverse();
        let a: BTreeSet<_> = enumerate_minimal_pairs(&lex(&words)).into_iter().map(|p| p.to_line()).collect();
        let b: BTreeSet<_> = enumerate_minimal_pairs(&lex(&rotated)).into_iter().map(|p| p.to_line()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn parse_is_idempotent(words in small_lexicon()) {
        let dict: String = words.iter().map(|(w, p)| format!("{}  {}\n", w.to_uppercase(), p.replace("AE", "AE1").replace("IY", "IY0"))).collect();
        let list: String = words.iter().map(|(w, _)| format!("{w}\n")).collect();
        let lex = parse_lexicon(&dict, &list, words.len()).unwrap();
        let again = parse_lexicon(&lex.to_dict_text(), &lex.to_wordlist_text(), lex.len()).unwrap();
        prop_assert_eq!(&again, &lex);
        for e in lex.entries() {
            prop_assert!(e.seq.to_string().chars().all(|c| !c.is_ascii_digit()));
        }
    }

    #[test]
    fn enumeration_matches_brute_force(words in small_lexicon()) {
        let lex = Lexicon::from_entries(words.iter().map(|(w, p)| (w.clone(), PhonemeSequence::parse(p).unwrap())));
        prop_assert_eq!(as_triples(&enumerate_minimal_pairs(&lex)), brute_force_pairs(&lex));
    }
}
