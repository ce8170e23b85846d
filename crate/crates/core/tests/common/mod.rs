#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use recomp::{Slp, SlpRule, VarId};

/// Deterministic random text over `'a'..'a'+alpha`.
pub fn random_text(seed: u64, len: usize, alpha: u8) -> Vec<u8> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..len).map(|_| b'a' + rng.gen_range(0..alpha)).collect()
}

/// Deterministic random bytes over the full byte alphabet.
pub fn random_bytes(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen()).collect()
}

/// Fibonacci word: S1 = "b", S2 = "a", Sk = S(k-1) S(k-2).
pub fn fibonacci_word(k: u32) -> Vec<u8> {
    assert!(k >= 1);
    let (mut prev, mut cur) = (vec![b'b'], vec![b'a']);
    if k == 1 {
        return prev;
    }
    for _ in 2..k {
        let next = [cur.as_slice(), prev.as_slice()].concat();
        prev = cur;
        cur = next;
    }
    cur
}

/// SLP generating the Fibonacci word S_k (k >= 3).
pub fn fibonacci_slp(k: u32) -> Slp {
    assert!(k >= 3);
    let mut rules = vec![SlpRule::Char(b'b' as u32), SlpRule::Char(b'a' as u32)];
    for i in 3..=k {
        rules.push(SlpRule::Pair(VarId::new(i - 1), VarId::new(i - 2)));
    }
    Slp::new(rules).unwrap()
}

/// Random SLP with at most `max_vars` variables generating at most
/// `max_len` characters.
pub fn random_slp(rng: &mut StdRng, max_vars: u32, alpha: u32, max_len: u64) -> Slp {
    let terminals = rng.gen_range(1..=alpha.min(4));
    let mut rules: Vec<SlpRule> = (0..terminals)
        .map(|i| SlpRule::Char('a' as u32 + i))
        .collect();
    let mut lens: Vec<u64> = vec![1; terminals as usize];
    let n = rng.gen_range(terminals + 1..=max_vars.max(terminals + 1));
    for k in terminals..n {
        let mut pick = (1u32, 1u32);
        for _ in 0..8 {
            let l = rng.gen_range(1..=k);
            let r = rng.gen_range(1..=k);
            if lens[l as usize - 1] + lens[r as usize - 1] <= max_len {
                pick = (l, r);
                break;
            }
        }
        rules.push(SlpRule::Pair(VarId::new(pick.0), VarId::new(pick.1)));
        lens.push(lens[pick.0 as usize - 1] + lens[pick.1 as usize - 1]);
    }
    Slp::new(rules).unwrap()
}

/// Texts of length <= 200: random over alphabets of size 1, 2, 4 and 26,
/// Fibonacci words, unary runs, and the reference example.
pub fn small_corpus() -> Vec<(String, Vec<u8>)> {
    let mut corpus = Vec::new();
    let mut seed = 100;
    for alpha in [1u8, 2, 4, 26] {
        for len in [1usize, 2, 3, 5, 17, 64, 128, 200] {
            corpus.push((
                format!("random-a{alpha}-n{len}"),
                random_text(seed, len, alpha),
            ));
            seed += 1;
        }
    }
    for k in 2..=12u32 {
        let w = fibonacci_word(k);
        assert!(w.len() <= 200);
        corpus.push((format!("fibonacci-{k}"), w));
    }
    for len in [1usize, 2, 3, 50, 200] {
        corpus.push((format!("unary-{len}"), vec![b'a'; len]));
    }
    corpus.push(("abaabaabb".to_string(), b"abaabaabb".to_vec()));
    corpus
}

/// The small corpus plus larger structured and random texts.
pub fn standard_corpus() -> Vec<(String, Vec<u8>)> {
    let mut corpus = small_corpus();
    corpus.push(("random-a2-n10000".into(), random_text(900, 10_000, 2)));
    corpus.push(("random-a26-n10000".into(), random_text(901, 10_000, 26)));
    for k in [10u32, 14, 17, 20] {
        corpus.push((format!("unary-2pow{k}"), vec![b'a'; 1 << k]));
    }
    for k in [20u32, 25, 30] {
        corpus.push((format!("fibonacci-{k}"), fibonacci_word(k)));
    }
    corpus
}
