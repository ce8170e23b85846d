//! Shared input generators for the benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use recomp::{Slp, SlpRule, VarId};

pub fn random_text(seed: u64, len: usize, alpha: u8) -> Vec<u8> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..len).map(|_| b'a' + rng.gen_range(0..alpha)).collect()
}

/// Fibonacci word: S1 = "b", S2 = "a", Sk = S(k-1) S(k-2).
pub fn fibonacci_word(k: u32) -> Vec<u8> {
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

/// SLP generating the Fibonacci word S_k.
pub fn fibonacci_slp(k: u32) -> Slp {
    assert!(k >= 3);
    let mut rules = vec![SlpRule::Char(b'b' as u32), SlpRule::Char(b'a' as u32)];
    for i in 3..=k {
        rules.push(SlpRule::Pair(VarId::new(i - 1), VarId::new(i - 2)));
    }
    Slp::new(rules).unwrap()
}
