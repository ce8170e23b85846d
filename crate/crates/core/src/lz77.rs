//! Non-self-referential LZ77 factorization and the grammar-size diagnostic
//! built on it.
//!
//! Each factor is either the first occurrence of a character or the longest
//! prefix of the remaining text that occurs entirely inside the already
//! factorized prefix. One pattern-matching pass per factor keeps the cost at
//! O(N) per factor — fine for a diagnostic; the contract here is exactness,
//! not speed.

use crate::error::{Error, Result};
use crate::grammar::Rlslp;

/// Factor boundaries of the greedy parse; factors tile the text exactly.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Lz77Factorization {
    /// 1-based start position of each factor; `boundaries[0] == 1`.
    pub boundaries: Vec<u64>,
    pub text_len: u64,
}

impl Lz77Factorization {
    pub fn factor_count(&self) -> usize {
        self.boundaries.len()
    }

    /// (start, length) of each factor, 1-based.
    pub fn factors(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.boundaries.len()).map(move |i| {
            let start = self.boundaries[i];
            let end = self
                .boundaries
                .get(i + 1)
                .copied()
                .unwrap_or(self.text_len + 1);
            (start, end - start)
        })
    }
}

/// Z-array: `z[i]` = length of the longest common prefix of `s` and `s[i..]`.
fn z_array(s: &[u32]) -> Vec<usize> {
    let n = s.len();
    let mut z = vec![0usize; n];
    if n == 0 {
        return z;
    }
    z[0] = n;
    let (mut l, mut r) = (0usize, 0usize);
    for i in 1..n {
        if i < r {
            z[i] = z[i - l].min(r - i);
        }
        while i + z[i] < n && s[z[i]] == s[i + z[i]] {
            z[i] += 1;
        }
        if i + z[i] > r {
            l = i;
            r = i + z[i];
        }
    }
    z
}

/// Greedy left-to-right factorization of a token sequence. Tokens must not
/// use `u32::MAX` (reserved as an internal separator).
pub fn lz77_factorize(text: &[u32]) -> Result<Lz77Factorization> {
    if text.is_empty() {
        return Err(Error::EmptyInput);
    }
    if text.contains(&u32::MAX) {
        return Err(Error::Invalid("token value u32::MAX is reserved".into()));
    }
    let n = text.len();
    let mut boundaries = Vec::new();
    let mut p = 0usize; // 0-based factor start
    while p < n {
        boundaries.push(p as u64 + 1);
        if p == 0 {
            p += 1;
            continue;
        }
        // Longest prefix of text[p..] occurring entirely within text[..p]:
        // match lengths of the pattern at every window position, each capped
        // so the occurrence ends before p.
        let mut buf = Vec::with_capacity(n + 1);
        buf.extend_from_slice(&text[p..]);
        buf.push(u32::MAX);
        buf.extend_from_slice(&text[..p]);
        let z = z_array(&buf);
        let pattern_len = n - p;
        let mut best = 0usize;
        for q in 0..p {
            let m = z[pattern_len + 1 + q].min(p - q);
            best = best.max(m);
        }
        p += best.max(1);
    }
    Ok(Lz77Factorization {
        boundaries,
        text_len: n as u64,
    })
}

/// Byte-string convenience wrapper.
pub fn lz77_factorize_bytes(text: &[u8]) -> Result<Lz77Factorization> {
    let tokens: Vec<u32> = text.iter().map(|&b| b as u32).collect();
    lz77_factorize(&tokens)
}

/// The measured grammar size against the factorization-based yardstick
/// `z * (1 + log2(max(2, N/z)))`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SizeBoundReport {
    pub text_len: u64,
    pub factor_count: u64,
    pub grammar_size: u64,
    pub ratio: f64,
}

/// Compares grammar size with the factor count of the same text.
pub fn size_bound_report(g: &Rlslp, fz: &Lz77Factorization) -> Result<SizeBoundReport> {
    if g.text_len() != fz.text_len {
        return Err(Error::Invalid(format!(
            "grammar generates {} characters, factorization covers {}",
            g.text_len(),
            fz.text_len
        )));
    }
    let n = g.text_len() as f64;
    let z = fz.factor_count() as f64;
    let denom = z * (1.0 + (n / z).max(2.0).log2());
    Ok(SizeBoundReport {
        text_len: g.text_len(),
        factor_count: fz.factor_count() as u64,
        grammar_size: g.symbol_count() as u64,
        ratio: g.symbol_count() as f64 / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recompress::build_from_bytes;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn factor_list(text: &[u8]) -> Vec<(u64, u64)> {
        lz77_factorize_bytes(text).unwrap().factors().collect()
    }

    #[test]
    fn worked_example_has_six_factors() {
        // a · b · a · aba · ab · b
        assert_eq!(
            factor_list(b"abaabaabb"),
            vec![(1, 1), (2, 1), (3, 1), (4, 3), (7, 2), (9, 1)]
        );
    }

    #[test]
    fn unary_text_doubles_factor_lengths() {
        // a · a · aa: the length-2 factor first fits once two a's precede it.
        assert_eq!(factor_list(b"aaaa"), vec![(1, 1), (2, 1), (3, 2)]);
        let fz = lz77_factorize_bytes(&vec![b'a'; 1024]).unwrap();
        assert_eq!(fz.factor_count(), 11); // 1,1,2,4,...,512
    }

    #[test]
    fn single_character_is_one_factor() {
        assert_eq!(factor_list(b"x"), vec![(1, 1)]);
    }

    #[test]
    fn factors_tile_and_are_maximal() {
        let mut rng = StdRng::seed_from_u64(11);
        for alpha in [2u8, 4, 26] {
            let text: Vec<u8> = (0..600).map(|_| b'a' + rng.gen_range(0..alpha)).collect();
            let fz = lz77_factorize_bytes(&text).unwrap();
            let mut covered = 0usize;
            for (start, len) in fz.factors() {
                let (start, len) = (start as usize - 1, len as usize);
                assert_eq!(start, covered);
                let factor = &text[start..start + len];
                let prefix = &text[..start];
                let occurs_in_prefix = |needle: &[u8]| {
                    prefix
                        .windows(needle.len())
                        .any(|w| w == needle)
                };
                if len >= 2 {
                    assert!(occurs_in_prefix(factor));
                }
                if start + len < text.len() {
                    let extended = &text[start..start + len + 1];
                    if len >= 1 && !prefix.is_empty() {
                        assert!(
                            !occurs_in_prefix(extended),
                            "factor at {start} not maximal"
                        );
                    }
                }
                covered += len;
            }
            assert_eq!(covered, text.len());
        }
    }

    #[test]
    fn report_uses_the_guarded_denominator() {
        // All-distinct text: N == z, the max(2, ..) guard applies.
        let text = b"abcdefgh";
        let g = build_from_bytes(text).unwrap();
        let fz = lz77_factorize_bytes(text).unwrap();
        assert_eq!(fz.factor_count(), 8);
        let r = size_bound_report(&g, &fz).unwrap();
        let denom = 8.0 * (1.0 + 2.0f64.log2());
        assert!((r.ratio - g.symbol_count() as f64 / denom).abs() < 1e-12);
    }

    #[test]
    fn report_rejects_mismatched_lengths() {
        let g = build_from_bytes(b"abab").unwrap();
        let fz = lz77_factorize_bytes(b"ababab").unwrap();
        assert!(size_bound_report(&g, &fz).is_err());
    }

    #[test]
    fn unary_power_grammar_stays_within_the_calibrated_bound() {
        let text = vec![b'a'; 1024];
        let g = build_from_bytes(&text).unwrap();
        let fz = lz77_factorize_bytes(&text).unwrap();
        let r = size_bound_report(&g, &fz).unwrap();
        assert!(r.ratio <= 16.0, "ratio {}", r.ratio);
    }
}
