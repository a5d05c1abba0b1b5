//! Colexicographic ranking of fixed-weight binary strings, used to address
//! individual cubes inside a type class.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of binary strings of length `len` with `ones` one-digits.
pub fn member_count(len: u64, ones: u64) -> BigUint {
    binomial(len, ones)
}

/// Colex rank `sum_i C(c_i, i)` where `c_1 < c_2 < ...` are the positions of the ones.
pub fn colex_rank(bits: &[u8]) -> BigUint {
    let mut rank = BigUint::zero();
    let mut i = 0u64;
    for (c, &b) in bits.iter().enumerate() {
        if b != 0 {
            i += 1;
            rank += binomial(c as u64, i);
        }
    }
    rank
}

/// Inverse of [`colex_rank`] on strings of length `len` with `ones` one-digits.
pub fn colex_unrank(len: u64, ones: u64, rank: &BigUint) -> Result<Vec<u8>> {
    if ones > len {
        return Err(Error::InvalidPath(format!("{ones} ones exceed length {len}")));
    }
    if rank >= &member_count(len, ones) {
        return Err(Error::InvalidPath(format!("member index {rank} out of range for C({len},{ones})")));
    }
    let mut bits = vec![0u8; len as usize];
    let mut rank = rank.clone();
    if ones == 0 {
        return Ok(bits);
    }
    // Walk c downwards keeping b = C(c, i) current.
    let mut i = ones;
    let mut c = len - 1;
    let mut b = binomial(c, i);
    loop {
        while b > rank {
            // C(c-1, i) = C(c, i) (c - i) / c
            b = b * (c - i) / c;
            c -= 1;
        }
        bits[c as usize] = 1;
        rank -= &b;
        if i == 1 {
            break;
        }
        // C(c-1, i-1) = C(c, i) i / c
        b = b * i / c;
        i -= 1;
        c -= 1;
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_enumeration_is_bijective() {
        for len in 0..=10u64 {
            for ones in 0..=len {
                let count = member_count(len, ones);
                let n: u64 = count.clone().try_into().unwrap();
                for r in 0..n {
                    let bits = colex_unrank(len, ones, &BigUint::from(r)).unwrap();
                    assert_eq!(bits.iter().filter(|&&b| b == 1).count() as u64, ones);
                    assert_eq!(colex_rank(&bits), BigUint::from(r));
                }
                assert!(colex_unrank(len, ones, &count).is_err());
            }
        }
    }

    #[test]
    fn colex_order_example() {
        let words: Vec<Vec<u8>> = (0..3u64).map(|r| colex_unrank(3, 2, &BigUint::from(r)).unwrap()).collect();
        assert_eq!(words, vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn unrank_rank_roundtrip(bits in proptest::collection::vec(0u8..2, 1..400)) {
            let ones = bits.iter().filter(|&&b| b == 1).count() as u64;
            let r = colex_rank(&bits);
            prop_assert_eq!(colex_unrank(bits.len() as u64, ones, &r).unwrap(), bits);
        }
    }
}
