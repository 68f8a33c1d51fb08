//! Superimposed-coding bit signatures over semantic concepts.
//!
//! A concept whose posterior reaches the threshold sets bit `index mod ℓ`.
//! Node signatures are the OR of their children, so a query whose bits are
//! all present in a node signature may have matches below it, and a query
//! with any bit absent has none.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::SemanticVector;

/// Fixed-length bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    len: usize,
    words: Vec<u64>,
}

impl Signature {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Bit `i` is set iff `bits[i]`.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.set(i);
            }
        }
        s
    }

    pub(crate) fn from_words(len: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::dim(len.div_ceil(64), words.len(), "signature words"));
        }
        let s = Self { len, words };
        if s.iter_ones().any(|i| i >= len) {
            return Err(Error::InvalidArgument(
                "signature has bits past its length".into(),
            ));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn clear(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64)
                .filter(move |b| w >> b & 1 == 1)
                .map(move |b| wi * 64 + b)
        })
    }

    /// In-place OR. Lengths must agree.
    pub fn or_assign(&mut self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(Error::dim(self.len, other.len, "signature length"));
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// Whether every bit set here is also set in `other`.
    #[inline]
    pub fn is_subset_of(&self, other: &Self) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & b == *a)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature(")?;
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        write!(f, ")")
    }
}

/// Signature length and concept threshold for one tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignatureParams {
    pub bits: usize,
    pub threshold: f64,
}

impl SignatureParams {
    pub const DEFAULT_BITS: usize = 64;

    pub fn new(bits: usize, threshold: f64) -> Result<Self> {
        if bits == 0 {
            return Err(Error::InvalidArgument(
                "signature length must be at least 1".into(),
            ));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "signature threshold {threshold} outside (0, 1)"
            )));
        }
        Ok(Self { bits, threshold })
    }

    /// 64 bits, threshold twice the uniform posterior (capped below 1).
    pub fn default_for_classes(class_count: usize) -> Self {
        let t = (2.0 / class_count.max(1) as f64).min(0.999);
        Self {
            bits: Self::DEFAULT_BITS,
            threshold: t,
        }
    }

    pub fn sign(&self, sv: &SemanticVector) -> Signature {
        object_signature(sv, self.bits, self.threshold)
    }
}

/// Bit `i mod ell` is set for every concept `i` with posterior at least `tau`.
pub fn object_signature(sv: &SemanticVector, ell: usize, tau: f64) -> Signature {
    let mut s = Signature::zeros(ell);
    for (i, &p) in sv.as_slice().iter().enumerate() {
        if p >= tau {
            s.set(i % ell);
        }
    }
    s
}

/// OR of all inputs; zero-length all-zero signature for an empty input.
pub fn superimpose<'a>(sigs: impl IntoIterator<Item = &'a Signature>) -> Result<Signature> {
    let mut it = sigs.into_iter();
    let Some(first) = it.next() else {
        return Ok(Signature::zeros(0));
    };
    let mut acc = first.clone();
    for s in it {
        acc.or_assign(s)?;
    }
    Ok(acc)
}

/// Zero signature of `len` bits superimposed with `sigs`.
pub fn superimpose_len<'a>(
    len: usize,
    sigs: impl IntoIterator<Item = &'a Signature>,
) -> Result<Signature> {
    let mut acc = Signature::zeros(len);
    for s in sigs {
        acc.or_assign(s)?;
    }
    Ok(acc)
}

/// True iff every query bit is set in `node`.
pub fn signature_matches(query: &Signature, node: &Signature) -> Result<bool> {
    if query.len != node.len {
        return Err(Error::dim(query.len, node.len, "signature length"));
    }
    Ok(query.is_subset_of(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Signature {
        Signature::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    fn sv(v: &[f64]) -> SemanticVector {
        SemanticVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn object_signature_examples() {
        assert!(object_signature(&SemanticVector::uniform(4), 4, 0.5).is_zero());
        assert_eq!(
            object_signature(&sv(&[0.9, 0.1, 0.0, 0.0]), 4, 0.5),
            bits("1000")
        );

        let mut p = vec![0.02; 8];
        p[2] = 0.4;
        p[7] = 0.48;
        let s = object_signature(&sv(&p), 4, 0.3);
        // fold oracle: concepts {2, 7} at or above tau hash to {2 % 4, 7 % 4}
        let expected: Vec<usize> = p
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= 0.3)
            .map(|(i, _)| i % 4)
            .collect();
        assert_eq!(expected, vec![2, 3]);
        assert_eq!(s.iter_ones().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn superimpose_examples() {
        assert_eq!(
            superimpose([&bits("0101"), &bits("0011")]).unwrap(),
            bits("0111")
        );
        let x = bits("1001");
        assert_eq!(superimpose([&x, &Signature::zeros(4)]).unwrap(), x);
        assert!(superimpose([]).unwrap().is_zero());
        assert!(superimpose([&bits("01"), &bits("011")]).is_err());
    }

    #[test]
    fn match_examples() {
        let q = bits("0110");
        assert!(signature_matches(&q, &q).unwrap());
        assert!(signature_matches(&bits("0100"), &bits("0111")).unwrap());
        assert!(!signature_matches(&bits("1100"), &bits("0111")).unwrap());
        assert!(signature_matches(&bits("01"), &bits("011")).is_err());
    }

    #[test]
    fn default_threshold_is_twice_uniform() {
        let p = SignatureParams::default_for_classes(10);
        assert_eq!(p.bits, 64);
        assert!((p.threshold - 0.2).abs() < 1e-15);
        assert!(SignatureParams::new(0, 0.5).is_err());
        assert!(SignatureParams::new(8, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn superimpose_is_per_bit_or(inputs in prop::collection::vec(prop::collection::vec(any::<bool>(), 70), 1..10)) {
            let sigs: Vec<Signature> = inputs.iter().map(|b| Signature::from_bits(b)).collect();
            let or = superimpose(&sigs).unwrap();
            for j in 0..70 {
                prop_assert_eq!(or.get(j), inputs.iter().any(|b| b[j]));
            }
            for s in &sigs {
                prop_assert!(signature_matches(s, &or).unwrap());
            }
        }
    }
}
