//! Feedback codebooks and minimum-distance decoding.
//!
//! A codebook is the set of binary sequences the beam-alignment phase is
//! allowed to produce as error-free detection sequences. Codewords are stored
//! as unsigned machine words (block length at most 20 bits), so decoding is a
//! full scan with XOR + popcount.
//!
//! Bit convention: slot 1 of a length-`L` sequence is the most significant of
//! the low `L` bits, so the printed bit-string reads slot 1..L left to right
//! and the canonical codebook order (ascending integers) matches ascending
//! bit-strings.

use std::fmt;

use crate::error::{Error, Result};

/// Hard cap on block length; words are kept in `u32` and several routines
/// enumerate all `2^L` error patterns.
pub const MAX_BLOCK_LEN: u32 = 20;

/// Largest codebook for which pairwise minimum-distance computation is done
/// at construction time.
const MAX_PAIRWISE: usize = 1 << 12;

/// A binary feedback sequence of fixed length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    word: u32,
    len: u32,
}

impl Codeword {
    pub fn new(word: u32, len: u32) -> Result<Self> {
        if len == 0 || len > MAX_BLOCK_LEN {
            return Err(Error::invalid(format!(
                "codeword length {len} outside 1..={MAX_BLOCK_LEN}"
            )));
        }
        if len < 32 && word >> len != 0 {
            return Err(Error::invalid(format!(
                "word {word:#x} does not fit in {len} bits"
            )));
        }
        Ok(Codeword { word, len })
    }

    pub fn word(&self) -> u32 {
        self.word
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Hamming weight `W(.)`: number of 1-bits.
    pub fn weight(&self) -> u32 {
        self.word.count_ones()
    }

    /// Bit of slot `k`, with slots indexed `1..=len`.
    pub fn bit(&self, slot: u32) -> bool {
        assert!(slot >= 1 && slot <= self.len, "slot {slot} out of range");
        (self.word >> (self.len - slot)) & 1 == 1
    }

    /// Entry-wise modulo-2 addition.
    pub fn xor(&self, other: &Codeword) -> Result<Codeword> {
        if self.len != other.len {
            return Err(Error::invalid("codeword length mismatch in xor"));
        }
        Ok(Codeword {
            word: self.word ^ other.word,
            len: self.len,
        })
    }

    pub fn hamming_distance(&self, other: &Codeword) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::invalid("codeword length mismatch in distance"));
        }
        Ok((self.word ^ other.word).count_ones())
    }

    /// Parse a bit-string such as `1011001`.
    pub fn from_bitstring(s: &str) -> Result<Codeword> {
        let len = s.len() as u32;
        let mut word = 0u32;
        for ch in s.chars() {
            word <<= 1;
            match ch {
                '0' => {}
                '1' => word |= 1,
                _ => return Err(Error::invalid(format!("bad bit character {ch:?}"))),
            }
        }
        Codeword::new(word, len)
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 1..=self.len {
            write!(f, "{}", u8::from(self.bit(k)))?;
        }
        Ok(())
    }
}

/// Kind of feedback codebook used by a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    /// The [7,4,3] Hamming code (coded scheme).
    Hamming74,
    /// Columns of the `L x L` identity (exhaustive search).
    Exhaustive(u32),
    /// All `2^L` sequences (no error correction).
    Uncoded(u32),
}

impl CodebookKind {
    pub fn block_len(&self) -> u32 {
        match self {
            CodebookKind::Hamming74 => 7,
            CodebookKind::Exhaustive(l) | CodebookKind::Uncoded(l) => *l,
        }
    }

    pub fn label(&self) -> String {
        match self {
            CodebookKind::Hamming74 => "hamming74".to_string(),
            CodebookKind::Exhaustive(l) => format!("exhaustive{l}"),
            CodebookKind::Uncoded(l) => format!("uncoded{l}"),
        }
    }
}

/// An error-correcting feedback codebook.
///
/// Codewords are kept distinct and in canonical order (ascending as
/// big-endian integers). Immutable after construction.
#[derive(Debug, Clone)]
pub struct Codebook {
    words: Vec<u32>,
    len: u32,
    min_distance: u32,
    epsilon: u32,
    /// `weight_distribution[w]` = number of codewords of Hamming weight `w`.
    weight_distribution: Vec<usize>,
}

impl Codebook {
    /// Build one of the three schemes compared in the experiments.
    pub fn build(kind: CodebookKind) -> Result<Codebook> {
        match kind {
            CodebookKind::Hamming74 => Codebook::hamming74(),
            CodebookKind::Exhaustive(l) => Codebook::exhaustive(l),
            CodebookKind::Uncoded(l) => Codebook::uncoded(l),
        }
    }

    /// The [7,4,3] Hamming code whose parity-check columns are the binary
    /// expansions of 1..7 (column j attached to slot j). Any [7,4,3] code is
    /// equivalent; fixing this one makes tests bit-exact.
    pub fn hamming74() -> Result<Codebook> {
        let len = 7u32;
        let words: Vec<u32> = (0u32..1 << len)
            .filter(|v| {
                let mut syndrome = 0u32;
                for slot in 1..=len {
                    if (v >> (len - slot)) & 1 == 1 {
                        syndrome ^= slot;
                    }
                }
                syndrome == 0
            })
            .collect();
        Codebook::from_sorted_words(words, len)
    }

    /// Codeword i has its single 1 in slot i: the columns of the identity.
    pub fn exhaustive(l: u32) -> Result<Codebook> {
        if !(1..=MAX_BLOCK_LEN).contains(&l) {
            return Err(Error::invalid(format!(
                "exhaustive block length {l} outside 1..={MAX_BLOCK_LEN}"
            )));
        }
        let mut words: Vec<u32> = (0..l).map(|i| 1u32 << i).collect();
        words.sort_unstable();
        Codebook::from_sorted_words(words, l)
    }

    /// All `2^L` binary sequences.
    pub fn uncoded(l: u32) -> Result<Codebook> {
        if l < 1 {
            return Err(Error::invalid("uncoded block length must be >= 1"));
        }
        if l > MAX_BLOCK_LEN {
            return Err(Error::CapacityRefused(format!(
                "uncoded({l}) would enumerate 2^{l} codewords"
            )));
        }
        let words: Vec<u32> = (0..1u32 << l).collect();
        Codebook::from_sorted_words(words, l)
    }

    /// Build a codebook from an explicit codeword set (used for randomized
    /// sub-codebook cross-checks). Words are deduplicated and sorted.
    pub fn from_words(mut words: Vec<u32>, len: u32) -> Result<Codebook> {
        if !(1..=MAX_BLOCK_LEN).contains(&len) {
            return Err(Error::invalid(format!(
                "block length {len} outside 1..={MAX_BLOCK_LEN}"
            )));
        }
        words.sort_unstable();
        words.dedup();
        if words.is_empty() {
            return Err(Error::invalid("codebook must be non-empty"));
        }
        if let Some(&w) = words.last() {
            if len < 32 && w >> len != 0 {
                return Err(Error::invalid("codeword does not fit in block length"));
            }
        }
        Codebook::from_sorted_words(words, len)
    }

    fn from_sorted_words(words: Vec<u32>, len: u32) -> Result<Codebook> {
        let mut weight_distribution = vec![0usize; len as usize + 1];
        for &w in &words {
            weight_distribution[w.count_ones() as usize] += 1;
        }
        let min_distance = if words.len() == (1usize << len) {
            // Full space: adjacent integers differ in one bit.
            1
        } else if words.len() <= MAX_PAIRWISE {
            let mut best = u32::MAX;
            for (i, &a) in words.iter().enumerate() {
                for &b in &words[i + 1..] {
                    best = best.min((a ^ b).count_ones());
                }
            }
            if best == u32::MAX {
                len // single codeword; distance is vacuous, epsilon covers everything
            } else {
                best
            }
        } else {
            return Err(Error::CapacityRefused(format!(
                "pairwise distance over {} codewords refused",
                words.len()
            )));
        };
        let epsilon = min_distance.saturating_sub(1) / 2;
        Ok(Codebook {
            words,
            len,
            min_distance,
            epsilon,
            weight_distribution,
        })
    }

    pub fn len_slots(&self) -> u32 {
        self.len
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn min_distance(&self) -> u32 {
        self.min_distance
    }

    /// Correctable errors: `floor((d_min - 1) / 2)`.
    pub fn epsilon(&self) -> u32 {
        self.epsilon
    }

    pub fn weight_distribution(&self) -> &[usize] {
        &self.weight_distribution
    }

    /// Mean codeword weight, used in the upper bisection bound.
    pub fn mean_weight(&self) -> f64 {
        let total: usize = self
            .weight_distribution
            .iter()
            .enumerate()
            .map(|(w, &n)| w * n)
            .sum();
        total as f64 / self.size() as f64
    }

    pub fn codeword(&self, index: usize) -> Codeword {
        Codeword {
            word: self.words[index],
            len: self.len,
        }
    }

    /// Canonical index of a word, if it is a codeword.
    pub fn index_of(&self, word: u32) -> Option<usize> {
        self.words.binary_search(&word).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Codeword> + '_ {
        self.words.iter().map(move |&word| Codeword {
            word,
            len: self.len,
        })
    }

    pub fn weight_of(&self, index: usize) -> u32 {
        self.words[index].count_ones()
    }

    /// Minimum Hamming distance decoder `f(u)`; ties broken by canonical
    /// order (smallest big-endian integer wins).
    pub fn decode(&self, u: &Codeword) -> Result<Codeword> {
        Ok(self.codeword(self.decode_index(u)?))
    }

    /// Like [`Codebook::decode`] but returning the canonical index.
    pub fn decode_index(&self, u: &Codeword) -> Result<usize> {
        if u.len != self.len {
            return Err(Error::invalid(format!(
                "detected sequence length {} != codebook length {}",
                u.len, self.len
            )));
        }
        Ok(self.decode_word(u.word))
    }

    fn decode_word(&self, u: u32) -> usize {
        let mut best_idx = 0usize;
        let mut best_dist = u32::MAX;
        for (i, &c) in self.words.iter().enumerate() {
            let d = (u ^ c).count_ones();
            if d < best_dist {
                best_dist = d;
                best_idx = i;
            }
        }
        best_idx
    }

    /// Precompute `decode_index` for every `u` in `{0,1}^L`.
    ///
    /// The table has `2^L` entries; callers use it in the hot simulation and
    /// exact power-evaluation loops.
    pub fn decode_table(&self) -> Vec<u32> {
        let n = 1usize << self.len;
        (0..n).map(|u| self.decode_word(u as u32) as u32).collect()
    }

    /// One codeword per line as a bit-string, in canonical order.
    pub fn to_text_listing(&self) -> String {
        let mut out = String::with_capacity(self.size() * (self.len as usize + 1));
        for c in self.iter() {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }
}
