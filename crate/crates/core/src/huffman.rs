//! Classical Huffman machinery over an eigenvalue distribution.
//!
//! The quantum code assigns codeword `h_i` to eigenstate `|φ_i⟩`, so everything
//! here works on plain probability vectors. Construction is deterministic: the
//! work list is ordered by `(weight, creation order)` and the earlier-created
//! node of each merged pair becomes the `0` branch.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance used for the sum-to-one check and for weight ties.
pub const PROB_TOL: f64 = 1e-12;

/// Largest alphabet the exhaustive optimality oracle accepts.
pub const ORACLE_MAX_SYMBOLS: usize = 8;

/// A validated probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    probs: Vec<f64>,
}

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!("entry {i} = {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in bits, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }
}

pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// A bit string stored one bit per element, most significant (first written) first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Codeword(pub Vec<bool>);

impl Codeword {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("bad bit {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Codeword)
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Width of an unsigned register able to hold every value in `0..=max_value`.
pub fn register_width(max_value: usize) -> usize {
    let mut w = 1;
    while (1usize << w) <= max_value {
        w += 1;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuffmanCode {
    codewords: Vec<Codeword>,
    avg_len: f64,
}

impl HuffmanCode {
    /// Wraps explicit codewords, checking they are non-empty and prefix-free.
    /// `avg_len` is left at the unweighted mean; use [`average_length`] for a
    /// specific distribution.
    pub fn from_codewords(codewords: Vec<Codeword>) -> Result<Self> {
        if codewords.is_empty() {
            return Err(Error::InvalidDistribution("empty code".into()));
        }
        if codewords.iter().any(Codeword::is_empty) {
            return Err(Error::InvalidDistribution("zero-length codeword".into()));
        }
        if !is_prefix_free(&codewords) {
            return Err(Error::InvalidDistribution("code is not prefix-free".into()));
        }
        let avg_len =
            codewords.iter().map(Codeword::len).sum::<usize>() as f64 / codewords.len() as f64;
        Ok(Self { codewords, avg_len })
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn codeword(&self, i: usize) -> &Codeword {
        &self.codewords[i]
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.codewords.iter().map(Codeword::len).collect()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn l_max(&self) -> usize {
        self.codewords.iter().map(Codeword::len).max().unwrap_or(0)
    }

    pub fn l_min(&self) -> usize {
        self.codewords.iter().map(Codeword::len).min().unwrap_or(0)
    }

    /// `⌈log2(l_max + 1)⌉`, so every length `1..=l_max` fits.
    pub fn len_reg_width(&self) -> usize {
        register_width(self.l_max())
    }

    /// Index of the codeword equal to `bits`, if any.
    pub fn lookup(&self, bits: &[bool]) -> Option<usize> {
        self.codewords.iter().position(|c| c.bits() == bits)
    }
}

pub fn is_prefix_free(codewords: &[Codeword]) -> bool {
    for (i, a) in codewords.iter().enumerate() {
        for (j, b) in codewords.iter().enumerate() {
            if i != j && a.len() <= b.len() && b.bits()[..a.len()] == *a.bits() {
                return false;
            }
        }
    }
    true
}

enum Node {
    Leaf(usize),
    Internal(usize, usize),
}

/// Builds the Huffman code for `dist` under the `(weight, creation order)` tie-break.
pub fn build_code(dist: &ProbDist) -> HuffmanCode {
    let n = dist.len();
    if n == 1 {
        return HuffmanCode {
            codewords: vec![Codeword(vec![false])],
            avg_len: 1.0,
        };
    }

    let mut nodes: Vec<Node> = (0..n).map(Node::Leaf).collect();
    // (weight, node id); node id doubles as creation order.
    let mut work: Vec<(f64, usize)> = dist.probs().iter().copied().zip(0..n).collect();

    let precedes = |a: (f64, usize), b: (f64, usize)| -> bool {
        if (a.0 - b.0).abs() <= PROB_TOL {
            a.1 < b.1
        } else {
            a.0 < b.0
        }
    };

    while work.len() > 1 {
        let mut first = 0;
        for k in 1..work.len() {
            if precedes(work[k], work[first]) {
                first = k;
            }
        }
        let a = work.swap_remove(first);
        let mut second = 0;
        for k in 1..work.len() {
            if precedes(work[k], work[second]) {
                second = k;
            }
        }
        let b = work.swap_remove(second);
        let (zero, one) = if a.1 < b.1 { (a, b) } else { (b, a) };
        let id = nodes.len();
        nodes.push(Node::Internal(zero.1, one.1));
        work.push((zero.0 + one.0, id));
    }

    let mut codewords = vec![Codeword::default(); n];
    let mut stack = vec![(work[0].1, Vec::new())];
    while let Some((id, prefix)) = stack.pop() {
        match nodes[id] {
            Node::Leaf(sym) => codewords[sym] = Codeword(prefix),
            Node::Internal(zero, one) => {
                let mut z = prefix.clone();
                z.push(false);
                let mut o = prefix;
                o.push(true);
                stack.push((one, o));
                stack.push((zero, z));
            }
        }
    }

    let avg_len = dist
        .probs()
        .iter()
        .zip(&codewords)
        .map(|(p, c)| p * c.len() as f64)
        .sum();
    HuffmanCode { codewords, avg_len }
}

pub fn kraft_sum(code: &HuffmanCode) -> f64 {
    code.codewords
        .iter()
        .map(|c| (-(c.len() as f64)).exp2())
        .sum()
}

pub fn average_length(code: &HuffmanCode, dist: &ProbDist) -> Result<f64> {
    if code.len() != dist.len() {
        return Err(Error::ArityMismatch {
            expected: code.len(),
            got: dist.len(),
        });
    }
    Ok(dist
        .probs()
        .iter()
        .zip(code.codewords())
        .map(|(p, c)| p * c.len() as f64)
        .sum())
}

/// Result of walking a bit stream through the code trie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub symbols: Vec<usize>,
    pub leftover: usize,
}

pub fn decode_prefix(bits: &[bool], code: &HuffmanCode) -> Result<Decoded> {
    let mut symbols = Vec::new();
    let mut start = 0;
    let mut pos = 0;
    while pos < bits.len() {
        pos += 1;
        let window = &bits[start..pos];
        if let Some(sym) = code.lookup(window) {
            symbols.push(sym);
            start = pos;
        } else if !code
            .codewords()
            .iter()
            .any(|c| c.len() > window.len() && c.bits()[..window.len()] == *window)
        {
            return Err(Error::MalformedStream { offset: start });
        }
    }
    Ok(Decoded {
        symbols,
        leftover: bits.len() - start,
    })
}

/// Minimal `Σ p_i l_i` over every length assignment satisfying Kraft, by
/// exhaustive enumeration of non-decreasing length sequences.
pub fn optimal_length_oracle(dist: &ProbDist) -> Result<f64> {
    let n = dist.len();
    if n > ORACLE_MAX_SYMBOLS {
        return Err(Error::OracleTooLarge(n));
    }
    let max_len = n.max(2) - 1;
    let mut sorted = dist.probs().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut best = f64::INFINITY;
    let mut lengths = vec![0usize; n];
    enumerate_lengths(&mut lengths, 0, 1, max_len, &mut |ls| {
        // Exact Kraft check in units of 2^-max_len.
        let kraft: u64 = ls.iter().map(|&l| 1u64 << (max_len - l)).sum();
        if kraft <= 1u64 << max_len {
            let cost: f64 = sorted.iter().zip(ls).map(|(p, &l)| p * l as f64).sum();
            if cost < best {
                best = cost;
            }
        }
    });
    Ok(best)
}

fn enumerate_lengths(
    lengths: &mut [usize],
    k: usize,
    lo: usize,
    hi: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if k == lengths.len() {
        visit(lengths);
        return;
    }
    for l in lo..=hi {
        lengths[k] = l;
        enumerate_lengths(lengths, k + 1, l, hi, visit);
    }
}
