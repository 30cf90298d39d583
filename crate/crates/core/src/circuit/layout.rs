use serde::Serialize;

use crate::error::{Error, Result};
use crate::huffman::{register_width, HuffmanCode};

/// Half-open qubit index range `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub const fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub const fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.len > 0 && other.len > 0 && self.start < other.end() && other.start < self.end()
    }

    pub fn contains(&self, q: usize) -> bool {
        q >= self.start && q < self.end()
    }

    /// Sub-range at `offset` relative to this span.
    pub fn sub(&self, offset: usize, len: usize) -> Span {
        debug_assert!(offset + len <= self.len);
        Span::new(self.start + offset, len)
    }

    pub fn qubits(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }

    pub(crate) fn check_disjoint(&self, other: &Span) -> Result<()> {
        if self.overlaps(other) {
            Err(Error::SpanOverlap(self.start, self.end(), other.start, other.end()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderMode {
    /// Merge tree over `N = 2^r` signals; needs scratch length registers.
    Parallel,
    /// One signal at a time against a running total.
    Sequential,
}

/// Qubit map for an `N`-signal block: codeword registers, length registers,
/// the message tape, the total-length register and (parallel mode only) the
/// internal merge-tree length registers, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterLayout {
    pub n_signals: usize,
    pub code_width: usize,
    pub len_width: usize,
    pub tape_width: usize,
    pub total_len_width: usize,
    pub codewords: Vec<Span>,
    pub lengths: Vec<Span>,
    pub tape: Span,
    pub total: Span,
    /// `tree[j][a]`: length register of merge-tree node `a` at level `j`.
    /// Level 0 aliases the leaf length registers, the root aliases `total`.
    pub tree: Vec<Vec<Span>>,
    pub n_qubits: usize,
}

pub fn make_layout(n_signals: usize, code: &HuffmanCode, mode: EncoderMode) -> Result<RegisterLayout> {
    if n_signals == 0 {
        return Err(Error::InvalidLayout("need at least one signal".into()));
    }
    if mode == EncoderMode::Parallel && !n_signals.is_power_of_two() {
        return Err(Error::InvalidLayout(format!(
            "parallel encoder needs a power-of-two block, got N = {n_signals}"
        )));
    }
    let code_width = code.l_max();
    let len_width = code.len_reg_width();
    let tape_width = n_signals * code_width;
    let total_len_width = register_width(tape_width);

    let mut next = 0;
    let mut alloc = |len: usize| {
        let s = Span::new(next, len);
        next += len;
        s
    };
    let codewords: Vec<Span> = (0..n_signals).map(|_| alloc(code_width)).collect();
    let lengths: Vec<Span> = (0..n_signals).map(|_| alloc(len_width)).collect();
    let tape = alloc(tape_width);
    let total = alloc(total_len_width);

    let mut tree = vec![lengths.clone()];
    if mode == EncoderMode::Parallel {
        let levels = n_signals.trailing_zeros() as usize;
        for j in 1..levels {
            let width = register_width((1 << j) * code_width);
            tree.push((0..n_signals >> j).map(|_| alloc(width)).collect());
        }
        if levels > 0 {
            tree.push(vec![total]);
        }
    }

    Ok(RegisterLayout {
        n_signals,
        code_width,
        len_width,
        tape_width,
        total_len_width,
        codewords,
        lengths,
        tape,
        total,
        tree,
        n_qubits: next,
    })
}

impl RegisterLayout {
    /// Tape segment owned by merge-tree node `a` at level `j`.
    pub fn tree_segment(&self, level: usize, index: usize) -> Span {
        let width = (1 << level) * self.code_width;
        self.tape.sub(index * width, width)
    }

    pub fn levels(&self) -> usize {
        self.tree.len() - 1
    }

    /// Scratch registers (internal merge-tree nodes).
    pub fn scratch(&self) -> impl Iterator<Item = &Span> {
        let top = self.tree.len().saturating_sub(1);
        self.tree
            .iter()
            .enumerate()
            .filter(move |(j, _)| *j > 0 && *j < top)
            .flat_map(|(_, regs)| regs.iter())
    }
}
