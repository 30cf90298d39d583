use std::collections::BTreeMap;

use super::bits::BitString;
use super::layout::Span;
use super::ops::{Direction, MacroOp, Sign};
use crate::error::{Error, Result};
use crate::qmath::C64;

/// Branches with smaller amplitude are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-13;

/// Amplitude-weighted set of classical basis strings.
///
/// Ordered by basis string so iteration (and anything serialized from it) is
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    n_qubits: usize,
    branches: BTreeMap<BitString, C64>,
}

impl SparseState {
    pub fn basis(bits: BitString) -> Self {
        let n_qubits = bits.len();
        let mut branches = BTreeMap::new();
        branches.insert(bits, C64::new(1.0, 0.0));
        Self { n_qubits, branches }
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(BitString::zeros(n_qubits))
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            branches: BTreeMap::new(),
        }
    }

    /// Sums amplitudes of repeated strings and prunes negligible branches.
    pub fn from_branches(n_qubits: usize, items: impl IntoIterator<Item = (BitString, C64)>) -> Result<Self> {
        let mut state = Self::empty(n_qubits);
        for (bits, amp) in items {
            if bits.len() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    got: bits.len(),
                });
            }
            *state.branches.entry(bits).or_insert(C64::new(0.0, 0.0)) += amp;
        }
        state.prune();
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn branches(&self) -> &BTreeMap<BitString, C64> {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn amplitude(&self, bits: &BitString) -> C64 {
        self.branches.get(bits).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.branches.values().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SparseState) -> C64 {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        small
            .branches
            .iter()
            .filter_map(|(k, a)| large.branches.get(k).map(|b| if conj_small { a.conj() * b } else { b.conj() * a }))
            .sum()
    }

    pub fn prune(&mut self) {
        self.branches.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }

    /// Keeps only branches satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(&BitString) -> bool) -> SparseState {
        Self {
            n_qubits: self.n_qubits,
            branches: self
                .branches
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
        }
    }

    /// Applies a bijection on basis strings.
    pub fn permute(&mut self, f: impl Fn(&mut BitString)) {
        let old = std::mem::take(&mut self.branches);
        for (mut k, a) in old {
            f(&mut k);
            *self.branches.entry(k).or_insert(C64::new(0.0, 0.0)) += a;
        }
    }

    fn check_span(&self, s: Span) -> Result<()> {
        if s.end() > self.n_qubits {
            return Err(Error::IndexOutOfRange {
                index: s.end(),
                limit: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply(&mut self, op: &MacroOp) -> Result<()> {
        if let Some(&q) = op.qubits().iter().max() {
            if q >= self.n_qubits {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    limit: self.n_qubits,
                });
            }
        }
        self.permute(|b| op.apply(b));
        Ok(())
    }

    pub fn rotate_register(&mut self, span: Span, amount: usize, dir: Direction) -> Result<()> {
        self.check_span(span)?;
        self.apply(&MacroOp::rotate(span, amount, dir))
    }

    /// Rotates `target` by the unsigned value held in `control` on each branch.
    pub fn rotate_by_register(&mut self, target: Span, control: Span, dir: Direction) -> Result<()> {
        self.check_span(target)?;
        self.check_span(control)?;
        target.check_disjoint(&control)?;
        if control.len > 63 {
            return Err(Error::SpanMismatch("control register wider than 63 bits".into()));
        }
        self.permute(|b| {
            let amount = b.read_uint(control.start, control.len) as usize;
            MacroOp::rotate(target, amount, dir).apply(b);
        });
        Ok(())
    }

    pub fn xor_deposit(&mut self, src: Span, dst: Span) -> Result<()> {
        self.check_span(src)?;
        self.check_span(dst)?;
        self.apply(&MacroOp::xor(src, dst)?)
    }

    pub fn swap_spans(&mut self, a: Span, b: Span) -> Result<()> {
        self.check_span(a)?;
        self.check_span(b)?;
        self.apply(&MacroOp::swap(a, b)?)
    }

    pub fn add_into(&mut self, src: Span, dst: Span, sign: Sign) -> Result<()> {
        self.check_span(src)?;
        self.check_span(dst)?;
        self.apply(&MacroOp::add(src, dst, sign)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_by_zero_register_is_identity() {
        let mut s = SparseState::basis(BitString::parse("10110" /* target 101, control 10 */));
        let before = s.clone();
        let mut t = SparseState::basis(BitString::parse("10100"));
        t.rotate_by_register(Span::new(0, 3), Span::new(3, 2), Direction::Left).unwrap();
        assert_eq!(t, SparseState::basis(BitString::parse("10100")));
        s.rotate_by_register(Span::new(0, 3), Span::new(3, 2), Direction::Left).unwrap();
        assert_ne!(s, before);
    }

    #[test]
    fn rotate_right_by_register_value_two() {
        let mut s = SparseState::basis(BitString::parse("11010010"));
        s.rotate_by_register(Span::new(0, 6), Span::new(6, 2), Direction::Right).unwrap();
        assert_eq!(s.branches().keys().next().unwrap().to_string(), "00110110");
    }

    #[test]
    fn overlapping_spans_rejected() {
        let mut s = SparseState::zero(6);
        assert!(s.rotate_by_register(Span::new(0, 4), Span::new(3, 2), Direction::Left).is_err());
        assert!(s.swap_spans(Span::new(0, 3), Span::new(2, 3)).is_err());
        assert!(s.xor_deposit(Span::new(0, 3), Span::new(4, 3)).is_err());
    }

    #[test]
    fn inner_and_norm() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = SparseState::from_branches(
            2,
            [(BitString::parse("00"), C64::new(h, 0.0)), (BitString::parse("11"), C64::new(0.0, h))],
        )
        .unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((s.inner(&s) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let z = SparseState::zero(2);
        assert!((s.inner(&z) - C64::new(h, 0.0)).norm() < 1e-15);
        assert!((z.inner(&s) - C64::new(h, 0.0)).norm() < 1e-15);
    }
}
