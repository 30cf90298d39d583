//! Macro operations on registers and their primitive-gate expansions.
//!
//! Every macro op permutes computational basis strings, so it acts on a
//! sparse state branch by branch. The expansion into NOT / CNOT / Toffoli /
//! SWAP / Fredkin gates exists to measure circuit cost and to cross-check the
//! macro semantics on small spans.

use serde::Serialize;

use super::bits::BitString;
use super::layout::Span;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Not(usize),
    Cnot { control: usize, target: usize },
    Toffoli { c1: usize, c2: usize, target: usize },
    Swap(usize, usize),
    Cswap { control: usize, a: usize, b: usize },
}

impl Gate {
    pub fn apply(&self, bits: &mut BitString) {
        match *self {
            Gate::Not(q) => bits.flip(q),
            Gate::Cnot { control, target } => {
                if bits.get(control) {
                    bits.flip(target);
                }
            }
            Gate::Toffoli { c1, c2, target } => {
                if bits.get(c1) && bits.get(c2) {
                    bits.flip(target);
                }
            }
            Gate::Swap(a, b) => swap_bits(bits, a, b),
            Gate::Cswap { control, a, b } => {
                if bits.get(control) {
                    swap_bits(bits, a, b);
                }
            }
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Not(q) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Toffoli { c1, c2, target } => vec![c1, c2, target],
            Gate::Swap(a, b) => vec![a, b],
            Gate::Cswap { control, a, b } => vec![control, a, b],
        }
    }

    /// One netlist line body: `NAME targets [@controls]`.
    pub fn netlist(&self) -> String {
        match *self {
            Gate::Not(q) => format!("NOT {q}"),
            Gate::Cnot { control, target } => format!("CNOT {target} @{control}"),
            Gate::Toffoli { c1, c2, target } => format!("TOFFOLI {target} @{c1},{c2}"),
            Gate::Swap(a, b) => format!("SWAP {a} {b}"),
            Gate::Cswap { control, a, b } => format!("CSWAP {a} {b} @{control}"),
        }
    }
}

fn swap_bits(bits: &mut BitString, a: usize, b: usize) {
    let (x, y) = (bits.get(a), bits.get(b));
    bits.set(a, y);
    bits.set(b, x);
}

/// Primitive cost of one macro op.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCost {
    pub layers: usize,
    pub gates: usize,
    /// CNOTs spent copying and uncopying shared controls.
    pub fanout_gates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacroOp {
    /// Exchange two equal-width spans (three CNOT layers per qubit pair).
    Swap { a: Span, b: Span },
    /// `dst ^= src`.
    Xor { src: Span, dst: Span },
    /// Cyclic rotation of `target` by a fixed amount.
    Rotate { target: Span, amount: usize, dir: Direction },
    /// Rotation by a fixed amount, applied only when qubit `control` is set.
    CondRotate { target: Span, control: usize, amount: usize, dir: Direction },
    /// `dst = dst ± src (mod 2^|dst|)`, registers unsigned, most significant bit first.
    Add { src: Span, dst: Span, sign: Sign },
}

impl MacroOp {
    pub fn swap(a: Span, b: Span) -> Result<Self> {
        check_equal(a, b)?;
        a.check_disjoint(&b)?;
        Ok(MacroOp::Swap { a, b })
    }

    pub fn xor(src: Span, dst: Span) -> Result<Self> {
        check_equal(src, dst)?;
        src.check_disjoint(&dst)?;
        Ok(MacroOp::Xor { src, dst })
    }

    pub fn rotate(target: Span, amount: usize, dir: Direction) -> Self {
        MacroOp::Rotate { target, amount, dir }
    }

    pub fn cond_rotate(target: Span, control: usize, amount: usize, dir: Direction) -> Result<Self> {
        target.check_disjoint(&Span::new(control, 1))?;
        Ok(MacroOp::CondRotate { target, control, amount, dir })
    }

    pub fn add(src: Span, dst: Span, sign: Sign) -> Result<Self> {
        src.check_disjoint(&dst)?;
        if src.len > dst.len || dst.len > 63 || src.len == 0 {
            return Err(Error::SpanMismatch(format!(
                "adder needs 0 < |src| = {} <= |dst| = {} <= 63",
                src.len, dst.len
            )));
        }
        Ok(MacroOp::Add { src, dst, sign })
    }

    /// True when the op is the identity on every basis string.
    pub fn is_identity(&self) -> bool {
        match *self {
            MacroOp::Swap { a, .. } => a.len == 0,
            MacroOp::Xor { src, .. } => src.len == 0,
            MacroOp::Rotate { target, .. } | MacroOp::CondRotate { target, .. } => {
                self.left_amount().unwrap_or(0) == 0 || target.len < 2
            }
            MacroOp::Add { .. } => false,
        }
    }

    /// Rotation expressed as a left shift in `0..width`.
    fn left_amount(&self) -> Option<usize> {
        match *self {
            MacroOp::Rotate { target, amount, dir } | MacroOp::CondRotate { target, amount, dir, .. } => {
                if target.len == 0 {
                    return Some(0);
                }
                let k = amount % target.len;
                Some(match dir {
                    Direction::Left => k,
                    Direction::Right => (target.len - k) % target.len,
                })
            }
            _ => None,
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            MacroOp::Swap { .. } | MacroOp::Xor { .. } => *self,
            MacroOp::Rotate { target, amount, dir } => MacroOp::Rotate { target, amount, dir: dir.flip() },
            MacroOp::CondRotate { target, control, amount, dir } => {
                MacroOp::CondRotate { target, control, amount, dir: dir.flip() }
            }
            MacroOp::Add { src, dst, sign } => MacroOp::Add {
                src,
                dst,
                sign: match sign {
                    Sign::Plus => Sign::Minus,
                    Sign::Minus => Sign::Plus,
                },
            },
        }
    }

    /// Every qubit the op reads or writes.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            MacroOp::Swap { a, b } => a.qubits().chain(b.qubits()).collect(),
            MacroOp::Xor { src, dst } | MacroOp::Add { src, dst, .. } => {
                src.qubits().chain(dst.qubits()).collect()
            }
            MacroOp::Rotate { target, .. } => target.qubits().collect(),
            MacroOp::CondRotate { target, control, .. } => {
                std::iter::once(control).chain(target.qubits()).collect()
            }
        }
    }

    /// Qubits whose value the op may change.
    pub fn written(&self) -> Vec<usize> {
        match *self {
            MacroOp::Swap { a, b } => a.qubits().chain(b.qubits()).collect(),
            MacroOp::Xor { dst, .. } | MacroOp::Add { dst, .. } => dst.qubits().collect(),
            MacroOp::Rotate { target, .. } | MacroOp::CondRotate { target, .. } => {
                target.qubits().collect()
            }
        }
    }

    /// Macro semantics on one basis string.
    pub fn apply(&self, bits: &mut BitString) {
        match *self {
            MacroOp::Swap { a, b } => {
                for k in 0..a.len {
                    swap_bits(bits, a.start + k, b.start + k);
                }
            }
            MacroOp::Xor { src, dst } => {
                for k in 0..src.len {
                    if bits.get(src.start + k) {
                        bits.flip(dst.start + k);
                    }
                }
            }
            MacroOp::Rotate { target, .. } => rotate_left(bits, target, self.left_amount().unwrap()),
            MacroOp::CondRotate { target, control, .. } => {
                if bits.get(control) {
                    rotate_left(bits, target, self.left_amount().unwrap());
                }
            }
            MacroOp::Add { src, dst, sign } => {
                let modulus = 1u64 << dst.len;
                let a = bits.read_uint(src.start, src.len);
                let b = bits.read_uint(dst.start, dst.len);
                let r = match sign {
                    Sign::Plus => (b + a) % modulus,
                    Sign::Minus => (b + modulus - a % modulus) % modulus,
                };
                bits.write_uint(dst.start, dst.len, r);
            }
        }
    }

    /// Zeroed ancillas the expansion borrows (and returns clean).
    pub fn ancillas_needed(&self) -> usize {
        if self.is_identity() {
            return 0;
        }
        match *self {
            MacroOp::CondRotate { target, .. } => target.len - 1,
            MacroOp::Add { src, dst, .. } => 1 + dst.len - src.len,
            _ => 0,
        }
    }

    /// Primitive layers; ancillas are numbered from `ancilla`.
    pub fn expand(&self, ancilla: usize) -> Vec<Vec<Gate>> {
        if self.is_identity() {
            return Vec::new();
        }
        match *self {
            MacroOp::Swap { a, b } => {
                let pairs: Vec<(usize, usize)> = a.qubits().zip(b.qubits()).collect();
                let cx = |flip: bool| -> Vec<Gate> {
                    pairs
                        .iter()
                        .map(|&(x, y)| {
                            if flip {
                                Gate::Cnot { control: y, target: x }
                            } else {
                                Gate::Cnot { control: x, target: y }
                            }
                        })
                        .collect()
                };
                vec![cx(false), cx(true), cx(false)]
            }
            MacroOp::Xor { src, dst } => vec![src
                .qubits()
                .zip(dst.qubits())
                .map(|(c, t)| Gate::Cnot { control: c, target: t })
                .collect()],
            MacroOp::Rotate { target, .. } => {
                rotation_swap_layers(target, self.left_amount().unwrap())
                    .into_iter()
                    .map(|layer| layer.into_iter().map(|(a, b)| Gate::Swap(a, b)).collect())
                    .collect()
            }
            MacroOp::CondRotate { target, control, .. } => {
                let swaps = rotation_swap_layers(target, self.left_amount().unwrap());
                let (fanout, holders) = fanout_tree(control, ancilla, target.len);
                let mut layers = fanout.clone();
                for layer in swaps {
                    layers.push(
                        layer
                            .into_iter()
                            .zip(&holders)
                            .map(|((a, b), &c)| Gate::Cswap { control: c, a, b })
                            .collect(),
                    );
                }
                layers.extend(fanout.into_iter().rev());
                layers
            }
            MacroOp::Add { src, dst, sign } => {
                let mut gates = cuccaro_adder(src, dst, ancilla);
                if sign == Sign::Minus {
                    gates.reverse();
                }
                pack_layers(&gates)
            }
        }
    }

    pub fn cost(&self) -> OpCost {
        if self.is_identity() {
            return OpCost::default();
        }
        match *self {
            MacroOp::Swap { a, .. } => OpCost { layers: 3, gates: 3 * a.len, fanout_gates: 0 },
            MacroOp::Xor { src, .. } => OpCost { layers: 1, gates: src.len, fanout_gates: 0 },
            MacroOp::Rotate { target, .. } => {
                let (l1, l2) = rotation_swap_counts(target.len, self.left_amount().unwrap());
                OpCost { layers: (l1 > 0) as usize + (l2 > 0) as usize, gates: l1 + l2, fanout_gates: 0 }
            }
            MacroOp::CondRotate { target, .. } => {
                let (l1, l2) = rotation_swap_counts(target.len, self.left_amount().unwrap());
                let depth = ceil_log2(target.len);
                let fanout = 2 * (target.len - 1);
                OpCost {
                    layers: 2 * depth + (l1 > 0) as usize + (l2 > 0) as usize,
                    gates: fanout + l1 + l2,
                    fanout_gates: fanout,
                }
            }
            MacroOp::Add { .. } => {
                let base = self.qubits().into_iter().max().unwrap_or(0) + 1;
                let layers = self.expand(base);
                OpCost {
                    layers: layers.len(),
                    gates: layers.iter().map(Vec::len).sum(),
                    fanout_gates: 0,
                }
            }
        }
    }
}

fn check_equal(a: Span, b: Span) -> Result<()> {
    if a.len != b.len {
        return Err(Error::SpanMismatch(format!("widths {} and {} differ", a.len, b.len)));
    }
    Ok(())
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// `new[p] = old[(p + k) mod W]` inside `span`.
fn rotate_left(bits: &mut BitString, span: Span, k: usize) {
    if k == 0 || span.len < 2 {
        return;
    }
    let old = bits.slice(span.start, span.len);
    for p in 0..span.len {
        bits.set(span.start + p, old[(p + k) % span.len]);
    }
}

/// Left rotation by `k` as two layers of disjoint transpositions:
/// reverse `[0,k)` and `[k,W)` together, then reverse the whole span.
fn rotation_swap_layers(span: Span, k: usize) -> Vec<Vec<(usize, usize)>> {
    let w = span.len;
    let s = span.start;
    let mut first = Vec::new();
    for i in 0..k / 2 {
        first.push((s + i, s + k - 1 - i));
    }
    for i in 0..(w - k) / 2 {
        first.push((s + k + i, s + w - 1 - i));
    }
    let second: Vec<(usize, usize)> = (0..w / 2).map(|i| (s + i, s + w - 1 - i)).collect();
    [first, second].into_iter().filter(|l| !l.is_empty()).collect()
}

fn rotation_swap_counts(w: usize, k: usize) -> (usize, usize) {
    (k / 2 + (w - k) / 2, w / 2)
}

/// Copies `control` onto `copies - 1` ancillas with a doubling CNOT tree.
/// Returns the tree layers and the list of qubits holding the control value.
fn fanout_tree(control: usize, ancilla: usize, copies: usize) -> (Vec<Vec<Gate>>, Vec<usize>) {
    let mut holders = vec![control];
    let mut layers = Vec::new();
    let mut next = ancilla;
    while holders.len() < copies {
        let mut layer = Vec::new();
        let current = holders.clone();
        for &h in &current {
            if holders.len() == copies {
                break;
            }
            layer.push(Gate::Cnot { control: h, target: next });
            holders.push(next);
            next += 1;
        }
        layers.push(layer);
    }
    (layers, holders)
}

/// Ripple-carry adder (MAJ/UMA ladder) writing `dst + src mod 2^|dst|` into `dst`.
/// Ancilla `ancilla` is the carry-in; the next `|dst| - |src|` zero-extend `src`.
fn cuccaro_adder(src: Span, dst: Span, ancilla: usize) -> Vec<Gate> {
    let n = dst.len;
    let a = |i: usize| {
        if i < src.len {
            src.start + src.len - 1 - i
        } else {
            ancilla + 1 + (i - src.len)
        }
    };
    let b = |i: usize| dst.start + n - 1 - i;
    let carry = ancilla;
    let maj = |x: usize, y: usize, z: usize| {
        [
            Gate::Cnot { control: z, target: y },
            Gate::Cnot { control: z, target: x },
            Gate::Toffoli { c1: x, c2: y, target: z },
        ]
    };
    let uma = |x: usize, y: usize, z: usize| {
        [
            Gate::Toffoli { c1: x, c2: y, target: z },
            Gate::Cnot { control: z, target: x },
            Gate::Cnot { control: x, target: y },
        ]
    };
    let mut gates = Vec::new();
    gates.extend(maj(carry, b(0), a(0)));
    for i in 1..n {
        gates.extend(maj(a(i - 1), b(i), a(i)));
    }
    for i in (1..n).rev() {
        gates.extend(uma(a(i - 1), b(i), a(i)));
    }
    gates.extend(uma(carry, b(0), a(0)));
    gates
}

/// As-soon-as-possible layering of a gate sequence.
fn pack_layers(gates: &[Gate]) -> Vec<Vec<Gate>> {
    use std::collections::HashMap;
    let mut ready: HashMap<usize, usize> = HashMap::new();
    let mut layers: Vec<Vec<Gate>> = Vec::new();
    for g in gates {
        let qs = g.qubits();
        let at = qs.iter().map(|q| ready.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
        if layers.len() <= at {
            layers.resize_with(at + 1, Vec::new);
        }
        layers[at].push(*g);
        for q in qs {
            ready.insert(q, at + 1);
        }
    }
    layers
}
