//! Layered symbolic circuits.
//!
//! A network is a list of stages. Each stage holds macro ops on pairwise
//! disjoint qubits and counts as one layer of idealized depth (the model where
//! a permutation or a digit-conditioned rotation is a single step). Strict
//! depth counts primitive layers after expansion, including the CNOT trees
//! that fan a shared control out to ancillas and back.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::bits::BitString;
use super::layout::Span;
use super::ops::{Direction, Gate, MacroOp, Sign};
use super::state::SparseState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DepthReport {
    pub idealized_depth: usize,
    pub strict_depth: usize,
    pub gate_count: usize,
    /// Part of `gate_count` spent on control fan-out trees.
    pub fanout_gates: usize,
}

impl DepthReport {
    /// Gate count of a sequential implementation, where a shared control
    /// needs no copies.
    pub fn sequential_gates(&self) -> usize {
        self.gate_count - self.fanout_gates
    }
}

impl std::ops::Add for DepthReport {
    type Output = DepthReport;

    /// Cost of running two networks one after the other.
    fn add(self, o: DepthReport) -> DepthReport {
        DepthReport {
            idealized_depth: self.idealized_depth + o.idealized_depth,
            strict_depth: self.strict_depth + o.strict_depth,
            gate_count: self.gate_count + o.gate_count,
            fanout_gates: self.fanout_gates + o.fanout_gates,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub label: &'static str,
    pub ops: Vec<MacroOp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateNetwork {
    n_qubits: usize,
    stages: Vec<Stage>,
    ancillas: usize,
    report: DepthReport,
}

impl GateNetwork {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            stages: Vec::new(),
            ancillas: 0,
            report: DepthReport::default(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Size of the zeroed ancilla pool the primitive expansion needs.
    pub fn ancillas(&self) -> usize {
        self.ancillas
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn depth_metrics(&self) -> DepthReport {
        self.report
    }

    /// Adds one parallel stage. Identity ops are dropped; a stage left empty
    /// is not recorded.
    pub fn push_stage(&mut self, label: &'static str, ops: Vec<MacroOp>) -> Result<()> {
        let ops: Vec<MacroOp> = ops.into_iter().filter(|op| !op.is_identity()).collect();
        if ops.is_empty() {
            return Ok(());
        }
        let mut seen = HashSet::new();
        for op in &ops {
            for q in op.qubits() {
                if q >= self.n_qubits {
                    return Err(Error::IndexOutOfRange {
                        index: q,
                        limit: self.n_qubits,
                    });
                }
                if !seen.insert(q) {
                    return Err(Error::SpanMismatch(format!(
                        "qubit {q} used twice in stage {label}"
                    )));
                }
            }
        }
        let mut layers = 0;
        let mut anc = 0;
        for op in &ops {
            let c = op.cost();
            layers = layers.max(c.layers);
            self.report.gate_count += c.gates;
            self.report.fanout_gates += c.fanout_gates;
            anc += op.ancillas_needed();
        }
        self.report.idealized_depth += 1;
        self.report.strict_depth += layers;
        self.ancillas = self.ancillas.max(anc);
        self.stages.push(Stage { label, ops });
        Ok(())
    }

    pub fn emit_swap(&mut self, a: Span, b: Span) -> Result<()> {
        self.push_stage("swap", vec![MacroOp::swap(a, b)?])
    }

    pub fn emit_xor(&mut self, src: Span, dst: Span) -> Result<()> {
        self.push_stage("xor", vec![MacroOp::xor(src, dst)?])
    }

    pub fn emit_rotate(&mut self, target: Span, amount: usize, dir: Direction) -> Result<()> {
        self.push_stage("rotate", vec![MacroOp::rotate(target, amount, dir)])
    }

    pub fn emit_add(&mut self, src: Span, dst: Span, sign: Sign) -> Result<()> {
        self.push_stage("add", vec![MacroOp::add(src, dst, sign)?])
    }

    pub fn emit_rotate_by_register(&mut self, target: Span, control: Span, dir: Direction) -> Result<()> {
        self.emit_rotate_by_register_parallel(&[(target, control)], dir)
    }

    /// Rotates each target by the value of its control register: one stage per
    /// control digit, shifting by `2^i` when bit `i` is set. All pairs share
    /// the stages.
    pub fn emit_rotate_by_register_parallel(&mut self, pairs: &[(Span, Span)], dir: Direction) -> Result<()> {
        for (target, control) in pairs {
            target.check_disjoint(control)?;
        }
        let digits = pairs.iter().map(|(_, c)| c.len).max().unwrap_or(0);
        for i in 0..digits {
            let mut ops = Vec::with_capacity(pairs.len());
            for &(target, control) in pairs {
                if i < control.len {
                    let qubit = control.start + control.len - 1 - i;
                    let amount = if target.len == 0 { 0 } else { pow2_mod(i, target.len) };
                    ops.push(MacroOp::cond_rotate(target, qubit, amount, dir)?);
                }
            }
            self.push_stage("rotate-digit", ops)?;
        }
        Ok(())
    }

    /// Appends all stages of `other`.
    pub fn append(&mut self, other: &GateNetwork) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        for s in &other.stages {
            self.push_stage(s.label, s.ops.clone())?;
        }
        Ok(())
    }

    pub fn inverse(&self) -> GateNetwork {
        let mut inv = GateNetwork::new(self.n_qubits);
        for s in self.stages.iter().rev() {
            inv.push_stage(s.label, s.ops.iter().map(MacroOp::inverse).collect())
                .expect("inverse of a valid stage is valid");
        }
        inv
    }

    /// Macro-level execution.
    pub fn run(&self, state: &SparseState) -> Result<SparseState> {
        let mut out = state.clone();
        self.run_in_place(&mut out)?;
        Ok(out)
    }

    pub fn run_in_place(&self, state: &mut SparseState) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: state.n_qubits(),
            });
        }
        for stage in &self.stages {
            state.permute(|b| {
                for op in &stage.ops {
                    op.apply(b);
                }
            });
        }
        Ok(())
    }

    /// Expands every stage into primitive layers; ancillas follow the layout qubits.
    pub fn primitive_layers(&self) -> Vec<Vec<Gate>> {
        let mut out = Vec::new();
        for stage in &self.stages {
            let mut merged: Vec<Vec<Gate>> = Vec::new();
            let mut next_anc = self.n_qubits;
            for op in &stage.ops {
                for (k, layer) in op.expand(next_anc).into_iter().enumerate() {
                    if merged.len() <= k {
                        merged.resize_with(k + 1, Vec::new);
                    }
                    merged[k].extend(layer);
                }
                next_anc += op.ancillas_needed();
            }
            out.extend(merged);
        }
        out
    }

    /// Gate-level execution of one basis string (layout qubits only). Fails if
    /// an ancilla is left dirty.
    pub fn run_gates(&self, input: &BitString) -> Result<BitString> {
        if input.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: input.len(),
            });
        }
        let mut bits = input.resized(self.n_qubits + self.ancillas);
        for layer in self.primitive_layers() {
            for g in layer {
                g.apply(&mut bits);
            }
        }
        if bits.any_in(self.n_qubits, self.ancillas) {
            return Err(Error::SpanMismatch("ancilla left dirty".into()));
        }
        Ok(bits.resized(self.n_qubits))
    }

    /// Checks that every primitive layer acts on pairwise disjoint qubits.
    pub fn layers_disjoint(&self) -> bool {
        self.primitive_layers().iter().all(|layer| {
            let mut seen = HashSet::new();
            layer.iter().flat_map(Gate::qubits).all(|q| seen.insert(q))
        })
    }

    /// Text netlist, one `LAYER k: GATE targets [@controls]` line per gate.
    pub fn netlist(&self) -> String {
        let mut out = String::new();
        for (k, mut layer) in self.primitive_layers().into_iter().enumerate() {
            layer.sort_by_key(|g| g.qubits());
            for g in layer {
                let _ = writeln!(out, "LAYER {k}: {}", g.netlist());
            }
        }
        out
    }
}

fn pow2_mod(i: usize, m: usize) -> usize {
    let mut r = 1 % m;
    for _ in 0..i {
        r = (r * 2) % m;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_network_is_identity() {
        let net = GateNetwork::new(3);
        let s = SparseState::basis(BitString::parse("101"));
        assert_eq!(net.run(&s).unwrap(), s);
        assert_eq!(net.depth_metrics(), DepthReport::default());
    }

    #[test]
    fn swap_metrics() {
        let mut net = GateNetwork::new(2);
        net.emit_swap(Span::new(0, 1), Span::new(1, 1)).unwrap();
        let r = net.depth_metrics();
        assert_eq!((r.gate_count, r.strict_depth, r.idealized_depth), (3, 3, 1));
    }

    #[test]
    fn two_disjoint_swaps_share_a_stage() {
        let mut net = GateNetwork::new(4);
        net.push_stage(
            "swap",
            vec![
                MacroOp::swap(Span::new(0, 1), Span::new(1, 1)).unwrap(),
                MacroOp::swap(Span::new(2, 1), Span::new(3, 1)).unwrap(),
            ],
        )
        .unwrap();
        let r = net.depth_metrics();
        assert_eq!((r.strict_depth, r.gate_count), (3, 6));
        assert!(net.layers_disjoint());
    }

    #[test]
    fn overlapping_stage_rejected() {
        let mut net = GateNetwork::new(4);
        let err = net.push_stage(
            "bad",
            vec![
                MacroOp::swap(Span::new(0, 1), Span::new(1, 1)).unwrap(),
                MacroOp::swap(Span::new(1, 1), Span::new(2, 1)).unwrap(),
            ],
        );
        assert!(err.is_err());
        assert!(net.emit_swap(Span::new(3, 1), Span::new(4, 1)).is_err());
    }

    #[test]
    fn fixed_rotation_idealized_depth_one() {
        let mut net = GateNetwork::new(4);
        net.emit_rotate(Span::new(0, 4), 1, Direction::Left).unwrap();
        let r = net.depth_metrics();
        assert_eq!(r.idealized_depth, 1);
        assert!(r.strict_depth <= 2);
    }

    #[test]
    fn rotate_by_register_one_stage_per_digit() {
        let mut net = GateNetwork::new(7);
        net.emit_rotate_by_register(Span::new(0, 5), Span::new(5, 2), Direction::Left).unwrap();
        assert_eq!(net.depth_metrics().idealized_depth, 2);
    }

    #[test]
    fn digit_rotation_width_eight() {
        let mut net = GateNetwork::new(9);
        net.push_stage("r", vec![MacroOp::cond_rotate(Span::new(0, 8), 8, 1, Direction::Left).unwrap()]).unwrap();
        let r = net.depth_metrics();
        assert_eq!(r.idealized_depth, 1);
        assert_eq!(r.strict_depth, 3 + 2 + 3);
        assert_eq!(net.ancillas(), 7);
    }

    #[test]
    fn netlist_is_stable() {
        let mut net = GateNetwork::new(2);
        net.emit_swap(Span::new(0, 1), Span::new(1, 1)).unwrap();
        assert_eq!(net.netlist(), "LAYER 0: CNOT 1 @0\nLAYER 1: CNOT 0 @1\nLAYER 2: CNOT 1 @0\n");
    }
}
