//! Tracing out qubits of a branch state.
//!
//! Branches are grouped by the bit pattern on the discarded qubits; each group
//! is a pure (sub-normalized) state and the reduced density operator is the
//! sum of their projectors. When re-embedded for decoding, the discarded
//! qubits are replaced by zeros.

use std::collections::BTreeMap;

use super::bits::BitString;
use super::network::GateNetwork;
use super::state::SparseState;
use crate::error::{Error, Result};
use crate::qmath::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    discarded: Vec<usize>,
    /// One pure component per discarded-bit pattern, discarded qubits zeroed.
    groups: Vec<SparseState>,
}

impl ReducedState {
    pub fn groups(&self) -> &[SparseState] {
        &self.groups
    }

    pub fn discarded(&self) -> &[usize] {
        &self.discarded
    }

    pub fn is_pure(&self) -> bool {
        self.groups.len() <= 1
    }

    pub fn trace(&self) -> f64 {
        self.groups.iter().map(SparseState::norm_sqr).sum()
    }

    /// Applies `net` to every group.
    pub fn map(&self, net: &GateNetwork) -> Result<ReducedState> {
        Ok(ReducedState {
            discarded: self.discarded.clone(),
            groups: self.groups.iter().map(|g| net.run(g)).collect::<Result<_>>()?,
        })
    }
}

pub fn reduce_to_kept(state: &SparseState, kept: &[usize]) -> Result<ReducedState> {
    let n = state.n_qubits();
    let mut is_kept = vec![false; n];
    for &q in kept {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, limit: n });
        }
        is_kept[q] = true;
    }
    let discarded: Vec<usize> = (0..n).filter(|&q| !is_kept[q]).collect();

    let mut groups: BTreeMap<Vec<bool>, Vec<(BitString, C64)>> = BTreeMap::new();
    for (bits, amp) in state.branches() {
        let pattern: Vec<bool> = discarded.iter().map(|&q| bits.get(q)).collect();
        let mut embedded = bits.clone();
        for &q in &discarded {
            embedded.set(q, false);
        }
        groups.entry(pattern).or_default().push((embedded, *amp));
    }
    let groups = groups
        .into_values()
        .map(|items| SparseState::from_branches(n, items))
        .collect::<Result<_>>()?;
    Ok(ReducedState { discarded, groups })
}

/// `Σ_d |⟨reference| decode |ψ_d⟩|²`, decoding each re-embedded group first.
pub fn fidelity_against(reduced: &ReducedState, reference: &SparseState, decode: Option<&GateNetwork>) -> Result<f64> {
    let mut total = 0.0;
    for g in &reduced.groups {
        let out = match decode {
            Some(net) => net.run(g)?,
            None => g.clone(),
        };
        total += reference.inner(&out).norm_sqr();
    }
    Ok(total)
}
