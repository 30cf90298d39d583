//! Block storage: merge-tree encoding, truncation of the message tape and
//! decoding by running the encoder backwards.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::{
    fidelity_against, make_layout, reduce_to_kept, BitString, DepthReport, Direction, EncoderMode,
    GateNetwork, MacroOp, ReducedState, RegisterLayout, Sign, Span, SparseState,
};
use crate::error::{Error, Result};
use crate::qmath::{DensityMatrix, C64};
use crate::source::Source;

/// Default cap on simulated branches per run.
pub const DEFAULT_MAX_BRANCHES: u128 = 1_000_000;

/// A tape region holding content left-aligned, with its length register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub span: Span,
    pub len_reg: Span,
}

/// One pairwise merge: `left` and `right` are adjacent, `parent` receives
/// the combined length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeJob {
    pub left: Segment,
    pub right: Segment,
    pub parent: Span,
}

/// Emits the merge of every job in shared stages:
/// rotate the left segment left by its length (content becomes right-aligned),
/// rotate the joined segment left by the left width and back right by the left
/// length (content now starts at offset 0), then add both lengths into the parent.
pub fn merge_round(net: &mut GateNetwork, jobs: &[MergeJob]) -> Result<()> {
    let mut align = Vec::with_capacity(jobs.len());
    let mut joined = Vec::with_capacity(jobs.len());
    for job in jobs {
        if job.left.span.end() != job.right.span.start {
            return Err(Error::InvalidLayout(format!(
                "segments [{}, {}) and [{}, {}) are not adjacent",
                job.left.span.start,
                job.left.span.end(),
                job.right.span.start,
                job.right.span.end()
            )));
        }
        let whole = Span::new(job.left.span.start, job.left.span.len + job.right.span.len);
        align.push((job.left.span, job.left.len_reg));
        joined.push((whole, job.left.len_reg));
    }
    net.emit_rotate_by_register_parallel(&align, Direction::Left)?;
    net.push_stage(
        "rotate",
        jobs.iter()
            .zip(&joined)
            .map(|(job, (whole, _))| MacroOp::rotate(*whole, job.left.span.len, Direction::Left))
            .collect(),
    )?;
    net.emit_rotate_by_register_parallel(&joined, Direction::Right)?;
    add_stage(net, jobs, |j| j.left.len_reg, Sign::Plus)?;
    add_stage(net, jobs, |j| j.right.len_reg, Sign::Plus)?;
    Ok(())
}

fn add_stage(net: &mut GateNetwork, jobs: &[MergeJob], src: impl Fn(&MergeJob) -> Span, sign: Sign) -> Result<()> {
    let ops = jobs
        .iter()
        .map(|j| MacroOp::add(src(j), j.parent, sign))
        .collect::<Result<Vec<_>>>()?;
    net.push_stage("add", ops)
}

pub fn merge_pair(net: &mut GateNetwork, left: Segment, right: Segment, parent: Span) -> Result<()> {
    merge_round(net, &[MergeJob { left, right, parent }])
}

/// Merge jobs of tree level `level` (merging level-1 children).
fn level_jobs(layout: &RegisterLayout, level: usize) -> Vec<MergeJob> {
    (0..layout.tree[level].len())
        .map(|a| MergeJob {
            left: Segment {
                span: layout.tree_segment(level - 1, 2 * a),
                len_reg: layout.tree[level - 1][2 * a],
            },
            right: Segment {
                span: layout.tree_segment(level - 1, 2 * a + 1),
                len_reg: layout.tree[level - 1][2 * a + 1],
            },
            parent: layout.tree[level][a],
        })
        .collect()
}

/// Merge-tree encoder for `N = 2^r` signals. Ends with the codewords
/// concatenated at the start of the tape, the leaf length registers intact and
/// every internal length register returned to zero.
pub fn build_parallel_encoder(layout: &RegisterLayout) -> Result<GateNetwork> {
    if !layout.n_signals.is_power_of_two() || layout.tree.len() != layout.n_signals.trailing_zeros() as usize + 1 {
        return Err(Error::InvalidLayout("parallel encoder needs a parallel-mode layout".into()));
    }
    let mut net = GateNetwork::new(layout.n_qubits);
    let load = (0..layout.n_signals)
        .map(|k| MacroOp::swap(layout.codewords[k], layout.tree_segment(0, k)))
        .collect::<Result<Vec<_>>>()?;
    net.push_stage("load", load)?;

    for level in 1..=layout.levels() {
        merge_round(&mut net, &level_jobs(layout, level))?;
    }
    for level in (1..=layout.levels()).rev() {
        let jobs = level_jobs(layout, level);
        add_stage(&mut net, &jobs, |j| j.right.len_reg, Sign::Minus)?;
        add_stage(&mut net, &jobs, |j| j.left.len_reg, Sign::Minus)?;
    }
    Ok(net)
}

/// Product state of the chosen signals, each expanded over codeword/length pairs.
pub fn prepare_block(src: &Source, inputs: &[usize], layout: &RegisterLayout) -> Result<SparseState> {
    if inputs.len() != layout.n_signals {
        return Err(Error::ArityMismatch {
            expected: layout.n_signals,
            got: inputs.len(),
        });
    }
    let code = src.code();
    let mut branches = vec![(BitString::zeros(layout.n_qubits), C64::new(1.0, 0.0))];
    for (k, &j) in inputs.iter().enumerate() {
        if j >= src.ensemble().len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                limit: src.ensemble().len(),
            });
        }
        let coeffs = src.coeffs(j);
        let support = src.support(j);
        let mut next = Vec::with_capacity(branches.len() * support.len());
        for (bits, amp) in &branches {
            for &i in &support {
                let mut b = bits.clone();
                let h = code.codeword(i);
                b.write(layout.codewords[k].start, h.bits());
                b.write_uint(layout.lengths[k].start, layout.lengths[k].len, h.len() as u64);
                next.push((b, amp * coeffs[i]));
            }
        }
        branches = next;
    }
    SparseState::from_branches(layout.n_qubits, branches)
}

/// Sum of the leaf length registers of `signals` on one branch.
pub fn content_length(bits: &BitString, layout: &RegisterLayout, signals: std::ops::Range<usize>) -> usize {
    signals
        .map(|k| bits.read_uint(layout.lengths[k].start, layout.lengths[k].len) as usize)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageParams {
    pub n_signals: usize,
    pub delta: f64,
    pub truncate_len: usize,
}

impl StorageParams {
    pub fn new(src: &Source, n_signals: usize, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidLayout(format!("delta must be >= 0, got {delta}")));
        }
        Ok(Self {
            n_signals,
            delta,
            truncate_len: truncation_length(src, n_signals, delta),
        })
    }
}

/// `⌈N(L̄ + δ)⌉`, clamped to the tape width.
pub fn truncation_length(src: &Source, n_signals: usize, delta: f64) -> usize {
    let code = src.code();
    let exact = n_signals as f64 * (code.avg_len() + delta);
    // Absorb rounding noise so that e.g. 2·(1.75 + 0.25) is 4, not 5.
    let t = (exact - 1e-9).ceil().max(0.0) as usize;
    t.min(n_signals * code.l_max())
}

/// Three standard deviations of the per-signal mean codeword length.
pub fn default_delta(src: &Source, n_signals: usize) -> f64 {
    3.0 * (src.length_variance() / n_signals as f64).sqrt()
}

/// The truncated tape plus length registers, as a grouped mixed state.
#[derive(Debug, Clone)]
pub struct StoredBlock {
    pub reduced: ReducedState,
    pub truncate_len: usize,
    /// Weight removed by the typical-subspace projection.
    pub erased_weight: f64,
}

/// Projects onto branches whose content fits in the first `truncate_len`
/// tape qubits and discards the rest of the tape.
pub fn truncate(state: &SparseState, layout: &RegisterLayout, truncate_len: usize) -> Result<StoredBlock> {
    let t = truncate_len.min(layout.tape_width);
    let projected = state.filter(|b| content_length(b, layout, 0..layout.n_signals) <= t);
    let erased_weight = state.norm_sqr() - projected.norm_sqr();
    let cut = Span::new(layout.tape.start + t, layout.tape_width - t);
    let kept: Vec<usize> = (0..layout.n_qubits).filter(|q| !cut.contains(*q)).collect();
    Ok(StoredBlock {
        reduced: reduce_to_kept(&projected, &kept)?,
        truncate_len: t,
        erased_weight,
    })
}

/// Pads the discarded tape with zeros and runs the encoder backwards.
pub fn decode_block(block: &StoredBlock, encoder: &GateNetwork) -> Result<ReducedState> {
    block.reduced.map(&encoder.inverse())
}

/// Reduced density matrix of signal `k` (computational basis) after decoding.
/// Register contents that are not a valid codeword/length pair count as
/// erasures, so the trace can fall below one.
pub fn signal_output(decoded: &ReducedState, layout: &RegisterLayout, src: &Source, k: usize) -> Result<DensityMatrix> {
    if k >= layout.n_signals {
        return Err(Error::IndexOutOfRange {
            index: k,
            limit: layout.n_signals,
        });
    }
    let mut coded = DMatrix::<C64>::zeros(src.n_symbols(), src.n_symbols());
    for group in decoded.groups() {
        let items = group.branches().iter().filter_map(|(bits, amp)| {
            let i = codeword_at(bits, layout.codewords[k], layout.lengths[k], src)?;
            let mut rest = bits.clone();
            rest.write_uint(layout.codewords[k].start, layout.codewords[k].len, 0);
            rest.write_uint(layout.lengths[k].start, layout.lengths[k].len, 0);
            Some((rest, i, *amp))
        });
        accumulate_coherences(&mut coded, items);
    }
    Ok(DensityMatrix::from_raw(to_computational(&coded, src)))
}

/// Adds `Σ_rest |a(i,rest)⟩⟨a(i',rest)|` to `coded`.
pub(crate) fn accumulate_coherences(coded: &mut DMatrix<C64>, items: impl Iterator<Item = (BitString, usize, C64)>) {
    let mut by_rest: std::collections::BTreeMap<BitString, Vec<(usize, C64)>> = Default::default();
    for (rest, i, amp) in items {
        by_rest.entry(rest).or_default().push((i, amp));
    }
    for items in by_rest.values() {
        for &(i, a) in items {
            for &(j, b) in items {
                coded[(i, j)] += a * b.conj();
            }
        }
    }
}

/// Symbol held in a codeword register (left-aligned) plus length register.
pub(crate) fn codeword_at(bits: &BitString, word: Span, len_reg: Span, src: &Source) -> Option<usize> {
    let l = bits.read_uint(len_reg.start, len_reg.len) as usize;
    if l == 0 || l > word.len || bits.any_in(word.start + l, word.len - l) {
        return None;
    }
    src.code().lookup(&bits.slice(word.start, l))
}

pub(crate) fn to_computational(coded: &DMatrix<C64>, src: &Source) -> DMatrix<C64> {
    let d = src.ensemble().dim();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 0..coded.nrows() {
        for j in 0..coded.ncols() {
            let c = coded[(i, j)];
            if c.norm() == 0.0 {
                continue;
            }
            let (pi, pj) = (src.eigenvector(i), src.eigenvector(j));
            for r in 0..d {
                for s in 0..d {
                    m[(r, s)] += c * pi[r] * pj[s].conj();
                }
            }
        }
    }
    m
}

/// Decodes a stored block into per-signal output density matrices.
pub fn decode(block: &StoredBlock, layout: &RegisterLayout, src: &Source, encoder: &GateNetwork) -> Result<Vec<DensityMatrix>> {
    let decoded = decode_block(block, encoder)?;
    (0..layout.n_signals).map(|k| signal_output(&decoded, layout, src, k)).collect()
}

/// Probability that `N` independent codeword lengths sum past `truncate_len`.
pub fn typical_tail_weight(src: &Source, n_signals: usize, truncate_len: usize) -> f64 {
    let dist = src.length_distribution();
    let l_max = src.code().l_max();
    let mut sums = vec![0.0; n_signals * l_max + 1];
    sums[0] = 1.0;
    for _ in 0..n_signals {
        let mut next = vec![0.0; sums.len()];
        for (s, &w) in sums.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(l, p) in &dist {
                next[s + l] += w * p;
            }
        }
        sums = next;
    }
    sums.iter().skip(truncate_len + 1).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FidelityMode {
    /// Enumerate every input sequence with weight `Π q`.
    Exact,
    /// Average over sampled input sequences.
    Sampled { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodecReport {
    pub n_signals: usize,
    pub delta: f64,
    pub truncate_len: usize,
    pub qubits_stored: usize,
    pub fidelity: f64,
    pub fidelity_gap: f64,
    pub tail_weight: f64,
    pub entropy_baseline: f64,
    pub depth: DepthReport,
}

/// Branch work of one exact run: `(Σ_j |support(j)|)^N` over emitted signals.
fn exact_work(src: &Source, n_signals: usize) -> u128 {
    let per: u128 = (0..src.ensemble().len())
        .filter(|&j| src.ensemble().signal(j).prob > 0.0)
        .map(|j| src.support(j).len() as u128)
        .sum();
    per.checked_pow(n_signals as u32).unwrap_or(u128::MAX)
}

fn max_support(src: &Source) -> u128 {
    (0..src.ensemble().len()).map(|j| src.support(j).len() as u128).max().unwrap_or(1)
}

/// Calls `visit(inputs, weight)` for every sequence of emitted signals.
pub(crate) fn for_each_sequence(src: &Source, n_signals: usize, mut visit: impl FnMut(&[usize], f64) -> Result<()>) -> Result<()> {
    let emitted: Vec<usize> = (0..src.ensemble().len())
        .filter(|&j| src.ensemble().signal(j).prob > 0.0)
        .collect();
    let mut digits = vec![0usize; n_signals];
    loop {
        let inputs: Vec<usize> = digits.iter().map(|&d| emitted[d]).collect();
        let weight: f64 = inputs.iter().map(|&j| src.ensemble().signal(j).prob).product();
        visit(&inputs, weight)?;
        let mut k = 0;
        loop {
            if k == n_signals {
                return Ok(());
            }
            digits[k] += 1;
            if digits[k] < emitted.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

pub(crate) fn sample_sequences(src: &Source, n_signals: usize, trials: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let probs: Vec<f64> = src.ensemble().signals().iter().map(|s| s.prob).collect();
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidEnsemble(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..trials)
        .map(|_| (0..n_signals).map(|_| dist.sample(&mut rng)).collect())
        .collect())
}

pub(crate) fn check_budget(src: &Source, n_signals: usize, mode: FidelityMode, max_branches: u128) -> Result<()> {
    let needed = match mode {
        FidelityMode::Exact => exact_work(src, n_signals),
        FidelityMode::Sampled { trials, .. } => {
            (trials as u128).saturating_mul(max_support(src).saturating_pow(n_signals as u32))
        }
    };
    if needed > max_branches {
        return Err(Error::ResourceLimit {
            needed,
            limit: max_branches,
            hint: match mode {
                FidelityMode::Exact => "switch to sampled mode or lower N".into(),
                FidelityMode::Sampled { .. } => "lower the trial count or N".into(),
            },
        });
    }
    Ok(())
}

/// Ensemble-average block fidelity when the tape is cut at `truncate_len`.
pub fn fidelity_at(src: &Source, n_signals: usize, truncate_len: usize, mode: FidelityMode, max_branches: u128) -> Result<f64> {
    let layout = make_layout(n_signals, src.code(), EncoderMode::Parallel)?;
    check_budget(src, n_signals, mode, max_branches)?;
    let encoder = build_parallel_encoder(&layout)?;
    let decoder = encoder.inverse();

    let block_fidelity = |inputs: &[usize]| -> Result<f64> {
        let reference = prepare_block(src, inputs, &layout)?;
        let encoded = encoder.run(&reference)?;
        let block = truncate(&encoded, &layout, truncate_len)?;
        fidelity_against(&block.reduced, &reference, Some(&decoder))
    };

    match mode {
        FidelityMode::Exact => {
            let mut total = 0.0;
            for_each_sequence(src, n_signals, |inputs, w| {
                total += w * block_fidelity(inputs)?;
                Ok(())
            })?;
            Ok(total)
        }
        FidelityMode::Sampled { trials, seed } => {
            let mut total = 0.0;
            for s in &sample_sequences(src, n_signals, trials, seed)? {
                total += block_fidelity(s)?;
            }
            Ok(total / trials.max(1) as f64)
        }
    }
}

/// Runs the full storage pipeline and reports block fidelity against the input.
pub fn storage_run(src: &Source, n_signals: usize, delta: f64, mode: FidelityMode, max_branches: u128) -> Result<CodecReport> {
    let params = StorageParams::new(src, n_signals, delta)?;
    let layout = make_layout(n_signals, src.code(), EncoderMode::Parallel)?;
    let fidelity = fidelity_at(src, n_signals, params.truncate_len, mode, max_branches)?;
    Ok(CodecReport {
        n_signals,
        delta,
        truncate_len: params.truncate_len,
        qubits_stored: params.truncate_len + n_signals * layout.len_width,
        fidelity,
        fidelity_gap: 1.0 - fidelity,
        tail_weight: typical_tail_weight(src, n_signals, params.truncate_len),
        entropy_baseline: n_signals as f64 * src.entropy(),
        depth: build_parallel_encoder(&layout)?.depth_metrics(),
    })
}
