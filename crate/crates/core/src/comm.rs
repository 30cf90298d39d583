//! Two-party streaming. The sender appends codewords to a tape one signal at
//! a time and hands tape qubits to the receiver once every branch has written
//! them. The receiver may stop the stream after any prefix of signals.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::circuit::{
    make_layout, BitString, DepthReport, Direction, EncoderMode, GateNetwork, MacroOp, RegisterLayout, Sign, Span,
    SparseState,
};
use crate::error::{Error, Result};
use crate::huffman::register_width;
use crate::qmath::{fidelity, DensityMatrix, C64};
use crate::source::Source;
use crate::storage::{
    accumulate_coherences, check_budget, codeword_at, content_length, for_each_sequence, prepare_block,
    sample_sequences, to_computational, truncation_length, FidelityMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Sender,
    Receiver,
    InTransit,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Sender => "sender",
            Party::Receiver => "receiver",
            Party::InTransit => "transit",
        })
    }
}

/// Where the first dropped signal sits when the receiver asks to stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispatch {
    /// Still entirely with the sender in every branch.
    Forward,
    /// Entirely with the receiver in every branch.
    Backward,
    /// Straddles the sent prefix in some branch.
    Middle,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Ledger {
    pub forward_tape: usize,
    pub forward_lengths: usize,
    pub forward_total: usize,
    pub backward_tape: usize,
    pub backward_lengths: usize,
    /// Codeword plus length registers of decoded signals handed back.
    pub backward_signals: usize,
    pub bus_rounds: usize,
}

impl Ledger {
    pub fn forward(&self) -> usize {
        self.forward_tape + self.forward_lengths + self.forward_total
    }

    pub fn backward(&self) -> usize {
        self.backward_tape + self.backward_lengths + self.backward_signals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Tape,
    Lengths,
    Total,
    Signals,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: usize,
    pub actor: Party,
    pub op: &'static str,
    /// Hull `[lo, hi)` of the qubits involved.
    pub span: (usize, usize),
    pub ledger: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, [{}, {}), {})",
            self.step, self.actor, self.op, self.span.0, self.span.1, self.ledger
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub m: usize,
    pub dispatch: Dispatch,
    /// Signals the receiver decodes (`m`, or the larger stopping point of the middle case).
    pub kept: usize,
    /// `⌈m(L̄+δ)⌉`.
    pub truncate_len: usize,
    /// Tape qubits the receiver holds when decoding.
    pub tape_len: usize,
    pub total_width: usize,
    /// Forward qubits sent by the truncation itself.
    pub extra_forward: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub truncation: Truncation,
    pub qubits_total: usize,
    pub ledger: Ledger,
    pub depth: DepthReport,
    pub received_qubits: usize,
}

/// Appends signal `j` to content that starts at tape offset `start`, using
/// `total` (the running length sum) as the shift register.
fn append_step(layout: &RegisterLayout, j: usize, start: usize, total: Span) -> Result<GateNetwork> {
    let l = layout.code_width;
    let mut net = GateNetwork::new(layout.n_qubits);
    net.push_stage("load", vec![MacroOp::swap(layout.codewords[j], layout.tape.sub(j * l, l))?])?;
    let end = j * l;
    if j > 0 && end > start {
        let w1 = end - start;
        let t1 = layout.tape.sub(start, w1);
        let joined = layout.tape.sub(start, w1 + l);
        // right-align the pending content of t1, then slide it next to the new codeword
        net.emit_rotate_by_register(t1, total, Direction::Left)?;
        net.emit_rotate(t1, start % w1, Direction::Right)?;
        net.emit_rotate(joined, w1, Direction::Left)?;
        net.emit_rotate_by_register(joined, total, Direction::Right)?;
        net.emit_rotate(joined, start % (w1 + l), Direction::Left)?;
    }
    net.emit_add(layout.lengths[j], total, Sign::Plus)?;
    Ok(net)
}

#[derive(Debug, Clone)]
pub struct CommSession {
    src: Source,
    layout: RegisterLayout,
    delta: f64,
    inputs: Vec<usize>,
    state: Option<SparseState>,
    reference: Option<SparseState>,
    owner: Vec<Party>,
    encoded: usize,
    sent: usize,
    lengths_sent: usize,
    ledger: Ledger,
    outcome: Option<Truncation>,
    decoded: bool,
    sender_net: GateNetwork,
    receiver_net: GateNetwork,
    trace: Vec<TraceRecord>,
}

impl CommSession {
    /// Session over the given input signals, simulated branchwise.
    pub fn new(src: &Source, inputs: &[usize], delta: f64) -> Result<Self> {
        let layout = make_layout(inputs.len(), src.code(), EncoderMode::Sequential)?;
        let state = prepare_block(src, inputs, &layout)?;
        Self::build(src, layout, delta, inputs.to_vec(), Some(state))
    }

    /// Session that only emits networks; dispatch uses the length bounds.
    pub fn construction_only(src: &Source, n_signals: usize, delta: f64) -> Result<Self> {
        let layout = make_layout(n_signals, src.code(), EncoderMode::Sequential)?;
        Self::build(src, layout, delta, Vec::new(), None)
    }

    fn build(src: &Source, layout: RegisterLayout, delta: f64, inputs: Vec<usize>, state: Option<SparseState>) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidLayout(format!("delta must be >= 0, got {delta}")));
        }
        let n = layout.n_qubits;
        Ok(Self {
            src: src.clone(),
            delta,
            inputs,
            reference: state.clone(),
            state,
            owner: vec![Party::Sender; n],
            encoded: 0,
            sent: 0,
            lengths_sent: 0,
            ledger: Ledger::default(),
            outcome: None,
            decoded: false,
            sender_net: GateNetwork::new(n),
            receiver_net: GateNetwork::new(n),
            trace: Vec::new(),
            layout,
        })
    }

    pub fn n_signals(&self) -> usize {
        self.layout.n_signals
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn signals_encoded(&self) -> usize {
        self.encoded
    }

    /// Tape qubits held by the receiver.
    pub fn received_qubits(&self) -> usize {
        self.sent
    }

    pub fn ledger(&self) -> Ledger {
        self.ledger
    }

    pub fn owner(&self, qubit: usize) -> Party {
        self.owner[qubit]
    }

    pub fn state(&self) -> Option<&SparseState> {
        self.state.as_ref()
    }

    pub fn outcome(&self) -> Option<Truncation> {
        self.outcome
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|r| format!("{r}\n")).collect()
    }

    /// Combined cost of everything both parties emitted.
    pub fn depth_metrics(&self) -> DepthReport {
        self.sender_net.depth_metrics() + self.receiver_net.depth_metrics()
    }

    pub fn sender_network(&self) -> &GateNetwork {
        &self.sender_net
    }

    pub fn receiver_network(&self) -> &GateNetwork {
        &self.receiver_net
    }

    fn record(&mut self, actor: Party, op: &'static str, span: (usize, usize), ledger: String) {
        self.trace.push(TraceRecord {
            step: self.trace.len(),
            actor,
            op,
            span,
            ledger,
        });
    }

    /// Applies `net` on behalf of `actor`, refusing any op that touches a
    /// qubit the actor does not hold.
    fn run(&mut self, actor: Party, op: &'static str, net: &GateNetwork) -> Result<()> {
        let (mut lo, mut hi) = (usize::MAX, 0);
        for stage in net.stages() {
            for mop in &stage.ops {
                for q in mop.qubits() {
                    if self.owner[q] != actor {
                        return Err(Error::Ownership(format!(
                            "{actor} {op} touches qubit {q} held by {}",
                            self.owner[q]
                        )));
                    }
                    lo = lo.min(q);
                    hi = hi.max(q + 1);
                }
            }
        }
        if let Some(state) = &mut self.state {
            net.run_in_place(state)?;
        }
        match actor {
            Party::Sender => self.sender_net.append(net)?,
            _ => self.receiver_net.append(net)?,
        }
        if lo < hi {
            self.record(actor, op, (lo, hi), "-".into());
        }
        Ok(())
    }

    fn transfer(&mut self, span: Span, from: Party, to: Party, what: Channel) -> Result<()> {
        if span.len == 0 {
            return Ok(());
        }
        for q in span.qubits() {
            if self.owner[q] != from {
                return Err(Error::Ownership(format!(
                    "{from} cannot send qubit {q} held by {}",
                    self.owner[q]
                )));
            }
            self.owner[q] = Party::InTransit;
        }
        for q in span.qubits() {
            self.owner[q] = to;
        }
        let forward = from == Party::Sender;
        let l = &mut self.ledger;
        let (counter, name) = match (what, forward) {
            (Channel::Tape, true) => (&mut l.forward_tape, "send-tape"),
            (Channel::Lengths, true) => (&mut l.forward_lengths, "send-lengths"),
            (Channel::Total, true) => (&mut l.forward_total, "send-total"),
            (Channel::Tape, false) => (&mut l.backward_tape, "return-tape"),
            (Channel::Lengths, false) => (&mut l.backward_lengths, "return-lengths"),
            (Channel::Signals, _) | (Channel::Total, false) => (&mut l.backward_signals, "return-signal"),
        };
        *counter += span.len;
        let delta = format!("{}+{}", if forward { "fwd" } else { "bwd" }, span.len);
        self.record(from, name, (span.start, span.end()), delta);
        Ok(())
    }

    /// Relabels qubits known to be zero; no quantum data moves.
    fn hand_over(&mut self, span: Span, from: Party, to: Party, op: &'static str) -> Result<()> {
        if span.len == 0 {
            return Ok(());
        }
        for q in span.qubits() {
            if self.owner[q] != from {
                return Err(Error::Ownership(format!("{from} cannot release qubit {q}")));
            }
            self.owner[q] = to;
        }
        self.record(from, op, (span.start, span.end()), "-".into());
        Ok(())
    }

    pub fn encode_next(&mut self) -> Result<()> {
        if self.outcome.is_some() {
            return Err(Error::Session("session already finalized".into()));
        }
        if self.encoded == self.n_signals() {
            return Err(Error::Session("every signal is already encoded".into()));
        }
        let net = append_step(&self.layout, self.encoded, self.sent, self.layout.total)?;
        self.run(Party::Sender, "encode", &net)?;
        self.encoded += 1;
        Ok(())
    }

    /// Unsent tape qubits that every branch has already written.
    pub fn safe_prefix(&self) -> usize {
        (self.encoded * self.src.code().l_min()).saturating_sub(self.sent)
    }

    /// Sends the safe prefix, plus the length registers of signals whose
    /// tape segment lies inside the sent prefix in every branch.
    pub fn flush(&mut self) -> Result<usize> {
        if self.outcome.is_some() {
            return Ok(0);
        }
        self.send_prefix(self.encoded * self.src.code().l_min())
    }

    /// Sends up to `⌊r(L̄ − eps)⌋` tape qubits, which may include qubits some
    /// branches have not written yet. Later appends in those branches are
    /// scrambled; the cost shows up as lost fidelity.
    pub fn flush_early(&mut self, eps: f64) -> Result<usize> {
        if self.outcome.is_some() {
            return Ok(0);
        }
        let code = self.src.code();
        let target = (self.encoded as f64 * (code.avg_len() - eps)).floor().max(0.0) as usize;
        let target = target.min(self.encoded * code.l_max());
        self.send_prefix(target.max(self.encoded * code.l_min()))
    }

    fn send_prefix(&mut self, target: usize) -> Result<usize> {
        if target <= self.sent {
            return Ok(0);
        }
        let span = self.layout.tape.sub(self.sent, target - self.sent);
        self.transfer(span, Party::Sender, Party::Receiver, Channel::Tape)?;
        self.sent = target;
        let done = (target / self.layout.code_width).min(self.encoded);
        for j in self.lengths_sent..done {
            self.transfer(self.layout.lengths[j], Party::Sender, Party::Receiver, Channel::Lengths)?;
        }
        self.lengths_sent = self.lengths_sent.max(done);
        Ok(span.len)
    }

    /// Signals whose whole segment has certainly arrived.
    pub fn arrived_count(&self) -> usize {
        self.sent / self.layout.code_width
    }

    /// Range of the content length of signals `0..j` over all branches.
    fn prefix_range(&self, j: usize) -> (usize, usize) {
        let code = self.src.code();
        match &self.state {
            Some(s) if !s.is_empty() => s.branches().keys().fold((usize::MAX, 0), |(lo, hi), b| {
                let e = content_length(b, &self.layout, 0..j);
                (lo.min(e), hi.max(e))
            }),
            Some(_) => (0, 0),
            None => (j * code.l_min(), j * code.l_max()),
        }
    }

    /// Stops the stream after `m` signals and leaves the receiver holding
    /// everything needed to decode them; no sender register stays correlated
    /// with them. A second call is a no-op.
    pub fn truncate_session(&mut self, m: usize) -> Result<Truncation> {
        if let Some(t) = self.outcome {
            return Ok(t);
        }
        let n = self.n_signals();
        check_stop(m, n)?;
        let l_max = self.layout.code_width;
        let t_m = truncation_length(&self.src, m, self.delta);
        let before = self.ledger.forward();
        let (lo, hi) = self.prefix_range(m);

        let (dispatch, kept, tape_len) = if lo >= self.sent {
            (Dispatch::Forward, m, t_m)
        } else if hi <= self.sent {
            self.return_tape(lo, m)?;
            (Dispatch::Backward, m, t_m)
        } else {
            let later = (m + 1..=n)
                .find(|&j| self.prefix_range(j).0 >= self.sent)
                .ok_or_else(|| Error::Session("no stopping point lies beyond the sent prefix".into()))?;
            (Dispatch::Middle, later, (t_m + (later - m) * l_max).min(later * l_max))
        };
        self.finish_forward(kept, tape_len, m, t_m)?;

        let t = Truncation {
            m,
            dispatch,
            kept,
            truncate_len: t_m,
            tape_len: tape_len.max(self.sent.min(kept * l_max)),
            total_width: register_width(kept * l_max),
            extra_forward: self.ledger.forward() - before,
        };
        self.outcome = Some(t);
        Ok(t)
    }

    /// Runs the whole stream: encode and send everything.
    pub fn finish(&mut self) -> Result<Truncation> {
        self.truncate_session(self.n_signals())
    }

    /// Receiver hands back `[lo, sent)` over an `l_max`-wide bus, plus the
    /// length registers of dropped signals.
    fn return_tape(&mut self, lo: usize, m: usize) -> Result<()> {
        let width = self.layout.code_width;
        let mut hi = self.sent;
        while hi > lo {
            let w = (hi - lo).min(width);
            self.transfer(self.layout.tape.sub(hi - w, w), Party::Receiver, Party::Sender, Channel::Tape)?;
            self.ledger.bus_rounds += 1;
            hi -= w;
        }
        self.sent = lo;
        for j in m..self.lengths_sent {
            self.transfer(self.layout.lengths[j], Party::Receiver, Party::Sender, Channel::Lengths)?;
        }
        self.lengths_sent = self.lengths_sent.min(m);
        Ok(())
    }

    fn finish_forward(&mut self, kept: usize, tape_len: usize, m: usize, t_m: usize) -> Result<()> {
        while self.encoded < kept {
            self.encode_next()?;
        }
        for j in (kept..self.encoded).rev() {
            let net = append_step(&self.layout, j, self.sent, self.layout.total)?.inverse();
            self.run(Party::Sender, "unmerge", &net)?;
        }
        self.encoded = kept;

        let l_max = self.layout.code_width;
        let tape = self.layout.tape;
        let keep_end = tape_len.max(self.sent);
        let pad = tape.sub(keep_end.min(kept * l_max), (kept * l_max).saturating_sub(keep_end));
        if let Some(state) = &mut self.state {
            // Typical projection, then the discarded tape is empty in every surviving branch.
            let layout = &self.layout;
            *state = state.filter(|b| content_length(b, layout, 0..m) <= t_m && !b.any_in(pad.start, pad.len));
        }
        self.record(Party::Sender, "project", (tape.start, tape.end()), "-".into());

        if tape_len > self.sent {
            self.transfer(tape.sub(self.sent, tape_len - self.sent), Party::Sender, Party::Receiver, Channel::Tape)?;
            self.sent = tape_len;
        }
        for j in self.lengths_sent..kept {
            self.transfer(self.layout.lengths[j], Party::Sender, Party::Receiver, Channel::Lengths)?;
        }
        self.lengths_sent = self.lengths_sent.max(kept);
        let w = register_width(kept * l_max);
        let total = self.layout.total;
        self.transfer(total.sub(total.len - w, w), Party::Sender, Party::Receiver, Channel::Total)?;

        self.hand_over(pad, Party::Sender, Party::Receiver, "pad")?;
        for j in 0..kept {
            self.hand_over(self.layout.codewords[j], Party::Sender, Party::Receiver, "release")?;
        }
        Ok(())
    }

    /// Receiver undoes the appends of the kept signals, clearing the total,
    /// and in the middle case returns the extra signals to the sender.
    pub fn receiver_decode(&mut self) -> Result<()> {
        let t = self
            .outcome
            .ok_or_else(|| Error::Session("decode needs a finalized session".into()))?;
        if self.decoded {
            return Ok(());
        }
        let total = self.layout.total.sub(self.layout.total.len - t.total_width, t.total_width);
        for j in (0..t.kept).rev() {
            let net = append_step(&self.layout, j, 0, total)?.inverse();
            self.run(Party::Receiver, "decode", &net)?;
        }
        for j in t.m..t.kept {
            self.transfer(self.layout.codewords[j], Party::Receiver, Party::Sender, Channel::Signals)?;
            self.transfer(self.layout.lengths[j], Party::Receiver, Party::Sender, Channel::Signals)?;
        }
        self.decoded = true;
        Ok(())
    }

    fn simulated(&self) -> Result<&SparseState> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::Session("construction-only session has no state".into()))
    }

    /// `|⟨input|ψ⟩|²` after decoding: every signal back in its registers.
    pub fn block_fidelity(&self) -> Result<f64> {
        if !self.decoded {
            return Err(Error::Session("block fidelity needs a decoded session".into()));
        }
        let state = self.simulated()?;
        let reference = self.reference.as_ref().expect("simulated sessions keep the input");
        Ok(reference.inner(state).norm_sqr())
    }

    /// Density matrix of signal `k` with everything else traced out. Before
    /// decoding the signal is read off the tape, located by the length
    /// registers.
    pub fn signal_density(&self, k: usize) -> Result<DensityMatrix> {
        let state = self.simulated()?;
        if k >= self.n_signals() {
            return Err(Error::IndexOutOfRange { index: k, limit: self.n_signals() });
        }
        let kept = self.outcome.map(|t| t.kept).unwrap_or(0);
        let from_registers = self.decoded && k < kept;
        if !from_registers && k >= self.arrived_count() && !(self.outcome.is_some() && k < kept) {
            return Err(Error::Session(format!("signal {k} has not arrived")));
        }
        let layout = &self.layout;
        let src = &self.src;
        let n = src.n_symbols();
        let mut coded = DMatrix::<C64>::zeros(n, n);
        let items = state.branches().iter().filter_map(|(bits, amp)| {
            let (i, rest) = if from_registers {
                let i = codeword_at(bits, layout.codewords[k], layout.lengths[k], src)?;
                let mut rest = bits.clone();
                rest.write_uint(layout.codewords[k].start, layout.codewords[k].len, 0);
                rest.write_uint(layout.lengths[k].start, layout.lengths[k].len, 0);
                (i, rest)
            } else {
                tape_symbol(bits, layout, src, k)?
            };
            Some((rest, i, *amp))
        });
        accumulate_coherences(&mut coded, items);
        Ok(DensityMatrix::from_raw(to_computational(&coded, src)))
    }

    /// Fidelity the receiver would get by measuring signal `k` now.
    pub fn premature_measurement_fidelity(&self, k: usize) -> Result<f64> {
        let rho = self.signal_density(k)?;
        fidelity(&self.src.ensemble().signal(self.inputs[k]).amplitudes, &rho)
    }

    pub fn comm_report(&self) -> Result<SessionReport> {
        let t = self
            .outcome
            .ok_or_else(|| Error::Session("report needs a finalized session".into()))?;
        Ok(SessionReport {
            truncation: t,
            qubits_total: comm_qubits(&self.src, t.m, t.truncate_len),
            ledger: self.ledger,
            depth: self.depth_metrics(),
            received_qubits: self.sent,
        })
    }
}

fn check_stop(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::Session(format!("truncation point {m} must lie in 1..={n}")));
    }
    Ok(())
}

/// `T + m·w_l + ⌈log2(m·l_max + 1)⌉`.
pub fn comm_qubits(src: &Source, m: usize, truncate_len: usize) -> usize {
    let code = src.code();
    truncate_len + m * code.len_reg_width() + register_width(m * code.l_max())
}

/// Signal `k` read from the tape, and the branch with it cut out.
fn tape_symbol(bits: &BitString, layout: &RegisterLayout, src: &Source, k: usize) -> Option<(usize, BitString)> {
    let tape = layout.tape;
    let start = content_length(bits, layout, 0..k);
    let l = bits.read_uint(layout.lengths[k].start, layout.lengths[k].len) as usize;
    if l == 0 || start + l > tape.len {
        return None;
    }
    let i = src.code().lookup(&bits.slice(tape.start + start, l))?;
    let mut rest = bits.clone();
    let tail = bits.slice(tape.start + start + l, tape.len - start - l);
    rest.write(tape.start + start, &tail);
    rest.write(tape.end() - l, &vec![false; l]);
    rest.write_uint(layout.lengths[k].start, layout.lengths[k].len, 0);
    Some((i, rest))
}

/// When flushes and the stop request happen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub flush_every: usize,
    /// Keep this many signals; `None` runs the whole stream.
    pub truncate_at: Option<usize>,
    /// Signals encoded before the stop request arrives; `None` means all.
    pub truncate_after: Option<usize>,
    /// Use `flush_early` with this margin instead of the safe flush.
    pub early_send: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            flush_every: 1,
            truncate_at: None,
            truncate_after: None,
            early_send: None,
        }
    }
}

pub fn run_schedule(session: &mut CommSession, sched: &Schedule) -> Result<Truncation> {
    if sched.flush_every == 0 {
        return Err(Error::Session("flush interval must be at least 1".into()));
    }
    let n = session.n_signals();
    let stop = sched.truncate_after.unwrap_or(n).min(n);
    for r in 0..stop {
        session.encode_next()?;
        if (r + 1) % sched.flush_every == 0 {
            match sched.early_send {
                Some(eps) => session.flush_early(eps)?,
                None => session.flush()?,
            };
        }
    }
    let t = session.truncate_session(sched.truncate_at.unwrap_or(n))?;
    session.receiver_decode()?;
    Ok(t)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DispatchWeights {
    pub forward: f64,
    pub backward: f64,
    pub middle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommReport {
    pub n_signals: usize,
    pub delta: f64,
    pub truncate_at: usize,
    pub truncate_len: usize,
    pub total_len_width: usize,
    pub qubits_total: usize,
    pub fidelity: f64,
    pub fidelity_gap: f64,
    pub entropy_baseline: f64,
    /// Cost of the networks emitted by a construction-only run of the schedule.
    pub depth: DepthReport,
    pub mean_forward_qubits: f64,
    pub mean_backward_qubits: f64,
    pub mean_extra_forward: f64,
    pub mean_bus_rounds: f64,
    pub dispatch: DispatchWeights,
}

/// Runs the schedule over input sequences and averages block fidelity and ledgers.
pub fn comm_run(src: &Source, n_signals: usize, delta: f64, sched: &Schedule, mode: FidelityMode, max_branches: u128) -> Result<CommReport> {
    let m = sched.truncate_at.unwrap_or(n_signals);
    check_stop(m, n_signals)?;
    let mut dry = CommSession::construction_only(src, n_signals, delta)?;
    run_schedule(&mut dry, sched)?;
    check_budget(src, n_signals, mode, max_branches)?;

    let mut acc = Accum::default();
    let mut one = |inputs: &[usize], w: f64| -> Result<()> {
        let mut s = CommSession::new(src, inputs, delta)?;
        let t = run_schedule(&mut s, sched)?;
        acc.add(w, s.block_fidelity()?, &s.ledger(), &t);
        Ok(())
    };
    match mode {
        FidelityMode::Exact => for_each_sequence(src, n_signals, &mut one)?,
        FidelityMode::Sampled { trials, seed } => {
            let w = 1.0 / trials.max(1) as f64;
            for seq in sample_sequences(src, n_signals, trials, seed)? {
                one(&seq, w)?;
            }
        }
    }

    let truncate_len = truncation_length(src, m, delta);
    Ok(CommReport {
        n_signals,
        delta,
        truncate_at: m,
        truncate_len,
        total_len_width: register_width(m * src.code().l_max()),
        qubits_total: comm_qubits(src, m, truncate_len),
        fidelity: acc.fidelity,
        fidelity_gap: 1.0 - acc.fidelity,
        entropy_baseline: m as f64 * src.entropy(),
        depth: dry.depth_metrics(),
        mean_forward_qubits: acc.forward,
        mean_backward_qubits: acc.backward,
        mean_extra_forward: acc.extra,
        mean_bus_rounds: acc.bus,
        dispatch: acc.dispatch,
    })
}

#[derive(Default)]
struct Accum {
    fidelity: f64,
    forward: f64,
    backward: f64,
    extra: f64,
    bus: f64,
    dispatch: DispatchWeights,
}

impl Accum {
    fn add(&mut self, w: f64, f: f64, l: &Ledger, t: &Truncation) {
        self.fidelity += w * f;
        self.forward += w * l.forward() as f64;
        self.backward += w * l.backward() as f64;
        self.extra += w * t.extra_forward as f64;
        self.bus += w * l.bus_rounds as f64;
        match t.dispatch {
            Dispatch::Forward => self.dispatch.forward += w,
            Dispatch::Backward => self.dispatch.backward += w,
            Dispatch::Middle => self.dispatch.middle += w,
        }
    }
}
