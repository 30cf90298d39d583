//! Session invariants over random ensembles and schedules.

mod common;

use common::{e2, e3, ensemble_strategy};
use proptest::prelude::*;
use qhuff::comm::{run_schedule, CommSession, Party, Schedule};
use qhuff::source::Source;
use qhuff::storage::{storage_run, FidelityMode, DEFAULT_MAX_BRANCHES};

/// Large enough that every truncation length clamps to `m·l_max`.
const AMPLE: f64 = 64.0;

fn schedule_strategy(n: usize) -> impl Strategy<Value = Schedule> {
    (1..=n, 1..=n, prop::option::of(1..=n)).prop_map(|(flush_every, m, after)| Schedule {
        flush_every,
        truncate_at: Some(m),
        truncate_after: after,
        early_send: None,
    })
}

fn session_case() -> impl Strategy<Value = (Option<Source>, Vec<usize>, Schedule)> {
    (ensemble_strategy(), 2usize..=4).prop_flat_map(|(src, n)| {
        (Just(src), prop::collection::vec(0usize..4, n), schedule_strategy(n))
    })
}

fn inputs_for(src: &Source, raw: &[usize]) -> Vec<usize> {
    raw.iter().map(|&j| j % src.ensemble().len()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ample_slack_round_trips((src, raw, sched) in session_case()) {
        let Some(src) = src else { return Ok(()) };
        let inputs = inputs_for(&src, &raw);
        let mut s = CommSession::new(&src, &inputs, AMPLE).unwrap();
        run_schedule(&mut s, &sched).unwrap();
        let f = s.block_fidelity().unwrap();
        prop_assert!((f - 1.0).abs() < 1e-9, "{:?} {:?}: {}", inputs, sched, f);
    }

    #[test]
    fn registers_end_with_the_right_party((src, raw, sched) in session_case()) {
        let Some(src) = src else { return Ok(()) };
        let inputs = inputs_for(&src, &raw);
        let mut s = CommSession::new(&src, &inputs, 0.5).unwrap();
        let t = run_schedule(&mut s, &sched).unwrap();
        let layout = s.layout().clone();
        for q in 0..layout.n_qubits {
            prop_assert_ne!(s.owner(q), Party::InTransit);
        }
        for j in 0..layout.n_signals {
            let want = if j < t.m { Party::Receiver } else { Party::Sender };
            for q in layout.codewords[j].qubits().chain(layout.lengths[j].qubits()) {
                prop_assert_eq!(s.owner(q), want, "signal {} qubit {}", j, q);
            }
        }
        for q in layout.tape.sub(0, t.tape_len.min(layout.tape.len)).qubits() {
            prop_assert_eq!(s.owner(q), Party::Receiver);
        }
    }

    #[test]
    fn arrived_signals_stay_put(src in ensemble_strategy(), raw in prop::collection::vec(0usize..4, 2..=4)) {
        let Some(src) = src else { return Ok(()) };
        let inputs = inputs_for(&src, &raw);
        let mut s = CommSession::new(&src, &inputs, 0.5).unwrap();
        let mut seen: Vec<nalgebra::DMatrix<qhuff::qmath::C64>> = Vec::new();
        let mut received = 0;
        for _ in 0..inputs.len() {
            s.encode_next().unwrap();
            s.flush().unwrap();
            prop_assert_eq!(s.flush().unwrap(), 0);
            prop_assert!(s.received_qubits() >= received);
            received = s.received_qubits();
            for (k, rho) in seen.iter().enumerate() {
                let now = s.signal_density(k).unwrap();
                prop_assert!((now.matrix() - rho).norm() < 1e-9, "signal {} moved", k);
            }
            for k in seen.len()..s.arrived_count() {
                // still tied to the total register, so not necessarily 1
                let f = s.premature_measurement_fidelity(k).unwrap();
                prop_assert!((-1e-12..=1.0 + 1e-9).contains(&f));
                seen.push(s.signal_density(k).unwrap().matrix().clone());
            }
        }
    }

    #[test]
    fn storage_round_trips_with_ample_slack(src in ensemble_strategy(), n in prop::sample::select(vec![1usize, 2])) {
        let Some(src) = src else { return Ok(()) };
        let r = storage_run(&src, n, AMPLE, FidelityMode::Exact, DEFAULT_MAX_BRANCHES).unwrap();
        prop_assert_eq!(r.truncate_len, n * src.code().l_max());
        prop_assert!((r.fidelity - 1.0).abs() < 1e-9);
        prop_assert!(r.tail_weight.abs() < 1e-12);
    }
}

#[test]
fn full_stream_trace_does_not_depend_on_inputs() {
    for src in [e2(), e3()] {
        let mut dry = CommSession::construction_only(&src, 4, 0.5).unwrap();
        run_schedule(&mut dry, &Schedule::default()).unwrap();
        for inputs in [[0, 1, 2, 3], [3, 3, 0, 1]] {
            let mut s = CommSession::new(&src, &inputs, 0.5).unwrap();
            run_schedule(&mut s, &Schedule::default()).unwrap();
            assert_eq!(s.trace_text(), dry.trace_text());
            assert_eq!(s.depth_metrics(), dry.depth_metrics());
        }
    }
}

#[test]
fn stream_larger_block_sampled() {
    let src = e3();
    let r = storage_run(&src, 4, AMPLE, FidelityMode::Sampled { trials: 6, seed: 9 }, DEFAULT_MAX_BRANCHES).unwrap();
    assert!((r.fidelity - 1.0).abs() < 1e-9);
}
