#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use qhuff::qmath::{Ensemble, Signal, C64};
use qhuff::source::Source;

pub const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn real(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// {|0⟩, |+⟩} with equal weights.
pub fn e1() -> Source {
    Source::new(
        Ensemble::new(
            2,
            vec![
                Signal { amplitudes: real(&[1.0, 0.0]), prob: 0.5 },
                Signal { amplitudes: real(&[H, H]), prob: 0.5 },
            ],
        )
        .unwrap(),
    )
    .unwrap()
}

/// Classical dyadic source, codes 0 / 10 / 110 / 111.
pub fn e2() -> Source {
    Source::new(Ensemble::classical(&[0.5, 0.25, 0.125, 0.125]).unwrap()).unwrap()
}

/// Signal 0 is an equal superposition of eigenvectors with codes "0" and "10".
pub fn e3() -> Source {
    Source::new(
        Ensemble::new(
            4,
            vec![
                Signal { amplitudes: real(&[H, H, 0.0, 0.0]), prob: 0.25 },
                Signal { amplitudes: real(&[H, -H, 0.0, 0.0]), prob: 0.25 },
                Signal { amplitudes: real(&[1.0, 0.0, 0.0, 0.0]), prob: 0.25 },
                Signal { amplitudes: real(&[0.0, 0.0, 1.0, 0.0]), prob: 0.25 },
            ],
        )
        .unwrap(),
    )
    .unwrap()
}

pub fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Block fidelity of one input sequence, computed without any circuit:
/// expand the product state over codeword configurations, project onto
/// `Σ l ≤ T`, write the concatenated tape as a string, trace out tape
/// positions `≥ T` as a dense density matrix, pad with zeros, parse the
/// string back with the length values and overlap with the input.
pub fn dense_block_fidelity(src: &Source, inputs: &[usize], t: usize) -> f64 {
    let code = src.code();
    let width = inputs.len() * code.l_max();

    let mut configs: Vec<(Vec<usize>, C64)> = vec![(Vec::new(), C64::new(1.0, 0.0))];
    for &j in inputs {
        let c = src.coeffs(j);
        let mut next = Vec::new();
        for (cfg, a) in &configs {
            for (i, ci) in c.iter().enumerate() {
                if ci.norm() > 1e-12 {
                    let mut cfg = cfg.clone();
                    cfg.push(i);
                    next.push((cfg, a * ci));
                }
            }
        }
        configs = next;
    }
    let index: BTreeMap<Vec<usize>, usize> = configs.iter().enumerate().map(|(k, (c, _))| (c.clone(), k)).collect();
    let psi = DVector::from_iterator(configs.len(), configs.iter().map(|(_, a)| *a));

    // kept part: (lengths, tape[..t]); discarded: tape[t..]
    let mut by_tail: BTreeMap<Vec<bool>, Vec<(Vec<usize>, Vec<bool>, C64)>> = BTreeMap::new();
    for (cfg, a) in &configs {
        let lengths: Vec<usize> = cfg.iter().map(|&i| code.codeword(i).len()).collect();
        if lengths.iter().sum::<usize>() > t {
            continue;
        }
        let mut tape: Vec<bool> = cfg.iter().flat_map(|&i| code.codeword(i).bits().to_vec()).collect();
        tape.resize(width, false);
        let tail = tape.split_off(t.min(width));
        by_tail.entry(tail).or_default().push((lengths, tape, *a));
    }

    let n = configs.len();
    let mut rho = DMatrix::<C64>::zeros(n, n);
    for items in by_tail.values() {
        let mut v = DVector::<C64>::zeros(n);
        for (lengths, kept, a) in items {
            let mut tape = kept.clone();
            tape.resize(width, false);
            if let Some(k) = parse(&tape, lengths, src).and_then(|cfg| index.get(&cfg).copied()) {
                v[k] += *a;
            }
        }
        rho += &v * v.adjoint();
    }
    (psi.adjoint() * rho * &psi)[(0, 0)].re
}

fn parse(tape: &[bool], lengths: &[usize], src: &Source) -> Option<Vec<usize>> {
    let mut pos = 0;
    let mut out = Vec::new();
    for &l in lengths {
        out.push(src.code().lookup(tape.get(pos..pos + l)?)?);
        pos += l;
    }
    Some(out)
}

/// `Σ_seq Π q · dense_block_fidelity`.
pub fn dense_average_fidelity(src: &Source, n: usize, t: usize) -> f64 {
    let emitted: Vec<usize> = (0..src.ensemble().len()).filter(|&j| src.ensemble().signal(j).prob > 0.0).collect();
    let mut total = 0.0;
    let mut digits = vec![0usize; n];
    loop {
        let inputs: Vec<usize> = digits.iter().map(|&d| emitted[d]).collect();
        let w: f64 = inputs.iter().map(|&j| src.ensemble().signal(j).prob).product();
        total += w * dense_block_fidelity(src, &inputs, t);
        let mut k = 0;
        loop {
            if k == n {
                return total;
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

/// Ensemble from raw amplitude pairs and weights, both normalized here.
/// `None` when a vector or the weights are too small to normalize.
pub fn source_from(dim: usize, amps: &[Vec<(f64, f64)>], weights: &[f64]) -> Option<Source> {
    let wsum: f64 = weights.iter().sum();
    if wsum < 1e-3 {
        return None;
    }
    let mut signals = Vec::new();
    for (a, &w) in amps.iter().zip(weights) {
        let v: Vec<C64> = a.iter().take(dim).map(|&(re, im)| C64::new(re, im)).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-3 {
            return None;
        }
        signals.push(Signal {
            amplitudes: v.iter().map(|c| c / norm).collect(),
            prob: w / wsum,
        });
    }
    Source::new(Ensemble::new(dim, signals).ok()?).ok()
}

/// Up to four signals in dimension 2..=4 with complex amplitudes.
pub fn ensemble_strategy() -> impl proptest::strategy::Strategy<Value = Option<Source>> {
    use proptest::prelude::*;
    (2usize..=4, 1usize..=4).prop_flat_map(|(dim, k)| {
        (
            Just(dim),
            prop::collection::vec(prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim), k),
            prop::collection::vec(0.05f64..1.0, k),
        )
            .prop_map(|(dim, amps, w)| source_from(dim, &amps, &w))
    })
}
