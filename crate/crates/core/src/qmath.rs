//! Dense linear algebra on the single-signal Hilbert space: ensemble density
//! matrices, their spectra, entropy and fidelity.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::huffman::{shannon_entropy, PROB_TOL};

pub type C64 = Complex64;

const NORM_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are treated as one degenerate cluster.
const CLUSTER_GAP: f64 = 1e-9;
/// Entries smaller than this are ignored when fixing eigenvector phases.
const PHASE_TOL: f64 = 1e-9;
/// Eigenvalues below this count as zero when deciding codeword support.
pub const ZERO_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub amplitudes: Vec<C64>,
    pub prob: f64,
}

/// A memoryless pure-state source: `|u_j⟩` emitted with probability `q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    signals: Vec<Signal>,
}

impl Ensemble {
    pub fn new(dim: usize, signals: Vec<Signal>) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidEnsemble(format!(
                "dimension {dim} is not a power of two >= 2"
            )));
        }
        if signals.is_empty() {
            return Err(Error::InvalidEnsemble("no signals".into()));
        }
        for (j, s) in signals.iter().enumerate() {
            if s.amplitudes.len() != dim {
                return Err(Error::InvalidEnsemble(format!(
                    "signal {j} has {} amplitudes, expected {dim}",
                    s.amplitudes.len()
                )));
            }
            let norm: f64 = s.amplitudes.iter().map(|a| a.norm_sqr()).sum();
            if (norm.sqrt() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidEnsemble(format!(
                    "signal {j} has norm {}",
                    norm.sqrt()
                )));
            }
            if !s.prob.is_finite() || s.prob < 0.0 {
                return Err(Error::InvalidEnsemble(format!(
                    "signal {j} has probability {}",
                    s.prob
                )));
            }
        }
        let total: f64 = signals.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidEnsemble(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { dim, signals })
    }

    /// Computational basis states `|i⟩` with the given probabilities.
    pub fn classical(probs: &[f64]) -> Result<Self> {
        let dim = probs.len().next_power_of_two().max(2);
        let signals = probs
            .iter()
            .enumerate()
            .map(|(i, &prob)| {
                let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
                amplitudes[i] = C64::new(1.0, 0.0);
                Signal { amplitudes, prob }
            })
            .collect();
        Self::new(dim, signals)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits per signal.
    pub fn qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn signal(&self, j: usize) -> &Signal {
        &self.signals[j]
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidEnsemble(format!("trace {tr}")));
        }
        let rho = Self(m);
        let min = rho
            .0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -NORM_TOL {
            return Err(Error::InvalidEnsemble(format!(
                "negative eigenvalue {min}"
            )));
        }
        Ok(rho)
    }

    /// Wraps a matrix without validation; used for sub-normalized outputs
    /// such as per-signal reductions after erasure.
    pub fn from_raw(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn pure(u: &[C64]) -> Self {
        let v = DVector::from_column_slice(u);
        Self(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (descending) and the matching eigenvectors of a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ p_i |φ_i⟩⟨φ_i|`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (p, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let v = DVector::from_column_slice(v);
            m += (&v * v.adjoint()) * C64::new(*p, 0.0);
        }
        m
    }
}

pub fn density_from_ensemble(e: &Ensemble) -> DensityMatrix {
    let d = e.dim();
    let mut m = DMatrix::zeros(d, d);
    for s in e.signals() {
        let v = DVector::from_column_slice(&s.amplitudes);
        m += (&v * v.adjoint()) * C64::new(s.prob, 0.0);
    }
    DensityMatrix(m)
}

pub fn eigendecompose(rho: &DensityMatrix) -> Result<Spectrum> {
    let m = rho.matrix();
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let d = m.nrows();
    // Symmetrize so the solver sees an exactly Hermitian input.
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d
            && eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]] < CLUSTER_GAP
        {
            end += 1;
        }
        let cluster: Vec<DVector<C64>> = order[start..end]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let basis = if cluster.len() == 1 {
            cluster
        } else {
            canonical_basis(&cluster)
        };
        for (k, v) in basis.into_iter().enumerate() {
            let p = eig.eigenvalues[order[start + k]].max(0.0);
            eigenvalues.push(p);
            eigenvectors.push(fix_phase(v.as_slice()));
        }
        start = end;
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Orthonormal basis of span(cluster) obtained by projecting `e_0, e_1, ...`
/// in order and keeping each non-negligible Gram-Schmidt residual.
fn canonical_basis(cluster: &[DVector<C64>]) -> Vec<DVector<C64>> {
    let d = cluster[0].len();
    let mut proj = DMatrix::<C64>::zeros(d, d);
    for v in cluster {
        proj += v * v.adjoint();
    }
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(cluster.len());
    for k in 0..d {
        if basis.len() == cluster.len() {
            break;
        }
        let mut r = proj.column(k).into_owned();
        for b in &basis {
            let overlap = b.dotc(&r);
            r -= b * overlap;
        }
        let norm = r.norm();
        if norm > 1e-6 {
            basis.push(r / C64::new(norm, 0.0));
        }
    }
    basis
}

/// Multiplies by a global phase so the first significant entry is real positive.
fn fix_phase(v: &[C64]) -> Vec<C64> {
    let lead = v.iter().find(|z| z.norm() > PHASE_TOL).copied();
    match lead {
        Some(z) => {
            let phase = z.conj() / z.norm();
            v.iter().map(|x| x * phase).collect()
        }
        None => v.to_vec(),
    }
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(shannon_entropy(&eigendecompose(rho)?.eigenvalues))
}

/// `c_i = ⟨φ_i|u⟩`.
pub fn eigenbasis_coefficients(u: &[C64], s: &Spectrum) -> Result<Vec<C64>> {
    if u.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: u.len(),
        });
    }
    Ok(s.eigenvectors
        .iter()
        .map(|phi| phi.iter().zip(u).map(|(a, b)| a.conj() * b).sum())
        .collect())
}

/// `⟨u|ρ|u⟩`.
pub fn fidelity(u: &[C64], rho: &DensityMatrix) -> Result<f64> {
    if u.len() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: u.len(),
        });
    }
    let v = DVector::from_column_slice(u);
    Ok(v.dotc(&(rho.matrix() * &v)).re)
}

pub fn average_fidelity(e: &Ensemble, outputs: &[DensityMatrix]) -> Result<f64> {
    if outputs.len() != e.len() {
        return Err(Error::ArityMismatch {
            expected: e.len(),
            got: outputs.len(),
        });
    }
    e.signals()
        .iter()
        .zip(outputs)
        .map(|(s, rho)| Ok(s.prob * fidelity(&s.amplitudes, rho)?))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn e1() -> Ensemble {
        Ensemble::new(
            2,
            vec![
                Signal { amplitudes: vec![c(1.0), c(0.0)], prob: 0.5 },
                Signal { amplitudes: vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], prob: 0.5 },
            ],
        )
        .unwrap()
    }

    fn close(m: &DMatrix<C64>, expect: &[[f64; 2]; 2]) -> bool {
        (0..2).all(|i| (0..2).all(|j| (m[(i, j)] - c(expect[i][j])).norm() < 1e-12))
    }

    #[test]
    fn density_examples() {
        let rho = density_from_ensemble(&e1());
        assert!(close(rho.matrix(), &[[0.75, 0.25], [0.25, 0.25]]));

        let pure = Ensemble::classical(&[1.0]).unwrap();
        assert!(close(density_from_ensemble(&pure).matrix(), &[[1.0, 0.0], [0.0, 0.0]]));

        let mixed = Ensemble::classical(&[0.5, 0.5]).unwrap();
        assert!(close(density_from_ensemble(&mixed).matrix(), &[[0.5, 0.0], [0.0, 0.5]]));
    }

    #[test]
    fn ensemble_validation() {
        assert!(Ensemble::classical(&[0.6, 0.6]).is_err());
        assert!(Ensemble::new(3, vec![]).is_err());
        let bad_norm = Signal { amplitudes: vec![c(1.0), c(1.0)], prob: 1.0 };
        assert!(Ensemble::new(2, vec![bad_norm]).is_err());
    }

    #[test]
    fn spectrum_diagonal() {
        let rho = DensityMatrix::from_diagonal(&[0.5, 0.25, 0.125, 0.125]).unwrap();
        let s = eigendecompose(&rho).unwrap();
        assert_eq!(s.eigenvalues.len(), 4);
        for (k, p) in [0.5, 0.25, 0.125, 0.125].iter().enumerate() {
            assert!((s.eigenvalues[k] - p).abs() < 1e-12);
            for i in 0..4 {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((s.eigenvectors[k][i] - c(expect)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn spectrum_e1_closed_form() {
        let s = eigendecompose(&density_from_ensemble(&e1())).unwrap();
        let sq = 2f64.sqrt();
        assert!((s.eigenvalues[0] - (2.0 + sq) / 4.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - (2.0 - sq) / 4.0).abs() < 1e-12);
        assert!((s.eigenvectors[0][0] - c((PI / 8.0).cos())).norm() < 1e-12);
        assert!((s.eigenvectors[0][1] - c((PI / 8.0).sin())).norm() < 1e-12);

        let coeffs = eigenbasis_coefficients(&e1().signal(1).amplitudes, &s).unwrap();
        assert!((coeffs[0].norm() - (PI / 8.0).cos()).abs() < 1e-12);
        assert!((coeffs[1].norm() - (PI / 8.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn spectrum_degenerate_is_computational() {
        let s = eigendecompose(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.5, 0.5]);
        assert!((s.eigenvectors[0][0] - c(1.0)).norm() < 1e-12);
        assert!((s.eigenvectors[1][1] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.3), c(0.0), c(0.5)]);
        assert!(matches!(
            eigendecompose(&DensityMatrix::from_raw(m)),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn entropy_examples() {
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(2)).unwrap() - 1.0).abs() < 1e-12);
        assert!(von_neumann_entropy(&DensityMatrix::pure(&[c(0.6), c(0.8)])).unwrap().abs() < 1e-9);
        let d4 = DensityMatrix::from_diagonal(&[0.5, 0.25, 0.125, 0.125]).unwrap();
        assert!((von_neumann_entropy(&d4).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn coefficients_examples() {
        let s = eigendecompose(&DensityMatrix::from_diagonal(&[0.7, 0.3, 0.0, 0.0]).unwrap()).unwrap();
        let coeffs = eigenbasis_coefficients(&s.eigenvectors[0].clone(), &s).unwrap();
        assert!((coeffs[0] - c(1.0)).norm() < 1e-12);
        assert!(coeffs[1..].iter().all(|z| z.norm() < 1e-12));
        // |3⟩ lives entirely in the null space.
        let u = vec![c(0.0), c(0.0), c(0.0), c(1.0)];
        let coeffs = eigenbasis_coefficients(&u, &s).unwrap();
        assert!(coeffs[..2].iter().all(|z| z.norm() < 1e-12));
        let null: f64 = coeffs[2..].iter().map(|z| z.norm_sqr()).sum();
        assert!((null - 1.0).abs() < 1e-10);
        assert!(eigenbasis_coefficients(&[c(1.0)], &s).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let u = [c(0.6), C64::new(0.0, 0.8)];
        assert!((fidelity(&u, &DensityMatrix::pure(&u)).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity(&[c(1.0), c(0.0)], &DensityMatrix::maximally_mixed(2)).unwrap() - 0.5).abs() < 1e-12);
        let rho = density_from_ensemble(&e1());
        let plus = [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)];
        assert!((fidelity(&plus, &rho).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn average_fidelity_examples() {
        let e = e1();
        let exact: Vec<_> = e.signals().iter().map(|s| DensityMatrix::pure(&s.amplitudes)).collect();
        assert!((average_fidelity(&e, &exact).unwrap() - 1.0).abs() < 1e-12);
        let mixed = vec![DensityMatrix::maximally_mixed(2); 2];
        assert!((average_fidelity(&e, &mixed).unwrap() - 0.5).abs() < 1e-12);
        let rho = density_from_ensemble(&e);
        assert!((average_fidelity(&e, &[rho.clone(), rho]).unwrap() - 0.75).abs() < 1e-12);
        assert!(average_fidelity(&e, &mixed[..1]).is_err());
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
        let v: Vec<C64> = (0..d)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / n).collect()
    }

    fn random_ensemble(rng: &mut ChaCha8Rng) -> Ensemble {
        let d = [2usize, 4, 8, 16][rng.gen_range(0..4)];
        let m = rng.gen_range(1..6);
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let signals = w
            .iter()
            .map(|x| Signal { amplitudes: random_state(rng, d), prob: x / total })
            .collect();
        Ensemble::new(d, signals).unwrap()
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let e = random_ensemble(&mut rng);
            let rho = density_from_ensemble(&e);
            let s = eigendecompose(&rho).unwrap();
            let diff = (s.reconstruct() - rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-8, "reconstruction error {diff}");
            assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            assert!((s.eigenvalues.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for a in 0..s.dim() {
                for b in 0..s.dim() {
                    let ip: C64 = s.eigenvectors[a].iter().zip(&s.eigenvectors[b]).map(|(x, y)| x.conj() * y).sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - c(expect)).norm() < 1e-8);
                }
            }
            let entropy = von_neumann_entropy(&rho).unwrap();
            assert!(entropy >= -1e-12 && entropy <= (e.dim() as f64).log2() + 1e-12);
            assert!((entropy - shannon_entropy(&s.eigenvalues)).abs() < 1e-9);
            for sig in e.signals() {
                let coeffs = eigenbasis_coefficients(&sig.amplitudes, &s).unwrap();
                let n: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-10);
                let f = fidelity(&sig.amplitudes, &rho).unwrap();
                assert!((-1e-10..=1.0 + 1e-10).contains(&f));
                let phased: Vec<C64> = sig.amplitudes.iter().map(|z| z * C64::from_polar(1.0, 1.234)).collect();
                assert!((fidelity(&phased, &rho).unwrap() - f).abs() < 1e-12);
            }
        }
    }
}
