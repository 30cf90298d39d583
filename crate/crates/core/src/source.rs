//! Binds an ensemble to its eigenbasis code: codeword `k` stands for the
//! eigenvector `spectrum.eigenvectors[kept[k]]`.

use crate::error::Result;
use crate::huffman::{build_code, HuffmanCode, ProbDist};
use crate::qmath::{
    density_from_ensemble, eigenbasis_coefficients, eigendecompose, DensityMatrix, Ensemble,
    Spectrum, C64, ZERO_EIGENVALUE,
};

/// Amplitudes below this are treated as no support on an eigenvector.
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Source {
    ensemble: Ensemble,
    rho: DensityMatrix,
    spectrum: Spectrum,
    kept: Vec<usize>,
    dist: ProbDist,
    code: HuffmanCode,
    coeffs: Vec<Vec<C64>>,
}

impl Source {
    pub fn new(ensemble: Ensemble) -> Result<Self> {
        let rho = density_from_ensemble(&ensemble);
        let spectrum = eigendecompose(&rho)?;
        let full: Vec<Vec<C64>> = ensemble
            .signals()
            .iter()
            .map(|s| eigenbasis_coefficients(&s.amplitudes, &spectrum))
            .collect::<Result<_>>()?;

        // Null eigenvectors only get a codeword when some signal overlaps them.
        let kept: Vec<usize> = (0..spectrum.dim())
            .filter(|&i| {
                spectrum.eigenvalues[i] > ZERO_EIGENVALUE
                    || full.iter().any(|c| c[i].norm() > SUPPORT_TOL)
            })
            .collect();
        let raw: Vec<f64> = kept.iter().map(|&i| spectrum.eigenvalues[i]).collect();
        let total: f64 = raw.iter().sum();
        let dist = ProbDist::new(raw.iter().map(|p| p / total).collect())?;
        let code = build_code(&dist);
        let coeffs = full
            .iter()
            .map(|c| kept.iter().map(|&i| c[i]).collect())
            .collect();
        Ok(Self {
            ensemble,
            rho,
            spectrum,
            kept,
            dist,
            code,
            coeffs,
        })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn code(&self) -> &HuffmanCode {
        &self.code
    }

    /// Eigenvalue distribution over the coded eigenvectors.
    pub fn dist(&self) -> &ProbDist {
        &self.dist
    }

    pub fn n_symbols(&self) -> usize {
        self.kept.len()
    }

    /// Eigenvector carried by codeword `k`.
    pub fn eigenvector(&self, k: usize) -> &[C64] {
        &self.spectrum.eigenvectors[self.kept[k]]
    }

    /// `⟨φ_k|u_j⟩` for signal `j` and codeword `k`.
    pub fn coeffs(&self, j: usize) -> &[C64] {
        &self.coeffs[j]
    }

    /// Codewords with non-negligible amplitude in signal `j`.
    pub fn support(&self, j: usize) -> Vec<usize> {
        self.coeffs[j]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > SUPPORT_TOL)
            .map(|(k, _)| k)
            .collect()
    }

    /// Von Neumann entropy of one signal, in qubits.
    pub fn entropy(&self) -> f64 {
        crate::huffman::shannon_entropy(&self.spectrum.eigenvalues)
    }

    /// `(length, probability)` pairs of the codeword length distribution.
    pub fn length_distribution(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (c, &p) in self.code.codewords().iter().zip(self.dist.probs()) {
            match out.iter_mut().find(|(l, _)| *l == c.len()) {
                Some(entry) => entry.1 += p,
                None => out.push((c.len(), p)),
            }
        }
        out.sort_by_key(|&(l, _)| l);
        out
    }

    /// Variance of the codeword length under the eigenvalue distribution.
    pub fn length_variance(&self) -> f64 {
        let mean = self.code.avg_len();
        self.length_distribution()
            .iter()
            .map(|&(l, p)| p * (l as f64 - mean).powi(2))
            .sum()
    }
}
