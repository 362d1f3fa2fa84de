//! MDL-optimal sparsity level of a segment in an orthonormal wavelet basis,
//! plus AIC/BIC selectors over the same nested family of models.
//!
//! For a segment of length `l` and coefficients `alpha = W x`, keeping the `k`
//! largest-magnitude coefficients leaves the residual energy `E(k)`, the sum
//! of the `l - k` smallest squared coefficients. The MDL objective is
//!
//! ```text
//! 5/2 k + (k/2) log2 l + l H(k/l) + (l/2) log2 E(k),    1 <= k < l/2
//! ```
//!
//! and the total codelength adds the k-independent block
//! `5/2 + 2 log2 l + (l/2) log2(2 pi / l) + l / (2 ln 2) + log2(pi / 8)`.

use serde::Serialize;

use crate::codelength::{
    entropy_unchecked, gaussian_tail_bits, parameter_cost, residual_floor, CodelengthBreakdown,
};
use crate::error::{Error, Result};
use crate::wavelet::{forward_dwt, magnitude_order, CoefficientVector, Segment, WaveletBasis};

/// Sparsity-level criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Mdl,
    Aic,
    Bic,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Mdl, Criterion::Aic, Criterion::Bic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Mdl => "mdl",
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        }
    }
}

/// Chosen sparse model for one segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseRepresentation {
    pub k: usize,
    pub l: usize,
    /// Retained coefficient indices, ascending.
    pub support: Vec<usize>,
    /// Coefficient values at `support`, in the same order.
    pub values: Vec<f64>,
    pub sigma2_hat: f64,
    pub breakdown: CodelengthBreakdown,
    pub basis_name: String,
}

impl SparseRepresentation {
    /// The sparse coefficient vector `alpha_hat` with zeros off the support.
    pub fn dense_coefficients(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.l];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

/// One row of the codelength-versus-k curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub complexity_bits: f64,
    pub error_bits: f64,
    pub total_bits: f64,
    pub residual_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionCurve {
    pub l: usize,
    pub points: Vec<CurvePoint>,
}

impl SelectionCurve {
    /// Point with the smallest total, first one on ties.
    pub fn argmin(&self) -> Option<&CurvePoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&CurvePoint>, p| match best {
                Some(b) if b.total_bits <= p.total_bits => Some(b),
                _ => Some(p),
            })
    }
}

/// Coefficients of one segment with the residual energies of every nested
/// model precomputed from a single magnitude sort.
#[derive(Debug, Clone)]
pub struct Analysis {
    coefficients: CoefficientVector,
    /// Coefficient indices by decreasing magnitude.
    order: Vec<usize>,
    /// `tail[k]` is the energy of all but the `k` largest coefficients.
    tail: Vec<f64>,
    floor: f64,
    basis_name: String,
}

impl Analysis {
    pub fn new(x: &Segment, basis: &WaveletBasis) -> Result<Self> {
        let l = x.len();
        if l < 8 {
            return Err(Error::InvalidLength(format!(
                "sparsity selection needs l >= 8, got {l}"
            )));
        }
        let coefficients = forward_dwt(x, basis)?;
        let values = coefficients.values();
        let order = magnitude_order(values);
        let mut tail = vec![0.0; l + 1];
        for k in (0..l).rev() {
            let v = values[order[k]];
            tail[k] = tail[k + 1] + v * v;
        }
        Ok(Self {
            floor: residual_floor(l, x.energy()),
            coefficients,
            order,
            tail,
            basis_name: basis.name().to_string(),
        })
    }

    pub fn l(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &CoefficientVector {
        &self.coefficients
    }

    pub fn basis_name(&self) -> &str {
        &self.basis_name
    }

    /// Largest admissible k (inclusive): `l/2 - 1`.
    pub fn k_max(&self) -> usize {
        self.l() / 2 - 1
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Energy of the `l - k` smallest-magnitude coefficients.
    pub fn residual_energy(&self, k: usize) -> f64 {
        self.tail[k]
    }

    fn floored_energy(&self, k: usize) -> f64 {
        self.tail[k].max(self.floor)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max() {
            return Err(Error::InvalidK {
                k,
                min: 1,
                max_exclusive: self.k_max() + 1,
            });
        }
        Ok(())
    }

    fn check_degenerate(&self) -> Result<()> {
        if self.tail[1] <= self.floor {
            return Err(Error::DegenerateSignal { k: 1 });
        }
        Ok(())
    }

    /// k-dependent model cost `5/2 k + (k/2) log2 l + l H(k/l)`.
    pub fn complexity_bits(&self, k: usize) -> f64 {
        let l = self.l();
        parameter_cost(k, l) + l as f64 * entropy_unchecked(k as f64 / l as f64)
    }

    /// `(l/2) log2 E(k)` with the energy floored.
    pub fn error_bits(&self, k: usize) -> f64 {
        0.5 * self.l() as f64 * self.floored_energy(k).log2()
    }

    /// MDL objective at `k`.
    pub fn objective(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        Ok(self.complexity_bits(k) + self.error_bits(k))
    }

    fn argmin(&self, score: impl Fn(usize) -> f64) -> usize {
        let mut best_k = 1;
        let mut best = score(1);
        for k in 2..=self.k_max() {
            let s = score(k);
            if s < best {
                best = s;
                best_k = k;
            }
        }
        best_k
    }

    /// Minimizer of the MDL objective, ignoring degeneracy.
    pub fn mdl_k_unchecked(&self) -> usize {
        self.argmin(|k| self.complexity_bits(k) + self.error_bits(k))
    }

    /// `2 (k + 1) + l ln(sigma2(k))`.
    pub fn aic(&self, k: usize) -> f64 {
        let l = self.l() as f64;
        2.0 * (k + 1) as f64 + l * (self.floored_energy(k) / l).ln()
    }

    /// `(k + 1) ln l + l ln(sigma2(k))`.
    pub fn bic(&self, k: usize) -> f64 {
        let l = self.l() as f64;
        (k + 1) as f64 * l.ln() + l * (self.floored_energy(k) / l).ln()
    }

    /// Selected k under `criterion`, with ties going to the smaller k.
    pub fn select(&self, criterion: Criterion) -> Result<usize> {
        self.check_degenerate()?;
        Ok(match criterion {
            Criterion::Mdl => self.mdl_k_unchecked(),
            Criterion::Aic => self.argmin(|k| self.aic(k)),
            Criterion::Bic => self.argmin(|k| self.bic(k)),
        })
    }

    /// Full breakdown of the codelength when `k` coefficients are kept.
    ///
    /// The per-k terms go into `param_cost`, `index_cost` and
    /// `residual_cost`; `k_cost` is `log2 l` and `constants` holds the rest
    /// of the k-independent block.
    pub fn breakdown(&self, k: usize) -> Result<CodelengthBreakdown> {
        self.check_k(k)?;
        let l = self.l();
        let lf = l as f64;
        let log_l = lf.log2();
        let constants = 2.5
            + log_l
            + 0.5 * lf * (2.0 * std::f64::consts::PI / lf).log2()
            + gaussian_tail_bits(l)
            + (std::f64::consts::PI / 8.0).log2();
        Ok(CodelengthBreakdown::new(
            log_l,
            parameter_cost(k, l),
            lf * entropy_unchecked(k as f64 / lf),
            self.error_bits(k),
            constants,
        ))
    }

    /// Sparse representation at a fixed `k`.
    pub fn representation(&self, k: usize) -> Result<SparseRepresentation> {
        let breakdown = self.breakdown(k)?;
        let mut support: Vec<usize> = self.order[..k].to_vec();
        support.sort_unstable();
        let values = support
            .iter()
            .map(|&i| self.coefficients.values()[i])
            .collect();
        Ok(SparseRepresentation {
            k,
            l: self.l(),
            support,
            values,
            sigma2_hat: self.tail[k] / self.l() as f64,
            breakdown,
            basis_name: self.basis_name.clone(),
        })
    }

    /// MDL-optimal representation.
    pub fn optimal(&self) -> Result<SparseRepresentation> {
        let k = self.select(Criterion::Mdl)?;
        self.representation(k)
    }

    /// Total codelength at the MDL optimum, without the degeneracy check.
    pub fn total_bits_unchecked(&self) -> f64 {
        self.breakdown(self.mdl_k_unchecked())
            .expect("argmin lies in range")
            .total
    }

    pub fn curve(&self) -> Result<SelectionCurve> {
        self.check_degenerate()?;
        let points = (1..=self.k_max())
            .map(|k| {
                let complexity_bits = self.complexity_bits(k);
                let error_bits = self.error_bits(k);
                CurvePoint {
                    k,
                    complexity_bits,
                    error_bits,
                    total_bits: complexity_bits + error_bits,
                    residual_energy: self.tail[k],
                }
            })
            .collect();
        Ok(SelectionCurve {
            l: self.l(),
            points,
        })
    }
}

/// MDL objective of `x` when the `k` largest coefficients are kept.
pub fn mdl_objective(x: &Segment, basis: &WaveletBasis, k: usize) -> Result<f64> {
    Analysis::new(x, basis)?.objective(k)
}

/// MDL-optimal sparse representation of `x` over `1 <= k < l/2`.
pub fn optimal_k(x: &Segment, basis: &WaveletBasis) -> Result<SparseRepresentation> {
    Analysis::new(x, basis)?.optimal()
}

/// Shortest lossless codelength of `x` in bits.
pub fn total_codelength(x: &Segment, basis: &WaveletBasis) -> Result<f64> {
    Ok(optimal_k(x, basis)?.breakdown.total)
}

/// The k-independent part of the total codelength for length `l`.
pub fn constant_block(l: usize) -> f64 {
    let lf = l as f64;
    2.5 + 2.0 * lf.log2()
        + 0.5 * lf * (2.0 * std::f64::consts::PI / lf).log2()
        + gaussian_tail_bits(l)
        + (std::f64::consts::PI / 8.0).log2()
}

pub fn select_k_aic(x: &Segment, basis: &WaveletBasis) -> Result<usize> {
    Analysis::new(x, basis)?.select(Criterion::Aic)
}

pub fn select_k_bic(x: &Segment, basis: &WaveletBasis) -> Result<usize> {
    Analysis::new(x, basis)?.select(Criterion::Bic)
}

pub fn selection_curve(x: &Segment, basis: &WaveletBasis) -> Result<SelectionCurve> {
    Analysis::new(x, basis)?.curve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{inverse_dwt, keep_largest, keep_smallest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(l: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..l)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn column(basis: &WaveletBasis, l: usize, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; l];
        v[j] = 1.0;
        let alpha = CoefficientVector::new(v, basis.levels_for(l)).unwrap();
        inverse_dwt(&alpha, basis).unwrap().into_samples()
    }

    #[test]
    fn objective_recomposes_from_primitives() {
        let db8 = WaveletBasis::by_name("db8").unwrap();
        let x = Segment::new(noise(256, 1)).unwrap();
        let alpha = forward_dwt(&x, &db8).unwrap();
        for k in [1, 127] {
            let resid: f64 = keep_smallest(alpha.values(), 256 - k)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum();
            let expected = crate::codelength::parameter_cost(k, 256)
                + crate::codelength::index_cost_bound(256, k).unwrap()
                - 0.5 * 8.0
                - (std::f64::consts::PI / 8.0).log2()
                + 128.0 * resid.log2();
            let got = mdl_objective(&x, &db8, k).unwrap();
            assert!(
                (got - expected).abs() < 1e-9,
                "k = {k}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn one_dominant_coefficient_prefers_k1() {
        let db8 = WaveletBasis::by_name("db8").unwrap();
        let col = column(&db8, 256, 37);
        let n = noise(256, 2);
        let x: Vec<f64> = col
            .iter()
            .zip(&n)
            .map(|(c, e)| 10.0 * c + 1e-3 * e)
            .collect();
        let x = Segment::new(x).unwrap();
        assert!(mdl_objective(&x, &db8, 1).unwrap() < mdl_objective(&x, &db8, 2).unwrap());
        assert_eq!(optimal_k(&x, &db8).unwrap().support, vec![37]);
    }

    #[test]
    fn objective_minus_error_is_complexity() {
        let basis = WaveletBasis::by_name("sym5").unwrap();
        let x = Segment::new(noise(64, 3)).unwrap();
        let a = Analysis::new(&x, &basis).unwrap();
        for k in 1..32 {
            let lhs = a.objective(k).unwrap() - 32.0 * a.residual_energy(k).log2();
            let rhs = 2.5 * k as f64
                + 0.5 * k as f64 * 6.0
                + 64.0 * crate::codelength::binary_entropy(k as f64 / 64.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);
        }
        assert!(matches!(a.objective(0), Err(Error::InvalidK { .. })));
        assert!(matches!(a.objective(32), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn five_planted_components() {
        let db8 = WaveletBasis::by_name("db8").unwrap();
        let planted = [3usize, 20, 41, 77, 200];
        let n = noise(256, 4);
        let mut x: Vec<f64> = n.iter().map(|e| 0.1 * e).collect();
        for (m, &j) in planted.iter().enumerate() {
            let c = column(&db8, 256, j);
            let amp = if m % 2 == 0 { 20.0 } else { -20.0 };
            x.iter_mut().zip(&c).for_each(|(xi, ci)| *xi += amp * ci);
        }
        let rep = optimal_k(&Segment::new(x).unwrap(), &db8).unwrap();
        assert_eq!(rep.k, 5);
        assert_eq!(rep.support, planted.to_vec());
    }

    #[test]
    fn zero_signal_is_degenerate() {
        let haar = WaveletBasis::by_name("haar").unwrap();
        let x = Segment::new(vec![0.0; 64]).unwrap();
        assert!(matches!(
            optimal_k(&x, &haar),
            Err(Error::DegenerateSignal { k: 1 })
        ));
        assert!(matches!(
            select_k_aic(&x, &haar),
            Err(Error::DegenerateSignal { .. })
        ));
        let c = Segment::new(vec![3.0; 64]).unwrap();
        assert!(optimal_k(&c, &haar).is_err());
    }

    #[test]
    fn too_short_segment() {
        let haar = WaveletBasis::by_name("haar").unwrap();
        let x = Segment::new(vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!(matches!(optimal_k(&x, &haar), Err(Error::InvalidLength(_))));
    }

    #[test]
    fn constant_block_value() {
        // high-precision evaluation of the k-independent block at l = 256
        assert!((constant_block(256) - (-482.792_034_064_283_56)).abs() < 1e-9);
    }

    #[test]
    fn total_is_min_plus_constants() {
        let basis = WaveletBasis::by_name("db4").unwrap();
        for seed in 0..10 {
            let x = Segment::new(noise(128, 100 + seed)).unwrap();
            let a = Analysis::new(&x, &basis).unwrap();
            let min = (1..64)
                .map(|k| a.objective(k).unwrap())
                .fold(f64::INFINITY, f64::min);
            let total = total_codelength(&x, &basis).unwrap();
            assert!((total - (min + constant_block(128))).abs() < 1e-9);
            let rep = a.optimal().unwrap();
            assert!((rep.breakdown.total - rep.breakdown.component_sum()).abs() < 1e-9);
        }
    }

    #[test]
    fn sigma2_and_reconstruction_identity() {
        let basis = WaveletBasis::by_name("coif2").unwrap();
        let x = Segment::new(noise(128, 9)).unwrap();
        let a = Analysis::new(&x, &basis).unwrap();
        for k in [1, 10, 63] {
            let rep = a.representation(k).unwrap();
            let alpha =
                CoefficientVector::new(rep.dense_coefficients(), basis.levels_for(128)).unwrap();
            let recon = inverse_dwt(&alpha, &basis).unwrap();
            let err: f64 = x
                .samples()
                .iter()
                .zip(recon.samples())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!((err - a.residual_energy(k)).abs() < 1e-9);
            assert!((rep.sigma2_hat - err / 128.0).abs() < 1e-9);
            let kept = keep_largest(a.coefficients().values(), k).unwrap();
            assert_eq!(kept, rep.dense_coefficients());
        }
    }

    #[test]
    fn aic_bic_algebra_and_ordering() {
        let basis = WaveletBasis::by_name("db8").unwrap();
        for seed in 0..30 {
            let x = Segment::new(noise(256, 500 + seed)).unwrap();
            let a = Analysis::new(&x, &basis).unwrap();
            for k in [1, 50, 126] {
                let d = a.aic(k + 1) - a.aic(k);
                let expected = 2.0 + 256.0 * (a.residual_energy(k + 1) / a.residual_energy(k)).ln();
                assert!((d - expected).abs() < 1e-9);
            }
            let k_aic = a.select(Criterion::Aic).unwrap();
            let k_bic = a.select(Criterion::Bic).unwrap();
            assert!(k_bic <= k_aic, "seed {seed}: bic {k_bic} > aic {k_aic}");
        }
    }

    #[test]
    fn curve_consistency() {
        let basis = WaveletBasis::by_name("db8").unwrap();
        let x = Segment::new(noise(256, 77)).unwrap();
        let curve = selection_curve(&x, &basis).unwrap();
        assert_eq!(curve.points.len(), 127);
        assert_eq!(curve.points.first().unwrap().k, 1);
        assert_eq!(curve.points.last().unwrap().k, 127);
        for w in curve.points.windows(2) {
            assert!(w[1].complexity_bits > w[0].complexity_bits);
            assert!(w[1].error_bits <= w[0].error_bits);
        }
        assert_eq!(curve.argmin().unwrap().k, optimal_k(&x, &basis).unwrap().k);
    }

    #[test]
    fn scaling_keeps_fixed_k_support() {
        let basis = WaveletBasis::by_name("db6").unwrap();
        let raw = noise(128, 31);
        let a = Analysis::new(&Segment::new(raw.clone()).unwrap(), &basis).unwrap();
        let c = 3.5;
        let scaled: Vec<f64> = raw.iter().map(|v| c * v).collect();
        let b = Analysis::new(&Segment::new(scaled).unwrap(), &basis).unwrap();
        for k in [1, 7, 40] {
            let ra = a.representation(k).unwrap();
            let rb = b.representation(k).unwrap();
            assert_eq!(ra.support, rb.support);
            assert!((rb.sigma2_hat - c * c * ra.sigma2_hat).abs() < 1e-9 * rb.sigma2_hat.max(1.0));
        }
    }
}
