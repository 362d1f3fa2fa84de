//! Orthonormal periodized discrete wavelet transform.
//!
//! The transform matrix is never materialized. A basis is a scaling filter
//! (the highpass filter follows from the quadrature-mirror rule) plus a
//! decomposition depth; circular boundary handling keeps the transform exactly
//! orthonormal for every dyadic length.
//!
//! Coefficients are laid out in pyramid order:
//! `[approx | coarsest detail | ... | finest detail]`, so for a segment of
//! length `l` the finest detail band always occupies `l/2..l`.

use crate::error::{Error, Result};
use crate::filters;

const FILTER_TOL: f64 = 1e-10;

/// An orthonormal wavelet: scaling filter, its mirror filter and a depth cap.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    /// `None` means the full pyramid.
    max_levels_hint: Option<usize>,
}

impl WaveletBasis {
    /// Builds a basis from a scaling filter, checking normalization and
    /// orthonormality of the even shifts.
    pub fn new(name: impl Into<String>, lowpass: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let len = lowpass.len();
        if len < 2 || !len.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "{name}: filter length must be even and >= 2, got {len}"
            )));
        }
        if lowpass.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("{name}: non-finite filter tap")));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > FILTER_TOL {
            return Err(Error::InvalidArgument(format!(
                "{name}: taps sum to {sum}, expected sqrt(2)"
            )));
        }
        for shift in 0..len / 2 {
            let dot: f64 = (0..len - 2 * shift)
                .map(|i| lowpass[i] * lowpass[i + 2 * shift])
                .sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - expected).abs() > FILTER_TOL {
                return Err(Error::InvalidArgument(format!(
                    "{name}: filter is not orthonormal at shift {shift} ({dot})"
                )));
            }
        }
        let highpass = (0..len)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - i]
            })
            .collect();
        Ok(Self {
            name,
            lowpass,
            highpass,
            max_levels_hint: None,
        })
    }

    /// Caps the decomposition depth.
    pub fn with_max_levels(mut self, levels: usize) -> Self {
        self.max_levels_hint = Some(levels.max(1));
        self
    }

    /// Looks up a built-in basis: `haar`, `db2`..`db10`, `sym4`..`sym8`,
    /// `coif1`..`coif3` (`db1` is accepted as an alias for `haar`).
    pub fn by_name(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase();
        let taps: &[f64] = match key.as_str() {
            "haar" | "db1" => &filters::HAAR,
            "db2" => &filters::DB2,
            "db3" => &filters::DB3,
            "db4" => &filters::DB4,
            "db5" => &filters::DB5,
            "db6" => &filters::DB6,
            "db7" => &filters::DB7,
            "db8" => &filters::DB8,
            "db9" => &filters::DB9,
            "db10" => &filters::DB10,
            "sym4" => &filters::SYM4,
            "sym5" => &filters::SYM5,
            "sym6" => &filters::SYM6,
            "sym7" => &filters::SYM7,
            "sym8" => &filters::SYM8,
            "coif1" => &filters::COIF1,
            "coif2" => &filters::COIF2,
            "coif3" => &filters::COIF3,
            _ => return Err(Error::UnknownBasis(name.to_string())),
        };
        let canonical = if key == "db1" {
            "haar".to_string()
        } else {
            key
        };
        Self::new(canonical, taps.to_vec())
    }

    /// Names of every built-in basis, in library order.
    pub fn library_names() -> &'static [&'static str] {
        &[
            "haar", "db2", "db3", "db4", "db5", "db6", "db7", "db8", "db9", "db10", "sym4", "sym5",
            "sym6", "sym7", "sym8", "coif1", "coif2", "coif3",
        ]
    }

    /// The full built-in library.
    pub fn library() -> Vec<Self> {
        Self::library_names()
            .iter()
            .map(|n| Self::by_name(n).expect("built-in filter tables are valid"))
            .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn filter_len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn max_levels_hint(&self) -> Option<usize> {
        self.max_levels_hint
    }

    /// Number of pyramid levels used for a segment of length `len`.
    ///
    /// The pyramid halves while the band is at least as long as the filter,
    /// with at least one level so the finest detail band is always present.
    pub fn levels_for(&self, len: usize) -> usize {
        let mut levels = 0;
        let mut band = len;
        while band >= 2 && band.is_multiple_of(2) && (band >= self.filter_len() || levels == 0) {
            levels += 1;
            band /= 2;
            if let Some(cap) = self.max_levels_hint {
                if levels >= cap {
                    break;
                }
            }
        }
        levels
    }
}

/// A dyadic window of a real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    samples: Vec<f64>,
    /// Offset of the first sample in the source series.
    pub origin: usize,
}

impl Segment {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_origin(samples, 0)
    }

    pub fn with_origin(samples: Vec<f64>, origin: usize) -> Result<Self> {
        check_dyadic(samples.len())?;
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite sample at position {pos}"
            )));
        }
        Ok(Self { samples, origin })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

fn check_dyadic(len: usize) -> Result<()> {
    if len < 4 || !len.is_power_of_two() {
        return Err(Error::InvalidLength(format!(
            "segment length must be a power of two >= 4, got {len}"
        )));
    }
    Ok(())
}

/// Wavelet coefficients of one segment, in pyramid order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    values: Vec<f64>,
    levels: usize,
}

/// Position of a coefficient inside the pyramid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Scaling coefficients left after the last level.
    Approximation { position: usize },
    /// Detail coefficients; `scale` 1 is the finest band.
    Detail { scale: usize, position: usize },
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>, levels: usize) -> Result<Self> {
        check_dyadic(values.len())?;
        if levels == 0 || values.len() >> levels == 0 {
            return Err(Error::InvalidLength(format!(
                "{levels} levels do not fit a vector of length {}",
                values.len()
            )));
        }
        Ok(Self { values, levels })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Scale and position of coefficient `index`.
    pub fn band(&self, index: usize) -> Band {
        let n = self.values.len();
        let approx_len = n >> self.levels;
        if index < approx_len {
            return Band::Approximation { position: index };
        }
        // band for scale s spans [n >> s, n >> (s - 1))
        let mut scale = self.levels;
        while index >= n >> (scale - 1) {
            scale -= 1;
        }
        Band::Detail {
            scale,
            position: index - (n >> scale),
        }
    }

    /// Band of every coefficient, in order.
    pub fn level_map(&self) -> Vec<Band> {
        (0..self.values.len()).map(|i| self.band(i)).collect()
    }
}

/// Forward transform `alpha = W x`.
pub fn forward_dwt(x: &Segment, basis: &WaveletBasis) -> Result<CoefficientVector> {
    let n = x.len();
    let levels = basis.levels_for(n);
    let mut buf = x.samples.clone();
    let mut scratch = vec![0.0; n];
    let (h, g) = (basis.lowpass(), basis.highpass());
    let mut len = n;
    for _ in 0..levels {
        let half = len / 2;
        for i in 0..half {
            let (mut a, mut d) = (0.0, 0.0);
            for (j, (hj, gj)) in h.iter().zip(g).enumerate() {
                let v = buf[(2 * i + j) % len];
                a += hj * v;
                d += gj * v;
            }
            scratch[i] = a;
            scratch[half + i] = d;
        }
        buf[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
    Ok(CoefficientVector {
        values: buf,
        levels,
    })
}

/// Synthesis `x = W^T alpha`.
pub fn inverse_dwt(alpha: &CoefficientVector, basis: &WaveletBasis) -> Result<Segment> {
    let n = alpha.len();
    let levels = basis.levels_for(n);
    if levels != alpha.levels {
        return Err(Error::InvalidLength(format!(
            "coefficients have {} levels, basis {} uses {levels} at length {n}",
            alpha.levels,
            basis.name()
        )));
    }
    let mut buf = alpha.values.clone();
    let mut scratch = vec![0.0; n];
    let (h, g) = (basis.lowpass(), basis.highpass());
    let mut len = n >> levels;
    for _ in 0..levels {
        let half = len;
        len *= 2;
        scratch[..len].iter_mut().for_each(|v| *v = 0.0);
        for i in 0..half {
            let (a, d) = (buf[i], buf[half + i]);
            for (j, (hj, gj)) in h.iter().zip(g).enumerate() {
                scratch[(2 * i + j) % len] += hj * a + gj * d;
            }
        }
        buf[..len].copy_from_slice(&scratch[..len]);
    }
    Segment::new(buf)
}

/// Indices of `values` ordered by decreasing magnitude; equal magnitudes keep
/// the lower index first.
pub fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order
}

fn check_count(k: usize, len: usize) -> Result<()> {
    if k > len {
        return Err(Error::InvalidK {
            k,
            min: 0,
            max_exclusive: len + 1,
        });
    }
    Ok(())
}

/// Keeps the `k` largest-magnitude entries and zeroes the rest.
pub fn keep_largest(values: &[f64], k: usize) -> Result<Vec<f64>> {
    check_count(k, values.len())?;
    let order = magnitude_order(values);
    let mut out = vec![0.0; values.len()];
    for &i in &order[..k] {
        out[i] = values[i];
    }
    Ok(out)
}

/// Keeps the `k` smallest-magnitude entries and zeroes the rest. Exactly the
/// complement of [`keep_largest`] with `len - k`.
pub fn keep_smallest(values: &[f64], k: usize) -> Result<Vec<f64>> {
    check_count(k, values.len())?;
    let order = magnitude_order(values);
    let mut out = vec![0.0; values.len()];
    for &i in &order[values.len() - k..] {
        out[i] = values[i];
    }
    Ok(out)
}
