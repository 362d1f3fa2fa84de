//! Time-series preprocessing and per-window sparsity features.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::{Analysis, Criterion};
use crate::wavelet::{Segment, WaveletBasis};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// A sampled signal with strictly increasing timestamps (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = timestamps
            .windows(2)
            .position(|w| !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite())
        {
            return Err(Error::InvalidData(format!(
                "timestamps must be finite and strictly increasing (position {})",
                i + 1
            )));
        }
        Ok(Self { timestamps, values })
    }

    /// Series sampled every `period` seconds starting at `start`.
    pub fn uniform(start: f64, period: f64, values: Vec<f64>) -> Result<Self> {
        let timestamps = (0..values.len())
            .map(|i| start + i as f64 * period)
            .collect();
        Self::new(timestamps, values)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Samples per second, from the median sampling interval.
    pub fn sample_rate_hint(&self) -> Option<f64> {
        if self.timestamps.len() < 2 {
            return None;
        }
        let mut dt: Vec<f64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        dt.sort_by(f64::total_cmp);
        Some(1.0 / dt[dt.len() / 2])
    }

    /// The samples with timestamps in `[start, end)`.
    pub fn slice_time(&self, start: f64, end: f64) -> Result<Self> {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end);
        Self::new(
            self.timestamps[lo..hi].to_vec(),
            self.values[lo..hi].to_vec(),
        )
    }
}

/// Averages samples into fixed bins aligned to multiples of `bin_seconds`.
///
/// Output timestamps are bin centers. Bins without finite samples are filled
/// by linear interpolation between the neighbouring non-empty bins.
pub fn downsample(raw: &TimeSeries, bin_seconds: f64) -> Result<TimeSeries> {
    if !(bin_seconds > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive, got {bin_seconds}"
        )));
    }
    let bin_of = |t: f64| (t / bin_seconds).floor() as i64;
    let first = bin_of(raw.timestamps[0]);
    let last = bin_of(*raw.timestamps.last().expect("non-empty"));
    let n_bins = (last - first + 1) as usize;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&t, &v) in raw.timestamps.iter().zip(&raw.values) {
        if v.is_finite() {
            let b = (bin_of(t) - first) as usize;
            sums[b] += v;
            counts[b] += 1;
        }
    }
    let means: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let values = fill_gaps(&means).ok_or(Error::EmptySeries)?;
    let timestamps = (0..n_bins)
        .map(|i| ((first + i as i64) as f64 + 0.5) * bin_seconds)
        .collect();
    TimeSeries::new(timestamps, values)
}

/// Linear interpolation across `None` runs; leading and trailing runs take the
/// nearest valid value. `None` when nothing is valid.
fn fill_gaps(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let valid: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let (&first, &last) = (valid.first()?, valid.last()?);
    let mut out = vec![0.0; values.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = match values[i] {
            Some(v) => v,
            None if i < first => values[first].unwrap(),
            None if i > last => values[last].unwrap(),
            None => {
                let right = valid.partition_point(|&j| j < i);
                let (a, b) = (valid[right - 1], valid[right]);
                let (va, vb) = (values[a].unwrap(), values[b].unwrap());
                va + (vb - va) * (i - a) as f64 / (b - a) as f64
            }
        };
    }
    Some(out)
}

/// Thresholds marking samples as contact-loss artefacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierRule {
    /// Samples below this are invalid.
    pub min_value: f64,
    /// A fall larger than this from the previous valid sample is invalid.
    pub max_drop_per_step: f64,
}

impl Default for OutlierRule {
    fn default() -> Self {
        Self {
            min_value: 30.0,
            max_drop_per_step: 3.0,
        }
    }
}

/// Replaces invalid samples (non-finite, below the floor, or a sudden drop)
/// by linear interpolation over the invalid run.
pub fn remove_outliers(s: &TimeSeries, rule: OutlierRule) -> Result<TimeSeries> {
    let mut last_valid: Option<f64> = None;
    let marked: Vec<Option<f64>> = s
        .values
        .iter()
        .map(|&v| {
            let ok = v.is_finite()
                && v >= rule.min_value
                && last_valid.is_none_or(|prev| prev - v <= rule.max_drop_per_step);
            if ok {
                last_valid = Some(v);
                Some(v)
            } else {
                None
            }
        })
        .collect();
    let values = fill_gaps(&marked).ok_or(Error::EmptySeries)?;
    TimeSeries::new(s.timestamps.clone(), values)
}

/// Windows of length `l` at origins `0, stride, 2 stride, ...`; a trailing
/// partial window is dropped.
pub fn sliding_windows(s: &TimeSeries, l: usize, stride: usize) -> Result<Vec<Segment>> {
    window_values(s.values(), l, stride)
}

pub(crate) fn window_values(values: &[f64], l: usize, stride: usize) -> Result<Vec<Segment>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if values.len() < l {
        return Err(Error::InsufficientData {
            needed: l,
            available: values.len(),
        });
    }
    (0..=values.len() - l)
        .step_by(stride)
        .map(|origin| Segment::with_origin(values[origin..origin + l].to_vec(), origin))
        .collect()
}

/// Sparsity features of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowFeature {
    pub origin: usize,
    /// Timestamp of the first sample of the window.
    pub timestamp: f64,
    /// `None` for degenerate windows.
    pub k: Option<usize>,
    /// MDL total codelength; `None` for degenerate windows.
    pub codelength_bits: Option<f64>,
}

/// Selected sparsity level per window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KProfile {
    pub l: usize,
    pub criterion: Criterion,
    pub windows: Vec<WindowFeature>,
}

impl KProfile {
    pub fn window_origins(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.origin).collect()
    }

    /// `k / l` per window, `None` where the window was degenerate.
    pub fn k_fractions(&self) -> Vec<Option<f64>> {
        self.windows
            .iter()
            .map(|w| w.k.map(|k| k as f64 / self.l as f64))
            .collect()
    }
}

/// MDL sparsity profile over sliding windows.
pub fn k_profile(
    s: &TimeSeries,
    basis: &WaveletBasis,
    l: usize,
    stride: usize,
) -> Result<KProfile> {
    let [mdl, _, _] = k_profiles(s, basis, l, stride)?;
    Ok(mdl)
}

/// MDL, AIC and BIC profiles from one pass over the windows.
pub fn k_profiles(
    s: &TimeSeries,
    basis: &WaveletBasis,
    l: usize,
    stride: usize,
) -> Result<[KProfile; 3]> {
    let windows = sliding_windows(s, l, stride)?;
    let per_window: Vec<[WindowFeature; 3]> = windows
        .par_iter()
        .map(|w| {
            let analysis = Analysis::new(w, basis)?;
            let timestamp = s.timestamps[w.origin];
            let feature = |criterion: Criterion| -> WindowFeature {
                match analysis.select(criterion) {
                    Ok(k) => WindowFeature {
                        origin: w.origin,
                        timestamp,
                        k: Some(k),
                        codelength_bits: (criterion == Criterion::Mdl)
                            .then(|| analysis.breakdown(k).map(|b| b.total))
                            .transpose()
                            .expect("selected k lies in range"),
                    },
                    Err(_) => WindowFeature {
                        origin: w.origin,
                        timestamp,
                        k: None,
                        codelength_bits: None,
                    },
                }
            };
            Ok(Criterion::ALL.map(feature))
        })
        .collect::<Result<_>>()?;
    Ok(Criterion::ALL.map(|criterion| {
        let idx = criterion as usize;
        KProfile {
            l,
            criterion,
            windows: per_window.iter().map(|f| f[idx]).collect(),
        }
    }))
}

/// Mean and sample standard deviation of `k / l` over one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DayStats {
    pub day: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Day boundaries `[b_0, b_1, ...]` covering `[first, last]`, with days
/// starting at `day_offset` seconds past UTC midnight.
pub fn day_boundaries(first: f64, last: f64, day_offset: f64) -> Vec<f64> {
    let start = ((first - day_offset) / SECONDS_PER_DAY).floor() * SECONDS_PER_DAY + day_offset;
    let mut out = vec![start];
    while *out.last().unwrap() <= last {
        let next = out.last().unwrap() + SECONDS_PER_DAY;
        out.push(next);
    }
    out
}

/// Per-day statistics; day `i` covers `[boundaries[i], boundaries[i + 1])`
/// and a window belongs to the day containing its first sample. Days without
/// non-degenerate windows are omitted.
pub fn daily_stats(p: &KProfile, day_boundaries: &[f64]) -> Result<Vec<DayStats>> {
    if day_boundaries.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "day boundaries must be strictly increasing".into(),
        ));
    }
    let days = day_boundaries.len().saturating_sub(1);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); days];
    for (w, frac) in p.windows.iter().zip(p.k_fractions()) {
        let Some(frac) = frac else { continue };
        let pos = day_boundaries.partition_point(|&b| b <= w.timestamp);
        if pos >= 1 && pos <= days {
            buckets[pos - 1].push(frac);
        }
    }
    Ok(buckets
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(day, b)| {
            let (mean, std) = mean_std(b);
            DayStats {
                day,
                mean,
                std,
                n: b.len(),
            }
        })
        .collect())
}

/// Mean and n-1 standard deviation (0 for a single value).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Ratio of the mean daily std on days `>= split_day` to the mean daily std
/// on days before it.
pub fn shift_ratio(stats: &[DayStats], split_day: usize) -> Result<f64> {
    let (before, after): (Vec<&DayStats>, Vec<&DayStats>) =
        stats.iter().partition(|d| d.day < split_day);
    if before.is_empty() || after.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need days on both sides of split day {split_day}"
        )));
    }
    let avg = |days: &[&DayStats]| days.iter().map(|d| d.std).sum::<f64>() / days.len() as f64;
    let denominator = avg(&before);
    if denominator == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    Ok(avg(&after) / denominator)
}

/// Summed codelength of a series under each candidate basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisReport {
    /// `(basis name, total bits)` in library order.
    pub totals: Vec<(String, f64)>,
    /// Index into `totals` of the shortest total (first on ties).
    pub best: usize,
}

impl BasisReport {
    pub fn best_name(&self) -> &str {
        &self.totals[self.best].0
    }

    pub fn best_bits(&self) -> f64 {
        self.totals[self.best].1
    }

    /// Rows sorted by ascending total; ties keep library order.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut rows = self.totals.clone();
        rows.sort_by(|a, b| a.1.total_cmp(&b.1));
        rows
    }
}

/// Sums the MDL codelength of every window under each basis and returns the
/// basis with the shortest total together with the per-basis report.
///
/// Windows with vanishing residual still contribute their floored codelength,
/// so every basis is charged for every window.
pub fn select_basis(
    s: &TimeSeries,
    library: &[WaveletBasis],
    l: usize,
    stride: usize,
) -> Result<(WaveletBasis, f64, BasisReport)> {
    if library.is_empty() {
        return Err(Error::InvalidArgument("empty wavelet library".into()));
    }
    let windows = sliding_windows(s, l, stride)?;
    let totals = library
        .par_iter()
        .map(|basis| {
            let bits = windows
                .iter()
                .map(|w| Ok(Analysis::new(w, basis)?.total_bits_unchecked()))
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum::<f64>();
            Ok((basis.name().to_string(), bits))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = totals.iter().enumerate().fold(
        0,
        |best, (i, t)| if t.1 < totals[best].1 { i } else { best },
    );
    let report = BasisReport { totals, best };
    Ok((library[best].clone(), report.best_bits(), report))
}
