//! Seeded synthetic data: AR(2) series, signals sparse in a wavelet basis, and
//! multi-day wearable-like temperature series with an injected perturbation.
//!
//! Every generator is a pure function of its parameters and seed.

use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{TimeSeries, SECONDS_PER_DAY};
use crate::wavelet::{inverse_dwt, CoefficientVector, Segment, WaveletBasis};

const BURN_IN: usize = 100;

pub const DEFAULT_A1: f64 = 0.5;
pub const DEFAULT_A2: f64 = -0.3;

/// Narrowband AR(2) with pole radius 0.99 at a 12-sample period, used inside
/// perturbation bouts of the default wearable-like subject.
pub const SHEDDER_A1: f64 = 1.714_730_299_493_188_6;
pub const SHEDDER_A2: f64 = -0.9801;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stationarity triangle of an AR(2) recursion.
pub fn ar2_is_stationary(a1: f64, a2: f64) -> bool {
    a2.abs() < 1.0 && a2 + a1 < 1.0 && a2 - a1 < 1.0
}

/// Runs `x_t = a1 x_{t-1} + a2 x_{t-2} + e_t` from zero state, discarding
/// the burn-in, with innovation scale `noise_std(t)` for output sample `t`.
fn ar2_path(
    a1: f64,
    a2: f64,
    n: usize,
    noise_std: impl Fn(usize) -> f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for t in 0..n + BURN_IN {
        let sd = noise_std(t.saturating_sub(BURN_IN));
        let e: f64 = rng.sample(StandardNormal);
        let x = a1 * x1 + a2 * x2 + sd * e;
        x2 = x1;
        x1 = x;
        if t >= BURN_IN {
            out.push(x);
        }
    }
    out
}

/// AR(2) series of `n` samples, timestamped every 10 s from zero.
pub fn gen_ar2(a1: f64, a2: f64, n: usize, noise_std: f64, seed: u64) -> Result<TimeSeries> {
    if !ar2_is_stationary(a1, a2) {
        return Err(Error::InvalidArgument(format!(
            "AR(2) coefficients ({a1}, {a2}) are not stationary"
        )));
    }
    if n == 0 || !(noise_std >= 0.0) {
        return Err(Error::InvalidArgument(
            "AR(2) needs n >= 1 and noise_std >= 0".into(),
        ));
    }
    let values = ar2_path(a1, a2, n, |_| noise_std, &mut rng(seed));
    TimeSeries::uniform(0.0, 10.0, values)
}

/// A segment synthesized from `k` basis columns plus white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSegment {
    pub segment: Segment,
    /// Planted coefficient indices, ascending.
    pub support: Vec<usize>,
    /// Planted coefficient values (same order as `support`).
    pub amplitudes: Vec<f64>,
    /// Energy of the added noise.
    pub noise_energy: f64,
}

/// Plants `k` coefficients of random sign at distinct random positions with
/// unit noise variance and signal energy set by `snr_db`. The noise vector is
/// rescaled to energy exactly `l`, so the realized signal-to-noise ratio is
/// `snr_db`. An infinite `snr_db` gives unit-amplitude coefficients and no
/// noise.
pub fn gen_sparse_in_basis(
    basis: &WaveletBasis,
    l: usize,
    k: usize,
    snr_db: f64,
    seed: u64,
) -> Result<PlantedSegment> {
    if l < 8 || !l.is_power_of_two() {
        return Err(Error::InvalidLength(format!(
            "segment length must be a power of two >= 8, got {l}"
        )));
    }
    if k == 0 || k >= l / 2 {
        return Err(Error::InvalidK {
            k,
            min: 1,
            max_exclusive: l / 2,
        });
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("snr_db is NaN".into()));
    }
    let mut rng = rng(seed);
    let mut support = index::sample(&mut rng, l, k).into_vec();
    support.sort_unstable();
    let noiseless = snr_db == f64::INFINITY;
    let amplitude = if noiseless {
        1.0
    } else {
        (10f64.powf(snr_db / 10.0) * l as f64 / k as f64).sqrt()
    };
    let amplitudes: Vec<f64> = support
        .iter()
        .map(|_| {
            if rng.random::<bool>() {
                amplitude
            } else {
                -amplitude
            }
        })
        .collect();
    let mut coefficients = vec![0.0; l];
    for (&i, &a) in support.iter().zip(&amplitudes) {
        coefficients[i] = a;
    }
    let alpha = CoefficientVector::new(coefficients, basis.levels_for(l))?;
    let mut samples = inverse_dwt(&alpha, basis)?.into_samples();
    let mut noise_energy = 0.0;
    if !noiseless {
        let noise: Vec<f64> = (0..l).map(|_| rng.sample(StandardNormal)).collect();
        let scale = (l as f64 / noise.iter().map(|v| v * v).sum::<f64>()).sqrt();
        for (s, e) in samples.iter_mut().zip(&noise) {
            *s += scale * e;
        }
        noise_energy = l as f64;
    }
    Ok(PlantedSegment {
        segment: Segment::new(samples)?,
        support,
        amplitudes,
        noise_energy,
    })
}

/// What changes in a synthetic subject from the perturbation day on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Perturbation {
    None,
    /// Multiplies the innovation variance by `factor` during bouts.
    VarianceScale {
        factor: f64,
    },
    /// Switches the AR coefficients during bouts.
    ArShift {
        a1: f64,
        a2: f64,
    },
    /// Adds a ramp reaching `amount` at the end of the series.
    Drift {
        amount: f64,
    },
}

/// Parameters of a wearable-like multi-day temperature series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChallengeSpec {
    pub days: usize,
    /// First perturbed day (0-based); also the split day for before/after
    /// statistics.
    pub perturbation_day: usize,
    pub perturbation: Perturbation,
    pub sample_seconds: f64,
    pub baseline_level: f64,
    pub circadian_amplitude: f64,
    pub a1: f64,
    pub a2: f64,
    pub noise_std: f64,
    /// White measurement noise added on top of the AR(2) residual.
    pub sensor_noise_std: f64,
    /// Mean duration of a perturbation bout, in seconds.
    pub bout_seconds: f64,
    /// Fraction of post-onset time spent inside bouts.
    pub bout_fraction: f64,
    pub seed: u64,
}

impl Default for ChallengeSpec {
    fn default() -> Self {
        Self {
            days: 8,
            perturbation_day: 3,
            perturbation: Perturbation::ArShift {
                a1: SHEDDER_A1,
                a2: SHEDDER_A2,
            },
            sample_seconds: 10.0,
            baseline_level: 36.0,
            circadian_amplitude: 0.5,
            a1: 1.8,
            a2: -0.81,
            noise_std: 0.01,
            sensor_noise_std: 0.02,
            bout_seconds: 3600.0,
            bout_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Ground-truth anomalous interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start: f64,
    pub end: f64,
}

/// Declarative description of any synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    Ar2 {
        a1: f64,
        a2: f64,
        n: usize,
        noise_std: f64,
        seed: u64,
    },
    SparseInBasis {
        basis: String,
        l: usize,
        k: usize,
        snr_db: f64,
        seed: u64,
    },
    ChallengeLike(ChallengeSpec),
}

/// Generated series plus labelled intervals (empty unless perturbed).
pub fn generate(spec: &SynthSpec) -> Result<(TimeSeries, Vec<LabelInterval>)> {
    match spec {
        SynthSpec::Ar2 {
            a1,
            a2,
            n,
            noise_std,
            seed,
        } => Ok((gen_ar2(*a1, *a2, *n, *noise_std, *seed)?, Vec::new())),
        SynthSpec::SparseInBasis {
            basis,
            l,
            k,
            snr_db,
            seed,
        } => {
            let basis = WaveletBasis::by_name(basis)?;
            let planted = gen_sparse_in_basis(&basis, *l, *k, *snr_db, *seed)?;
            let series = TimeSeries::uniform(0.0, 10.0, planted.segment.into_samples())?;
            Ok((series, Vec::new()))
        }
        SynthSpec::ChallengeLike(spec) => gen_challenge_like(spec),
    }
}

/// Circadian baseline plus AR(2) residual at one sample per
/// `sample_seconds`, starting at timestamp 0.
///
/// From `perturbation_day` on, the perturbation is active during bouts whose
/// lengths are exponentially distributed around `bout_seconds` and which
/// cover about `bout_fraction` of the time. The returned labels are the bout
/// intervals (the whole post-onset span for `Drift`, none for `None`).
pub fn gen_challenge_like(spec: &ChallengeSpec) -> Result<(TimeSeries, Vec<LabelInterval>)> {
    validate(spec)?;
    let n = (spec.days as f64 * SECONDS_PER_DAY / spec.sample_seconds).round() as usize;
    let onset_t = spec.perturbation_day as f64 * SECONDS_PER_DAY;
    let onset = (onset_t / spec.sample_seconds).round() as usize;
    let mut rng = rng(spec.seed);

    let labels = match spec.perturbation {
        Perturbation::None => Vec::new(),
        Perturbation::Drift { .. } => vec![LabelInterval {
            start: onset_t,
            end: n as f64 * spec.sample_seconds,
        }],
        _ => bouts(spec, onset_t, n as f64 * spec.sample_seconds, &mut rng),
    };
    let in_bout: Vec<bool> = (0..n)
        .map(|i| {
            let t = i as f64 * spec.sample_seconds;
            labels.iter().any(|b| b.start <= t && t < b.end)
        })
        .collect();

    let baseline_sd = spec.noise_std;
    let (residual, shifted) = match spec.perturbation {
        Perturbation::VarianceScale { factor } => {
            let boosted = baseline_sd * factor.sqrt();
            let sd = |t: usize| if in_bout[t] { boosted } else { baseline_sd };
            (ar2_path(spec.a1, spec.a2, n, sd, &mut rng), None)
        }
        Perturbation::ArShift { a1, a2 } => {
            let base = ar2_path(spec.a1, spec.a2, n, |_| baseline_sd, &mut rng);
            let alt = ar2_path(a1, a2, n, |_| baseline_sd, &mut rng);
            (base, Some(alt))
        }
        _ => (
            ar2_path(spec.a1, spec.a2, n, |_| baseline_sd, &mut rng),
            None,
        ),
    };

    let values = (0..n)
        .map(|i| {
            let t = i as f64 * spec.sample_seconds;
            let circadian =
                spec.circadian_amplitude * (2.0 * std::f64::consts::PI * t / SECONDS_PER_DAY).sin();
            let noise = match &shifted {
                Some(alt) if in_bout[i] => alt[i],
                _ => residual[i],
            };
            let drift = match spec.perturbation {
                Perturbation::Drift { amount } if i >= onset => {
                    amount * (i - onset) as f64 / (n - onset).max(1) as f64
                }
                _ => 0.0,
            };
            let sensor: f64 = if spec.sensor_noise_std > 0.0 {
                spec.sensor_noise_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            spec.baseline_level + circadian + noise + drift + sensor
        })
        .collect();
    let series = TimeSeries::uniform(0.0, spec.sample_seconds, values)?;
    Ok((series, labels))
}

fn validate(spec: &ChallengeSpec) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidArgument(msg));
    if spec.days == 0 || spec.perturbation_day >= spec.days {
        return bad(format!(
            "perturbation day {} outside the simulated {} days",
            spec.perturbation_day, spec.days
        ));
    }
    if !(spec.sample_seconds > 0.0) || !(spec.noise_std > 0.0) || !(spec.sensor_noise_std >= 0.0) {
        return bad("sample_seconds and noise_std must be positive".into());
    }
    if !ar2_is_stationary(spec.a1, spec.a2) {
        return bad(format!(
            "baseline AR(2) ({}, {}) is not stationary",
            spec.a1, spec.a2
        ));
    }
    if !(spec.bout_seconds > 0.0) || !(0.0 < spec.bout_fraction && spec.bout_fraction <= 1.0) {
        return bad("bout_seconds must be positive and bout_fraction in (0, 1]".into());
    }
    match spec.perturbation {
        Perturbation::VarianceScale { factor } if !(factor > 0.0) => {
            bad(format!("variance factor must be positive, got {factor}"))
        }
        Perturbation::ArShift { a1, a2 } if !ar2_is_stationary(a1, a2) => {
            bad(format!("shifted AR(2) ({a1}, {a2}) is not stationary"))
        }
        Perturbation::Drift { amount } if !amount.is_finite() => bad("drift must be finite".into()),
        _ => Ok(()),
    }
}

/// Alternating on/off renewal process on `[start, end)`; the first bout
/// starts at `start`.
fn bouts(spec: &ChallengeSpec, start: f64, end: f64, rng: &mut impl Rng) -> Vec<LabelInterval> {
    if spec.bout_fraction >= 1.0 {
        return vec![LabelInterval { start, end }];
    }
    let on_mean = spec.bout_seconds;
    let off_mean = on_mean * (1.0 - spec.bout_fraction) / spec.bout_fraction;
    let mut exp = |mean: f64| -> f64 {
        let u: f64 = rng.random();
        -mean * (1.0 - u).ln()
    };
    let mut out = Vec::new();
    let mut t = start;
    while t < end {
        let on = exp(on_mean);
        out.push(LabelInterval {
            start: t,
            end: (t + on).min(end),
        });
        t += on + exp(off_mean);
    }
    out
}
