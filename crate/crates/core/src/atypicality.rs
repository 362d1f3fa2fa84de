//! Atypicality detection with a dictionary-based typical encoder.
//!
//! The typical encoder knows a dictionary of `(k, support)` pairs harvested
//! from training windows and pays `log2 |D|` bits to name an entry; the
//! coefficient values on that support and the residual are then coded as in
//! the universal encoder. The atypical (universal) encoder is the
//! training-free MDL code plus `log2 l` bits for the unknown start point. A
//! window is atypical when it codes shorter in itself:
//! `L_t - L'_a > tau`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codelength::{gaussian_tail_bits, parameter_cost, residual_floor, CodelengthBreakdown};
use crate::error::{Error, Result};
use crate::pipeline::{sliding_windows, TimeSeries};
use crate::sparse::Analysis;
use crate::wavelet::{forward_dwt, Segment, WaveletBasis};

pub const DICTIONARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub k: usize,
    /// Zero-based coefficient indices, ascending, `len() == k`.
    pub support: Vec<usize>,
}

/// Deduplicated training supports, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalDictionary {
    basis_name: String,
    l: usize,
    entries: Vec<DictionaryEntry>,
}

/// On-disk form: `{"version", "basis_name", "l", "entries": [[k, [i, ...]], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct DictionaryDocument {
    version: u32,
    basis_name: String,
    l: usize,
    entries: Vec<(usize, Vec<usize>)>,
}

impl TypicalDictionary {
    /// Validates and deduplicates `entries`.
    pub fn new(
        basis_name: impl Into<String>,
        l: usize,
        entries: Vec<DictionaryEntry>,
    ) -> Result<Self> {
        if l < 8 || !l.is_power_of_two() {
            return Err(Error::InvalidLength(format!(
                "dictionary window length must be a power of two >= 8, got {l}"
            )));
        }
        let mut dict = Self {
            basis_name: basis_name.into(),
            l,
            entries: Vec::with_capacity(entries.len()),
        };
        for e in entries {
            let sorted = e.support.windows(2).all(|w| w[0] < w[1]);
            if e.k == 0 || e.k >= l / 2 || e.support.len() != e.k || !sorted {
                return Err(Error::InvalidData(format!(
                    "malformed dictionary entry with k = {}",
                    e.k
                )));
            }
            if e.support.last().is_some_and(|&i| i >= l) {
                return Err(Error::InvalidData(format!(
                    "support index out of range for l = {l}"
                )));
            }
            dict.insert(e);
        }
        if dict.entries.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        Ok(dict)
    }

    fn insert(&mut self, entry: DictionaryEntry) -> bool {
        if self.entries.contains(&entry) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    pub fn basis_name(&self) -> &str {
        &self.basis_name
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Bits to name one entry.
    pub fn index_bits(&self) -> f64 {
        (self.entries.len() as f64).log2()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DictionaryDocument {
            version: DICTIONARY_VERSION,
            basis_name: self.basis_name.clone(),
            l: self.l,
            entries: self
                .entries
                .iter()
                .map(|e| (e.k, e.support.clone()))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DictionaryDocument = serde_json::from_str(text)?;
        if doc.version != DICTIONARY_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported dictionary version {}",
                doc.version
            )));
        }
        let entries = doc
            .entries
            .into_iter()
            .map(|(k, support)| DictionaryEntry { k, support })
            .collect();
        Self::new(doc.basis_name, doc.l, entries)
    }
}

/// Collects the MDL-optimal `(k, support)` of every training window;
/// degenerate windows are skipped.
pub fn build_dictionary(training: &[Segment], basis: &WaveletBasis) -> Result<TypicalDictionary> {
    let Some(first) = training.first() else {
        return Err(Error::EmptyDictionary);
    };
    let l = first.len();
    if let Some(bad) = training.iter().find(|s| s.len() != l) {
        return Err(Error::InvalidLength(format!(
            "training windows must share one length ({l} vs {})",
            bad.len()
        )));
    }
    let reps: Vec<Option<DictionaryEntry>> = training
        .par_iter()
        .map(|w| match Analysis::new(w, basis)?.optimal() {
            Ok(rep) => Ok(Some(DictionaryEntry {
                k: rep.k,
                support: rep.support,
            })),
            Err(Error::DegenerateSignal { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut dict = TypicalDictionary {
        basis_name: basis.name().to_string(),
        l,
        entries: Vec::new(),
    };
    for entry in reps.into_iter().flatten() {
        dict.insert(entry);
    }
    if dict.entries.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    Ok(dict)
}

/// Typical codelength of one window and the entry that achieves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypicalCode {
    pub bits: f64,
    pub entry: usize,
    pub breakdown: CodelengthBreakdown,
}

fn check_window(x: &Segment, dict: &TypicalDictionary, basis: &WaveletBasis) -> Result<()> {
    if x.len() != dict.l {
        return Err(Error::InvalidLength(format!(
            "window length {} does not match dictionary length {}",
            x.len(),
            dict.l
        )));
    }
    if basis.name() != dict.basis_name {
        return Err(Error::InvalidArgument(format!(
            "dictionary was built with {}, not {}",
            dict.basis_name,
            basis.name()
        )));
    }
    Ok(())
}

/// `L_t`: best dictionary entry for `x`, where an entry's residual is the
/// coefficient energy off its support.
pub fn typical_codelength(
    x: &Segment,
    dict: &TypicalDictionary,
    basis: &WaveletBasis,
) -> Result<TypicalCode> {
    check_window(x, dict, basis)?;
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let alpha = forward_dwt(x, basis)?;
    let coeffs = alpha.values();
    let total: f64 = alpha.energy();
    let floor = residual_floor(dict.l, x.energy());
    let half_l = 0.5 * dict.l as f64;

    let mut best: Option<(usize, f64, f64, f64)> = None;
    for (i, entry) in dict.entries.iter().enumerate() {
        let kept: f64 = entry.support.iter().map(|&j| coeffs[j] * coeffs[j]).sum();
        let residual_bits = half_l * (total - kept).max(floor).log2();
        let param_bits = parameter_cost(entry.k, dict.l);
        let cost = param_bits + residual_bits;
        if best.is_none_or(|(_, b, _, _)| cost < b) {
            best = Some((i, cost, param_bits, residual_bits));
        }
    }
    let (entry, _, param_bits, residual_bits) = best.expect("dictionary is non-empty");
    let lf = dict.l as f64;
    let constants = half_l * (2.0 * std::f64::consts::PI / lf).log2() + gaussian_tail_bits(dict.l);
    let breakdown =
        CodelengthBreakdown::new(0.0, param_bits, dict.index_bits(), residual_bits, constants);
    Ok(TypicalCode {
        bits: breakdown.total,
        entry,
        breakdown,
    })
}

/// `L'_a = L_a - tau`: the MDL total codelength plus `log2 l` bits for the
/// unknown start of the atypical run.
pub fn atypical_codelength(x: &Segment, basis: &WaveletBasis) -> Result<f64> {
    Ok(atypical_code(&Analysis::new(x, basis)?)?.1)
}

fn atypical_code(analysis: &Analysis) -> Result<(usize, f64)> {
    let rep = analysis.optimal()?;
    let extra = (analysis.l() as f64).log2();
    Ok((rep.k, rep.breakdown.with_extra_constant(extra).total))
}

/// Which difference is compared against `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagDirection {
    /// `L_t - L'_a > tau`: the window codes shorter in itself.
    #[default]
    ShorterInItself,
    /// `L'_a - L_t > tau`, the literal reversed ordering.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionResult {
    pub origin: usize,
    pub timestamp: f64,
    pub typical_bits: f64,
    pub atypical_bits: f64,
    pub score: f64,
    pub flagged: bool,
    pub chosen_entry: usize,
    pub k_atypical: usize,
}

/// Scores one window against the dictionary; `None` for degenerate windows.
pub fn score_window(
    x: &Segment,
    dict: &TypicalDictionary,
    basis: &WaveletBasis,
    direction: FlagDirection,
) -> Result<Option<(TypicalCode, usize, f64, f64)>> {
    let typical = typical_codelength(x, dict, basis)?;
    let (k, atypical) = match atypical_code(&Analysis::new(x, basis)?) {
        Ok(v) => v,
        Err(Error::DegenerateSignal { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let score = match direction {
        FlagDirection::ShorterInItself => typical.bits - atypical,
        FlagDirection::Reversed => atypical - typical.bits,
    };
    Ok(Some((typical, k, atypical, score)))
}

/// Scores every window of `s`; flagged iff `score > tau`. Degenerate windows
/// (vanishing residual) are skipped.
pub fn detect(
    s: &TimeSeries,
    dict: &TypicalDictionary,
    basis: &WaveletBasis,
    l: usize,
    stride: usize,
    tau: f64,
) -> Result<Vec<DetectionResult>> {
    detect_with(s, dict, basis, l, stride, tau, FlagDirection::default())
}

pub fn detect_with(
    s: &TimeSeries,
    dict: &TypicalDictionary,
    basis: &WaveletBasis,
    l: usize,
    stride: usize,
    tau: f64,
    direction: FlagDirection,
) -> Result<Vec<DetectionResult>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tau must be >= 0, got {tau}"
        )));
    }
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let windows = sliding_windows(s, l, stride)?;
    let scored: Vec<Option<DetectionResult>> = windows
        .par_iter()
        .map(|w| {
            Ok(
                score_window(w, dict, basis, direction)?.map(|(typical, k, atypical, score)| {
                    DetectionResult {
                        origin: w.origin,
                        timestamp: s.timestamps()[w.origin],
                        typical_bits: typical.bits,
                        atypical_bits: atypical,
                        score,
                        flagged: score > tau,
                        chosen_entry: typical.entry,
                        k_atypical: k,
                    }
                }),
            )
        })
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().flatten().collect())
}

/// Smallest `tau >= 0` producing no flags on clean validation results.
pub fn calibrate_tau(validation: &[DetectionResult]) -> f64 {
    validation.iter().map(|r| r.score).fold(0.0, f64::max)
}

/// Flagged windows merged into sample-index intervals `[start, end)`.
/// Windows merge when the gap between them is shorter than one window.
pub fn merge_flagged(results: &[DetectionResult], l: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for r in results.iter().filter(|r| r.flagged) {
        let (start, end) = (r.origin, r.origin + l);
        match out.last_mut() {
            Some(last) if start < last.1 + l => last.1 = last.1.max(end),
            _ => out.push((start, end)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(l: usize, seed: u64) -> Segment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Segment::new((0..l).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn dedup_and_distinct() {
        let basis = WaveletBasis::by_name("db4").unwrap();
        let w = noise(64, 1);
        let d = build_dictionary(&[w.clone(), w.clone()], &basis).unwrap();
        assert_eq!(d.len(), 1);
        let ws: Vec<Segment> = (0..4).map(|s| noise(64, 10 + s)).collect();
        let d = build_dictionary(&ws, &basis).unwrap();
        assert_eq!(d.len(), 4);
    }

    #[test]
    fn degenerate_training_is_empty() {
        let basis = WaveletBasis::by_name("haar").unwrap();
        let zero = Segment::new(vec![0.0; 32]).unwrap();
        assert!(matches!(
            build_dictionary(&[zero], &basis),
            Err(Error::EmptyDictionary)
        ));
        assert!(matches!(
            build_dictionary(&[], &basis),
            Err(Error::EmptyDictionary)
        ));
    }

    #[test]
    fn self_match_and_single_entry() {
        let basis = WaveletBasis::by_name("db4").unwrap();
        let ws: Vec<Segment> = (0..3).map(|s| noise(128, 40 + s)).collect();
        let d = build_dictionary(&ws, &basis).unwrap();
        let code = typical_codelength(&ws[0], &d, &basis).unwrap();
        assert_eq!(code.entry, 0);
        assert!((code.bits - code.breakdown.component_sum()).abs() < 1e-9);

        let single = build_dictionary(&ws[..1], &basis).unwrap();
        let code = typical_codelength(&ws[1], &single, &basis).unwrap();
        assert_eq!(code.breakdown.index_cost, 0.0);
    }

    #[test]
    fn doubling_dictionary_adds_one_bit() {
        let basis = WaveletBasis::by_name("db4").unwrap();
        let x = noise(64, 3);
        let d = build_dictionary(std::slice::from_ref(&x), &basis).unwrap();
        let base = typical_codelength(&x, &d, &basis).unwrap();
        // an entry keeping a single tiny coefficient is never better here
        let filler = DictionaryEntry {
            k: 1,
            support: vec![63],
        };
        let mut entries = d.entries().to_vec();
        entries.push(filler);
        let d2 = TypicalDictionary::new("db4", 64, entries).unwrap();
        let doubled = typical_codelength(&x, &d2, &basis).unwrap();
        assert_eq!(doubled.entry, base.entry);
        assert!((doubled.bits - base.bits - 1.0).abs() < 1e-9);
    }

    #[test]
    fn atypical_adds_log_l() {
        let basis = WaveletBasis::by_name("db8").unwrap();
        let x = noise(256, 5);
        let la = atypical_codelength(&x, &basis).unwrap();
        let total = crate::sparse::total_codelength(&x, &basis).unwrap();
        assert_eq!(la - total, 8.0);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let basis = WaveletBasis::by_name("haar").unwrap();
        let ws: Vec<Segment> = (0..3).map(|s| noise(32, 70 + s)).collect();
        let d = build_dictionary(&ws, &basis).unwrap();
        let text = d.to_json().unwrap();
        assert!(text.contains("\"version\": 1"));
        assert_eq!(TypicalDictionary::from_json(&text).unwrap(), d);

        let bad = r#"{"version":2,"basis_name":"haar","l":32,"entries":[[1,[0]]]}"#;
        assert!(TypicalDictionary::from_json(bad).is_err());
        let bad = r#"{"version":1,"basis_name":"haar","l":32,"entries":[[2,[0]]]}"#;
        assert!(TypicalDictionary::from_json(bad).is_err());
        let bad = r#"{"version":1,"basis_name":"haar","l":32,"entries":[[1,[40]]]}"#;
        assert!(TypicalDictionary::from_json(bad).is_err());
        let empty = r#"{"version":1,"basis_name":"haar","l":32,"entries":[]}"#;
        assert!(matches!(
            TypicalDictionary::from_json(empty),
            Err(Error::EmptyDictionary)
        ));
    }

    #[test]
    fn infinite_tau_flags_nothing_and_flags_shrink_with_tau() {
        let basis = WaveletBasis::by_name("db4").unwrap();
        let train: Vec<Segment> = (0..4).map(|s| noise(64, 90 + s)).collect();
        let d = build_dictionary(&train, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..640).map(|_| rng.sample(StandardNormal)).collect();
        let s = TimeSeries::uniform(0.0, 10.0, values).unwrap();
        let none = detect(&s, &d, &basis, 64, 64, f64::INFINITY).unwrap();
        assert!(none.iter().all(|r| !r.flagged));
        let mut prev = usize::MAX;
        for tau in [0.0, 5.0, 20.0, 100.0] {
            let n = detect(&s, &d, &basis, 64, 64, tau)
                .unwrap()
                .iter()
                .filter(|r| r.flagged)
                .count();
            assert!(n <= prev);
            prev = n;
        }
        assert!(detect(&s, &d, &basis, 64, 64, -1.0).is_err());
    }

    #[test]
    fn reversed_direction_negates_score() {
        let basis = WaveletBasis::by_name("db4").unwrap();
        let d = build_dictionary(&[noise(64, 1)], &basis).unwrap();
        let x = noise(64, 2);
        let a = score_window(&x, &d, &basis, FlagDirection::ShorterInItself)
            .unwrap()
            .unwrap();
        let b = score_window(&x, &d, &basis, FlagDirection::Reversed)
            .unwrap()
            .unwrap();
        assert_eq!(a.3, -b.3);
    }

    #[test]
    fn merging() {
        let r = |origin, flagged| DetectionResult {
            origin,
            timestamp: origin as f64,
            typical_bits: 0.0,
            atypical_bits: 0.0,
            score: 0.0,
            flagged,
            chosen_entry: 0,
            k_atypical: 1,
        };
        let results = [
            r(0, true),
            r(256, true),
            r(512, false),
            r(768, false),
            r(1024, true),
        ];
        assert_eq!(merge_flagged(&results, 256), vec![(0, 512), (1024, 1280)]);
        let gap = [r(0, true), r(512, true)];
        assert_eq!(merge_flagged(&gap, 256), vec![(0, 256), (512, 768)]);
    }

    #[test]
    fn calibrated_tau_clears_validation() {
        let r = |score| DetectionResult {
            origin: 0,
            timestamp: 0.0,
            typical_bits: 0.0,
            atypical_bits: 0.0,
            score,
            flagged: false,
            chosen_entry: 0,
            k_atypical: 1,
        };
        assert_eq!(calibrate_tau(&[r(-4.0), r(3.5), r(1.0)]), 3.5);
        assert_eq!(calibrate_tau(&[r(-4.0)]), 0.0);
    }
}
