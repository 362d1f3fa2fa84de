//! End-to-end checks on synthetic data with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_mdl::atypicality::{build_dictionary, calibrate_tau, detect, DICTIONARY_VERSION};
use sparse_mdl::pipeline::{
    daily_stats, day_boundaries, k_profile, select_basis, sliding_windows, TimeSeries,
};
use sparse_mdl::sparse::select_k_aic;
use sparse_mdl::synth::{
    gen_ar2, gen_challenge_like, gen_sparse_in_basis, ChallengeSpec, Perturbation,
};
use sparse_mdl::wavelet::CoefficientVector;
use sparse_mdl::{inverse_dwt, optimal_k, total_codelength, Segment, WaveletBasis};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn db8() -> WaveletBasis {
    WaveletBasis::by_name("db8").unwrap()
}

fn welch_p_value(a: &[f64], b: &[f64]) -> f64 {
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (
            m,
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
            n,
        )
    };
    let (ma, va, na) = stats(a);
    let (mb, vb, nb) = stats(b);
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

#[test]
fn noiseless_planted_support_is_recovered_exactly() {
    let basis = db8();
    // a noiseless 1-sparse signal has zero residual for every admissible k
    let single = gen_sparse_in_basis(&basis, 256, 1, f64::INFINITY, 1).unwrap();
    assert!(matches!(
        optimal_k(&single.segment, &basis),
        Err(sparse_mdl::Error::DegenerateSignal { k: 1 })
    ));
    for k in [2, 4, 16, 32] {
        let planted = gen_sparse_in_basis(&basis, 256, k, f64::INFINITY, k as u64).unwrap();
        let rep = optimal_k(&planted.segment, &basis).unwrap();
        assert_eq!(rep.k, k);
        assert_eq!(rep.support, planted.support);
    }
}

#[test]
fn aic_keeps_at_least_the_strong_components() {
    let basis = db8();
    for seed in 0..20 {
        let planted = gen_sparse_in_basis(&basis, 256, 5, 30.0, seed).unwrap();
        let mdl = optimal_k(&planted.segment, &basis).unwrap().k;
        let aic = select_k_aic(&planted.segment, &basis).unwrap();
        assert!(aic >= 5 && aic >= mdl, "seed {seed}: aic {aic} mdl {mdl}");
    }
}

#[test]
fn more_noise_means_longer_codes() {
    // same planted signal, noise scaled up; sign test over 100 trials
    let basis = db8();
    let mut longer = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut alpha = vec![0.0; 256];
        for i in 0..6 {
            alpha[i * 7] = 20.0 * (i as f64 + 1.0);
        }
        let clean = inverse_dwt(&CoefficientVector::new(alpha, 5).unwrap(), &basis).unwrap();
        let noise: Vec<f64> = (0..256).map(|_| rng.sample(StandardNormal)).collect();
        let noisy = |scale: f64| {
            Segment::new(
                clean
                    .samples()
                    .iter()
                    .zip(&noise)
                    .map(|(c, n)| c + scale * n)
                    .collect(),
            )
            .unwrap()
        };
        if total_codelength(&noisy(2.0), &basis).unwrap()
            > total_codelength(&noisy(1.0), &basis).unwrap()
        {
            longer += 1;
        }
    }
    assert!(longer >= 95, "{longer}/100");
}

#[test]
fn stationary_series_has_stable_k_across_halves() {
    let basis = db8();
    let mut stable = 0;
    for seed in 0..20 {
        let s = gen_ar2(1.8, -0.81, 256 * 120, 1.0, seed).unwrap();
        let fractions: Vec<f64> = k_profile(&s, &basis, 256, 256)
            .unwrap()
            .k_fractions()
            .into_iter()
            .flatten()
            .collect();
        let (a, b) = fractions.split_at(fractions.len() / 2);
        if welch_p_value(a, b) > 0.01 {
            stable += 1;
        }
    }
    assert!(stable >= 18, "{stable}/20");
}

#[test]
fn variance_burst_raises_k_spread() {
    let basis = db8();
    for seed in 0..5 {
        let spec = ChallengeSpec {
            perturbation: Perturbation::VarianceScale { factor: 4.0 },
            perturbation_day: 4,
            bout_fraction: 1.0,
            seed,
            ..Default::default()
        };
        let (s, _) = gen_challenge_like(&spec).unwrap();
        let p = k_profile(&s, &basis, 256, 256).unwrap();
        let stats = daily_stats(&p, &day_boundaries(0.0, 8.0 * 86400.0 - 1.0, 0.0)).unwrap();
        let mean_std = |days: &[sparse_mdl::pipeline::DayStats]| {
            days.iter().map(|d| d.std).sum::<f64>() / days.len() as f64
        };
        let (first, second) = stats.split_at(4);
        assert!(mean_std(second) > mean_std(first), "seed {seed}");
    }
}

#[test]
fn db8_built_signal_selects_db8() {
    let basis = db8();
    let candidates: Vec<WaveletBasis> = ["haar", "db4", "db8"]
        .iter()
        .map(|n| WaveletBasis::by_name(n).unwrap())
        .collect();
    for seed in 0..5 {
        let values: Vec<f64> = (0..4)
            .flat_map(|w| {
                gen_sparse_in_basis(&basis, 256, 8, 25.0, 100 * seed + w)
                    .unwrap()
                    .segment
                    .into_samples()
            })
            .collect();
        let s = TimeSeries::uniform(0.0, 10.0, values).unwrap();
        let (chosen, _, _) = select_basis(&s, &candidates, 256, 256).unwrap();
        assert_eq!(chosen.name(), "db8", "seed {seed}");
    }
}

#[test]
fn two_day_dictionary_is_valid() {
    let basis = db8();
    let spec = ChallengeSpec {
        days: 2,
        perturbation: Perturbation::None,
        perturbation_day: 1,
        ..Default::default()
    };
    let (s, _) = gen_challenge_like(&spec).unwrap();
    let windows = sliding_windows(&s, 256, 64).unwrap();
    let dict = build_dictionary(&windows, &basis).unwrap();
    assert!(dict.len() <= windows.len());
    for e in dict.entries() {
        assert_eq!(e.support.len(), e.k);
        assert!(e.k >= 1 && e.k < 128);
        assert!(e.support.windows(2).all(|w| w[0] < w[1]));
        assert!(e.support.iter().all(|&i| i < 256));
    }
    let json: serde_json::Value = serde_json::from_str(&dict.to_json().unwrap()).unwrap();
    assert_eq!(json["version"], DICTIONARY_VERSION);
    assert_eq!(json["entries"].as_array().unwrap().len(), dict.len());
}

#[test]
fn spectral_change_is_flagged_only_where_injected() {
    let basis = db8();
    let day = 86400.0;
    for seed in 0..3 {
        let spec = ChallengeSpec {
            seed,
            ..Default::default()
        };
        let (s, labels) = gen_challenge_like(&spec).unwrap();
        let train = s.slice_time(0.0, 2.0 * day).unwrap();
        let dict = build_dictionary(&sliding_windows(&train, 256, 64).unwrap(), &basis).unwrap();
        let validation = detect(
            &s.slice_time(2.0 * day, 3.0 * day).unwrap(),
            &dict,
            &basis,
            256,
            256,
            0.0,
        )
        .unwrap();
        let tau = calibrate_tau(&validation);

        // clean data from the training distribution stays unflagged
        let twin = ChallengeSpec {
            perturbation: Perturbation::None,
            seed: seed + 100,
            ..Default::default()
        };
        let (clean, _) = gen_challenge_like(&twin).unwrap();
        let clean_flags = detect(
            &clean.slice_time(3.0 * day, 8.0 * day).unwrap(),
            &dict,
            &basis,
            256,
            256,
            tau,
        )
        .unwrap()
        .iter()
        .filter(|r| r.flagged)
        .count();
        assert_eq!(clean_flags, 0, "seed {seed}");

        let test = s.slice_time(3.0 * day, 8.0 * day).unwrap();
        let results = detect(&test, &dict, &basis, 256, 256, tau).unwrap();
        let flagged: Vec<_> = results.iter().filter(|r| r.flagged).collect();
        assert!(!flagged.is_empty());
        for r in flagged {
            let (start, end) = (r.timestamp, r.timestamp + 2550.0);
            assert!(
                labels.iter().any(|b| b.start < end && start < b.end),
                "seed {seed}: window at {start} flagged outside every bout"
            );
        }
    }
}
