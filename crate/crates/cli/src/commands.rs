use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sparse_mdl::atypicality::{
    build_dictionary, calibrate_tau, detect_with, merge_flagged, DetectionResult, FlagDirection,
};
use sparse_mdl::io;
use sparse_mdl::pipeline::{
    daily_stats, day_boundaries, downsample, k_profiles, remove_outliers,
    select_basis as rank_bases, shift_ratio, sliding_windows, OutlierRule, TimeSeries,
    SECONDS_PER_DAY,
};
use sparse_mdl::sparse::selection_curve;
use sparse_mdl::synth::{
    generate, ChallengeSpec, Perturbation, SynthSpec, DEFAULT_A1, DEFAULT_A2, SHEDDER_A1,
    SHEDDER_A2,
};
use sparse_mdl::{Error, Result, WaveletBasis};

use crate::{
    CurveArgs, DetectArgs, Direction, FeaturesArgs, RunConfig, SelectBasisArgs, SimKind,
    SimPerturbation, SimulateArgs, Tau,
};

fn parse_ts(flag: &str, value: &str) -> Result<f64> {
    io::parse_timestamp(value).map_err(|e| Error::InvalidArgument(format!("--{flag}: {e}")))
}

/// Reads the input and applies outlier removal and binning.
fn load(run: &RunConfig) -> Result<TimeSeries> {
    if !(run.bin_seconds >= 0.0) {
        return Err(Error::InvalidArgument("--bin-seconds must be >= 0".into()));
    }
    let mut s = io::read_series(&run.input)?;
    if !run.no_outliers {
        let rule = OutlierRule {
            min_value: run.min_value,
            max_drop_per_step: run.max_drop,
        };
        s = remove_outliers(&s, rule)?;
    }
    if run.bin_seconds > 0.0 {
        s = downsample(&s, run.bin_seconds)?;
    }
    Ok(s)
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

/// The named basis, or the shortest-codelength library member for `auto`.
fn resolve_basis(run: &RunConfig, s: &TimeSeries) -> Result<WaveletBasis> {
    if run.wavelet.eq_ignore_ascii_case("auto") {
        let (basis, _, _) = rank_bases(s, &WaveletBasis::library(), run.l, run.stride())?;
        Ok(basis)
    } else {
        WaveletBasis::by_name(&run.wavelet)
    }
}

pub fn select_basis(args: &SelectBasisArgs) -> Result<()> {
    let run = &args.run;
    let library = if args.library.is_empty() {
        WaveletBasis::library()
    } else {
        args.library
            .iter()
            .map(|name| WaveletBasis::by_name(name.trim()))
            .collect::<Result<Vec<_>>>()?
    };
    let s = load(run)?;
    let (basis, bits, report) = rank_bases(&s, &library, run.l, run.stride())?;
    let dir = out_dir(&run.out)?;
    io::write_basis_report(&dir.join("basis_report.csv"), &report.ranked())?;
    println!("{} {}", basis.name(), io::fmt_f64(bits));
    Ok(())
}

#[derive(Serialize)]
struct Ratios {
    mdl: Option<f64>,
    aic: Option<f64>,
    bic: Option<f64>,
}

pub fn features(args: &FeaturesArgs) -> Result<()> {
    let run = &args.run;
    let split = parse_ts("split", &args.split)?;
    let s = load(run)?;
    let basis = resolve_basis(run, &s)?;
    let profiles = k_profiles(&s, &basis, run.l, run.stride())?;

    // days start at the split's time of day so that the split is a boundary
    let offset = split.rem_euclid(SECONDS_PER_DAY);
    let first = s.timestamps()[0];
    let last = *s.timestamps().last().expect("non-empty series");
    let boundaries = day_boundaries(first, last, offset);
    let split_day = boundaries.partition_point(|&b| b < split - 1e-6);

    let dir = out_dir(&run.out)?;
    let mut ratios = [None; 3];
    let mut notes = serde_json::Map::new();
    for (i, p) in profiles.iter().enumerate() {
        let stats = daily_stats(p, &boundaries)?;
        let suffix = match i {
            0 => String::new(),
            _ => format!("_{}", p.criterion.as_str()),
        };
        io::write_kprofile(&dir.join(format!("kprofile{suffix}.csv")), p)?;
        io::write_daystats(&dir.join(format!("daystats{suffix}.csv")), &stats)?;
        match shift_ratio(&stats, split_day) {
            Ok(r) => ratios[i] = Some(r),
            Err(e) => {
                notes.insert(p.criterion.as_str().into(), e.to_string().into());
            }
        }
    }
    let summary = json!({
        "basis": basis.name(),
        "l": run.l,
        "stride": run.stride(),
        "split_timestamp": split,
        "split_day": split_day,
        "ratios": Ratios { mdl: ratios[0], aic: ratios[1], bic: ratios[2] },
        "notes": notes,
    });
    io::write_json(&dir.join("ratios.json"), &summary)?;
    let show = |r: Option<f64>| r.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    println!(
        "basis {} mdl {} aic {} bic {}",
        basis.name(),
        show(ratios[0]),
        show(ratios[1]),
        show(ratios[2])
    );
    Ok(())
}

fn offset_origins(results: &mut [DetectionResult], offset: usize) {
    for r in results {
        r.origin += offset;
    }
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let run = &args.run;
    let s = load(run)?;
    let ts = s.timestamps();
    let train_end = parse_ts("train-end", &args.train_end)?;
    let validation_end = args
        .validation_end
        .as_deref()
        .map(|v| parse_ts("validation-end", v))
        .transpose()?;
    if let Some(v) = validation_end {
        if v <= train_end {
            return Err(Error::InvalidArgument(
                "--validation-end must come after --train-end".into(),
            ));
        }
    }
    let direction = match args.direction {
        Direction::ShorterInItself => FlagDirection::ShorterInItself,
        Direction::Reversed => FlagDirection::Reversed,
    };

    let train = s.slice_time(f64::NEG_INFINITY, train_end)?;
    let basis = resolve_basis(run, &train)?;
    let windows = sliding_windows(&train, run.l, args.train_stride as usize)?;
    let dict = build_dictionary(&windows, &basis)?;

    let (tau, tau_source, validation_windows, test_start) = match (&args.tau, validation_end) {
        (Tau::Cv, None) => {
            return Err(Error::InvalidArgument(
                "--tau cv needs --validation-end".into(),
            ))
        }
        (Tau::Cv, Some(v_end)) => {
            let validation = s.slice_time(train_end, v_end)?;
            let scored = detect_with(
                &validation,
                &dict,
                &basis,
                run.l,
                run.stride(),
                0.0,
                direction,
            )?;
            (calibrate_tau(&scored), "cv", scored.len(), v_end)
        }
        (Tau::Fixed(t), v_end) => (*t, "fixed", 0, v_end.unwrap_or(train_end)),
    };

    let test = s.slice_time(test_start, f64::INFINITY)?;
    let offset = ts.partition_point(|&t| t < test_start);
    let mut results = detect_with(&test, &dict, &basis, run.l, run.stride(), tau, direction)?;
    offset_origins(&mut results, offset);
    let merged = merge_flagged(&results, run.l);
    let intervals: Vec<[f64; 2]> = merged
        .iter()
        .map(|&(a, b)| [ts[a], ts[b.min(ts.len()) - 1]])
        .collect();

    let dir = out_dir(&run.out)?;
    io::write_atomic(
        &dir.join("dictionary.json"),
        format!("{}\n", dict.to_json()?).as_bytes(),
    )?;
    io::write_detections(&dir.join("detections.csv"), &results)?;
    let flagged = results.iter().filter(|r| r.flagged).count();
    let summary = json!({
        "basis": basis.name(),
        "l": run.l,
        "stride": run.stride(),
        "train_stride": args.train_stride,
        "dictionary_entries": dict.len(),
        "tau": tau,
        "tau_source": tau_source,
        "validation_windows": validation_windows,
        "test_windows": results.len(),
        "flagged_windows": flagged,
        "flagged_sample_intervals": merged,
        "flagged_intervals": intervals,
    });
    io::write_json(&dir.join("detect_summary.json"), &summary)?;
    println!(
        "basis {} tau {} flagged {}/{} windows in {} intervals",
        basis.name(),
        io::fmt_f64(tau),
        flagged,
        results.len(),
        merged.len()
    );
    Ok(())
}

pub fn curve(args: &CurveArgs) -> Result<()> {
    let run = &args.run;
    let s = load(run)?;
    let basis = resolve_basis(run, &s)?;
    let windows = sliding_windows(&s, run.l, run.stride())?;
    let window = windows.get(args.window).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "window index {} out of range (series has {} windows)",
            args.window,
            windows.len()
        ))
    })?;
    let curve = selection_curve(window, &basis)?;
    let dir = out_dir(&run.out)?;
    io::write_curve(&dir.join("curve.csv"), &curve)?;
    let best = curve.argmin().expect("curve is non-empty");
    println!(
        "basis {} window {} origin {} k {} total_bits {}",
        basis.name(),
        args.window,
        window.origin,
        best.k,
        io::fmt_f64(best.total_bits)
    );
    Ok(())
}

fn spec_from_flags(args: &SimulateArgs) -> Result<SynthSpec> {
    Ok(match args.kind {
        SimKind::Ar2 => SynthSpec::Ar2 {
            a1: DEFAULT_A1,
            a2: DEFAULT_A2,
            n: args.n,
            noise_std: 1.0,
            seed: args.seed,
        },
        SimKind::SparseInBasis => SynthSpec::SparseInBasis {
            basis: args.wavelet.clone(),
            l: args.l,
            k: args.k,
            snr_db: args.snr_db,
            seed: args.seed,
        },
        SimKind::ChallengeLike => {
            let defaults = ChallengeSpec::default();
            let perturbation = match args.perturbation {
                SimPerturbation::Default => defaults.perturbation,
                SimPerturbation::None => Perturbation::None,
                SimPerturbation::VarianceScale => Perturbation::VarianceScale {
                    factor: args.magnitude.unwrap_or(4.0),
                },
                SimPerturbation::ArShift => Perturbation::ArShift {
                    a1: args.magnitude.unwrap_or(SHEDDER_A1),
                    a2: SHEDDER_A2,
                },
                SimPerturbation::Drift => Perturbation::Drift {
                    amount: args.magnitude.unwrap_or(1.5),
                },
            };
            SynthSpec::ChallengeLike(ChallengeSpec {
                days: args.days.unwrap_or(defaults.days),
                perturbation_day: args.perturbation_day.unwrap_or(defaults.perturbation_day),
                perturbation,
                seed: args.seed,
                ..defaults
            })
        }
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => spec_from_flags(args)?,
    };
    let (series, labels) = generate(&spec)?;
    let dir = out_dir(&args.out)?;
    io::write_series(&dir.join("series.csv"), &series)?;
    let intervals: Vec<[f64; 2]> = labels.iter().map(|b| [b.start, b.end]).collect();
    io::write_json(&dir.join("labels.json"), &json!({ "intervals": intervals }))?;
    io::write_json(&dir.join("spec.json"), &spec)?;
    println!(
        "{} samples, {} labelled intervals",
        series.len(),
        labels.len()
    );
    Ok(())
}
