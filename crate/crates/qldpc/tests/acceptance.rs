//! The eight acceptance criteria, one test per criterion. Each prints a
//! single machine-greppable PASS/FAIL line (run with `--nocapture` to see
//! the PASS lines; failures always surface their line and panic message).

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};

use qldpc::analysis::{
    self, combine_bases, estimate_ler, extrapolate, fit_subthreshold, fit_threshold, per_cycle,
    subthreshold_fit_from_params, LerPoint,
};
use qldpc::circuit::{build_memory_experiment, Basis};
use qldpc::codes::{
    estimate_min_distance, exhaustive_min_distance, hgp_family_instance, lp_family_instance,
    sc_hgp, surface_code, ScSpec,
};
use qldpc::config::ExperimentConfig;
use qldpc::decoder::{BpConfig, OsdConfig, WindowedDecoder};
use qldpc::distill::{fold_bell_noise, folded_oracle, two_sided_oracle, FoldedNoise};
use qldpc::pauli_engine::{
    build_detector_model, propagate_pauli, raw_mechanisms, sample_circuit_shots, sample_shots,
};
use qldpc::runner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(n: usize, name: &str, f: impl FnOnce() + UnwindSafe) {
    match catch_unwind(f) {
        Ok(()) => println!("ACCEPTANCE {n} ({name}): PASS"),
        Err(e) => {
            println!("ACCEPTANCE {n} ({name}): FAIL");
            resume_unwind(e);
        }
    }
}

#[test]
fn criterion_1_code_parameter_reproduction() {
    check(1, "code parameters", || {
        let expect = [(225, 9, 4), (625, 25, 6), (1225, 49, 8)];
        for (i, (n, k, d)) in expect.into_iter().enumerate() {
            let code = hgp_family_instance(i + 1, 7).unwrap();
            assert_eq!((code.n, code.k), (n, k), "HGP instance {}", i + 1);
            // The construction proves d exactly (Tillich-Zemor with
            // full-row-rank factors and exhaustively verified classical
            // distances); cross-check that a randomized logical search
            // does not beat it.
            assert_eq!(code.d_upper, Some(d), "HGP instance {} distance", i + 1);
            assert_eq!(estimate_min_distance(&code, 2000, 5), Some(d));
        }
        let expect = [(544, 80), (714, 100), (1020, 136), (1428, 184)];
        for (i, (n, k)) in expect.into_iter().enumerate() {
            let code = lp_family_instance(i + 1).unwrap();
            assert_eq!((code.n, code.k), (n, k), "LP instance {}", i + 1);
        }
    });
}

#[test]
fn criterion_2_toric_sc_sanity() {
    check(2, "toric SC construction", || {
        for d in 2..=4usize {
            let spec = ScSpec::toric(d);
            let code = sc_hgp(&spec).unwrap();
            assert_eq!((code.n, code.k), (2 * d * d, 2), "toric d={d}");
            assert_eq!(exhaustive_min_distance(&code, d), Some(d), "toric d={d} distance");
            assert!(spec.k_lower_bound() <= code.k, "K bound, toric d={d}");
        }
    });
}

#[test]
fn criterion_3_oracle_equivalence() {
    check(3, "noise-folding oracle", || {
        let fold = fold_bell_noise(0.05).unwrap();
        assert!((fold - 0.0966667).abs() < 1e-7, "fold_bell_noise(0.05) = {fold}");
        let code = surface_code(3).unwrap();
        for (i, (p_bell, p_gate)) in
            [(0.05, 0.0), (0.05, 0.001), (0.10, 0.001)].into_iter().enumerate()
        {
            let noise = FoldedNoise::new(p_bell, p_gate).unwrap();
            let shots = 100_000;
            let two = two_sided_oracle(&code, &noise, shots, 1000 + i as u64).unwrap();
            let fld = folded_oracle(&code, &noise, shots, 2000 + i as u64).unwrap();
            let se = (two.stderr.powi(2) + fld.stderr.powi(2)).sqrt();
            let z = (two.rate - fld.rate).abs() / se;
            assert!(
                z < 3.0,
                "({p_bell},{p_gate}): two-sided {} vs folded {} is {z:.2} sigma",
                two.rate,
                fld.rate
            );
        }
    });
}

#[test]
fn criterion_4_decoder_exactness() {
    check(4, "decoder exactness", || {
        let code = surface_code(3).unwrap();
        let noise = FoldedNoise::from_effective(0.002, 0.002).unwrap();
        let circuit = build_memory_experiment(&code, Basis::Z, 14, 3, &noise, 0.0);
        let model = build_detector_model(&circuit).unwrap();
        let decoder = WindowedDecoder::new(
            &model,
            14,
            3,
            12,
            BpConfig::default(),
            OsdConfig { order: 0, sweep: 10 },
        )
        .unwrap();

        // Every single-fault mechanism decodes to the right logical action.
        for (g, m) in model.mechanisms.iter().enumerate() {
            let mut syn = vec![0u8; model.n_detectors];
            for &d in &m.detectors {
                syn[d as usize] = 1;
            }
            let out = decoder.decode(&syn).unwrap();
            let mut want = vec![0u8; model.n_observables];
            for &l in &m.observables {
                want[l as usize] ^= 1;
            }
            assert_eq!(out.predicted_observables, want, "mechanism {g} mis-decoded");
        }

        // The decoded correction reproduces the syndrome exactly on 1e5
        // random syndromes drawn from the model's own distribution.
        let shots = 100_000;
        let batch = sample_shots(&model, shots, 42);
        for s in 0..shots {
            let mut syn = vec![0u8; model.n_detectors];
            for (d, bit) in syn.iter_mut().enumerate() {
                *bit = batch.detector_bit(s, d) as u8;
            }
            let out = decoder.decode(&syn).unwrap();
            let mut resid = syn;
            for &g in &out.correction {
                for &d in &model.mechanisms[g as usize].detectors {
                    resid[d as usize] ^= 1;
                }
            }
            assert!(resid.iter().all(|&b| b == 0), "shot {s}: correction misses syndrome");
        }
    });
}

fn crossing_config(index: usize, out: &std::path::Path) -> ExperimentConfig {
    // The [[225,9]] code decodes ~5x faster than [[625,25]], so it gets a
    // tighter stderr target; both are well inside the 0.2 the claim requires.
    let (shots, block, target) = if index == 1 { (800, 50, 0.07) } else { (250, 25, 0.13) };
    let text = format!(
        r#"
[code]
family = "hgp"
index = {index}
seed = 7

[noise]
sweep = [0.08, 0.12]
mode = "bell"
p_gate = 0.002

[schedule]
rounds = 14
cycles_per_round = 3
bases = ["z"]

[run]
shots = {shots}
seed = 55
out = "{}"
block_size = {block}
adaptive = true
target_rel_stderr = {target}
"#,
        out.display()
    );
    let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn criterion_5_threshold_crossing() {
    check(5, "threshold crossing", || {
        let dir = tempfile::tempdir().unwrap();
        let cycles = 42;
        let per_cycle_of = |index: usize| -> Vec<(f64, f64, f64)> {
            let cfg = crossing_config(index, &dir.path().join(format!("hgp{index}")));
            let out = runner::run_experiment(&cfg).unwrap();
            out.points
                .iter()
                .map(|r| {
                    let pt = LerPoint::new(&r.code, r.p, r.shots, r.failures, cycles, 0.0);
                    (r.p, pt.per_cycle_ler(), pt.per_cycle_stderr())
                })
                .collect()
        };
        let small = per_cycle_of(1);
        let large = per_cycle_of(2);
        // Below the crossing the larger code wins, above it the smaller one;
        // the threshold sits near p'_bell ~ 10%.
        let (p_lo, lo_small, _) = small[0];
        let (_, lo_large, _) = large[0];
        let (p_hi, hi_small, _) = small[1];
        let (_, hi_large, _) = large[1];
        assert!(
            lo_large < lo_small,
            "at p'={p_lo}: [[625,25]] per-cycle {lo_large} should beat [[225,9]] {lo_small}"
        );
        assert!(
            hi_large > hi_small,
            "at p'={p_hi}: [[625,25]] per-cycle {hi_large} should trail [[225,9]] {hi_small}"
        );
    });
}

#[test]
fn criterion_6_fit_machinery() {
    check(6, "fit machinery", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Threshold ansatz: recover p_th within 5% at 1% multiplicative noise.
        let (a, b, c, p_th, alpha) = (0.05, 0.1, 0.05, 0.10, 1.5);
        let mut points = Vec::new();
        for d in [4usize, 6, 8] {
            for i in 0..9 {
                let p = 0.08 + 0.005 * i as f64;
                let x = (p - p_th) * (d as f64).powf(alpha);
                let y = (a + b * x + c * x * x) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0));
                let shots = 1_000_000_000_000u64;
                let failures = (y * shots as f64).round() as u64;
                points.push(LerPoint::new(&format!("d{d}"), p, shots, failures, 1, d as f64));
            }
        }
        let fit = fit_threshold(&points).unwrap();
        let got = fit.param("p_th").unwrap();
        assert!((got - p_th).abs() / p_th < 0.05, "p_th {got} vs {p_th}");

        // Subthreshold ansatz: recover (0.26, 0.26, 0.44, 0.087) within 10%.
        let (a, b, c, p_th) = (0.26, 0.26, 0.44, 0.087);
        let mut points = Vec::new();
        for n in [128usize, 512, 2048] {
            for i in 0..7 {
                let p = 0.02 + 0.006 * i as f64;
                let y = a * (p / p_th).powf(b * (n as f64).powf(c));
                let y = y * (1.0 + 0.01 * rng.gen_range(-1.0..1.0));
                let shots = 1_000_000_000_000u64;
                let failures = (y * shots as f64).round().max(1.0) as u64;
                points.push(LerPoint::new(&format!("n{n}"), p, shots, failures, 1, n as f64));
            }
        }
        let fit = fit_subthreshold(&points).unwrap();
        for (name, want) in [("A", a), ("B", b), ("C", c), ("p_th", p_th)] {
            let got = fit.param(name).unwrap();
            assert!((got - want).abs() / want < 0.10, "{name}: {got} vs {want}");
        }

        // Extrapolation from previously fitted parameters reproduces the
        // reference values at their quoted precision.
        let sc = subthreshold_fit_from_params(0.26, 0.26, 0.44, 0.087);
        let v = extrapolate(&sc, 0.01, 5800).unwrap();
        assert!((v - 2.260230476266085e-12).abs() / v < 1e-9, "SC extrapolation {v}");
        assert!((v - 2.3e-12).abs() / 2.3e-12 < 0.05, "table value 2.3e-12 vs {v}");
        let lp = subthreshold_fit_from_params(0.026, 0.05, 0.79, 0.094);
        let v = extrapolate(&lp, 0.01, 1428).unwrap();
        assert!((v - 2.0e-17).abs() / 2.0e-17 < 0.005, "table value 2.0e-17 vs {v}");
    });
}

#[test]
fn criterion_7_engine_cross_validation() {
    check(7, "engine cross-validation", || {
        let code = surface_code(3).unwrap();
        let noise = FoldedNoise::from_effective(0.01, 0.002).unwrap();
        let circuit = build_memory_experiment(&code, Basis::Z, 4, 3, &noise, 0.0);
        assert!(circuit.n_noise_sites() <= 10_000, "{} sites", circuit.n_noise_sites());
        for (i, raw) in raw_mechanisms(&circuit).unwrap().iter().enumerate() {
            let (dets, obs) = propagate_pauli(&circuit, raw.instruction, &raw.flips);
            assert_eq!(dets, raw.detectors, "raw mechanism {i} detectors");
            assert_eq!(obs, raw.observables, "raw mechanism {i} observables");
        }
        // A noiseless circuit has deterministic detectors.
        let quiet = FoldedNoise::from_effective(0.0, 0.0).unwrap();
        let circuit = build_memory_experiment(&code, Basis::Z, 4, 3, &quiet, 0.0);
        let batch = sample_circuit_shots(&circuit, 10_000, 7);
        for s in 0..10_000 {
            assert!(
                batch.detector_row(s).iter().all(|&w| w == 0),
                "noiseless shot {s} fired a detector"
            );
        }
    });
}

#[test]
fn criterion_8_per_cycle_and_error_bars() {
    check(8, "per-cycle formulas", || {
        let v = per_cycle(0.42, 42);
        assert!((v - 0.012885950599570206).abs() < 1e-9, "per_cycle(0.42,42) = {v}");
        let (p, se) = estimate_ler(100, 50);
        assert!((p - 0.5).abs() < 1e-15);
        assert!((se - 0.05).abs() < 1e-9, "stderr(50,100) = {se}");
        // The combined-basis identity behind the reported p_tot values.
        assert!((combine_bases(0.1, 0.2) - 0.28).abs() < 1e-15);
        assert!((analysis::per_cycle(0.0, 5)).abs() < 1e-15);
    });
}
