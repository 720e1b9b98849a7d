// SPDX-License-Identifier: Apache-2.0

use ccs_core::ccs::predict;
use ccs_core::dataset::{normalize_self, split, NormOptions, SplitSpec};
use ccs_core::eval::{evaluate, fit, sample_complexity_sweep, transfer_eval_split, FittedModel, Method, MethodConfig};
use ccs_core::exec::Sequential;
use ccs_core::synthetic::{generate, generate_pair_family, truth_direction, SynthConfig};

fn lr_test_accuracy(cfg: &SynthConfig) -> f64 {
    let ds = generate(cfg).unwrap();
    let (train, test) = split(&ds, &SplitSpec::default()).unwrap();
    let m = MethodConfig::default();
    let model = fit(Method::Lr, &train, &m, &Sequential).unwrap();
    evaluate(&model, &test, m.norm_mode, m.norm).unwrap().0
}

#[test]
fn supervised_ceiling_tracks_separation() {
    let chance = lr_test_accuracy(&SynthConfig {
        sep: 0.0,
        ..SynthConfig::default()
    });
    assert!((0.45..=0.55).contains(&chance), "sep 0: {chance}");
    let easy = lr_test_accuracy(&SynthConfig::default());
    assert!(easy >= 0.95, "sep 3: {easy}");
}

fn class_mean_gap(m: &ccs_core::Matrix<f32>, other: &ccs_core::Matrix<f32>) -> Vec<f64> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|j| {
            (0..m.rows())
                .map(|i| f64::from(m.get(i, j)) - f64::from(other.get(i, j)))
                .sum::<f64>()
                / n
        })
        .collect()
}

#[test]
fn normalization_removes_the_answer_offset() {
    let cfg = SynthConfig::default();
    let raw = generate(&cfg).unwrap();
    let t = truth_direction(&cfg);
    // Mean of pos − neg is the offset plus a small multiple of t from label
    // imbalance; removing the t part leaves label_offset · u.
    let gap = class_mean_gap(raw.pos(), raw.neg());
    let along_t: f64 = gap.iter().zip(&t).map(|(g, x)| g * x).sum();
    let u_raw: Vec<f64> = gap.iter().zip(&t).map(|(g, x)| g - along_t * x).collect();
    let size = u_raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((size - cfg.label_offset).abs() < 0.5, "offset norm {size}");
    let u: Vec<f64> = u_raw.iter().map(|x| x / size).collect();

    let normed = normalize_self(&raw, NormOptions::default()).unwrap();
    let gap = class_mean_gap(normed.pos(), normed.neg());
    let along_u: f64 = gap.iter().zip(&u).map(|(g, x)| g * x).sum();
    assert!(along_u.abs() < 0.05, "{along_u}");
}

#[test]
fn generation_is_seed_deterministic() {
    let cfg = SynthConfig {
        n: 50,
        d: 8,
        ..SynthConfig::default()
    };
    assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    let other = SynthConfig { data_seed: 2, ..cfg };
    assert_ne!(generate(&cfg).unwrap().pos(), generate(&other).unwrap().pos());
}

#[test]
fn family_of_one_is_plain_generation() {
    let cfg = SynthConfig {
        n: 40,
        d: 6,
        ..SynthConfig::default()
    };
    let single = generate(&cfg).unwrap();
    for shared in [true, false] {
        let fam = generate_pair_family(&cfg, shared, 1).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].pos(), single.pos());
        assert_eq!(fam[0].neg(), single.neg());
        assert_eq!(fam[0].labels(), single.labels());
    }
}

#[test]
fn ccs_recovers_the_truth_direction() {
    let cfg = SynthConfig {
        n: 400,
        d: 16,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let (train, test) = split(&ds, &SplitSpec::default()).unwrap();
    let m = MethodConfig::default();
    let model = fit(Method::Ccs, &train, &m, &Sequential).unwrap();
    let (acc, _) = evaluate(&model, &test, m.norm_mode, m.norm).unwrap();
    assert!(acc >= 0.95, "{acc}");
    let FittedModel::Ccs { probe, loss } = &model else { unreachable!() };
    assert!(*loss < 0.05, "{loss}");
    let t = truth_direction(&cfg);
    let norm = probe.theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos: f64 = probe.theta.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / norm;
    assert!(cos.abs() > 0.9, "cos {cos}");
    // Confident predictions on held-out pairs.
    let p = predict(probe, &test).unwrap();
    let confident = p.p_tilde.iter().filter(|&&x| (x - 0.5).abs() > 0.4).count();
    assert!(confident * 10 >= p.p_tilde.len() * 8);
}

#[test]
fn unsupervised_methods_all_solve_the_easy_case() {
    let cfg = SynthConfig {
        n: 400,
        d: 16,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let (train, test) = split(&ds, &SplitSpec::default()).unwrap();
    let m = MethodConfig::default();
    for method in [Method::Tpc, Method::Bss] {
        let model = fit(method, &train, &m, &Sequential).unwrap();
        let (acc, _) = evaluate(&model, &test, m.norm_mode, m.norm).unwrap();
        assert!(acc >= 0.95, "{method}: {acc}");
    }
}

#[test]
fn transfer_diagonal_is_the_no_transfer_row() {
    let cfg = SynthConfig {
        n: 300,
        d: 12,
        ..SynthConfig::default()
    };
    let fam = generate_pair_family(&cfg, true, 3).unwrap();
    let m = transfer_eval_split(&fam, &SplitSpec::default(), Method::Tpc, &MethodConfig::default(), &Sequential).unwrap();
    assert_eq!(m.rows.len(), 4);
    for j in 0..3 {
        assert_eq!(m.values[j][j], m.no_transfer_row()[j]);
        for i in 0..3 {
            assert!(m.values[i][j].unwrap() >= 0.9);
        }
    }
}

#[test]
fn single_dataset_transfer_is_plain_evaluation() {
    let cfg = SynthConfig {
        n: 200,
        d: 8,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let mc = MethodConfig::default();
    let m = transfer_eval_split(std::slice::from_ref(&ds), &SplitSpec::default(), Method::Tpc, &mc, &Sequential).unwrap();
    let (train, test) = split(&ds, &SplitSpec::default()).unwrap();
    let model = fit(Method::Tpc, &train, &mc, &Sequential).unwrap();
    let (acc, _) = evaluate(&model, &test, mc.norm_mode, mc.norm).unwrap();
    assert_eq!(m.values, vec![vec![Some(acc)], vec![Some(acc)]]);
}

#[test]
fn sweep_at_full_size_reproduces_plain_training() {
    let cfg = SynthConfig {
        n: 100,
        d: 6,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let mut mc = MethodConfig::default();
    mc.ccs.epochs = 100;
    mc.ccs.restarts = 3;
    let spec = SplitSpec::default();
    let (train, test) = split(&ds, &spec).unwrap();
    let k = train.n();
    let curve = sample_complexity_sweep(&ds, Method::Ccs, &[k], 1, &spec, 5, &mc, &Sequential).unwrap();
    // The sweep normalizes with the training-split statistics, as fit does.
    let model = fit(Method::Ccs, &train, &mc, &Sequential).unwrap();
    let (acc, _) = evaluate(&model, &test, mc.norm_mode, mc.norm).unwrap();
    assert_eq!(curve.mean_acc, vec![acc]);

    let again = sample_complexity_sweep(&ds, Method::Ccs, &[1, 4, k], 3, &spec, 5, &mc, &Sequential).unwrap();
    let twice = sample_complexity_sweep(&ds, Method::Ccs, &[1, 4, k], 3, &spec, 5, &mc, &Sequential).unwrap();
    assert_eq!(again, twice);
    assert!(again.mean_acc.iter().all(|&a| a >= 0.5));
    assert!(sample_complexity_sweep(&ds, Method::Ccs, &[k + 1], 1, &spec, 5, &mc, &Sequential).is_err());
}
