mod common;

use common::{centered, cv_config};
use nalgebra::DMatrix;
use netpred_core::cv::Penalty;
use netpred_core::data::{marginal_distribution, Dataset, TimeIndex, VariableSpec};
use netpred_core::design::{encode_row, Predictor};
use netpred_core::error::Error;
use netpred_core::mgm::{fit_mgm, MgmConfig, NodeModel};
use netpred_core::model_io::NetworkModel;
use netpred_core::mvar::{fit_mvar, VarConfig};
use netpred_core::predictability::{
    accuracy, classify, evaluate, marginal_accuracy, normalized_accuracy, predict_gaussian,
    r_squared, SampleKind,
};
use netpred_core::rng::Stream;
use netpred_core::sampler::{chain_precision, population_r2, sample_ggm, simulate_var};
use netpred_core::solver::{CoefficientSet, Family};
use proptest::prelude::*;

proptest! {
    #[test]
    fn probabilities_sum_to_one(eta in prop::collection::vec(-1000.0f64..1000.0, 2..8)) {
        let (p, class) = classify(&eta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let best = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(p[class as usize - 1], best);
    }

    #[test]
    fn normalized_accuracy_increases_with_accuracy(
        a in 0.0f64..1.0, b in 0.0f64..1.0, m in 0.05f64..0.95,
    ) {
        prop_assume!(a < b);
        let marg = [m, 1.0 - m];
        prop_assert!(normalized_accuracy(a, &marg).unwrap() < normalized_accuracy(b, &marg).unwrap());
    }

    #[test]
    fn r_squared_is_shift_invariant(
        obs in prop::collection::vec(-10.0f64..10.0, 3..30),
        noise in prop::collection::vec(-1.0f64..1.0, 30),
        c in -100.0f64..100.0,
    ) {
        prop_assume!(obs.iter().any(|&v| (v - obs[0]).abs() > 1e-3));
        let pred: Vec<f64> = obs.iter().zip(&noise).map(|(o, e)| o + e).collect();
        let a = r_squared(&pred, &obs).unwrap();
        let ps: Vec<f64> = pred.iter().map(|v| v + c).collect();
        let os: Vec<f64> = obs.iter().map(|v| v + c).collect();
        prop_assert!((a - r_squared(&ps, &os).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn gaussian_predictions_match_dot_products() {
    let mut s = Stream::new(1, 0);
    for _ in 0..20 {
        let d = 1 + s.index_below(6);
        let betas: Vec<f64> = (0..d).map(|_| s.normal()).collect();
        let b0 = s.normal();
        let row: Vec<f64> = (0..d).map(|_| s.normal()).collect();
        let model = NodeModel {
            node: d,
            family: Family::Gaussian,
            predictors: (0..d)
                .map(|j| Predictor { variable: j, category: None, lag: 0, source: j })
                .collect(),
            coefficients: CoefficientSet {
                intercepts: vec![b0],
                betas: betas.iter().map(|&b| vec![b]).collect(),
                residual_sigma: Some(1.0),
            },
            lambda: 0.0,
            train_marginals: None,
        };
        let mut want = b0;
        for j in 0..d {
            want += betas[j] * row[j];
        }
        assert!((predict_gaussian(&model, &row).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn half_explained_variance() {
    let mut s = Stream::new(2, 0);
    let x: Vec<f64> = (0..100_000).map(|_| s.normal()).collect();
    let obs: Vec<f64> = x.iter().map(|v| v + s.normal()).collect();
    assert!((r_squared(&x, &obs).unwrap() - 0.5).abs() < 0.02);
}

#[test]
fn marginal_accuracy_equals_constant_modal_prediction() {
    let mut s = Stream::new(3, 0);
    for _ in 0..20 {
        let k = 2 + s.index_below(4);
        let counts: Vec<usize> = (0..k).map(|_| 1 + s.index_below(30)).collect();
        let codes: Vec<u32> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &m)| std::iter::repeat_n(c as u32 + 1, m))
            .collect();
        let marg = marginal_distribution(&codes, k as u32).unwrap();
        let modal = classify(&marg.iter().map(|p| p.ln()).collect::<Vec<_>>()).1;
        let acc = accuracy(&vec![modal; codes.len()], &codes).unwrap();
        assert!((marginal_accuracy(&marg) - acc).abs() < 1e-12);
    }
}

fn noise_dataset(seed: u64) -> Dataset {
    let mut s = Stream::new(seed, 0);
    let n = 60;
    let cont = |s: &mut Stream| (0..n).map(|_| s.normal()).collect::<Vec<f64>>();
    let cat = |s: &mut Stream, k: usize| (0..n).map(|i| (i % k + 1) as f64 + 0.0 * s.normal()).collect::<Vec<f64>>();
    let mut cols = vec![cont(&mut s), cont(&mut s), cat(&mut s, 3)];
    let mut c = cols[2].clone();
    s.shuffle(&mut c);
    cols[2] = c;
    Dataset::from_columns(
        vec![
            VariableSpec::continuous("a"),
            VariableSpec::continuous("b"),
            VariableSpec::categorical("c", 3),
        ],
        &cols,
    )
    .unwrap()
}

#[test]
fn null_nodes_have_zero_within_sample_predictability() {
    for seed in 0..10 {
        let d = centered(&noise_dataset(seed));
        let config = MgmConfig { penalty: Penalty::RelativeToMax { factor: 1.0 }, ..MgmConfig::default() };
        let m: NetworkModel = fit_mgm(&d, &config).unwrap().into();
        let r = evaluate(&m, &d, None, SampleKind::WithinSample).unwrap();
        assert!(r.nodes[0].r2.unwrap().abs() < 1e-12);
        assert!(r.nodes[1].r2.unwrap().abs() < 1e-12);
        assert!(r.nodes[2].ncc.unwrap().abs() < 1e-12);
    }
}

#[test]
fn neighbors_only_prediction_matches_full_row() {
    let d = centered(&sample_ggm(&chain_precision(6, 0.3), 300, 4).unwrap());
    let m = fit_mgm(&d, &cv_config(4)).unwrap();
    for nm in &m.node_models {
        let keep: Vec<usize> = nm.neighbors();
        for i in 0..20 {
            let row = d.row(i);
            let full = predict_gaussian(nm, &row).unwrap();
            let x = encode_row(&row, &nm.predictors).unwrap();
            let mut sparse = nm.coefficients.intercepts[0];
            for (c, p) in nm.predictors.iter().enumerate() {
                if keep.contains(&p.variable) {
                    sparse += nm.coefficients.betas[c][0] * x[c];
                }
            }
            assert!((full - sparse).abs() < 1e-12);
        }
    }
}

#[test]
fn out_of_sample_r2_tracks_the_population_value() {
    let prec = chain_precision(5, 0.4);
    let truth = population_r2(&prec).unwrap();
    let train = sample_ggm(&prec, 2000, 5).unwrap().center_continuous().unwrap();
    let test = sample_ggm(&prec, 2000, 6).unwrap();
    let test = test.center_with(train.centering().unwrap()).unwrap();
    let m: NetworkModel = fit_mgm(&train, &cv_config(5)).unwrap().into();
    let r = evaluate(&m, &test, None, SampleKind::OutOfSample).unwrap();
    for (j, node) in r.nodes.iter().enumerate() {
        assert!((node.r2.unwrap() - truth[j]).abs() < 0.05, "node {j}");
    }
}

#[test]
fn evaluation_guards() {
    let d = centered(&noise_dataset(1));
    let m: NetworkModel = fit_mgm(&d, &cv_config(1)).unwrap().into();

    let renamed = Dataset::from_columns(
        vec![
            VariableSpec::continuous("a"),
            VariableSpec::continuous("z"),
            VariableSpec::categorical("c", 3),
        ],
        &(0..3).map(|j| d.uncenter().column(j)).collect::<Vec<_>>(),
    )
    .unwrap();
    let err = evaluate(&m, &renamed.center_continuous().unwrap(), None, SampleKind::OutOfSample)
        .unwrap_err();
    assert!(matches!(err, Error::SpecMismatch(_)));

    let raw = noise_dataset(2);
    assert!(matches!(
        evaluate(&m, &raw, None, SampleKind::OutOfSample),
        Err(Error::NotCentered(_))
    ));
    assert!(matches!(
        evaluate(&m, &raw.center_continuous().unwrap(), None, SampleKind::OutOfSample),
        Err(Error::CenteringMismatch)
    ));
    let ok = raw.center_with(d.centering().unwrap()).unwrap();
    assert!(evaluate(&m, &ok, None, SampleKind::OutOfSample).is_ok());
}

#[test]
fn var_evaluation_uses_kept_rows() {
    let b = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.3, 0.5]);
    let d = centered(&simulate_var(&b, &[1.0, 1.0], 300, 3).unwrap());
    let time: Vec<TimeIndex> = (0..300).map(|i| TimeIndex { day: i / 30, beep: i % 30 }).collect();
    let m: NetworkModel = fit_mvar(&d, Some(&time), &VarConfig::default()).unwrap().into();
    let r = evaluate(&m, &d, Some(&time), SampleKind::WithinSample).unwrap();
    assert_eq!(r.n_rows, 290);
    assert!(r.nodes[0].r2.unwrap() > 0.2);
    let r_no_time = evaluate(&m, &d, None, SampleKind::WithinSample).unwrap();
    assert_eq!(r_no_time.n_rows, 299);
}
