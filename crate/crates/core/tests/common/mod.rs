#![allow(dead_code)]

use nalgebra::DMatrix;
use netpred_core::cv::{CvConfig, Penalty};
use netpred_core::data::Dataset;
use netpred_core::mgm::{MgmConfig, Rule};
use netpred_core::rng::Stream;

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn cv_config(seed: u64) -> MgmConfig {
    MgmConfig {
        rule: Rule::Or,
        penalty: Penalty::CrossValidated(CvConfig {
            seed,
            ..CvConfig::default()
        }),
        ..MgmConfig::default()
    }
}

pub fn centered(d: &Dataset) -> Dataset {
    d.center_continuous().unwrap()
}

/// Random symmetric positive definite matrix with unit-ish diagonal.
pub fn random_spd(p: usize, seed: u64) -> DMatrix<f64> {
    let mut s = Stream::new(seed, 99);
    let a = DMatrix::from_fn(p, p, |_, _| s.normal());
    &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5
}
