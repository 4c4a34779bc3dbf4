//! Mixed graphical models and mixed VAR models estimated by l1-penalized
//! nodewise regression, with nodewise predictability measures, samplers and
//! network drawing.

#![allow(clippy::needless_range_loop)]

pub mod cv;
pub mod data;
pub mod design;
pub mod error;
pub mod mgm;
pub mod model_io;
pub mod mvar;
pub mod predictability;
pub mod rng;
pub mod sampler;
pub mod solver;
pub mod viz;
