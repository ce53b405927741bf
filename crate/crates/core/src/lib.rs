//! Decision-theoretic evaluation of binary probabilistic classifiers.
//!
//! A classifier that outputs probabilities is only as good as the decisions
//! made from it. Given a 2x2 utility matrix, the optimal rule thresholds the
//! true conditional probability at `t* = (U00 - U10) / UΔ`. A trained model
//! only approximates that probability, and the expected-utility gap to the
//! oracle rule (the *regret*) splits into two parts:
//!
//! * a **calibration** part, with a closed form in terms of the calibration
//!   curve, removable by recalibration or threshold adjustment;
//! * a **grouping** part, caused by the variance of the true probabilities
//!   within a score level set, bounded above and below in terms of that
//!   variance and removable only by post-training on features.
//!
//! The crate provides the estimators for both parts (equal-mass binning,
//! honest tree partitions of feature space), the post-training corrections
//! (isotonic/Platt/histogram recalibration, threshold adjustment, GLAR and
//! its threshold dual GLAT, logistic refit), and exact discrete oracle
//! distributions on which every quantity is computable in closed form —
//! including the extremal distributions that attain the bounds.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the companion CLI
//! crate carries file formats, plots and the command-line surface.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod binning;
pub mod dataset;
pub mod decision;
pub mod grouping;
mod math;
pub mod metrics;
pub mod recalibration;
pub mod regret;
pub mod rng;
pub mod synthetic;
