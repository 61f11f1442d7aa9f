//! Special parabolic affine hyperspheres from a holomorphic function.
//!
//! Given `F(z1, .., zn)` holomorphic with `Im F_zz` invertible, the map
//! `z -> (Re z, Re F_z, 2 Im F - 2 <Re F_z, Im z>)` immerses the chart into
//! `R^(2n+1)` as a parabolic affine hypersphere with affine normal
//! `e_(2n+1)`. This crate evaluates that immersion and certifies its
//! geometric identities numerically.

pub mod cjet;
pub mod cli;
pub mod export;
pub mod expr;
pub mod skgeom;
pub mod verify;

pub use cjet::{fd_oracle, jet_eval, CJet};
pub use expr::{parse, EvalError, Expr, ParseError};
pub use skgeom::{eval_point, metric_bundle, nondegeneracy, GeomError, MetricBundle, PointData};
pub use verify::{run_suite, ChartWindow, Sampling, SuiteConfig, VerificationReport};
