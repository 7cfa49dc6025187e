//! Secure energy-efficiency maximization for an RIS-aided multicast downlink
//! with eavesdroppers whose channels are known only statistically.
//!
//! The pipeline is split the same way the optimization is:
//!
//! * [`channel`] draws a trial (geometry, path loss, Rayleigh fading).
//! * [`objective`] evaluates the closed-form secrecy outage and the per-pair
//!   secure EE.
//! * [`pg`] updates the beamformer for fixed phases (path-following outer loop,
//!   quadratic transform, accelerated projected gradient).
//! * [`manifold`] updates the phases for a fixed beamformer (accelerated
//!   Riemannian ascent on a product of circles).
//! * [`orchestrator`] alternates the two per (user, eavesdropper) pair, runs
//!   pairs in parallel and keeps the worst one; it also hosts the baselines.
//! * [`oracle`] holds independent reference implementations used by tests.
//!
//! # Gradient convention
//!
//! For a real function `f` of a complex vector `x`, every gradient in this
//! crate is `df/dRe(x) + i df/dIm(x)`, which equals `2 df/dconj(x)`. With this
//! choice the first-order expansion is `f(x + d) = f(x) + Re(g^H d)`, so
//! `x + s g` is an ascent step for small `s > 0`.
//! [`oracle::fd_gradient`] builds the same quantity from central differences.

pub mod channel;
pub mod config;
pub mod error;
pub mod manifold;
pub mod objective;
pub mod oracle;
pub mod orchestrator;
pub mod pg;
pub mod rng;
pub mod types;
pub mod units;

pub use nalgebra;
pub use num_complex::Complex64;

pub type CVector = nalgebra::DVector<Complex64>;
pub type CMatrix = nalgebra::DMatrix<Complex64>;

pub use channel::{generate_trial, ChannelSet, EffectiveChannels};
pub use config::{validate_config, RawConfig, SystemConfig};
pub use error::{Error, Result};
pub use objective::{overall_objective, secure_ee, ObjectiveValue, SecrecyContext};
pub use orchestrator::{run_scheme, solve_p2, SchemeKind, SolveReport};
pub use types::{Beamformer, PhaseVector, PowerModel};
