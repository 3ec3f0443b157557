//! Planning toolkit for a fixed-wing relay aircraft that harvests all of its
//! power from a ground-based laser while downlinking data to a separate
//! ground station.
//!
//! The aircraft must stay airborne (it cannot hover), every joule it spends on
//! propulsion and transmission has to come out of the laser-harvested energy,
//! and the harvested power drops with the distance to the laser while the
//! downlink rate drops with the distance to the ground station. The planner
//! maximizes total downlink throughput over a finite horizon subject to that
//! energy balance.
//!
//! Modules, in dependency order:
//!
//! * [`model`] — scenario parameters, discrete-time kinematics, and the
//!   rate / harvest / propulsion bookkeeping shared by everything else.
//! * [`doublecircle`] — fast initial planner: a harvest circle above the
//!   laser and a communication circle above the ground station, joined by a
//!   tangent transition, with a lap-split search.
//! * [`waterfill`] — optimal transmit-power allocation along a fixed
//!   trajectory (water-filling with a bisected water level).
//! * [`convexsolver`] — the convex trajectory subproblem: safe linearizations
//!   plus a log-barrier interior-point solver specialized to the per-slot
//!   block structure.
//! * [`scp`] — safeguarded sequential convex programming over trajectories
//!   and the outer loop alternating between power and trajectory updates.
//!
//! The crate is `no_std`-compatible (it requires `alloc`): disable the
//! default `std` feature to use it without the standard library; float
//! transcendentals then come from `libm`.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod convexsolver;
pub mod doublecircle;
mod error;
pub(crate) mod math;
pub mod model;
pub mod scp;
pub(crate) mod vec2;
pub mod waterfill;

pub use error::{Error, Result};
