//! Energy-minimizing resource allocation for multi-tier edge computing
//! networks built around a transmissive metasurface transceiver.
//!
//! The crate is organized bottom-up:
//!
//! * [`scenario`] holds the physical constants, geometry and seeded randomness.
//! * [`channel`] draws one frozen channel realization.
//! * [`sysmodel`] evaluates rates, energies and feasibility of an [`Allocation`].
//! * [`convexcore`] describes conic programs and solves them.
//! * [`solvers`] holds the block coordinate descent and its three blocks.
//! * [`benchmarks`] and [`harness`] run the comparison schemes and sweeps.

// The conic backend needs a LAPACK provider linked in.
extern crate openblas_src;

pub mod scenario;
pub mod channel;
pub mod sysmodel;
pub mod convexcore;
pub mod solvers;
pub mod benchmarks;
pub mod harness;

pub use sysmodel::Allocation;
