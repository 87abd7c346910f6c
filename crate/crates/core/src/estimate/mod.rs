//! Distance estimation from overheard timings.

pub mod linalg;
pub mod passive;
pub mod tof;

pub use linalg::LinalgError;
pub use passive::{
    active_distance_from_t1_t3, gamma, intersect_locus_circle, loci, passive_bound_annulus, passive_bound_direct,
    CircleLocus, PassiveError, PassiveObservation, SumLocus,
};
pub use tof::{build_tof_system, cycle_senders, solve_tof, RingOrder, TofError, TofSolution, TofSystem, Unknown};
