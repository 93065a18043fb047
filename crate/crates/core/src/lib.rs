//! Numerical analysis of evolving simple material bodies.
//!
//! Given a mechanical response `W(t, x, F)`, the crate computes fibers of the
//! material distributions by sampled nullspaces, classifies the evolution
//! (uniform remodeling, smooth remodeling, aging), searches for finite
//! material isomorphisms, traces foliation leaves and checks remodeling
//! processes against mass consistency.

pub mod builtin;
pub mod classify;
pub mod distributions;
pub mod dual;
pub mod foliation;
pub mod grid;
pub mod isomorph;
pub mod kernel;
pub mod law;
pub mod mat3;
pub mod remodel;
pub mod sampling;

pub use builtin::{build_law, builtin_registry, lookup, LawParams, BUILTIN_NAMES};
pub use classify::{classify, ClassificationReport, ClassifyError, Verdict};
pub use distributions::{
    fiber_report, grid_sweep, FiberDims, FiberReport, PointFailure, SweepEntry,
};
pub use foliation::{
    freeze_time_check, trace_leaf, FoliationError, FreezeTimeReport, LeafTrace, LeafVariant,
};
pub use grid::{BodyPoint, Grid};
pub use isomorph::{
    find_isomorphism, membership_test, symmetry_algebra, transitivity_probe, IsoError,
    MaterialIsomorphism, TransitivityEvidence,
};
pub use kernel::{KernelError, NullspaceResult, Variant};
pub use law::{ConstitutiveLaw, DomainBox, LawError, Response};
pub use mat3::Mat3;
pub use remodel::{
    check_membership, classify_growth, mass_consistency, velocity_gradient, GrowthClass,
    RemodelError, RemodelingProcess,
};
pub use sampling::AnalysisConfig;
