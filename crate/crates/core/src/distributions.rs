//! Fibers of the material, t-material and X-material distributions and
//! their projections onto the body-time manifold.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{BodyPoint, Grid};
use crate::kernel::{
    null_columns_abs, project_rows, KernelError, NullspaceResult, PointSystem, Projection, Variant,
    LAMBDA, THETA_X,
};
use crate::law::ConstitutiveLaw;
use crate::mat3::Mat3;
use crate::sampling::AnalysisConfig;

/// Nullspace bases of the four kernel variants at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberBases {
    pub full: NullspaceResult,
    pub state_t: NullspaceResult,
    pub particle_x: NullspaceResult,
    pub isotropy: NullspaceResult,
}

/// Fiber dimensions at one point-instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberDims {
    pub point: BodyPoint,
    /// Material distribution at the identity.
    pub dim_full: usize,
    /// Body-material distribution: rank of the `(λ, Θⁱ)` rows of the full basis.
    pub dim_base: usize,
    pub dim_state_t: usize,
    /// t-body-material distribution: rank of the `Θⁱ` rows of the state-t basis.
    pub dim_state_t_base: usize,
    pub dim_particle_x: usize,
    /// X-body-material distribution: rank of the `λ` row of the particle-x basis.
    pub dim_particle_x_base: usize,
    /// Linearized symmetry algebra.
    pub dim_isotropy: usize,
    /// Kernel of the base projection restricted to the full fiber.
    pub dim_base_kernel: usize,
    /// `λ`-rank of the full fiber inside its `Θⁱ = 0` slice.
    pub particle_x_base_from_full: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberReport {
    pub dims: FiberDims,
    pub bases: FiberBases,
    /// Orthonormal `4 × dim_base` basis of the body-material fiber in `(t, x)`.
    pub base_directions: DMatrix<f64>,
}

impl FiberReport {
    pub fn point(&self) -> BodyPoint {
        self.dims.point
    }
}

impl FiberDims {
    /// Violated structural invariants, empty when the report is consistent.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        check(self.dim_base <= 4, "dim_base <= 4");
        check(self.dim_state_t_base <= 3, "dim_state_t_base <= 3");
        check(self.dim_particle_x_base <= 1, "dim_particle_x_base <= 1");
        check(
            self.dim_base >= self.dim_state_t_base.max(self.dim_particle_x_base),
            "dim_base >= max(dim_state_t_base, dim_particle_x_base)",
        );
        check(
            self.dim_full >= self.dim_isotropy,
            "dim_full >= dim_isotropy",
        );
        check(
            self.dim_full == self.dim_base + self.dim_base_kernel,
            "dim_full = dim_base + dim_base_kernel",
        );
        check(
            self.dim_base_kernel == self.dim_isotropy,
            "base-projection kernel equals the isotropy algebra",
        );
        check(
            self.dim_state_t <= self.dim_full && self.dim_particle_x <= self.dim_full,
            "sub-distributions embed in the full fiber",
        );
        check(
            self.dim_isotropy <= self.dim_state_t.min(self.dim_particle_x),
            "isotropy embeds in both sub-distributions",
        );
        check(
            self.particle_x_base_from_full == self.dim_particle_x_base,
            "particle-x base flag agrees with the full fiber",
        );
        v
    }
}

/// `λ`-rank of the full fiber restricted to `Θⁱ = 0`.
fn lambda_rank_in_theta_kernel(full: &DMatrix<f64>, tau: f64) -> Result<usize, KernelError> {
    if full.ncols() == 0 {
        return Ok(0);
    }
    let theta_rows = full.rows(THETA_X.start, THETA_X.len()).clone_owned();
    let slice = null_columns_abs(&theta_rows, tau)?;
    let lambda = full.rows(LAMBDA, 1) * slice;
    Ok(usize::from(lambda.amax() > tau))
}

/// Fiber report from pre-drawn samples.
pub fn fiber_report_with(
    law: &dyn ConstitutiveLaw,
    point: BodyPoint,
    training: &[Mat3],
    held_out: &[Mat3],
    cfg: &AnalysisConfig,
) -> Result<FiberReport, KernelError> {
    let system = PointSystem::build(law, point.t, point.x, training, held_out)?;
    let solve = |v| system.solve(v, cfg.tau_rank, cfg.tau_accept);
    let bases = FiberBases {
        full: solve(Variant::Full)?,
        state_t: solve(Variant::StateT)?,
        particle_x: solve(Variant::ParticleX)?,
        isotropy: solve(Variant::Isotropy)?,
    };

    let base =
        project_rows(&bases.full.basis, 0..4, cfg.tau_rank).map_err(|e| tag(e, Variant::Full))?;
    // State-t layout drops λ: its Θⁱ rows are 0..3.
    let state_base = project_rows(&bases.state_t.basis, 0..3, cfg.tau_rank)
        .map_err(|e| tag(e, Variant::StateT))?;
    let particle_base = project_rows(&bases.particle_x.basis, 0..1, cfg.tau_rank)
        .map_err(|e| tag(e, Variant::ParticleX))?;
    let from_full = lambda_rank_in_theta_kernel(&bases.full.basis, cfg.tau_rank)
        .map_err(|e| tag(e, Variant::Full))?;

    let dims = FiberDims {
        point,
        dim_full: bases.full.dim,
        dim_base: base.rank,
        dim_state_t: bases.state_t.dim,
        dim_state_t_base: state_base.rank,
        dim_particle_x: bases.particle_x.dim,
        dim_particle_x_base: particle_base.rank,
        dim_isotropy: bases.isotropy.dim,
        dim_base_kernel: base.kernel_dim,
        particle_x_base_from_full: from_full,
    };
    Ok(FiberReport {
        dims,
        bases,
        base_directions: base.directions,
    })
}

fn tag(e: KernelError, variant: Variant) -> KernelError {
    match e {
        KernelError::RankUnstable {
            sigma, threshold, ..
        } => KernelError::RankUnstable {
            variant: Some(variant),
            sigma,
            threshold,
        },
        other => other,
    }
}

/// All four fibers and projections at `(t, x)`; samples are shared between variants.
pub fn fiber_report(
    law: &dyn ConstitutiveLaw,
    t: f64,
    x: [f64; 3],
    cfg: &AnalysisConfig,
) -> Result<FiberReport, KernelError> {
    fiber_report_with(
        law,
        BodyPoint::new(t, x),
        &cfg.training_samples(),
        &cfg.held_out_samples(),
        cfg,
    )
}

/// Projected fiber of one variant at a point, in `(t, x¹, x², x³)` coordinates.
///
/// For [`Variant::StateT`] the time component is identically zero.
pub fn projected_fiber(
    law: &dyn ConstitutiveLaw,
    point: BodyPoint,
    variant: Variant,
    training: &[Mat3],
    held_out: &[Mat3],
    cfg: &AnalysisConfig,
) -> Result<Projection, KernelError> {
    let system = PointSystem::build(law, point.t, point.x, training, held_out)?;
    let ns = system.solve(variant, cfg.tau_rank, cfg.tau_accept)?;
    let (rows, offset) = match variant {
        Variant::Full => (0..4, 0),
        Variant::StateT => (0..3, 1),
        Variant::ParticleX => (0..1, 0),
        Variant::Isotropy => (0..0, 0),
    };
    let p = project_rows(&ns.basis, rows, cfg.tau_rank).map_err(|e| tag(e, variant))?;
    let mut directions = DMatrix::zeros(4, p.rank);
    for c in 0..p.rank {
        for r in 0..p.directions.nrows() {
            directions[(r + offset, c)] = p.directions[(r, c)];
        }
    }
    Ok(Projection { directions, ..p })
}

/// A grid point whose fiber could not be computed.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFailure {
    pub point: BodyPoint,
    pub error: KernelError,
}

pub type SweepEntry = Result<FiberReport, PointFailure>;

/// Fiber reports over a grid in grid order; failures are collected, not fatal.
///
/// Points are processed on the current rayon pool; the output order and
/// values do not depend on the number of workers.
pub fn grid_sweep(law: &dyn ConstitutiveLaw, grid: &Grid, cfg: &AnalysisConfig) -> Vec<SweepEntry> {
    let training = cfg.training_samples();
    let held_out = cfg.held_out_samples();
    grid.points
        .par_iter()
        .map(|&p| {
            fiber_report_with(law, p, &training, &held_out, cfg).map_err(|error| {
                log::warn!("fiber at {p:?} failed: {error}");
                PointFailure { point: p, error }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{AgingPair, HomogIsotropic, HomogPair};

    #[test]
    fn homog_pair_dims() {
        let r = fiber_report(
            &HomogPair,
            0.5,
            [0.3, -0.2, 0.1],
            &AnalysisConfig::default(),
        )
        .unwrap();
        let d = &r.dims;
        assert_eq!(
            (
                d.dim_full,
                d.dim_base,
                d.dim_state_t_base,
                d.dim_particle_x_base,
                d.dim_isotropy
            ),
            (7, 4, 3, 1, 3)
        );
        assert!(
            d.invariant_violations().is_empty(),
            "{:?}",
            d.invariant_violations()
        );
        assert_eq!(r.base_directions.shape(), (4, 4));
    }

    #[test]
    fn aging_pair_has_no_time_direction() {
        let r = fiber_report(
            &AgingPair::default(),
            0.0,
            [0.0; 3],
            &AnalysisConfig::default(),
        )
        .unwrap();
        assert_eq!(r.dims.dim_particle_x_base, 0);
        assert_eq!(r.dims.particle_x_base_from_full, 0);
        assert_eq!(r.dims.dim_base, 3);
        assert!(r.dims.invariant_violations().is_empty());
    }

    #[test]
    fn state_t_projection_has_no_time_component() {
        let cfg = AnalysisConfig::default();
        let p = projected_fiber(
            &HomogIsotropic,
            BodyPoint::new(0.0, [0.0; 3]),
            Variant::StateT,
            &cfg.training_samples(),
            &cfg.held_out_samples(),
            &cfg,
        )
        .unwrap();
        assert_eq!(p.rank, 3);
        assert!(p.directions.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sweep_flags_points_outside_domain() {
        let grid = Grid::from_points(vec![
            BodyPoint::new(0.0, [0.0; 3]),
            BodyPoint::new(0.0, [50.0, 0.0, 0.0]),
            BodyPoint::new(1.0, [0.0; 3]),
        ]);
        let sweep = grid_sweep(&HomogPair, &grid, &AnalysisConfig::default());
        assert_eq!(sweep.len(), 3);
        assert!(sweep[0].is_ok() && sweep[2].is_ok());
        let failure = sweep[1].as_ref().unwrap_err();
        assert_eq!(failure.point.x[0], 50.0);
    }

    #[test]
    fn single_point_sweep_matches_fiber_report() {
        let cfg = AnalysisConfig::default();
        let grid = Grid::from_points(vec![BodyPoint::new(0.2, [0.1, 0.0, 0.0])]);
        let sweep = grid_sweep(&HomogPair, &grid, &cfg);
        let direct = fiber_report(&HomogPair, 0.2, [0.1, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(sweep[0].as_ref().unwrap(), &direct);
    }
}
