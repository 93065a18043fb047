//! Leaves of the body-material and state-t foliations, traced by integrating
//! the projected distributions with RK4.
//!
//! A leaf is reported as point clouds along chosen direction fields. The
//! field through a point is the unit vector of the projected fiber closest to
//! the previous direction, so a trace never flips orientation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::projected_fiber;
use crate::grid::BodyPoint;
use crate::kernel::{null_columns_abs, KernelError, Variant};
use crate::law::ConstitutiveLaw;
use crate::mat3::Mat3;
use crate::sampling::AnalysisConfig;

/// Tolerance multiple of the step for the freeze-time comparison.
pub const FREEZE_TOLERANCE_STEPS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafVariant {
    /// Leaves of the body-material distribution in `(t, x)`.
    BodyMaterial,
    /// Leaves of the t-body-material distribution inside one instant.
    StateT,
}

impl LeafVariant {
    pub fn kernel_variant(self) -> Variant {
        match self {
            LeafVariant::BodyMaterial => Variant::Full,
            LeafVariant::StateT => Variant::StateT,
        }
    }
}

impl std::str::FromStr for LeafVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "body_material" => Ok(LeafVariant::BodyMaterial),
            "state_t" => Ok(LeafVariant::StateT),
            other => Err(format!(
                "unknown leaf variant `{other}` (expected body_material or state_t)"
            )),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoliationError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("fiber dimension changed from {expected} to {found} at {at:?} (step {step})")]
    SingularCrossing {
        at: BodyPoint,
        expected: usize,
        found: usize,
        step: usize,
    },
    #[error("trace left the domain at {at:?} (step {step})")]
    DomainExit { at: BodyPoint, step: usize },
    #[error("projected fiber is zero-dimensional at {at:?}; no leaf to trace")]
    NoLeaf { at: BodyPoint },
    #[error("direction {index} is orthogonal to the projected fiber")]
    DirectionOutsideFiber { index: usize },
    #[error("invalid trace parameter: {0}")]
    BadParameter(String),
}

/// One direction traced forward (`sign = 1`) or backward (`sign = -1`) from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Unit direction at the seed in `(t, x¹, x², x³)`.
    pub direction: [f64; 4],
    pub sign: i8,
    /// Seed first; consecutive points are one step apart.
    pub points: Vec<BodyPoint>,
    pub pointwise_dim: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafTrace {
    pub seed_point: BodyPoint,
    pub variant: LeafVariant,
    pub step: f64,
    pub steps: usize,
    pub branches: Vec<Branch>,
}

impl LeafTrace {
    /// All sampled points; the seed appears once.
    pub fn points(&self) -> Vec<BodyPoint> {
        let mut out = vec![self.seed_point];
        for b in &self.branches {
            out.extend(b.points.iter().skip(1).copied());
        }
        out
    }

    /// Largest deviation of coordinate `axis` (0 = t, 1..=3 = xⁱ) from `value`.
    pub fn max_coordinate_drift(&self, axis: usize, value: f64) -> f64 {
        self.points()
            .iter()
            .map(|p| (p.coords()[axis] - value).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `branch,step,t,x1,x2,x3,dim`; branch is `<index><sign>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["branch", "step", "t", "x1", "x2", "x3", "dim"])?;
        for (k, b) in self.branches.iter().enumerate() {
            let label = format!("{}{}", k / 2, if b.sign > 0 { '+' } else { '-' });
            for (s, (p, d)) in b.points.iter().zip(&b.pointwise_dim).enumerate() {
                w.write_record([
                    label.clone(),
                    s.to_string(),
                    p.t.to_string(),
                    p.x[0].to_string(),
                    p.x[1].to_string(),
                    p.x[2].to_string(),
                    d.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Projected fibers along a trace, with samples fixed for the whole trace.
struct FiberField<'a> {
    law: &'a dyn ConstitutiveLaw,
    variant: LeafVariant,
    training: Vec<Mat3>,
    held_out: Vec<Mat3>,
    cfg: &'a AnalysisConfig,
}

impl FiberField<'_> {
    fn directions(&self, p: BodyPoint) -> Result<DMatrix<f64>, KernelError> {
        let proj = projected_fiber(
            self.law,
            p,
            self.variant.kernel_variant(),
            &self.training,
            &self.held_out,
            self.cfg,
        )?;
        Ok(proj.directions)
    }

    /// Unit vector of the fiber at `p` closest to `reference`, and the fiber rank.
    fn field(
        &self,
        p: BodyPoint,
        reference: &DVector<f64>,
        expected: usize,
        step: usize,
    ) -> Result<DVector<f64>, FoliationError> {
        if !self.law.domain().contains(p.t, &p.x) {
            return Err(FoliationError::DomainExit { at: p, step });
        }
        let d = self.directions(p)?;
        if d.ncols() != expected {
            return Err(FoliationError::SingularCrossing {
                at: p,
                expected,
                found: d.ncols(),
                step,
            });
        }
        let v = &d * (d.transpose() * reference);
        let n = v.norm();
        if n < 1e-8 {
            return Err(FoliationError::SingularCrossing {
                at: p,
                expected,
                found: 0,
                step,
            });
        }
        Ok(v / n)
    }
}

fn offset(p: BodyPoint, v: &DVector<f64>, h: f64) -> BodyPoint {
    let c = p.coords();
    BodyPoint::from_coords([
        c[0] + h * v[0],
        c[1] + h * v[1],
        c[2] + h * v[2],
        c[3] + h * v[3],
    ])
}

fn trace_branch(
    field: &FiberField<'_>,
    seed: BodyPoint,
    start: DVector<f64>,
    dim: usize,
    steps: usize,
    h: f64,
) -> Result<(Vec<BodyPoint>, Vec<usize>), FoliationError> {
    let mut points = vec![seed];
    let mut p = seed;
    let mut k1 = start;
    for s in 1..=steps {
        let k2 = field.field(offset(p, &k1, 0.5 * h), &k1, dim, s)?;
        let k3 = field.field(offset(p, &k2, 0.5 * h), &k1, dim, s)?;
        let k4 = field.field(offset(p, &k3, h), &k1, dim, s)?;
        let incr = (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) / 6.0;
        p = offset(p, &incr, h);
        k1 = field.field(p, &k1, dim, s)?;
        points.push(p);
    }
    let dims = vec![dim; points.len()];
    Ok((points, dims))
}

/// Traces the leaf through `seed` along each of `directions` (both orientations).
///
/// Directions are given in `(t, x¹, x², x³)` and projected onto the seed
/// fiber; an empty list uses the fiber's own orthonormal basis.
pub fn trace_leaf(
    law: &dyn ConstitutiveLaw,
    seed: BodyPoint,
    variant: LeafVariant,
    directions: &[[f64; 4]],
    steps: usize,
    step: f64,
    cfg: &AnalysisConfig,
) -> Result<LeafTrace, FoliationError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(FoliationError::BadParameter(format!(
            "step must be positive, got {step}"
        )));
    }
    if !law.domain().contains(seed.t, &seed.x) {
        return Err(FoliationError::DomainExit { at: seed, step: 0 });
    }
    let field = FiberField {
        law,
        variant,
        training: cfg.training_samples(),
        held_out: cfg.held_out_samples(),
        cfg,
    };
    let basis = field.directions(seed)?;
    let dim = basis.ncols();
    if dim == 0 {
        return Err(FoliationError::NoLeaf { at: seed });
    }

    let mut starts: Vec<DVector<f64>> = Vec::new();
    if directions.is_empty() {
        starts.extend(basis.column_iter().map(|c| c.into_owned()));
    } else {
        for (index, d) in directions.iter().enumerate() {
            let d = DVector::from_row_slice(d);
            let v = &basis * (basis.transpose() * &d);
            if v.norm() <= 1e-8 * d.norm().max(f64::MIN_POSITIVE) {
                return Err(FoliationError::DirectionOutsideFiber { index });
            }
            starts.push(v.normalize());
        }
    }

    let jobs: Vec<(DVector<f64>, i8)> = starts
        .iter()
        .flat_map(|v| [(v.clone(), 1i8), (-v, -1i8)])
        .collect();
    let traced: Vec<Result<Branch, FoliationError>> = jobs
        .par_iter()
        .map(|(v, sign)| {
            let (points, pointwise_dim) = trace_branch(&field, seed, v.clone(), dim, steps, step)?;
            let s = f64::from(*sign);
            Ok(Branch {
                direction: [s * v[0], s * v[1], s * v[2], s * v[3]],
                sign: *sign,
                points,
                pointwise_dim,
            })
        })
        .collect();
    let branches = traced.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(LeafTrace {
        seed_point: seed,
        variant,
        step,
        steps,
        branches,
    })
}

/// Body leaf sliced at the seed instant compared with the state leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreezeTimeReport {
    pub seed: BodyPoint,
    pub step: f64,
    pub steps: usize,
    pub body_slice_points: usize,
    pub state_points: usize,
    pub hausdorff: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Symmetric Hausdorff distance between finite point sets; infinite if exactly one is empty.
pub fn hausdorff(a: &[BodyPoint], b: &[BodyPoint]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let directed = |from: &[BodyPoint], to: &[BodyPoint]| {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| p.distance(q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

const SPATIAL_AXES: [[f64; 4]; 3] = [
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Spatial axes projected onto `span ∩ {dt = 0}`, dropping those orthogonal to it.
fn instant_directions(span: &DMatrix<f64>, tau: f64) -> Result<Vec<[f64; 4]>, KernelError> {
    if span.ncols() == 0 {
        return Ok(Vec::new());
    }
    let t_row = span.rows(0, 1).clone_owned();
    let slice = span * null_columns_abs(&t_row, tau)?;
    Ok(SPATIAL_AXES
        .iter()
        .filter_map(|e| {
            let v = &slice * (slice.transpose() * DVector::from_row_slice(e));
            (v.norm() > 1e-8).then(|| [v[0], v[1], v[2], v[3]])
        })
        .collect())
}

/// Checks that the body leaf restricted to the seed instant recovers the state leaf.
///
/// Both leaves are traced along the spatial axes projected onto the
/// respective fibers at the seed, for `steps` steps of size `step`.
pub fn freeze_time_check(
    law: &dyn ConstitutiveLaw,
    seed: BodyPoint,
    steps: usize,
    step: f64,
    cfg: &AnalysisConfig,
) -> Result<FreezeTimeReport, FoliationError> {
    let training = cfg.training_samples();
    let held_out = cfg.held_out_samples();
    let fiber = |v| projected_fiber(law, seed, v, &training, &held_out, cfg);
    let body_span = fiber(Variant::Full)?.directions;
    let state_span = fiber(Variant::StateT)?.directions;

    let tolerance = FREEZE_TOLERANCE_STEPS * step;
    let report = |body: Vec<BodyPoint>, state: Vec<BodyPoint>| {
        let d = hausdorff(&body, &state);
        FreezeTimeReport {
            seed,
            step,
            steps,
            body_slice_points: body.len(),
            state_points: state.len(),
            hausdorff: d,
            tolerance,
            passed: d <= tolerance,
        }
    };
    let body_dirs = instant_directions(&body_span, cfg.tau_rank)?;
    let body = if body_dirs.is_empty() {
        vec![seed]
    } else {
        let trace = trace_leaf(
            law,
            seed,
            LeafVariant::BodyMaterial,
            &body_dirs,
            steps,
            step,
            cfg,
        )?;
        slice_at(&trace, seed.t, step)
    };
    if state_span.ncols() == 0 {
        return Ok(report(body, vec![seed]));
    }
    let state_dirs = instant_directions(&state_span, cfg.tau_rank)?;
    let state = trace_leaf(
        law,
        seed,
        LeafVariant::StateT,
        &state_dirs,
        steps,
        step,
        cfg,
    )?
    .points();
    Ok(report(body, state))
}

fn slice_at(trace: &LeafTrace, t: f64, step: f64) -> Vec<BodyPoint> {
    trace
        .points()
        .into_iter()
        .filter(|p| (p.t - t).abs() <= 0.5 * step)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{AgingPair, Graded, HomogPair};
    use crate::law::{DomainBox, FnLaw};

    fn cfg() -> AnalysisConfig {
        AnalysisConfig {
            n_f: 20,
            ..AnalysisConfig::default()
        }
    }

    #[test]
    fn homog_pair_time_direction_keeps_x() {
        let seed = BodyPoint::new(0.5, [0.1, 0.2, 0.3]);
        let tr = trace_leaf(
            &HomogPair,
            seed,
            LeafVariant::BodyMaterial,
            &[[1.0, 0.0, 0.0, 0.0]],
            5,
            0.1,
            &cfg(),
        )
        .unwrap();
        assert_eq!(tr.branches.len(), 2);
        for p in tr.points() {
            for i in 0..3 {
                assert!((p.x[i] - seed.x[i]).abs() < 1e-10);
            }
        }
        assert!((tr.branches[0].points[5].t - 1.0).abs() < 1e-10);
        assert!(tr
            .branches
            .iter()
            .all(|b| b.pointwise_dim.iter().all(|&d| d == 4)));
    }

    #[test]
    fn graded_state_leaf_stays_on_level_set() {
        let seed = BodyPoint::new(0.0, [0.5, 0.0, 0.0]);
        let tr = trace_leaf(
            &Graded::default(),
            seed,
            LeafVariant::StateT,
            &[],
            10,
            0.05,
            &cfg(),
        )
        .unwrap();
        assert_eq!(tr.branches.len(), 4);
        assert!(tr.max_coordinate_drift(1, 0.5) <= 1e-4 * 10.0 * 0.05);
        assert!(tr.max_coordinate_drift(0, 0.0) == 0.0);
        for b in &tr.branches {
            for w in b.points.windows(2) {
                assert!(w[0].distance(&w[1]) <= 2.0 * tr.step);
            }
        }
    }

    /// Records the particle coordinates directly, so no spatial direction is material.
    fn pinned() -> impl ConstitutiveLaw {
        FnLaw::new(
            "pinned",
            12,
            DomainBox::default(),
            |_t, x: &[f64; 3], f: &Mat3| {
                let mut w = f.to_row_major().to_vec();
                w.extend_from_slice(x);
                w
            },
        )
    }

    #[test]
    fn zero_dimensional_fiber_has_no_leaf() {
        let err = trace_leaf(
            &pinned(),
            BodyPoint::new(0.0, [0.0; 3]),
            LeafVariant::StateT,
            &[],
            3,
            0.1,
            &cfg(),
        )
        .unwrap_err();
        assert!(matches!(err, FoliationError::NoLeaf { .. }));
    }

    #[test]
    fn direction_outside_fiber_is_rejected() {
        let err = trace_leaf(
            &AgingPair::default(),
            BodyPoint::new(0.0, [0.0; 3]),
            LeafVariant::BodyMaterial,
            &[[1.0, 0.0, 0.0, 0.0]],
            3,
            0.1,
            &cfg(),
        )
        .unwrap_err();
        assert_eq!(err, FoliationError::DirectionOutsideFiber { index: 0 });
    }

    #[test]
    fn domain_exit_is_reported() {
        let err = trace_leaf(
            &HomogPair,
            BodyPoint::new(0.0, [1.9, 0.0, 0.0]),
            LeafVariant::StateT,
            &[[0.0, 1.0, 0.0, 0.0]],
            5,
            0.1,
            &cfg(),
        )
        .unwrap_err();
        assert!(matches!(err, FoliationError::DomainExit { .. }));
    }

    #[test]
    fn leaving_the_uniform_plane_is_a_singular_crossing() {
        // dim_base is 4 on {x¹ = 0} and 3 off it.
        let err = trace_leaf(
            &Graded::default(),
            BodyPoint::new(0.0, [0.0; 3]),
            LeafVariant::BodyMaterial,
            &[[0.0, 1.0, 0.0, 0.0]],
            3,
            0.1,
            &cfg(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                FoliationError::SingularCrossing {
                    expected: 4,
                    found: 3,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn freeze_time_on_graded_and_homog() {
        let r = freeze_time_check(
            &Graded::default(),
            BodyPoint::new(0.0, [0.5, 0.0, 0.0]),
            10,
            1e-2,
            &cfg(),
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.body_slice_points > 1);
        let r =
            freeze_time_check(&HomogPair, BodyPoint::new(0.0, [0.0; 3]), 5, 1e-2, &cfg()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.state_points, 31);
    }

    #[test]
    fn dimension_zero_state_collapses_to_seed() {
        let seed = BodyPoint::new(0.0, [0.0; 3]);
        let r = freeze_time_check(&pinned(), seed, 3, 0.1, &cfg()).unwrap();
        assert_eq!((r.body_slice_points, r.state_points), (1, 1));
        assert_eq!(r.hausdorff, 0.0);
    }

    #[test]
    fn csv_layout() {
        let tr = trace_leaf(
            &HomogPair,
            BodyPoint::new(0.0, [0.0; 3]),
            LeafVariant::StateT,
            &[[0.0, 1.0, 0.0, 0.0]],
            1,
            0.1,
            &cfg(),
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "branch,step,t,x1,x2,x3,dim");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0+,0,0,0,0,0,3"));
        assert!(lines[3].starts_with("0-,0,"));
    }
}
