//! Global verdicts from grid-sampled fiber dimensions.
//!
//! Each verdict applies a dimension criterion at every sampled point. A
//! verdict is evidence over the grid, never a statement about the continuum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{FiberDims, SweepEntry};
use crate::grid::BodyPoint;
use crate::sampling::AnalysisConfig;

/// Body-material fiber dimension of a smooth uniform remodeling.
pub const BODY_MATERIAL_FULL_DIM: usize = 4;
/// t-body-material fiber dimension of a uniform state.
pub const STATE_UNIFORM_DIM: usize = 3;
/// X-body-material fiber dimension of a remodeling particle.
pub const PARTICLE_REMODELING_DIM: usize = 1;
/// X-body-material fiber dimension of an aging particle.
pub const PARTICLE_AGING_DIM: usize = 0;

pub mod criteria {
    pub const SMOOTH_UNIFORM_REMODELING: &str =
        "smooth uniform remodeling iff dim A Omega(C)#_(t,X) = 4 for all instants t and particles X";
    pub const SMOOTH_REMODELING: &str = "smooth remodeling iff (i) dim A Omega(C)T at eps(t,X) is constant in (t,X) and (ii) dim A Omega_X(R)#_(t,X) = 1 for all (t,X)";
    pub const SMOOTH_AGING: &str = "smooth aging iff (i) dim A Omega(C)T at eps(t,X) is constant in (t,X) and (ii) dim A Omega_X(R)#_t = 0 for some X and some t";
    pub const SMOOTH_UNIFORM_AGING: &str = "smooth uniform aging iff (i) dim A Omega(C)T at eps(t,X) is constant, (ii) dim A Omega_X(R)#_t = 0 for some X and t, (iii) for all t and some X, dim A Omega_t(C)#_X = 3";
    pub const DIMS_CONSTANT: &str =
        "dim A Omega(C)T at eps(t,X) compared by exact integer equality across the grid";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub criterion: String,
    /// Supporting point when the verdict holds.
    pub witness: Option<BodyPoint>,
    /// Violating point when it does not.
    pub counterexample: Option<BodyPoint>,
}

impl Verdict {
    fn yes(criterion: &str, witness: BodyPoint) -> Self {
        Verdict {
            holds: true,
            criterion: criterion.to_string(),
            witness: Some(witness),
            counterexample: None,
        }
    }

    fn no(criterion: &str, counterexample: BodyPoint) -> Self {
        Verdict {
            holds: false,
            criterion: criterion.to_string(),
            witness: None,
            counterexample: Some(counterexample),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub body_material_full_dim: usize,
    pub state_uniform_dim: usize,
    pub particle_remodeling_dim: usize,
    pub particle_aging_dim: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            body_material_full_dim: BODY_MATERIAL_FULL_DIM,
            state_uniform_dim: STATE_UNIFORM_DIM,
            particle_remodeling_dim: PARTICLE_REMODELING_DIM,
            particle_aging_dim: PARTICLE_AGING_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedPoint {
    pub point: BodyPoint,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// False when some grid points failed; verdicts then cover the rest only.
    pub complete: bool,
    pub per_point: Vec<FiberDims>,
    pub failed_points: Vec<FailedPoint>,
    pub dims_constant: Verdict,
    pub smooth_uniform_remodeling: Verdict,
    pub smooth_remodeling: Verdict,
    pub smooth_aging: Verdict,
    pub uniform_aging: Verdict,
    pub thresholds: Thresholds,
    pub config: AnalysisConfig,
    pub caveats: Vec<String>,
}

impl ClassificationReport {
    /// Violated implications between verdicts.
    pub fn implication_violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.smooth_uniform_remodeling.holds && !self.smooth_remodeling.holds {
            v.push("smooth_uniform_remodeling => smooth_remodeling");
        }
        if self.smooth_aging.holds && self.smooth_remodeling.holds {
            v.push("smooth_aging => not smooth_remodeling");
        }
        if self.uniform_aging.holds && !self.smooth_aging.holds {
            v.push("uniform_aging => smooth_aging");
        }
        for verdict in [
            &self.dims_constant,
            &self.smooth_uniform_remodeling,
            &self.smooth_remodeling,
            &self.smooth_aging,
            &self.uniform_aging,
        ] {
            if verdict.holds != verdict.witness.is_some()
                || verdict.holds == verdict.counterexample.is_some()
            {
                v.push("every verdict carries a witness or a counterexample");
            }
        }
        v
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("sweep is empty")]
    EmptySweep,
    #[error("{} grid point(s) failed; verdicts are incomplete", .report.failed_points.len())]
    IncompleteSweep { report: Box<ClassificationReport> },
}

const CAVEATS: [&str; 3] = [
    "verdicts are grid-certified: they are necessary evidence on the sampled points, not proofs over the continuum",
    "the Lie-subgroupoid requirement is checked only through constancy of sampled fiber dimensions; off-grid obstructions are not decidable numerically",
    "ranks are decided from sampled deformation gradients with held-out validation",
];

fn verdicts(
    points: &[FiberDims],
    cfg: &AnalysisConfig,
    complete: bool,
    failed: Vec<FailedPoint>,
) -> ClassificationReport {
    let first = points[0].point;

    let dims_constant = match points.iter().find(|d| d.dim_full != points[0].dim_full) {
        None => Verdict::yes(criteria::DIMS_CONSTANT, first),
        Some(d) => Verdict::no(criteria::DIMS_CONSTANT, d.point),
    };

    let smooth_uniform_remodeling =
        match points.iter().find(|d| d.dim_base != BODY_MATERIAL_FULL_DIM) {
            None => Verdict::yes(criteria::SMOOTH_UNIFORM_REMODELING, first),
            Some(d) => Verdict::no(criteria::SMOOTH_UNIFORM_REMODELING, d.point),
        };

    let smooth_remodeling = if let Some(cx) = dims_constant.counterexample {
        Verdict::no(criteria::SMOOTH_REMODELING, cx)
    } else {
        match points
            .iter()
            .find(|d| d.dim_particle_x_base != PARTICLE_REMODELING_DIM)
        {
            None => Verdict::yes(criteria::SMOOTH_REMODELING, first),
            Some(d) => Verdict::no(criteria::SMOOTH_REMODELING, d.point),
        }
    };

    let aging_point = points
        .iter()
        .find(|d| d.dim_particle_x_base == PARTICLE_AGING_DIM)
        .map(|d| d.point);
    let smooth_aging = match (dims_constant.counterexample, aging_point) {
        (Some(cx), _) => Verdict::no(criteria::SMOOTH_AGING, cx),
        (None, Some(w)) => Verdict::yes(criteria::SMOOTH_AGING, w),
        (None, None) => Verdict::no(criteria::SMOOTH_AGING, first),
    };

    // (iii): every sampled instant has some particle with a uniform state fiber.
    let mut instants: Vec<f64> = Vec::new();
    for d in points {
        if !instants.iter().any(|t| t.to_bits() == d.point.t.to_bits()) {
            instants.push(d.point.t);
        }
    }
    let state_gap = instants.iter().find_map(|&t| {
        let at_t: Vec<&FiberDims> = points
            .iter()
            .filter(|d| d.point.t.to_bits() == t.to_bits())
            .collect();
        if at_t.iter().any(|d| d.dim_state_t_base == STATE_UNIFORM_DIM) {
            None
        } else {
            Some(at_t[0].point)
        }
    });
    let uniform_aging = match (&smooth_aging, state_gap) {
        (v, _) if !v.holds => Verdict::no(
            criteria::SMOOTH_UNIFORM_AGING,
            v.counterexample.unwrap_or(first),
        ),
        (_, Some(cx)) => Verdict::no(criteria::SMOOTH_UNIFORM_AGING, cx),
        (v, None) => Verdict::yes(criteria::SMOOTH_UNIFORM_AGING, v.witness.unwrap_or(first)),
    };

    ClassificationReport {
        complete,
        per_point: points.to_vec(),
        failed_points: failed,
        dims_constant,
        smooth_uniform_remodeling,
        smooth_remodeling,
        smooth_aging,
        uniform_aging,
        thresholds: Thresholds::default(),
        config: cfg.clone(),
        caveats: CAVEATS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Applies the dimension criteria to a sweep.
///
/// Failed points make the result an [`ClassifyError::IncompleteSweep`] that
/// still carries the verdicts computed over the surviving points.
pub fn classify(
    sweep: &[SweepEntry],
    cfg: &AnalysisConfig,
) -> Result<ClassificationReport, ClassifyError> {
    let mut points = Vec::with_capacity(sweep.len());
    let mut failed = Vec::new();
    for entry in sweep {
        match entry {
            Ok(r) => points.push(r.dims.clone()),
            Err(f) => failed.push(FailedPoint {
                point: f.point,
                error: f.error.to_string(),
            }),
        }
    }
    if points.is_empty() {
        return Err(ClassifyError::EmptySweep);
    }
    let complete = failed.is_empty();
    let report = verdicts(&points, cfg, complete, failed);
    if complete {
        Ok(report)
    } else {
        Err(ClassifyError::IncompleteSweep {
            report: Box::new(report),
        })
    }
}

/// Verdicts over bare dimension records.
pub fn classify_dims(
    points: &[FiberDims],
    cfg: &AnalysisConfig,
) -> Result<ClassificationReport, ClassifyError> {
    if points.is_empty() {
        return Err(ClassifyError::EmptySweep);
    }
    Ok(verdicts(points, cfg, true, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(t: f64, x1: f64, full: usize, base: usize, state: usize, px: usize) -> FiberDims {
        FiberDims {
            point: BodyPoint::new(t, [x1, 0.0, 0.0]),
            dim_full: full,
            dim_base: base,
            dim_state_t: 0,
            dim_state_t_base: state,
            dim_particle_x: 0,
            dim_particle_x_base: px,
            dim_isotropy: 3,
            dim_base_kernel: 3,
            particle_x_base_from_full: px,
        }
    }

    #[test]
    fn uniform_remodeling_grid() {
        let pts = vec![dims(0.0, 0.0, 7, 4, 3, 1), dims(1.0, 0.0, 7, 4, 3, 1)];
        let r = classify_dims(&pts, &AnalysisConfig::default()).unwrap();
        assert!(r.smooth_uniform_remodeling.holds);
        assert!(r.smooth_remodeling.holds);
        assert!(!r.smooth_aging.holds);
        assert!(!r.uniform_aging.holds);
        assert!(r.implication_violations().is_empty());
    }

    #[test]
    fn aging_grid() {
        let pts = vec![dims(0.0, 0.0, 6, 3, 3, 0), dims(1.0, 0.5, 6, 3, 3, 0)];
        let r = classify_dims(&pts, &AnalysisConfig::default()).unwrap();
        assert!(r.smooth_aging.holds);
        assert!(r.uniform_aging.holds);
        assert!(!r.smooth_remodeling.holds);
        assert_eq!(
            r.smooth_uniform_remodeling.counterexample,
            Some(pts[0].point)
        );
        assert!(r.implication_violations().is_empty());
    }

    #[test]
    fn uniform_aging_needs_a_uniform_state_at_every_instant() {
        let pts = vec![
            dims(0.0, 0.0, 6, 3, 3, 0),
            dims(0.0, 1.0, 6, 3, 2, 0),
            dims(1.0, 0.0, 6, 3, 2, 0),
        ];
        let r = classify_dims(&pts, &AnalysisConfig::default()).unwrap();
        assert!(r.smooth_aging.holds);
        assert!(!r.uniform_aging.holds);
        assert_eq!(r.uniform_aging.counterexample, Some(pts[2].point));
    }

    #[test]
    fn changing_dimension_blocks_smooth_verdicts() {
        let pts = vec![dims(0.0, 0.0, 7, 4, 3, 1), dims(0.0, 1.0, 6, 3, 2, 1)];
        let r = classify_dims(&pts, &AnalysisConfig::default()).unwrap();
        assert!(!r.dims_constant.holds);
        assert!(!r.smooth_remodeling.holds);
        assert!(!r.smooth_aging.holds);
        assert_eq!(
            r.smooth_uniform_remodeling.counterexample,
            Some(pts[1].point)
        );
        assert!(r.implication_violations().is_empty());
    }

    #[test]
    fn empty_sweep_is_an_error() {
        assert_eq!(
            classify(&[], &AnalysisConfig::default()),
            Err(ClassifyError::EmptySweep)
        );
    }
}
