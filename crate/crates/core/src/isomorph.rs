//! Finite material isomorphisms and linearized symmetry groups.
//!
//! `P ∈ GL⁺(3)` is a material isomorphism from `(t, X)` to `(s, Y)` when
//! `W(t, X, F·P) = W(s, Y, F)` for every deformation gradient `F`. The search
//! minimizes the sampled mismatch with Levenberg–Marquardt over the nine
//! entries of `P` and then validates on fresh samples.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BodyPoint, Grid};
use crate::kernel::{KernelError, NullspaceResult, PointSystem, Variant};
use crate::law::{evaluate, jet, ConstitutiveLaw, LawError, DET_MIN};
use crate::mat3::{flat, Mat3};
use crate::sampling::{derive_seed, held_out_samples, random_generator, stream, AnalysisConfig};

/// Residual band above `tau_iso` reported as non-converged rather than absent.
pub const AMBIGUOUS_FACTOR: f64 = 1e3;
/// Allowed growth of the residual for derived isomorphisms (inverse, composition).
pub const CLOSURE_FACTOR: f64 = 10.0;
/// Magnitude of the generators used for perturbed starts.
const START_SPREAD: f64 = 0.5;

pub const TRANSITIVITY_CRITERION: &str =
    "uniform remodeling iff the material groupoid is transitive: every pair of point-instants is joined by a material isomorphism";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialIsomorphism {
    pub from: BodyPoint,
    pub to: BodyPoint,
    pub p: Mat3,
    /// Worst relative mismatch on fresh validation samples.
    pub residual: f64,
    /// Same check for `P⁻¹` from `to` back to `from`.
    pub inverse_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// 0 for the identity start, `k` for the k-th perturbed start.
    pub start: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsoError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("no material isomorphism found; best residual {best_residual:e}")]
    NotFound { best_residual: f64, best_p: Mat3 },
    #[error("search stalled in the ambiguous band: residual {residual:e}")]
    NonConverged { residual: f64, p: Mat3 },
}

impl IsoError {
    /// Best residual reached, when the search ran.
    pub fn best_residual(&self) -> Option<f64> {
        match self {
            IsoError::NotFound { best_residual, .. } => Some(*best_residual),
            IsoError::NonConverged { residual, .. } => Some(*residual),
            IsoError::Law(_) => None,
        }
    }
}

fn relative_mismatch(lhs: &[f64], rhs: &[f64]) -> f64 {
    let diff: f64 = lhs
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / (1.0 + scale)
}

/// Worst `‖W(from, F·P) − W(to, F)‖ / (1 + ‖W(to, F)‖)` over the given samples.
pub fn mismatch_on(
    law: &dyn ConstitutiveLaw,
    from: BodyPoint,
    to: BodyPoint,
    p: &Mat3,
    samples: &[Mat3],
) -> Result<f64, LawError> {
    let mut worst: f64 = 0.0;
    for f in samples {
        let lhs = evaluate(law, from.t, &from.x, &(*f * *p))?;
        let rhs = evaluate(law, to.t, &to.x, f)?;
        worst = worst.max(relative_mismatch(&lhs, &rhs));
    }
    Ok(worst)
}

/// Mismatch of a candidate on `n_validation` fresh seeded samples.
pub fn membership_test(
    law: &dyn ConstitutiveLaw,
    from: BodyPoint,
    to: BodyPoint,
    p: &Mat3,
    n_validation: usize,
    cfg: &AnalysisConfig,
) -> Result<f64, LawError> {
    let samples = held_out_samples(n_validation, cfg.seed, cfg.spread, stream::MEMBERSHIP);
    mismatch_on(law, from, to, p, &samples)
}

/// Least-squares form of the isomorphism equation on training samples.
struct IsoProblem<'a> {
    law: &'a dyn ConstitutiveLaw,
    from: BodyPoint,
    samples: Vec<Mat3>,
    targets: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl<'a> IsoProblem<'a> {
    fn new(
        law: &'a dyn ConstitutiveLaw,
        from: BodyPoint,
        to: BodyPoint,
        samples: Vec<Mat3>,
    ) -> Result<Self, LawError> {
        let mut targets = Vec::with_capacity(samples.len());
        let mut weights = Vec::with_capacity(samples.len());
        for f in &samples {
            let w = evaluate(law, to.t, &to.x, f)?;
            weights.push(1.0 / (1.0 + w.iter().map(|v| v * v).sum::<f64>().sqrt()));
            targets.push(w);
        }
        Ok(IsoProblem {
            law,
            from,
            samples,
            targets,
            weights,
        })
    }

    fn residuals(&self, p: &Mat3) -> Result<DVector<f64>, LawError> {
        let m = self.law.output_dim();
        let mut r = DVector::zeros(m * self.samples.len());
        for (k, f) in self.samples.iter().enumerate() {
            let w = evaluate(self.law, self.from.t, &self.from.x, &(*f * *p))?;
            for a in 0..m {
                r[k * m + a] = (w[a] - self.targets[k][a]) * self.weights[k];
            }
        }
        Ok(r)
    }

    /// Residuals and Jacobian `∂r/∂P` (columns in row-major order of `P`).
    fn linearize(&self, p: &Mat3) -> Result<(DVector<f64>, DMatrix<f64>), LawError> {
        let m = self.law.output_dim();
        let n = m * self.samples.len();
        let mut r = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 9);
        for (k, f) in self.samples.iter().enumerate() {
            let j = jet(self.law, self.from.t, &self.from.x, &(*f * *p))?;
            for a in 0..m {
                let row = k * m + a;
                r[row] = (j.value[a] - self.targets[k][a]) * self.weights[k];
                // ∂W_a(F·P)/∂P_lj = (Fᵀ ∂W_a/∂G)_lj at G = F·P.
                let d = f.transpose() * j.grad_f(a);
                for l in 0..3 {
                    for c in 0..3 {
                        jac[(row, flat(l, c))] = d.get(l, c) * self.weights[k];
                    }
                }
            }
        }
        Ok((r, jac))
    }
}

struct LmOutcome {
    p: Mat3,
    iterations: usize,
}

fn to_mat(v: &DVector<f64>) -> Mat3 {
    Mat3::from_fn(|i, j| v[flat(i, j)])
}

/// Damped Gauss–Newton with Levenberg damping scaled ×3 / ÷3.
fn levenberg_marquardt(
    problem: &IsoProblem<'_>,
    p0: Mat3,
    max_iter: usize,
) -> Result<LmOutcome, LawError> {
    let mut p = p0;
    let (mut r, mut jac) = problem.linearize(&p)?;
    let mut cost = 0.5 * r.norm_squared();
    let jtj = jac.transpose() * &jac;
    let mut mu = 1e-3 * jtj.diagonal().max().max(1e-12);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        if cost < 1e-30 {
            break;
        }
        let jt = jac.transpose();
        let g = &jt * &r;
        let mut lhs = &jt * &jac;
        for d in 0..9 {
            lhs[(d, d)] += mu;
        }
        let step = match lhs.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                mu *= 3.0;
                continue;
            }
        };
        let p_vec = DVector::from_row_slice(&p.to_row_major());
        let candidate = to_mat(&(&p_vec + &step));
        let accepted = if candidate.det() > DET_MIN {
            match problem.residuals(&candidate) {
                Ok(r_new) if 0.5 * r_new.norm_squared() < cost => Some(0.5 * r_new.norm_squared()),
                _ => None,
            }
        } else {
            None
        };
        match accepted {
            Some(new_cost) => {
                let decrease = cost - new_cost;
                p = candidate;
                let lin = problem.linearize(&p)?;
                r = lin.0;
                jac = lin.1;
                cost = 0.5 * r.norm_squared();
                mu = (mu / 3.0).max(1e-15);
                if step.norm() < 1e-14 * (1.0 + p_vec.norm()) || decrease < 1e-16 * cost.max(1e-300)
                {
                    break;
                }
            }
            None => {
                mu *= 3.0;
                if mu > 1e16 {
                    break;
                }
            }
        }
    }
    Ok(LmOutcome { p, iterations })
}

/// Searches for `P` with `W(from, F·P) = W(to, F)` on sampled `F`.
///
/// Starts from the identity, then from `n_starts` seeded perturbations, and
/// stops at the first start whose validated residual is within `tau_iso`.
pub fn find_isomorphism(
    law: &dyn ConstitutiveLaw,
    from: BodyPoint,
    to: BodyPoint,
    cfg: &AnalysisConfig,
) -> Result<MaterialIsomorphism, IsoError> {
    evaluate(law, from.t, &from.x, &Mat3::identity())?;
    evaluate(law, to.t, &to.x, &Mat3::identity())?;

    let problem = IsoProblem::new(law, from, to, cfg.training_samples())?;
    let validation = held_out_samples(cfg.n_validation, cfg.seed, cfg.spread, stream::MEMBERSHIP);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stream::MULTI_START));
    let mut best: Option<(f64, LmOutcome, usize)> = None;
    for start in 0..=cfg.n_starts {
        let p0 = if start == 0 {
            Mat3::identity()
        } else {
            random_generator(&mut rng).scale(START_SPREAD).expm()
        };
        let outcome = match levenberg_marquardt(&problem, p0, cfg.max_iter) {
            Ok(o) => o,
            Err(LawError::Domain { .. }) | Err(LawError::Degenerate { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let residual = match mismatch_on(law, from, to, &outcome.p, &validation) {
            Ok(r) => r,
            Err(_) => continue,
        };
        log::debug!(
            "isomorphism start {start}: residual {residual:e} after {} iterations",
            outcome.iterations
        );
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, outcome, start));
        }
        if best.as_ref().is_some_and(|b| b.0 <= cfg.tau_iso) {
            break;
        }
    }

    let Some((residual, outcome, start)) = best else {
        return Err(IsoError::NotFound {
            best_residual: f64::INFINITY,
            best_p: Mat3::identity(),
        });
    };
    let p = outcome.p;
    if residual > cfg.tau_iso * AMBIGUOUS_FACTOR {
        return Err(IsoError::NotFound {
            best_residual: residual,
            best_p: p,
        });
    }
    if residual > cfg.tau_iso {
        return Err(IsoError::NonConverged { residual, p });
    }
    let inverse_residual = match p.inverse() {
        Some(inv) => mismatch_on(law, to, from, &inv, &validation)?,
        None => f64::INFINITY,
    };
    if inverse_residual > CLOSURE_FACTOR * cfg.tau_iso {
        return Err(IsoError::NonConverged { residual, p });
    }
    Ok(MaterialIsomorphism {
        from,
        to,
        p,
        residual,
        inverse_residual,
        converged: true,
        iterations: outcome.iterations,
        start,
    })
}

/// Linearized symmetry algebra at a point: the isotropy kernel.
pub fn symmetry_algebra(
    law: &dyn ConstitutiveLaw,
    at: BodyPoint,
    cfg: &AnalysisConfig,
) -> Result<NullspaceResult, KernelError> {
    let system = PointSystem::build(
        law,
        at.t,
        at.x,
        &cfg.training_samples(),
        &cfg.held_out_samples(),
    )?;
    system.solve(Variant::Isotropy, cfg.tau_rank, cfg.tau_accept)
}

/// Membership residual of `exp(ε·Θ)` as a symmetry at `at`.
pub fn exponential_residual(
    law: &dyn ConstitutiveLaw,
    at: BodyPoint,
    theta: &Mat3,
    eps: f64,
    cfg: &AnalysisConfig,
) -> Result<f64, LawError> {
    let p = theta.scale(eps).expm();
    membership_test(law, at, at, &p, cfg.n_validation, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Found,
    NotFound,
    NonConverged,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEvidence {
    pub from: usize,
    pub to: usize,
    pub status: PairStatus,
    pub found: bool,
    /// Validated residual of the best candidate; `None` when the search could not run.
    pub residual: Option<f64>,
    pub p: Option<Mat3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitivityEvidence {
    pub points: Vec<BodyPoint>,
    pub anchor: usize,
    pub pairs: Vec<PairEvidence>,
    /// Every point is joined to the anchor by a found isomorphism.
    pub uniform_remodeling_evidence: bool,
    pub criterion: String,
    /// Connected components of the found relation; not claimed to be manifolds.
    pub orbits: Vec<Vec<usize>>,
}

impl TransitivityEvidence {
    /// CSV with columns `pair,from,to,found,status,residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pair", "from", "to", "found", "status", "residual"])?;
        for (k, e) in self.pairs.iter().enumerate() {
            let status = match e.status {
                PairStatus::Found => "found",
                PairStatus::NotFound => "not_found",
                PairStatus::NonConverged => "non_converged",
                PairStatus::Failed => "failed",
            };
            w.write_record([
                k.to_string(),
                e.from.to_string(),
                e.to.to_string(),
                e.found.to_string(),
                status.to_string(),
                e.residual.map(|r| format!("{r:e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn probe_pair(
    law: &dyn ConstitutiveLaw,
    points: &[BodyPoint],
    from: usize,
    to: usize,
    cfg: &AnalysisConfig,
) -> PairEvidence {
    let pair_index = (from * points.len() + to) as u64;
    let pair_cfg = AnalysisConfig {
        seed: derive_seed(cfg.seed, stream::PAIR ^ pair_index),
        ..cfg.clone()
    };
    let (status, residual, p) = match find_isomorphism(law, points[from], points[to], &pair_cfg) {
        Ok(iso) => (PairStatus::Found, Some(iso.residual), Some(iso.p)),
        Err(IsoError::NotFound {
            best_residual,
            best_p,
        }) => (
            PairStatus::NotFound,
            Some(best_residual).filter(|r| r.is_finite()),
            Some(best_p),
        ),
        Err(IsoError::NonConverged { residual, p }) => {
            (PairStatus::NonConverged, Some(residual), Some(p))
        }
        Err(IsoError::Law(_)) => (PairStatus::Failed, None, None),
    };
    PairEvidence {
        from,
        to,
        status,
        found: status == PairStatus::Found,
        residual,
        p,
    }
}

/// Pairwise isomorphism evidence over a grid.
///
/// The first grid point is the anchor and is probed against every other
/// point. Points not reached from the anchor are grouped by repeating the
/// probe from the first unreached point, which yields the orbit evidence.
pub fn transitivity_probe(
    law: &dyn ConstitutiveLaw,
    grid: &Grid,
    cfg: &AnalysisConfig,
) -> TransitivityEvidence {
    let points = grid.points.clone();
    let mut unassigned: Vec<usize> = (0..points.len()).collect();
    let mut pairs = Vec::new();
    let mut orbits = Vec::new();
    let mut anchor_connected = true;
    while let Some(&anchor) = unassigned.first() {
        let others: Vec<usize> = unassigned[1..].to_vec();
        let evidence: Vec<PairEvidence> = others
            .par_iter()
            .map(|&j| probe_pair(law, &points, anchor, j, cfg))
            .collect();
        let mut orbit = vec![anchor];
        let mut rest = Vec::new();
        for e in &evidence {
            if e.found {
                orbit.push(e.to);
            } else {
                rest.push(e.to);
            }
        }
        if anchor == 0 {
            anchor_connected = rest.is_empty();
        }
        pairs.extend(evidence);
        orbits.push(orbit);
        unassigned = rest;
    }
    TransitivityEvidence {
        points,
        anchor: 0,
        pairs,
        uniform_remodeling_evidence: anchor_connected,
        criterion: TRANSITIVITY_CRITERION.to_string(),
        orbits,
    }
}
