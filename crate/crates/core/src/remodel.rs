//! Remodeling processes `P(t)` at a fixed particle: membership, mass
//! consistency, remodeling velocity gradient and growth classification.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::BodyPoint;
use crate::isomorph::membership_test;
use crate::law::{ConstitutiveLaw, LawError, DET_MIN};
use crate::mat3::Mat3;
use crate::sampling::AnalysisConfig;

pub const DEFAULT_TAU_MASS: f64 = 1e-6;
pub const DEFAULT_TAU_TR: f64 = 1e-8;

pub const GROWTH_CONVENTION: &str =
    "growth iff the trace of the remodeling velocity gradient P^-1 dP/dt is negative, resorption iff positive";

const CSV_COLUMNS: [&str; 10] = [
    "t", "p11", "p12", "p13", "p21", "p22", "p23", "p31", "p32", "p33",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemodelError {
    #[error("invalid remodeling process: {0}")]
    Invalid(String),
    #[error("process has no density samples")]
    MissingDensity,
    #[error("P is numerically singular at sample {index} (det {det:e})")]
    SingularP { index: usize, det: f64 },
    #[error("process CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Sampled remodeling process at one particle; `P(t₀) = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemodelingProcess {
    pub particle: [f64; 3],
    pub times: Vec<f64>,
    pub p: Vec<Mat3>,
    pub rho0: f64,
    pub rho: Option<Vec<f64>>,
}

impl RemodelingProcess {
    pub fn new(
        particle: [f64; 3],
        times: Vec<f64>,
        p: Vec<Mat3>,
        rho0: f64,
        rho: Option<Vec<f64>>,
    ) -> Result<Self, RemodelError> {
        let bad = |m: String| Err(RemodelError::Invalid(m));
        if times.len() < 3 {
            return bad(format!("need at least 3 samples, got {}", times.len()));
        }
        if p.len() != times.len() {
            return bad(format!("{} times but {} matrices", times.len(), p.len()));
        }
        if !times.iter().all(|t| t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be finite and strictly increasing".into());
        }
        if p[0] != Mat3::identity() {
            return bad("P(t0) must equal the identity".into());
        }
        for (k, m) in p.iter().enumerate() {
            if !m.is_finite() || m.det() <= 0.0 {
                return bad(format!(
                    "P at sample {k} must be finite with positive determinant"
                ));
            }
        }
        if !(rho0.is_finite() && rho0 > 0.0) {
            return bad(format!("rho0 must be positive, got {rho0}"));
        }
        if let Some(r) = &rho {
            if r.len() != times.len() {
                return bad(format!("{} times but {} densities", times.len(), r.len()));
            }
            if !r.iter().all(|v| v.is_finite() && *v > 0.0) {
                return bad("densities must be positive".into());
            }
        }
        Ok(RemodelingProcess {
            particle,
            times,
            p,
            rho0,
            rho,
        })
    }

    /// Reads columns `t,p11,…,p33[,rho]` (header required).
    pub fn from_csv<R: Read>(
        input: R,
        particle: [f64; 3],
        rho0: f64,
    ) -> Result<Self, RemodelError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| RemodelError::Csv(e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        let with_rho = match names.as_slice() {
            n if n == CSV_COLUMNS => false,
            n if n.len() == 11 && n[..10] == CSV_COLUMNS && n[10] == "rho" => true,
            _ => {
                return Err(RemodelError::Csv(format!(
                    "expected header `{}[,rho]`, got `{}`",
                    CSV_COLUMNS.join(","),
                    names.join(",")
                )))
            }
        };
        let mut times = Vec::new();
        let mut p = Vec::new();
        let mut rho = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| RemodelError::Csv(e.to_string()))?;
            let line = row + 2;
            let values = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| RemodelError::Csv(format!("line {line}: {e}")))?;
            if values.len() != names.len() {
                return Err(RemodelError::Csv(format!(
                    "line {line}: expected {} fields",
                    names.len()
                )));
            }
            times.push(values[0]);
            let mut m = [0.0; 9];
            m.copy_from_slice(&values[1..10]);
            p.push(Mat3::from_row_major(&m));
            if with_rho {
                rho.push(values[10]);
            }
        }
        Self::new(particle, times, p, rho0, with_rho.then_some(rho))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn density(&self) -> Result<&[f64], RemodelError> {
        self.rho.as_deref().ok_or(RemodelError::MissingDensity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Validates each `P(tₖ)` as a material isomorphism from `(t₀, x)` to `(tₖ, x)`.
pub fn check_membership(
    law: &dyn ConstitutiveLaw,
    process: &RemodelingProcess,
    cfg: &AnalysisConfig,
) -> Result<MembershipReport, RemodelError> {
    let from = BodyPoint::new(process.times[0], process.particle);
    let residuals = process
        .times
        .iter()
        .zip(&process.p)
        .map(|(&t, p)| {
            membership_test(
                law,
                from,
                BodyPoint::new(t, process.particle),
                p,
                cfg.n_validation,
                cfg,
            )
        })
        .collect::<Result<Vec<f64>, LawError>>()?;
    let passed = residuals.iter().all(|&r| r <= cfg.tau_iso);
    Ok(MembershipReport {
        times: process.times.clone(),
        residuals,
        tolerance: cfg.tau_iso,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub times: Vec<f64>,
    /// `ρ(0) / |det P(tₖ)|`.
    pub predicted: Vec<f64>,
    pub measured: Vec<f64>,
    /// `|ρ − ρ̂| / ρ̂` per sample.
    pub relative_error: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares measured densities with the transported volume form.
pub fn mass_consistency(
    process: &RemodelingProcess,
    tau_mass: f64,
) -> Result<MassReport, RemodelError> {
    let measured = process.density()?.to_vec();
    let predicted: Vec<f64> = process
        .p
        .iter()
        .map(|p| process.rho0 / p.det().abs())
        .collect();
    let relative_error: Vec<f64> = measured
        .iter()
        .zip(&predicted)
        .map(|(r, h)| (r - h).abs() / h)
        .collect();
    let passed = relative_error.iter().all(|&e| e <= tau_mass);
    Ok(MassReport {
        times: process.times.clone(),
        predicted,
        measured,
        relative_error,
        tolerance: tau_mass,
        passed,
    })
}

/// Weights of the derivative at `nodes[at]` of the quadratic through three nodes.
fn three_point_weights(nodes: [f64; 3], at: usize) -> [f64; 3] {
    let x = nodes[at];
    let mut w = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let denom = (nodes[i] - nodes[j]) * (nodes[i] - nodes[k]);
        w[i] = ((x - nodes[j]) + (x - nodes[k])) / denom;
    }
    w
}

/// Second-order derivative stencil at sample `k`: centered inside, one-sided at the ends.
fn stencil(times: &[f64], k: usize) -> ([usize; 3], [f64; 3]) {
    let n = times.len();
    let (start, at) = if k == 0 {
        (0, 0)
    } else if k == n - 1 {
        (n - 3, 2)
    } else {
        (k - 1, 1)
    };
    let idx = [start, start + 1, start + 2];
    (
        idx,
        three_point_weights([times[idx[0]], times[idx[1]], times[idx[2]]], at),
    )
}

fn derivative_scalar(times: &[f64], values: &[f64]) -> Vec<f64> {
    (0..times.len())
        .map(|k| {
            let (idx, w) = stencil(times, k);
            (0..3).map(|i| w[i] * values[idx[i]]).sum()
        })
        .collect()
}

fn derivative_mat(times: &[f64], values: &[Mat3]) -> Vec<Mat3> {
    (0..times.len())
        .map(|k| {
            let (idx, w) = stencil(times, k);
            (0..3).fold(Mat3::zeros(), |acc, i| acc + values[idx[i]].scale(w[i]))
        })
        .collect()
}

/// Remodeling velocity gradient `L(tₖ) = P(tₖ)⁻¹·Ṗ(tₖ)`, with `Ṗ` by second-order differences.
pub fn velocity_gradient(process: &RemodelingProcess) -> Result<Vec<Mat3>, RemodelError> {
    let p_dot = derivative_mat(&process.times, &process.p);
    process
        .p
        .iter()
        .zip(&p_dot)
        .enumerate()
        .map(|(index, (p, d))| {
            let det = p.det();
            if det.abs() <= DET_MIN {
                return Err(RemodelError::SingularP { index, det });
            }
            let inv = p.inverse().ok_or(RemodelError::SingularP { index, det })?;
            Ok(inv * *d)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Growth,
    Resorption,
    Neutral,
}

impl GrowthClass {
    pub fn from_trace(trace: f64, tau_tr: f64) -> Self {
        if trace < -tau_tr {
            GrowthClass::Growth
        } else if trace > tau_tr {
            GrowthClass::Resorption
        } else {
            GrowthClass::Neutral
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrowth {
    pub t_start: f64,
    pub t_end: f64,
    /// Interval mean of `tr L`, `ln(J(t_end)/J(t_start)) / Δt`.
    pub mean_trace: f64,
    pub class: GrowthClass,
    /// Class implied by the density trend through `ρ̇ = −ρ·tr L`.
    pub density_class: Option<GrowthClass>,
    pub consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub intervals: Vec<IntervalGrowth>,
    /// Pointwise `tr L(tₖ)` from the difference scheme.
    pub trace_l: Vec<f64>,
    /// Common class of all intervals, if they agree.
    pub overall: Option<GrowthClass>,
    pub tolerance: f64,
    pub convention: String,
}

/// Growth, resorption or neutral per sampling interval.
///
/// The interval mean of `tr L` is exact by Jacobi's formula
/// `d/dt ln det P = tr(P⁻¹Ṗ)`, so the class does not depend on the
/// difference scheme.
pub fn classify_growth(
    process: &RemodelingProcess,
    tau_tr: f64,
) -> Result<GrowthReport, RemodelError> {
    let trace_l: Vec<f64> = velocity_gradient(process)?
        .iter()
        .map(Mat3::trace)
        .collect();
    let j: Vec<f64> = process.p.iter().map(Mat3::det).collect();
    let intervals: Vec<IntervalGrowth> = (0..process.len() - 1)
        .map(|k| {
            let dt = process.times[k + 1] - process.times[k];
            let mean_trace = (j[k + 1] / j[k]).ln() / dt;
            let class = GrowthClass::from_trace(mean_trace, tau_tr);
            let density_class = process
                .rho
                .as_ref()
                .map(|r| GrowthClass::from_trace(-(r[k + 1] / r[k]).ln() / dt, tau_tr));
            IntervalGrowth {
                t_start: process.times[k],
                t_end: process.times[k + 1],
                mean_trace,
                class,
                density_class,
                consistent: density_class.map(|d| d == class),
            }
        })
        .collect();
    let overall = intervals
        .iter()
        .all(|i| i.class == intervals[0].class)
        .then(|| intervals[0].class);
    Ok(GrowthReport {
        intervals,
        trace_l,
        overall,
        tolerance: tau_tr,
        convention: GROWTH_CONVENTION.to_string(),
    })
}

/// `maxₖ |ρ̇(tₖ) + ρ(tₖ)·tr L(tₖ)|` with both rates from the same difference scheme.
pub fn density_rate_discrepancy(process: &RemodelingProcess) -> Result<f64, RemodelError> {
    let rho = process.density()?;
    let rho_dot = derivative_scalar(&process.times, rho);
    let l = velocity_gradient(process)?;
    Ok(rho_dot
        .iter()
        .zip(rho)
        .zip(&l)
        .map(|((rd, r), l)| (rd + r * l.trace()).abs())
        .fold(0.0, f64::max))
}
