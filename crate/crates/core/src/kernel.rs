//! Sampled kernel systems for admissible left-invariant vector fields.
//!
//! At a point `(t, x)` an admissible field has coefficients
//! `(λ, Θ¹, Θ², Θ³, Θˡⱼ)` solving, for every deformation gradient `F`,
//!
//! ```text
//! λ ∂W/∂t + Θⁱ ∂W/∂xⁱ + Fⁱₗ Θˡⱼ ∂W/∂Fⁱⱼ = 0.
//! ```
//!
//! "For every F" is realized by stacking one block row per sampled `F` and
//! taking the numerical nullspace; fresh held-out samples check the result.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::law::{check_admissible, jet, ConstitutiveLaw, LawError, LawJet};
use crate::mat3::{flat, Mat3};

/// Number of coefficients of a full admissible field.
pub const FULL_UNKNOWNS: usize = 13;
/// Column of `λ` in the full layout.
pub const LAMBDA: usize = 0;
/// Columns of `Θ¹..Θ³` in the full layout.
pub const THETA_X: std::ops::Range<usize> = 1..4;
/// Columns of `Θˡⱼ` (row-major) in the full layout.
pub const THETA_F: std::ops::Range<usize> = 4..13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Material groupoid of the body-time manifold.
    Full,
    /// Frozen instant: `λ ≡ 0`.
    StateT,
    /// Frozen particle: `Θⁱ ≡ 0`.
    ParticleX,
    /// Linearized symmetry group: `λ ≡ 0`, `Θⁱ ≡ 0`.
    Isotropy,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::StateT,
        Variant::ParticleX,
        Variant::Isotropy,
    ];

    /// Columns of the full layout kept by this variant, in order.
    pub fn columns(self) -> Vec<usize> {
        match self {
            Variant::Full => (0..FULL_UNKNOWNS).collect(),
            Variant::StateT => (1..FULL_UNKNOWNS).collect(),
            Variant::ParticleX => std::iter::once(LAMBDA).chain(THETA_F).collect(),
            Variant::Isotropy => THETA_F.collect(),
        }
    }

    pub fn unknown_dim(self) -> usize {
        match self {
            Variant::Full => 13,
            Variant::StateT => 12,
            Variant::ParticleX => 10,
            Variant::Isotropy => 9,
        }
    }

    /// Lifts a coefficient vector of this variant to the full 13-slot layout.
    pub fn embed(self, coeffs: &[f64]) -> [f64; FULL_UNKNOWNS] {
        let mut out = [0.0; FULL_UNKNOWNS];
        for (c, v) in self.columns().into_iter().zip(coeffs) {
            out[c] = *v;
        }
        out
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Full => "full",
            Variant::StateT => "state_t",
            Variant::ParticleX => "particle_x",
            Variant::Isotropy => "isotropy",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("ambiguous rank{}: singular value {sigma:e} within a decade of threshold {threshold:e}", variant_suffix(.variant))]
    RankUnstable {
        variant: Option<Variant>,
        sigma: f64,
        threshold: f64,
    },
    #[error("system with {rows} rows cannot determine {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    #[error(
        "{variant} nullspace fails held-out validation: residual {residual:e} > {tolerance:e}"
    )]
    ValidationFailed {
        variant: Variant,
        residual: f64,
        tolerance: f64,
    },
    #[error("kernel matrix has non-finite entries")]
    NonFinite,
}

fn variant_suffix(v: &Option<Variant>) -> String {
    v.map(|v| format!(" in {v} system")).unwrap_or_default()
}

impl KernelError {
    fn with_variant(self, variant: Variant) -> Self {
        match self {
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
}

/// One kernel equation at a point, sampled at `f_samples`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelProblem {
    pub variant: Variant,
    pub t: f64,
    pub x: [f64; 3],
    pub f_samples: Vec<Mat3>,
}

impl KernelProblem {
    pub fn new(variant: Variant, t: f64, x: [f64; 3], f_samples: Vec<Mat3>) -> Self {
        KernelProblem {
            variant,
            t,
            x,
            f_samples,
        }
    }

    pub fn unknown_dim(&self) -> usize {
        self.variant.unknown_dim()
    }
}

/// Orthonormal nullspace basis with its supporting spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct NullspaceResult {
    /// `unknown_dim × dim`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub dim: usize,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    /// Absolute threshold the spectrum was cut at.
    pub threshold: f64,
    /// Held-out residual per basis column; empty until validated.
    pub validation_residual: Vec<f64>,
}

impl NullspaceResult {
    pub fn max_validation_residual(&self) -> f64 {
        self.validation_residual.iter().copied().fold(0.0, f64::max)
    }

    /// Basis column `k` as a plain vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.basis.column(k).iter().copied().collect()
    }
}

/// Row block of the full 13-column system contributed by one jet.
fn push_block(rows: &mut Vec<[f64; FULL_UNKNOWNS]>, j: &LawJet, f: &Mat3) {
    for a in 0..j.output_dim() {
        let mut row = [0.0; FULL_UNKNOWNS];
        row[LAMBDA] = j.d_t[a];
        row[THETA_X].copy_from_slice(&j.d_x[a]);
        // Coefficient of Θˡⱼ is (Fᵀ ∂W_a/∂F)ₗⱼ.
        let coeff = f.transpose() * j.grad_f(a);
        for l in 0..3 {
            for c in 0..3 {
                row[THETA_F.start + flat(l, c)] = coeff.get(l, c);
            }
        }
        rows.push(row);
    }
}

/// Full 13-column system at `(t, x)` for the given samples.
pub fn assemble_full(
    law: &dyn ConstitutiveLaw,
    t: f64,
    x: &[f64; 3],
    samples: &[Mat3],
) -> Result<DMatrix<f64>, KernelError> {
    let mut rows = Vec::with_capacity(samples.len() * law.output_dim());
    for f in samples {
        let j = jet(law, t, x, f)?;
        push_block(&mut rows, &j, f);
    }
    let m = DMatrix::from_fn(rows.len(), FULL_UNKNOWNS, |r, c| rows[r][c]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFinite);
    }
    Ok(m)
}

/// Keeps the columns of `variant`.
pub fn select_columns(full: &DMatrix<f64>, variant: Variant) -> DMatrix<f64> {
    let cols = variant.columns();
    DMatrix::from_fn(full.nrows(), cols.len(), |r, c| full[(r, cols[c])])
}

/// Stacked system `(m·N_F) × unknown_dim` of a kernel problem.
pub fn assemble(
    law: &dyn ConstitutiveLaw,
    problem: &KernelProblem,
) -> Result<DMatrix<f64>, KernelError> {
    for f in &problem.f_samples {
        check_admissible(law, problem.t, &problem.x, f)?;
    }
    let rows = law.output_dim() * problem.f_samples.len();
    if rows < problem.unknown_dim() {
        return Err(KernelError::Underdetermined {
            rows,
            cols: problem.unknown_dim(),
        });
    }
    let full = assemble_full(law, problem.t, &problem.x, &problem.f_samples)?;
    Ok(select_columns(&full, problem.variant))
}

/// Singular values (descending) and matching right singular vectors as columns.
fn right_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let cols = a.ncols();
    // Zero-pad short systems so the full right singular basis is produced.
    let padded = if a.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, order.len(), |r, c| v_t[(order[c], r)]);
    (sigma, v)
}

fn check_band(sigma: &[f64], threshold: f64) -> Result<(), KernelError> {
    if threshold == 0.0 {
        return Ok(());
    }
    match sigma
        .iter()
        .find(|&&s| s > threshold / 10.0 && s < threshold * 10.0)
    {
        Some(&s) => Err(KernelError::RankUnstable {
            variant: None,
            sigma: s,
            threshold,
        }),
        None => Ok(()),
    }
}

/// Numerical nullspace: singular values `≤ tau_rank·σ_max` count as zero.
///
/// Fails with [`KernelError::RankUnstable`] when a singular value sits within a
/// factor 10 of the threshold on either side.
pub fn nullspace(a: &DMatrix<f64>, tau_rank: f64) -> Result<NullspaceResult, KernelError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFinite);
    }
    let cols = a.ncols();
    if cols == 0 {
        return Ok(NullspaceResult {
            basis: DMatrix::zeros(0, 0),
            dim: 0,
            singular_values: Vec::new(),
            threshold: 0.0,
            validation_residual: Vec::new(),
        });
    }
    let (sigma, v) = right_svd(a);
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let threshold = tau_rank * sigma_max;
    check_band(&sigma, threshold)?;
    let null_cols: Vec<usize> = (0..sigma.len())
        .filter(|&k| sigma[k] <= threshold)
        .collect();
    let basis = DMatrix::from_fn(cols, null_cols.len(), |r, c| v[(r, null_cols[c])]);
    Ok(NullspaceResult {
        dim: null_cols.len(),
        basis,
        singular_values: sigma,
        threshold,
        validation_residual: Vec::new(),
    })
}

/// Right singular vectors of `a` whose singular value is at most `tau` (absolute).
pub fn null_columns_abs(a: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>, KernelError> {
    let (sigma, v) = right_svd(a);
    check_band(&sigma, tau)?;
    let keep: Vec<usize> = (0..sigma.len()).filter(|&k| sigma[k] <= tau).collect();
    Ok(DMatrix::from_fn(a.ncols(), keep.len(), |r, c| {
        v[(r, keep[c])]
    }))
}

/// Relative residual `‖H b‖ / ‖H‖_F` of each basis column on a held-out system.
pub fn residuals_on(held_out: &DMatrix<f64>, basis: &DMatrix<f64>) -> Vec<f64> {
    let scale = held_out.norm();
    (0..basis.ncols())
        .map(|k| {
            if scale == 0.0 {
                0.0
            } else {
                (held_out * basis.column(k)).norm() / scale
            }
        })
        .collect()
}

/// Column space of selected rows of a basis: the projection of a fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub rank: usize,
    /// `rows × rank`, orthonormal columns spanning the projected fiber.
    pub directions: DMatrix<f64>,
    /// Dimension of the projection's kernel inside the basis span.
    pub kernel_dim: usize,
}

/// Rank of `basis[rows, :]` with absolute threshold `tau` (basis columns are unit).
pub fn project_rows(
    basis: &DMatrix<f64>,
    rows: std::ops::Range<usize>,
    tau: f64,
) -> Result<Projection, KernelError> {
    let k = basis.ncols();
    let n = rows.len();
    if k == 0 {
        return Ok(Projection {
            rank: 0,
            directions: DMatrix::zeros(n, 0),
            kernel_dim: 0,
        });
    }
    let block = basis.rows(rows.start, n).clone_owned();
    let svd = block.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    check_band(&sigma, tau)?;
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] > tau)
        .collect();
    let directions = DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])]);
    Ok(Projection {
        rank: keep.len(),
        directions,
        kernel_dim: k - keep.len(),
    })
}

/// Training and held-out systems of one point, shared by all variants.
#[derive(Clone, Debug)]
pub struct PointSystem {
    pub t: f64,
    pub x: [f64; 3],
    pub training: DMatrix<f64>,
    pub held_out: DMatrix<f64>,
}

impl PointSystem {
    pub fn build(
        law: &dyn ConstitutiveLaw,
        t: f64,
        x: [f64; 3],
        training: &[Mat3],
        held_out: &[Mat3],
    ) -> Result<Self, KernelError> {
        let rows = law.output_dim() * training.len();
        if rows < FULL_UNKNOWNS {
            return Err(KernelError::Underdetermined {
                rows,
                cols: FULL_UNKNOWNS,
            });
        }
        Ok(PointSystem {
            t,
            x,
            training: assemble_full(law, t, &x, training)?,
            held_out: assemble_full(law, t, &x, held_out)?,
        })
    }

    /// Validated nullspace of one variant.
    pub fn solve(
        &self,
        variant: Variant,
        tau_rank: f64,
        tau_accept: f64,
    ) -> Result<NullspaceResult, KernelError> {
        let a = select_columns(&self.training, variant);
        let mut ns = nullspace(&a, tau_rank).map_err(|e| e.with_variant(variant))?;
        let held = select_columns(&self.held_out, variant);
        ns.validation_residual = residuals_on(&held, &ns.basis);
        let worst = ns.max_validation_residual();
        if worst > tau_accept {
            return Err(KernelError::ValidationFailed {
                variant,
                residual: worst,
                tolerance: tau_accept,
            });
        }
        Ok(ns)
    }
}

/// Applies the equation of `variant` to coefficients at one `F`, per output component.
pub fn equation_residual(jet: &LawJet, f: &Mat3, variant: Variant, coeffs: &[f64]) -> Vec<f64> {
    let full = variant.embed(coeffs);
    let mut rows = Vec::new();
    push_block(&mut rows, jet, f);
    rows.iter()
        .map(|row| DVector::from_row_slice(row).dot(&DVector::from_row_slice(&full)))
        .collect()
}
