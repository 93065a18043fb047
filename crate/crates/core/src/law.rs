//! Mechanical responses `W(t, x, F)` and their first-order jets.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::{Dual, Scalar};
use crate::mat3::{flat, Mat3};

/// Dual number seeded on `(t, x¹, x², x³, F₁₁, …, F₃₃)`.
pub type Dual13 = Dual<13>;

/// Lower bound on `det F` for deformation gradients fed to a law.
pub const DET_MIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("point (t = {t}, x = {x:?}) lies outside the law domain")]
    Domain { t: f64, x: [f64; 3] },
    #[error("deformation gradient has det F = {det:e}, below {DET_MIN:e}")]
    Degenerate { det: f64 },
    #[error("law `{law}` returned a non-finite value at t = {t}, x = {x:?}")]
    NonFinite { law: String, t: f64, x: [f64; 3] },
    #[error("unknown law `{0}`")]
    NotFound(String),
    #[error("bad parameter `{name}` for law `{law}`: {reason}")]
    BadParameter {
        law: String,
        name: String,
        reason: String,
    },
}

/// Closed box of admissible times and body coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub t: [f64; 2],
    pub x: [[f64; 2]; 3],
}

impl DomainBox {
    pub fn contains(&self, t: f64, x: &[f64; 3]) -> bool {
        let inside = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        inside(t, self.t) && x.iter().zip(self.x.iter()).all(|(&v, &r)| inside(v, r))
    }
}

impl Default for DomainBox {
    fn default() -> Self {
        DomainBox {
            t: [-0.5, 5.0],
            x: [[-2.0, 2.0]; 3],
        }
    }
}

/// How the partials in a [`LawJet`] were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    Dual,
    CentralDifference,
}

/// A mechanical response on the body-time manifold.
///
/// `eval` must be deterministic and must not depend on any target point;
/// the response is read off at the source of a groupoid element only.
pub trait ConstitutiveLaw: Send + Sync {
    fn name(&self) -> &str;

    /// Dimension `m` of the value space.
    fn output_dim(&self) -> usize;

    fn domain(&self) -> DomainBox;

    fn eval(&self, t: f64, x: &[f64; 3], f: &Mat3) -> Vec<f64>;

    /// Evaluation on dual numbers, when the law supports it.
    fn eval_dual(&self, _t: Dual13, _x: &[Dual13; 3], _f: &Mat3<Dual13>) -> Option<Vec<Dual13>> {
        None
    }
}

impl fmt::Debug for dyn ConstitutiveLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstitutiveLaw")
            .field("name", &self.name())
            .field("output_dim", &self.output_dim())
            .finish()
    }
}

/// Laws written generically over [`Scalar`]; they get dual-number jets for free.
pub trait Response: Send + Sync {
    fn name(&self) -> &str;
    fn output_dim(&self) -> usize;
    fn domain(&self) -> DomainBox {
        DomainBox::default()
    }
    fn eval<S: Scalar>(&self, t: S, x: &[S; 3], f: &Mat3<S>) -> Vec<S>;
}

impl<R: Response> ConstitutiveLaw for R {
    fn name(&self) -> &str {
        Response::name(self)
    }
    fn output_dim(&self) -> usize {
        Response::output_dim(self)
    }
    fn domain(&self) -> DomainBox {
        Response::domain(self)
    }
    fn eval(&self, t: f64, x: &[f64; 3], f: &Mat3) -> Vec<f64> {
        Response::eval(self, t, x, f)
    }
    fn eval_dual(&self, t: Dual13, x: &[Dual13; 3], f: &Mat3<Dual13>) -> Option<Vec<Dual13>> {
        Some(Response::eval(self, t, x, f))
    }
}

/// Black-box law backed by a plain closure; jets fall back to central differences.
pub struct FnLaw<F> {
    name: String,
    output_dim: usize,
    domain: DomainBox,
    func: F,
}

impl<F> FnLaw<F>
where
    F: Fn(f64, &[f64; 3], &Mat3) -> Vec<f64> + Send + Sync,
{
    pub fn new(name: impl Into<String>, output_dim: usize, domain: DomainBox, func: F) -> Self {
        FnLaw {
            name: name.into(),
            output_dim,
            domain,
            func,
        }
    }
}

impl<F> ConstitutiveLaw for FnLaw<F>
where
    F: Fn(f64, &[f64; 3], &Mat3) -> Vec<f64> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn domain(&self) -> DomainBox {
        self.domain
    }
    fn eval(&self, t: f64, x: &[f64; 3], f: &Mat3) -> Vec<f64> {
        (self.func)(t, x, f)
    }
}

/// Value and first partials of a law at one `(t, x, F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LawJet {
    pub value: Vec<f64>,
    pub d_t: Vec<f64>,
    /// `d_x[a][i] = ∂W_a/∂xⁱ`.
    pub d_x: Vec<[f64; 3]>,
    /// `d_f[a][flat(i, j)] = ∂W_a/∂F_ij`.
    pub d_f: Vec<[f64; 9]>,
    pub mode: DiffMode,
}

impl LawJet {
    pub fn output_dim(&self) -> usize {
        self.value.len()
    }

    /// `∂W_a/∂F` as a matrix.
    pub fn grad_f(&self, a: usize) -> Mat3 {
        Mat3::from_row_major(&self.d_f[a])
    }

    fn is_finite(&self) -> bool {
        self.value
            .iter()
            .chain(self.d_t.iter())
            .all(|v| v.is_finite())
            && self.d_x.iter().flatten().all(|v| v.is_finite())
            && self.d_f.iter().flatten().all(|v| v.is_finite())
    }
}

/// Checks the point and deformation gradient against the law's domain.
pub fn check_admissible(
    law: &dyn ConstitutiveLaw,
    t: f64,
    x: &[f64; 3],
    f: &Mat3,
) -> Result<(), LawError> {
    if !law.domain().contains(t, x) {
        return Err(LawError::Domain { t, x: *x });
    }
    let det = f.det();
    // NaN determinants are rejected too.
    if det.partial_cmp(&DET_MIN) != Some(std::cmp::Ordering::Greater) {
        return Err(LawError::Degenerate { det });
    }
    Ok(())
}

/// Value with a finiteness check.
pub fn evaluate(
    law: &dyn ConstitutiveLaw,
    t: f64,
    x: &[f64; 3],
    f: &Mat3,
) -> Result<Vec<f64>, LawError> {
    check_admissible(law, t, x, f)?;
    let w = law.eval(t, x, f);
    if w.len() != law.output_dim() || w.iter().any(|v| !v.is_finite()) {
        return Err(LawError::NonFinite {
            law: law.name().to_string(),
            t,
            x: *x,
        });
    }
    Ok(w)
}

/// Value and first partials, by dual numbers when the law supports them.
pub fn jet(law: &dyn ConstitutiveLaw, t: f64, x: &[f64; 3], f: &Mat3) -> Result<LawJet, LawError> {
    check_admissible(law, t, x, f)?;
    let jet = match dual_jet(law, t, x, f) {
        Some(j) => j,
        None => fd_jet(law, t, x, f),
    };
    finish(law, t, x, jet)
}

/// Jet by central differences regardless of dual support.
pub fn jet_central_difference(
    law: &dyn ConstitutiveLaw,
    t: f64,
    x: &[f64; 3],
    f: &Mat3,
) -> Result<LawJet, LawError> {
    check_admissible(law, t, x, f)?;
    let jet = fd_jet(law, t, x, f);
    finish(law, t, x, jet)
}

fn finish(
    law: &dyn ConstitutiveLaw,
    t: f64,
    x: &[f64; 3],
    jet: LawJet,
) -> Result<LawJet, LawError> {
    if jet.output_dim() != law.output_dim() || !jet.is_finite() {
        return Err(LawError::NonFinite {
            law: law.name().to_string(),
            t,
            x: *x,
        });
    }
    Ok(jet)
}

fn dual_jet(law: &dyn ConstitutiveLaw, t: f64, x: &[f64; 3], f: &Mat3) -> Option<LawJet> {
    let td = Dual13::variable(t, 0);
    let xd = [
        Dual13::variable(x[0], 1),
        Dual13::variable(x[1], 2),
        Dual13::variable(x[2], 3),
    ];
    let fd = Mat3::from_fn(|i, j| Dual13::variable(f.get(i, j), 4 + flat(i, j)));
    let out = law.eval_dual(td, &xd, &fd)?;
    let mut d_x = Vec::with_capacity(out.len());
    let mut d_f = Vec::with_capacity(out.len());
    for w in &out {
        d_x.push([w.eps[1], w.eps[2], w.eps[3]]);
        let mut g = [0.0; 9];
        g.copy_from_slice(&w.eps[4..13]);
        d_f.push(g);
    }
    Some(LawJet {
        value: out.iter().map(|w| w.re).collect(),
        d_t: out.iter().map(|w| w.eps[0]).collect(),
        d_x,
        d_f,
        mode: DiffMode::Dual,
    })
}

fn fd_step(u: f64) -> f64 {
    u.abs().max(1.0) * f64::EPSILON.cbrt()
}

fn fd_jet(law: &dyn ConstitutiveLaw, t: f64, x: &[f64; 3], f: &Mat3) -> LawJet {
    let value = law.eval(t, x, f);
    let m = value.len();
    let central = |plus: Vec<f64>, minus: Vec<f64>, h: f64| -> Vec<f64> {
        plus.iter()
            .zip(minus.iter())
            .map(|(p, q)| (p - q) / (2.0 * h))
            .collect()
    };

    let h = fd_step(t);
    let d_t = central(law.eval(t + h, x, f), law.eval(t - h, x, f), h);

    let mut d_x = vec![[0.0; 3]; m];
    for i in 0..3 {
        let h = fd_step(x[i]);
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        let col = central(law.eval(t, &xp, f), law.eval(t, &xm, f), h);
        for a in 0..m {
            d_x[a][i] = col[a];
        }
    }

    let mut d_f = vec![[0.0; 9]; m];
    for i in 0..3 {
        for j in 0..3 {
            let h = fd_step(f.get(i, j));
            let mut fp = *f;
            let mut fm = *f;
            fp.0[i][j] += h;
            fm.0[i][j] -= h;
            let col = central(law.eval(t, x, &fp), law.eval(t, x, &fm), h);
            for a in 0..m {
                d_f[a][flat(i, j)] = col[a];
            }
        }
    }

    LawJet {
        value,
        d_t,
        d_x,
        d_f,
        mode: DiffMode::CentralDifference,
    }
}
