//! Built-in responses and the name → law registry.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::Scalar;
use crate::law::{ConstitutiveLaw, LawError, Response};
use crate::mat3::Mat3;

/// Named numeric parameters; scalars are one-element vectors.
pub type LawParams = BTreeMap<String, Vec<f64>>;

fn frobenius<S: Scalar>(f: &Mat3<S>) -> S {
    f.norm_sq()
}

/// `W = tr(FᵀF)`.
#[derive(Clone, Debug, Default)]
pub struct HomogIsotropic;

impl Response for HomogIsotropic {
    fn name(&self) -> &str {
        "homog_isotropic"
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, _t: S, _x: &[S; 3], f: &Mat3<S>) -> Vec<S> {
        vec![frobenius(f)]
    }
}

/// `W = (tr(FᵀF), det F)`.
#[derive(Clone, Debug, Default)]
pub struct HomogPair;

impl Response for HomogPair {
    fn name(&self) -> &str {
        "homog_pair"
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, _t: S, _x: &[S; 3], f: &Mat3<S>) -> Vec<S> {
        vec![frobenius(f), f.det()]
    }
}

/// `W = ((1 + rate·t)·tr(FᵀF), det F)`.
#[derive(Clone, Debug)]
pub struct AgingPair {
    pub rate: f64,
}

impl Default for AgingPair {
    fn default() -> Self {
        AgingPair { rate: 1.0 }
    }
}

impl Response for AgingPair {
    fn name(&self) -> &str {
        "aging_pair"
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, t: S, _x: &[S; 3], f: &Mat3<S>) -> Vec<S> {
        vec![(t * self.rate + 1.0) * frobenius(f), f.det()]
    }
}

/// `W = (g(x¹)·tr(FᵀF), det F)` with `g(u) = 1 + a·u²`.
///
/// The determinant component pins `tr Θ = 0`, which turns the stiffness
/// gradient into a genuine obstruction along x¹.
#[derive(Clone, Debug)]
pub struct Graded {
    pub a: f64,
}

impl Default for Graded {
    fn default() -> Self {
        Graded { a: 1.0 }
    }
}

impl Graded {
    pub fn profile(&self, u: f64) -> f64 {
        1.0 + self.a * u * u
    }
}

impl Response for Graded {
    fn name(&self) -> &str {
        "graded"
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, _t: S, x: &[S; 3], f: &Mat3<S>) -> Vec<S> {
        let g = x[0] * x[0] * self.a + 1.0;
        vec![g * frobenius(f), f.det()]
    }
}

/// `W = Ŵ(F·K(x))`, `Ŵ = (tr(FᵀF), det F)`, `K(x) = exp(kappa·x¹·D)`.
#[derive(Clone, Debug)]
pub struct Implant {
    pub kappa: f64,
    pub generator: Mat3,
}

impl Default for Implant {
    fn default() -> Self {
        Implant {
            kappa: 0.3,
            generator: Mat3([[0.4, 0.3, 0.0], [0.1, -0.2, 0.5], [0.0, -0.2, -0.2]]),
        }
    }
}

impl Implant {
    /// The implant map `K(x)` on real inputs.
    pub fn implant(&self, x: &[f64; 3]) -> Mat3 {
        self.implant_generic(x)
    }

    fn implant_generic<S: Scalar>(&self, x: &[S; 3]) -> Mat3<S> {
        let d: Mat3<S> = self.generator.lift();
        d.scale(x[0] * self.kappa).expm()
    }
}

impl Response for Implant {
    fn name(&self) -> &str {
        "implant"
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, _t: S, x: &[S; 3], f: &Mat3<S>) -> Vec<S> {
        let g = *f * self.implant_generic(x);
        vec![frobenius(&g), g.det()]
    }
}

/// `W = F`, flattened row-major (m = 9).
#[derive(Clone, Debug, Default)]
pub struct LinearResponse;

impl Response for LinearResponse {
    fn name(&self) -> &str {
        "linear_response"
    }
    fn output_dim(&self) -> usize {
        9
    }
    fn eval<S: Scalar>(&self, _t: S, _x: &[S; 3], f: &Mat3<S>) -> Vec<S> {
        f.to_row_major().to_vec()
    }
}

/// Names accepted by [`build_law`].
pub const BUILTIN_NAMES: [&str; 6] = [
    "aging_pair",
    "graded",
    "homog_isotropic",
    "homog_pair",
    "implant",
    "linear_response",
];

/// Every built-in law with default parameters.
pub fn builtin_registry() -> BTreeMap<&'static str, Arc<dyn ConstitutiveLaw>> {
    BUILTIN_NAMES
        .iter()
        .map(|&name| {
            let law = build_law(name, &LawParams::new()).expect("defaults are valid");
            (name, law)
        })
        .collect()
}

/// Looks up a built-in law with default parameters.
pub fn lookup(name: &str) -> Result<Arc<dyn ConstitutiveLaw>, LawError> {
    build_law(name, &LawParams::new())
}

struct ParamReader<'a> {
    law: &'a str,
    params: &'a LawParams,
    used: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    fn bad(&self, name: &str, reason: impl Into<String>) -> LawError {
        LawError::BadParameter {
            law: self.law.to_string(),
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    fn scalar(&mut self, name: &'a str, default: f64) -> Result<f64, LawError> {
        self.used.push(name);
        match self.params.get(name) {
            None => Ok(default),
            Some(v) if v.len() == 1 && v[0].is_finite() => Ok(v[0]),
            Some(_) => Err(self.bad(name, "expected one finite number")),
        }
    }

    fn matrix(&mut self, name: &'a str, default: Mat3) -> Result<Mat3, LawError> {
        self.used.push(name);
        match self.params.get(name) {
            None => Ok(default),
            Some(v) if v.len() == 9 && v.iter().all(|e| e.is_finite()) => {
                let mut a = [0.0; 9];
                a.copy_from_slice(v);
                Ok(Mat3::from_row_major(&a))
            }
            Some(_) => Err(self.bad(name, "expected 9 finite numbers (row-major 3x3)")),
        }
    }

    fn finish(self) -> Result<(), LawError> {
        match self
            .params
            .keys()
            .find(|k| !self.used.contains(&k.as_str()))
        {
            Some(k) => Err(self.bad(k, "not a parameter of this law")),
            None => Ok(()),
        }
    }
}

/// Builds a built-in law from its name and parameter map.
///
/// Parameters: `aging_pair.rate`, `graded.a`, `implant.kappa`, `implant.d`
/// (row-major generator). The other laws take none.
pub fn build_law(name: &str, params: &LawParams) -> Result<Arc<dyn ConstitutiveLaw>, LawError> {
    let mut reader = ParamReader {
        law: name,
        params,
        used: Vec::new(),
    };
    let law: Arc<dyn ConstitutiveLaw> = match name {
        "homog_isotropic" => Arc::new(HomogIsotropic),
        "homog_pair" => Arc::new(HomogPair),
        "linear_response" => Arc::new(LinearResponse),
        "aging_pair" => {
            let rate = reader.scalar("rate", 1.0)?;
            if rate < 0.0 {
                return Err(reader.bad("rate", "must be non-negative"));
            }
            Arc::new(AgingPair { rate })
        }
        "graded" => {
            let a = reader.scalar("a", 1.0)?;
            if a < 0.0 {
                return Err(reader.bad("a", "must be non-negative"));
            }
            Arc::new(Graded { a })
        }
        "implant" => {
            let defaults = Implant::default();
            let kappa = reader.scalar("kappa", defaults.kappa)?;
            let generator = reader.matrix("d", defaults.generator)?;
            Arc::new(Implant { kappa, generator })
        }
        other => return Err(LawError::NotFound(other.to_string())),
    };
    reader.finish()?;
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::jet;

    #[test]
    fn registry_lookup() {
        let reg = builtin_registry();
        assert_eq!(reg["homog_isotropic"].output_dim(), 1);
        assert_eq!(reg["aging_pair"].output_dim(), 2);
        assert_eq!(reg.len(), BUILTIN_NAMES.len());
        assert!(matches!(lookup("nope"), Err(LawError::NotFound(_))));
    }

    #[test]
    fn parameters_are_validated() {
        let mut p = LawParams::new();
        p.insert("kappa".into(), vec![0.5]);
        assert!(build_law("implant", &p).is_ok());
        p.insert("bogus".into(), vec![1.0]);
        assert!(matches!(
            build_law("implant", &p),
            Err(LawError::BadParameter { .. })
        ));
        let mut q = LawParams::new();
        q.insert("d".into(), vec![1.0; 4]);
        assert!(build_law("implant", &q).is_err());
        let mut r = LawParams::new();
        r.insert("rate".into(), vec![1.0]);
        assert!(build_law("homog_pair", &r).is_err());
    }

    #[test]
    fn frobenius_and_det_jets_at_identity() {
        let id = Mat3::identity();
        let j = jet(&HomogIsotropic, 0.3, &[0.1, 0.2, 0.3], &id).unwrap();
        assert_eq!(j.value, vec![3.0]);
        assert_eq!(j.d_t, vec![0.0]);
        assert_eq!(j.d_x, vec![[0.0; 3]]);
        let two_id: Vec<f64> = Mat3::scaled_identity(2.0).to_row_major().to_vec();
        assert_eq!(j.d_f[0].to_vec(), two_id);

        let j = jet(&HomogPair, 0.0, &[0.0; 3], &id).unwrap();
        assert_eq!(j.d_f[1].to_vec(), id.to_row_major().to_vec());
    }

    #[test]
    fn implant_is_identity_at_origin() {
        let imp = Implant::default();
        assert!((imp.implant(&[0.0, 0.4, -0.7]) - Mat3::identity()).max_abs() < 1e-15);
        assert!(imp.generator.trace().abs() < 1e-15);
    }
}
