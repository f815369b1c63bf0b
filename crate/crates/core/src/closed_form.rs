//! Exact symbolic sums of Gaussian graph integrals.
//!
//! A term represents
//!
//! ```text
//! coeff · λ^p · (π/β)^{p·d/2} · det^{−d/2} · exp(−β · c_eff · s)
//! ```
//!
//! where `s = ‖x − y‖²`. The `d`-dependence only enters at evaluation, so one
//! symbolic form serves every dimension.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation point for closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Intensity of the Poisson process (points per unit volume).
    pub lambda: f64,
    /// Fading exponent, in 1/length².
    pub beta: f64,
    pub d: u32,
    /// Squared source–sink distance.
    pub s: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, beta: f64, d: u32, s: f64) -> Result<Self> {
        let p = ModelParams { lambda, beta, d, s };
        p.validate()?;
        Ok(p)
    }

    /// Same as [`ModelParams::new`] but takes the Euclidean distance.
    pub fn from_distance(lambda: f64, beta: f64, d: u32, dist: f64) -> Result<Self> {
        if !dist.is_finite() || dist < 0.0 {
            return Err(Error::InvalidParams(format!(
                "distance must be finite and >= 0, got {dist}"
            )));
        }
        Self::new(lambda, beta, d, dist * dist)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidParams("dimension d must be >= 1".into()));
        }
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "squared distance must be finite and >= 0, got {}",
                self.s
            )));
        }
        Ok(())
    }
}

/// Grouping key: terms with equal keys are combined by adding coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub lambda_pow: u32,
    pub det: BigUint,
    pub c_eff: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClosedFormTerm {
    pub coeff: BigRational,
    pub lambda_pow: u32,
    pub det: BigUint,
    pub c_eff: BigRational,
}

impl ClosedFormTerm {
    pub fn new(coeff: BigRational, lambda_pow: u32, det: BigUint, c_eff: BigRational) -> Self {
        ClosedFormTerm {
            coeff,
            lambda_pow,
            det,
            c_eff,
        }
    }

    /// Convenience constructor from small integers: `coeff`, `p`, `det`, `c_num/c_den`.
    pub fn small(coeff: i64, lambda_pow: u32, det: u64, c_num: i64, c_den: i64) -> Self {
        ClosedFormTerm {
            coeff: BigRational::from_integer(coeff.into()),
            lambda_pow,
            det: det.into(),
            c_eff: BigRational::new(c_num.into(), c_den.into()),
        }
    }

    pub fn key(&self) -> TermKey {
        TermKey {
            lambda_pow: self.lambda_pow,
            det: self.det.clone(),
            c_eff: self.c_eff.clone(),
        }
    }

    pub fn eval(&self, params: &ModelParams) -> f64 {
        let d = params.d as f64;
        let p = self.lambda_pow as f64;
        let lambda = if self.lambda_pow == 0 {
            1.0
        } else {
            params.lambda.powi(self.lambda_pow as i32)
        };
        let det = big_to_f64(&self.det);
        ratio_to_f64(&self.coeff)
            * lambda
            * (PI / params.beta).powf(p * d / 2.0)
            * det.powf(-d / 2.0)
            * (-params.beta * ratio_to_f64(&self.c_eff) * params.s).exp()
    }

    /// Product of two independent factors: λ-powers add, determinants
    /// multiply, exponent coefficients add.
    pub fn mul(&self, other: &ClosedFormTerm) -> ClosedFormTerm {
        ClosedFormTerm {
            coeff: &self.coeff * &other.coeff,
            lambda_pow: self.lambda_pow + other.lambda_pow,
            det: &self.det * &other.det,
            c_eff: &self.c_eff + &other.c_eff,
        }
    }
}

impl fmt::Display for ClosedFormTerm {
    /// `coeff·λ^p·(π/β)^{p·d/2}·det^{-d/2}·exp(-β·c·s)` in compact notation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} * lambda^{} * (pi/beta)^({}d/2) * {}^(-d/2) * exp(-{} beta s)",
            self.coeff, self.lambda_pow, self.lambda_pow, self.det, self.c_eff
        )
    }
}

/// Canonical sum of [`ClosedFormTerm`]s, sorted by key with no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosedForm {
    terms: BTreeMap<TermKey, BigRational>,
}

impl ClosedForm {
    pub fn zero() -> Self {
        ClosedForm::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, term: ClosedFormTerm) {
        let ClosedFormTerm {
            coeff,
            lambda_pow,
            det,
            c_eff,
        } = term;
        if coeff.is_zero() {
            return;
        }
        let key = TermKey {
            lambda_pow,
            det,
            c_eff,
        };
        let slot = self
            .terms
            .entry(key.clone())
            .or_insert_with(BigRational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn from_terms<I: IntoIterator<Item = ClosedFormTerm>>(terms: I) -> Self {
        let mut cf = ClosedForm::zero();
        for t in terms {
            cf.add_term(t);
        }
        cf
    }

    pub fn terms(&self) -> Vec<ClosedFormTerm> {
        self.terms
            .iter()
            .map(|(k, c)| ClosedFormTerm {
                coeff: c.clone(),
                lambda_pow: k.lambda_pow,
                det: k.det.clone(),
                c_eff: k.c_eff.clone(),
            })
            .collect()
    }

    pub fn coefficient(&self, key: &TermKey) -> BigRational {
        self.terms
            .get(key)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn contains_key(&self, key: &TermKey) -> bool {
        self.terms.contains_key(key)
    }

    pub fn scale(&self, factor: &BigRational) -> ClosedForm {
        if factor.is_zero() {
            return ClosedForm::zero();
        }
        ClosedForm {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.clone(), c * factor))
                .collect(),
        }
    }

    pub fn eval(&self, params: &ModelParams) -> f64 {
        self.eval_terms(params).iter().map(|(_, v)| v).sum()
    }

    /// Each term paired with its numeric contribution.
    pub fn eval_terms(&self, params: &ModelParams) -> Vec<(ClosedFormTerm, f64)> {
        self.terms()
            .into_iter()
            .map(|t| {
                let v = t.eval(params);
                (t, v)
            })
            .collect()
    }

    pub fn pow(&self, exp: u32) -> ClosedForm {
        let mut out = ClosedForm::from(ClosedFormTerm::small(1, 0, 1, 0, 1));
        for _ in 0..exp {
            out = &out * self;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ClosedFormDoc::from(self)).expect("closed form serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ClosedFormDoc = serde_json::from_str(s)?;
        ClosedForm::try_from(doc)
    }
}

impl From<ClosedFormTerm> for ClosedForm {
    fn from(t: ClosedFormTerm) -> Self {
        ClosedForm::from_terms([t])
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, t) in self.terms().iter().enumerate() {
            if i > 0 {
                f.write_str("\n+ ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl Add for &ClosedForm {
    type Output = ClosedForm;
    fn add(self, rhs: &ClosedForm) -> ClosedForm {
        let mut out = self.clone();
        for t in rhs.terms() {
            out.add_term(t);
        }
        out
    }
}

impl Sub for &ClosedForm {
    type Output = ClosedForm;
    fn sub(self, rhs: &ClosedForm) -> ClosedForm {
        self + &(-rhs)
    }
}

impl Neg for &ClosedForm {
    type Output = ClosedForm;
    fn neg(self) -> ClosedForm {
        self.scale(&-BigRational::one())
    }
}

impl Mul for &ClosedForm {
    type Output = ClosedForm;
    fn mul(self, rhs: &ClosedForm) -> ClosedForm {
        let mut out = ClosedForm::zero();
        let rhs_terms = rhs.terms();
        for a in self.terms() {
            for b in &rhs_terms {
                out.add_term(a.mul(b));
            }
        }
        out
    }
}

pub fn cf_add(a: &ClosedForm, b: &ClosedForm) -> ClosedForm {
    a + b
}

pub fn cf_mul(a: &ClosedForm, b: &ClosedForm) -> ClosedForm {
    a * b
}

pub fn cf_eval(a: &ClosedForm, params: &ModelParams) -> f64 {
    a.eval(params)
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // very large numerators/denominators: fall back to a scaled division
        let n = big_to_f64_signed(r.numer());
        let d = big_to_f64_signed(r.denom());
        n / d
    })
}

fn big_to_f64_signed(x: &BigInt) -> f64 {
    let mag = big_to_f64(x.magnitude());
    if x.is_negative() {
        -mag
    } else {
        mag
    }
}

pub(crate) fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

fn format_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn parse_ratio(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = n.trim().parse().map_err(|_| bad())?;
    let d: BigInt = d.trim().parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// Wire form: `{"terms":[{"coeff":"n/d","lambda_pow":p,"det":"D","c_eff":"n/d"}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedFormDoc {
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermDoc {
    pub coeff: String,
    pub lambda_pow: u32,
    pub det: String,
    pub c_eff: String,
}

impl From<&ClosedFormTerm> for TermDoc {
    fn from(t: &ClosedFormTerm) -> Self {
        TermDoc {
            coeff: format_ratio(&t.coeff),
            lambda_pow: t.lambda_pow,
            det: t.det.to_string(),
            c_eff: format_ratio(&t.c_eff),
        }
    }
}

impl TryFrom<&TermDoc> for ClosedFormTerm {
    type Error = Error;
    fn try_from(doc: &TermDoc) -> Result<Self> {
        let det: BigUint = doc
            .det
            .parse()
            .map_err(|_| Error::Parse(format!("not a determinant: {:?}", doc.det)))?;
        if det.is_zero() {
            return Err(Error::Parse("determinant must be >= 1".into()));
        }
        let c_eff = parse_ratio(&doc.c_eff)?;
        if c_eff.is_negative() {
            return Err(Error::Parse("c_eff must be >= 0".into()));
        }
        Ok(ClosedFormTerm {
            coeff: parse_ratio(&doc.coeff)?,
            lambda_pow: doc.lambda_pow,
            det,
            c_eff,
        })
    }
}

impl From<&ClosedForm> for ClosedFormDoc {
    fn from(cf: &ClosedForm) -> Self {
        ClosedFormDoc {
            terms: cf.terms().iter().map(TermDoc::from).collect(),
        }
    }
}

impl TryFrom<ClosedFormDoc> for ClosedForm {
    type Error = Error;
    fn try_from(doc: ClosedFormDoc) -> Result<Self> {
        let mut cf = ClosedForm::zero();
        for t in &doc.terms {
            cf.add_term(ClosedFormTerm::try_from(t)?);
        }
        Ok(cf)
    }
}
