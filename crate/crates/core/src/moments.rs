//! Moments of the k-hop count `N_k` between two fixed points.
//!
//! The `n`-th moment of `N_{r+1}` is a sum over the non-flat partitions of the
//! `n × r` grid; each partition contributes exactly one Gaussian graph
//! integral with coefficient 1. Variances are formed symbolically as
//! `m₂ − m₁²` so the all-singleton term cancels exactly.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::closed_form::{ClosedForm, ClosedFormTerm, ModelParams};
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::gaussian::{chain_kernel, hop_graph_of_partition, integrate_gaussian_graph};
use crate::partition::{fold_nonflat, Stirling2Table, DEFAULT_CELL_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentQuery {
    /// Hop count (number of edges on each path).
    pub k: usize,
    /// Moment order.
    pub n: usize,
}

impl MomentQuery {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("hop count k must be >= 1".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParams("moment order n must be >= 1".into()));
        }
        Ok(MomentQuery { k, n })
    }
}

/// A numeric value together with its per-term breakdown.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub form: ClosedForm,
    pub value: f64,
    pub terms: Vec<(ClosedFormTerm, f64)>,
    /// Number of partitions that fed the closed form before like terms were
    /// combined (0 when no partition sum was involved).
    pub raw_terms: usize,
}

/// Memoizing front end for moment computations.
#[derive(Debug)]
pub struct MomentEngine {
    limit: usize,
    policy: Parallelism,
    moments: HashMap<(usize, usize), (ClosedForm, usize)>,
}

impl Default for MomentEngine {
    fn default() -> Self {
        MomentEngine::new(DEFAULT_CELL_LIMIT, Parallelism::default())
    }
}

impl MomentEngine {
    pub fn new(limit: usize, policy: Parallelism) -> Self {
        MomentEngine {
            limit,
            policy,
            moments: HashMap::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn mean(&self, k: usize) -> Result<ClosedForm> {
        if k == 0 {
            return Err(Error::InvalidParams("hop count k must be >= 1".into()));
        }
        Ok(chain_kernel(k).into())
    }

    pub fn moment(&mut self, q: MomentQuery) -> Result<ClosedForm> {
        Ok(self.moment_with_count(q)?.0)
    }

    /// The moment together with the number of partitions summed.
    pub fn moment_with_count(&mut self, q: MomentQuery) -> Result<(ClosedForm, usize)> {
        if let Some(hit) = self.moments.get(&(q.n, q.k)) {
            return Ok(hit.clone());
        }
        let out = if q.k == 1 {
            // a single edge indicator: every power equals the indicator
            (ClosedForm::from(chain_kernel(1)), 1)
        } else {
            partition_sum(q.n, q.k - 1, self.limit, self.policy)?
        };
        self.moments.insert((q.n, q.k), out.clone());
        Ok(out)
    }

    pub fn variance(&mut self, k: usize) -> Result<ClosedForm> {
        Ok(self.variance_with_count(k)?.0)
    }

    /// Variance and the number of partition terms that survive the exact
    /// cancellation of the squared mean.
    pub fn variance_with_count(&mut self, k: usize) -> Result<(ClosedForm, usize)> {
        let (m2, count) = self.moment_with_count(MomentQuery::new(k, 2)?)?;
        let mean = self.mean(k)?;
        let var = &m2 - &(&mean * &mean);
        let raw = if k == 1 { count } else { count - 1 };
        Ok((var, raw))
    }

    pub fn evaluate(&mut self, q: MomentQuery, params: &ModelParams) -> Result<Evaluation> {
        params.validate()?;
        let (form, raw_terms) = self.moment_with_count(q)?;
        Ok(evaluation(form, raw_terms, params))
    }

    pub fn evaluate_variance(&mut self, k: usize, params: &ModelParams) -> Result<Evaluation> {
        params.validate()?;
        let (form, raw_terms) = self.variance_with_count(k)?;
        Ok(evaluation(form, raw_terms, params))
    }
}

fn evaluation(form: ClosedForm, raw_terms: usize, params: &ModelParams) -> Evaluation {
    let terms = form.eval_terms(params);
    let value = terms.iter().map(|(_, v)| v).sum();
    Evaluation {
        form,
        value,
        terms,
        raw_terms,
    }
}

fn partition_sum(
    n: usize,
    r: usize,
    limit: usize,
    policy: Parallelism,
) -> Result<(ClosedForm, usize)> {
    let chunks = fold_nonflat(
        n,
        r,
        limit,
        policy,
        || Ok((ClosedForm::zero(), 0usize)),
        |acc: &mut Result<(ClosedForm, usize)>, p| {
            if let Ok((cf, count)) = acc {
                match integrate_gaussian_graph(&hop_graph_of_partition(&p)) {
                    Ok(t) => {
                        cf.add_term(t);
                        *count += 1;
                    }
                    Err(e) => *acc = Err(e),
                }
            }
        },
    )?;
    let mut total = ClosedForm::zero();
    let mut count = 0;
    for chunk in chunks {
        let (cf, c) = chunk?;
        total = &total + &cf;
        count += c;
    }
    Ok((total, count))
}

/// Mean of the k-hop count: the `k`-fold chain kernel.
pub fn khop_mean(k: usize) -> Result<ClosedForm> {
    MomentEngine::default().mean(k)
}

pub fn khop_moment(q: MomentQuery) -> Result<ClosedForm> {
    MomentEngine::default().moment(q)
}

pub fn khop_variance(k: usize) -> Result<ClosedForm> {
    MomentEngine::default().variance(k)
}

/// `Σ_{j=1}^{n} S(n, j) · (H^{(2)})^j`: the moments of a Poisson variable
/// whose mean is the 2-hop chain kernel.
pub fn twohop_moment_stirling(n: usize) -> Result<ClosedForm> {
    if n == 0 {
        return Err(Error::InvalidParams("moment order n must be >= 1".into()));
    }
    let table = Stirling2Table::new(n);
    let h2 = ClosedForm::from(chain_kernel(2));
    let mut out = ClosedForm::zero();
    let mut power = h2.clone();
    for j in 1..=n {
        let s: BigUint = table.get(n, j);
        out = &out + &power.scale(&BigRational::from_integer(s.into()));
        power = &power * &h2;
    }
    Ok(out)
}

pub fn evaluate_query(q: MomentQuery, params: &ModelParams) -> Result<Evaluation> {
    MomentEngine::default().evaluate(q, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn t(c: i64, p: u32, det: u64, num: i64, den: i64) -> ClosedFormTerm {
        ClosedFormTerm::small(c, p, det, num, den)
    }

    #[test]
    fn means() {
        assert_eq!(khop_mean(1).unwrap().terms(), vec![t(1, 0, 1, 1, 1)]);
        assert_eq!(khop_mean(2).unwrap().terms(), vec![t(1, 1, 2, 1, 2)]);
        assert_eq!(khop_mean(4).unwrap().terms(), vec![t(1, 3, 4, 1, 4)]);
        assert!(khop_mean(0).is_err());
    }

    #[test]
    fn first_moment_is_the_mean() {
        for k in 2..=6 {
            let m = khop_moment(MomentQuery::new(k, 1).unwrap()).unwrap();
            assert_eq!(m, khop_mean(k).unwrap());
        }
    }

    #[test]
    fn two_hop_second_moment() {
        let m = khop_moment(MomentQuery::new(2, 2).unwrap()).unwrap();
        assert_eq!(m.terms(), vec![t(1, 1, 2, 1, 2), t(1, 2, 4, 1, 1)]);
    }

    #[test]
    fn stirling_forms() {
        assert_eq!(twohop_moment_stirling(1).unwrap(), khop_mean(2).unwrap());
        let h = ClosedForm::from(chain_kernel(2));
        let three = twohop_moment_stirling(3).unwrap();
        let expected = &(&h.pow(3) + &h.pow(2).scale(&BigRational::from_integer(3.into()))) + &h;
        assert_eq!(three, expected);
    }

    #[test]
    fn two_hop_variance_equals_mean() {
        assert_eq!(khop_variance(2).unwrap(), khop_mean(2).unwrap());
    }

    #[test]
    fn three_hop_variance_has_four_terms() {
        let v = khop_variance(3).unwrap();
        assert_eq!(
            v.terms(),
            vec![
                t(1, 2, 3, 1, 3),
                t(1, 2, 8, 1, 1),
                t(2, 3, 8, 1, 2),
                t(2, 3, 12, 3, 4),
            ]
        );
    }

    #[test]
    fn squared_mean_cancels_exactly() {
        let mut eng = MomentEngine::default();
        for k in 2..=4 {
            let m2 = eng.moment(MomentQuery::new(k, 2).unwrap()).unwrap();
            let mean = eng.mean(k).unwrap();
            let sq = (&mean * &mean).terms().remove(0);
            assert_eq!(
                m2.coefficient(&sq.key()),
                BigRational::from_integer(1.into())
            );
            let (var, raw) = eng.variance_with_count(k).unwrap();
            assert!(!var.contains_key(&sq.key()));
            if k == 4 {
                assert_eq!(raw, 33);
            }
        }
    }

    #[test]
    fn one_hop_moments_collapse() {
        let m = khop_moment(MomentQuery::new(1, 3).unwrap()).unwrap();
        assert_eq!(m, khop_mean(1).unwrap());
    }

    #[test]
    fn evaluation_examples() {
        let params = ModelParams::new(1.0, 1.0, 2, 1.0).unwrap();
        let e = evaluate_query(MomentQuery::new(3, 1).unwrap(), &params).unwrap();
        assert!((e.value - PI * PI / 3.0 * (-1.0f64 / 3.0).exp()).abs() < 1e-12);

        let zero = ModelParams::new(0.0, 1.0, 2, 1.0).unwrap();
        let e = evaluate_query(MomentQuery::new(3, 2).unwrap(), &zero).unwrap();
        assert_eq!(e.value, 0.0);

        let at0 = ModelParams::new(1.0, 1.0, 2, 0.0).unwrap();
        let v = khop_variance(3).unwrap().eval(&at0);
        let p3 = PI.powi(3);
        let p2 = PI * PI;
        let expected = 2.0 * p3 / 8.0 + p2 / 3.0 + 2.0 * p3 / 12.0 + p2 / 8.0;
        assert!((v - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn memoized_results_are_stable() {
        let mut eng = MomentEngine::new(16, Parallelism::Sequential);
        let q = MomentQuery::new(3, 2).unwrap();
        let a = eng.moment_with_count(q).unwrap();
        let b = eng.moment_with_count(q).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1, 7);
    }

    #[test]
    fn limit_errors_propagate() {
        let mut eng = MomentEngine::new(8, Parallelism::Sequential);
        assert!(matches!(
            eng.moment(MomentQuery::new(6, 2).unwrap()),
            Err(Error::PartitionLimit { .. })
        ));
    }

    #[test]
    fn variance_is_nonnegative_on_a_grid() {
        let mut eng = MomentEngine::default();
        for k in 2..=5 {
            let var = eng.variance(k).unwrap();
            for &lambda in &[0.1, 1.0, 3.0] {
                for &beta in &[0.3, 1.0, 2.0] {
                    for d in 1..=3 {
                        for &s in &[0.0, 0.5, 4.0] {
                            let p = ModelParams::new(lambda, beta, d, s).unwrap();
                            assert!(var.eval(&p) >= 0.0, "k={k} {p:?}");
                        }
                    }
                }
            }
        }
    }
}
