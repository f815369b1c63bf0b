//! Bundled invariant checks, run by `rcm selftest`.

use num_bigint::BigUint;

use crate::closed_form::{ClosedForm, ClosedFormTerm};
use crate::exec::Parallelism;
use crate::gaussian::{
    eliminate_by_merging, hop_graph_of_partition, integrate_gaussian_graph, HopGraph,
};
use crate::moments::{twohop_moment_stirling, MomentEngine, MomentQuery};
use crate::oracle;
use crate::partition::{count_nonflat, enumerate_nonflat};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

pub fn run_all(policy: Parallelism) -> Vec<Check> {
    let mut out = Vec::new();
    let mut engine = MomentEngine::new(crate::partition::DEFAULT_CELL_LIMIT, policy);

    // two-row counts: choose j merged cells per row and a bijection
    let mut ok = true;
    let mut detail = String::new();
    for r in 1..=6u64 {
        let expected: u64 = (0..=r).map(|j| binomial(r, j).pow(2) * factorial(j)).sum();
        let got = count_nonflat(2, r as usize, 16, policy).unwrap_or(0);
        ok &= got == expected;
        detail.push_str(&format!("r={r}:{got} "));
    }
    out.push(check("two-row partition counts", ok, detail.trim_end()));

    let valid = (1..=8usize)
        .flat_map(|n| (1..=8 / n).map(move |r| (n, r)))
        .all(|(n, r)| {
            enumerate_nonflat(n, r)
                .map(|it| it.into_iter().all(|p| p.validate().is_ok()))
                .unwrap_or(false)
        });
    out.push(check(
        "enumerated partitions satisfy invariants",
        valid,
        "n*r <= 8",
    ));

    let means_ok = (2..=6).all(|k| {
        let want = vec![ClosedFormTerm::small(
            1,
            (k - 1) as u32,
            k as u64,
            1,
            k as i64,
        )];
        matches!(engine.mean(k), Ok(m) if m.terms() == want)
    });
    out.push(check("k-hop means are chain kernels", means_ok, "k = 2..6"));

    let var3 = engine.variance(3).ok();
    let expected = ClosedForm::from_terms([
        ClosedFormTerm::small(2, 3, 8, 1, 2),
        ClosedFormTerm::small(1, 2, 3, 1, 3),
        ClosedFormTerm::small(2, 3, 12, 3, 4),
        ClosedFormTerm::small(1, 2, 8, 1, 1),
    ]);
    out.push(check(
        "3-hop variance closed form",
        var3.as_ref() == Some(&expected),
        var3.map(|v| v.to_json()).unwrap_or_else(|| "error".into()),
    ));

    let stirling_ok = (1..=5).all(|n| {
        let a = engine.moment(MomentQuery { k: 2, n }).ok();
        let b = twohop_moment_stirling(n).ok();
        a.is_some() && a == b
    });
    out.push(check(
        "2-hop moments match Stirling form",
        stirling_ok,
        "n = 1..5",
    ));

    let mut routes_ok = true;
    for p in enumerate_nonflat(2, 3).into_iter().flatten() {
        let g = hop_graph_of_partition(&p);
        let a = integrate_gaussian_graph(&g);
        let b = eliminate_by_merging(&g);
        routes_ok &= matches!((a, b), (Ok(t), Ok((det, c))) if t.det == det && t.c_eff == c);
    }
    out.push(check(
        "Laplacian and merge eliminations agree",
        routes_ok,
        "all (2,3) partition graphs",
    ));

    let g = HopGraph::new(3, [(0, 1), (1, 2), (2, 4), (1, 3), (3, 4)]).expect("valid graph");
    let quad = oracle::quadrature_graph_integral(&g, 1.0, 1.0).unwrap_or(f64::NAN);
    let t = integrate_gaussian_graph(&g).expect("anchored");
    let closed = std::f64::consts::PI.powf(1.5) / (8.0f64).sqrt() * (-0.5f64).exp();
    out.push(check(
        "closed form matches quadrature",
        t.det == BigUint::from(8u32) && ((quad - closed) / closed).abs() < 1e-6,
        format!("quadrature {quad:.12}, closed form {closed:.12}"),
    ));

    out
}
