//! Hop graphs and their exact Gaussian integrals.
//!
//! For a graph on `{SOURCE, 1..=p, SINK}` with unit edge weights,
//!
//! ```text
//! λ^p ∫ exp(−β Σ_{edges} ‖z_a − z_b‖²) dz_1…dz_p
//!     = λ^p (π/β)^{p·d/2} det(L)^{−d/2} exp(−β c_eff ‖x − y‖²)
//! ```
//!
//! where `L` is the Laplacian grounded at both terminals and `c_eff` is the
//! source–sink effective conductance. Two independent exact routes are
//! provided: [`integrate_gaussian_graph`] (Bareiss determinant plus a rational
//! linear solve) and [`eliminate_by_merging`] (one node at a time, folding
//! pairwise Gaussian merges).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::closed_form::ClosedFormTerm;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Undirected simple graph between two terminals.
///
/// Node ids: `0` is the source, `1..=num_free` are free (integrated) nodes and
/// `num_free + 1` is the sink.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HopGraph {
    num_free: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl HopGraph {
    pub const SOURCE: usize = 0;

    /// Builds a graph, deduplicating edges. Self-loops, out-of-range ids and a
    /// direct source–sink edge alongside free nodes are rejected.
    pub fn new<I>(num_free: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let sink = num_free + 1;
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a > sink || b > sink {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {num_free} free nodes"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        if num_free > 0 && set.contains(&(Self::SOURCE, sink)) {
            return Err(Error::InvalidGraph(
                "direct source-sink edge in a graph with free nodes".into(),
            ));
        }
        Ok(HopGraph {
            num_free,
            edges: set,
        })
    }

    /// Simple path `SOURCE – 1 – … – (r−1) – SINK` with `r` edges.
    pub fn path(r: usize) -> Self {
        assert!(r >= 1, "a path needs at least one edge");
        HopGraph::new(r - 1, (0..r).map(|i| (i, i + 1))).expect("path is valid")
    }

    pub fn num_free(&self) -> usize {
        self.num_free
    }

    pub fn sink(&self) -> usize {
        self.num_free + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.num_free + 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Breadth-first hop distance from `start` to every node, treating both
    /// terminals as dead ends unless they are `start`.
    pub fn hop_distances(&self, start: usize) -> Vec<Option<usize>> {
        let adj = self.adjacency_lists();
        let mut dist = vec![None; self.num_nodes()];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            if v != start && self.is_terminal(v) {
                continue;
            }
            let dv = dist[v].unwrap();
            for &u in &adj[v] {
                if dist[u].is_none() {
                    dist[u] = Some(dv + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn is_terminal(&self, v: usize) -> bool {
        v == Self::SOURCE || v == self.sink()
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// First free node that cannot reach a terminal, if any.
    pub fn unanchored_node(&self) -> Option<usize> {
        let adj = self.adjacency_lists();
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::from([Self::SOURCE, self.sink()]);
        seen[Self::SOURCE] = true;
        seen[self.sink()] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        (1..=self.num_free).find(|&v| !seen[v])
    }

    /// Applies a permutation of the free nodes (`perm[i]` is the new id of
    /// free node `i + 1`).
    pub fn relabel(&self, perm: &[usize]) -> Result<HopGraph> {
        assert_eq!(perm.len(), self.num_free);
        let map = |v: usize| {
            if self.is_terminal(v) {
                v
            } else {
                perm[v - 1]
            }
        };
        HopGraph::new(
            self.num_free,
            self.edges.iter().map(|&(a, b)| (map(a), map(b))),
        )
    }

    /// Grounded Laplacian on the free nodes plus each node's edge count to the
    /// source.
    fn grounded_system(&self) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
        let p = self.num_free;
        let sink = self.sink();
        let mut lap = vec![vec![BigInt::zero(); p]; p];
        let mut to_source = vec![BigInt::zero(); p];
        for &(a, b) in &self.edges {
            for (u, v) in [(a, b), (b, a)] {
                if self.is_terminal(u) {
                    continue;
                }
                let i = u - 1;
                lap[i][i] += 1;
                if v == Self::SOURCE {
                    to_source[i] += 1;
                } else if v != sink {
                    lap[i][v - 1] -= 1;
                }
            }
        }
        (lap, to_source)
    }
}

/// Turns a partition's hop chains into a graph: block `b` becomes free node
/// `b`, and each row `l` contributes the chain
/// `SOURCE – ζ(l,1) – … – ζ(l,r) – SINK`. Repeated node pairs collapse to a
/// single edge, since an indicator squared is itself.
pub fn hop_graph_of_partition(p: &Partition) -> HopGraph {
    let r = p.r();
    let sink = p.num_blocks() + 1;
    let mut edges = Vec::with_capacity(p.n() * (r + 1));
    for row in p.labels().chunks(r) {
        let mut prev = HopGraph::SOURCE;
        for &b in row {
            edges.push((prev, b as usize));
            prev = b as usize;
        }
        edges.push((prev, sink));
    }
    HopGraph::new(p.num_blocks(), edges).expect("non-flat partitions give simple graphs")
}

/// Integrates the graph's Gaussian kernel product over every free node.
///
/// Returns `coeff = 1`, `lambda_pow = p`, `det = det(L_grounded)` and
/// `c_eff` the effective conductance between the terminals.
pub fn integrate_gaussian_graph(g: &HopGraph) -> Result<ClosedFormTerm> {
    if let Some(node) = g.unanchored_node() {
        return Err(Error::DivergentIntegral { node });
    }
    let (lap, to_source) = g.grounded_system();
    let det = bareiss_det(lap.clone());
    if !det.is_positive() {
        // cannot happen for anchored graphs; the grounded Laplacian is then positive definite
        return Err(Error::DivergentIntegral { node: 1 });
    }
    let direct = if g.has_edge(HopGraph::SOURCE, g.sink()) {
        BigRational::one()
    } else {
        BigRational::zero()
    };
    let c_eff = if g.num_free() == 0 {
        direct
    } else {
        // potentials with the source held at 1 and the sink at 0
        let a: Vec<Vec<BigRational>> = lap
            .into_iter()
            .map(|row| row.into_iter().map(BigRational::from_integer).collect())
            .collect();
        let rhs: Vec<BigRational> = to_source
            .iter()
            .cloned()
            .map(BigRational::from_integer)
            .collect();
        let v = solve_rational(a, rhs);
        let mut current = direct;
        for (i, w) in to_source.iter().enumerate() {
            if !w.is_zero() {
                current += BigRational::from_integer(w.clone()) * (BigRational::one() - &v[i]);
            }
        }
        current
    };
    Ok(ClosedFormTerm {
        coeff: BigRational::one(),
        lambda_pow: g.num_free() as u32,
        det: det.magnitude().clone(),
        c_eff,
    })
}

/// Fraction-free Gaussian elimination. Every intermediate value is an exact
/// minor, so all divisions are exact.
fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Solves `a·x = b` exactly. `a` must be nonsingular.
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = a.len();
    for k in 0..n {
        let piv = (k..n)
            .find(|&i| !a[i][k].is_zero())
            .expect("grounded Laplacian is nonsingular");
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &a[k][k];
            for j in k..n {
                let t = &f * &a[k][j];
                a[i][j] -= t;
            }
            let t = &f * &b[k];
            b[i] -= t;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for j in k + 1..n {
            acc -= &a[k][j] * &x[j];
        }
        x[k] = acc / &a[k][k];
    }
    x
}

/// Affine combination of point symbols, as weights keyed by symbol id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AffinePoint(pub BTreeMap<usize, BigRational>);

impl AffinePoint {
    pub fn symbol(id: usize) -> Self {
        AffinePoint(BTreeMap::from([(id, BigRational::one())]))
    }

    pub fn weight(&self, id: usize) -> BigRational {
        self.0.get(&id).cloned().unwrap_or_else(BigRational::zero)
    }

    fn combine(
        a: &AffinePoint,
        wa: &BigRational,
        b: &AffinePoint,
        wb: &BigRational,
    ) -> AffinePoint {
        let mut out = BTreeMap::new();
        for (k, v) in &a.0 {
            *out.entry(*k).or_insert_with(BigRational::zero) += v * wa;
        }
        for (k, v) in &b.0 {
            *out.entry(*k).or_insert_with(BigRational::zero) += v * wb;
        }
        out.retain(|_, v| !v.is_zero());
        AffinePoint(out)
    }
}

/// `H_exponent(z, center) = exp(−exponent·‖z − center‖²)`, as a function of `z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianFactor {
    pub exponent: BigRational,
    pub center: AffinePoint,
}

impl GaussianFactor {
    pub fn new(exponent: BigRational, center: AffinePoint) -> Self {
        GaussianFactor { exponent, center }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeResult {
    pub merged: GaussianFactor,
    /// Exponent of the leftover factor `H_κ(center_a, center_b)`.
    pub coupling_exponent: BigRational,
}

/// Completes the square on a product of two Gaussian factors in the same
/// variable:
///
/// ```text
/// H_{β1}(z, y1) H_{β2}(z, y2) = H_{β1+β2}(z, (β1 y1 + β2 y2)/(β1+β2)) · H_{β1β2/(β1+β2)}(y1, y2)
/// ```
///
/// A zero exponent is allowed on one side (that factor is constant).
pub fn pairwise_gaussian_merge(a: &GaussianFactor, b: &GaussianFactor) -> MergeResult {
    let total = &a.exponent + &b.exponent;
    if total.is_zero() {
        return MergeResult {
            merged: a.clone(),
            coupling_exponent: BigRational::zero(),
        };
    }
    let wa = &a.exponent / &total;
    let wb = &b.exponent / &total;
    MergeResult {
        merged: GaussianFactor {
            center: AffinePoint::combine(&a.center, &wa, &b.center, &wb),
            exponent: total.clone(),
        },
        coupling_exponent: &a.exponent * &b.exponent / total,
    }
}

/// Integrates the free nodes one at a time by folding
/// [`pairwise_gaussian_merge`] over each node's incident factors. Returns
/// `(det, c_eff)`, which must match [`integrate_gaussian_graph`].
pub fn eliminate_by_merging(g: &HopGraph) -> Result<(BigUint, BigRational)> {
    let n = g.num_nodes();
    // quadratic form Q with energy zᵀQz = Σ w_ab ‖z_a − z_b‖²
    let mut q = vec![vec![BigRational::zero(); n]; n];
    for (a, b) in g.edges() {
        add_pair(
            &mut q,
            &AffinePoint::symbol(a),
            &AffinePoint::symbol(b),
            &BigRational::one(),
        );
    }
    let mut alive: Vec<bool> = vec![true; n];
    let mut det = BigRational::one();
    for v in 1..=g.num_free() {
        alive[v] = false;
        let incident: Vec<(usize, BigRational)> = (0..n)
            .filter(|&u| alive[u] && !q[v][u].is_zero())
            .map(|u| (u, -q[v][u].clone()))
            .collect();
        let Some(((u0, w0), rest)) = incident.split_first() else {
            return Err(Error::DivergentIntegral { node: v });
        };
        // drop v's edges from the form, then add back what merging leaves behind
        for (u, w) in &incident {
            q[*u][*u] -= w;
            q[*u][v] = BigRational::zero();
            q[v][*u] = BigRational::zero();
        }
        q[v][v] = BigRational::zero();
        let mut acc = GaussianFactor::new(w0.clone(), AffinePoint::symbol(*u0));
        for (u, w) in rest {
            let next = GaussianFactor::new(w.clone(), AffinePoint::symbol(*u));
            let res = pairwise_gaussian_merge(&acc, &next);
            add_pair(&mut q, &acc.center, &next.center, &res.coupling_exponent);
            acc = res.merged;
        }
        // ∫ H_W(z, c) dz contributes (π/(βW))^{d/2}
        det *= &acc.exponent;
    }
    if !det.is_integer() {
        return Err(Error::InvalidGraph(format!(
            "elimination produced a non-integral determinant {det}"
        )));
    }
    let c_eff = -q[HopGraph::SOURCE][g.sink()].clone();
    Ok((det.to_integer().magnitude().clone(), c_eff))
}

/// Adds `w·‖a − b‖²` to the quadratic form, for affine points `a` and `b`.
fn add_pair(q: &mut [Vec<BigRational>], a: &AffinePoint, b: &AffinePoint, w: &BigRational) {
    if w.is_zero() {
        return;
    }
    let minus_one = -BigRational::one();
    let diff = AffinePoint::combine(a, &BigRational::one(), b, &minus_one);
    let entries: Vec<(usize, BigRational)> = diff.0.into_iter().collect();
    for (i, ci) in &entries {
        for (j, cj) in &entries {
            q[*i][*j] += w * ci * cj;
        }
    }
}

/// Closed form of the `r`-fold chain convolution of `H_β` (the `r`-hop mean):
/// `λ^{r−1} (π/β)^{(r−1)d/2} r^{−d/2} exp(−β s / r)`.
pub fn chain_kernel(r: usize) -> ClosedFormTerm {
    assert!(r >= 1, "chain kernel needs r >= 1");
    ClosedFormTerm {
        coeff: BigRational::one(),
        lambda_pow: (r - 1) as u32,
        det: BigUint::from(r),
        c_eff: BigRational::new(BigInt::one(), BigInt::from(r)),
    }
}
