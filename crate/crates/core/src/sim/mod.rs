//! Direct Monte Carlo of the Poisson random-connection model.
//!
//! Each run draws a fresh Poisson configuration in a box around the two
//! terminals, decides edges lazily with keyed Bernoulli draws, and counts the
//! k-hop paths from source to sink through distinct configuration points.

pub mod stream;

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};

/// Path counting is exhaustive DFS; longer paths blow up combinatorially.
pub const MAX_HOPS: usize = 5;

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParams(
                "window corners must share a dimension >= 1".into(),
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| a.partial_cmp(b) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidParams(
                "window must have positive volume".into(),
            ));
        }
        Ok(Window { lo, hi })
    }

    /// Bounding box of `points` expanded by `margin` on every side.
    pub fn around(points: &[&[f64]], margin: f64) -> Result<Self> {
        let d = points[0].len();
        let lo = (0..d)
            .map(|i| points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min) - margin)
            .collect();
        let hi = (0..d)
            .map(|i| {
                points
                    .iter()
                    .map(|p| p[i])
                    .fold(f64::NEG_INFINITY, f64::max)
                    + margin
            })
            .collect();
        Window::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Strictly inside, at least `margin` away from every face.
    pub fn contains_with_margin(&self, p: &[f64], margin: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *x - a >= margin && b - *x >= margin)
    }
}

/// Margin `m` with `exp(−β m²) = ε`: a single edge to anything farther than
/// `m` from the window has probability below `ε`.
pub fn truncation_margin(beta: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "beta must be > 0, got {beta}"
        )));
    }
    Ok((-epsilon.ln() / beta).sqrt())
}

/// Crude indicator of path mass lost to truncation: `k · e^{−βm²} · λ · |W|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationDiagnostic {
    pub margin: f64,
    pub window_volume: f64,
    pub neglected_mass: f64,
}

impl TruncationDiagnostic {
    pub fn new(beta: f64, k: usize, epsilon: f64, lambda: f64, window: &Window) -> Result<Self> {
        let margin = truncation_margin(beta, epsilon)?;
        let vol = window.volume();
        Ok(TruncationDiagnostic {
            margin,
            window_volume: vol,
            neglected_mass: k as f64 * (-beta * margin * margin).exp() * lambda * vol,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lambda: f64,
    pub beta: f64,
    pub source: Vec<f64>,
    pub sink: Vec<f64>,
    pub window: Window,
    pub runs: usize,
    pub seed: u64,
    pub k_list: Vec<usize>,
    pub moment_orders: Vec<u32>,
    pub epsilon: f64,
    /// Number of batches for batch-means standard errors.
    pub batches: usize,
}

impl SimConfig {
    /// Source at the origin, sink at `(dist, 0, …, 0)`, window from the
    /// `epsilon` margin rule. Other fields take their defaults and may be
    /// overwritten before running.
    pub fn around_terminals(
        lambda: f64,
        beta: f64,
        d: usize,
        dist: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParams("dimension d must be >= 1".into()));
        }
        if !(dist.is_finite() && dist >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "distance must be >= 0, got {dist}"
            )));
        }
        let source = vec![0.0; d];
        let mut sink = vec![0.0; d];
        sink[0] = dist;
        let margin = truncation_margin(beta, epsilon)?;
        let window = Window::around(&[&source, &sink], margin)?;
        let cfg = SimConfig {
            lambda,
            beta,
            source,
            sink,
            window,
            runs: 10_000,
            seed: 42,
            k_list: vec![2, 3],
            moment_orders: vec![1, 2],
            epsilon,
            batches: 100,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.source.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be > 0, got {}", self.beta));
        }
        if self.sink.len() != self.dim() || self.window.dim() != self.dim() {
            return bad("source, sink and window must share a dimension".into());
        }
        for t in [&self.source, &self.sink] {
            if !self.window.contains_with_margin(t, f64::MIN_POSITIVE) {
                return bad(format!("terminal {t:?} is not strictly inside the window"));
            }
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if self.batches == 0 {
            return bad("batches must be >= 1".into());
        }
        if self.k_list.is_empty() || self.moment_orders.is_empty() {
            return bad("need at least one hop count and one moment order".into());
        }
        for &k in &self.k_list {
            if k == 0 || k > MAX_HOPS {
                return Err(Error::PathLengthGuard { k, max: MAX_HOPS });
            }
        }
        if self.moment_orders.contains(&0) {
            return bad("moment orders must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Poisson(λ·|W|) points, uniform in the window.
pub fn sample_configuration<R: Rng + ?Sized>(
    window: &Window,
    lambda: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mean = lambda * window.volume();
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean)
        .expect("positive Poisson mean")
        .sample(rng) as usize;
    (0..count)
        .map(|_| {
            window
                .lo
                .iter()
                .zip(&window.hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect()
        })
        .collect()
}

/// Gaussian connection probability `exp(−β‖a − b‖²)`.
pub fn connection_probability(beta: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-beta * d2).exp()
}

/// Random graph interface used by the path counter.
pub trait Adjacency {
    fn node_count(&self) -> usize;
    fn source(&self) -> usize;
    fn sink(&self) -> usize;
    fn connected(&mut self, a: usize, b: usize) -> bool;
}

/// Materialised symmetric adjacency matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseAdjacency {
    n: usize,
    source: usize,
    sink: usize,
    bits: Vec<bool>,
}

impl DenseAdjacency {
    pub fn new(n: usize, source: usize, sink: usize) -> Self {
        DenseAdjacency {
            n,
            source,
            sink,
            bits: vec![false; n * n],
        }
    }

    pub fn set(&mut self, a: usize, b: usize, on: bool) {
        if a != b {
            self.bits[a * self.n + b] = on;
            self.bits[b * self.n + a] = on;
        }
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.n + b]
    }
}

impl Adjacency for DenseAdjacency {
    fn node_count(&self) -> usize {
        self.n
    }
    fn source(&self) -> usize {
        self.source
    }
    fn sink(&self) -> usize {
        self.sink
    }
    fn connected(&mut self, a: usize, b: usize) -> bool {
        self.get(a, b)
    }
}

fn pair_index(a: usize, b: usize) -> usize {
    let (i, j) = (a.min(b), a.max(b));
    j * (j - 1) / 2 + i
}

/// Edges of one run, drawn on first query and cached.
///
/// Node 0 is the source, node 1 the sink, nodes `2..` the configuration
/// points. The draw for pair `{i, j}` is keyed by `(seed, run, i, j)`.
#[derive(Clone, Debug)]
pub struct LazyEdges {
    nodes: Vec<Vec<f64>>,
    beta: f64,
    key: [u64; 2],
    // 0 = not drawn, 1 = absent, 2 = present
    cache: Vec<u8>,
    draws: usize,
}

impl LazyEdges {
    pub fn new(
        source: &[f64],
        sink: &[f64],
        points: Vec<Vec<f64>>,
        beta: f64,
        key: [u64; 2],
    ) -> Self {
        let mut nodes = Vec::with_capacity(points.len() + 2);
        nodes.push(source.to_vec());
        nodes.push(sink.to_vec());
        nodes.extend(points);
        let n = nodes.len();
        LazyEdges {
            nodes,
            beta,
            key,
            cache: vec![0; n * (n - 1) / 2],
            draws: 0,
        }
    }

    /// Number of Bernoulli draws actually performed so far.
    pub fn draws(&self) -> usize {
        self.draws
    }

    fn draw(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i.min(j), i.max(j));
        let u = stream::uniform(&[
            stream::TAG_EDGE,
            self.key[0],
            self.key[1],
            i as u64,
            j as u64,
        ]);
        u < connection_probability(self.beta, &self.nodes[i], &self.nodes[j])
    }
}

impl Adjacency for LazyEdges {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }
    fn source(&self) -> usize {
        0
    }
    fn sink(&self) -> usize {
        1
    }
    fn connected(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let idx = pair_index(a, b);
        match self.cache[idx] {
            1 => false,
            2 => true,
            _ => {
                let on = self.draw(a, b);
                self.cache[idx] = if on { 2 } else { 1 };
                self.draws += 1;
                on
            }
        }
    }
}

/// Draws every pair at once, using the same keyed draws as [`LazyEdges`].
pub fn sample_rcm_edges(
    source: &[f64],
    sink: &[f64],
    points: Vec<Vec<f64>>,
    beta: f64,
    key: [u64; 2],
) -> DenseAdjacency {
    let mut lazy = LazyEdges::new(source, sink, points, beta, key);
    let n = lazy.node_count();
    let mut dense = DenseAdjacency::new(n, 0, 1);
    for a in 0..n {
        for b in a + 1..n {
            let on = lazy.connected(a, b);
            dense.set(a, b, on);
        }
    }
    dense
}

/// Number of ordered tuples `(z_1, …, z_{k−1})` of distinct non-terminal
/// nodes with `source ~ z_1 ~ … ~ z_{k−1} ~ sink`.
pub fn count_khop_paths<A: Adjacency + ?Sized>(adj: &mut A, k: usize) -> Result<u64> {
    if k == 0 || k > MAX_HOPS {
        return Err(Error::PathLengthGuard { k, max: MAX_HOPS });
    }
    let (s, t) = (adj.source(), adj.sink());
    if k == 1 {
        return Ok(adj.connected(s, t) as u64);
    }
    let mut visited = vec![false; adj.node_count()];
    visited[s] = true;
    visited[t] = true;
    Ok(extend(adj, s, t, k - 1, &mut visited))
}

fn extend<A: Adjacency + ?Sized>(
    adj: &mut A,
    at: usize,
    sink: usize,
    remaining: usize,
    visited: &mut [bool],
) -> u64 {
    if remaining == 0 {
        return adj.connected(at, sink) as u64;
    }
    let mut total = 0;
    for next in 0..visited.len() {
        if visited[next] || !adj.connected(at, next) {
            continue;
        }
        visited[next] = true;
        total += extend(adj, next, sink, remaining - 1, visited);
        visited[next] = false;
    }
    total
}

/// Path counts of one run, one entry per `cfg.k_list` element.
pub fn simulate_run(cfg: &SimConfig, run: u64) -> Vec<u64> {
    let mut rng = stream::substream(&[stream::TAG_POINTS, cfg.seed, run]);
    let points = sample_configuration(&cfg.window, cfg.lambda, &mut rng);
    let mut edges = LazyEdges::new(&cfg.source, &cfg.sink, points, cfg.beta, [cfg.seed, run]);
    cfg.k_list
        .iter()
        .map(|&k| count_khop_paths(&mut edges, k).expect("k validated"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: usize,
    pub order: u32,
    pub estimate: f64,
    /// `None` when too few runs for a batch-means error.
    pub stderr: Option<f64>,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralEstimate {
    pub k: usize,
    pub mean: f64,
    pub mean_stderr: Option<f64>,
    pub variance: f64,
    pub variance_stderr: Option<f64>,
    /// Variance over mean; 1 for a Poisson count.
    pub dispersion: f64,
    pub dispersion_stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountHistogram {
    pub k: usize,
    /// `counts[j]` = number of runs whose path count was `j`.
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub moments: Vec<MomentEstimate>,
    pub central: Vec<CentralEstimate>,
    pub histograms: Vec<CountHistogram>,
    pub truncation: TruncationDiagnostic,
}

impl SimResult {
    pub fn moment(&self, k: usize, order: u32) -> Option<&MomentEstimate> {
        self.moments.iter().find(|m| m.k == k && m.order == order)
    }

    pub fn central(&self, k: usize) -> Option<&CentralEstimate> {
        self.central.iter().find(|c| c.k == k)
    }

    pub fn histogram(&self, k: usize) -> Option<&CountHistogram> {
        self.histograms.iter().find(|h| h.k == k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Columns: `k,order,estimate,stderr,runs,seed,margin`. Variance rows use
    /// `var` in the order column; a missing standard error is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,order,estimate,stderr,runs,seed,margin\n");
        let se = |s: Option<f64>| s.map(|v| v.to_string()).unwrap_or_default();
        for m in &self.moments {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.k,
                m.order,
                m.estimate,
                se(m.stderr),
                m.runs,
                self.config.seed,
                self.truncation.margin
            );
        }
        for c in &self.central {
            let _ = writeln!(
                out,
                "{},var,{},{},{},{},{}",
                c.k,
                c.variance,
                se(c.variance_stderr),
                self.config.runs,
                self.config.seed,
                self.truncation.margin
            );
        }
        out
    }
}

/// Contiguous batches `[i·n/b, (i+1)·n/b)`; at most `n / min_size` of them.
fn batch_bounds(n: usize, batches: usize, min_size: usize) -> Vec<(usize, usize)> {
    let b = batches.min(n / min_size);
    (0..b).map(|i| (i * n / b, (i + 1) * n / b)).collect()
}

fn mean_and_se(stats: &[f64]) -> (f64, Option<f64>) {
    let b = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / b;
    if stats.len() < 2 {
        return (mean, None);
    }
    let var = stats.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1.0);
    (mean, Some((var / b).sqrt()))
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Runs the simulation. Runs are independent and keyed by index, so the
/// result is bit-identical for any worker count.
pub fn run_simulation(cfg: &SimConfig, policy: Parallelism) -> Result<SimResult> {
    cfg.validate()?;
    let per_run: Vec<Vec<u64>> =
        exec::map_indexed(policy, cfg.runs, |run| simulate_run(cfg, run as u64));

    let mut moments = Vec::new();
    let mut central = Vec::new();
    let mut histograms = Vec::new();
    for (slot, &k) in cfg.k_list.iter().enumerate() {
        let counts: Vec<f64> = per_run.iter().map(|c| c[slot] as f64).collect();
        let n = counts.len();

        for &order in &cfg.moment_orders {
            let powers: Vec<f64> = counts.iter().map(|c| c.powi(order as i32)).collect();
            let estimate = powers.iter().sum::<f64>() / n as f64;
            let batch_means: Vec<f64> = batch_bounds(n, cfg.batches, 1)
                .into_iter()
                .map(|(a, b)| powers[a..b].iter().sum::<f64>() / (b - a) as f64)
                .collect();
            let stderr = mean_and_se(&batch_means).1;
            moments.push(MomentEstimate {
                k,
                order,
                estimate,
                stderr,
                runs: n,
            });
        }

        let mean = counts.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 { sample_variance(&counts) } else { 0.0 };
        let bounds = batch_bounds(n, cfg.batches, 2);
        let mean_se = mean_and_se(
            &batch_bounds(n, cfg.batches, 1)
                .into_iter()
                .map(|(a, b)| counts[a..b].iter().sum::<f64>() / (b - a) as f64)
                .collect::<Vec<_>>(),
        )
        .1;
        let batch_var: Vec<f64> = bounds
            .iter()
            .map(|&(a, b)| sample_variance(&counts[a..b]))
            .collect();
        let variance_stderr = if batch_var.is_empty() {
            None
        } else {
            mean_and_se(&batch_var).1
        };
        let batch_disp: Vec<f64> = bounds
            .iter()
            .zip(&batch_var)
            .map(|(&(a, b), v)| {
                let m = counts[a..b].iter().sum::<f64>() / (b - a) as f64;
                if m > 0.0 {
                    v / m
                } else {
                    0.0
                }
            })
            .collect();
        let dispersion_stderr = if batch_disp.is_empty() {
            None
        } else {
            mean_and_se(&batch_disp).1
        };
        central.push(CentralEstimate {
            k,
            mean,
            mean_stderr: mean_se,
            variance,
            variance_stderr,
            dispersion: if mean > 0.0 { variance / mean } else { 0.0 },
            dispersion_stderr,
        });

        let max = counts.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
        let mut hist = vec![0u64; max + 1];
        for c in &counts {
            hist[*c as usize] += 1;
        }
        histograms.push(CountHistogram { k, counts: hist });
    }

    let k_max = cfg.k_list.iter().copied().max().unwrap_or(1);
    let truncation =
        TruncationDiagnostic::new(cfg.beta, k_max, cfg.epsilon, cfg.lambda, &cfg.window)?;
    Ok(SimResult {
        config: cfg.clone(),
        moments,
        central,
        histograms,
        truncation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson χ² goodness of fit of a count histogram against Poisson(`mean`).
/// Adjacent cells are pooled until each expects at least 5 observations, and
/// the upper tail is folded into the last cell.
pub fn poisson_chi_square(histogram: &[u64], mean: f64) -> ChiSquareTest {
    let total: u64 = histogram.iter().sum();
    let n = total as f64;
    if total == 0 || mean <= 0.0 {
        let all_zero = histogram.iter().skip(1).all(|&c| c == 0);
        return ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: if all_zero { 1.0 } else { 0.0 },
        };
    }
    let observed = |j: usize| histogram.get(j).copied().unwrap_or(0) as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    let mut pmf = (-mean).exp();
    let mut cdf = 0.0;
    let mut j = 0usize;
    loop {
        obs += observed(j);
        exp += n * pmf;
        cdf += pmf;
        let tail = (1.0 - cdf).max(0.0);
        if n * tail < 5.0 {
            let rest: f64 = (j + 1..histogram.len()).map(observed).sum();
            cells.push((obs + rest, exp + n * tail));
            break;
        }
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
        j += 1;
        pmf *= mean / j as f64;
    }
    // a short final cell is pooled into its neighbour
    if cells.len() > 1 && cells.last().unwrap().1 < 5.0 {
        let (o, e) = cells.pop().unwrap();
        let last = cells.last_mut().unwrap();
        last.0 += o;
        last.1 += e;
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}
