//! Brute-force valuations of Gaussian graph integrals.
//!
//! These exist only to certify [`crate::gaussian`]: they integrate the raw
//! integrand `exp(−β Σ_{edges} (z_a − z_b)²)` numerically and know nothing of
//! Laplacians. The source sits at 0 and the sink at `√s` on the first axis.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::gaussian::HopGraph;
use crate::sim::stream;

/// Quadrature handles at most this many free nodes (nested 1-D rules).
pub const QUADRATURE_MAX_FREE: usize = 3;
/// Monte Carlo handles at most this many free nodes.
pub const MC_MAX_FREE: usize = 6;

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: u32 = 40;
const QUAD_INITIAL_PIECES: usize = 8;

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth >= QUAD_MAX_DEPTH {
        return value;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth + 1) + adaptive(f, m, b, 0.5 * tol, depth + 1)
}

/// Adaptive integral of a non-negative function over `[a, b]` to relative
/// accuracy `rel`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel: f64) -> f64 {
    let width = (b - a) / QUAD_INITIAL_PIECES as f64;
    let pieces: Vec<(f64, f64)> = (0..QUAD_INITIAL_PIECES)
        .map(|i| (a + i as f64 * width, a + (i + 1) as f64 * width))
        .collect();
    let rough: f64 = pieces
        .iter()
        .map(|&(x, y)| gauss_kronrod(&mut f, x, y).0.abs())
        .sum();
    if rough == 0.0 {
        return 0.0;
    }
    let tol = (rel * rough / QUAD_INITIAL_PIECES as f64).max(f64::MIN_POSITIVE);
    pieces
        .iter()
        .map(|&(x, y)| adaptive(&mut f, x, y, tol, 0))
        .sum()
}

fn energy(edges: &[(usize, usize)], z: &[f64]) -> f64 {
    edges
        .iter()
        .map(|&(a, b)| {
            let d = z[a] - z[b];
            d * d
        })
        .sum()
}

/// Nested adaptive quadrature of the graph integrand at `d = 1`, without
/// the `λ^p` factor.
///
/// Every free node ranges over `[−L, L + √s]` with
/// `L = sqrt(p · ln(10¹²) / β)`, wide enough for a free node hanging `p`
/// hops off a terminal.
pub fn quadrature_graph_integral(g: &HopGraph, beta: f64, s: f64) -> Result<f64> {
    let p = g.num_free();
    if p > QUADRATURE_MAX_FREE {
        return Err(Error::OracleLimit {
            p,
            max: QUADRATURE_MAX_FREE,
        });
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut z = vec![0.0; g.num_nodes()];
    z[g.sink()] = s.sqrt();
    if p == 0 {
        return Ok((-beta * energy(&edges, &z)).exp());
    }
    let half = (p as f64 * 1e12f64.ln() / beta).sqrt();
    let (lo, hi) = (-half, half + s.sqrt());
    Ok(nested(&edges, beta, &mut z, 1, p, lo, hi))
}

fn nested(
    edges: &[(usize, usize)],
    beta: f64,
    z: &mut Vec<f64>,
    node: usize,
    p: usize,
    lo: f64,
    hi: f64,
) -> f64 {
    integrate_1d(
        |x| {
            z[node] = x;
            if node == p {
                (-beta * energy(edges, z)).exp()
            } else {
                nested(edges, beta, z, node + 1, p, lo, hi)
            }
        },
        lo,
        hi,
        QUAD_REL_TOL,
    )
}

/// Importance-sampling proposal for one free node: centre on the segment
/// between the terminals, spread growing with the hop distance to the
/// nearest terminal.
#[derive(Clone, Debug)]
struct Proposal {
    centre: f64,
    sigma: f64,
}

fn proposals(g: &HopGraph, beta: f64, s: f64) -> Vec<Proposal> {
    let from_source = g.hop_distances(HopGraph::SOURCE);
    let from_sink = g.hop_distances(g.sink());
    let len = s.sqrt();
    (1..=g.num_free())
        .map(|v| {
            let (a, b) = (from_source[v], from_sink[v]);
            let t = match (a, b) {
                (Some(a), Some(b)) => a as f64 / (a + b) as f64,
                (Some(_), None) => 0.0,
                (None, Some(_)) => 1.0,
                (None, None) => 0.5,
            };
            let h = a.into_iter().chain(b).min().unwrap_or(1).max(1) as f64;
            Proposal {
                centre: t * len,
                sigma: h * (2.0 / beta).sqrt(),
            }
        })
        .collect()
}

const MC_CHUNK: usize = 4096;

/// Monte Carlo estimate of the graph integral in `d` dimensions (without the
/// `λ^p` factor) and its standard error.
pub fn mc_graph_integral_nd(
    g: &HopGraph,
    beta: f64,
    s: f64,
    d: usize,
    samples: usize,
    seed: u64,
    policy: Parallelism,
) -> Result<(f64, f64)> {
    let p = g.num_free();
    if p > MC_MAX_FREE {
        return Err(Error::OracleLimit {
            p,
            max: MC_MAX_FREE,
        });
    }
    if d == 0 || samples == 0 {
        return Err(Error::InvalidParams(
            "need d >= 1 and at least one sample".into(),
        ));
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let n_nodes = g.num_nodes();
    let sink = g.sink();
    if p == 0 {
        let mut z = vec![0.0; n_nodes];
        z[sink] = s.sqrt();
        return Ok(((-beta * energy(&edges, &z)).exp().powi(d as i32), 0.0));
    }
    let props = proposals(g, beta, s);
    let log_norm: f64 = props
        .iter()
        .map(|q| -(q.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln())
        .sum::<f64>()
        * d as f64;

    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64, usize)> = exec::map_indexed(policy, chunks, |c| {
        let mut rng = stream::substream(&[stream::TAG_ORACLE, seed, c as u64]);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        // coords[axis][node]
        let mut coords = vec![vec![0.0; n_nodes]; d];
        coords[0][sink] = s.sqrt();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..count {
            let mut log_q = log_norm;
            let mut e = 0.0;
            for (axis, z) in coords.iter_mut().enumerate() {
                for (i, q) in props.iter().enumerate() {
                    let u: f64 = rng.sample(StandardNormal);
                    let centre = if axis == 0 { q.centre } else { 0.0 };
                    z[i + 1] = centre + q.sigma * u;
                    log_q -= 0.5 * u * u;
                }
                e += energy(&edges, z);
            }
            let w = (-beta * e - log_q).exp();
            sum += w;
            sum_sq += w * w;
        }
        (sum, sum_sq, count)
    });
    let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0usize);
    for (a, b, c) in partials {
        sum += a;
        sum_sq += b;
        n += c;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / nf).sqrt()))
}

/// One-dimensional Monte Carlo estimate and standard error.
pub fn mc_graph_integral(
    g: &HopGraph,
    beta: f64,
    s: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    mc_graph_integral_nd(g, beta, s, 1, samples, seed, Parallelism::default())
}
