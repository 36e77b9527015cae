//! Dyadic patchworks: trees of nested sample ranges whose generation-`i`
//! members have diameter comparable to `2^{-i}·diam K`, approximating points
//! `Λ` on the tree, the polylines `g_i` through them, and `σ(Λ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{range_diameter, VerticalSamples};
use crate::curve::{dist, PolyCurve};
use crate::error::{Error, Result};
use crate::numeric::Compensated;

/// A node owns the closed sample range `lo..=hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchNode {
    pub id: usize,
    pub gen: usize,
    pub lo: usize,
    pub hi: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub diam: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patchwork {
    nodes: Vec<PatchNode>,
    levels: Vec<Vec<usize>>,
    diam_k: f64,
    mu: f64,
}

impl Patchwork {
    pub fn nodes(&self) -> &[PatchNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &PatchNode {
        &self.nodes[id]
    }

    /// Node ids of generation `i` in parameter order.
    pub fn level(&self, i: usize) -> &[usize] {
        &self.levels[i]
    }

    /// Largest generation present.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn diam_k(&self) -> f64 {
        self.diam_k
    }

    /// Smallest `μ` for which the tree satisfies the degree bound and the
    /// diameter window, as measured by the builder.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `[t_lo, t_hi]`.
    pub fn interval(&self, samples: &VerticalSamples, id: usize) -> (f64, f64) {
        let n = &self.nodes[id];
        (samples.ts()[n.lo], samples.ts()[n.hi])
    }

    /// Midpoint `m_v` of the parameter interval.
    pub fn midpoint(&self, samples: &VerticalSamples, id: usize) -> f64 {
        let (a, b) = self.interval(samples, id);
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchworkConfig {
    /// Window factor that every generation must respect; building stops at
    /// the first generation that would leave it.
    pub mu_hint: f64,
    pub max_depth: usize,
    /// Fewer generations than this is an error.
    pub min_depth: usize,
}

impl Default for PatchworkConfig {
    fn default() -> Self {
        PatchworkConfig { mu_hint: 64.0, max_depth: 40, min_depth: 1 }
    }
}

/// Splits `lo..=hi`, cutting whenever the running diameter reaches `target`.
/// A short last piece is merged into its predecessor.
fn split(pts: &[crate::heis::HeisPoint], lo: usize, hi: usize, target: f64) -> Vec<usize> {
    let mut cuts = vec![lo];
    let mut start = lo;
    let mut d = 0.0f64;
    for j in lo + 1..=hi {
        for s in start..j {
            d = d.max(pts[s].kor_dist_unchecked(&pts[j]));
        }
        if d >= target && j < hi {
            cuts.push(j);
            start = j;
            d = 0.0;
        }
    }
    cuts.push(hi);
    if cuts.len() > 2 && range_diameter(pts, start, hi) < 0.5 * target {
        cuts.remove(cuts.len() - 2);
    }
    cuts
}

fn window_ratio(diam: f64, gen: usize, diam_k: f64) -> f64 {
    let nominal = diam_k * (-(gen as f64)).exp2();
    let r = diam / nominal;
    r.max(1.0 / r)
}

/// Greedy level-by-level construction. Each generation-`i` range is cut into
/// consecutive pieces of diameter about `2^{-(i+1)}·diam K`; ranges that cannot
/// be cut get a single child.
pub fn build_patchwork(samples: &VerticalSamples, cfg: &PatchworkConfig) -> Result<Patchwork> {
    if !(cfg.mu_hint > 1.0) {
        return Err(Error::invalid(format!("mu must exceed 1, got {}", cfg.mu_hint)));
    }
    let pts = samples.points();
    let last = pts.len() - 1;
    let diam_k = samples.diameter();
    if !(diam_k > 0.0) {
        return Err(Error::Patchwork { node: 0, generation: 0, reason: "curve has zero diameter".into() });
    }
    let mut nodes = vec![PatchNode { id: 0, gen: 0, lo: 0, hi: last, parent: None, children: Vec::new(), diam: diam_k }];
    let mut levels = vec![vec![0usize]];
    let mut mu = 1.0f64;
    let mut stop_reason = None;
    while levels.len() <= cfg.max_depth {
        let gen = levels.len();
        let target = diam_k * (-(gen as f64)).exp2();
        let parents = levels.last().unwrap().clone();
        let pieces: Vec<Vec<(usize, usize, f64)>> = parents
            .par_iter()
            .map(|&p| {
                let n = &nodes[p];
                let cuts = split(pts, n.lo, n.hi, target);
                cuts.windows(2).map(|w| (w[0], w[1], range_diameter(pts, w[0], w[1]))).collect()
            })
            .collect();
        let mut level_mu = 1.0f64;
        let mut offender = None;
        for (pi, kids) in pieces.iter().enumerate() {
            level_mu = level_mu.max(kids.len() as f64);
            for &(lo, hi, d) in kids {
                let r = if d > 0.0 { window_ratio(d, gen, diam_k) } else { f64::INFINITY };
                if r > level_mu {
                    level_mu = r;
                }
                if (r > cfg.mu_hint || kids.len() as f64 > cfg.mu_hint) && offender.is_none() {
                    offender = Some((parents[pi], lo, hi, d));
                }
            }
        }
        if let Some((p, lo, hi, d)) = offender {
            stop_reason = Some((p, gen, format!("child range {lo}..={hi} of diameter {d:e} leaves the window at mu {}", cfg.mu_hint)));
            break;
        }
        mu = mu.max(level_mu);
        let mut ids = Vec::new();
        for (pi, kids) in pieces.into_iter().enumerate() {
            let parent = parents[pi];
            for (lo, hi, d) in kids {
                let id = nodes.len();
                nodes.push(PatchNode { id, gen, lo, hi, parent: Some(parent), children: Vec::new(), diam: d });
                nodes[parent].children.push(id);
                ids.push(id);
            }
        }
        levels.push(ids);
    }
    if levels.len() - 1 < cfg.min_depth {
        let (node, generation, reason) =
            stop_reason.unwrap_or((0, levels.len(), "maximum depth reached before the minimum depth".into()));
        return Err(Error::Patchwork { node, generation, reason });
    }
    Ok(Patchwork { nodes, levels, diam_k, mu })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchworkValidation {
    pub ok: bool,
    /// `μ` measured from scratch: the largest of the degree and the window
    /// ratios `max(d/d₀, d₀/d)` with `d₀ = 2^{-i}·diam K`.
    pub mu: f64,
    pub max_degree: usize,
    pub errors: Vec<String>,
}

/// Checks every patchwork condition against the samples, recomputing all
/// diameters.
pub fn validate_patchwork(samples: &VerticalSamples, pw: &Patchwork, mu_bound: f64) -> PatchworkValidation {
    let pts = samples.points();
    let mut errors = Vec::new();
    let diam = |lo: usize, hi: usize| {
        let mut d = 0.0f64;
        for a in lo..=hi {
            for b in a + 1..=hi {
                let ka = pts[a].kor_dist(&pts[b]).unwrap_or(f64::NAN);
                d = d.max(ka);
            }
        }
        d
    };
    let k = diam(0, pts.len() - 1);
    let nodes = pw.nodes();
    if nodes.is_empty() || nodes[0].lo != 0 || nodes[0].hi != pts.len() - 1 || nodes[0].parent.is_some() {
        errors.push("root does not span the whole curve".into());
    }
    let ratios: Vec<(usize, f64)> = nodes
        .par_iter()
        .map(|n| {
            let d = diam(n.lo, n.hi);
            let nominal = k * (-(n.gen as f64)).exp2();
            let r = if d > 0.0 { (d / nominal).max(nominal / d) } else { f64::INFINITY };
            (n.id, r)
        })
        .collect();
    let mut mu = 1.0f64;
    let mut max_degree = 0;
    for n in nodes {
        if n.lo >= n.hi || pts[n.lo] == pts[n.hi] {
            errors.push(format!("node {} has coincident endpoints", n.id));
        }
        if let Some(p) = n.parent {
            if nodes[p].gen + 1 != n.gen {
                errors.push(format!("node {} generation does not follow its parent", n.id));
            }
        }
        max_degree = max_degree.max(n.children.len());
        if !n.children.is_empty() {
            let kids: Vec<&PatchNode> = n.children.iter().map(|&c| &nodes[c]).collect();
            let joined = kids.windows(2).all(|w| w[0].hi == w[1].lo);
            if kids[0].lo != n.lo || kids[kids.len() - 1].hi != n.hi || !joined {
                errors.push(format!("children of node {} do not partition it", n.id));
            }
            if kids.iter().any(|c| c.parent != Some(n.id)) {
                errors.push(format!("children of node {} have another parent", n.id));
            }
        }
    }
    for &(id, r) in &ratios {
        mu = mu.max(r);
        if r > mu_bound {
            errors.push(format!("node {id} diameter leaves the window (ratio {r:.3})"));
        }
    }
    mu = mu.max(max_degree as f64);
    if max_degree as f64 > mu_bound {
        errors.push(format!("degree {max_degree} exceeds {mu_bound}"));
    }
    // Every generation must cover the curve.
    for i in 0..=pw.depth() {
        let lv = pw.level(i);
        let covered = !lv.is_empty()
            && nodes[lv[0]].lo == 0
            && nodes[*lv.last().unwrap()].hi == pts.len() - 1
            && lv.windows(2).all(|w| nodes[w[0]].hi == nodes[w[1]].lo);
        if !covered {
            errors.push(format!("generation {i} does not partition the curve"));
        }
    }
    PatchworkValidation { ok: errors.is_empty(), mu, max_degree, errors }
}

/// Points `Λ(v)` indexed by node id, with the constant `C` in
/// `|Λ(v) − γ(m_v)| ≤ C·2^{-gen(v)}·diam K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxPoints {
    values: Vec<Vec<f64>>,
    c: f64,
}

impl ApproxPoints {
    /// Arbitrary points; the constant is computed against the samples.
    pub fn new(samples: &VerticalSamples, pw: &Patchwork, values: Vec<Vec<f64>>) -> Result<ApproxPoints> {
        if values.len() != pw.nodes().len() {
            return Err(Error::invalid(format!("{} points for {} nodes", values.len(), pw.nodes().len())));
        }
        let dim = 2 * samples.n();
        if let Some(v) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        let proj = samples.projection();
        let c = pw
            .nodes()
            .iter()
            .map(|n| {
                let g = proj.eval_at(pw.midpoint(samples, n.id));
                dist(&values[n.id], &g) / (pw.diam_k() * (-(n.gen as f64)).exp2())
            })
            .fold(0.0, f64::max);
        Ok(ApproxPoints { values, c })
    }

    pub fn value(&self, id: usize) -> &[f64] {
        &self.values[id]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    /// Scales every point about the origin.
    pub fn scaled(&self, s: f64) -> Vec<Vec<f64>> {
        self.values.iter().map(|v| v.iter().map(|x| s * x).collect()).collect()
    }
}

/// `Λ(v) = π(p)` for the sample `p` whose parameter is nearest `m_v`.
pub fn approx_from_curve(samples: &VerticalSamples, pw: &Patchwork) -> ApproxPoints {
    let ts = samples.ts();
    let values = pw
        .nodes()
        .iter()
        .map(|n| {
            let m = pw.midpoint(samples, n.id);
            let k = ts.partition_point(|&t| t < m).min(ts.len() - 1);
            let best = if k > 0 && (m - ts[k - 1]) <= (ts[k] - m) { k - 1 } else { k };
            samples.points()[best].h().to_vec()
        })
        .collect();
    ApproxPoints::new(samples, pw, values).expect("one point per node")
}

/// `g_i`: affine between the knots `0, m_{w_1}, …, m_{w_k}, 1` with values
/// `Λ(w_1), Λ(w_1), …, Λ(w_k), Λ(w_k)`.
pub fn g_curve(samples: &VerticalSamples, pw: &Patchwork, lam: &ApproxPoints, i: usize) -> Result<PolyCurve> {
    if i > pw.depth() {
        return Err(Error::invalid(format!("generation {i} beyond patchwork depth {}", pw.depth())));
    }
    let lv = pw.level(i);
    let mut verts = Vec::with_capacity(lv.len() + 2);
    let mut knots = Vec::with_capacity(lv.len() + 2);
    verts.push(lam.value(lv[0]).to_vec());
    knots.push(0.0);
    for &id in lv {
        verts.push(lam.value(id).to_vec());
        knots.push(pw.midpoint(samples, id));
    }
    verts.push(lam.value(*lv.last().unwrap()).to_vec());
    knots.push(1.0);
    PolyCurve::new(&verts)?.with_knots(knots)
}

/// Vertices of `g` restricted to `[a, b]`: the images of `a` and `b` and
/// every knot in between.
fn restricted_vertices(g: &PolyCurve, a: f64, b: f64) -> Vec<Vec<f64>> {
    let knots = g.knots().expect("g curves carry knots");
    let mut out = vec![g.eval_at(a), g.eval_at(b)];
    for (k, &t) in knots.iter().enumerate() {
        if t > a && t < b {
            out.push(g.vertex(k).to_vec());
        }
    }
    out
}

fn set_diameter(pts: &[Vec<f64>]) -> f64 {
    let mut d = 0.0f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            d = d.max(dist(&pts[a], &pts[b]));
        }
    }
    d
}

/// `Σ_{gen(v) < depth} δ_Λ(v)²` with `δ_Λ(v) = diam(g_i(J_v) ∪ g_{i+1}(J_v))`.
pub fn sigma_patchwork(samples: &VerticalSamples, pw: &Patchwork, lam: &ApproxPoints, depth: usize) -> Result<f64> {
    if depth > pw.depth() {
        return Err(Error::invalid(format!("depth {depth} beyond patchwork depth {}", pw.depth())));
    }
    let mut acc = Compensated::new();
    for i in 0..depth {
        let gi = g_curve(samples, pw, lam, i)?;
        let gn = g_curve(samples, pw, lam, i + 1)?;
        let terms: Vec<f64> = pw
            .level(i)
            .par_iter()
            .map(|&id| {
                let (a, b) = pw.interval(samples, id);
                let mut v = restricted_vertices(&gi, a, b);
                v.extend(restricted_vertices(&gn, a, b));
                set_diameter(&v).powi(2)
            })
            .collect();
        for t in terms {
            acc.add(t);
        }
    }
    Ok(acc.value())
}
