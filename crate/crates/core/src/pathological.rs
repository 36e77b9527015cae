//! A planar curve whose dyadic approximations all have zero area but whose
//! area along finer partitions is 1.
//!
//! The building blocks are the staircase `α`, affine between the points
//! `a_i = (1 − 4^{-i})/3` and `b_i = (1 + 2·4^{-i})/3` with `α(a_i) = α(b_i) = i`,
//! and the square tracer `θ_k = β(min{α, 4k}/k)`, where `β` walks the boundary
//! of the unit square counterclockwise from the origin. Stage `i + 1` inserts a
//! scaled copy of `θ_{k_i}` into the first half of every level-`r_i` cell of
//! stage `i`.
//!
//! All parameters are exact [`Dyadic`]s; curve values are doubles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::estimate::{estimate_area, AreaConfig, ConvergenceReport, ProbeRecord, Verdict};
use crate::curve::{poly_from_partition, sigma_pl_exact, CurveSource, Partition};
use crate::dyadic::{Dyadic, MAX_EXPONENT};
use crate::error::{Error, Result};
use crate::numeric::ordered_sum;

/// Largest index for which `a_i` and `b_i` fit under the dyadic exponent cap.
pub const MAX_AB_INDEX: u32 = MAX_EXPONENT / 2;

/// Default cap on the number of refined-partition points.
pub const DEFAULT_POINT_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathParams {
    r: Vec<u32>,
    k: Vec<u32>,
    depth: usize,
}

impl PathParams {
    /// Parameters with `depth = r.len() − 1`. `k` needs at least `depth`
    /// entries; extra entries are ignored.
    pub fn new(r: Vec<u32>, k: Vec<u32>) -> Result<PathParams> {
        let depth = r.len().checked_sub(1).ok_or_else(|| Error::invalid("r must be non-empty"))?;
        PathParams::with_depth(r, k, depth)
    }

    pub fn with_depth(r: Vec<u32>, k: Vec<u32>, depth: usize) -> Result<PathParams> {
        if r.len() < depth + 1 {
            return Err(Error::invalid(format!("depth {depth} needs {} values of r, got {}", depth + 1, r.len())));
        }
        if k.len() < depth {
            return Err(Error::invalid(format!("depth {depth} needs {depth} values of k, got {}", k.len())));
        }
        if let Some(i) = k.iter().position(|&v| v == 0) {
            return Err(Error::invalid(format!("k_{i} must be at least 1")));
        }
        for i in 0..depth {
            let need = r[i] as u64 + 16 * k[i] as u64 + 2;
            if (r[i + 1] as u64) < need {
                return Err(Error::invalid(format!(
                    "r_{} = {} violates r_{{i+1}} >= r_i + 16 k_i + 2 = {need}",
                    i + 1,
                    r[i + 1]
                )));
            }
        }
        if r[depth] > MAX_EXPONENT {
            return Err(Error::ResourceCap { what: "r exponent".into(), requested: r[depth] as u128, cap: MAX_EXPONENT as u128 });
        }
        Ok(PathParams { r: r[..=depth].to_vec(), k: k[..depth].to_vec(), depth })
    }

    /// `r = (0, 18, 36)`, `k = (1, 1)`: the smallest parameters allowed.
    pub fn demo() -> PathParams {
        PathParams::new(vec![0, 18, 36], vec![1, 1]).expect("demo parameters are valid")
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn r(&self) -> &[u32] {
        &self.r
    }

    pub fn k(&self) -> &[u32] {
        &self.k
    }

    /// The same sequences cut to fewer stages.
    pub fn truncated(&self, depth: usize) -> Result<PathParams> {
        if depth > self.depth {
            return Err(Error::invalid(format!("depth {depth} exceeds {}", self.depth)));
        }
        PathParams::with_depth(self.r.clone(), self.k.clone(), depth)
    }
}

/// `(a_i, b_i)` as exact dyadics.
pub fn ab_sequences(i: u32) -> Result<(Dyadic, Dyadic)> {
    if i > MAX_AB_INDEX {
        return Err(Error::ResourceCap { what: "a/b index".into(), requested: i as u128, cap: MAX_AB_INDEX as u128 });
    }
    let p = 1i128 << (2 * i);
    Ok((Dyadic::new((p - 1) / 3, 2 * i), Dyadic::new((p + 2) / 3, 2 * i)))
}

fn ab(i: u32) -> (Dyadic, Dyadic) {
    ab_sequences(i).expect("index below cap")
}

fn check_unit(t: Dyadic) -> Result<()> {
    if t < Dyadic::ZERO || t > Dyadic::ONE {
        return Err(Error::invalid(format!("parameter {t} outside [0,1]")));
    }
    Ok(())
}

/// `min{α(t), cap}` exactly; `cap = None` gives `α(t)`.
fn alpha_capped(t: Dyadic, cap: Option<u32>) -> Dyadic {
    let limit = cap.unwrap_or(MAX_AB_INDEX);
    for i in 0..limit {
        let (a, b) = ab(i);
        let (a1, b1) = ab(i + 1);
        let base = Dyadic::from_int(i as i64);
        if t < a1 {
            return base + (t - a).scale_pow2(2 * i as i32 + 2);
        }
        if t > b1 {
            return base + (b - t).scale_pow2(2 * i as i32 + 1);
        }
    }
    // Here a_limit <= t <= b_limit. Without a cap this is unreachable for
    // exponents within the dyadic cap.
    debug_assert!(cap.is_some(), "alpha search exhausted");
    Dyadic::from_int(limit as i64)
}

/// The staircase `α` at a dyadic parameter (never `1/3`).
pub fn alpha_exact(t: Dyadic) -> Result<Dyadic> {
    check_unit(t)?;
    Ok(alpha_capped(t, None))
}

pub fn alpha(t: Dyadic) -> Result<f64> {
    alpha_exact(t).map(|v| v.to_f64())
}

/// `D_kα(t)` from the closed forms: `min{α, i}` for `k = 2i`, and for
/// `k = 2i + 1` the polyline through `(a_0,0),…,(a_i,i),(b_{i+1},i+1),…,(b_0,0)`.
pub fn dyadic_alpha(k: u32, t: Dyadic) -> Result<Dyadic> {
    check_unit(t)?;
    let i = k / 2;
    if i + 1 > MAX_AB_INDEX {
        return Err(Error::ResourceCap { what: "dyadic level of alpha".into(), requested: k as u128, cap: 2 * MAX_AB_INDEX as u128 - 2 });
    }
    if k % 2 == 0 {
        return Ok(alpha_capped(t, Some(i)));
    }
    let (ai, _) = ab(i);
    let (_, bi1) = ab(i + 1);
    if t <= ai || t >= bi1 {
        return Ok(alpha_capped(t, Some(i + 1)));
    }
    Ok(Dyadic::from_int(i as i64) + (t - ai).scale_pow2(2 * i as i32 + 1))
}

/// Unit-speed counterclockwise walk around `[0,1]²` from the origin, constant
/// after time 4.
pub fn square_beta(s: f64) -> Result<[f64; 2]> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("square parameter {s} must be finite and nonnegative")));
    }
    Ok(beta(s))
}

fn beta(s: f64) -> [f64; 2] {
    match s {
        s if s <= 1.0 => [s, 0.0],
        s if s <= 2.0 => [1.0, s - 1.0],
        s if s <= 3.0 => [3.0 - s, 1.0],
        s if s <= 4.0 => [0.0, 4.0 - s],
        _ => [0.0, 0.0],
    }
}

/// `θ_k(t) = β(min{α(t), 4k}/k)`.
pub fn theta_k(k: u32, t: Dyadic) -> Result<[f64; 2]> {
    check_unit(t)?;
    check_k(k)?;
    Ok(theta_unchecked(k, t))
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 || 4 * k > MAX_AB_INDEX {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", MAX_AB_INDEX / 4)));
    }
    Ok(())
}

fn theta_unchecked(k: u32, t: Dyadic) -> [f64; 2] {
    let f = alpha_capped(t, Some(4 * k));
    beta(f.to_f64() / k as f64)
}

/// Breakpoints `Q_k = {a_0,…,a_{4k}, b_{4k},…,b_0}` of `θ_k`.
pub fn theta_breakpoints(k: u32) -> Result<Vec<Dyadic>> {
    check_k(k)?;
    Ok(staircase_breakpoints(4 * k))
}

/// `{a_0,…,a_m, b_m,…,b_0}`, the breakpoints of `min{α, m}`.
fn staircase_breakpoints(m: u32) -> Vec<Dyadic> {
    let mut out: Vec<Dyadic> = (0..=m).map(|i| ab(i).0).collect();
    out.extend((0..=m).rev().map(|i| ab(i).1));
    out
}

/// `γ_s(t)` by descending through the stages: each step either lands in a
/// square-tracing half-cell (fixing the offset) or rescales into the copy of
/// the previous stage.
pub fn gamma_stage(params: &PathParams, stage: usize, t: Dyadic) -> Result<[f64; 2]> {
    check_unit(t)?;
    if stage > params.depth {
        return Err(Error::invalid(format!("stage {stage} exceeds depth {}", params.depth)));
    }
    Ok(gamma_stage_unchecked(params, stage, t))
}

fn gamma_stage_unchecked(params: &PathParams, stage: usize, mut t: Dyadic) -> [f64; 2] {
    let mut out = [0.0, 0.0];
    for i in (0..stage).rev() {
        let r = params.r[i];
        let cells = 1i128 << r;
        let j = t.scale_pow2(r as i32).floor().min(cells - 1);
        let c = Dyadic::grid(j, r);
        let u = (t - c).scale_pow2(r as i32 + 1);
        if u <= Dyadic::ONE {
            let th = theta_unchecked(params.k[i], u);
            let scale = (-(r as f64) / 2.0).exp2();
            out[0] += scale * th[0];
            out[1] += scale * th[1];
            t = c;
        } else {
            t = c + (u - Dyadic::ONE).scale_pow2(-(r as i32));
        }
    }
    out
}

/// `γ(t)` for `t ∈ 2^{-r_depth}ℤ`: the limit agrees with the first stage
/// whose grid contains `t`.
pub fn gamma_limit(params: &PathParams, t: Dyadic) -> Result<[f64; 2]> {
    check_unit(t)?;
    let e = t.exponent();
    let stage = params.r.iter().position(|&r| e <= r).ok_or_else(|| {
        Error::invalid(format!("parameter exponent {e} exceeds r_depth = {}", params.r[params.depth]))
    })?;
    Ok(gamma_stage_unchecked(params, stage, t))
}

/// `γ_stage` as a curve. At `stage = depth` it also equals the limit on
/// `2^{-r_depth}ℤ` and is within `4·2^{-r_depth/2}` of it everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PathologicalCurve {
    params: PathParams,
    stage: usize,
}

impl PathologicalCurve {
    pub fn new(params: PathParams, stage: usize) -> Result<PathologicalCurve> {
        if stage > params.depth {
            return Err(Error::invalid(format!("stage {stage} exceeds depth {}", params.depth)));
        }
        Ok(PathologicalCurve { params, stage })
    }

    pub fn limit(params: PathParams) -> PathologicalCurve {
        let stage = params.depth;
        PathologicalCurve { params, stage }
    }

    pub fn params(&self) -> &PathParams {
        &self.params
    }

    pub fn stage(&self) -> usize {
        self.stage
    }
}

impl CurveSource for PathologicalCurve {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        let t = t.max(Dyadic::ZERO).min(Dyadic::ONE);
        gamma_stage_unchecked(&self.params, self.stage, t).to_vec()
    }

    fn pl_level(&self) -> Option<u32> {
        match self.stage {
            0 => Some(0),
            s => Some(self.params.r[s - 1] + 1 + 8 * self.params.k[s - 1]),
        }
    }
}

/// `θ_k` as a curve, with its breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Theta {
    k: u32,
}

impl Theta {
    pub fn new(k: u32) -> Result<Theta> {
        check_k(k)?;
        Ok(Theta { k })
    }
}

impl CurveSource for Theta {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        theta_unchecked(self.k, t.max(Dyadic::ZERO).min(Dyadic::ONE)).to_vec()
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(((8 * self.k) as f64).exp2() / self.k as f64)
    }

    fn pl_level(&self) -> Option<u32> {
        Some(8 * self.k)
    }

    fn breakpoints(&self) -> Option<Vec<Dyadic>> {
        Some(staircase_breakpoints(4 * self.k))
    }
}

/// `t ↦ (D_{2i}α(t), 0) = (min{α(t), i}, 0)`, a planar curve for `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaEven {
    i: u32,
}

impl AlphaEven {
    pub fn new(i: u32) -> Result<AlphaEven> {
        if i > MAX_AB_INDEX {
            return Err(Error::ResourceCap { what: "alpha level".into(), requested: i as u128, cap: MAX_AB_INDEX as u128 });
        }
        Ok(AlphaEven { i })
    }
}

impl CurveSource for AlphaEven {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        vec![alpha_capped(t.max(Dyadic::ZERO).min(Dyadic::ONE), Some(self.i)).to_f64(), 0.0]
    }

    fn pl_level(&self) -> Option<u32> {
        Some(2 * self.i)
    }

    fn breakpoints(&self) -> Option<Vec<Dyadic>> {
        Some(staircase_breakpoints(self.i))
    }
}

/// The partition `P_i`: every level-`r_i` cell contributes its left end and the
/// four square-vertex times `c + 2^{-r_i-1}·a_{m k_i}`, `m = 1..4`.
pub fn refined_partition(params: &PathParams, stage: usize, point_cap: u128) -> Result<Partition> {
    if stage >= params.depth {
        return Err(Error::invalid(format!("refined partition at stage {stage} needs depth > {stage}, have {}", params.depth)));
    }
    let r = params.r[stage];
    let k = params.k[stage];
    let requested = 6u128 << r;
    if r >= 100 || requested > point_cap {
        return Err(Error::ResourceCap { what: "refined partition points".into(), requested, cap: point_cap });
    }
    let offsets: Vec<Dyadic> = (1..=4).map(|m| ab(m * k).0.scale_pow2(-(r as i32) - 1)).collect();
    let cells = 1i128 << r;
    let mut pts = Vec::with_capacity((5 * cells + 1) as usize);
    for j in 0..cells {
        let c = Dyadic::grid(j, r);
        pts.push(c);
        pts.extend(offsets.iter().map(|&o| c + o));
    }
    pts.push(Dyadic::ONE);
    Partition::new(pts)
}

/// `A_{P_stage}(γ)` for the limit curve: the area of the closed polyline
/// through the refined partition of that stage.
pub fn refined_area(params: &PathParams, stage: usize, point_cap: u128) -> Result<f64> {
    let part = refined_partition(params, stage, point_cap)?;
    let c = PathologicalCurve::limit(params.clone());
    Ok(poly_from_partition(&c, &part)?.closed().signed_area())
}

/// Dyadic area estimate of the limit curve, with the refined partitions of
/// stages `0..stage_cap` added as probes. Any probe that disagrees with the
/// dyadic value turns the verdict into diverging.
pub fn area_report(params: &PathParams, stage_cap: usize, cfg: &AreaConfig) -> Result<ConvergenceReport> {
    let c = PathologicalCurve::limit(params.clone());
    let mut report = estimate_area(&c, cfg);
    let last = report.terms.last().map_or(0.0, |t| t.value);
    let stages = stage_cap.min(params.depth);
    for stage in 0..stages {
        let v = refined_area(params, stage, DEFAULT_POINT_CAP)?;
        report.probes.push(ProbeRecord {
            level: params.r[stage],
            kind: format!("refined-partition-{stage}"),
            value: v,
            discrepancy: (v - last).abs(),
        });
    }
    if let Some(p) = report.probes.iter().find(|p| p.kind.starts_with("refined") && p.discrepancy > cfg.tolerance) {
        report.notes.push(format!("refined partition at r = {} gives {} against dyadic value {last}", p.level, p.value));
        report.verdict = Verdict::Diverging;
        report.limit = None;
    }
    if stage_cap > params.depth {
        report.notes.push(format!("stage cap {stage_cap} above depth {}; refined partitions exist below the depth only", params.depth));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub index: u32,
    pub sigma: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCertificates {
    /// `σ(θ_k)` against `128/k`.
    pub theta: Vec<BoundCheck>,
    /// `σ(D_{2i}α)` against `32i`.
    pub alpha: Vec<BoundCheck>,
    /// `σ(γ_s)` for `s = 0..`, as far as the level cap allows.
    pub gamma: Vec<f64>,
    /// `k_i ≥ i` for every materialized stage. Summability of `1/k_i` cannot
    /// be checked on a finite prefix.
    pub hypotheses_hold: bool,
    pub sum_inv_k: f64,
    /// `σ(γ_last) / Σ 1/k_i` for the last computed stage, when the
    /// hypotheses hold.
    pub ratio: Option<f64>,
    pub partial: bool,
    pub notes: Vec<String>,
}

impl SigmaCertificates {
    pub fn all_ok(&self) -> bool {
        self.theta.iter().chain(&self.alpha).all(|c| c.ok)
    }
}

/// Exact `σ(θ_k)` for each `k`, `σ(D_{2i}α)` for `i ≤ 4·max k`, and `σ(γ_s)`
/// through the stage recursion
/// `σ(γ_{s+1}) = σ(γ_s) + Σ_j |γ_s(c_{s,j+1}) − γ_s(c_{s,j})|² + σ(θ_{k_s})`.
/// The increment sum needs `2^{r_s}` evaluations, so stages with
/// `r_s > level_cap` are skipped and the report is flagged partial.
pub fn sigma_certificates(params: &PathParams, k_list: &[u32], level_cap: u32) -> Result<SigmaCertificates> {
    let mut notes = Vec::new();
    let mut theta = Vec::new();
    for &k in k_list {
        let th = Theta::new(k)?;
        let s = sigma_pl_exact(&th, &th.breakpoints().expect("theta is PL"))?;
        let bound = 128.0 / k as f64;
        theta.push(BoundCheck { index: k, sigma: s, bound, ok: s <= bound });
    }
    let imax = 4 * k_list.iter().copied().max().unwrap_or(0);
    let mut alpha = Vec::new();
    for i in 0..=imax {
        let a = AlphaEven::new(i)?;
        let s = sigma_pl_exact(&a, &a.breakpoints().expect("alpha is PL"))?;
        let bound = 32.0 * i as f64;
        alpha.push(BoundCheck { index: i, sigma: s, bound, ok: s <= bound * (1.0 + 1e-12) });
    }

    let mut theta_sigma = std::collections::BTreeMap::new();
    for c in &theta {
        theta_sigma.insert(c.index, c.sigma);
    }
    let mut gamma = vec![0.0];
    let mut partial = false;
    for s in 0..params.depth {
        let r = params.r[s];
        if r > level_cap {
            partial = true;
            notes.push(format!("stage {} skipped: r_{s} = {r} above level cap {level_cap}", s + 1));
            break;
        }
        let k = params.k[s];
        let st = match theta_sigma.get(&k) {
            Some(&v) => v,
            None => {
                let th = Theta::new(k)?;
                let v = sigma_pl_exact(&th, &th.breakpoints().expect("theta is PL"))?;
                theta_sigma.insert(k, v);
                v
            }
        };
        let incr = ordered_sum(1usize << r, |j| {
            let a = gamma_stage_unchecked(params, s, Dyadic::grid(j as i128, r));
            let b = gamma_stage_unchecked(params, s, Dyadic::grid(j as i128 + 1, r));
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        });
        gamma.push(gamma[s] + incr + st);
    }

    let stages = gamma.len() - 1;
    let hypotheses_hold = (0..params.depth).all(|i| params.k[i] as usize >= i);
    if !hypotheses_hold {
        notes.push("k_i >= i fails; the sigma bound is not asserted".into());
    }
    let sum_inv_k: f64 = params.k.iter().take(stages.max(1)).map(|&k| 1.0 / k as f64).sum();
    let ratio = (hypotheses_hold && stages > 0).then(|| gamma[stages] / sum_inv_k);
    Ok(SigmaCertificates { theta, alpha, gamma, hypotheses_hold, sum_inv_k, ratio, partial, notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderProfile {
    pub pairs: usize,
    /// Largest `|γ(s) − γ(t)|/√|s − t|` on the fitting sample.
    pub constant: f64,
    /// Largest ratio on an independent validation sample.
    pub validation_max: f64,
    /// Largest ratio per dyadic scale `|s − t| ∈ (2^{-m-1}, 2^{-m}]`.
    pub envelope: Vec<(u32, f64)>,
}

impl HolderProfile {
    /// No validation pair exceeds the fitted constant by more than `slack`.
    pub fn consistent(&self, slack: f64) -> bool {
        self.validation_max <= self.constant * slack
    }
}

fn holder_ratios(params: &PathParams, pairs: usize, seed: u64) -> Vec<(u32, f64)> {
    let e = params.r[params.depth];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 1i128 << e;
    let samples: Vec<(i128, i128)> = (0..pairs)
        .map(|_| {
            let m = rng.gen_range(0..e.max(1));
            let width = ((1i128 << (e - m)) as f64 * rng.gen_range(0.5..1.0)).ceil().max(1.0) as i128;
            let s = rng.gen_range(0..=span - width);
            (s, s + width)
        })
        .collect();
    use rayon::prelude::*;
    samples
        .par_iter()
        .map(|&(s, t)| {
            let a = gamma_stage_unchecked(params, params.depth, Dyadic::grid(s, e));
            let b = gamma_stage_unchecked(params, params.depth, Dyadic::grid(t, e));
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let gap = (t - s) as f64 / span as f64;
            let scale = (-gap.log2()).floor().max(0.0) as u32;
            (scale, d / gap.sqrt())
        })
        .collect()
}

/// Samples `|γ(s) − γ(t)|/√|s − t|` at pairs on `2^{-r_depth}ℤ`, with gaps
/// spread evenly over dyadic scales. The fitted constant is an empirical
/// maximum, not a proof of the Hölder bound.
pub fn holder_profile(params: &PathParams, pairs: usize, seed: u64) -> HolderProfile {
    let fit = holder_ratios(params, pairs, seed);
    let check = holder_ratios(params, pairs, seed ^ 0x9e37_79b9_7f4a_7c15);
    let constant = fit.iter().map(|p| p.1).fold(0.0, f64::max);
    let validation_max = check.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut env = std::collections::BTreeMap::new();
    for &(m, v) in fit.iter().chain(&check) {
        let e = env.entry(m).or_insert(0.0f64);
        *e = e.max(v);
    }
    HolderProfile { pairs, constant, validation_max, envelope: env.into_iter().collect() }
}
