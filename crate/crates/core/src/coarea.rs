//! Both sides of the coarea formula for maps `f: H_n → R^{2n}`:
//! `∫_U |J_H f| = ∫ H²(f^{-1}(w) ∩ U) dw`.
//!
//! The left side is a composite Gauss–Legendre rule at two resolutions. The
//! right side traces the fibers over a midpoint grid in `w` covering the
//! bounding box of `f(U)`, inflated by one cell, and measures each
//! component with the fiber area formula.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{builtin_field, jh, trace_components, BuiltinField, CoordBox, MapField, TraceConfig};
use crate::heis::HeisPoint;
use crate::numeric::{compensated_sum, ordered_sum};
use crate::vertical::{fiber_area_config, fiber_area_config_for, fiber_measure};

/// Cap on `|J_H|` evaluations for the left side.
pub const LHS_EVAL_CAP: u128 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoareaExperiment {
    pub field: String,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub domain: CoordBox,
    /// Midpoint cells per `w` axis across the bounding box of `f(U)`.
    pub w_cells: usize,
    /// Gauss–Legendre cells per axis at the coarse resolution.
    pub lhs_cells: usize,
    /// Depth of adaptive refinement of each `w` cell.
    pub w_refine: u32,
    /// Refinement stops where parent and child means differ by at most this.
    pub refine_tol: f64,
    pub trace_step: f64,
    /// Seeds per fiber, stratified in `z`.
    pub seeds: usize,
    pub identity_tol: f64,
    pub inequality_tol: f64,
}

impl Default for CoareaExperiment {
    fn default() -> Self {
        CoareaExperiment {
            field: "projection".into(),
            n: 1,
            a: 0.0,
            b: 0.0,
            domain: CoordBox::unit(1),
            lhs_cells: 6,
            w_cells: 16,
            w_refine: 4,
            refine_tol: 1e-3,
            trace_step: 0.01,
            seeds: 8,
            identity_tol: 0.02,
            inequality_tol: 1e-3,
        }
    }
}

/// Keys accepted in experiment files.
pub const CONFIG_KEYS: [&str; 13] = [
    "field",
    "n",
    "a",
    "b",
    "box",
    "w_cells",
    "w_refine",
    "refine_tol",
    "lhs_cells",
    "trace_step",
    "seeds",
    "identity_tol",
    "inequality_tol",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("{key}: cannot parse {v:?}")))
}

impl CoareaExperiment {
    /// Parses `key = value` lines; `#` starts a comment. `box` lists
    /// `lo,hi` pairs for `x1,y1,…,z`. Missing keys keep their defaults,
    /// with the box defaulting to the unit cube of dimension `2n+1`.
    pub fn parse(text: &str) -> Result<CoareaExperiment> {
        let mut kv = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
            let k = k.trim().to_string();
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::Parse(format!("line {}: unknown key {k:?}", no + 1)));
            }
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key {k:?}", no + 1)));
            }
        }
        let mut e = CoareaExperiment::default();
        for (k, v) in &kv {
            match k.as_str() {
                "field" => e.field = v.clone(),
                "n" => e.n = parse_num(k, v)?,
                "a" => e.a = parse_num(k, v)?,
                "b" => e.b = parse_num(k, v)?,
                "w_cells" => e.w_cells = parse_num(k, v)?,
                "lhs_cells" => e.lhs_cells = parse_num(k, v)?,
                "w_refine" => e.w_refine = parse_num(k, v)?,
                "refine_tol" => e.refine_tol = parse_num(k, v)?,
                "trace_step" => e.trace_step = parse_num(k, v)?,
                "seeds" => e.seeds = parse_num(k, v)?,
                "identity_tol" => e.identity_tol = parse_num(k, v)?,
                "inequality_tol" => e.inequality_tol = parse_num(k, v)?,
                _ => {}
            }
        }
        e.domain = match kv.get("box") {
            Some(v) => {
                let xs: Vec<f64> = v.split(',').map(|s| parse_num("box", s.trim())).collect::<Result<_>>()?;
                if xs.len() != 2 * (2 * e.n + 1) {
                    return Err(Error::Parse(format!("box needs {} numbers for n = {}", 2 * (2 * e.n + 1), e.n)));
                }
                CoordBox::new(xs.iter().step_by(2).copied().collect(), xs.iter().skip(1).step_by(2).copied().collect())?
            }
            None => CoordBox::unit(e.n),
        };
        e.validate()?;
        Ok(e)
    }

    pub fn to_config(&self) -> String {
        let bx: Vec<String> =
            self.domain.lo().iter().zip(self.domain.hi()).map(|(l, h)| format!("{l:?},{h:?}")).collect();
        format!(
            "field = {}\nn = {}\na = {:?}\nb = {:?}\nbox = {}\nw_cells = {}\nw_refine = {}\nrefine_tol = {:?}\nlhs_cells = {}\ntrace_step = {:?}\nseeds = {}\nidentity_tol = {:?}\ninequality_tol = {:?}\n",
            self.field,
            self.n,
            self.a,
            self.b,
            bx.join(","),
            self.w_cells,
            self.w_refine,
            self.refine_tol,
            self.lhs_cells,
            self.trace_step,
            self.seeds,
            self.identity_tol,
            self.inequality_tol
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.domain.n() != self.n {
            return Err(Error::invalid(format!("box dimension does not match n = {}", self.n)));
        }
        if self.w_cells == 0 || self.lhs_cells == 0 || self.seeds == 0 {
            return Err(Error::invalid("grids must be nonempty"));
        }
        if self.w_refine > 8 || !(self.refine_tol >= 0.0) {
            return Err(Error::invalid("w_refine must be at most 8 and refine_tol nonnegative"));
        }
        if !(self.trace_step > 0.0) || !(self.identity_tol > 0.0) || !(self.inequality_tol >= 0.0) {
            return Err(Error::invalid("step and tolerances must be positive"));
        }
        builtin_field(&self.field, self.n, self.a, self.b)?;
        Ok(())
    }

    pub fn field(&self) -> Result<BuiltinField> {
        builtin_field(&self.field, self.n, self.a, self.b)
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig { step: self.trace_step, ..TraceConfig::default() }
    }
}

const GL_NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL_WEIGHTS: [f64; 4] = [0.347_854_845_137_453_8, 0.652_145_154_862_546_2, 0.652_145_154_862_546_2, 0.347_854_845_137_453_8];

/// Composite 4-point Gauss–Legendre rule for `∫_box g` with `cells` cells
/// per axis.
pub fn gauss_box<G>(domain: &CoordBox, cells: usize, g: G) -> Result<f64>
where
    G: Fn(&HeisPoint) -> Result<f64> + Sync,
{
    let d = domain.lo().len();
    let total = (cells as u128).checked_pow(d as u32).and_then(|c| c.checked_mul(4u128.pow(d as u32)));
    match total {
        Some(t) if t <= LHS_EVAL_CAP => {}
        other => {
            return Err(Error::ResourceCap {
                what: "quadrature nodes".into(),
                requested: other.unwrap_or(u128::MAX),
                cap: LHS_EVAL_CAP,
            })
        }
    }
    let widths: Vec<f64> = domain.lo().iter().zip(domain.hi()).map(|(l, h)| (h - l) / cells as f64).collect();
    let n_cells = cells.pow(d as u32);
    let nodes = 4usize.pow(d as u32);
    let failure = std::sync::Mutex::new(None);
    let sum = ordered_sum(n_cells, |c| {
        let mut idx = c;
        let mut lo = vec![0.0; d];
        for k in 0..d {
            lo[k] = domain.lo()[k] + (idx % cells) as f64 * widths[k];
            idx /= cells;
        }
        let mut acc = 0.0;
        let mut x = vec![0.0; d];
        for m in 0..nodes {
            let mut j = m;
            let mut w = 1.0;
            for k in 0..d {
                let q = j % 4;
                j /= 4;
                x[k] = lo[k] + 0.5 * widths[k] * (1.0 + GL_NODES[q]);
                w *= 0.5 * widths[k] * GL_WEIGHTS[q];
            }
            let p = HeisPoint::new(x[..d - 1].to_vec(), x[d - 1]).expect("finite node");
            match g(&p) {
                Ok(v) => acc += w * v,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                }
            }
        }
        acc
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(sum),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhsResult {
    pub value: f64,
    pub coarse: f64,
    /// `|fine − coarse|`.
    pub error_estimate: f64,
    pub converged: bool,
}

/// `∫_U |J_H f|` at `lhs_cells` and twice as many cells per axis.
pub fn lhs<F: MapField + ?Sized>(f: &F, exp: &CoareaExperiment) -> Result<LhsResult> {
    let g = |p: &HeisPoint| jh(f, p).map(f64::abs);
    let coarse = gauss_box(&exp.domain, exp.lhs_cells, g)?;
    let value = gauss_box(&exp.domain, 2 * exp.lhs_cells, g)?;
    let error_estimate = (value - coarse).abs();
    let converged = error_estimate <= 0.1 * exp.identity_tol * value.abs().max(1e-300) || error_estimate == 0.0;
    Ok(LhsResult { value, coarse, error_estimate, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    /// Every component's measure was certified.
    Converged,
    /// No component meets the box.
    Empty,
    /// Some component's area estimate did not converge.
    Undefined,
    /// The tracer could not follow the fiber.
    Untraceable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WRow {
    /// Cell midpoint.
    pub w: Vec<f64>,
    /// Components found at the midpoint.
    pub fibers: usize,
    /// Mean measure over the cell's sample points.
    pub measure: f64,
    /// Sample points used for the cell.
    pub subcells: usize,
    pub status: RowStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WGrid {
    pub lo: Vec<f64>,
    pub cell: Vec<f64>,
    pub counts: Vec<usize>,
}

impl WGrid {
    pub fn cell_volume(&self) -> f64 {
        self.cell.iter().product()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn midpoint(&self, mut idx: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.lo.len()];
        for k in 0..w.len() {
            w[k] = self.lo[k] + ((idx % self.counts[k]) as f64 + 0.5) * self.cell[k];
            idx /= self.counts[k];
        }
        w
    }
}

/// Midpoint grid over the bounding box of `f(U)`, sampled on a `9^{2n+1}`
/// lattice, inflated by one cell on every side.
pub fn w_grid<F: MapField + ?Sized>(f: &F, exp: &CoareaExperiment) -> Result<WGrid> {
    let d = exp.domain.lo().len();
    let k = 8usize;
    let total = (k + 1).pow(d as u32);
    let mut vals = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut x = vec![0.0; d];
        for (j, xj) in x.iter_mut().enumerate() {
            let t = (idx % (k + 1)) as f64 / k as f64;
            idx /= k + 1;
            *xj = exp.domain.lo()[j] + t * (exp.domain.hi()[j] - exp.domain.lo()[j]);
        }
        let p = HeisPoint::new(x[..d - 1].to_vec(), x[d - 1])?;
        vals.push(crate::fields::eval_checked(f, &p)?);
    }
    let bb = CoordBox::bounding(&vals)?;
    let mut lo = Vec::new();
    let mut cell = Vec::new();
    for j in 0..d - 1 {
        let width = bb.hi()[j] - bb.lo()[j];
        if !(width > 0.0) {
            return Err(Error::Degenerate(format!("image of U is flat in coordinate {j}")));
        }
        let h = width / exp.w_cells as f64;
        lo.push(bb.lo()[j] - h);
        cell.push(h);
    }
    Ok(WGrid { lo, cell, counts: vec![exp.w_cells + 2; d - 1] })
}

fn measure_row<F: MapField + ?Sized>(f: &F, w: Vec<f64>, exp: &CoareaExperiment) -> WRow {
    let cfg = exp.trace_config();
    let comps = match trace_components(f, &w, &exp.domain, exp.seeds, &cfg) {
        Ok(c) => c,
        Err(e) => {
            return WRow { w, fibers: 0, measure: 0.0, subcells: 1, status: RowStatus::Untraceable, message: Some(e.to_string()) }
        }
    };
    if comps.is_empty() {
        return WRow { w, fibers: 0, measure: 0.0, subcells: 1, status: RowStatus::Empty, message: None };
    }
    let mut total = 0.0;
    for c in &comps {
        match fiber_measure(&c.samples, &fiber_area_config_for(c.samples.len())) {
            Ok(m) => match m.measure {
                Some(v) => total += v,
                None => {
                    let msg = format!("fiber area estimate {:?}", m.report.verdict);
                    let fibers = comps.len();
                    return WRow { w, fibers, measure: f64::NAN, subcells: 1, status: RowStatus::Undefined, message: Some(msg) };
                }
            },
            Err(e) => {
                let fibers = comps.len();
                return WRow { w, fibers, measure: f64::NAN, subcells: 1, status: RowStatus::Undefined, message: Some(e.to_string()) };
            }
        }
    }
    WRow { w, fibers: comps.len(), measure: total, subcells: 1, status: RowStatus::Converged, message: None }
}

/// Midpoints of the `2^d` children of the cell `[lo, lo + h]`.
fn children(lo: &[f64], h: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = lo.len();
    (0..1usize << d)
        .map(|mask| {
            let clo: Vec<f64> = (0..d).map(|k| lo[k] + if mask >> k & 1 == 1 { 0.5 * h[k] } else { 0.0 }).collect();
            let ch: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
            (clo, ch)
        })
        .collect()
}

fn centre(lo: &[f64], h: &[f64]) -> Vec<f64> {
    lo.iter().zip(h).map(|(l, v)| l + 0.5 * v).collect()
}

#[derive(Debug, Default)]
struct CellAcc {
    evals: usize,
    converged: bool,
    bad: Option<WRow>,
}

impl CellAcc {
    fn note(&mut self, r: &WRow) {
        self.evals += 1;
        match r.status {
            RowStatus::Converged => self.converged = true,
            RowStatus::Undefined | RowStatus::Untraceable if self.bad.is_none() => self.bad = Some(r.clone()),
            _ => {}
        }
    }
}

/// Adaptive midpoint rule on one cell: the parent midpoint is compared with
/// the mean over the children, and children are split further while the
/// two differ by more than `tol`.
fn cell_mean<F: MapField + ?Sized>(
    f: &F,
    exp: &CoareaExperiment,
    lo: &[f64],
    h: &[f64],
    mid: f64,
    depth: u32,
    acc: &mut CellAcc,
) -> f64 {
    let kids = children(lo, h);
    let vals: Vec<f64> = kids
        .iter()
        .map(|(clo, ch)| {
            let r = measure_row(f, centre(clo, ch), exp);
            acc.note(&r);
            if r.measure.is_finite() {
                r.measure
            } else {
                0.0
            }
        })
        .collect();
    let mean = compensated_sum(vals.iter().copied()) / vals.len() as f64;
    if depth <= 1 || (mean - mid).abs() <= exp.refine_tol {
        return mean;
    }
    let sub = kids.iter().zip(&vals).map(|((clo, ch), &v)| cell_mean(f, exp, clo, ch, v, depth - 1, acc));
    compensated_sum(sub) / vals.len() as f64
}

/// Per-`w` fiber measures in grid order. Each cell is refined adaptively
/// up to `w_refine` levels; the row reports the cell mean.
pub fn rhs_rows<F: MapField + ?Sized>(f: &F, exp: &CoareaExperiment) -> Result<(WGrid, Vec<WRow>)> {
    let grid = w_grid(f, exp)?;
    let rows: Vec<WRow> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let w = grid.midpoint(i);
            let mut row = measure_row(f, w.clone(), exp);
            if exp.w_refine == 0 || !row.measure.is_finite() {
                return row;
            }
            let lo: Vec<f64> = w.iter().zip(&grid.cell).map(|(c, h)| c - 0.5 * h).collect();
            let mut acc = CellAcc::default();
            acc.note(&row);
            row.measure = cell_mean(f, exp, &lo, &grid.cell, row.measure, exp.w_refine, &mut acc);
            row.subcells = acc.evals;
            if let Some(bad) = acc.bad {
                row.status = bad.status;
                row.message = Some(format!("at w = {:?}: {}", bad.w, bad.message.unwrap_or_default()));
            } else if acc.converged {
                row.status = RowStatus::Converged;
            }
            row
        })
        .collect();
    Ok((grid, rows))
}

fn integrate(grid: &WGrid, rows: &[WRow]) -> f64 {
    grid.cell_volume() * compensated_sum(rows.iter().filter(|r| r.status == RowStatus::Converged).map(|r| r.measure))
}

fn offending(rows: &[WRow]) -> Vec<&WRow> {
    rows.iter().filter(|r| matches!(r.status, RowStatus::Undefined | RowStatus::Untraceable)).collect()
}

/// `∫ H²(f^{-1}(w) ∩ U) dw`. Fails listing the offending `w` when any
/// fiber could not be traced or measured.
pub fn rhs<F: MapField + ?Sized>(f: &F, exp: &CoareaExperiment) -> Result<f64> {
    let (grid, rows) = rhs_rows(f, exp)?;
    let bad = offending(&rows);
    if !bad.is_empty() {
        let list: Vec<String> = bad.iter().take(10).map(|r| format!("{:?}", r.w)).collect();
        return Err(Error::Undefined(format!("{} fibers without a measure, e.g. at w = {}", bad.len(), list.join(", "))));
    }
    Ok(integrate(&grid, &rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnaniReport {
    pub lhs: f64,
    /// Right side over the traceable `w` only.
    pub rhs: f64,
    pub tol: f64,
    /// `None` when nothing was asserted.
    pub holds: Option<bool>,
    pub skipped: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub rel_error: f64,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Difference of the two quadrature resolutions.
    pub quadrature: f64,
    /// `w` cell widths.
    pub w_cell: Vec<f64>,
    pub trace_step: f64,
    /// Largest area-estimate tolerance over the measured fibers.
    pub area_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoareaReport {
    pub experiment: CoareaExperiment,
    pub lhs: LhsResult,
    pub rhs: Option<f64>,
    pub magnani: MagnaniReport,
    pub identity: Option<IdentityCheck>,
    pub budget: ErrorBudget,
    pub rows: Vec<WRow>,
    pub notes: Vec<String>,
}

impl CoareaReport {
    /// True when every asserted check passed.
    pub fn passed(&self) -> bool {
        self.magnani.holds != Some(false)
            && self.identity.as_ref().map_or(true, |c| c.ok)
            && (self.rhs.is_some() || self.magnani.holds.is_none())
    }
}

/// Runs the full experiment and reports both sides, the identity check and
/// the inequality check.
pub fn run_experiment(exp: &CoareaExperiment) -> Result<CoareaReport> {
    exp.validate()?;
    let f = exp.field()?;
    let left = lhs(&f, exp)?;
    let mut notes = Vec::new();
    if !left.converged {
        notes.push(format!("quadrature not converged: resolutions differ by {:e}", left.error_estimate));
    }
    let quadrature = left.error_estimate;
    let budget = |w_cell: Vec<f64>| ErrorBudget {
        quadrature,
        w_cell,
        trace_step: exp.trace_step,
        area_tolerance: fiber_area_config().tolerance,
    };
    if f.is_degenerate() || (left.value == 0.0 && left.coarse == 0.0) {
        let note = "fibers 2-dimensional, out of tracer scope".to_string();
        notes.push(note.clone());
        return Ok(CoareaReport {
            experiment: exp.clone(),
            magnani: MagnaniReport { lhs: left.value, rhs: 0.0, tol: exp.inequality_tol, holds: None, skipped: 0, note: Some(note) },
            lhs: left,
            rhs: Some(0.0),
            identity: None,
            budget: budget(Vec::new()),
            rows: Vec::new(),
            notes,
        });
    }
    let (grid, rows) = rhs_rows(&f, exp)?;
    let traced = integrate(&grid, &rows);
    let bad = offending(&rows);
    let rhs = if bad.is_empty() {
        Some(traced)
    } else {
        let list: Vec<String> = bad.iter().take(10).map(|r| format!("{:?}", r.w)).collect();
        notes.push(format!("{} fibers without a measure, e.g. at w = {}", bad.len(), list.join(", ")));
        None
    };
    let holds = traced <= left.value * (1.0 + exp.inequality_tol);
    let magnani = MagnaniReport {
        lhs: left.value,
        rhs: traced,
        tol: exp.inequality_tol,
        holds: Some(holds),
        skipped: bad.len(),
        note: (!bad.is_empty()).then(|| "inequality checked over traceable w only".to_string()),
    };
    let identity = rhs.map(|r| {
        let rel_error = (left.value - r).abs() / left.value.abs();
        IdentityCheck { rel_error, tol: exp.identity_tol, ok: rel_error <= exp.identity_tol }
    });
    Ok(CoareaReport { experiment: exp.clone(), lhs: left, rhs, magnani, identity, budget: budget(grid.cell.clone()), rows, notes })
}
