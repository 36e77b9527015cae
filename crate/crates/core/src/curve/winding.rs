//! Winding numbers of closed planar polylines and their integral over the
//! plane, which recovers the signed area.

use super::PolyCurve;
use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;

fn check_planar_closed(c: &PolyCurve) -> Result<()> {
    if c.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: c.dim() });
    }
    if !c.is_closed() {
        return Err(Error::invalid("winding number needs a closed polyline"));
    }
    Ok(())
}

fn bbox_diameter(c: &PolyCurve) -> f64 {
    let (lo, hi) = c.bbox();
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

fn seg_dist(p: [f64; 2], a: &[f64], b: &[f64]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p[0] - a[0] - s * dx).powi(2) + (p[1] - a[1] - s * dy).powi(2)).sqrt()
}

/// Winding number of `c` around `z` by signed crossings of the ray to `+x`.
pub fn winding(c: &PolyCurve, z: [f64; 2]) -> Result<i64> {
    check_planar_closed(c)?;
    let tol = REL_TOL * bbox_diameter(c);
    let mut w = 0i64;
    for i in 0..c.len() - 1 {
        let (a, b) = (c.vertex(i), c.vertex(i + 1));
        let d = seg_dist(z, a, b);
        if d <= tol {
            return Err(Error::OnBoundary { distance: d });
        }
        let cross = (b[0] - a[0]) * (z[1] - a[1]) - (z[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= z[1] && z[1] < b[1] && cross > 0.0 {
            w += 1;
        } else if b[1] <= z[1] && z[1] < a[1] && cross < 0.0 {
            w -= 1;
        }
    }
    Ok(w)
}

/// Midpoint-rule integral of the winding number over the bounding box with
/// square cells of side `grid_step`. Sample points that fall on the curve are
/// moved by half a step.
pub fn winding_integral(c: &PolyCurve, grid_step: f64) -> Result<f64> {
    check_planar_closed(c)?;
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::invalid("grid step must be positive"));
    }
    let (lo, hi) = c.bbox();
    let nx = (((hi[0] - lo[0]) / grid_step).ceil() as usize).max(1);
    let ny = (((hi[1] - lo[1]) / grid_step).ceil() as usize).max(1);
    if nx.saturating_mul(ny) > 400_000_000 {
        return Err(Error::ResourceCap { what: "winding grid cells".into(), requested: (nx * ny) as u128, cap: 400_000_000 });
    }
    let tol = REL_TOL * bbox_diameter(c).max(f64::MIN_POSITIVE);
    let segs: Vec<(&[f64], &[f64])> = (0..c.len() - 1).map(|i| (c.vertex(i), c.vertex(i + 1))).collect();
    let mut total = 0i64;
    let mut crossings: Vec<(f64, i64)> = Vec::new();
    for r in 0..ny {
        let mut y = lo[1] + (r as f64 + 0.5) * grid_step;
        if segs.iter().any(|(a, _)| (a[1] - y).abs() <= tol) {
            y += 0.5 * grid_step;
        }
        crossings.clear();
        for (a, b) in &segs {
            let up = a[1] <= y && y < b[1];
            let down = b[1] <= y && y < a[1];
            if up || down {
                let x = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                crossings.push((x, if up { 1 } else { -1 }));
            }
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
        // suffix[k] = sum of directions of crossings k.. (those right of x).
        let mut suffix = vec![0i64; crossings.len() + 1];
        for k in (0..crossings.len()).rev() {
            suffix[k] = suffix[k + 1] + crossings[k].1;
        }
        let wind_at = |x: f64| suffix[crossings.partition_point(|p| p.0 <= x)];
        for col in 0..nx {
            let mut x = lo[0] + (col as f64 + 0.5) * grid_step;
            let k = crossings.partition_point(|p| p.0 < x - tol);
            if k < crossings.len() && (crossings[k].0 - x).abs() <= tol {
                x += 0.5 * grid_step;
            }
            total += wind_at(x);
        }
    }
    Ok(total as f64 * grid_step * grid_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(v: &[[f64; 2]]) -> PolyCurve {
        PolyCurve::new(&v.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn square() -> PolyCurve {
        poly(&[[0., 0.], [1., 0.], [1., 1.], [0., 1.], [0., 0.]])
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding(&square(), [0.5, 0.5]).unwrap(), 1);
        assert_eq!(winding(&square(), [2.0, 0.0]).unwrap(), 0);
        let cw = poly(&[[0., 0.], [0., 1.], [1., 1.], [1., 0.], [0., 0.]]);
        assert_eq!(winding(&cw, [0.5, 0.5]).unwrap(), -1);
        assert!(matches!(winding(&square(), [0.5, 0.0]), Err(Error::OnBoundary { .. })));
        assert!(winding(&poly(&[[0., 0.], [1., 0.]]), [0.5, 0.5]).is_err());
    }

    #[test]
    fn winding_through_vertex_level() {
        // Rays at height 1 pass through the diamond vertices (0,1) and (2,1).
        let d = poly(&[[1., 0.], [2., 1.], [1., 2.], [0., 1.], [1., 0.]]);
        assert_eq!(winding(&d, [0.5, 1.0]).unwrap(), 1);
        assert_eq!(winding(&d, [-1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn integral_examples() {
        let a = winding_integral(&square(), 1e-2).unwrap();
        assert!((a - 1.0).abs() < 2e-2);
        // A counterclockwise and a clockwise unit square meeting at the origin.
        let fig8 = poly(&[[0., 0.], [1., 0.], [1., 1.], [0., 1.], [0., 0.], [0., -1.], [-1., -1.], [-1., 0.], [0., 0.]]);
        assert!((fig8.signed_area()).abs() < 1e-15);
        assert!(winding_integral(&fig8, 1e-2).unwrap().abs() < 2e-2);
        let tri = poly(&[[0., 0.], [1., 0.], [1., 1.], [0., 0.]]);
        assert!((winding_integral(&tri, 1e-2).unwrap() - 0.5).abs() < 2e-2);
    }
}
