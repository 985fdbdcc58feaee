//! Lebesgue area of Bowen balls for linear automorphisms.

use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};

const QUADRATURE_NODES: usize = 4096;

/// Area of `B_{n,m}(x, r)` (times `−n < k < m`) for a linear map; it does
/// not depend on `x`. In eigen-coordinates `(u, s)` the ball is
/// `{max_k |λ_u^k u e_u + λ_s^k s e_s| < r}`; for each `u` the admissible
/// `s` form an interval, integrated by Gauss–Legendre-free midpoint
/// quadrature on the `u`-range.
pub fn linear_ball_area(map: &HyperbolicMap, n: usize, m: usize, r: f64) -> Result<f64> {
    if !map.is_linear() {
        return Err(Error::Invalid("the area oracle applies to linear maps only".into()));
    }
    if n == 0 || m == 0 {
        return Err(Error::Invalid("Bowen ball depths must be positive".into()));
    }
    let e = map.eigen();
    let (lu, ls) = (e.lambda_u, e.lambda_s);
    let cos = e.e_u.dot(e.e_s);
    let times: Vec<i32> = (-(n as i32) + 1..m as i32).collect();
    // |a e_u + b e_s|² = a² + b² + 2ab·cos
    let s_interval = |u: f64| -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for &k in &times {
            let a = lu.powi(k) * u;
            let c = ls.powi(k);
            // solve b² + 2ab cos + a² − r² < 0 in b, then s = b / c
            let disc = a * a * cos * cos - (a * a - r * r);
            if disc <= 0.0 {
                return None;
            }
            let root = disc.sqrt();
            let (b0, b1) = (-a * cos - root, -a * cos + root);
            let (s0, s1) = if c > 0.0 { (b0 / c, b1 / c) } else { (b1 / c, b0 / c) };
            lo = lo.max(s0);
            hi = hi.min(s1);
        }
        (hi > lo).then_some((lo, hi))
    };
    // projection of the ball on the u-axis
    let u_max = times.iter().map(|&k| r / (lu.abs().powi(k) * (1.0 - cos * cos).sqrt())).fold(f64::INFINITY, f64::min);
    let h = 2.0 * u_max / QUADRATURE_NODES as f64;
    let mut total = 0.0;
    for i in 0..QUADRATURE_NODES {
        let u = -u_max + (i as f64 + 0.5) * h;
        if let Some((lo, hi)) = s_interval(u) {
            total += (hi - lo) * h;
        }
    }
    Ok(total * e.e_u.cross(e.e_s).abs())
}
