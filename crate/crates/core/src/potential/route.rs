//! Piecewise-linear paths that keep clear of excised pole disks.

use num_complex::Complex64;

use crate::error::{DpwError, Result};

/// Vertices of the octagon placed around each pole.
const RING: usize = 8;
/// Octagon circumradius in units of the excision radius; the edges then
/// stay at distance `1.5·cos(π/8) ≈ 1.39` radii from the pole.
const RING_SCALE: f64 = 1.5;

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn clear(a: Complex64, b: Complex64, poles: &[Complex64], radius: f64) -> bool {
    poles.iter().all(|&p| segment_distance(p, a, b) > radius)
}

/// Shortest path from `a` to `b` through the visibility graph of the
/// octagons around the poles. Returns the vertex list including both ends.
pub fn route(a: Complex64, b: Complex64, poles: &[Complex64], radius: f64) -> Result<Vec<Complex64>> {
    for &p in poles {
        if (a - p).norm() <= radius || (b - p).norm() <= radius {
            return Err(DpwError::PoleOnPath { pole: p });
        }
    }
    if clear(a, b, poles, radius) {
        return Ok(vec![a, b]);
    }
    let mut nodes = vec![a, b];
    for &p in poles {
        for k in 0..RING {
            let ang = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / RING as f64;
            let v = p + Complex64::from_polar(RING_SCALE * radius, ang);
            if poles.iter().all(|&q| (v - q).norm() > radius) {
                nodes.push(v);
            }
        }
    }
    let count = nodes.len();
    let mut dist = vec![f64::INFINITY; count];
    let mut prev = vec![usize::MAX; count];
    let mut done = vec![false; count];
    dist[0] = 0.0;
    loop {
        // Lowest index wins ties, so the route is deterministic.
        let mut u = usize::MAX;
        for i in 0..count {
            if !done[i] && dist[i].is_finite() && (u == usize::MAX || dist[i] < dist[u]) {
                u = i;
            }
        }
        if u == usize::MAX || u == 1 {
            break;
        }
        done[u] = true;
        for v in 0..count {
            if done[v] || v == u {
                continue;
            }
            if !clear(nodes[u], nodes[v], poles, radius) {
                continue;
            }
            let alt = dist[u] + (nodes[v] - nodes[u]).norm();
            if alt < dist[v] {
                dist[v] = alt;
                prev[v] = u;
            }
        }
    }
    if !dist[1].is_finite() {
        let nearest = poles
            .iter()
            .copied()
            .min_by(|p, q| {
                segment_distance(*p, a, b)
                    .partial_cmp(&segment_distance(*q, a, b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(a);
        return Err(DpwError::PoleOnPath { pole: nearest });
    }
    let mut path = vec![nodes[1]];
    let mut cur = 1;
    while cur != 0 {
        cur = prev[cur];
        path.push(nodes[cur]);
    }
    path.reverse();
    Ok(path)
}

/// Checks that an explicit path keeps clear of every pole disk.
pub fn check_path(path: &[Complex64], poles: &[Complex64], radius: f64) -> Result<()> {
    for w in path.windows(2) {
        for &p in poles {
            if segment_distance(p, w[0], w[1]) <= radius {
                return Err(DpwError::PoleOnPath { pole: p });
            }
        }
    }
    Ok(())
}
