//! Operational fate detection for orbits of the Poincaré map.
//!
//! The thresholds are shared by orbit iteration and portrait sampling.

use std::f64::consts::{PI, TAU};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::linalg::{Mat3, Vec3};

/// `||P(x) - x||` below this counts as convergence.
pub const CONVERGED_TOL: f64 = 1e-9;
/// Minimum coordinate below which an orbit is considered to hug the boundary.
pub const BOUNDARY_MIN_COORD: f64 = 1e-3;
/// ... provided the orbit stays at least this far from the origin.
pub const BOUNDARY_MIN_NORM: f64 = 0.05;
/// Distance to the fitted closed curve accepted as "on the curve".
pub const CURVE_TOL: f64 = 1e-4;
/// Trailing iterates that must satisfy the boundary or curve test.
pub const FATE_WINDOW: usize = 50;

/// Tail length examined by the closed-curve test.
const CURVE_FIT_POINTS: usize = 400;
const CURVE_MIN_POINTS: usize = 200;
const CURVE_SECTORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "kebab-case")]
pub enum Fate {
    ConvergedTo { limit: [f64; 3] },
    NearBoundaryCycle,
    OnInvariantCurve,
    Undecided,
}

impl Fate {
    pub fn label(&self) -> &'static str {
        match self {
            Fate::ConvergedTo { .. } => "converged",
            Fate::NearBoundaryCycle => "near-boundary-cycle",
            Fate::OnInvariantCurve => "on-invariant-curve",
            Fate::Undecided => "undecided",
        }
    }
}

/// True when every point of the trailing window has a coordinate below
/// [`BOUNDARY_MIN_COORD`] while its norm exceeds [`BOUNDARY_MIN_NORM`].
pub fn near_boundary(points: &[Vec3]) -> bool {
    if points.len() < FATE_WINDOW {
        return false;
    }
    points[points.len() - FATE_WINDOW..]
        .iter()
        .all(|p| p.min() < BOUNDARY_MIN_COORD && p.norm() > BOUNDARY_MIN_NORM)
}

/// Largest distance of the trailing window to a smooth closed curve through
/// the tail of the orbit, or `None` when the tail does not wind around its
/// centroid.
///
/// The tail is ordered by polar angle in its best-fit plane. Each window point
/// is compared with the cubic through its two angular neighbours on either
/// side, so points on a smooth closed curve score at the interpolation error
/// while spirals and scattered orbits score at their spread.
pub fn closed_curve_distance(points: &[Vec3]) -> Option<f64> {
    if points.len() < CURVE_MIN_POINTS {
        return None;
    }
    let start = points.len().saturating_sub(CURVE_FIT_POINTS);
    let tail = &points[start..];
    let n = tail.len();
    let centroid = tail.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n as f64;
    let mut cov = Mat3::zeros();
    for p in tail {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n as f64);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    if !(eig.eigenvalues[order[1]] > 0.0) {
        return None;
    }
    let e1: Vec3 = eig.eigenvectors.column(order[0]).into();
    let e2: Vec3 = eig.eigenvectors.column(order[1]).into();

    let mut sectors = [false; CURVE_SECTORS];
    let mut by_angle: Vec<(f64, usize)> = tail
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = p - centroid;
            let th = d.dot(&e2).atan2(d.dot(&e1));
            let s = ((th + PI) / TAU * CURVE_SECTORS as f64) as usize;
            sectors[s.min(CURVE_SECTORS - 1)] = true;
            (th, i)
        })
        .collect();
    if !sectors.iter().all(|&s| s) {
        return None;
    }
    by_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
    // repeated points (a periodic orbit) carry no shape information
    by_angle.dedup_by(|b, a| (b.0 - a.0).abs() < 1e-12);
    let m = by_angle.len();
    if m < 8 {
        return None;
    }

    let window_start = n - FATE_WINDOW.min(n);
    let mut worst: f64 = 0.0;
    for pos in 0..m {
        let (th, idx) = by_angle[pos];
        if idx < window_start {
            continue;
        }
        let mut nodes = [(0.0, Vec3::zeros()); 4];
        for (slot, off) in [-2isize, -1, 1, 2].into_iter().enumerate() {
            let q = pos as isize + off;
            let wrapped = q.rem_euclid(m as isize) as usize;
            let shift = if q < 0 {
                -TAU
            } else if q >= m as isize {
                TAU
            } else {
                0.0
            };
            let (tq, iq) = by_angle[wrapped];
            nodes[slot] = (tq + shift, tail[iq]);
        }
        let mut interp = Vec3::zeros();
        for (j, (tj, pj)) in nodes.iter().enumerate() {
            let mut w = 1.0;
            for (k, (tk, _)) in nodes.iter().enumerate() {
                if k != j {
                    let den = tj - tk;
                    if den.abs() < 1e-14 {
                        return None;
                    }
                    w *= (th - tk) / den;
                }
            }
            interp += pj * w;
        }
        worst = worst.max((tail[idx] - interp).norm());
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse_orbit(n: usize, step: f64, noise: f64) -> Vec<Vec3> {
        (0..n)
            .map(|k| {
                let t = k as f64 * step;
                let c = Vec3::new(0.3, 0.3, 0.3);
                let wobble = noise * ((k * 7919) % 13) as f64 / 13.0;
                c + Vec3::new(1.0, -1.0, 0.0) * (0.1 * t.cos() + wobble) + Vec3::new(1.0, 1.0, -2.0) * 0.03 * t.sin()
            })
            .collect()
    }

    #[test]
    fn irrational_rotation_on_ellipse_is_a_curve() {
        let pts = ellipse_orbit(500, 0.0723, 0.0);
        let d = closed_curve_distance(&pts).unwrap();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn noisy_points_are_not_a_curve() {
        let pts = ellipse_orbit(500, 0.0723, 0.01);
        let d = closed_curve_distance(&pts).unwrap();
        assert!(d > CURVE_TOL);
    }

    #[test]
    fn partial_arc_is_rejected() {
        let pts = ellipse_orbit(300, 0.001, 0.0);
        assert!(closed_curve_distance(&pts).is_none());
    }

    #[test]
    fn outward_spiral_is_not_a_curve() {
        let pts: Vec<Vec3> = (0..500)
            .map(|k| {
                let t = k as f64 * 0.0723;
                let r = 0.01 * (1.0 + 0.01 * k as f64);
                Vec3::new(0.3 + r * t.cos(), 0.3 + r * t.sin(), 0.3)
            })
            .collect();
        let d = closed_curve_distance(&pts).unwrap();
        assert!(d > CURVE_TOL, "{d}");
    }

    #[test]
    fn boundary_window() {
        let mut pts = vec![Vec3::new(0.3, 0.3, 0.3); 10];
        pts.extend(std::iter::repeat(Vec3::new(0.5, 1e-4, 0.2)).take(FATE_WINDOW));
        assert!(near_boundary(&pts));
        pts.push(Vec3::new(0.3, 0.3, 0.3));
        assert!(!near_boundary(&pts));
        assert!(!near_boundary(&[Vec3::new(1e-5, 1e-5, 1e-5); 60]));
    }
}
