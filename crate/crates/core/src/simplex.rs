//! Carrying simplex meshes, the boundary heteroclinic cycle and phase portraits.
//!
//! The simplex radius along a ray is bracketed by two surfaces that are known
//! to lie below and above the carrying simplex: a small plane `sum x = c_in`
//! on which every coordinate grows, and a plane `sum x = c_out` outside the
//! box spanned by the axial fixed points. Both sides of the simplex are forward
//! invariant, so their `K`-th images still bracket it while converging onto it
//! from either side. The image surfaces are radial graphs; the point where one
//! of them meets a ray is found by Newton's method on the preimage parameter.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{compute_invariants, is_class_27};
use crate::error::{Error, Result};
use crate::fate::Fate;
use crate::fixedpoints::planar_fixed_points;
use crate::flow::flow_autonomous;
use crate::linalg::{Mat3, Vec3};
use crate::model::ModelSpec;
use crate::poincare::{iterate, poincare_map_with_jacobian, DEFAULT_STOP_TOL};

pub const DEFAULT_RAYS: usize = 256;
/// Largest accepted bracket width along a ray.
pub const BRACKET_TOL: f64 = 1e-4;

const GRID: usize = 48;
/// Newton restarts from the image vertices nearest to the target direction.
const RESTARTS: usize = 6;
const NEWTON_MAX_ITER: usize = 40;
const DIRECTION_TOL: f64 = 1e-12;

/// `n` unit rays spread evenly over the closed positive octant.
///
/// Fibonacci-sphere points with the polar coordinate uniform in `z` and the
/// azimuth folded into `[0, pi/2]`.
pub fn octant_rays(n: usize) -> Vec<Vec3> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    (0..n)
        .map(|i| {
            let k = i as f64 + 0.5;
            let z = 1.0 - k / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = (k * g).fract() * std::f64::consts::FRAC_PI_2;
            Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

pub fn axis_rays() -> Vec<Vec3> {
    vec![Vec3::x(), Vec3::y(), Vec3::z()]
}

/// A self-map of the octant with its Jacobian.
pub trait OctantMap: Sync {
    fn eval(&self, x: &Vec3) -> Result<(Vec3, Mat3)>;
}

/// The Poincaré map.
pub struct PoincareMap<'a> {
    pub spec: &'a ModelSpec,
    pub tol: f64,
}

impl OctantMap for PoincareMap<'_> {
    fn eval(&self, x: &Vec3) -> Result<(Vec3, Mat3)> {
        poincare_map_with_jacobian(self.spec, x, self.tol)
    }
}

/// The time-`tau` map of the autonomous flow.
pub struct FlowMap {
    pub a: Mat3,
    pub b: f64,
    pub tau: f64,
    pub tol: f64,
}

impl OctantMap for FlowMap {
    fn eval(&self, x: &Vec3) -> Result<(Vec3, Mat3)> {
        let r = flow_autonomous(&self.a, self.b, x, self.tau, self.tol, true)?;
        Ok((r.state, r.jacobian.expect("variational flow")))
    }
}

fn power<M: OctantMap>(map: &M, x: &Vec3, k: usize) -> Result<(Vec3, Mat3)> {
    let mut y = *x;
    let mut j = Mat3::identity();
    for _ in 0..k {
        let (ny, dj) = map.eval(&y)?;
        y = ny;
        j = dj * j;
    }
    Ok((y, j))
}

fn power_point<M: OctantMap>(map: &M, x: &Vec3, k: usize) -> Result<Vec3> {
    let mut y = *x;
    for _ in 0..k {
        y = map.eval(&y)?.0;
    }
    Ok(y)
}

/// Radial projection onto the standard simplex.
fn project(y: &Vec3) -> Vec3 {
    y / y.sum()
}

/// `K`-th image of the plane `sum x = level`, sampled on a barycentric grid.
struct ImageSurface {
    level: f64,
    grid: Vec<Vec3>,
    images: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl ImageSurface {
    fn build<M: OctantMap>(map: &M, level: f64, k: usize) -> Result<Self> {
        let m = GRID;
        let mut index = vec![vec![0usize; m + 1]; m + 1];
        let mut grid = Vec::new();
        for i in 0..=m {
            for j in 0..=(m - i) {
                index[i][j] = grid.len();
                grid.push(Vec3::new(i as f64, j as f64, (m - i - j) as f64) / m as f64);
            }
        }
        let mut triangles = Vec::new();
        for i in 0..m {
            for j in 0..(m - i) {
                triangles.push([index[i][j], index[i + 1][j], index[i][j + 1]]);
                if i + j + 1 < m {
                    triangles.push([index[i + 1][j], index[i + 1][j + 1], index[i][j + 1]]);
                }
            }
        }
        let images = grid
            .par_iter()
            .map(|u| power_point(map, &(u * level), k).map(|y| project(&y)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            level,
            grid,
            images,
            triangles,
        })
    }

    /// Preimage parameter whose image direction is near `t`, by linear
    /// interpolation inside the image triangle containing `t`.
    fn initial_guess(&self, t: &Vec3) -> Vec3 {
        let mut best = (f64::INFINITY, self.grid[0]);
        for tri in &self.triangles {
            let [p, q, r] = tri.map(|i| self.images[i]);
            // barycentric coordinates in the (x1, x2) chart of the simplex
            let (x0, y0) = (p[0], p[1]);
            let m11 = q[0] - x0;
            let m12 = r[0] - x0;
            let m21 = q[1] - y0;
            let m22 = r[1] - y0;
            let det = m11 * m22 - m12 * m21;
            if det.abs() < 1e-300 {
                continue;
            }
            let bx = t[0] - x0;
            let by = t[1] - y0;
            let s = (bx * m22 - m12 * by) / det;
            let w = (m11 * by - bx * m21) / det;
            let lam = [1.0 - s - w, s, w];
            let outside = lam.iter().map(|&v| (-v).max(0.0)).sum::<f64>();
            if outside < best.0 {
                let u = self.grid[tri[0]] * lam[0] + self.grid[tri[1]] * lam[1] + self.grid[tri[2]] * lam[2];
                best = (outside, u);
                if outside == 0.0 {
                    break;
                }
            }
        }
        let u = best.1.map(|v| v.max(0.0));
        u / u.sum()
    }

    /// Preimage parameters of the `n` image vertices closest to `t`.
    fn nearest(&self, t: &Vec3, n: usize) -> Vec<Vec3> {
        let mut idx: Vec<usize> = (0..self.images.len()).collect();
        idx.sort_by(|&i, &j| (self.images[i] - t).norm().total_cmp(&(self.images[j] - t).norm()));
        idx.into_iter().take(n).map(|i| self.grid[i]).collect()
    }
}

/// Radius along `d` of the `K`-th image of the plane `sum x = surface.level`.
fn surface_radius<M: OctantMap>(map: &M, surface: &ImageSurface, d: &Vec3, k: usize) -> Result<f64> {
    let d = d / d.norm();
    let t = project(&d);
    let mut guesses = vec![surface.initial_guess(&t)];
    guesses.extend(surface.nearest(&t, RESTARTS));
    let mut last_err = None;
    for u in guesses {
        match newton_on_surface(map, surface, &d, &t, u, k) {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one guess"))
}

fn newton_on_surface<M: OctantMap>(
    map: &M,
    surface: &ImageSurface,
    d: &Vec3,
    t: &Vec3,
    mut u: Vec3,
    k: usize,
) -> Result<f64> {
    let free: Vec<usize> = (0..3).filter(|&i| t[i] > 0.0).collect();
    for i in 0..3 {
        if t[i] == 0.0 {
            u[i] = 0.0;
        }
    }
    u /= u.sum();
    if free.len() == 1 {
        let y = power_point(map, &(u * surface.level), k)?;
        return Ok(y.dot(d));
    }
    // tangent basis of the face spanned by the free coordinates
    let last = *free.last().expect("nonempty");
    let basis: Vec<Vec3> = free[..free.len() - 1]
        .iter()
        .map(|&i| {
            let mut e = Vec3::zeros();
            e[i] = 1.0;
            e[last] = -1.0;
            e
        })
        .collect();

    let eval = |u: &Vec3| -> Result<(Vec3, Vec3, Mat3)> {
        let (y, j) = power(map, &(u * surface.level), k)?;
        let p = project(&y);
        let dpi = (Mat3::identity() - p * Vec3::repeat(1.0).transpose()) / y.sum();
        Ok((y, p - t, dpi * j * surface.level))
    };
    let (mut y, mut f, mut jac) = eval(&u)?;
    for _ in 0..NEWTON_MAX_ITER {
        if f.amax() <= DIRECTION_TOL {
            break;
        }
        let cols: Vec<Vec3> = basis.iter().map(|e| jac * e).collect();
        let step = least_squares(&cols, &(-f));
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let du: Vec3 = basis.iter().zip(&step).map(|(e, s)| e * (s * lambda)).sum();
            let trial = u + du;
            if trial.iter().all(|&v| v >= 0.0) {
                let (ty, tf, tj) = eval(&trial)?;
                if tf.amax() < f.amax() {
                    accepted = Some((trial, ty, tf, tj));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((nu, ny, nf, nj)) = accepted else { break };
        u = nu;
        y = ny;
        f = nf;
        jac = nj;
    }
    if f.amax() > 1e-9 {
        return Err(Error::NewtonDivergence(format!(
            "ray ({:.4}, {:.4}, {:.4}): direction mismatch {:e}",
            d[0],
            d[1],
            d[2],
            f.amax()
        )));
    }
    Ok(y.dot(d))
}

/// Least-squares solution of `sum_k s_k cols[k] = rhs` for one or two columns.
fn least_squares(cols: &[Vec3], rhs: &Vec3) -> Vec<f64> {
    match cols.len() {
        1 => {
            let c = cols[0];
            vec![c.dot(rhs) / c.dot(&c).max(1e-300)]
        }
        _ => {
            let m = nalgebra::Matrix3x2::from_columns(&[cols[0], cols[1]]);
            let svd = m.svd(true, true);
            let eps = 1e-14 * svd.singular_values.max();
            match svd.solve(rhs, eps) {
                Ok(s) => vec![s[0], s[1]],
                Err(_) => vec![0.0, 0.0],
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RayFailure {
    pub ray: [f64; 3],
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplexMesh {
    /// Unit directions in the closed positive octant.
    pub rays: Vec<[f64; 3]>,
    /// Midpoint of the bracket along each ray.
    pub radii: Vec<f64>,
    /// Bracket width along each ray.
    pub widths: Vec<f64>,
    /// Rays for which no bracket of width at most [`BRACKET_TOL`] was found.
    pub failures: Vec<RayFailure>,
}

impl SimplexMesh {
    pub fn points(&self) -> Vec<Vec3> {
        self.rays
            .iter()
            .zip(&self.radii)
            .map(|(d, r)| Vec3::from(*d) * *r)
            .collect()
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with columns `d1, d2, d3, radius, width`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("d1,d2,d3,radius,width\n");
        for ((d, r), w) in self.rays.iter().zip(&self.radii).zip(&self.widths) {
            s.push_str(&crate::csv::row(&[d[0], d[1], d[2], *r, *w]));
        }
        s
    }

    /// Pairs `(i, j)` with `points[i] < points[j] - slack` in every coordinate.
    pub fn ordered_pairs(&self, slack: f64) -> Vec<(usize, usize)> {
        let pts = self.points();
        let mut out = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            for (j, q) in pts.iter().enumerate() {
                if i != j && (0..3).all(|k| q[k] - p[k] > slack) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Bracketing engine for one map; reusable across rays.
pub struct SimplexBracket<'m, M: OctantMap> {
    map: &'m M,
    k: usize,
    inner: ImageSurface,
    outer: ImageSurface,
}

impl<'m, M: OctantMap> SimplexBracket<'m, M> {
    /// `inner` and `outer` are the levels of the two starting planes.
    pub fn new(map: &'m M, inner: f64, outer: f64, k: usize) -> Result<Self> {
        Ok(Self {
            map,
            k,
            inner: ImageSurface::build(map, inner, k)?,
            outer: ImageSurface::build(map, outer, k)?,
        })
    }

    /// `(lower, upper)` radii along `d`.
    pub fn bracket(&self, d: &Vec3) -> Result<(f64, f64)> {
        let lo = surface_radius(self.map, &self.inner, d, self.k)?;
        let hi = surface_radius(self.map, &self.outer, d, self.k)?;
        Ok((lo, hi))
    }

    pub fn mesh(&self, rays: &[Vec3]) -> SimplexMesh {
        let results: Vec<(Vec3, Result<(f64, f64)>)> = rays.par_iter().map(|d| (*d, self.bracket(d))).collect();
        let mut mesh = SimplexMesh {
            rays: Vec::new(),
            radii: Vec::new(),
            widths: Vec::new(),
            failures: Vec::new(),
        };
        for (d, res) in results {
            let d = d / d.norm();
            match res {
                Ok((lo, hi)) if lo <= hi + 1e-12 && hi - lo <= BRACKET_TOL => {
                    mesh.rays.push(d.into());
                    mesh.radii.push(0.5 * (lo + hi));
                    mesh.widths.push((hi - lo).max(0.0));
                }
                Ok((lo, hi)) => mesh.failures.push(RayFailure {
                    ray: d.into(),
                    reason: format!("bracket [{lo}, {hi}] too wide or inverted"),
                }),
                Err(e) => mesh.failures.push(RayFailure {
                    ray: d.into(),
                    reason: e.to_string(),
                }),
            }
        }
        mesh
    }
}

/// Plane levels `(inner, outer)` bracketing the carrying simplex of the flow.
///
/// On `sum x = c` with `c < b / max a_ij` every coordinate grows, so the plane
/// cannot meet the unordered simplex. The simplex lies in the box spanned by
/// `b / a_ii`, whose coordinate sum is below `3 max b / a_ii`.
pub fn flow_plane_levels(a: &Mat3, b: f64) -> (f64, f64) {
    let max_entry = a.iter().copied().fold(0.0, f64::max);
    let caps: Vec<f64> = (0..3).map(|i| b / a[(i, i)]).collect();
    let min_cap = caps.iter().copied().fold(f64::INFINITY, f64::min);
    let max_cap = caps.iter().copied().fold(0.0, f64::max);
    ((0.5 * b / max_entry).min(0.01 * min_cap), 3.03 * max_cap)
}

/// Flow time after which both bracketing surfaces are expected to be within
/// about `1e-5` of the simplex: the time to grow from the inner plane to the
/// outer one at rate `b`, plus the time to contract by `1e-5`.
pub fn settling_time(a: &Mat3, b: f64) -> f64 {
    let (inner, outer) = flow_plane_levels(a, b);
    ((outer / inner).ln() + 1e5f64.ln()) / b
}

/// Default iteration count for the map: `P` acts like the flow over `rho_hat`.
pub fn default_map_iterations(spec: &ModelSpec) -> usize {
    (settling_time(spec.a(), spec.b()) / spec.constants().rho_hat).ceil() as usize
}

/// Iterations of the time-`0.5 / b` map covering the same flow time as `k`
/// iterations of `P`.
pub fn matching_flow_iterations(spec: &ModelSpec, k: usize) -> usize {
    (k as f64 * spec.constants().rho_hat * 2.0 * spec.b()).ceil() as usize
}

/// Mesh of the carrying simplex of `P` along the given rays.
pub fn carrying_simplex_along(spec: &ModelSpec, rays: &[Vec3], k_iters: Option<usize>, tol: f64) -> Result<SimplexMesh> {
    let map = PoincareMap { spec, tol };
    let (inner, outer) = flow_plane_levels(spec.a(), spec.b());
    let rho = spec.constants().rho_star;
    let k = k_iters.unwrap_or_else(|| default_map_iterations(spec));
    let engine = SimplexBracket::new(&map, inner * rho, outer * rho, k)?;
    Ok(engine.mesh(rays))
}

/// Mesh of the carrying simplex of `P` along `n_rays` octant rays.
pub fn approximate_carrying_simplex(spec: &ModelSpec, n_rays: usize, k_iters: Option<usize>, tol: f64) -> Result<SimplexMesh> {
    carrying_simplex_along(spec, &octant_rays(n_rays), k_iters, tol)
}

/// Mesh of the carrying simplex of the autonomous flow, computed with its
/// time-`0.5 / b` map. `k_iters` counts iterations of `P`; the flow map is
/// iterated over the same total flow time.
pub fn flow_carrying_simplex_along(
    spec: &ModelSpec,
    rays: &[Vec3],
    k_iters: Option<usize>,
    tol: f64,
) -> Result<SimplexMesh> {
    let map = FlowMap {
        a: *spec.a(),
        b: spec.b(),
        tau: 0.5 / spec.b(),
        tol,
    };
    let (inner, outer) = flow_plane_levels(spec.a(), spec.b());
    let k = matching_flow_iterations(spec, k_iters.unwrap_or_else(|| default_map_iterations(spec)));
    let engine = SimplexBracket::new(&map, inner, outer, k)?;
    Ok(engine.mesh(rays))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub shared_rays: usize,
    /// `max |r_P - rho* r_Phi|` over shared rays.
    pub max_deviation: f64,
    pub max_width: f64,
}

/// Compares the mesh of `P` with the scaled mesh of the flow along shared rays.
pub fn scaling_report(spec: &ModelSpec, map_mesh: &SimplexMesh, flow_mesh: &SimplexMesh) -> ScalingReport {
    let rho = spec.constants().rho_star;
    let mut shared = 0;
    let mut dev: f64 = 0.0;
    for (d, r) in map_mesh.rays.iter().zip(&map_mesh.radii) {
        if let Some(k) = flow_mesh.rays.iter().position(|e| e == d) {
            shared += 1;
            dev = dev.max((r - rho * flow_mesh.radii[k]).abs());
        }
    }
    ScalingReport {
        shared_rays: shared,
        max_deviation: dev,
        max_width: map_mesh.max_width().max(flow_mesh.max_width() * rho),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeteroclinicCheck {
    pub present: bool,
    /// `Some(true)` attracting, `Some(false)` repelling, `None` if absent or `vartheta = 0`.
    pub attracting: Option<bool>,
    pub vartheta: f64,
    pub planar_fixed_points: usize,
}

/// Whether the boundary of the carrying simplex is a heteroclinic cycle, and its stability.
pub fn heteroclinic_cycle_check(spec: &ModelSpec, tol: f64) -> Result<HeteroclinicCheck> {
    let vartheta = compute_invariants(spec).vartheta;
    let planar = planar_fixed_points(spec, tol)?;
    let n_planar = planar.found.len();
    let present = is_class_27(spec).is_some() && n_planar == 0;
    let attracting = if present && vartheta != 0.0 { Some(vartheta < 0.0) } else { None };
    Ok(HeteroclinicCheck {
        present,
        attracting,
        vartheta,
        planar_fixed_points: n_planar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub x0: [f64; 3],
    pub fate: Fate,
    /// Last computed iterate.
    pub last: [f64; 3],
    pub iterations: usize,
    /// Smallest coordinate seen along the orbit.
    pub min_coordinate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portrait {
    pub traces: Vec<TraceSummary>,
    /// Number of traces per fate label.
    pub counts: BTreeMap<String, usize>,
}

impl TraceSummary {
    /// The limit point for converged orbits, else the last iterate.
    pub fn limit(&self) -> [f64; 3] {
        match self.fate {
            Fate::ConvergedTo { limit } => limit,
            _ => self.last,
        }
    }
}

impl Portrait {
    /// CSV with columns `x1, x2, x3, fate, limit1, limit2, limit3, iterations`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,x3,fate,limit1,limit2,limit3,iterations\n");
        for t in &self.traces {
            let l = t.limit();
            let x0 = crate::csv::row(&t.x0);
            let limit = crate::csv::row(&l);
            s.push_str(&format!(
                "{},{},{},{}\n",
                x0.trim_end(),
                t.fate.label(),
                limit.trim_end(),
                t.iterations
            ));
        }
        s
    }
}

/// Initial points drawn log-uniformly from `[1e-3, 2 max b / a_ii]^3`.
pub fn portrait_initial_points(spec: &ModelSpec, n_init: usize, rng_seed: u64) -> Vec<Vec3> {
    let upper = 2.0 * (0..3).map(|i| spec.b() / spec.a()[(i, i)]).fold(0.0, f64::max);
    let (lo, hi) = (1e-3f64.ln(), upper.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n_init)
        .map(|_| Vec3::from_fn(|_, _| rng.gen_range(lo..hi).exp()))
        .collect()
}

/// Iterates `n_init` random orbits to their fates. Deterministic for a given seed.
pub fn sample_portrait(spec: &ModelSpec, n_init: usize, k_max: usize, rng_seed: u64, tol: f64) -> Result<Portrait> {
    if n_init == 0 {
        return Err(Error::InvalidParameter("n_init must be at least 1".into()));
    }
    let starts = portrait_initial_points(spec, n_init, rng_seed);
    let traces = starts
        .par_iter()
        .map(|x0| {
            let t = iterate(spec, x0, k_max, DEFAULT_STOP_TOL, tol)?;
            let min_coordinate = t.points.iter().map(|p| p.min()).fold(f64::INFINITY, f64::min);
            Ok(TraceSummary {
                x0: (*x0).into(),
                fate: t.fate,
                last: t.last().into(),
                iterations: t.k,
                min_coordinate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = BTreeMap::new();
    for t in &traces {
        *counts.entry(t.fate.label().to_string()).or_insert(0) += 1;
    }
    Ok(Portrait { traces, counts })
}
