//! Finite-difference obstacle problem: minimize the Dirichlet energy over
//! `u ≥ φ` with `u = g` on the boundary, by projected over-relaxation on
//! the 5-point Laplacian.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::synth::PiecewisePotential;

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("grid needs at least 8 nodes per side, got {0}")]
    GridTooSmall(usize),
    #[error("relaxation factor {0} outside (0, 2)")]
    Omega(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("boundary datum below the obstacle at node ({i}, {j}): g = {g}, phi = {phi}")]
    Incompatible {
        i: usize,
        j: usize,
        g: f64,
        phi: f64,
    },
    #[error("unknown sweep order '{0}'")]
    UnknownOrder(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Outside,
}

/// `n × n` nodes on `[lo, lo + (n−1)h]²`.
#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub n: usize,
    pub lo: [f64; 2],
    pub h: f64,
    pub kind: Vec<NodeKind>,
}

impl Grid {
    /// Square `[lo, hi]²` with the outer ring as boundary.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Grid, ObstacleError> {
        if n < 8 {
            return Err(ObstacleError::GridTooSmall(n));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let kind = (0..n * n)
            .map(|k| {
                let (i, j) = (k % n, k / n);
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    NodeKind::Boundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        Ok(Grid {
            n,
            lo: [lo, lo],
            h,
            kind,
        })
    }

    /// Unit disk on `[−1, 1]²`: nodes with `|x| < 1` are interior, their
    /// outside neighbors form the boundary layer.
    pub fn disk(n: usize) -> Result<Grid, ObstacleError> {
        let mut g = Grid::square(n, -1.0, 1.0)?;
        for k in 0..n * n {
            let x = g.point(k);
            g.kind[k] = if x[0] * x[0] + x[1] * x[1] < 1.0 {
                NodeKind::Interior
            } else {
                NodeKind::Outside
            };
        }
        for k in 0..n * n {
            if g.kind[k] == NodeKind::Outside
                && g.neighbors(k)
                    .iter()
                    .any(|&m| g.kind[m] == NodeKind::Interior)
            {
                g.kind[k] = NodeKind::Boundary;
            }
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = (k % self.n, k / self.n);
        [
            self.lo[0] + i as f64 * self.h,
            self.lo[1] + j as f64 * self.h,
        ]
    }

    /// Neighbors inside the array (all four for interior nodes).
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        let n = self.n;
        let (i, j) = (k % n, k / n);
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push(k - 1);
        }
        if i + 1 < n {
            out.push(k + 1);
        }
        if j > 0 {
            out.push(k - n);
        }
        if j + 1 < n {
            out.push(k + n);
        }
        out
    }

    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.point(k))).collect()
    }

    /// `h² Δ_h u` at an interior node.
    pub fn laplacian_h2(&self, u: &[f64], k: usize) -> f64 {
        let n = self.n;
        u[k - 1] + u[k + 1] + u[k - n] + u[k + n] - 4.0 * u[k]
    }
}

/// Order in which interior nodes are relaxed; each class is swept in turn.
pub trait SweepOrder: Send + Sync {
    fn name(&self) -> &'static str;
    fn classes(&self, grid: &Grid) -> Vec<Vec<usize>>;
}

pub struct RedBlack;

impl SweepOrder for RedBlack {
    fn name(&self) -> &'static str {
        "red-black"
    }

    fn classes(&self, grid: &Grid) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(), Vec::new()];
        for k in 0..grid.len() {
            if grid.kind[k] == NodeKind::Interior {
                c[(k % grid.n + k / grid.n) % 2].push(k);
            }
        }
        c
    }
}

pub struct Lexicographic;

impl SweepOrder for Lexicographic {
    fn name(&self) -> &'static str {
        "lexicographic"
    }

    fn classes(&self, grid: &Grid) -> Vec<Vec<usize>> {
        vec![(0..grid.len())
            .filter(|&k| grid.kind[k] == NodeKind::Interior)
            .collect()]
    }
}

pub fn sweep_order(name: &str) -> Result<Box<dyn SweepOrder>, ObstacleError> {
    match name {
        "red-black" => Ok(Box::new(RedBlack)),
        "lexicographic" => Ok(Box::new(Lexicographic)),
        _ => Err(ObstacleError::UnknownOrder(name.to_string())),
    }
}

pub fn sweep_orders() -> Vec<&'static str> {
    vec!["red-black", "lexicographic"]
}

#[derive(Clone, Debug)]
pub struct ObstacleInstance {
    pub grid: Grid,
    /// Boundary datum (read at boundary nodes only).
    pub g: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ObstacleInstance {
    pub fn new(grid: Grid, g: Vec<f64>, phi: Vec<f64>) -> Result<Self, ObstacleError> {
        for k in 0..grid.len() {
            if grid.kind[k] == NodeKind::Boundary && g[k] < phi[k] {
                let n = grid.n;
                return Err(ObstacleError::Incompatible {
                    i: k % n,
                    j: k / n,
                    g: g[k],
                    phi: phi[k],
                });
            }
        }
        Ok(ObstacleInstance { grid, g, phi })
    }

    pub fn from_fns(
        grid: Grid,
        g: impl Fn([f64; 2]) -> f64,
        phi: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self, ObstacleError> {
        let (gs, ps) = (grid.sample(g), grid.sample(phi));
        ObstacleInstance::new(grid, gs, ps)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub order: String,
    /// Energy is recorded every this many sweeps.
    pub energy_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            omega: 1.8,
            tol: 1e-10,
            max_iter: 200_000,
            order: "red-black".into(),
            energy_every: 50,
        }
    }
}

/// Residuals in `h²`-scaled form.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Residuals {
    /// `max (h² Δ_h u)_+`: violation of superharmonicity.
    pub laplacian: f64,
    /// `max (φ − u)_+`.
    pub constraint: f64,
    /// `max |min(u − φ, −h² Δ_h u)|`.
    pub complementarity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.laplacian
            .max(self.constraint)
            .max(self.complementarity)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VISolution {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Residuals,
    pub energies: Vec<f64>,
    pub energy_monotone: bool,
}

impl VISolution {
    /// Interior nodes where the constraint binds (up to `tol`).
    pub fn contact_count(&self, inst: &ObstacleInstance, tol: f64) -> usize {
        (0..inst.grid.len())
            .filter(|&k| inst.grid.kind[k] == NodeKind::Interior && self.u[k] - inst.phi[k] <= tol)
            .count()
    }
}

pub fn residuals(inst: &ObstacleInstance, u: &[f64]) -> Residuals {
    let mut r = Residuals::default();
    for k in 0..inst.grid.len() {
        if inst.grid.kind[k] != NodeKind::Interior {
            continue;
        }
        let lap = inst.grid.laplacian_h2(u, k);
        let gap = u[k] - inst.phi[k];
        r.laplacian = r.laplacian.max(lap);
        r.constraint = r.constraint.max(-gap);
        r.complementarity = r.complementarity.max(gap.min(-lap).abs());
    }
    // normalize −0
    r.constraint += 0.0;
    r
}

/// Discrete Dirichlet energy `½ Σ (u_a − u_b)²` over edges touching the interior.
pub fn energy(grid: &Grid, u: &[f64]) -> f64 {
    let n = grid.n;
    let mut e = 0.0;
    for k in 0..grid.len() {
        for m in [k + 1, k + n] {
            if m >= grid.len() || (m == k + 1 && k % n == n - 1) {
                continue;
            }
            if grid.kind[k] == NodeKind::Interior || grid.kind[m] == NodeKind::Interior {
                e += 0.5 * (u[k] - u[m]).powi(2);
            }
        }
    }
    e
}

/// Projected successive over-relaxation.
pub fn solve(inst: &ObstacleInstance, opts: &SolveOptions) -> Result<VISolution, ObstacleError> {
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(ObstacleError::Omega(opts.omega));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(ObstacleError::Tolerance(opts.tol));
    }
    let grid = &inst.grid;
    let classes = sweep_order(&opts.order)?.classes(grid);
    let mut u: Vec<f64> = (0..grid.len())
        .map(|k| match grid.kind[k] {
            NodeKind::Boundary => inst.g[k],
            NodeKind::Interior => inst.phi[k],
            NodeKind::Outside => 0.0,
        })
        .collect();
    let n = grid.n;
    let mut energies = vec![energy(grid, &u)];
    let mut iterations = 0;
    let mut converged = false;
    let mut res = residuals(inst, &u);
    while iterations < opts.max_iter {
        if res.max() <= opts.tol {
            converged = true;
            break;
        }
        for class in &classes {
            for &k in class {
                let gs = 0.25 * (u[k - 1] + u[k + 1] + u[k - n] + u[k + n]);
                let v = u[k] + opts.omega * (gs - u[k]);
                u[k] = v.max(inst.phi[k]);
            }
        }
        iterations += 1;
        if iterations % opts.energy_every == 0 {
            energies.push(energy(grid, &u));
        }
        // residual evaluation is a full pass; amortize it
        if iterations % 10 == 0 || iterations < 10 {
            res = residuals(inst, &u);
        }
    }
    if !converged {
        res = residuals(inst, &u);
        converged = res.max() <= opts.tol;
    }
    let energy_monotone = energies
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    Ok(VISolution {
        u,
        iterations,
        converged,
        residuals: res,
        energies,
        energy_monotone,
    })
}

/// Contact radius of the radial problem `φ = 1 − 2|x|²` on `B₁` with
/// `g = 0`: the harmonic continuation `u = −4r₀² ln r` leaves the obstacle
/// with matching value and slope at `r₀`. Found by shooting: the radial
/// equation `u'' + u'/r = 0` is integrated from `r₀` to `1` with RK4 and
/// `r₀` is bisected on the sign of `u(1)`.
pub fn radial_contact_radius(steps: usize) -> f64 {
    let shoot = |r0: f64| {
        let (mut r, mut u, mut du) = (r0, 1.0 - 2.0 * r0 * r0, -4.0 * r0);
        let dr = (1.0 - r0) / steps as f64;
        let f = |r: f64, du: f64| -du / r;
        for _ in 0..steps {
            let k1 = (du, f(r, du));
            let k2 = (du + 0.5 * dr * k1.1, f(r + 0.5 * dr, du + 0.5 * dr * k1.1));
            let k3 = (du + 0.5 * dr * k2.1, f(r + 0.5 * dr, du + 0.5 * dr * k2.1));
            let k4 = (du + dr * k3.1, f(r + dr, du + dr * k3.1));
            u += dr / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            du += dr / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            r += dr;
        }
        u
    };
    let (mut a, mut b) = (0.05, 0.95);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        // u(1) decreases as r₀ grows
        if shoot(m) < 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Exact radial solution for a contact radius `r0`, harmonically continued
/// beyond `r = 1`.
pub fn radial_solution(r0: f64, x: [f64; 2]) -> f64 {
    let r = x[0].hypot(x[1]);
    if r <= r0 {
        1.0 - 2.0 * r * r
    } else {
        -4.0 * r0 * r0 * r.ln()
    }
}

/// The radial instance on an `n`-node disk grid; boundary-layer nodes
/// (just outside `B₁`) carry the exact solution.
pub fn radial_instance(n: usize, r0: f64) -> Result<ObstacleInstance, ObstacleError> {
    ObstacleInstance::from_fns(
        Grid::disk(n)?,
        |x| radial_solution(r0, x),
        |x| 1.0 - 2.0 * (x[0] * x[0] + x[1] * x[1]),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialStudy {
    pub rows: Vec<(usize, f64, f64)>,
    /// `log₂(e_first / e_last) / log₂(h_first / h_last)`.
    pub order: f64,
}

/// Max nodal error against the radial solution for each `n`.
pub fn radial_study(ns: &[usize], opts: &SolveOptions) -> Result<RadialStudy, ObstacleError> {
    let r0 = radial_contact_radius(20_000);
    let mut rows = Vec::new();
    for &n in ns {
        let inst = radial_instance(n, r0)?;
        let sol = solve(&inst, opts)?;
        let err = (0..inst.grid.len())
            .filter(|&k| inst.grid.kind[k] == NodeKind::Interior)
            .map(|k| (sol.u[k] - radial_solution(r0, inst.grid.point(k))).abs())
            .fold(0.0, f64::max);
        rows.push((n, inst.grid.h, err));
    }
    let (f, l) = (rows[0], rows[rows.len() - 1]);
    let order = (f.2 / l.2).log2() / (f.1 / l.1).log2();
    Ok(RadialStudy { rows, order })
}

#[derive(Clone, Debug, Serialize)]
pub struct PropLipReport {
    pub n: usize,
    pub h: f64,
    /// `‖u_h − φ‖∞`.
    pub deviation: f64,
    /// `deviation / h`.
    pub constant: f64,
    pub contact_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `h² Δ_h φ` over interior nodes (positive where the sampled
    /// obstacle fails to be discretely superharmonic).
    pub obstacle_defect: f64,
}

/// `φ = −u` sampled on an `n × n` grid of the potential's domain (which must
/// be a square), `g = φ`; the solution should coincide with `φ`.
pub fn prop_lip_check(
    u: &PiecewisePotential,
    n: usize,
    opts: &SolveOptions,
) -> Result<PropLipReport, ObstacleError> {
    let d = u.domain;
    let grid = Grid::square(n, 0.0, 1.0)?;
    let size = d.size();
    let map = |x: [f64; 2]| [d.lo[0] + x[0] * size[0], d.lo[1] + x[1] * size[1]];
    let phi: Vec<f64> = (0..grid.len())
        .map(|k| -u.eval(map(grid.point(k))).value)
        .collect();
    let inst = ObstacleInstance::new(grid, phi.clone(), phi)?;
    let sol = solve(&inst, opts)?;
    let deviation = (0..inst.grid.len())
        .map(|k| (sol.u[k] - inst.phi[k]).abs())
        .fold(0.0, f64::max);
    let interior = inst
        .grid
        .kind
        .iter()
        .filter(|k| **k == NodeKind::Interior)
        .count();
    let obstacle_defect = (0..inst.grid.len())
        .filter(|&k| inst.grid.kind[k] == NodeKind::Interior)
        .map(|k| inst.grid.laplacian_h2(&inst.phi, k))
        .fold(f64::NEG_INFINITY, f64::max);
    let h = inst.grid.h * size[0].max(size[1]);
    Ok(PropLipReport {
        n,
        h,
        deviation,
        constant: deviation / h,
        contact_fraction: sol.contact_count(&inst, opts.tol) as f64 / interior as f64,
        iterations: sol.iterations,
        converged: sol.converged,
        obstacle_defect,
    })
}

/// `h² Σ |(D²_h u)_+|^p` over interior nodes whose neighbors are interior
/// or boundary, with `|·|` the Frobenius norm of the positive part of the
/// central-difference Hessian, for each `p`.
pub fn hessian_plus_norms(
    grid: &Grid,
    u: &[f64],
    p_list: &[f64],
    domain_scale: f64,
) -> BTreeMap<String, f64> {
    let n = grid.n;
    let h = grid.h * domain_scale;
    let mut sums = vec![0.0; p_list.len()];
    for k in 0..grid.len() {
        let (i, j) = (k % n, k / n);
        if grid.kind[k] != NodeKind::Interior || i == 0 || j == 0 || i + 1 == n || j + 1 == n {
            continue;
        }
        let uxx = (u[k - 1] - 2.0 * u[k] + u[k + 1]) / (h * h);
        let uyy = (u[k - n] - 2.0 * u[k] + u[k + n]) / (h * h);
        let uxy = (u[k + n + 1] - u[k + n - 1] - u[k - n + 1] + u[k - n - 1]) / (4.0 * h * h);
        let m = 0.5 * (uxx + uyy);
        let r = (0.25 * (uxx - uyy).powi(2) + uxy * uxy).sqrt();
        let plus = (m + r).max(0.0).hypot((m - r).max(0.0));
        for (s, &p) in sums.iter_mut().zip(p_list) {
            *s += h * h * plus.powf(p);
        }
    }
    p_list
        .iter()
        .zip(sums)
        .map(|(p, s)| (format!("{p}"), s))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianPlusRow {
    pub n: usize,
    pub norms: BTreeMap<String, f64>,
}

/// Refinement table of [`hessian_plus_norms`] for `φ = −u` solved on each grid.
pub fn hessian_plus_diagnostics(
    u: &PiecewisePotential,
    ns: &[usize],
    p_list: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<HessianPlusRow>, ObstacleError> {
    let d = u.domain;
    let size = d.size();
    let mut rows = Vec::new();
    for &n in ns {
        let grid = Grid::square(n, 0.0, 1.0)?;
        let phi: Vec<f64> = (0..grid.len())
            .map(|k| {
                -u.eval([
                    d.lo[0] + grid.point(k)[0] * size[0],
                    d.lo[1] + grid.point(k)[1] * size[1],
                ])
                .value
            })
            .collect();
        let inst = ObstacleInstance::new(grid, phi.clone(), phi)?;
        let sol = solve(&inst, opts)?;
        rows.push(HessianPlusRow {
            n,
            norms: hessian_plus_norms(&inst.grid, &sol.u, p_list, size[0]),
        });
    }
    Ok(rows)
}

/// Grid values as CSV `x,y,value`.
pub fn grid_csv(grid: &Grid, values: &[f64]) -> String {
    let mut out = String::from("x,y,value\n");
    for (k, v) in values.iter().enumerate() {
        if grid.kind[k] == NodeKind::Outside {
            continue;
        }
        let x = grid.point(k);
        let _ = writeln!(out, "{:.17e},{:.17e},{:.17e}", x[0], x[1], v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_boundary_layer_surrounds_interior() {
        let g = Grid::disk(33).unwrap();
        for k in 0..g.len() {
            if g.kind[k] == NodeKind::Interior {
                assert!(g
                    .neighbors(k)
                    .iter()
                    .all(|&m| g.kind[m] != NodeKind::Outside));
            }
        }
    }

    #[test]
    fn contact_radius_solves_the_matching_equation() {
        let r0 = radial_contact_radius(20_000);
        let f = -4.0 * r0 * r0 * r0.ln() - (1.0 - 2.0 * r0 * r0);
        assert!(f.abs() < 1e-12, "{r0} {f}");
    }
}
