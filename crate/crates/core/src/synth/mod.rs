//! Synthesis of scalar potentials whose Hessians realize laminates.
//!
//! A potential is `u(x) = ½ x·A x + b·x + Σ w(x)` where each `w` is a
//! product-form cubic perturbation owned by one item of a template tree (see
//! [`template`]). Stripe perturbations oscillate the Hessian between the two
//! matrices of a rank-one split and are tapered to zero (with zero slope)
//! near the edges they run into, so every perturbation has vanishing value
//! and gradient on the boundary of the rectangle it lives on.

pub mod analysis;
mod build;
pub mod poly;
pub mod template;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use build::MatrixTable;
use build::{Builder, LeafHook, Node};
use poly::Pert;
use template::{Item, Rect, Sub, Tag, Template};

use crate::constructions::{ConstructionError, StaircaseSchedule};
use crate::interval::Interval;
use crate::laminate::{Laminate, LaminateError};
use crate::scalar::Scalar;
use crate::sym2::SymMat2;

use analysis::Analyzer;

/// Allowed distance of frame Hessians from their trail segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum HessTol {
    Absolute(f64),
    /// Fraction of the Frobenius norm of the matrix being split.
    Relative(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthConfig {
    /// Area tolerance: atoms keep at least `(1 − eps)` of their weight.
    pub eps: f64,
    pub hess_tol: HessTol,
    /// Maximum number of stored cells.
    pub budget: usize,
    /// Stripe periods never drop below this fraction of the shorter side.
    pub min_delta_ratio: f64,
    /// Affine part `b` of the boundary gradient `A x + b`.
    pub offset: [f64; 2],
}

impl SynthConfig {
    pub fn new(eps: f64) -> Self {
        SynthConfig {
            eps,
            hess_tol: HessTol::Absolute(eps),
            budget: 10_000_000,
            min_delta_ratio: (-20f64).exp2(),
            offset: [0.0, 0.0],
        }
    }

    pub fn relative(eps: f64) -> Self {
        SynthConfig {
            hess_tol: HessTol::Relative(eps),
            ..SynthConfig::new(eps)
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("rank-one direction is not a coordinate axis")]
    NonAxisDirection,
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("cell budget exceeded: {cells} stored cells > {budget}")]
    Budget { cells: usize, budget: usize },
    #[error("stripe period {delta:e} below the floor for side {side:e}")]
    DeltaTooSmall { delta: f64, side: f64 },
    #[error("{cells} logical cells exceed the flat dump limit {limit}")]
    CellLimit { cells: f64, limit: usize },
    #[error(transparent)]
    Laminate(#[from] LaminateError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// Value and derivatives of a potential at one point.
#[derive(Clone, Debug)]
pub struct PointEval {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
    pub tag: Tag,
    pub level: u32,
    pub atom: Option<u32>,
}

/// One leaf cell in physical coordinates, with `u` expanded as
/// `Σ a[i][j] (x − x0)^i (y − y0)^j` around its lower-left corner.
#[derive(Clone, Debug, Serialize)]
pub struct CellRecord {
    pub rect: Rect,
    pub tag: Tag,
    pub atom: Option<u32>,
    pub level: u32,
    pub region: Option<u32>,
    pub coeffs: [[f64; 4]; 4],
}

pub struct PiecewisePotential {
    pub domain: Rect,
    /// Physical length of one root template unit.
    pub scale: f64,
    /// Matrix id of `A`.
    pub base: u32,
    pub offset: [f64; 2],
    pub root: Arc<Template>,
    pub table: MatrixTable,
    pub stored_cells: usize,
}

impl PiecewisePotential {
    pub fn base_matrix(&self) -> &SymMat2<Interval> {
        self.table.get(self.base)
    }

    fn affine(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let a = self.base_matrix().midpoint();
        let g = [
            a[0][0] * x[0] + a[0][1] * x[1] + self.offset[0],
            a[1][0] * x[0] + a[1][1] * x[1] + self.offset[1],
        ];
        let v = 0.5 * (x[0] * (g[0] + self.offset[0]) + x[1] * (g[1] + self.offset[1]));
        (v, g)
    }

    pub fn logical_cells(&self) -> f64 {
        self.root.logical_cells
    }

    fn to_local(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.domain.lo[0]) / self.scale,
            (x[1] - self.domain.lo[1]) / self.scale,
        ]
    }

    /// `u`, `∇u` and `D²u` at `x`, descending to the leaf cell.
    pub fn eval(&self, x: [f64; 2]) -> PointEval {
        let (mut value, mut gradient) = self.affine(x);
        let mut t: &Template = &self.root;
        let mut xi = self.to_local(x);
        let mut s = self.scale;
        loop {
            let item = t
                .find(xi)
                .or_else(|| t.items.last())
                .expect("template has items");
            let p = item.pert();
            value += s * s * p.value(xi);
            let g = p.gradient(xi);
            gradient[0] += s * g[0];
            gradient[1] += s * g[1];
            match item {
                Item::Cell(c) => {
                    let hessian = match c.atom {
                        Some(a) => self.table.get(a).midpoint(),
                        None => {
                            let b = self.table.get(c.base).midpoint();
                            let h = p.hessian(xi);
                            [
                                [b[0][0] + h[0][0], b[0][1] + h[0][1]],
                                [b[1][0] + h[1][0], b[1][1] + h[1][1]],
                            ]
                        }
                    };
                    return PointEval {
                        value,
                        gradient,
                        hessian,
                        tag: c.tag,
                        level: c.level,
                        atom: c.atom,
                    };
                }
                Item::Sub(sub) => {
                    let (_, local) = sub.locate(xi);
                    s *= sub.scale;
                    xi = local;
                    t = &sub.child;
                }
            }
        }
    }

    /// Visit every leaf cell. Fails when the logical count exceeds `limit`.
    pub fn for_each_cell<F: FnMut(&CellRecord)>(
        &self,
        limit: usize,
        mut f: F,
    ) -> Result<(), SynthError> {
        if self.logical_cells() > limit as f64 {
            return Err(SynthError::CellLimit {
                cells: self.logical_cells(),
                limit,
            });
        }
        let (v, g) = self.affine(self.domain.lo);
        let a = self.base_matrix().midpoint();
        let mut u0 = [[0.0; 4]; 4];
        u0[0][0] = v;
        u0[1][0] = g[0];
        u0[0][1] = g[1];
        u0[2][0] = a[0][0] / 2.0;
        u0[1][1] = a[0][1];
        u0[0][2] = a[1][1] / 2.0;
        let mut path = Vec::new();
        self.visit(
            &self.root,
            self.domain.lo,
            self.scale,
            self.domain.lo,
            &u0,
            &mut path,
            &mut f,
        );
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn visit<F: FnMut(&CellRecord)>(
        &self,
        t: &Template,
        origin: [f64; 2],
        s: f64,
        u0_corner: [f64; 2],
        u0: &[[f64; 4]; 4],
        path: &mut Vec<Pert>,
        f: &mut F,
    ) {
        for it in &t.items {
            let gp = it.pert().to_global(origin, s);
            path.push(gp);
            match it {
                Item::Cell(c) => {
                    let lo = [origin[0] + s * c.rect.lo[0], origin[1] + s * c.rect.lo[1]];
                    let hi = [origin[0] + s * c.rect.hi[0], origin[1] + s * c.rect.hi[1]];
                    let mut coeffs = shift_quadratic(u0, u0_corner, lo);
                    for p in path.iter().filter(|p| !p.is_zero()) {
                        let b = p.bicubic_at(lo);
                        for i in 0..4 {
                            for j in 0..4 {
                                coeffs[i][j] += b[i][j];
                            }
                        }
                    }
                    f(&CellRecord {
                        rect: Rect::new(lo, hi),
                        tag: c.tag,
                        atom: c.atom,
                        level: c.level,
                        region: c.region,
                        coeffs,
                    });
                }
                Item::Sub(sub) => {
                    for i in 0..sub.counts[0] {
                        for j in 0..sub.counts[1] {
                            let r = sub.copy_rect([i, j]);
                            let o = [origin[0] + s * r.lo[0], origin[1] + s * r.lo[1]];
                            self.visit(&sub.child, o, s * sub.scale, u0_corner, u0, path, f);
                        }
                    }
                }
            }
            path.pop();
        }
    }

    pub fn cells(&self, limit: usize) -> Result<Vec<CellRecord>, SynthError> {
        let mut out = Vec::new();
        self.for_each_cell(limit, |c| out.push(c.clone()))?;
        Ok(out)
    }

    /// Cell dump as CSV: corner coordinates, labels and the 16 coefficients.
    pub fn dump_csv(&self, limit: usize) -> Result<String, SynthError> {
        let mut out = String::from("x0,y0,x1,y1,tag,atom,level,region");
        for i in 0..4 {
            for j in 0..4 {
                let _ = write!(out, ",a{i}{j}");
            }
        }
        out.push('\n');
        self.for_each_cell(limit, |c| {
            let _ = write!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:?},{},{},{}",
                c.rect.lo[0],
                c.rect.lo[1],
                c.rect.hi[0],
                c.rect.hi[1],
                c.tag,
                c.atom.map_or(String::new(), |a| a.to_string()),
                c.level,
                c.region.map_or(String::new(), |r| r.to_string()),
            );
            for row in &c.coeffs {
                for v in row {
                    let _ = write!(out, ",{v:.17e}");
                }
            }
            out.push('\n');
        })?;
        Ok(out)
    }

    /// Per-cell gradient data: `∇u` is read off the dumped coefficients.
    pub fn gradient_map(&self, limit: usize) -> Result<Vec<CellRecord>, SynthError> {
        self.cells(limit)
    }

    pub fn analyzer(&self) -> Analyzer<'_> {
        Analyzer::new(&self.table)
    }
}

/// Taylor coefficients of the quadratic `u0` (given at `from`) re-expanded at `to`.
fn shift_quadratic(u0: &[[f64; 4]; 4], from: [f64; 2], to: [f64; 2]) -> [[f64; 4]; 4] {
    let (h, k) = (to[0] - from[0], to[1] - from[1]);
    let (a20, a11, a02) = (u0[2][0], u0[1][1], u0[0][2]);
    let mut c = [[0.0; 4]; 4];
    c[0][0] = u0[0][0] + u0[1][0] * h + u0[0][1] * k + a20 * h * h + a11 * h * k + a02 * k * k;
    c[1][0] = u0[1][0] + 2.0 * a20 * h + a11 * k;
    c[0][1] = u0[0][1] + 2.0 * a02 * k + a11 * h;
    c[2][0] = a20;
    c[1][1] = a11;
    c[0][2] = a02;
    c
}

/// Nested regions `Ω_j` with certified measures.
#[derive(Clone, Debug, Serialize)]
pub struct RegionTree {
    /// `j ↦ |Ω_j|`.
    pub levels: BTreeMap<u32, Interval>,
    /// Core area per atom id.
    pub atom_areas: BTreeMap<u32, Interval>,
}

impl RegionTree {
    pub fn of(u: &PiecewisePotential) -> RegionTree {
        let mut an = u.analyzer();
        let area = u.domain.area();
        let levels = an
            .region_areas(&u.root)
            .into_iter()
            .map(|(k, v)| (k, v * area))
            .collect();
        let atom_areas = an
            .atom_areas(&u.root)
            .into_iter()
            .map(|(k, v)| (k, v * area))
            .collect();
        RegionTree { levels, atom_areas }
    }

    pub fn measure(&self, j: u32) -> Interval {
        self.levels.get(&j).copied().unwrap_or(Interval::ZERO)
    }
}

fn root_frame(rect: &Rect) -> ([f64; 2], f64) {
    let size = rect.size();
    let m = size[0].max(size[1]);
    ([size[0] / m, size[1] / m], m)
}

/// Realizes `ν` on `rect`: `∇u = A x + b` on the boundary with `A` the
/// barycenter, Hessians near the trail and atom areas at least
/// `(1 − ε)` of their weights.
pub fn realize_laminate<S: Scalar>(
    nu: &Laminate<S>,
    rect: Rect,
    config: &SynthConfig,
) -> Result<(PiecewisePotential, RegionTree), SynthError> {
    if !(config.eps > 0.0 && config.eps < 1.0) {
        return Err(SynthError::BadInput(format!(
            "eps = {} outside (0, 1)",
            config.eps
        )));
    }
    let size = rect.size();
    if !(size[0] > 0.0 && size[1] > 0.0) {
        return Err(SynthError::BadInput("empty rectangle".into()));
    }
    let mut builder = Builder::new(config.clone());
    let node = Node::from_plan(&nu.plan(), &mut builder.table)?;
    let (shape, scale) = root_frame(&rect);
    let eps_area = config.eps / node.depth().max(1) as f64;
    let root = if node.split.is_some() {
        builder.realize(&node, shape, scale, eps_area, None)?
    } else {
        let cell = builder.core_cell(
            Rect::from_size(shape),
            Pert::ZERO,
            node.matrix,
            node.matrix,
            0,
        );
        builder.template(shape, vec![cell])?
    };
    let u = PiecewisePotential {
        domain: rect,
        scale,
        base: node.matrix,
        offset: config.offset,
        root,
        stored_cells: builder.stored_cells,
        table: builder.table,
    };
    let tree = RegionTree::of(&u);
    Ok((u, tree))
}

/// One split `A = t B + (1 − t) C` realized on `rect`.
pub fn realize_simple<S: Scalar>(
    a: SymMat2<S>,
    b: SymMat2<S>,
    c: SymMat2<S>,
    t: S,
    rect: Rect,
    config: &SynthConfig,
) -> Result<PiecewisePotential, SynthError> {
    let nu = Laminate::dirac(a);
    let nu = if t.sign() == crate::scalar::Sign::Zero
        || (S::one() - t.clone()).sign() == crate::scalar::Sign::Zero
    {
        if t.sign() == crate::scalar::Sign::Zero {
            Laminate::dirac(c)
        } else {
            Laminate::dirac(b)
        }
    } else {
        nu.split(0, b, c, t, S::one())?
    };
    Ok(realize_laminate(&nu, rect, config)?.0)
}

/// Output of [`staircase_build`].
pub struct Staircase {
    pub u: PiecewisePotential,
    pub tree: RegionTree,
    /// `Ω₁` in physical coordinates.
    pub omega1: Rect,
    /// Matrix id of `2^j Id` for `j = 1..=J`.
    pub level_ids: Vec<Option<u32>>,
}

struct StairHook<'a> {
    schedule: &'a StaircaseSchedule,
    nodes: Vec<Node>,
    /// `(matrix id, eps_area)` of each level's root, index `j − 1`.
    eps_area: Vec<f64>,
    targets: Vec<Option<u32>>,
}

impl StairHook<'_> {
    fn is_target(&self, matrix: u32, level: u32) -> bool {
        level >= 1 && self.targets.get(level as usize - 1).copied().flatten() == Some(matrix)
    }
}

impl LeafHook for StairHook<'_> {
    fn refine(
        &self,
        b: &mut Builder,
        matrix: u32,
        size: [f64; 2],
        abs: f64,
        level: u32,
    ) -> Option<Result<Sub, SynthError>> {
        let depth = self.schedule.depth;
        if level >= depth || !self.is_target(matrix, level) {
            return None;
        }
        let next = level + 1;
        let layer = self.schedule.layer(next);
        // equal pieces of diameter at most eps_{j+1}
        let h = layer.eps / std::f64::consts::SQRT_2;
        let counts = [
            ((size[0] * abs) / h).ceil().max(1.0) as u64,
            ((size[1] * abs) / h).ceil().max(1.0) as u64,
        ];
        let piece = [size[0] / counts[0] as f64, size[1] / counts[1] as f64];
        let m = piece[0].max(piece[1]);
        let shape = [piece[0] / m, piece[1] / m];
        let saved = b.config.hess_tol;
        b.config.hess_tol = HessTol::Relative(layer.eps);
        let node: &Node = &self.nodes[next as usize - 1];
        let child = b.realize(
            node,
            shape,
            abs * m,
            self.eps_area[next as usize - 1],
            Some(self),
        );
        b.config.hess_tol = saved;
        Some(child.map(|child| Sub {
            rect: Rect::from_size(size),
            counts,
            scale: m,
            pert: Pert::ZERO,
            level,
            region: Some(next),
            child,
        }))
    }

    fn region(&self, matrix: u32, level: u32) -> Option<u32> {
        (level == self.schedule.depth && self.is_target(matrix, level)).then_some(level + 1)
    }
}

/// Depth-`J` staircase on `rect`: level 1 realizes `μ_1` on a concentric
/// `Ω₁` with `|Ω ∖ Ω₁| = ε₁ min(|Ω|, 1)`; level `j + 1` replaces `u` on
/// the pieces of `{D²u = 2^j Id}` by realizations of `μ_{j+1}`.
pub fn staircase_build(
    schedule: &StaircaseSchedule,
    rect: Rect,
    config: &SynthConfig,
) -> Result<Staircase, SynthError> {
    let depth = schedule.depth;
    let mut builder = Builder::new(config.clone());
    let mut nodes = Vec::new();
    let mut eps_area = Vec::new();
    let mut targets = Vec::new();
    for j in 1..=depth {
        let nu = schedule.layer_laminate(j)?;
        let mut node = Node::from_plan(&nu.plan(), &mut builder.table)?;
        node.set_stage(j);
        eps_area.push(schedule.layer(j).eps / node.depth().max(1) as f64);
        nodes.push(node);
        let two_j = Interval::point((j as f64).exp2());
        let id = builder
            .table
            .enclosures
            .iter()
            .position(|m| m.a11 == two_j && m.a22 == two_j && m.a12 == Interval::ZERO)
            .map(|i| i as u32);
        targets.push(id);
    }
    let base = nodes[0].matrix;

    let (shape, scale) = root_frame(&rect);
    let eps1 = schedule.layer(1).eps;
    let area = shape[0] * shape[1];
    let abs_area = area * scale * scale;
    let cut = eps1 * abs_area.min(1.0) / abs_area;
    let r = (1.0 - cut).sqrt();
    let margin = [shape[0] * (1.0 - r) / 2.0, shape[1] * (1.0 - r) / 2.0];
    let inner = Rect::new(margin, [shape[0] - margin[0], shape[1] - margin[1]]);

    let hook = StairHook {
        schedule,
        nodes,
        eps_area,
        targets,
    };
    builder.config.hess_tol = HessTol::Relative(eps1);
    let (ishape, iscale) = root_frame(&inner);
    let child = builder.realize(
        &hook.nodes[0],
        ishape,
        scale * iscale,
        hook.eps_area[0],
        Some(&hook),
    )?;

    let transition = |lo: [f64; 2], hi: [f64; 2]| {
        Item::Cell(template::Cell {
            rect: Rect::new(lo, hi),
            pert: Pert::ZERO,
            tag: Tag::Transition,
            base,
            atom: None,
            segment: None,
            tol: 0.0,
            level: 0,
            region: None,
        })
    };
    let items = vec![
        transition([0.0, 0.0], [shape[0], inner.lo[1]]),
        transition([0.0, inner.hi[1]], [shape[0], shape[1]]),
        transition([0.0, inner.lo[1]], [inner.lo[0], inner.hi[1]]),
        transition([inner.hi[0], inner.lo[1]], [shape[0], inner.hi[1]]),
        Item::Sub(Sub {
            rect: inner,
            counts: [1, 1],
            scale: iscale,
            pert: Pert::ZERO,
            level: 0,
            region: Some(1),
            child,
        }),
    ];
    let root = builder.template(shape, items)?;
    let level_ids = hook.targets.clone();
    drop(hook);
    let u = PiecewisePotential {
        domain: rect,
        scale,
        base,
        offset: config.offset,
        root,
        stored_cells: builder.stored_cells,
        table: builder.table,
    };
    let tree = RegionTree::of(&u);
    let omega1 = Rect::new(
        [
            rect.lo[0] + scale * inner.lo[0],
            rect.lo[1] + scale * inner.lo[1],
        ],
        [
            rect.lo[0] + scale * inner.hi[0],
            rect.lo[1] + scale * inner.hi[1],
        ],
    );
    Ok(Staircase {
        u,
        tree,
        omega1,
        level_ids,
    })
}
