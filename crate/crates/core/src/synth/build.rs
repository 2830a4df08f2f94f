//! Construction of templates from split plans.

use std::collections::HashMap;
use std::sync::Arc;

use super::poly::{smoothstep, Pert, Poly1};
use super::template::{Cell, Item, Rect, Sub, Tag, Template};
use super::{HessTol, SynthConfig, SynthError};
use crate::interval::Interval;
use crate::laminate::PlanNode;
use crate::scalar::{Rational, Scalar};
use crate::sym2::SymMat2;

/// Matrix table shared by all cells of one potential.
#[derive(Clone, Debug, Default)]
pub struct MatrixTable {
    pub enclosures: Vec<SymMat2<Interval>>,
    pub exact: Vec<Option<SymMat2<Rational>>>,
}

impl MatrixTable {
    pub fn intern<S: Scalar>(&mut self, m: &SymMat2<S>) -> u32 {
        let enc = m.to_interval();
        if let Some(i) = self.enclosures.iter().position(|e| *e == enc) {
            return i as u32;
        }
        let exact = match (
            m.a11.to_rational(),
            m.a12.to_rational(),
            m.a22.to_rational(),
        ) {
            (Some(a), Some(b), Some(c)) => Some(SymMat2::new(a, b, c)),
            _ => None,
        };
        self.enclosures.push(enc);
        self.exact.push(exact);
        (self.enclosures.len() - 1) as u32
    }

    pub fn get(&self, id: u32) -> &SymMat2<Interval> {
        &self.enclosures[id as usize]
    }
}

/// A plan node with matrices interned and split data resolved.
pub(crate) struct Node {
    pub matrix: u32,
    pub split: Option<Box<SplitData>>,
}

pub(crate) struct SplitData {
    pub s: f64,
    pub lambda: f64,
    pub stage: u32,
    /// Index of the stripe normal.
    pub axis: usize,
    /// `b − c = cc · e⊗e`.
    pub cc: f64,
    pub b: Node,
    pub c: Node,
    pub rest: Option<Node>,
}

impl Node {
    pub fn from_plan<S: Scalar>(
        plan: &PlanNode<S>,
        table: &mut MatrixTable,
    ) -> Result<Node, SynthError> {
        match plan {
            PlanNode::Leaf(m) => Ok(Node {
                matrix: table.intern(m),
                split: None,
            }),
            PlanNode::Split {
                matrix,
                s,
                lambda,
                stage,
                b,
                c,
                rest,
            } => {
                let r1 = b
                    .matrix()
                    .rank_one_connected(c.matrix())
                    .ok()
                    .flatten()
                    .ok_or_else(|| {
                        SynthError::BadInput("split pair is not rank-one connected".into())
                    })?;
                let axis = r1.axis.ok_or(SynthError::NonAxisDirection)?;
                let split = SplitData {
                    s: s.midpoint_f64(),
                    lambda: lambda.midpoint_f64(),
                    stage: *stage,
                    axis: axis.index(),
                    cc: r1.c.midpoint_f64(),
                    b: Node::from_plan(b, table)?,
                    c: Node::from_plan(c, table)?,
                    rest: rest
                        .as_ref()
                        .map(|r| Node::from_plan(r, table))
                        .transpose()?,
                };
                Ok(Node {
                    matrix: table.intern(matrix),
                    split: Some(Box::new(split)),
                })
            }
        }
    }

    pub fn set_stage(&mut self, stage: u32) {
        if let Some(sp) = &mut self.split {
            sp.stage = stage;
            sp.b.set_stage(stage);
            sp.c.set_stage(stage);
            if let Some(r) = &mut sp.rest {
                r.set_stage(stage);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match &self.split {
            None => 0,
            Some(sp) => {
                let rest = sp.rest.as_ref().map_or(0, |r| r.depth());
                (1 + sp.b.depth().max(sp.c.depth())).max(rest)
            }
        }
    }
}

/// Replaces leaves of one level by nested realizations of the next.
pub(crate) trait LeafHook {
    /// `Some` when the leaf `matrix` on a piece of `size` template units
    /// (one unit = `abs` absolute length) must be refined at `level`.
    fn refine(
        &self,
        b: &mut Builder,
        matrix: u32,
        size: [f64; 2],
        abs: f64,
        level: u32,
    ) -> Option<Result<Sub, SynthError>>;

    /// Region marker for an unrefined core leaf.
    fn region(&self, matrix: u32, level: u32) -> Option<u32>;
}

pub(crate) struct Builder {
    pub table: MatrixTable,
    pub config: SynthConfig,
    pub stored_cells: usize,
    next_id: usize,
    memo: HashMap<(usize, [u64; 4]), Arc<Template>>,
}

fn normalized(size: [f64; 2]) -> ([f64; 2], f64) {
    let m = size[0].max(size[1]);
    ([size[0] / m, size[1] / m], m)
}

impl Builder {
    pub fn new(config: SynthConfig) -> Self {
        Builder {
            table: MatrixTable::default(),
            config,
            stored_cells: 0,
            next_id: 0,
            memo: HashMap::new(),
        }
    }

    pub fn template(
        &mut self,
        size: [f64; 2],
        items: Vec<Item>,
    ) -> Result<Arc<Template>, SynthError> {
        self.stored_cells += items.iter().filter(|i| matches!(i, Item::Cell(_))).count();
        if self.stored_cells > self.config.budget {
            return Err(SynthError::Budget {
                cells: self.stored_cells,
                budget: self.config.budget,
            });
        }
        let t = Template::new(self.next_id, size, items);
        self.next_id += 1;
        Ok(Arc::new(t))
    }

    pub fn core_cell(&self, rect: Rect, pert: Pert, matrix: u32, base: u32, level: u32) -> Item {
        Item::Cell(Cell {
            rect,
            pert,
            tag: Tag::Core,
            base,
            atom: Some(matrix),
            segment: None,
            tol: 0.0,
            level,
            region: None,
        })
    }

    fn hess_tol(&self, parent: u32) -> f64 {
        match self.config.hess_tol {
            HessTol::Absolute(e) => e,
            HessTol::Relative(e) => e * self.table.get(parent).frobenius().lo(),
        }
    }

    /// Item for a node placed on `rect` (template units), with this level's
    /// perturbation `pert` over it and Hessian base `base`.
    #[allow(clippy::too_many_arguments)]
    pub fn child_item(
        &mut self,
        node: &Node,
        rect: Rect,
        pert: Pert,
        base: u32,
        level: u32,
        abs: f64,
        eps_area: f64,
        hook: Option<&dyn LeafHook>,
    ) -> Result<Item, SynthError> {
        if node.split.is_none() {
            let mut region = None;
            if let Some(h) = hook {
                if let Some(sub) = h.refine(self, node.matrix, rect.size(), abs, level) {
                    let mut sub = sub?;
                    sub.rect = rect;
                    sub.pert = pert;
                    sub.level = level;
                    return Ok(Item::Sub(sub));
                }
                region = h.region(node.matrix, level);
            }
            let mut cell = self.core_cell(rect, pert, node.matrix, base, level);
            if let Item::Cell(c) = &mut cell {
                c.region = region;
            }
            return Ok(cell);
        }
        let (shape, scale) = normalized(rect.size());
        let child = self.realize(node, shape, abs * scale, eps_area, hook)?;
        Ok(Item::Sub(Sub {
            rect,
            counts: [1, 1],
            scale,
            pert,
            level,
            region: None,
            child,
        }))
    }

    /// Template realizing the split at `node` on a rectangle of normalized
    /// `shape`, where one unit has absolute length `abs`.
    pub fn realize(
        &mut self,
        node: &Node,
        shape: [f64; 2],
        abs: f64,
        eps_area: f64,
        hook: Option<&dyn LeafHook>,
    ) -> Result<Arc<Template>, SynthError> {
        // absolute size only matters when leaves may be refined
        let abs_bits = if hook.is_some() { abs.to_bits() } else { 0 };
        let key = (
            node as *const Node as usize,
            [
                shape[0].to_bits(),
                shape[1].to_bits(),
                abs_bits,
                eps_area.to_bits(),
            ],
        );
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        let sp = node.split.as_ref().expect("realize on a split node");
        let t = if sp.lambda < 1.0 {
            // carve the split part off along the longer side
            let long = if shape[0] >= shape[1] { 0 } else { 1 };
            let mut cut = shape;
            cut[long] = shape[long] * sp.lambda;
            let part = Rect::from_size(cut);
            let mut lo = [0.0, 0.0];
            lo[long] = cut[long];
            let rest_rect = Rect::new(lo, shape);
            let (pshape, pscale) = normalized(cut);
            let proper = self.realize_proper(node, pshape, abs * pscale, eps_area, hook)?;
            let rest = sp.rest.as_ref().expect("partial split keeps a rest node");
            let items = vec![
                Item::Sub(Sub {
                    rect: part,
                    counts: [1, 1],
                    scale: pscale,
                    pert: Pert::ZERO,
                    level: sp.stage,
                    region: None,
                    child: proper,
                }),
                self.child_item(
                    rest,
                    rest_rect,
                    Pert::ZERO,
                    node.matrix,
                    sp.stage,
                    abs,
                    eps_area,
                    hook,
                )?,
            ];
            self.template(shape, items)?
        } else {
            self.realize_proper(node, shape, abs, eps_area, hook)?
        };
        self.memo.insert(key, t.clone());
        Ok(t)
    }

    /// Stripes of `b` and `c` across the full rectangle, tapered at the two
    /// edges the stripes run into.
    fn realize_proper(
        &mut self,
        node: &Node,
        shape: [f64; 2],
        abs: f64,
        eps_area: f64,
        hook: Option<&dyn LeafHook>,
    ) -> Result<Arc<Template>, SynthError> {
        let sp = node.split.as_ref().expect("split node");
        let (n, tau) = (sp.axis, 1 - sp.axis);
        let (ln, lt) = (shape[n], shape[tau]);
        let s = sp.s;
        let tol = self.hess_tol(node.matrix);
        let h = s * (1.0 - s) * sp.cc.abs() / 2.0 * (1.0 + 1e-12);
        let side = ln.min(lt);
        let rho = eps_area * side / 4.0;
        let delta_max = rho * (0.25f64).min(tol / (4.0 * h));
        let periods = (ln / delta_max).ceil();
        let delta = ln / periods;
        if delta.is_nan() || delta < side * self.config.min_delta_ratio || periods > u64::MAX as f64
        {
            return Err(SynthError::DeltaTooSmall {
                delta: delta * abs,
                side: side * abs,
            });
        }
        let periods = periods as u64;

        // one period: [c half | b | c half] along the normal
        let a = (1.0 - s) * delta / 2.0;
        let bend = a + s * delta;
        let psi = [
            Poly1::new(0.0, [0.0, 0.0, -s * sp.cc / 2.0, 0.0]),
            Poly1::new(
                a,
                [
                    -s * sp.cc * a * a / 2.0,
                    -s * sp.cc * a,
                    (1.0 - s) * sp.cc / 2.0,
                    0.0,
                ],
            ),
            Poly1::new(delta, [0.0, 0.0, -s * sp.cc / 2.0, 0.0]),
        ];
        let n_cuts = [0.0, a, bend, delta];
        let chi = [
            smoothstep(0.0, rho, true),
            Poly1::ONE,
            smoothstep(lt, rho, false),
        ];
        let t_cuts = [0.0, rho, lt - rho, lt];
        let mut items = Vec::with_capacity(9);
        let b_id = sp.b.matrix;
        let c_id = sp.c.matrix;
        for (k, psi_k) in psi.iter().enumerate() {
            for (m, chi_m) in chi.iter().enumerate() {
                let mut lo = [0.0; 2];
                let mut hi = [0.0; 2];
                lo[n] = n_cuts[k];
                hi[n] = n_cuts[k + 1];
                lo[tau] = t_cuts[m];
                hi[tau] = t_cuts[m + 1];
                let rect = Rect::new(lo, hi);
                let pert = if n == 0 {
                    Pert {
                        px: *psi_k,
                        py: *chi_m,
                    }
                } else {
                    Pert {
                        px: *chi_m,
                        py: *psi_k,
                    }
                };
                if m == 1 {
                    let child = if k == 1 { &sp.b } else { &sp.c };
                    let child_eps = eps_area;
                    items.push(self.child_item(
                        child,
                        rect,
                        pert,
                        node.matrix,
                        sp.stage,
                        abs,
                        child_eps,
                        hook,
                    )?);
                } else {
                    items.push(Item::Cell(Cell {
                        rect,
                        pert,
                        tag: Tag::Frame,
                        base: node.matrix,
                        atom: None,
                        segment: Some((b_id, c_id)),
                        tol,
                        level: sp.stage,
                        region: None,
                    }));
                }
            }
        }
        let mut psize = [0.0; 2];
        psize[n] = delta;
        psize[tau] = lt;
        let period = self.template(psize, items)?;
        let mut counts = [1u64; 2];
        counts[n] = periods;
        let sub = Sub {
            rect: Rect::from_size(shape),
            counts,
            scale: 1.0,
            pert: Pert::ZERO,
            level: sp.stage,
            region: None,
            child: period,
        };
        self.template(shape, vec![Item::Sub(sub)])
    }
}
