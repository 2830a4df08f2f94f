//! Hierarchical cell layout of a synthesized potential.
//!
//! A [`Template`] is a rectangle `[0, w] × [0, h]` in its own coordinates
//! tiled by items. A [`Cell`] carries a product-form perturbation; a [`Sub`]
//! places `nx × ny` scaled copies of a child template (periodic stripes,
//! nested realizations, subdivision grids). Identical sub-layouts are stored
//! once and shared, so the logical cell count can far exceed what is stored.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::poly::Pert;
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    /// Constant Hessian equal to an atom.
    Core,
    /// Tapered stripes near a realization boundary.
    Frame,
    /// Untouched margin between a domain and its realized sub-rectangle.
    Transition,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        assert!(lo[0] <= hi[0] && lo[1] <= hi[1], "degenerate rectangle");
        Rect { lo, hi }
    }

    pub fn from_size(size: [f64; 2]) -> Self {
        Rect::new([0.0, 0.0], size)
    }

    pub fn size(&self) -> [f64; 2] {
        [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]]
    }

    pub fn area(&self) -> Interval {
        (Interval::point(self.hi[0]) - Interval::point(self.lo[0]))
            * (Interval::point(self.hi[1]) - Interval::point(self.lo[1]))
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..2).all(|i| self.lo[i] <= x[i] && x[i] <= self.hi[i])
    }

    pub fn axis_range(&self, i: usize) -> [f64; 2] {
        [self.lo[i], self.hi[i]]
    }

    pub fn diameter(&self) -> f64 {
        let s = self.size();
        s[0].hypot(s[1])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub rect: Rect,
    pub pert: Pert,
    pub tag: Tag,
    /// Matrix id of the Hessian before this cell's perturbation.
    pub base: u32,
    /// Matrix id of the exact Hessian on core cells.
    pub atom: Option<u32>,
    /// Trail segment `[b, c]` the frame Hessian must stay near.
    pub segment: Option<(u32, u32)>,
    /// Allowed Frobenius distance from `segment`.
    pub tol: f64,
    pub level: u32,
    pub region: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct Sub {
    /// Region covered by all copies.
    pub rect: Rect,
    pub counts: [u64; 2],
    /// Length of one child unit in this template's units.
    pub scale: f64,
    /// Perturbation of this level over the whole region.
    pub pert: Pert,
    pub level: u32,
    pub region: Option<u32>,
    pub child: Arc<Template>,
}

impl Sub {
    /// Extent of one copy in this template's units.
    pub fn step(&self) -> [f64; 2] {
        [
            self.child.size[0] * self.scale,
            self.child.size[1] * self.scale,
        ]
    }

    pub fn copies(&self) -> f64 {
        self.counts[0] as f64 * self.counts[1] as f64
    }

    /// Index of the copy containing `x` and the local coordinate inside it.
    pub fn locate(&self, x: [f64; 2]) -> ([u64; 2], [f64; 2]) {
        let step = self.step();
        let mut idx = [0u64; 2];
        let mut xi = [0.0; 2];
        for i in 0..2 {
            let rel = x[i] - self.rect.lo[i];
            let k = ((rel / step[i]).floor().max(0.0) as u64).min(self.counts[i] - 1);
            idx[i] = k;
            xi[i] = ((rel - k as f64 * step[i]) / self.scale).clamp(0.0, self.child.size[i]);
        }
        (idx, xi)
    }

    /// Rectangle of copy `idx` in this template's units.
    pub fn copy_rect(&self, idx: [u64; 2]) -> Rect {
        let step = self.step();
        let lo = [
            self.rect.lo[0] + idx[0] as f64 * step[0],
            self.rect.lo[1] + idx[1] as f64 * step[1],
        ];
        let hi = [
            if idx[0] + 1 == self.counts[0] {
                self.rect.hi[0]
            } else {
                lo[0] + step[0]
            },
            if idx[1] + 1 == self.counts[1] {
                self.rect.hi[1]
            } else {
                lo[1] + step[1]
            },
        ];
        Rect::new(lo, hi)
    }
}

#[derive(Clone, Debug)]
pub enum Item {
    Cell(Cell),
    Sub(Sub),
}

impl Item {
    pub fn rect(&self) -> &Rect {
        match self {
            Item::Cell(c) => &c.rect,
            Item::Sub(s) => &s.rect,
        }
    }

    /// Perturbation owned by this item at its own level.
    pub fn pert(&self) -> &Pert {
        match self {
            Item::Cell(c) => &c.pert,
            Item::Sub(s) => &s.pert,
        }
    }
}

#[derive(Debug)]
pub struct Template {
    pub id: usize,
    pub size: [f64; 2],
    pub items: Vec<Item>,
    /// Leaf cells with every repetition expanded.
    pub logical_cells: f64,
    /// Nesting depth of sub-templates.
    pub depth: usize,
}

impl Template {
    pub fn new(id: usize, size: [f64; 2], items: Vec<Item>) -> Self {
        let mut logical_cells = 0.0;
        let mut depth = 0;
        for it in &items {
            match it {
                Item::Cell(_) => logical_cells += 1.0,
                Item::Sub(s) => {
                    logical_cells += s.copies() * s.child.logical_cells;
                    depth = depth.max(1 + s.child.depth);
                }
            }
        }
        Template {
            id,
            size,
            items,
            logical_cells,
            depth,
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::from_size(self.size)
    }

    pub fn area(&self) -> Interval {
        self.rect().area()
    }

    /// First item whose closed rectangle contains `x`.
    pub fn find(&self, x: [f64; 2]) -> Option<&Item> {
        self.items.iter().find(|it| it.rect().contains(x))
    }
}
