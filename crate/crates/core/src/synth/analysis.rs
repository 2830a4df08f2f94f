//! Memoized folds over the template graph.
//!
//! Every quantity is computed once per shared template and expressed
//! relative to that template (area fractions, means, local gradient units),
//! then combined upward.

use std::collections::{BTreeMap, HashMap};

use super::build::MatrixTable;
use super::poly::Pert;
use super::template::{Cell, Item, Rect, Tag, Template};
use crate::integrand::Integrand;
use crate::interval::Interval;
use crate::sym2::SymMat2;

/// Sub-boxes per axis when bounding frame cells.
pub const FRAME_SPLITS: usize = 8;

fn frac(rect: &Rect, t: &Template) -> Interval {
    rect.area() / t.area()
}

fn boxes(rect: &Rect) -> impl Iterator<Item = Rect> + '_ {
    let n = FRAME_SPLITS;
    let s = rect.size();
    (0..n).flat_map(move |i| {
        (0..n).map(move |j| {
            let x0 = if i == 0 {
                rect.lo[0]
            } else {
                rect.lo[0] + s[0] * i as f64 / n as f64
            };
            let x1 = if i + 1 == n {
                rect.hi[0]
            } else {
                rect.lo[0] + s[0] * (i + 1) as f64 / n as f64
            };
            let y0 = if j == 0 {
                rect.lo[1]
            } else {
                rect.lo[1] + s[1] * j as f64 / n as f64
            };
            let y1 = if j + 1 == n {
                rect.hi[1]
            } else {
                rect.lo[1] + s[1] * (j + 1) as f64 / n as f64
            };
            Rect::new([x0, y0], [x1, y1])
        })
    })
}

/// Certified Hessian boxes of a cell with their area fractions of the cell.
pub fn cell_hessians(cell: &Cell, table: &MatrixTable) -> Vec<(Interval, SymMat2<Interval>)> {
    if let Some(atom) = cell.atom {
        return vec![(Interval::ONE, table.get(atom).clone())];
    }
    let base = table.get(cell.base);
    if cell.pert.is_zero() {
        return vec![(Interval::ONE, base.clone())];
    }
    let area = cell.rect.area();
    boxes(&cell.rect)
        .map(|b| {
            let h = cell.pert.hessian_range(b.axis_range(0), b.axis_range(1));
            (b.area() / area, base.clone() + h)
        })
        .collect()
}

pub struct Analyzer<'a> {
    pub table: &'a MatrixTable,
    atom_areas: HashMap<usize, BTreeMap<u32, Interval>>,
    tag_areas: HashMap<usize, BTreeMap<Tag, Interval>>,
    region_areas: HashMap<usize, BTreeMap<u32, Interval>>,
    integrals: HashMap<(usize, String), BTreeMap<u32, Interval>>,
    min_trace: HashMap<usize, f64>,
    trail: HashMap<usize, f64>,
    grad: HashMap<usize, BTreeMap<u32, f64>>,
    boundary: HashMap<usize, f64>,
    continuity: HashMap<usize, f64>,
}

fn add_into<K: Ord + Copy>(acc: &mut BTreeMap<K, Interval>, k: K, v: Interval) {
    let e = acc.entry(k).or_insert(Interval::ZERO);
    *e = *e + v;
}

impl<'a> Analyzer<'a> {
    pub fn new(table: &'a MatrixTable) -> Self {
        Analyzer {
            table,
            atom_areas: HashMap::new(),
            tag_areas: HashMap::new(),
            region_areas: HashMap::new(),
            integrals: HashMap::new(),
            min_trace: HashMap::new(),
            trail: HashMap::new(),
            grad: HashMap::new(),
            boundary: HashMap::new(),
            continuity: HashMap::new(),
        }
    }

    /// Area fraction of core cells per atom id.
    pub fn atom_areas(&mut self, t: &Template) -> BTreeMap<u32, Interval> {
        if let Some(v) = self.atom_areas.get(&t.id) {
            return v.clone();
        }
        let mut acc = BTreeMap::new();
        for it in &t.items {
            match it {
                Item::Cell(c) => {
                    if let (Tag::Core, Some(a)) = (c.tag, c.atom) {
                        add_into(&mut acc, a, frac(&c.rect, t));
                    }
                }
                Item::Sub(s) => {
                    let f = frac(&s.rect, t);
                    for (k, v) in self.atom_areas(&s.child) {
                        add_into(&mut acc, k, f * v);
                    }
                }
            }
        }
        self.atom_areas.insert(t.id, acc.clone());
        acc
    }

    pub fn tag_areas(&mut self, t: &Template) -> BTreeMap<Tag, Interval> {
        if let Some(v) = self.tag_areas.get(&t.id) {
            return v.clone();
        }
        let mut acc = BTreeMap::new();
        for it in &t.items {
            match it {
                Item::Cell(c) => add_into(&mut acc, c.tag, frac(&c.rect, t)),
                Item::Sub(s) => {
                    let f = frac(&s.rect, t);
                    for (k, v) in self.tag_areas(&s.child) {
                        add_into(&mut acc, k, f * v);
                    }
                }
            }
        }
        self.tag_areas.insert(t.id, acc.clone());
        acc
    }

    /// Area fraction of each marked region; a marked sub-layout counts in
    /// full for its own region and contributes its inner regions.
    pub fn region_areas(&mut self, t: &Template) -> BTreeMap<u32, Interval> {
        if let Some(v) = self.region_areas.get(&t.id) {
            return v.clone();
        }
        let mut acc = BTreeMap::new();
        for it in &t.items {
            match it {
                Item::Cell(c) => {
                    if let Some(r) = c.region {
                        add_into(&mut acc, r, frac(&c.rect, t));
                    }
                }
                Item::Sub(s) => {
                    let f = frac(&s.rect, t);
                    if let Some(r) = s.region {
                        add_into(&mut acc, r, f);
                    }
                    for (k, v) in self.region_areas(&s.child) {
                        add_into(&mut acc, k, f * v);
                    }
                }
            }
        }
        self.region_areas.insert(t.id, acc.clone());
        acc
    }

    /// Mean of `Φ(D²u)` over the template, split by the level of the cell
    /// that produced the Hessian.
    pub fn integral_by_level(
        &mut self,
        t: &Template,
        phi: &dyn Integrand,
    ) -> BTreeMap<u32, Interval> {
        let key = (t.id, phi.name());
        if let Some(v) = self.integrals.get(&key) {
            return v.clone();
        }
        let mut acc = BTreeMap::new();
        for it in &t.items {
            match it {
                Item::Cell(c) => {
                    let f = frac(&c.rect, t);
                    let mean: Interval = cell_hessians(c, self.table)
                        .iter()
                        .map(|(w, h)| *w * phi.eval(h))
                        .sum();
                    add_into(&mut acc, c.level, f * mean);
                }
                Item::Sub(s) => {
                    let f = frac(&s.rect, t);
                    for (k, v) in self.integral_by_level(&s.child, phi) {
                        add_into(&mut acc, k, f * v);
                    }
                }
            }
        }
        self.integrals.insert(key, acc.clone());
        acc
    }

    /// Mean of `Φ(D²u)` restricted to each marked region, as a fraction of
    /// the template area.
    pub fn region_integrals(
        &mut self,
        t: &Template,
        phi: &dyn Integrand,
    ) -> BTreeMap<u32, Interval> {
        let key = (t.id, format!("region:{}", phi.name()));
        if let Some(v) = self.integrals.get(&key) {
            return v.clone();
        }
        let mut acc = BTreeMap::new();
        for it in &t.items {
            match it {
                Item::Cell(c) => {
                    if let Some(r) = c.region {
                        let mean: Interval = cell_hessians(c, self.table)
                            .iter()
                            .map(|(w, h)| *w * phi.eval(h))
                            .sum();
                        add_into(&mut acc, r, frac(&c.rect, t) * mean);
                    }
                }
                Item::Sub(s) => {
                    let f = frac(&s.rect, t);
                    if let Some(r) = s.region {
                        add_into(&mut acc, r, f * self.mean(&s.child, phi));
                    }
                    for (k, v) in self.region_integrals(&s.child, phi) {
                        add_into(&mut acc, k, f * v);
                    }
                }
            }
        }
        self.integrals.insert(key, acc.clone());
        acc
    }

    pub fn mean(&mut self, t: &Template, phi: &dyn Integrand) -> Interval {
        self.integral_by_level(t, phi).values().copied().sum()
    }

    /// Certified lower bound of `tr D²u`.
    pub fn min_trace(&mut self, t: &Template) -> f64 {
        if let Some(v) = self.min_trace.get(&t.id) {
            return *v;
        }
        let mut m = f64::INFINITY;
        for it in &t.items {
            let v = match it {
                Item::Cell(c) => cell_hessians(c, self.table)
                    .iter()
                    .map(|(_, h)| h.trace().lo())
                    .fold(f64::INFINITY, f64::min),
                Item::Sub(s) => self.min_trace(&s.child),
            };
            m = m.min(v);
        }
        self.min_trace.insert(t.id, m);
        m
    }

    /// Largest ratio of the certified distance to the trail segment over the
    /// allowed tolerance, across frame cells (at most 1 means every Hessian
    /// lies in its neighborhood).
    pub fn trail_excess(&mut self, t: &Template) -> f64 {
        if let Some(v) = self.trail.get(&t.id) {
            return *v;
        }
        let mut m: f64 = 0.0;
        for it in &t.items {
            let v = match it {
                Item::Cell(c) => match c.segment {
                    Some((b, cc)) => {
                        let (b, cc) = (self.table.get(b), self.table.get(cc));
                        cell_hessians(c, self.table)
                            .iter()
                            .map(|(_, h)| h.dist_to_segment_enclosure(b, cc).hi() / c.tol)
                            .fold(0.0, f64::max)
                    }
                    None => 0.0,
                },
                Item::Sub(s) => self.trail_excess(&s.child),
            };
            m = m.max(v);
        }
        self.trail.insert(t.id, m);
        m
    }

    /// Bound of `|∇w_l|` per level `l`, in template units.
    pub fn grad_sup_by_level(&mut self, t: &Template) -> BTreeMap<u32, f64> {
        if let Some(v) = self.grad.get(&t.id) {
            return v.clone();
        }
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for it in &t.items {
            let r = it.rect();
            let own = it.pert().gradient_sup(r.axis_range(0), r.axis_range(1));
            match it {
                Item::Cell(c) => {
                    let e = acc.entry(c.level).or_insert(0.0);
                    *e = e.max(own);
                }
                Item::Sub(s) => {
                    let inner = self.grad_sup_by_level(&s.child);
                    let mut levels: Vec<u32> = inner.keys().copied().collect();
                    levels.push(s.level);
                    for l in levels {
                        let mut v = inner.get(&l).copied().unwrap_or(0.0) * s.scale;
                        if l == s.level {
                            v += own;
                        }
                        let e = acc.entry(l).or_insert(0.0);
                        *e = e.max(v * (1.0 + 1e-12));
                    }
                }
            }
        }
        self.grad.insert(t.id, acc.clone());
        acc
    }

    /// Largest trace (value and gradient) of the perturbations on the
    /// template boundary, in template units.
    pub fn boundary_dev(&mut self, t: &Template) -> f64 {
        if let Some(v) = self.boundary.get(&t.id) {
            return *v;
        }
        let outer = t.rect();
        let mut m: f64 = 0.0;
        for it in &t.items {
            let r = it.rect();
            for axis in 0..2 {
                for side in [outer.lo[axis], outer.hi[axis]] {
                    let touches = if side == outer.lo[axis] {
                        r.lo[axis] == side
                    } else {
                        r.hi[axis] == side
                    };
                    if !touches {
                        continue;
                    }
                    let other = r.axis_range(1 - axis);
                    m = m.max(edge_trace(it.pert(), axis, side, other));
                    if let Item::Sub(s) = it {
                        m = m.max(self.boundary_dev(&s.child) * s.scale);
                    }
                }
            }
        }
        self.boundary.insert(t.id, m);
        m
    }

    /// Largest mismatch of value or gradient across edges shared by items
    /// of one template, sampled at points along each shared edge, together
    /// with the boundary traces of nested layouts.
    pub fn continuity_defect(&mut self, t: &Template) -> f64 {
        if let Some(v) = self.continuity.get(&t.id) {
            return *v;
        }
        let mut m: f64 = 0.0;
        let items = &t.items;
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                m = m.max(shared_edge_mismatch(a, b));
            }
            if let Item::Sub(s) = a {
                m = m.max(self.continuity_defect(&s.child));
                m = m.max(self.boundary_dev(&s.child) * s.scale);
            }
        }
        self.continuity.insert(t.id, m);
        m
    }
}

/// `|w| + |∇w|` bound of a perturbation restricted to the line
/// `x_axis = at`, over `range` of the other coordinate.
pub fn edge_trace(p: &Pert, axis: usize, at: f64, range: [f64; 2]) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    let (fixed, free) = if axis == 0 {
        (&p.px, &p.py)
    } else {
        (&p.py, &p.px)
    };
    let (v, d) = fixed.trace(at);
    if v == Interval::ZERO && d == Interval::ZERO {
        return 0.0;
    }
    let f0 = free.range(range[0], range[1], 0).mag();
    let f1 = free.range(range[0], range[1], 1).mag();
    // value, normal derivative, tangential derivative
    v.mag() * f0 + d.mag() * f0 + v.mag() * f1
}

fn shared_edge_mismatch(a: &Item, b: &Item) -> f64 {
    let (ra, rb) = (a.rect(), b.rect());
    let mut m: f64 = 0.0;
    for axis in 0..2 {
        for (x, y) in [(ra.hi[axis], rb.lo[axis]), (ra.lo[axis], rb.hi[axis])] {
            if x != y {
                continue;
            }
            let o = 1 - axis;
            let lo = ra.lo[o].max(rb.lo[o]);
            let hi = ra.hi[o].min(rb.hi[o]);
            if hi <= lo {
                continue;
            }
            for k in 0..=4 {
                let s = lo + (hi - lo) * k as f64 / 4.0;
                let mut pt = [0.0; 2];
                pt[axis] = x;
                pt[o] = s;
                let (pa, pb) = (a.pert(), b.pert());
                let dv = (pa.value(pt) - pb.value(pt)).abs();
                let (ga, gb) = (pa.gradient(pt), pb.gradient(pt));
                let dg = (ga[0] - gb[0]).hypot(ga[1] - gb[1]);
                let scale = 1.0 + pa.gradient(pt)[0].abs().max(pa.gradient(pt)[1].abs());
                m = m.max((dv + dg) / scale);
            }
        }
    }
    m
}
