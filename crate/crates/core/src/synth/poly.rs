//! One-dimensional cubics anchored at a point, and their products.

use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::sym2::SymMat2;

/// `p(x) = Σ c[k] (x − anchor)^k`, `k ≤ 3`.
///
/// Anchoring at a cell edge makes value and slope at that edge exactly
/// `c[0]` and `c[1]`, so vanishing boundary traces are exact zeros.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly1 {
    pub anchor: f64,
    pub c: [f64; 4],
}

impl Poly1 {
    pub const ONE: Poly1 = Poly1 {
        anchor: 0.0,
        c: [1.0, 0.0, 0.0, 0.0],
    };
    pub const ZERO: Poly1 = Poly1 {
        anchor: 0.0,
        c: [0.0; 4],
    };

    pub fn new(anchor: f64, c: [f64; 4]) -> Self {
        Poly1 { anchor, c }
    }

    /// Coefficients of the `k`-th derivative, same anchor.
    pub fn derivative(&self, k: usize) -> [f64; 4] {
        let mut c = self.c;
        for _ in 0..k {
            c = [c[1], 2.0 * c[2], 3.0 * c[3], 0.0];
        }
        c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&v| v == 0.0)
    }

    /// `k`-th derivative at `x`.
    pub fn eval(&self, x: f64, k: usize) -> f64 {
        let c = self.derivative(k);
        let d = x - self.anchor;
        ((c[3] * d + c[2]) * d + c[1]) * d + c[0]
    }

    /// Certified range of the `k`-th derivative over `[lo, hi]`.
    pub fn range(&self, lo: f64, hi: f64, k: usize) -> Interval {
        let c = self.derivative(k);
        if c[1] == 0.0 && c[2] == 0.0 && c[3] == 0.0 {
            return Interval::point(c[0]);
        }
        // Taylor coefficients at `lo`, scaled to t ∈ [0, 1], then the hull
        // of the Bernstein coefficients
        let hh = Interval::point(lo) - Interval::point(self.anchor);
        let c = c.map(Interval::point);
        let three = Interval::point(3.0);
        let t = [
            ((c[3] * hh + c[2]) * hh + c[1]) * hh + c[0],
            (three * c[3] * hh + Interval::point(2.0) * c[2]) * hh + c[1],
            three * c[3] * hh + c[2],
            c[3],
        ];
        let w = Interval::point(hi) - Interval::point(lo);
        let e = [t[0], t[1] * w, t[2] * w.sqr(), t[3] * w.sqr() * w];
        let b1 = e[0] + e[1] / three;
        let b2 = e[0] + (Interval::point(2.0) * e[1] + e[2]) / three;
        let b3 = e[0] + e[1] + e[2] + e[3];
        e[0].hull(&b1).hull(&b2).hull(&b3)
    }

    /// Exact value and slope at the anchor; enclosure elsewhere.
    pub fn trace(&self, x: f64) -> (Interval, Interval) {
        if x == self.anchor {
            return (Interval::point(self.c[0]), Interval::point(self.c[1]));
        }
        (self.range(x, x, 0), self.range(x, x, 1))
    }

    /// `factor · p((x − origin)/scale)` as a polynomial in `x`.
    pub fn to_global(&self, origin: f64, scale: f64, factor: f64) -> Poly1 {
        let mut c = self.c;
        let mut s = 1.0;
        for ck in c.iter_mut() {
            *ck *= factor / s;
            s *= scale;
        }
        Poly1 {
            anchor: origin + scale * self.anchor,
            c,
        }
    }

    /// Same polynomial, re-expanded around a new anchor.
    pub fn shifted(&self, anchor: f64) -> Poly1 {
        let h = anchor - self.anchor;
        let c = self.c;
        Poly1 {
            anchor,
            c: [
                ((c[3] * h + c[2]) * h + c[1]) * h + c[0],
                (3.0 * c[3] * h + 2.0 * c[2]) * h + c[1],
                3.0 * c[3] * h + c[2],
                c[3],
            ],
        }
    }
}

/// `w(x, y) = px(x) · py(y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pert {
    pub px: Poly1,
    pub py: Poly1,
}

impl Pert {
    pub const ZERO: Pert = Pert {
        px: Poly1::ZERO,
        py: Poly1::ONE,
    };

    pub fn is_zero(&self) -> bool {
        self.px.is_zero() || self.py.is_zero()
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.px.eval(x[0], 0) * self.py.eval(x[1], 0)
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.px.eval(x[0], 1) * self.py.eval(x[1], 0),
            self.px.eval(x[0], 0) * self.py.eval(x[1], 1),
        ]
    }

    pub fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let xy = self.px.eval(x[0], 1) * self.py.eval(x[1], 1);
        [
            [self.px.eval(x[0], 2) * self.py.eval(x[1], 0), xy],
            [xy, self.px.eval(x[0], 0) * self.py.eval(x[1], 2)],
        ]
    }

    /// Certified Hessian box over `[x0, x1] × [y0, y1]`.
    pub fn hessian_range(&self, x: [f64; 2], y: [f64; 2]) -> SymMat2<Interval> {
        if self.is_zero() {
            return SymMat2::zero();
        }
        let p = |k| self.px.range(x[0], x[1], k);
        let q = |k| self.py.range(y[0], y[1], k);
        SymMat2::new(p(2) * q(0), p(1) * q(1), p(0) * q(2))
    }

    /// Certified bound of `|∇w|` over a box.
    pub fn gradient_sup(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let gx = self.px.range(x[0], x[1], 1) * self.py.range(y[0], y[1], 0);
        let gy = self.px.range(x[0], x[1], 0) * self.py.range(y[0], y[1], 1);
        (gx.sqr() + gy.sqr()).sqrt().hi()
    }

    /// A template-local perturbation `ŵ(ξ)` placed at `x = origin + scale·ξ`
    /// with values `scale² ŵ`, so Hessians are unchanged.
    pub fn to_global(&self, origin: [f64; 2], scale: f64) -> Pert {
        Pert {
            px: self.px.to_global(origin[0], scale, scale * scale),
            py: self.py.to_global(origin[1], scale, 1.0),
        }
    }

    /// The 16 coefficients `a[i][j]` of `(x−x0)^i (y−y0)^j`.
    pub fn bicubic_at(&self, corner: [f64; 2]) -> [[f64; 4]; 4] {
        let px = self.px.shifted(corner[0]);
        let py = self.py.shifted(corner[1]);
        let mut a = [[0.0; 4]; 4];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = px.c[i] * py.c[j];
            }
        }
        a
    }
}

/// Smoothstep `3s² − 2s³` rising over `[anchor, anchor + width]`
/// (`rising = true`) or falling to zero at `anchor` from the left.
pub fn smoothstep(anchor: f64, width: f64, rising: bool) -> Poly1 {
    let w2 = width * width;
    let c3 = 2.0 / (w2 * width);
    if rising {
        Poly1::new(anchor, [0.0, 0.0, 3.0 / w2, -c3])
    } else {
        Poly1::new(anchor, [0.0, 0.0, 3.0 / w2, c3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_ends() {
        let up = smoothstep(1.0, 0.5, true);
        assert_eq!(up.eval(1.0, 0), 0.0);
        assert_eq!(up.eval(1.0, 1), 0.0);
        assert!((up.eval(1.5, 0) - 1.0).abs() < 1e-15);
        assert!(up.eval(1.5, 1).abs() < 1e-14);
        let down = smoothstep(2.0, 0.5, false);
        assert!((down.eval(1.5, 0) - 1.0).abs() < 1e-15);
        assert!(down.eval(1.5, 1).abs() < 1e-14);
        assert_eq!(down.eval(2.0, 0), 0.0);
    }

    #[test]
    fn range_encloses_samples() {
        let p = Poly1::new(0.3, [0.1, -2.0, 5.0, -7.0]);
        for k in 0..3 {
            let r = p.range(0.0, 1.0, k);
            for i in 0..=100 {
                let x = i as f64 / 100.0;
                assert!(r.contains(p.eval(x, k)), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn shift_keeps_values() {
        let p = Poly1::new(0.3, [0.1, -2.0, 5.0, -7.0]);
        let q = p.shifted(-0.4);
        for x in [-1.0, 0.0, 0.25, 0.9] {
            for k in 0..3 {
                assert!((p.eval(x, k) - q.eval(x, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn global_frame_keeps_hessian() {
        let l = Pert {
            px: Poly1::new(0.2, [0.0, 0.0, 1.5, 0.3]),
            py: Poly1::new(0.1, [1.0, 0.5, 0.0, 0.0]),
        };
        let (o, s) = ([0.1, 0.05], 0.25);
        let w = l.to_global(o, s);
        let xi = [0.7, 0.3];
        let x = [o[0] + s * xi[0], o[1] + s * xi[1]];
        assert!((l.value(xi) * s * s - w.value(x)).abs() < 1e-14);
        let (hl, hw) = (l.hessian(xi), w.hessian(x));
        for i in 0..2 {
            for j in 0..2 {
                assert!((hl[i][j] - hw[i][j]).abs() < 1e-12);
            }
        }
    }
}
