//! Planar C² domains: arc-length parametrization, Frenet frame, signed distance.
//!
//! Boundaries are positively oriented. The normal `n` points outward and the
//! frame satisfies `τ' = -κ n`, `n' = κ τ`, so a disk of radius `r` has
//! curvature `1/r`. The signed distance is negative inside the domain.

use crate::error::{MmtfError, Result};
use crate::quad::gauss_legendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Shape of the boundary curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { r: f64 },
    Ellipse { a: f64, b: f64 },
    /// Polar star `r(θ) = a (1 + amp cos(k θ))`.
    Star { a: f64, amp: f64, k: u32 },
}

impl Shape {
    fn point(&self, th: f64) -> (Vec2, Vec2, Vec2) {
        let (c, s) = (th.cos(), th.sin());
        match *self {
            Shape::Disk { r } => ([r * c, r * s], [-r * s, r * c], [-r * c, -r * s]),
            Shape::Ellipse { a, b } => ([a * c, b * s], [-a * s, b * c], [-a * c, -b * s]),
            Shape::Star { a, amp, k } => {
                let k = k as f64;
                let r = a * (1.0 + amp * (k * th).cos());
                let r1 = -a * amp * k * (k * th).sin();
                let r2 = -a * amp * k * k * (k * th).cos();
                (
                    [r * c, r * s],
                    [r1 * c - r * s, r1 * s + r * c],
                    [r2 * c - 2.0 * r1 * s - r * c, r2 * s + 2.0 * r1 * c - r * s],
                )
            }
        }
    }
}

/// Position, unit tangent, outward normal and curvature at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub s: f64,
    pub p: Vec2,
    pub tau: Vec2,
    pub n: Vec2,
    pub kappa: f64,
}

/// Result of locating a point relative to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    /// Signed distance, negative inside.
    pub d: f64,
    /// Nearest-point projection, present only inside the tube `|d| < eps_bar`.
    pub proj: Option<Frame>,
}

const TABLE_PANELS: usize = 2048;
const GL_ORDER: usize = 10;
const SEARCH_SAMPLES: usize = 2048;

/// A bounded C² domain with its arc-length tables.
#[derive(Debug, Clone)]
pub struct Domain {
    shape: Shape,
    length: f64,
    eps_bar: f64,
    kappa_max: f64,
    /// Cumulative arc length at the panel edges `θ_j = 2π j / TABLE_PANELS`.
    cum: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
    search: Vec<(f64, Vec2)>,
}

impl Domain {
    /// Builds a domain; `eps_cap` bounds the admissible layer width from above.
    pub fn new(shape: Shape, eps_cap: f64) -> Result<Self> {
        match shape {
            Shape::Disk { r } if !(r > 0.0 && r.is_finite()) => {
                return Err(MmtfError::invalid("disk radius must be positive"))
            }
            Shape::Ellipse { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                return Err(MmtfError::invalid("ellipse semi-axes must be positive"))
            }
            Shape::Star { a, amp, k } => {
                if !(a > 0.0 && a.is_finite()) || k < 2 {
                    return Err(MmtfError::invalid("star needs a > 0 and k >= 2"));
                }
                if !(0.0..1.0).contains(&amp) {
                    return Err(MmtfError::invalid(
                        "star amplitude must lie in [0, 1); the curve degenerates at the origin otherwise",
                    ));
                }
            }
            _ => {}
        }
        if !(eps_cap > 0.0) {
            return Err(MmtfError::invalid("eps cap must be positive"));
        }
        let gl = gauss_legendre(GL_ORDER);
        let mut cum = Vec::with_capacity(TABLE_PANELS + 1);
        cum.push(0.0);
        let dth = 2.0 * PI / TABLE_PANELS as f64;
        let mut acc = 0.0;
        for j in 0..TABLE_PANELS {
            acc += panel_length(&shape, &gl, j as f64 * dth, (j + 1) as f64 * dth);
            cum.push(acc);
        }
        let length = acc;
        let mut kappa_max: f64 = 0.0;
        let mut diam: f64 = 0.0;
        let mut search = Vec::with_capacity(SEARCH_SAMPLES);
        for j in 0..8 * SEARCH_SAMPLES {
            let th = 2.0 * PI * j as f64 / (8 * SEARCH_SAMPLES) as f64;
            let (p, d1, d2) = shape.point(th);
            let sp = norm(d1);
            if sp < 1e-12 {
                return Err(MmtfError::invalid("boundary parametrization degenerates"));
            }
            let k = (d1[0] * d2[1] - d1[1] * d2[0]) / sp.powi(3);
            kappa_max = kappa_max.max(k.abs());
            diam = diam.max(norm(p));
            if j % 8 == 0 {
                search.push((th, p));
            }
        }
        if !(kappa_max.is_finite()) || kappa_max * diam > 1e4 {
            return Err(MmtfError::invalid("boundary curvature too large to resolve"));
        }
        let eps_bar = eps_cap.min(0.5 / kappa_max);
        Ok(Self { shape, length, eps_bar, kappa_max, cum, gl, search })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Perimeter H¹(∂Ω).
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Largest admissible layer width, `min(cap, 1/(2 κ_max))`.
    pub fn eps_bar(&self) -> f64 {
        self.eps_bar
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    /// Enclosed area, by the shoelace formula on the arc-length nodes.
    pub fn area(&self) -> f64 {
        let nodes = self.nodes(4096);
        let mut a = 0.0;
        for i in 0..nodes.len() {
            let p = nodes[i].p;
            let q = nodes[(i + 1) % nodes.len()].p;
            a += p[0] * q[1] - p[1] * q[0];
        }
        0.5 * a
    }

    fn arclength_at(&self, th: f64) -> f64 {
        let th = th.rem_euclid(2.0 * PI);
        let dth = 2.0 * PI / TABLE_PANELS as f64;
        let j = ((th / dth) as usize).min(TABLE_PANELS - 1);
        let th0 = j as f64 * dth;
        self.cum[j] + panel_length(&self.shape, &self.gl, th0, th)
    }

    fn theta_of(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.length);
        if let Shape::Disk { r } = self.shape {
            return s / r;
        }
        let j = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(j) => j.min(TABLE_PANELS - 1),
            Err(j) => j.saturating_sub(1).min(TABLE_PANELS - 1),
        };
        let dth = 2.0 * PI / TABLE_PANELS as f64;
        let (lo, hi) = (j as f64 * dth, (j + 1) as f64 * dth);
        let frac = (s - self.cum[j]) / (self.cum[j + 1] - self.cum[j]);
        let mut th = lo + frac * dth;
        for _ in 0..30 {
            let (_, d1, _) = self.shape.point(th);
            let step = (self.cum[j] + panel_length(&self.shape, &self.gl, lo, th) - s) / norm(d1);
            th = (th - step).clamp(lo, hi);
            if step.abs() < 1e-15 {
                break;
            }
        }
        th
    }

    fn frame_at_theta(&self, th: f64, s: f64) -> Frame {
        let (p, d1, d2) = self.shape.point(th);
        let sp = norm(d1);
        let tau = [d1[0] / sp, d1[1] / sp];
        let n = [tau[1], -tau[0]];
        let kappa = (d1[0] * d2[1] - d1[1] * d2[0]) / sp.powi(3);
        Frame { s, p, tau, n, kappa }
    }

    /// Boundary point, tangent, outward normal and curvature at arc length `s`.
    pub fn frame(&self, s: f64) -> Frame {
        let s = s.rem_euclid(self.length);
        self.frame_at_theta(self.theta_of(s), s)
    }

    /// `n` boundary frames uniformly spaced in arc length, starting at `s0`.
    pub fn nodes_from(&self, n: usize, s0: f64) -> Vec<Frame> {
        let h = self.length / n as f64;
        (0..n).map(|i| self.frame(s0 + i as f64 * h)).collect()
    }

    pub fn nodes(&self, n: usize) -> Vec<Frame> {
        self.nodes_from(n, 0.0)
    }

    /// Periodic trapezoid rule for `∫_∂Ω g dσ` with `n` nodes.
    pub fn boundary_integral<F: Fn(&Frame) -> f64>(&self, n: usize, g: F) -> f64 {
        let h = self.length / n as f64;
        let mut acc = crate::quad::Neumaier::new();
        for fr in self.nodes(n) {
            acc.add(g(&fr));
        }
        acc.value() * h
    }

    /// Signed distance and, inside the tube, the nearest-point projection.
    pub fn locate(&self, x: Vec2) -> Location {
        let (mut best_th, mut best_d2) = (0.0, f64::INFINITY);
        for &(th, p) in &self.search {
            let d2 = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best_th = th;
            }
        }
        let dth = 2.0 * PI / SEARCH_SAMPLES as f64;
        let (lo, hi) = (best_th - dth, best_th + dth);
        let mut th = best_th;
        for _ in 0..50 {
            let (p, d1, d2) = self.shape.point(th);
            let r = sub(p, x);
            let g = dot(r, d1);
            let gp = dot(d1, d1) + dot(r, d2);
            let step = if gp > 0.0 { g / gp } else { 0.5 * (hi - lo) * g.signum() };
            let next = (th - step).clamp(lo, hi);
            let done = (next - th).abs() < 1e-15;
            th = next;
            if done {
                break;
            }
        }
        let (p, d1, _) = self.shape.point(th);
        let sp = norm(d1);
        let nrm = [d1[1] / sp, -d1[0] / sp];
        let r = sub(x, p);
        let dist = norm(r);
        let d = if dot(r, nrm) >= 0.0 { dist } else { -dist };
        let proj = if dist < self.eps_bar {
            Some(self.frame_at_theta(th, self.arclength_at(th)))
        } else {
            None
        };
        Location { d, proj }
    }

    pub fn signed_distance(&self, x: Vec2) -> f64 {
        self.locate(x).d
    }

    /// Projection onto the boundary; fails outside the tube.
    pub fn project(&self, x: Vec2) -> Result<Frame> {
        let loc = self.locate(x);
        loc.proj.ok_or(MmtfError::OutsideTube { dist: loc.d.abs(), reach: self.eps_bar })
    }

    /// Axis-aligned bounding box of the domain.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for &(_, p) in &self.search {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (lo, hi)
    }
}

fn panel_length(shape: &Shape, gl: &(Vec<f64>, Vec<f64>), a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let c = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    gl.0
        .iter()
        .zip(&gl.1)
        .map(|(&x, &w)| w * norm(shape.point(m + c * x).1))
        .sum::<f64>()
        * c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_frame_at_origin_of_arclength() {
        let d = Domain::new(Shape::Disk { r: 1.0 }, 1.0).unwrap();
        let f = d.frame(0.0);
        assert!((f.p[0] - 1.0).abs() < 1e-15 && f.p[1].abs() < 1e-15);
        assert!(f.tau[0].abs() < 1e-15 && (f.tau[1] - 1.0).abs() < 1e-15);
        assert!((f.n[0] - 1.0).abs() < 1e-15);
        assert!((f.kappa - 1.0).abs() < 1e-14);
        assert!((d.length() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn centre_of_disk_has_no_projection() {
        let d = Domain::new(Shape::Disk { r: 1.0 }, 1.0).unwrap();
        let loc = d.locate([0.0, 0.0]);
        assert!((loc.d + 1.0).abs() < 1e-12);
        assert!(matches!(d.project([0.0, 0.0]), Err(MmtfError::OutsideTube { .. })));
    }

    #[test]
    fn degenerate_star_is_rejected() {
        assert!(Domain::new(Shape::Star { a: 1.0, amp: 1.0, k: 5 }, 1.0).is_err());
        assert!(Domain::new(Shape::Star { a: 1.0, amp: 0.2, k: 1 }, 1.0).is_err());
    }

    #[test]
    fn ellipse_eps_bar_uses_max_curvature() {
        let d = Domain::new(Shape::Ellipse { a: 2.0, b: 1.0 }, 10.0).unwrap();
        assert!((d.kappa_max() - 2.0).abs() < 1e-6);
        assert!((d.eps_bar() - 0.25).abs() < 1e-6);
    }
}
