//! Double integrals over the boundary layer `O_ε⁺` in boundary coordinates.
//!
//! A layer point is `X(s, t) = φ(s) + ε t n(s)` with `t ∈ [0, 1]` and area
//! element `ε (1 + ε t κ(s)) dt ds`. Charges are carried by *families*: a
//! depth map `w ↦ t(w)` on `[0, 1]`, Gauss nodes in `w`, and a density per
//! `ds dw`. The `1/|X - X'|` kernel is split as `K0 + (K - K0)` where
//!
//! `K0 = 1 / √(α c(u)² + v²)`,  `c(u) = (L/π) sin(π u / L)`,
//! `u = s - s'`, `v = ε |t - t'|`, `α = (1 + ε κ t)(1 + ε κ t')`,
//!
//! which is exact on a circle. The `s'`-integral of `K0` is a complete
//! elliptic integral evaluated by the arithmetic–geometric mean, so the layer
//! width may be arbitrarily small compared with the arc-length spacing.

use crate::geometry::{Domain, Frame, Vec2};
use crate::quad::{gauss_on, Neumaier};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Arithmetic–geometric mean.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= 1e-16 * an {
            return an;
        }
        a = an;
        b = bn;
    }
    0.5 * (a + b)
}

/// `∫_{-L/2}^{L/2} du / √(α c(u)² + v²)` in closed form.
pub fn ring_integral(v: f64, alpha: f64, length: f64) -> f64 {
    let sa = alpha.sqrt();
    let a = PI * v / (length * sa);
    // ∫_0^{π/2} dθ / √(sin²θ + a²) = π / (2 AGM(√(1 + a²), a))
    (2.0 / sa) * PI / (2.0 * agm((1.0 + a * a).sqrt(), a))
}

/// Uniform arc-length nodes on `∂Ω` together with the layer width.
#[derive(Debug, Clone)]
pub struct LayerNodes {
    pub eps: f64,
    pub frames: Vec<Frame>,
    pub hs: f64,
    pub length: f64,
    chord2: Vec<f64>,
}

impl LayerNodes {
    pub fn new(dom: &Domain, eps: f64, n_s: usize) -> Self {
        Self::starting_at(dom, eps, n_s, 0.0)
    }

    pub fn starting_at(dom: &Domain, eps: f64, n_s: usize, s0: f64) -> Self {
        let frames = dom.nodes_from(n_s, s0);
        let length = dom.length();
        let hs = length / n_s as f64;
        let chord2 = (0..n_s)
            .map(|m| {
                let c = (length / PI) * (PI * m as f64 * hs / length).sin();
                c * c
            })
            .collect();
        Self { eps, frames, hs, length, chord2 }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize, t: f64) -> Vec2 {
        let f = &self.frames[i];
        let d = self.eps * t;
        [f.p[0] + d * f.n[0], f.p[1] + d * f.n[1]]
    }

    #[inline]
    pub fn jac(&self, i: usize, t: f64) -> f64 {
        1.0 + self.eps * t * self.frames[i].kappa
    }
}

/// Channels carried by a density: `[q, gx, gy]` where `q` pairs with `q`
/// (scalar charges) and `(gx, gy)` pairs by dot product (vector charges).
pub type Channels = [f64; 3];

/// A family of layer charges.
pub trait Family: Sync {
    /// Depth `t(w)`, monotone on `[0, 1]`.
    fn depth(&self, w: f64) -> f64;
    /// Inverse of [`Family::depth`], clamped to `[0, 1]`.
    fn param(&self, t: f64) -> f64;
    /// Gauss nodes and weights in `w`.
    fn quad(&self) -> &[(f64, f64)];
    /// Density per `ds dw` at boundary node `i`.
    fn density(&self, i: usize, w: f64) -> Channels;
}

pub fn gauss_pairs(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_on(n, 0.0, 1.0);
    x.into_iter().zip(w).collect()
}

/// Tensor-node data of one family.
pub struct Tabulated {
    pub n_w: usize,
    pub depth: Vec<f64>,
    pub weight: Vec<f64>,
    /// Indexed `j * n_w + l`.
    pub vals: Vec<Channels>,
    pub pts: Vec<Vec2>,
}

impl Tabulated {
    pub fn new(nodes: &LayerNodes, g: &dyn Family) -> Self {
        let q = g.quad();
        let n_w = q.len();
        let depth: Vec<f64> = q.iter().map(|&(w, _)| g.depth(w)).collect();
        let weight: Vec<f64> = q.iter().map(|&(_, wt)| wt).collect();
        let vals: Vec<Channels> = (0..nodes.len() * n_w)
            .into_par_iter()
            .map(|idx| g.density(idx / n_w, q[idx % n_w].0))
            .collect();
        let pts = (0..nodes.len() * n_w).map(|idx| nodes.point(idx / n_w, depth[idx % n_w])).collect();
        Self { n_w, depth, weight, vals, pts }
    }
}

/// Graded Gauss rule in `z ∈ [0, 1]`, mapped as `w* ± Δ z³` around a log singularity.
pub struct Graded {
    z: Vec<(f64, f64)>,
}

impl Graded {
    pub fn new(n: usize) -> Self {
        Self { z: gauss_pairs(n) }
    }
}

/// Integral of `g`'s charges against `1/|x - X'|` for an observation point
/// `x = X(s_i, t)` (or any `x` whose projection is node `i` at depth `t`).
pub fn inner(
    nodes: &LayerNodes,
    g: &dyn Family,
    tab: &Tabulated,
    graded: &Graded,
    i: usize,
    t: f64,
    x: Vec2,
) -> Channels {
    let n_s = nodes.len();
    let eps = nodes.eps;
    let kap = nodes.frames[i].kappa;
    let mut out = [Neumaier::new(), Neumaier::new(), Neumaier::new()];
    // Singular part: exact s'-integral of K0 against the density frozen at s_i.
    let ws = g.param(t);
    for (lo, hi, sign) in [(0.0, ws, -1.0), (ws, 1.0, 1.0)] {
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for &(z, wz) in &graded.z {
            let z3 = z * z * z;
            let w = if sign < 0.0 { ws - span * z3 } else { ws + span * z3 };
            let jw = 3.0 * span * z * z * wz;
            let tp = g.depth(w);
            let v = eps * (t - tp).abs();
            let alpha = (1.0 + eps * kap * t) * (1.0 + eps * kap * tp);
            let a = ring_integral(v, alpha, nodes.length) * jw;
            let b = g.density(i, w);
            for ch in 0..3 {
                out[ch].add(a * b[ch]);
            }
        }
    }
    // Regular remainder by the periodic trapezoid rule, diagonal term zero.
    for l in 0..tab.n_w {
        let tl = tab.depth[l];
        let v2 = (eps * (t - tl)).powi(2);
        let alpha = (1.0 + eps * kap * t) * (1.0 + eps * kap * tl);
        let bil = tab.vals[i * tab.n_w + l];
        let mut sk = [0.0; 3];
        let mut s0 = 0.0;
        for j in 0..n_s {
            if j == i {
                continue;
            }
            let m = if j > i { j - i } else { j + n_s - i };
            let p = tab.pts[j * tab.n_w + l];
            let k = 1.0 / ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
            let k0 = 1.0 / (alpha * nodes.chord2[m] + v2).sqrt();
            let b = tab.vals[j * tab.n_w + l];
            sk[0] += b[0] * k;
            sk[1] += b[1] * k;
            sk[2] += b[2] * k;
            s0 += k0;
        }
        let w = tab.weight[l] * nodes.hs;
        for ch in 0..3 {
            out[ch].add(w * (sk[ch] - bil[ch] * s0));
        }
    }
    [out[0].value(), out[1].value(), out[2].value()]
}

/// `∬ a(X) b(X') / |X - X'|` over layer charge families `f` (outer) and `g`
/// (inner), returned as `[scalar channel, vector channel]`.
pub fn interact(nodes: &LayerNodes, f: &dyn Family, g: &dyn Family, n_graded: usize) -> [f64; 2] {
    let tab_g = Tabulated::new(nodes, g);
    let tab_f = Tabulated::new(nodes, f);
    let graded = Graded::new(n_graded);
    let parts: Vec<[f64; 2]> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = [Neumaier::new(), Neumaier::new()];
            for k in 0..tab_f.n_w {
                let a = tab_f.vals[i * tab_f.n_w + k];
                if a == [0.0; 3] {
                    continue;
                }
                let t = tab_f.depth[k];
                let x = tab_f.pts[i * tab_f.n_w + k];
                let inn = inner(nodes, g, &tab_g, &graded, i, t, x);
                let w = tab_f.weight[k] * nodes.hs;
                acc[0].add(w * a[0] * inn[0]);
                acc[1].add(w * (a[1] * inn[1] + a[2] * inn[2]));
            }
            [acc[0].value(), acc[1].value()]
        })
        .collect();
    let mut s = [Neumaier::new(), Neumaier::new()];
    for p in parts {
        s[0].add(p[0]);
        s[1].add(p[1]);
    }
    [s[0].value(), s[1].value()]
}

/// Family carrying `|∇η_ε| dx = J ds du` with depth `t = η⁻¹(u)`.
pub struct EdgeFamily<'a, F: Fn(usize, f64) -> Channels + Sync> {
    pub nodes: &'a LayerNodes,
    pub profile: crate::cutoff::Profile,
    pub quad: Vec<(f64, f64)>,
    /// Charge per unit `|∇η_ε| dx` at `(i, t)`.
    pub charge: F,
}

impl<F: Fn(usize, f64) -> Channels + Sync> Family for EdgeFamily<'_, F> {
    fn depth(&self, w: f64) -> f64 {
        self.profile.inverse(w)
    }
    fn param(&self, t: f64) -> f64 {
        self.profile.eta(t.clamp(0.0, 1.0))
    }
    fn quad(&self) -> &[(f64, f64)] {
        &self.quad
    }
    fn density(&self, i: usize, w: f64) -> Channels {
        let t = self.depth(w);
        let j = self.nodes.jac(i, t);
        let c = (self.charge)(i, t);
        [j * c[0], j * c[1], j * c[2]]
    }
}

/// Family carrying the area element `ε J dt ds` at depth `t = w`.
pub struct VolumeFamily<'a, F: Fn(usize, f64) -> Channels + Sync> {
    pub nodes: &'a LayerNodes,
    pub quad: Vec<(f64, f64)>,
    /// Charge per unit area at `(i, t)`.
    pub charge: F,
}

impl<F: Fn(usize, f64) -> Channels + Sync> Family for VolumeFamily<'_, F> {
    fn depth(&self, w: f64) -> f64 {
        w
    }
    fn param(&self, t: f64) -> f64 {
        t.clamp(0.0, 1.0)
    }
    fn quad(&self) -> &[(f64, f64)] {
        &self.quad
    }
    fn density(&self, i: usize, w: f64) -> Channels {
        let j = self.nodes.eps * self.nodes.jac(i, w);
        let c = (self.charge)(i, w);
        [j * c[0], j * c[1], j * c[2]]
    }
}
