//! The `1/|x - y|` kernel on square cells: exact point-to-cell potentials, a
//! tabulated cell-pair kernel, and direct and FFT convolution with it.

use crate::quad::{gauss_legendre, Neumaier};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Offsets up to this Chebyshev radius use the exact cell-pair integral.
pub const NEAR: i64 = 6;

/// `∫_0^x ∫_0^y du dv / √(u² + v²)` with signs.
#[inline]
fn g_corner(x: f64, y: f64) -> f64 {
    let (ax, ay) = (x.abs(), y.abs());
    if ax == 0.0 || ay == 0.0 {
        return 0.0;
    }
    x.signum() * y.signum() * (ax * (ay / ax).asinh() + ay * (ax / ay).asinh())
}

/// `∫_cell dy / |x - y|` over the axis-aligned square of side `h` centred at `c`.
#[inline]
pub fn cell_potential(x: [f64; 2], c: [f64; 2], h: f64) -> f64 {
    let x1 = c[0] - 0.5 * h - x[0];
    let x2 = c[0] + 0.5 * h - x[0];
    let y1 = c[1] - 0.5 * h - x[1];
    let y2 = c[1] + 0.5 * h - x[1];
    g_corner(x2, y2) - g_corner(x1, y2) - g_corner(x2, y1) + g_corner(x1, y1)
}

/// Unit-cell pair integral `∬_{Q0 × (Q0 + k)} dx dy / |x - y|`.
pub fn unit_pair(kx: i64, ky: i64) -> f64 {
    if kx.abs().max(ky.abs()) > NEAR {
        return unit_pair_far(kx, ky);
    }
    let rule = edge_graded_rule();
    let mut acc = Neumaier::new();
    for &(x, wx) in rule {
        let mut row = Neumaier::new();
        for &(y, wy) in rule {
            row.add(wy * cell_potential([kx as f64 - 0.5 + x, ky as f64 - 0.5 + y], [0.0, 0.0], 1.0));
        }
        acc.add(wx * row.value());
    }
    acc.value()
}

/// Composite Gauss rule on `[0, 1]` with panels halving toward both ends,
/// where the cell potential has logarithmic second derivatives.
fn edge_graded_rule() -> &'static [(f64, f64)] {
    static RULE: std::sync::OnceLock<Vec<(f64, f64)>> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        let mut br = vec![0.0];
        for j in (2..=14).rev() {
            br.push(0.5f64.powi(j));
        }
        let half = br.clone();
        for &b in half.iter().rev().skip(1) {
            br.push(1.0 - b);
        }
        br.push(1.0);
        br.dedup();
        let (gx, gw) = gauss_legendre(8);
        let mut out = Vec::new();
        for w in br.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, wt) in gx.iter().zip(&gw) {
                out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * wt));
            }
        }
        out
    })
}

/// Moment expansion of the unit-cell pair average about the centre offset.
///
/// The offset of two independent uniform points is triangular per axis, with
/// moments 1/6 and 1/15, and `Δ(1/r) = 1/r³` in the plane.
pub fn unit_pair_far(kx: i64, ky: i64) -> f64 {
    let (x, y) = (kx as f64, ky as f64);
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    let r9 = r2 * r2 * r2 * r2 * r;
    let d4x = 3.0 * (8.0 * x.powi(4) - 24.0 * x * x * y * y + 3.0 * y.powi(4)) / r9;
    let d4y = 3.0 * (8.0 * y.powi(4) - 24.0 * x * x * y * y + 3.0 * x.powi(4)) / r9;
    let d22 = 3.0 * (-4.0 * x.powi(4) + 27.0 * x * x * y * y - 4.0 * y.powi(4)) / r9;
    1.0 / r + 1.0 / (12.0 * r * r2) + (d4x + d4y) / 360.0 + d22 / 144.0
}

/// Cell-pair kernel table for a grid of spacing `h`, covering all offsets of an
/// `nx × ny` grid: `W(k) = h³ w(k)`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Indexed by `(|ky|, |kx|)`.
    w: Vec<f64>,
}

impl KernelTable {
    pub fn new(nx: usize, ny: usize, h: f64) -> Self {
        let near: Vec<f64> = {
            let n = (NEAR + 1) as usize;
            (0..n * n)
                .into_par_iter()
                .map(|idx| {
                    let (kx, ky) = ((idx % n) as i64, (idx / n) as i64);
                    if ky > kx {
                        0.0
                    } else {
                        unit_pair(kx, ky)
                    }
                })
                .collect()
        };
        let n = (NEAR + 1) as usize;
        let h3 = h * h * h;
        let mut w = vec![0.0; nx * ny];
        for ky in 0..ny {
            for kx in 0..nx {
                let (a, b) = (kx.max(ky), kx.min(ky));
                let v = if (a as i64) <= NEAR { near[b * n + a] } else { unit_pair(kx as i64, ky as i64) };
                w[ky * nx + kx] = h3 * v;
            }
        }
        Self { nx, ny, h, w }
    }

    #[inline]
    pub fn get(&self, kx: i64, ky: i64) -> f64 {
        self.w[ky.unsigned_abs() as usize * self.nx + kx.unsigned_abs() as usize]
    }

    /// `P_c = Σ_c' W(c - c') q_c'` by direct summation over nonzero charges.
    pub fn convolve_direct(&self, q: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let src: Vec<(i64, i64, f64)> = (0..nx * ny)
            .filter(|&c| q[c] != 0.0)
            .map(|c| ((c % nx) as i64, (c / nx) as i64, q[c]))
            .collect();
        (0..nx * ny)
            .into_par_iter()
            .map(|c| {
                let (i, j) = ((c % nx) as i64, (c / nx) as i64);
                let mut acc = Neumaier::new();
                for &(a, b, v) in &src {
                    acc.add(self.get(i - a, j - b) * v);
                }
                acc.value()
            })
            .collect()
    }
}

/// Smallest `2^a 3^b 5^c` not below `n`.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// FFT convolution with a kernel table on a zero-padded torus of at least
/// `(2nx - 1) × (2ny - 1)` cells.
pub struct FftConvolver {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Transform of the even kernel; real up to round-off.
    khat: Vec<f64>,
}

impl FftConvolver {
    pub fn new(table: &KernelTable) -> Self {
        let (nx, ny) = (table.nx, table.ny);
        let (px, py) = (fast_len(2 * nx - 1), fast_len(2 * ny - 1));
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let inv_x = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);
        let mut k = vec![Complex64::new(0.0, 0.0); px * py];
        for j in 0..py {
            let kj = if j < ny { j as i64 } else if j + ny > py { j as i64 - py as i64 } else { continue };
            for i in 0..px {
                let ki = if i < nx { i as i64 } else if i + nx > px { i as i64 - px as i64 } else { continue };
                k[j * px + i] = Complex64::new(table.get(ki, kj), 0.0);
            }
        }
        let mut me = Self { nx, ny, px, py, fwd_x, inv_x, fwd_y, inv_y, khat: Vec::new() };
        me.fft2(&mut k, true);
        me.khat = k.iter().map(|c| c.re).collect();
        me
    }

    fn fft2(&self, a: &mut [Complex64], forward: bool) {
        let (px, py) = (self.px, self.py);
        let fx = if forward { &self.fwd_x } else { &self.inv_x };
        let fy = if forward { &self.fwd_y } else { &self.inv_y };
        let rows = (py / rayon::current_num_threads().max(1)).max(1);
        a.par_chunks_mut(px * rows).for_each(|blk| fx.process(blk));
        let mut t = vec![Complex64::new(0.0, 0.0); px * py];
        for j in 0..py {
            for i in 0..px {
                t[i * py + j] = a[j * px + i];
            }
        }
        let cols = (px / rayon::current_num_threads().max(1)).max(1);
        t.par_chunks_mut(py * cols).for_each(|blk| fy.process(blk));
        for j in 0..py {
            for i in 0..px {
                a[j * px + i] = t[i * py + j];
            }
        }
    }

    /// Convolves `a` and `b` at once through one complex transform.
    pub fn convolve_pair(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny, px, py) = (self.nx, self.ny, self.px, self.py);
        let mut z = vec![Complex64::new(0.0, 0.0); px * py];
        for j in 0..ny {
            for i in 0..nx {
                z[j * px + i] = Complex64::new(a[j * nx + i], b[j * nx + i]);
            }
        }
        self.fft2(&mut z, true);
        for (x, k) in z.iter_mut().zip(&self.khat) {
            *x *= k;
        }
        self.fft2(&mut z, false);
        let scale = 1.0 / (px * py) as f64;
        let mut oa = vec![0.0; nx * ny];
        let mut ob = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                oa[j * nx + i] = z[j * px + i].re * scale;
                ob[j * nx + i] = z[j * px + i].im * scale;
            }
        }
        (oa, ob)
    }

    pub fn convolve(&self, q: &[f64]) -> Vec<f64> {
        let zero = vec![0.0; q.len()];
        self.convolve_pair(q, &zero).0
    }
}

/// Which summation path evaluates grid double integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Fft,
}

impl std::str::FromStr for Method {
    type Err = crate::error::MmtfError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Method::Direct),
            "fft" => Ok(Method::Fft),
            _ => Err(crate::error::MmtfError::invalid(format!("unknown method '{s}'"))),
        }
    }
}

/// Kernel table plus (lazily) its FFT, shared by all evaluations on one grid.
pub struct GridKernel {
    pub table: KernelTable,
    fft: std::sync::OnceLock<FftConvolver>,
}

impl GridKernel {
    pub fn new(nx: usize, ny: usize, h: f64) -> Self {
        Self { table: KernelTable::new(nx, ny, h), fft: std::sync::OnceLock::new() }
    }

    pub fn convolve(&self, q: &[f64], method: Method) -> Vec<f64> {
        match method {
            Method::Direct => self.table.convolve_direct(q),
            Method::Fft => self.fft.get_or_init(|| FftConvolver::new(&self.table)).convolve(q),
        }
    }

    /// Two convolutions; the FFT path shares one complex transform.
    pub fn convolve_pair(&self, a: &[f64], b: &[f64], method: Method) -> (Vec<f64>, Vec<f64>) {
        match method {
            Method::Direct => (self.table.convolve_direct(a), self.table.convolve_direct(b)),
            Method::Fft => self.fft.get_or_init(|| FftConvolver::new(&self.table)).convolve_pair(a, b),
        }
    }

    /// `Σ_i Σ_j qᵢ W(i - j) qⱼ` summed over the given charge components.
    pub fn quadratic(&self, comps: &[&[f64]], method: Method) -> f64 {
        let mut acc = Neumaier::new();
        for pair in comps.chunks(2) {
            let (pa, pb) = match pair {
                [a, b] => self.convolve_pair(a, b, method),
                [a] => (self.convolve(a, method), Vec::new()),
                _ => unreachable!(),
            };
            for (q, p) in pair.iter().zip([pa, pb]) {
                for (x, y) in q.iter().zip(&p) {
                    acc.add(x * y);
                }
            }
        }
        acc.value()
    }
}
