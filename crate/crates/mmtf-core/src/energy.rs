//! Energy functionals of the regularized model.
//!
//! `G_ε(m) = ∫ η_ε² |∇m|² + λ ∫ η_ε² (m∥ div m⊥ - m⊥·∇m∥) + γ_ε W_ε(m)` with
//! `W_ε = (V - Ṽ) / (2|ln ε|)`, `V = ∬ div(η_ε m⊥) div(η_ε m⊥) / |x - y|`
//! and `Ṽ = ∬ ∇(η_ε m∥)·∇(η_ε m∥) / |x - y|`.
//!
//! Two evaluation paths are provided. The *grid path* discretizes `Ω_ε` on a
//! Cartesian grid with cell-averaged cutoff data and is limited to layers a
//! few cells wide. The *layered path* keeps the Ω part on the grid and
//! integrates the layer in boundary coordinates, which works for any `ε`.

use crate::cutoff::{check_eps, Profile};
use crate::error::{MmtfError, Result};
use crate::fields::{dot3, Magnetization, Sampler, TraceOp, Vec3};
use crate::fields::{DiffOps, Grid};
use crate::geometry::{Domain, Frame, Vec2};
use crate::kernel::{cell_potential, GridKernel, Method};
use crate::layer::{self, Channels, EdgeFamily, LayerNodes, VolumeFamily};
use crate::quad::{gauss_on, Neumaier};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Material constants entering the local energy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalEnergies {
    pub exchange: f64,
    pub dmi: f64,
    pub anisotropy: f64,
    pub zeeman: f64,
}

impl LocalEnergies {
    fn add(&mut self, o: &LocalEnergies) {
        self.exchange += o.exchange;
        self.dmi += o.dmi;
        self.anisotropy += o.anisotropy;
        self.zeeman += o.zeeman;
    }
}

/// Itemized `G_ε`. `stray = γ_ε W_ε` and `total = exchange + λ dmi + stray`;
/// anisotropy and Zeeman are reported separately and enter `total_with_fields`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub eps: f64,
    pub exchange: f64,
    pub dmi: f64,
    pub anisotropy: f64,
    pub zeeman: f64,
    pub v: f64,
    pub v_tilde: f64,
    pub w: f64,
    pub gamma_eps: f64,
    pub stray: f64,
    pub total: f64,
    pub total_with_fields: f64,
}

impl EnergyBreakdown {
    /// Assembles the breakdown; `coeff = γ_ε / (2|ln ε|)` is passed directly
    /// so regimes with `γ_ε ∝ |ln ε|` keep an exact coefficient.
    pub fn assemble(eps: f64, loc: LocalEnergies, p: &LocalParams, v: f64, vt: f64, coeff: f64) -> Self {
        let l = eps.ln().abs();
        let stray = coeff * (v - vt);
        let total = loc.exchange + p.lambda * loc.dmi + stray;
        Self {
            eps,
            exchange: loc.exchange,
            dmi: loc.dmi,
            anisotropy: loc.anisotropy,
            zeeman: loc.zeeman,
            v,
            v_tilde: vt,
            w: (v - vt) / (2.0 * l),
            gamma_eps: coeff * 2.0 * l,
            stray,
            total,
            total_with_fields: total + loc.anisotropy + loc.zeeman,
        }
    }
}

/// Pointwise local energy densities with exchange/DMI/anisotropy weight `w2`
/// and Zeeman weight `w1`.
#[inline]
fn local_density(m: Vec3, g: [Vec3; 2], p: &LocalParams, w2: f64, w1: f64) -> LocalEnergies {
    let ex = dot3(g[0], g[0]) + dot3(g[1], g[1]);
    let div = g[0][0] + g[1][1];
    let dmi = m[2] * div - (m[0] * g[0][2] + m[1] * g[1][2]);
    LocalEnergies {
        exchange: w2 * ex,
        dmi: w2 * dmi,
        anisotropy: w2 * p.alpha * (m[0] * m[0] + m[1] * m[1]),
        zeeman: -2.0 * p.beta_z * w1 * m[2],
    }
}

/// Cell gradients `[∂ₓm, ∂ᵧm]` with the masked stencils.
pub fn cell_gradients(field: &Magnetization, d: &DiffOps) -> Vec<[Vec3; 2]> {
    let comps: Vec<Vec<f64>> = (0..3).map(|k| field.component(k)).collect();
    let dx: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(0, f)).collect();
    let dy: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(1, f)).collect();
    (0..field.grid.len())
        .map(|c| [[dx[0][c], dx[1][c], dx[2][c]], [dy[0][c], dy[1][c], dy[2][c]]])
        .collect()
}

/// Exchange, DMI, anisotropy and Zeeman on the masked cells, with optional
/// cell weights `(η², η)`.
pub fn local_energies(field: &Magnetization, p: &LocalParams, weights: Option<(&[f64], &[f64])>) -> LocalEnergies {
    let d = DiffOps::new(&field.grid, &field.mask);
    let g = cell_gradients(field, &d);
    let a = field.grid.cell_area();
    let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new(), Neumaier::new()];
    for c in field.masked() {
        let (w2, w1) = weights.map(|(e2, e1)| (e2[c], e1[c])).unwrap_or((1.0, 1.0));
        let e = local_density(field.m[c], g[c], p, w2, w1);
        acc[0].add(e.exchange);
        acc[1].add(e.dmi);
        acc[2].add(e.anisotropy);
        acc[3].add(e.zeeman);
    }
    LocalEnergies {
        exchange: a * acc[0].value(),
        dmi: a * acc[1].value(),
        anisotropy: a * acc[2].value(),
        zeeman: a * acc[3].value(),
    }
}

// ---------------------------------------------------------------------------
// Grid path on Ω_ε.

/// Cell averages of `η_ε`, `η_ε²` and `∇η_ε` over `sub × sub` subsamples.
#[derive(Debug, Clone)]
pub struct GridCutoff {
    pub eps: f64,
    pub eta: Vec<f64>,
    pub eta2: Vec<f64>,
    pub grad: Vec<Vec2>,
}

impl GridCutoff {
    pub fn new(grid: &Grid, dom: &Domain, profile: &Profile, eps: f64, sub: usize) -> Result<Self> {
        check_eps(dom, eps)?;
        let h = grid.h;
        let per: Vec<(f64, f64, Vec2)> = (0..grid.len())
            .into_par_iter()
            .map(|c| {
                let x0 = grid.center(c);
                let dc = dom.signed_distance(x0);
                if dc < -0.75 * h {
                    return (1.0, 1.0, [0.0, 0.0]);
                }
                if dc > eps + 0.75 * h {
                    return (0.0, 0.0, [0.0, 0.0]);
                }
                let (mut e, mut e2, mut g) = (0.0, 0.0, [0.0, 0.0]);
                for a in 0..sub {
                    for b in 0..sub {
                        let x = [
                            x0[0] + h * ((a as f64 + 0.5) / sub as f64 - 0.5),
                            x0[1] + h * ((b as f64 + 0.5) / sub as f64 - 0.5),
                        ];
                        let loc = dom.locate(x);
                        let t = loc.d / eps;
                        let v = profile.eta(t);
                        e += v;
                        e2 += v * v;
                        if t > 0.0 && t < 1.0 {
                            if let Some(fr) = loc.proj {
                                let s = profile.deta(t) / eps;
                                g[0] += s * fr.n[0];
                                g[1] += s * fr.n[1];
                            }
                        }
                    }
                }
                let n = (sub * sub) as f64;
                (e / n, e2 / n, [g[0] / n, g[1] / n])
            })
            .collect();
        Ok(Self {
            eps,
            eta: per.iter().map(|p| p.0).collect(),
            eta2: per.iter().map(|p| p.1).collect(),
            grad: per.iter().map(|p| p.2).collect(),
        })
    }

    /// Cells where the cutoff is nonzero.
    pub fn support(&self) -> Vec<bool> {
        self.eta.iter().map(|&e| e > 0.0).collect()
    }

    /// Subsample count giving at least four samples across the layer.
    pub fn default_sub(h: f64, eps: f64) -> usize {
        ((4.0 * h / eps).ceil() as usize).clamp(4, 64)
    }
}

/// Charges `div(η m⊥)` and `∇(η m∥)` of a grid field.
pub fn grid_charges(field: &Magnetization, cut: Option<&GridCutoff>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = DiffOps::new(&field.grid, &field.mask);
    let g = cell_gradients(field, &d);
    let n = field.grid.len();
    let mut q = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for c in field.masked() {
        let m = field.m[c];
        let (e, ge) = cut.map(|k| (k.eta[c], k.grad[c])).unwrap_or((1.0, [0.0, 0.0]));
        q[c] = e * (g[c][0][0] + g[c][1][1]) + ge[0] * m[0] + ge[1] * m[1];
        gx[c] = e * g[c][0][2] + ge[0] * m[2];
        gy[c] = e * g[c][1][2] + ge[1] * m[2];
    }
    (q, gx, gy)
}

/// `(V, Ṽ)` of a grid field, with the cutoff if given (grid path) or with
/// `η = 1` on the masked cells (Ω×Ω part).
pub fn stray_pair(field: &Magnetization, cut: Option<&GridCutoff>, kernel: &GridKernel, method: Method) -> (f64, f64) {
    let (q, gx, gy) = grid_charges(field, cut);
    let v = kernel.quadratic(&[&q], method);
    let vt = kernel.quadratic(&[&gx, &gy], method);
    (v, vt)
}

/// `G_ε` on a grid covering `Ω_ε`.
pub fn total_g_eps_grid(
    field: &Magnetization,
    cut: &GridCutoff,
    kernel: &GridKernel,
    method: Method,
    p: &LocalParams,
    coeff: f64,
) -> Result<EnergyBreakdown> {
    check_layer_cells(field.grid.h, cut.eps)?;
    for (c, &e) in cut.eta.iter().enumerate() {
        if e > 0.0 && !field.mask[c] {
            return Err(MmtfError::invalid("field grid does not cover the layer"));
        }
    }
    let loc = local_energies(field, p, Some((&cut.eta2, &cut.eta)));
    let (v, vt) = stray_pair(field, Some(cut), kernel, method);
    let out = EnergyBreakdown::assemble(cut.eps, loc, p, v, vt, coeff);
    if !out.total.is_finite() {
        return Err(MmtfError::numerical("non-finite energy"));
    }
    Ok(out)
}

/// `D_ε = Ṽ(η_ε · 1)` on the grid path.
pub fn d_eps_grid(cut: &GridCutoff, kernel: &GridKernel, method: Method) -> f64 {
    let gx: Vec<f64> = cut.grad.iter().map(|g| g[0]).collect();
    let gy: Vec<f64> = cut.grad.iter().map(|g| g[1]).collect();
    kernel.quadratic(&[&gx, &gy], method)
}

// ---------------------------------------------------------------------------
// Boundary-coordinate quantities.

/// Resolution of the boundary-coordinate quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerOpts {
    /// Arc-length nodes.
    pub n_s: usize,
    /// Gauss nodes in `u = η(t)` for `|∇η_ε|`-weighted charges.
    pub n_edge: usize,
    /// Gauss nodes in `t` for area-weighted charges.
    pub n_vol: usize,
    /// Graded nodes per side for the logarithmic depth singularity.
    pub n_graded: usize,
}

impl LayerOpts {
    /// Refuses quadratures with fewer than four depth nodes across the layer.
    pub fn check(&self) -> Result<()> {
        if self.n_edge < 4 || self.n_vol < 2 || self.n_graded < 4 || self.n_s < 8 {
            return Err(MmtfError::Resolution("fewer than 4 depth nodes across the layer".into()));
        }
        Ok(())
    }
}

/// Refuses grids with fewer than four cells across the layer.
pub fn check_layer_cells(h: f64, eps: f64) -> Result<()> {
    if eps < 4.0 * h * (1.0 - 1e-9) {
        return Err(MmtfError::Resolution(format!("layer width {eps:e} spans fewer than 4 cells of size {h:e}")));
    }
    Ok(())
}

impl Default for LayerOpts {
    fn default() -> Self {
        Self { n_s: 1024, n_edge: 8, n_vol: 4, n_graded: 16 }
    }
}

/// `D_ε = ∬ ∇η_ε·∇η_ε / |x - y|` in boundary coordinates.
pub fn d_eps(profile: &Profile, dom: &Domain, eps: f64, opts: &LayerOpts) -> Result<f64> {
    check_eps(dom, eps)?;
    opts.check()?;
    let nodes = LayerNodes::new(dom, eps, opts.n_s);
    Ok(d_eps_on(&nodes, profile, opts))
}

fn unit_edge<'a>(nodes: &'a LayerNodes, profile: &Profile, opts: &LayerOpts) -> EdgeFamily<'a, impl Fn(usize, f64) -> Channels + Sync + 'a> {
    EdgeFamily {
        nodes,
        profile: *profile,
        quad: layer::gauss_pairs(opts.n_edge),
        charge: move |i: usize, _t: f64| {
            let n = nodes.frames[i].n;
            [0.0, -n[0], -n[1]]
        },
    }
}

pub fn d_eps_on(nodes: &LayerNodes, profile: &Profile, opts: &LayerOpts) -> f64 {
    let e = unit_edge(nodes, profile, opts);
    layer::interact(nodes, &e, &e, opts.n_graded)[1]
}

/// `f_ε(x) = ∫_{O_ε⁺} |∇η_ε(y)| / |x - y| dy`.
pub fn f_eps(profile: &Profile, dom: &Domain, eps: f64, x: Vec2, opts: &LayerOpts) -> Result<f64> {
    check_eps(dom, eps)?;
    opts.check()?;
    let loc = dom.locate(x);
    let len = dom.length();
    let scale = loc.d.abs().max(eps);
    let n_s = opts.n_s.max((4.0 * len / scale).ceil() as usize).min(1 << 17);
    match loc.proj {
        Some(fr) => {
            let nodes = LayerNodes::starting_at(dom, eps, n_s, fr.s);
            let fam = EdgeFamily {
                nodes: &nodes,
                profile: *profile,
                quad: layer::gauss_pairs(opts.n_edge),
                charge: |_i: usize, _t: f64| [1.0, 0.0, 0.0],
            };
            let tab = layer::Tabulated::new(&nodes, &fam);
            let graded = layer::Graded::new(opts.n_graded);
            Ok(layer::inner(&nodes, &fam, &tab, &graded, 0, loc.d / eps, x)[0])
        }
        None => {
            let nodes = LayerNodes::new(dom, eps, n_s);
            let q = layer::gauss_pairs(opts.n_edge);
            let mut acc = Neumaier::new();
            for i in 0..nodes.len() {
                for &(u, w) in &q {
                    let t = profile.inverse(u);
                    let p = nodes.point(i, t);
                    acc.add(w * nodes.jac(i, t) / ((x[0] - p[0]).hypot(x[1] - p[1])));
                }
            }
            Ok(acc.value() * nodes.hs)
        }
    }
}

/// `b(x) = ∫_∂Ω m∥(σ) n(σ) / |x - σ| dσ` for `x ∉ ∂Ω`.
pub fn b_field<F: Fn(&Frame) -> f64>(dom: &Domain, x: Vec2, trace: F, n_s: usize) -> Result<Vec2> {
    let loc = dom.locate(x);
    if loc.d > -1e-14 {
        return Err(MmtfError::invalid("b is evaluated inside the domain only"));
    }
    let len = dom.length();
    let n_s = n_s.max((8.0 * len / loc.d.abs()).ceil() as usize).min(1 << 18);
    match loc.proj {
        Some(fr0) => {
            let nodes = dom.nodes_from(n_s, fr0.s);
            let hs = len / n_s as f64;
            let alpha = 1.0 + fr0.kappa * loc.d;
            let b0 = trace(&nodes[0]);
            let a = layer::ring_integral(loc.d.abs(), alpha, len);
            let mut acc = [Neumaier::new(), Neumaier::new()];
            for (j, fr) in nodes.iter().enumerate().skip(1) {
                let c = (len / PI) * (PI * j as f64 * hs / len).sin();
                let k0 = 1.0 / (alpha * c * c + loc.d * loc.d).sqrt();
                let k = 1.0 / (x[0] - fr.p[0]).hypot(x[1] - fr.p[1]);
                let b = trace(fr);
                for d in 0..2 {
                    acc[d].add(hs * (b * fr.n[d] * k - b0 * nodes[0].n[d] * k0));
                }
            }
            Ok([acc[0].value() + a * b0 * nodes[0].n[0], acc[1].value() + a * b0 * nodes[0].n[1]])
        }
        None => {
            let hs = len / n_s as f64;
            let mut acc = [Neumaier::new(), Neumaier::new()];
            for fr in dom.nodes(n_s) {
                let k = 1.0 / (x[0] - fr.p[0]).hypot(x[1] - fr.p[1]);
                let b = trace(&fr);
                acc[0].add(hs * b * fr.n[0] * k);
                acc[1].add(hs * b * fr.n[1] * k);
            }
            Ok([acc[0].value(), acc[1].value()])
        }
    }
}

/// Potential at `x` of a unit density on the cell centred at `c`: exact
/// within six spacings, a two-term multipole beyond.
#[inline]
pub fn point_cell_kernel(x: Vec2, c: Vec2, h: f64) -> f64 {
    let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
    if d2 < 36.0 * h * h {
        cell_potential(x, c, h)
    } else {
        let d = d2.sqrt();
        h * h * (1.0 / d + h * h / (24.0 * d * d2))
    }
}

/// Potentials `Σ_c ρ_c ∫_cell 1/|x - y| dy` of cell charges at points.
pub fn bulk_potential(grid: &Grid, rho: &[Channels], pts: &[Vec2]) -> Vec<Channels> {
    let h = grid.h;
    let src: Vec<(Vec2, Channels)> = (0..grid.len())
        .filter(|&c| rho[c] != [0.0; 3])
        .map(|c| (grid.center(c), rho[c]))
        .collect();
    if src.is_empty() {
        return vec![[0.0; 3]; pts.len()];
    }
    pts.par_iter()
        .map(|&x| {
            let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new()];
            for &(c, r) in &src {
                let k = point_cell_kernel(x, c, h);
                for ch in 0..3 {
                    acc[ch].add(k * r[ch]);
                }
            }
            [acc[0].value(), acc[1].value(), acc[2].value()]
        })
        .collect()
}

/// Transpose of [`bulk_potential`]: cell values `Σ_q w_q K(x_q, c)` on `cells`.
pub fn bulk_potential_adjoint(grid: &Grid, cells: &[usize], pts: &[Vec2], w: &[Channels]) -> Vec<Channels> {
    let h = grid.h;
    cells
        .par_iter()
        .map(|&c| {
            let xc = grid.center(c);
            let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new()];
            for (x, wq) in pts.iter().zip(w) {
                let k = point_cell_kernel(*x, xc, h);
                for ch in 0..3 {
                    acc[ch].add(k * wq[ch]);
                }
            }
            [acc[0].value(), acc[1].value(), acc[2].value()]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ω-grid context shared by the decomposition, the layered path and the limits.

/// Operators of a field on `Ω`: stencils, trace, boundary nodes, kernel.
pub struct OmegaOps {
    pub grid: Grid,
    pub mask: Vec<bool>,
    pub diff: DiffOps,
    pub trace: TraceOp,
    pub kernel: GridKernel,
}

impl OmegaOps {
    /// `n_s` boundary nodes; the trace samples at offset `h/2` along `-n`.
    pub fn new(dom: &Domain, grid: Grid, mask: Vec<bool>, n_s: usize) -> Result<Self> {
        if !mask.iter().any(|&b| b) {
            return Err(MmtfError::invalid("empty mask"));
        }
        let diff = DiffOps::new(&grid, &mask);
        let trace = TraceOp::new(dom, &grid, &mask, n_s, 0.5 * grid.h)?;
        let kernel = GridKernel::new(grid.nx, grid.ny, grid.h);
        Ok(Self { grid, mask, diff, trace, kernel })
    }

    pub fn for_domain(dom: &Domain, n: usize, n_s: usize) -> Result<Self> {
        let grid = Grid::for_domain(dom, n, 0.0)?;
        let grid = Grid::new(grid.nx + 2, grid.ny + 2, grid.h, [grid.origin[0] - grid.h, grid.origin[1] - grid.h])?;
        let mask = crate::fields::mask_below(&grid, dom, 0.0);
        Self::new(dom, grid, mask, n_s)
    }

    pub fn check(&self, field: &Magnetization) -> Result<()> {
        if field.grid != self.grid || field.mask != self.mask {
            return Err(MmtfError::invalid("field grid or mask does not match the domain discretization"));
        }
        Ok(())
    }

    /// Trace of `m∥` and `m⊥·n` at the boundary nodes.
    pub fn traces(&self, field: &Magnetization) -> (Vec<f64>, Vec<f64>) {
        let mx = self.trace.apply(&field.component(0));
        let my = self.trace.apply(&field.component(1));
        let mz = self.trace.apply(&field.component(2));
        let mn = self.trace.frames.iter().enumerate().map(|(q, f)| mx[q] * f.n[0] + my[q] * f.n[1]).collect();
        (mz, mn)
    }

    /// Bulk charges `[div m⊥, ∂ₓm∥, ∂ᵧm∥]` per cell.
    pub fn bulk_channels(&self, field: &Magnetization) -> Vec<Channels> {
        let g = cell_gradients(field, &self.diff);
        (0..self.grid.len())
            .map(|c| if self.mask[c] { [g[c][0][0] + g[c][1][1], g[c][0][2], g[c][1][2]] } else { [0.0; 3] })
            .collect()
    }
}

/// Terms of the boundary decomposition of `V` and `Ṽ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrayDecomposition {
    pub v_oo: f64,
    pub v_bo: f64,
    pub vt_oo: f64,
    pub vt_bo: f64,
    /// `∫_∂Ω (m⊥·n)²`.
    pub bnd_norm_inplane: f64,
    /// `∫_∂Ω (1 - m∥²)`.
    pub bnd_defect: f64,
}

pub fn decomposed_stray(field: &Magnetization, ops: &OmegaOps, method: Method) -> Result<StrayDecomposition> {
    ops.check(field)?;
    let (v_oo, vt_oo) = stray_pair(field, None, &ops.kernel, method);
    let rho = ops.bulk_channels(field);
    let pts: Vec<Vec2> = ops.trace.frames.iter().map(|f| f.p).collect();
    let phi = bulk_potential(&ops.grid, &rho, &pts);
    let (mz, mn) = ops.traces(field);
    let w = ops.trace.weight;
    let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new(), Neumaier::new()];
    for (q, f) in ops.trace.frames.iter().enumerate() {
        acc[0].add(w * mn[q] * phi[q][0]);
        acc[1].add(w * mz[q] * (f.n[0] * phi[q][1] + f.n[1] * phi[q][2]));
        acc[2].add(w * mn[q] * mn[q]);
        acc[3].add(w * (1.0 - mz[q] * mz[q]));
    }
    Ok(StrayDecomposition {
        v_oo,
        v_bo: acc[0].value(),
        vt_oo,
        vt_bo: acc[1].value(),
        bnd_norm_inplane: acc[2].value(),
        bnd_defect: acc[3].value(),
    })
}

// ---------------------------------------------------------------------------
// Layered path.

/// How a field on Ω is continued into the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// `m̃(x) = m(x - 2 d(x) n(π(x)))`, reflecting about the discrete trace curve.
    Reflect,
    /// `m̃ = e₃` in the layer; requires an `e₃` trace.
    ConstantE3,
}

impl std::str::FromStr for Extension {
    type Err = MmtfError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflect" => Ok(Extension::Reflect),
            "constant_e3" | "constant" => Ok(Extension::ConstantE3),
            _ => Err(MmtfError::invalid(format!("unknown extension mode '{s}'"))),
        }
    }
}

/// Trace tolerance for clamped (`m∥ = ±1`) boundary data.
pub const CLAMP_TOL: f64 = 0.999;

/// The extended field evaluated in boundary coordinates.
pub struct LayerField<'a> {
    nodes: &'a LayerNodes,
    sampler: Sampler<'a>,
    ext: Extension,
    shift: f64,
}

impl<'a> LayerField<'a> {
    pub fn new(nodes: &'a LayerNodes, field: &'a Magnetization, ext: Extension) -> Self {
        Self { nodes, sampler: Sampler::new(field), ext, shift: 0.5 * field.grid.h }
    }

    /// `m̃` and its Cartesian gradient at layer node `i`, depth `t`.
    pub fn eval(&self, i: usize, t: f64) -> (Vec3, [Vec3; 2]) {
        match self.ext {
            Extension::ConstantE3 => ([0.0, 0.0, 1.0], [[0.0; 3]; 2]),
            Extension::Reflect => {
                let f = &self.nodes.frames[i];
                let d = self.nodes.eps * t;
                let back = self.shift + d;
                let y = [f.p[0] - back * f.n[0], f.p[1] - back * f.n[1]];
                let (m, g) = self.sampler.sample(y).unwrap_or(([0.0, 0.0, 1.0], [[0.0; 3]; 2]));
                let ratio = (1.0 - f.kappa * back) / (1.0 + f.kappa * d);
                let mut out = [[0.0; 3]; 2];
                for k in 0..3 {
                    let dt = ratio * (f.tau[0] * g[0][k] + f.tau[1] * g[1][k]);
                    let dn = -(f.n[0] * g[0][k] + f.n[1] * g[1][k]);
                    out[0][k] = f.tau[0] * dt + f.n[0] * dn;
                    out[1][k] = f.tau[1] * dt + f.n[1] * dn;
                }
                (m, out)
            }
        }
    }
}

/// Pieces of a layered evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayeredParts {
    pub local: LocalEnergies,
    pub v: f64,
    pub v_tilde: f64,
    pub d_eps: f64,
}

/// `G_ε` of the continuation of an Ω field, layer integrated in boundary coordinates.
pub fn layered_parts(
    field: &Magnetization,
    ops: &OmegaOps,
    dom: &Domain,
    profile: &Profile,
    eps: f64,
    ext: Extension,
    p: &LocalParams,
    opts: &LayerOpts,
) -> Result<LayeredParts> {
    ops.check(field)?;
    check_eps(dom, eps)?;
    opts.check()?;
    if ext == Extension::ConstantE3 {
        let (mz, _) = ops.traces(field);
        if mz.iter().any(|&z| z < CLAMP_TOL) {
            return Err(MmtfError::invalid("constant continuation needs an e3 trace"));
        }
    }
    let nodes = LayerNodes::new(dom, eps, ops.trace.frames.len());
    if (nodes.frames[1].s - ops.trace.frames[1].s).abs() > 1e-12 {
        return Err(MmtfError::invalid("boundary node sets disagree"));
    }
    let lf = LayerField::new(&nodes, field, ext);

    // Ω part.
    let mut local = local_energies(field, p, None);
    let (v_bb, vt_bb) = stray_pair(field, None, &ops.kernel, Method::Fft);
    let rho = ops.bulk_channels(field);

    // Layer local energies.
    let (tn, tw) = gauss_on(opts.n_edge.max(8), 0.0, 1.0);
    let lay: Vec<LocalEnergies> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut e = LocalEnergies::default();
            for (&t, &w) in tn.iter().zip(&tw) {
                let (m, g) = lf.eval(i, t);
                let eta = profile.eta(t);
                let jw = w * eps * nodes.jac(i, t) * nodes.hs;
                let d = local_density(m, g, p, eta * eta * jw, eta * jw);
                e.add(&d);
            }
            e
        })
        .collect();
    let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new(), Neumaier::new()];
    for e in &lay {
        acc[0].add(e.exchange);
        acc[1].add(e.dmi);
        acc[2].add(e.anisotropy);
        acc[3].add(e.zeeman);
    }
    local.add(&LocalEnergies {
        exchange: acc[0].value(),
        dmi: acc[1].value(),
        anisotropy: acc[2].value(),
        zeeman: acc[3].value(),
    });

    // Layer charges.
    let edge = EdgeFamily {
        nodes: &nodes,
        profile: *profile,
        quad: layer::gauss_pairs(opts.n_edge),
        charge: |i: usize, t: f64| {
            let (m, _) = lf.eval(i, t);
            let n = nodes.frames[i].n;
            [-(m[0] * n[0] + m[1] * n[1]), -m[2] * n[0], -m[2] * n[1]]
        },
    };
    let vol = VolumeFamily {
        nodes: &nodes,
        quad: layer::gauss_pairs(opts.n_vol),
        charge: |i: usize, t: f64| {
            let (_, g) = lf.eval(i, t);
            let e = profile.eta(t);
            [e * (g[0][0] + g[1][1]), e * g[0][2], e * g[1][2]]
        },
    };
    let has_vol = ext == Extension::Reflect;
    let ee = layer::interact(&nodes, &edge, &edge, opts.n_graded);
    let (ev, vv) = if has_vol {
        (
            layer::interact(&nodes, &edge, &vol, opts.n_graded),
            layer::interact(&nodes, &vol, &vol, opts.n_graded),
        )
    } else {
        ([0.0; 2], [0.0; 2])
    };

    // Bulk–layer cross terms.
    let cross = |fam: &dyn layer::Family| -> [f64; 2] {
        let tab = layer::Tabulated::new(&nodes, fam);
        let phi = bulk_potential(&ops.grid, &rho, &tab.pts);
        let mut a = [Neumaier::new(), Neumaier::new()];
        for (idx, (ph, b)) in phi.iter().zip(&tab.vals).enumerate() {
            let w = tab.weight[idx % tab.n_w] * nodes.hs;
            a[0].add(w * ph[0] * b[0]);
            a[1].add(w * (ph[1] * b[1] + ph[2] * b[2]));
        }
        [a[0].value(), a[1].value()]
    };
    let be = cross(&edge);
    let bv = if has_vol { cross(&vol) } else { [0.0; 2] };

    let v = v_bb + 2.0 * (be[0] + bv[0]) + ee[0] + 2.0 * ev[0] + vv[0];
    let v_tilde = vt_bb + 2.0 * (be[1] + bv[1]) + ee[1] + 2.0 * ev[1] + vv[1];
    let d = d_eps_on(&nodes, profile, opts);
    if !(v.is_finite() && v_tilde.is_finite()) {
        return Err(MmtfError::numerical("non-finite layered stray energy"));
    }
    Ok(LayeredParts { local, v, v_tilde, d_eps: d })
}

// ---------------------------------------------------------------------------
// Fourier form of the whole-plane stray energy.

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierStray {
    /// `-∫ |m̂⊥|² dk/(2π)²`.
    pub local: f64,
    /// `(δ/2) ∫ |k·m̂⊥|² / |k| dk/(2π)²`.
    pub bulk: f64,
    /// `-(δ/2) ∫ |k| |m̂∥|² dk/(2π)²`.
    pub surface: f64,
    pub total: f64,
    /// `-∫ |m⊥|² dx` in real space, for the Plancherel check.
    pub local_real: f64,
}

/// Fourier evaluation for a whole-plane field with far value `m0`; the grid is
/// zero-padded by the factor `pad`.
pub fn stray_fourier(field: &Magnetization, m0: Vec3, delta: f64, pad: usize) -> Result<FourierStray> {
    if m0[0] != 0.0 || m0[1] != 0.0 {
        return Err(MmtfError::invalid("far value must be ±e3"));
    }
    let g = field.grid;
    for c in field.masked() {
        let (i, j) = (c % g.nx, c / g.nx);
        let edge = i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny;
        let dev = (0..3).map(|k| (field.m[c][k] - m0[k]).abs()).fold(0.0, f64::max);
        if edge && dev > 1e-3 {
            return Err(MmtfError::invalid("field has not decayed to the far value at the grid edge"));
        }
    }
    let (px, py) = (pad.max(1) * g.nx, pad.max(1) * g.ny);
    let mut planner = FftPlanner::<f64>::new();
    let fx = planner.plan_fft_forward(px);
    let fy = planner.plan_fft_forward(py);
    let h2 = g.cell_area();
    let transform = |k: usize| -> Vec<Complex64> {
        let mut a = vec![Complex64::new(0.0, 0.0); px * py];
        for c in 0..g.len() {
            if field.mask[c] {
                let (i, j) = (c % g.nx, c / g.nx);
                a[j * px + i] = Complex64::new(h2 * (field.m[c][k] - m0[k]), 0.0);
            }
        }
        a.par_chunks_mut(px).for_each(|row| fx.process(row));
        let mut t = vec![Complex64::new(0.0, 0.0); px * py];
        for j in 0..py {
            for i in 0..px {
                t[i * py + j] = a[j * px + i];
            }
        }
        t.par_chunks_mut(py).for_each(|col| fy.process(col));
        t
    };
    let (ax, ay, az) = (transform(0), transform(1), transform(2));
    let dkx = 2.0 * PI / (px as f64 * g.h);
    let dky = 2.0 * PI / (py as f64 * g.h);
    let meas = dkx * dky / (4.0 * PI * PI);
    let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new()];
    for i in 0..px {
        let kx = if i <= px / 2 { i as f64 } else { i as f64 - px as f64 } * dkx;
        for j in 0..py {
            let ky = if j <= py / 2 { j as f64 } else { j as f64 - py as f64 } * dky;
            let idx = i * py + j;
            let (a, b, c) = (ax[idx], ay[idx], az[idx]);
            acc[0].add(a.norm_sqr() + b.norm_sqr());
            let k = kx.hypot(ky);
            if k > 0.0 {
                acc[1].add((a * kx + b * ky).norm_sqr() / k);
                acc[2].add(k * c.norm_sqr());
            }
        }
    }
    let local = -meas * acc[0].value();
    let bulk = 0.5 * delta * meas * acc[1].value();
    let surface = -0.5 * delta * meas * acc[2].value();
    let mut lr = Neumaier::new();
    for c in field.masked() {
        let m = field.m[c];
        lr.add(m[0] * m[0] + m[1] * m[1]);
    }
    Ok(FourierStray { local, bulk, surface, total: local + bulk + surface, local_real: -h2 * lr.value() })
}
