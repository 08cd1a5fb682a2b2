//! Projected gradient descent on `(S²)^N` for the discrete limit functionals
//! and for `G_ε` on the grid path.

use crate::energy::{
    bulk_potential, bulk_potential_adjoint, grid_charges, local_energies, GridCutoff, OmegaOps, CLAMP_TOL,
};
use crate::error::{MmtfError, Result};
use crate::fields::{dot3, normalize, DiffOps, Magnetization, Vec3};
use crate::geometry::Vec2;
use crate::kernel::{GridKernel, Method};
use crate::limits::{clamp_sign, Regime, RegimeParams, Strength};
use crate::quad::Neumaier;
use serde::{Deserialize, Serialize};

/// A differentiable energy of cell values.
pub trait Functional: Sync {
    /// Energy and Euclidean gradient with respect to every cell value.
    fn energy_and_gradient(&self, m: &Magnetization) -> Result<(f64, Vec<Vec3>)>;

    fn energy(&self, m: &Magnetization) -> Result<f64> {
        Ok(self.energy_and_gradient(m)?.0)
    }
}

/// `g - (g·m) m` per cell.
pub fn tangential(m: &Magnetization, g: &[Vec3]) -> Vec<Vec3> {
    m.m.iter()
        .zip(g)
        .map(|(v, gv)| {
            let s = dot3(*v, *gv);
            [gv[0] - s * v[0], gv[1] - s * v[1], gv[2] - s * v[2]]
        })
        .collect()
}

/// Cell-wise weights for the local terms.
struct LocalWeights<'a> {
    w2: Option<&'a [f64]>,
    w1: Option<&'a [f64]>,
}

/// Local energy (exchange, DMI, anisotropy, Zeeman) and its gradient.
fn local_part(m: &Magnetization, d: &DiffOps, lam: f64, alpha: f64, beta_z: f64, w: &LocalWeights) -> (f64, Vec<Vec3>) {
    let n = m.grid.len();
    let a = m.grid.cell_area();
    let comps: Vec<Vec<f64>> = (0..3).map(|k| m.component(k)).collect();
    let gx: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(0, f)).collect();
    let gy: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(1, f)).collect();
    let mut acc = Neumaier::new();
    let mut grad = vec![[0.0; 3]; n];
    // Adjoint sources for ∂ₓ and ∂ᵧ of each component.
    let mut sx = vec![vec![0.0; n]; 3];
    let mut sy = vec![vec![0.0; n]; 3];
    for c in m.masked() {
        let w2 = w.w2.map_or(1.0, |v| v[c]);
        let w1 = w.w1.map_or(1.0, |v| v[c]);
        let v = m.m[c];
        let ex = (0..3).map(|k| gx[k][c] * gx[k][c] + gy[k][c] * gy[k][c]).sum::<f64>();
        let div = gx[0][c] + gy[1][c];
        let dmi = v[2] * div - (v[0] * gx[2][c] + v[1] * gy[2][c]);
        let an = alpha * (v[0] * v[0] + v[1] * v[1]);
        acc.add(a * (w2 * (ex + lam * dmi + an) - 2.0 * beta_z * w1 * v[2]));
        let s2 = a * w2;
        for k in 0..3 {
            sx[k][c] += 2.0 * s2 * gx[k][c];
            sy[k][c] += 2.0 * s2 * gy[k][c];
        }
        sx[0][c] += s2 * lam * v[2];
        sy[1][c] += s2 * lam * v[2];
        sx[2][c] -= s2 * lam * v[0];
        sy[2][c] -= s2 * lam * v[1];
        grad[c][0] += s2 * (-lam * gx[2][c] + 2.0 * alpha * v[0]);
        grad[c][1] += s2 * (-lam * gy[2][c] + 2.0 * alpha * v[1]);
        grad[c][2] += s2 * lam * div - 2.0 * a * beta_z * w1;
    }
    for k in 0..3 {
        let mut out = vec![0.0; n];
        d.apply_adjoint_add(0, &sx[k], &mut out);
        d.apply_adjoint_add(1, &sy[k], &mut out);
        for c in 0..n {
            grad[c][k] += out[c];
        }
    }
    (acc.value(), grad)
}

/// One of the four limit functionals on a fixed Ω discretization.
pub struct LimitFunctional<'a> {
    pub ops: &'a OmegaOps,
    pub rp: RegimeParams,
    pub method: Method,
}

impl<'a> LimitFunctional<'a> {
    pub fn new(ops: &'a OmegaOps, rp: RegimeParams, method: Method) -> Self {
        Self { ops, rp, method }
    }
}

impl Functional for LimitFunctional<'_> {
    fn energy_and_gradient(&self, m: &Magnetization) -> Result<(f64, Vec<Vec3>)> {
        let ops = self.ops;
        ops.check(m)?;
        let rp = &self.rp;
        let n = m.grid.len();
        let (mut e, mut grad) =
            local_part(m, &ops.diff, rp.lambda, rp.alpha, rp.beta_z, &LocalWeights { w2: None, w1: None });
        let tr = &ops.trace;
        let (mz, mn) = ops.traces(m);
        if rp.regime.is_clamped() {
            clamp_sign(&mz)?;
        }
        match (rp.regime, rp.strength) {
            (Regime::Ks, Strength::Gamma(gam)) => {
                let mut acc = Neumaier::new();
                let mut sx = vec![0.0; mz.len()];
                let mut sy = vec![0.0; mz.len()];
                let mut sz = vec![0.0; mz.len()];
                for (q, f) in tr.frames.iter().enumerate() {
                    acc.add(tr.weight * (mn[q] * mn[q] - mz[q] * mz[q]));
                    let c = 2.0 * gam * tr.weight;
                    sx[q] = c * mn[q] * f.n[0];
                    sy[q] = c * mn[q] * f.n[1];
                    sz[q] = -c * mz[q];
                }
                e += gam * acc.value();
                for (k, s) in [sx, sy, sz].iter().enumerate() {
                    let mut out = vec![0.0; n];
                    tr.apply_adjoint_add(s, &mut out);
                    for c in 0..n {
                        grad[c][k] += out[c];
                    }
                }
            }
            (Regime::ClampedNonlocal, Strength::Nu(nu)) => {
                let rho = ops.bulk_channels(m);
                let q: Vec<f64> = rho.iter().map(|r| r[0]).collect();
                let gx: Vec<f64> = rho.iter().map(|r| r[1]).collect();
                let gy: Vec<f64> = rho.iter().map(|r| r[2]).collect();
                let kq = ops.kernel.convolve(&q, self.method);
                let (kx, ky) = ops.kernel.convolve_pair(&gx, &gy, self.method);
                let mut acc = Neumaier::new();
                for c in m.masked() {
                    acc.add(q[c] * kq[c] - gx[c] * kx[c] - gy[c] * ky[c]);
                }
                e += 0.5 * nu * acc.value();
                // b-term ν Σ_q w m∥(σ_q) n·Φ(σ_q).
                let pts: Vec<Vec2> = tr.frames.iter().map(|f| f.p).collect();
                let phi = bulk_potential(&ops.grid, &rho, &pts);
                let mut bacc = Neumaier::new();
                let mut sz = vec![0.0; mz.len()];
                let mut wch = vec![[0.0; 3]; mz.len()];
                for (qi, f) in tr.frames.iter().enumerate() {
                    let nphi = f.n[0] * phi[qi][1] + f.n[1] * phi[qi][2];
                    bacc.add(tr.weight * mz[qi] * nphi);
                    sz[qi] = nu * tr.weight * nphi;
                    wch[qi] = [0.0, nu * tr.weight * mz[qi] * f.n[0], nu * tr.weight * mz[qi] * f.n[1]];
                }
                e += nu * bacc.value();
                let cells: Vec<usize> = m.masked().collect();
                let adj = bulk_potential_adjoint(&ops.grid, &cells, &pts, &wch);
                let mut src = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
                for c in m.masked() {
                    src[0][c] = nu * kq[c];
                    src[1][c] = -nu * kx[c];
                    src[2][c] = -nu * ky[c];
                }
                for (i, &c) in cells.iter().enumerate() {
                    src[1][c] += adj[i][1];
                    src[2][c] += adj[i][2];
                }
                let mut g0 = vec![0.0; n];
                ops.diff.apply_adjoint_add(0, &src[0], &mut g0);
                let mut g1 = vec![0.0; n];
                ops.diff.apply_adjoint_add(1, &src[0], &mut g1);
                let mut g2 = vec![0.0; n];
                ops.diff.apply_adjoint_add(0, &src[1], &mut g2);
                ops.diff.apply_adjoint_add(1, &src[2], &mut g2);
                tr.apply_adjoint_add(&sz, &mut g2);
                for c in 0..n {
                    grad[c][0] += g0[c];
                    grad[c][1] += g1[c];
                    grad[c][2] += g2[c];
                }
            }
            _ => {}
        }
        if !e.is_finite() {
            return Err(MmtfError::numerical("non-finite energy"));
        }
        Ok((e, grad))
    }
}

/// `G_ε` with anisotropy and Zeeman on a grid covering `Ω_ε`.
pub struct GEpsFunctional<'a> {
    pub cut: &'a GridCutoff,
    pub kernel: &'a GridKernel,
    pub diff: DiffOps,
    pub rp: RegimeParams,
    pub method: Method,
}

impl<'a> GEpsFunctional<'a> {
    pub fn new(field: &Magnetization, cut: &'a GridCutoff, kernel: &'a GridKernel, rp: RegimeParams, method: Method) -> Result<Self> {
        crate::energy::check_layer_cells(field.grid.h, cut.eps)?;
        for (c, &e) in cut.eta.iter().enumerate() {
            if e > 0.0 && !field.mask[c] {
                return Err(MmtfError::invalid("field grid does not cover the layer"));
            }
        }
        Ok(Self { cut, kernel, diff: DiffOps::new(&field.grid, &field.mask), rp, method })
    }
}

impl Functional for GEpsFunctional<'_> {
    fn energy_and_gradient(&self, m: &Magnetization) -> Result<(f64, Vec<Vec3>)> {
        let rp = &self.rp;
        let cut = self.cut;
        let n = m.grid.len();
        let (mut e, mut grad) = local_part(
            m,
            &self.diff,
            rp.lambda,
            rp.alpha,
            rp.beta_z,
            &LocalWeights { w2: Some(&cut.eta2), w1: Some(&cut.eta) },
        );
        let cw = rp.stray_coeff();
        let (q, gx, gy) = grid_charges(m, Some(cut));
        let kq = self.kernel.convolve(&q, self.method);
        let (kx, ky) = self.kernel.convolve_pair(&gx, &gy, self.method);
        let mut acc = Neumaier::new();
        for c in m.masked() {
            acc.add(q[c] * kq[c] - gx[c] * kx[c] - gy[c] * ky[c]);
        }
        e += cw * acc.value();
        let mut s = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for c in m.masked() {
            let eta = cut.eta[c];
            let ge = cut.grad[c];
            let (p, px, py) = (2.0 * cw * kq[c], -2.0 * cw * kx[c], -2.0 * cw * ky[c]);
            s[0][c] = eta * p;
            s[1][c] = eta * px;
            s[2][c] = eta * py;
            grad[c][0] += ge[0] * p;
            grad[c][1] += ge[1] * p;
            grad[c][2] += ge[0] * px + ge[1] * py;
        }
        let mut g0 = vec![0.0; n];
        self.diff.apply_adjoint_add(0, &s[0], &mut g0);
        let mut g1 = vec![0.0; n];
        self.diff.apply_adjoint_add(1, &s[0], &mut g1);
        let mut g2 = vec![0.0; n];
        self.diff.apply_adjoint_add(0, &s[1], &mut g2);
        self.diff.apply_adjoint_add(1, &s[2], &mut g2);
        for c in 0..n {
            grad[c][0] += g0[c];
            grad[c][1] += g1[c];
            grad[c][2] += g2[c];
        }
        if !e.is_finite() {
            return Err(MmtfError::numerical("non-finite energy"));
        }
        Ok((e, grad))
    }
}

/// Local energy of a field with cutoff weights, for cross-checks.
pub fn weighted_local_total(m: &Magnetization, cut: &GridCutoff, rp: &RegimeParams) -> f64 {
    let l = local_energies(m, &rp.local(), Some((&cut.eta2, &cut.eta)));
    l.exchange + rp.lambda * l.dmi + l.anisotropy + l.zeeman
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Fixed step, capped at `h²/8`.
    Fixed(f64),
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryHandling {
    Free,
    /// Cells feeding the trace are frozen at `sign · e₃`.
    Clamped(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub step: StepRule,
    pub max_iter: usize,
    /// Stop when `‖g_tan / h²‖_{L²}` falls below this.
    pub tol: f64,
    pub boundary: BoundaryHandling,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { step: StepRule::Backtracking, max_iter: 2000, tol: 1e-6, boundary: BoundaryHandling::Free }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub field: Magnetization,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// The line search could not decrease the energy further.
    pub stalled: bool,
}

/// Projected gradient descent: `m ← normalize(m - τ g_tan / h²)`.
///
/// `clamp_cells` are frozen when the boundary handling is clamped. The start
/// must agree with the clamp there to within the trace tolerance; those cells
/// are then set exactly to the clamp value.
pub fn minimize(
    field0: &Magnetization,
    func: &dyn Functional,
    opts: &MinimizeOptions,
    clamp_cells: &[usize],
) -> Result<MinimizeResult> {
    if !(opts.tol > 0.0) {
        return Err(MmtfError::invalid("tolerance must be positive"));
    }
    let mut m = field0.clone();
    m.project_to_sphere()?;
    let mut frozen = vec![false; m.grid.len()];
    if let BoundaryHandling::Clamped(sign) = opts.boundary {
        let v = [0.0, 0.0, sign.signum()];
        for &c in clamp_cells {
            if m.mask[c] && m.m[c][2] * v[2] < CLAMP_TOL {
                return Err(MmtfError::InfeasibleBoundary(format!("start value {:?} at a clamped cell", m.m[c])));
            }
        }
        for &c in clamp_cells {
            if m.mask[c] {
                m.m[c] = v;
                frozen[c] = true;
            }
        }
    }
    let a = m.grid.cell_area();
    let cap = a / 8.0;
    let mut tau = match opts.step {
        StepRule::Fixed(t) => t.min(cap),
        StepRule::Backtracking => cap,
    };
    let (mut e, mut g) = func.energy_and_gradient(&m)?;
    let mut history = vec![e];
    let mut converged = false;
    let mut stalled = false;
    let mut gnorm = f64::INFINITY;
    let mut it = 0;
    let mut prev: Option<(Vec<Vec3>, Vec<Vec3>)> = None;
    while it < opts.max_iter {
        let mut gt = tangential(&m, &g);
        for (c, f) in frozen.iter().enumerate() {
            if *f || !m.mask[c] {
                gt[c] = [0.0; 3];
            }
        }
        let g2: f64 = gt.iter().map(|v| dot3(*v, *v)).sum::<f64>() / a;
        gnorm = g2.sqrt();
        if gnorm < opts.tol {
            converged = true;
            break;
        }
        let step = |t: f64| -> Magnetization {
            let mut next = m.clone();
            for c in 0..next.m.len() {
                if next.mask[c] && !frozen[c] {
                    let v = next.m[c];
                    next.m[c] = normalize([v[0] - t * gt[c][0] / a, v[1] - t * gt[c][1] / a, v[2] - t * gt[c][2] / a]);
                }
            }
            next
        };
        match opts.step {
            StepRule::Fixed(_) => {
                m = step(tau);
                (e, g) = func.energy_and_gradient(&m)?;
            }
            StepRule::Backtracking => {
                // Barzilai–Borwein trial step, then Armijo halving.
                let mut t = 2.0 * tau;
                if let Some((pm, pg)) = &prev {
                    let (mut ss, mut sy) = (0.0, 0.0);
                    for c in 0..m.m.len() {
                        for k in 0..3 {
                            let sk = m.m[c][k] - pm[c][k];
                            ss += sk * sk;
                            sy += sk * (gt[c][k] - pg[c][k]) / a;
                        }
                    }
                    let bb = ss / sy;
                    if bb.is_finite() && bb > 0.0 {
                        t = bb.min(1e6 * cap);
                    }
                }
                let mut accepted = None;
                for _ in 0..60 {
                    let trial = step(t);
                    let (et, gtr) = func.energy_and_gradient(&trial)?;
                    if !et.is_finite() {
                        return Err(MmtfError::numerical("energy became non-finite during line search"));
                    }
                    if et <= e - 1e-4 * t * g2 {
                        accepted = Some((trial, et, gtr));
                        break;
                    }
                    t *= 0.5;
                }
                match accepted {
                    Some((trial, et, gtr)) => {
                        tau = t;
                        prev = Some((std::mem::replace(&mut m, trial).m, gt));
                        e = et;
                        g = gtr;
                    }
                    None => {
                        stalled = true;
                        break;
                    }
                }
            }
        }
        history.push(e);
        it += 1;
    }
    Ok(MinimizeResult { field: m, history, iterations: it, grad_norm: gnorm, converged, stalled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::LocalParams;
    use crate::fields::{make_field, Init};
    use crate::geometry::{Domain, Shape};

    #[test]
    fn uniform_is_critical_for_dirichlet() {
        let dom = Domain::new(Shape::Disk { r: 1.0 }, 0.5).unwrap();
        let ops = OmegaOps::for_domain(&dom, 16, 128).unwrap();
        let f = make_field(ops.grid.clone(), ops.mask.clone(), &Init::Uniform { v: [0.0, 0.0, 1.0] }).unwrap();
        let rp = RegimeParams::new(Regime::Gj, LocalParams::default(), Regime::Gj.default_strength(), 0.1).unwrap();
        let lf = LimitFunctional::new(&ops, rp, Method::Fft);
        let (e, g) = lf.energy_and_gradient(&f).unwrap();
        assert_eq!(e, 0.0);
        assert!(tangential(&f, &g).iter().all(|v| dot3(*v, *v) == 0.0));
    }
}
