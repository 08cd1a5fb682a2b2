//! Mean-field closure of a Heisenberg model with a Kac interaction, its
//! effective potential, and the one-dimensional edge profile.
//!
//! `β` below is the inverse temperature. The interaction is
//! `J_δ(r) = δ⁻² c_ψ ψ(r/δ)` with mass `J₀`.

use crate::error::{MmtfError, Result};
use crate::fields::Vec3;
use crate::quad::{gauss_on, integrate, Neumaier};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `βJ₀` at which the zero state loses stability: `f'(0) = 3`.
pub const CRITICAL_PRODUCT: f64 = 3.0;

/// Radial interaction shape `ψ` supported in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `(1 - r²)₊`
    Parabolic,
    /// `1` on `[0, 1)`
    Flat,
    /// `(1 - r²)²₊`
    Quartic,
}

impl KernelShape {
    pub fn psi(&self, r: f64) -> f64 {
        if !(0.0..1.0).contains(&r) {
            return 0.0;
        }
        match self {
            KernelShape::Parabolic => 1.0 - r * r,
            KernelShape::Flat => 1.0,
            KernelShape::Quartic => (1.0 - r * r).powi(2),
        }
    }

    /// `∫₀¹ r^k ψ(r) dr`.
    pub fn moment(&self, k: i32) -> f64 {
        integrate(|r| r.powi(k) * self.psi(r), 0.0, 1.0, 1e-15).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    pub beta: f64,
    pub j0: f64,
    pub delta: f64,
    pub shape: KernelShape,
}

impl MeanFieldParams {
    pub fn new(beta: f64, j0: f64, delta: f64) -> Result<Self> {
        Self::with_shape(beta, j0, delta, KernelShape::Parabolic)
    }

    pub fn with_shape(beta: f64, j0: f64, delta: f64, shape: KernelShape) -> Result<Self> {
        if !(beta > 0.0 && j0 > 0.0 && delta > 0.0) || !(beta.is_finite() && j0.is_finite() && delta.is_finite()) {
            return Err(MmtfError::invalid("β, J₀ and δ must be positive and finite"));
        }
        Ok(Self { beta, j0, delta, shape })
    }

    /// Normalization `c_ψ` with `∫ 2πr J_δ(r) dr = J₀`.
    pub fn c_psi(&self) -> f64 {
        self.j0 / (2.0 * PI * self.shape.moment(1))
    }

    pub fn j_delta(&self, r: f64) -> f64 {
        self.c_psi() * self.shape.psi(r / self.delta) / (self.delta * self.delta)
    }

    /// `g_δ = (π/4) ∫ r³ J_δ(r) dr`.
    pub fn g_delta(&self) -> f64 {
        0.25 * PI * self.c_psi() * self.delta * self.delta * self.shape.moment(3)
    }

    pub fn supercritical(&self) -> bool {
        self.beta * self.j0 > CRITICAL_PRODUCT
    }
}

/// Langevin function `coth f - 1/f`.
pub fn langevin(f: f64) -> f64 {
    let a = f.abs();
    if a < 1e-3 {
        let f2 = f * f;
        f * (1.0 / 3.0 - f2 / 45.0 + 2.0 * f2 * f2 / 945.0)
    } else {
        1.0 / f.tanh() - 1.0 / f
    }
}

fn langevin_prime(f: f64) -> f64 {
    if f.abs() < 1e-3 {
        let f2 = f * f;
        1.0 / 3.0 - f2 / 15.0 + 2.0 * f2 * f2 / 189.0
    } else if f.abs() > 350.0 {
        1.0 / (f * f)
    } else {
        1.0 / (f * f) - 1.0 / f.sinh().powi(2)
    }
}

/// Inverse Langevin function `f(s)` on `[0, 1)`.
pub fn langevin_inv(s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(MmtfError::invalid(format!("langevin_inv needs 0 <= s < 1, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0 / (1.0 - s));
    let mut f = if s < 0.5 { 3.0 * s + 1.8 * s * s * s } else { 1.0 / (1.0 - s) };
    f = f.clamp(lo, hi);
    for _ in 0..200 {
        let r = langevin(f) - s;
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = f;
        } else {
            lo = f;
        }
        let step = r / langevin_prime(f);
        let mut next = f - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - f).abs() <= 1e-16 * f.max(1.0) {
            f = next;
            break;
        }
        f = next;
    }
    Ok(f)
}

/// `ln(sinh f / f)` without overflow or cancellation.
fn ln_sinhc(f: f64) -> f64 {
    if f < 1e-4 {
        let f2 = f * f;
        f2 / 6.0 - f2 * f2 / 180.0
    } else if f < 20.0 {
        (f.sinh() / f).ln()
    } else {
        f - (2.0 * f).ln() + (-(-2.0 * f).exp()).ln_1p()
    }
}

/// Effective potential `U_β(s)`.
pub fn potential_u(p: &MeanFieldParams, s: f64) -> Result<f64> {
    let f = langevin_inv(s)?;
    Ok((-ln_sinhc(f) - (4.0 * PI).ln() + s * f) / p.beta - 0.5 * p.j0 * s * s)
}

/// `U_β'(s) = f(s)/β - J₀ s`.
pub fn potential_du(p: &MeanFieldParams, s: f64) -> Result<f64> {
    Ok(langevin_inv(s)? / p.beta - p.j0 * s)
}

/// Saturation `s₀(β)`: the global minimizer of `U_β`.
pub fn saturation_s0(p: &MeanFieldParams) -> f64 {
    let k = p.beta * p.j0;
    if k <= CRITICAL_PRODUCT {
        return 0.0;
    }
    // f(s)/s increases from 3 to ∞, so f(s) = k s has one root in (0, 1).
    let h = |s: f64| langevin_inv(s).map(|f| f - k * s).unwrap_or(f64::INFINITY);
    let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-16);
    lo = lo.max(1e-300);
    if h(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `U(φ) - U(s₀)`, as `-∫_φ^{s₀} U'(s) ds` near `s₀` to avoid cancellation.
pub fn well_depth(p: &MeanFieldParams, s0: f64, phi: f64) -> f64 {
    if phi == s0 {
        return 0.0;
    }
    let (a, b) = if phi < s0 { (phi, s0) } else { (s0, phi) };
    let du = |x: f64| potential_du(p, x).unwrap_or(f64::NAN);
    let v = if b - a < 0.05 {
        let (x, w) = gauss_on(24, a, b);
        let mut acc = Neumaier::new();
        for (x, w) in x.iter().zip(&w) {
            acc.add(w * du(*x));
        }
        acc.value()
    } else {
        return potential_u(p, phi).unwrap_or(f64::NAN) - potential_u(p, s0).unwrap_or(f64::NAN);
    };
    if phi < s0 {
        -v
    } else {
        v
    }
}

/// Lagrange multipliers of the closure `ρ̄ = exp(β(μ + λ·m))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Closure {
    pub mu: f64,
    pub lambda: Vec3,
    /// `e^{βμ}`.
    pub weight: f64,
}

pub fn closure_multipliers(mbar: Vec3, beta: f64) -> Result<Closure> {
    if !(beta > 0.0) {
        return Err(MmtfError::invalid("β must be positive"));
    }
    let s = (mbar[0] * mbar[0] + mbar[1] * mbar[1] + mbar[2] * mbar[2]).sqrt();
    if s >= 1.0 {
        return Err(MmtfError::invalid("|m̄| must be below 1"));
    }
    let f = langevin_inv(s)?;
    let lambda = if s > 0.0 { [mbar[0] * f / (beta * s), mbar[1] * f / (beta * s), mbar[2] * f / (beta * s)] } else { [0.0; 3] };
    // 4π e^{βμ} sinh(f)/f = 1.
    let log_w = -(4.0 * PI).ln() - ln_sinhc(f);
    Ok(Closure { mu: log_w / beta, lambda, weight: log_w.exp() })
}

/// Half-line edge profile `φ(x)` rising from 0 to `s₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallProfile {
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub u: Vec3,
    pub s0: f64,
    pub g: f64,
    /// `2 ∫₀^{s₀} √(g (U(φ) - U(s₀))) dφ`.
    pub minimal_energy: f64,
}

/// Solves `x = ∫₀^{φ(x)} √(g / (U(φ) - U(s₀))) dφ` at `n` equally spaced
/// points of `[0, x_max]`.
pub fn wall_profile(p: &MeanFieldParams, x_max: f64, n: usize, u: Vec3) -> Result<WallProfile> {
    if !p.supercritical() {
        return Err(MmtfError::invalid("no edge profile below the critical temperature product βJ₀ = 3"));
    }
    if !(x_max > 0.0) || n < 2 {
        return Err(MmtfError::invalid("wall profile needs x_max > 0 and at least 2 samples"));
    }
    let s0 = saturation_s0(p);
    let g = p.g_delta();
    let speed = |phi: f64| (well_depth(p, s0, phi).max(0.0) / g).sqrt();
    let minimal_energy = 2.0 * integrate(|phi| (g * well_depth(p, s0, phi).max(0.0)).sqrt(), 0.0, s0, 1e-13 * s0).0;

    // Integrate the first-order equation φ' = √((U(φ) - U(s₀))/g), equivalent
    // to the quadrature identity, with classical RK4 on a fine substep.
    let dx = x_max / (n - 1) as f64;
    let sub = 8;
    let hsub = dx / sub as f64;
    let mut phi = 0.0f64;
    let mut xs = Vec::with_capacity(n);
    let mut ph = Vec::with_capacity(n);
    xs.push(0.0);
    ph.push(0.0);
    for k in 1..n {
        for _ in 0..sub {
            let cl = |v: f64| v.clamp(0.0, s0);
            let k1 = speed(cl(phi));
            let k2 = speed(cl(phi + 0.5 * hsub * k1));
            let k3 = speed(cl(phi + 0.5 * hsub * k2));
            let k4 = speed(cl(phi + hsub * k3));
            phi = cl(phi + hsub * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
        }
        xs.push(k as f64 * dx);
        ph.push(phi);
    }
    let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if !(nu > 0.0) {
        return Err(MmtfError::invalid("direction u must be nonzero"));
    }
    Ok(WallProfile { x: xs, phi: ph, u: [u[0] / nu, u[1] / nu, u[2] / nu], s0, g, minimal_energy })
}

impl WallProfile {
    /// `x(φ)` from the quadrature identity.
    pub fn position_of(&self, p: &MeanFieldParams, phi: f64) -> f64 {
        let s0 = self.s0;
        integrate(|v| (self.g / well_depth(p, s0, v).max(1e-300)).sqrt(), 0.0, phi.min(s0), 1e-12).0
    }

    /// `∫₀^X (g |m'|² + U(|m|) - U(s₀)) dx` of the sampled vector profile
    /// `m = φ u`, by centred differences and Simpson-weighted trapezoid sums.
    pub fn direct_energy(&self, p: &MeanFieldParams) -> f64 {
        let n = self.x.len();
        let dx = self.x[1] - self.x[0];
        let m: Vec<Vec3> = self.phi.iter().map(|&f| [f * self.u[0], f * self.u[1], f * self.u[2]]).collect();
        let mut acc = Neumaier::new();
        for k in 0..n {
            let d = if k == 0 {
                (-3.0 * m[0][0] + 4.0 * m[1][0] - m[2][0], -3.0 * m[0][1] + 4.0 * m[1][1] - m[2][1], -3.0 * m[0][2] + 4.0 * m[1][2] - m[2][2])
            } else if k == n - 1 {
                (3.0 * m[k][0] - 4.0 * m[k - 1][0] + m[k - 2][0], 3.0 * m[k][1] - 4.0 * m[k - 1][1] + m[k - 2][1], 3.0 * m[k][2] - 4.0 * m[k - 1][2] + m[k - 2][2])
            } else {
                (m[k + 1][0] - m[k - 1][0], m[k + 1][1] - m[k - 1][1], m[k + 1][2] - m[k - 1][2])
            };
            let d2 = (d.0 * d.0 + d.1 * d.1 + d.2 * d.2) / (4.0 * dx * dx);
            let mag = self.phi[k];
            let e = self.g * d2 + well_depth(p, self.s0, mag);
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc.add(w * dx * e);
        }
        acc.value()
    }
}

/// `ρ(β) = ln((1 + 2β + √(1 + 4β)) / (2β))`.
pub fn rho_closed_form(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(MmtfError::invalid("ρ(β) needs β > 0"));
    }
    Ok(((1.0 + 2.0 * b + (1.0 + 4.0 * b).sqrt()) / (2.0 * b)).ln())
}

/// Entropy `ln(f/(4π sinh f)) + s f` of the closure at `|m̄| = s`.
pub fn entropy(s: f64) -> Result<f64> {
    let f = langevin_inv(s)?;
    Ok(-ln_sinhc(f) - (4.0 * PI).ln() + s * f)
}

/// `(β, s₀)` over `steps` inverse temperatures in `[from, to]`.
pub fn bifurcation(j0: f64, delta: f64, from: f64, to: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    if steps < 2 || !(from > 0.0 && to > from) {
        return Err(MmtfError::invalid("bifurcation sweep needs 0 < from < to and at least 2 steps"));
    }
    (0..steps)
        .map(|k| {
            let b = from + (to - from) * k as f64 / (steps - 1) as f64;
            let p = MeanFieldParams::new(b, j0, delta)?;
            Ok((b, saturation_s0(&p)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langevin_inverse_small_and_large() {
        assert_eq!(langevin_inv(0.0).unwrap(), 0.0);
        for s in [1e-9, 1e-4, 0.3, 0.9, 0.999_999] {
            let f = langevin_inv(s).unwrap();
            assert!((langevin(f) - s).abs() < 1e-13, "{s}");
        }
        assert!(langevin_inv(1.0).is_err());
        assert!(langevin_inv(-0.1).is_err());
    }

    #[test]
    fn parabolic_gradient_coefficient() {
        let p = MeanFieldParams::new(4.0, 1.5, 0.2).unwrap();
        assert!((p.g_delta() - 1.5 * 0.04 / 24.0).abs() < 1e-14);
        assert!((p.c_psi() - 2.0 * 1.5 / PI).abs() < 1e-14);
    }

    #[test]
    fn u_at_zero() {
        let p = MeanFieldParams::new(2.0, 1.0, 0.1).unwrap();
        assert!((potential_u(&p, 0.0).unwrap() + (4.0 * PI).ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rho_at_one() {
        assert!((rho_closed_form(1.0).unwrap() - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
        assert!(rho_closed_form(0.0).is_err());
    }
}
