//! Cutoff profiles `η` and the rescaled cutoff `η_ε(x) = η(d(x)/ε)`.

use crate::error::{MmtfError, Result};
use crate::geometry::{Domain, Vec2};
use serde::{Deserialize, Serialize};

/// A non-increasing profile equal to 1 on `(-∞, 0]` and 0 on `[1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Linear,
    Smoothstep,
    /// `η(t) = (1 - t)^a` on `[0, 1]`, with `0 < a <= 1`.
    PowerCusp { a: f64 },
}

impl Profile {
    pub fn parse(kind: &str, a: Option<f64>) -> Result<Self> {
        let p = match kind {
            "linear" => Profile::Linear,
            "smoothstep" => Profile::Smoothstep,
            "power_cusp" | "power-cusp" | "cusp" => Profile::PowerCusp { a: a.unwrap_or(0.5) },
            other => return Err(MmtfError::invalid(format!("unknown cutoff profile '{other}'"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let Profile::PowerCusp { a } = *self {
            if !(a > 0.0 && a <= 1.0) {
                return Err(MmtfError::invalid("power cusp exponent must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Linear => "linear",
            Profile::Smoothstep => "smoothstep",
            Profile::PowerCusp { .. } => "power_cusp",
        }
    }

    /// Declared integrability exponent `q` with `η' ∈ L^q`.
    ///
    /// Bounded derivatives lie in every `L^q`; the conventional value 2 is stored.
    pub fn q(&self) -> f64 {
        match *self {
            Profile::PowerCusp { a } if a < 1.0 => 0.5 * (1.0 + 1.0 / (1.0 - a)),
            _ => 2.0,
        }
    }

    pub fn eta(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        match *self {
            Profile::Linear => 1.0 - t,
            Profile::Smoothstep => 1.0 - t * t * (3.0 - 2.0 * t),
            Profile::PowerCusp { a } => (1.0 - t).powf(a),
        }
    }

    pub fn deta(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        match *self {
            Profile::Linear => -1.0,
            Profile::Smoothstep => -6.0 * t * (1.0 - t),
            Profile::PowerCusp { a } => -a * (1.0 - t).powf(a - 1.0),
        }
    }

    /// Inverse of `η` on `[0, 1]`: the depth `t` at which `η(t) = u`.
    pub fn inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Profile::Linear => 1.0 - u,
            Profile::PowerCusp { a } => 1.0 - u.powf(1.0 / a),
            Profile::Smoothstep => {
                // Cardano form of the root of 2t³ - 3t² + (1 - u) = 0 in [0, 1].
                let v = 1.0 - u;
                0.5 - ((1.0 - 2.0 * v).asin() / 3.0).sin()
            }
        }
    }

    /// `∫_0^1 η(t)^p t^k dt`, used for layer-volume bookkeeping in tests.
    pub fn moment(&self, p: i32, k: i32) -> f64 {
        crate::quad::integrate(|t| self.eta(t).powi(p) * t.powi(k), 0.0, 1.0, 1e-13).0
    }
}

/// Value and gradient of `η_ε` at `x`.
pub fn cutoff_eval(profile: &Profile, dom: &Domain, eps: f64, x: Vec2) -> Result<(f64, Vec2)> {
    check_eps(dom, eps)?;
    let loc = dom.locate(x);
    if loc.d <= 0.0 {
        return Ok((1.0, [0.0, 0.0]));
    }
    if loc.d >= eps {
        return Ok((0.0, [0.0, 0.0]));
    }
    let fr = loc.proj.ok_or(MmtfError::OutsideTube { dist: loc.d, reach: dom.eps_bar() })?;
    let t = loc.d / eps;
    let g = profile.deta(t) / eps;
    Ok((profile.eta(t), [g * fr.n[0], g * fr.n[1]]))
}

pub fn check_eps(dom: &Domain, eps: f64) -> Result<()> {
    if !(eps > 0.0) || eps >= dom.eps_bar() {
        if eps >= dom.eps_bar() {
            return Err(MmtfError::OutsideTube { dist: eps, reach: dom.eps_bar() });
        }
        return Err(MmtfError::invalid(format!("layer width {eps:e} must be positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        for p in [Profile::Linear, Profile::Smoothstep, Profile::PowerCusp { a: 0.5 }] {
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                assert!((p.inverse(p.eta(t)) - t).abs() < 1e-12, "{p:?} {t}");
            }
        }
    }

    #[test]
    fn cusp_q_below_threshold() {
        let p = Profile::PowerCusp { a: 0.5 };
        assert!(p.q() * 0.5 < 1.0 && p.q() > 1.0);
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(Profile::parse("increasing-ramp", None).is_err());
        assert!(Profile::parse("power_cusp", Some(1.5)).is_err());
    }
}
