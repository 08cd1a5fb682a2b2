//! Regimes, scaling maps, the four limit functionals, recovery sequences and
//! the ε-sweep harness.

use crate::cutoff::Profile;
use crate::energy::{
    decomposed_stray, layered_parts, local_energies, stray_pair, EnergyBreakdown, Extension, LayerOpts, LocalEnergies,
    LocalParams, OmegaOps, StrayDecomposition, CLAMP_TOL,
};
use crate::error::{MmtfError, Result};
use crate::fields::{bilinear, mask_below, normalize, Grid, Magnetization, Vec3};
use crate::geometry::Domain;
use crate::kernel::Method;
use crate::quad::Neumaier;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `γ_ε → 0`: the stray field disappears from the limit.
    Gj,
    /// Fixed `γ`: boundary penalty `γ ∫_∂Ω ((m⊥·n)² - m∥²)`.
    Ks,
    /// `γ_ε → ∞`, `γ_ε = o(|ln ε|)`: clamped trace, local limit.
    ClampedLocal,
    /// `γ_ε = ν |ln ε|`: clamped trace with nonlocal terms.
    ClampedNonlocal,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Gj, Regime::Ks, Regime::ClampedLocal, Regime::ClampedNonlocal];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Gj => "gj",
            Regime::Ks => "ks",
            Regime::ClampedLocal => "clamped",
            Regime::ClampedNonlocal => "nonlocal",
        }
    }

    pub fn is_clamped(&self) -> bool {
        matches!(self, Regime::ClampedLocal | Regime::ClampedNonlocal)
    }

    pub fn default_strength(&self) -> Strength {
        match self {
            Regime::Gj => Strength::Schedule { c: 1.0, p: -1.0 },
            Regime::Ks => Strength::Gamma(1.0),
            Regime::ClampedLocal => Strength::Schedule { c: 1.0, p: 0.5 },
            Regime::ClampedNonlocal => Strength::Nu(1.0),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = MmtfError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gj" => Ok(Regime::Gj),
            "ks" => Ok(Regime::Ks),
            "clamped" | "clamped_local" | "clamped-local" => Ok(Regime::ClampedLocal),
            "nonlocal" | "clamped_nonlocal" | "clamped-nonlocal" => Ok(Regime::ClampedNonlocal),
            other => Err(MmtfError::invalid(format!("unknown regime '{other}'"))),
        }
    }
}

/// Stray-field strength: a fixed `γ`, a fixed `ν` (`γ_ε = ν|ln ε|`), or a
/// schedule `γ_ε = c |ln ε|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Gamma(f64),
    Nu(f64),
    Schedule { c: f64, p: f64 },
}

/// Reduced constants of one regime at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub regime: Regime,
    pub alpha: f64,
    pub beta_z: f64,
    pub lambda: f64,
    pub strength: Strength,
    pub eps: f64,
}

impl RegimeParams {
    pub fn new(regime: Regime, local: LocalParams, strength: Strength, eps: f64) -> Result<Self> {
        let ok = match (regime, strength) {
            (Regime::Ks, Strength::Gamma(g)) => g > 0.0,
            (Regime::ClampedNonlocal, Strength::Nu(n)) => n >= 0.0,
            (Regime::Gj, Strength::Schedule { c, p }) => c >= 0.0 && p < 0.0,
            (Regime::ClampedLocal, Strength::Schedule { c, p }) => c > 0.0 && p > 0.0 && p < 1.0,
            _ => false,
        };
        if !ok {
            return Err(MmtfError::invalid(format!("strength {strength:?} is inconsistent with regime {regime}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(MmtfError::invalid("ε must lie in (0, 1)"));
        }
        Ok(Self { regime, alpha: local.alpha, beta_z: local.beta_z, lambda: local.lambda, strength, eps })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.regime, self.local(), self.strength, eps)
    }

    pub fn local(&self) -> LocalParams {
        LocalParams { lambda: self.lambda, alpha: self.alpha, beta_z: self.beta_z }
    }

    pub fn log_eps(&self) -> f64 {
        self.eps.ln().abs()
    }

    pub fn gamma_eps(&self) -> f64 {
        let l = self.log_eps();
        match self.strength {
            Strength::Gamma(g) => g,
            Strength::Nu(n) => n * l,
            Strength::Schedule { c, p } => c * l.powf(p),
        }
    }

    /// `γ_ε / (2|ln ε|)`, exactly `ν/2` in the nonlocal regime.
    pub fn stray_coeff(&self) -> f64 {
        match self.strength {
            Strength::Nu(n) => 0.5 * n,
            _ => self.gamma_eps() / (2.0 * self.log_eps()),
        }
    }

    /// Additive offset making `G_ε + offset` converge: `γ_ε H¹(∂Ω)` for the
    /// clamped local regime, `(ν/2) D_ε` for the nonlocal one.
    pub fn offset(&self, boundary_length: f64, d_eps: f64) -> f64 {
        match (self.regime, self.strength) {
            (Regime::ClampedLocal, _) => self.gamma_eps() * boundary_length,
            (Regime::ClampedNonlocal, Strength::Nu(n)) => 0.5 * n * d_eps,
            _ => 0.0,
        }
    }
}

/// Physical constants `(Q, h, κ, δ)` of a reduced parameter set, with the
/// domain dilation `δ_ε/ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physical {
    pub q: f64,
    pub h: f64,
    pub kappa: f64,
    pub delta: f64,
    pub dilation: f64,
}

/// Reduced → physical.
pub fn scaling_forward(p: &RegimeParams) -> Result<Physical> {
    let (eps, l) = (p.eps, p.log_eps());
    let (s, delta) = match p.strength {
        Strength::Nu(n) => {
            if !(n > 0.0) {
                return Err(MmtfError::invalid("ν must be positive for the scaling map"));
            }
            (eps / (2.0 * PI * n), (2.0 * PI * eps * n).sqrt())
        }
        _ => {
            let g = p.gamma_eps();
            if !(g > 0.0) {
                return Err(MmtfError::invalid("γ must be positive for the scaling map"));
            }
            (eps * l / (2.0 * PI * g), (2.0 * PI * eps * g / l).sqrt())
        }
    };
    Ok(Physical { q: 1.0 + s * p.alpha, h: s * p.beta_z, kappa: s.sqrt() * p.lambda, delta, dilation: delta / eps })
}

/// Physical → reduced. Schedules are reported with the regime's default power.
pub fn scaling_inverse(regime: Regime, phys: &Physical, eps: f64) -> Result<RegimeParams> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MmtfError::invalid("ε must lie in (0, 1)"));
    }
    if !(phys.delta > 0.0) {
        return Err(MmtfError::invalid("δ must be positive"));
    }
    let l = eps.ln().abs();
    let (s, strength) = match regime {
        Regime::ClampedNonlocal => {
            let nu = phys.delta * phys.delta / (2.0 * PI * eps);
            (eps / (2.0 * PI * nu), Strength::Nu(nu))
        }
        _ => {
            let g = phys.delta * phys.delta * l / (2.0 * PI * eps);
            let st = match regime.default_strength() {
                Strength::Schedule { p, .. } => Strength::Schedule { c: g / l.powf(p), p },
                _ => Strength::Gamma(g),
            };
            (eps * l / (2.0 * PI * g), st)
        }
    };
    let local = LocalParams { alpha: (phys.q - 1.0) / s, beta_z: phys.h / s, lambda: phys.kappa / s.sqrt() };
    RegimeParams::new(regime, local, strength, eps)
}

/// Itemized limit energy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LimitBreakdown {
    pub exchange: f64,
    pub dmi: f64,
    pub anisotropy: f64,
    pub zeeman: f64,
    /// `γ ∫_∂Ω ((m⊥·n)² - m∥²)` (KS only).
    pub boundary: f64,
    /// `ν ∫_Ω b·∇m∥`.
    pub b_term: f64,
    /// `(ν/2)(V_ΩΩ - Ṽ_ΩΩ)`.
    pub nonlocal: f64,
    pub total: f64,
    pub total_with_fields: f64,
}

/// Sign of a clamped trace, or `InfeasibleBoundary`.
pub fn clamp_sign(mz_trace: &[f64]) -> Result<f64> {
    if mz_trace.iter().all(|&z| z >= CLAMP_TOL) {
        Ok(1.0)
    } else if mz_trace.iter().all(|&z| z <= -CLAMP_TOL) {
        Ok(-1.0)
    } else {
        let worst = mz_trace.iter().map(|z| z.abs()).fold(f64::INFINITY, f64::min);
        Err(MmtfError::InfeasibleBoundary(format!("trace |m∥| drops to {worst:.4} (< {CLAMP_TOL}) or changes sign")))
    }
}

/// The regime's limit functional of a field on Ω.
pub fn limit_energy(field: &Magnetization, ops: &OmegaOps, rp: &RegimeParams, method: Method) -> Result<LimitBreakdown> {
    ops.check(field)?;
    let (mz, mn) = ops.traces(field);
    if rp.regime.is_clamped() {
        clamp_sign(&mz)?;
    }
    let loc = local_energies(field, &rp.local(), None);
    let mut out = LimitBreakdown {
        exchange: loc.exchange,
        dmi: loc.dmi,
        anisotropy: loc.anisotropy,
        zeeman: loc.zeeman,
        ..Default::default()
    };
    match (rp.regime, rp.strength) {
        (Regime::Ks, Strength::Gamma(g)) => {
            let mut acc = Neumaier::new();
            for q in 0..mz.len() {
                acc.add(ops.trace.weight * (mn[q] * mn[q] - mz[q] * mz[q]));
            }
            out.boundary = g * acc.value();
        }
        (Regime::ClampedNonlocal, Strength::Nu(nu)) => {
            let dec = decomposed_stray(field, ops, method)?;
            out.b_term = nu * dec.vt_bo;
            out.nonlocal = 0.5 * nu * (dec.v_oo - dec.vt_oo);
        }
        _ => {}
    }
    out.total = out.exchange + rp.lambda * out.dmi + out.boundary + out.b_term + out.nonlocal;
    out.total_with_fields = out.total + out.anisotropy + out.zeeman;
    if !out.total_with_fields.is_finite() {
        return Err(MmtfError::numerical("non-finite limit energy"));
    }
    Ok(out)
}

/// Grid on which recovery sequences of `field` live: the field's grid padded
/// to cover `Ω_ε`.
pub fn layer_grid(field: &Magnetization, eps: f64) -> Result<(Grid, usize)> {
    let g = &field.grid;
    let pad = ((eps / g.h).ceil() as usize) + 2;
    let grid = Grid::new(
        g.nx + 2 * pad,
        g.ny + 2 * pad,
        g.h,
        [g.origin[0] - pad as f64 * g.h, g.origin[1] - pad as f64 * g.h],
    )?;
    Ok((grid, pad))
}

/// Continuation of an Ω field to `Ω_ε` on a padded grid.
///
/// `Reflect` samples `m` at `π(x) - (h/2 + d(x)) n`, the mirror image about
/// the curve on which traces are taken. `ConstantE3` fills the layer with the
/// clamped value `±e₃`.
pub fn recovery_sequence(
    field: &Magnetization,
    ops: &OmegaOps,
    dom: &Domain,
    eps: f64,
    ext: Extension,
) -> Result<Magnetization> {
    ops.check(field)?;
    crate::cutoff::check_eps(dom, eps)?;
    let fill = match ext {
        Extension::Reflect => {
            if eps >= 0.5 * dom.eps_bar() {
                return Err(MmtfError::invalid("reflection needs ε < ε̄/2"));
            }
            None
        }
        Extension::ConstantE3 => Some(clamp_sign(&ops.traces(field).0).map_err(|_| {
            MmtfError::invalid("constant continuation needs a constant ±e3 trace")
        })?),
    };
    let (grid, pad) = layer_grid(field, eps)?;
    let h = grid.h;
    // Cells whose subsamples can see the layer.
    let mask = mask_below(&grid, dom, eps + 0.75 * h);
    let old = &field.grid;
    let mut m = vec![[0.0; 3]; grid.len()];
    for c in 0..grid.len() {
        let (i, j) = (c % grid.nx, c / grid.nx);
        let inner = i >= pad && j >= pad && i - pad < old.nx && j - pad < old.ny;
        if inner {
            let oc = (j - pad) * old.nx + (i - pad);
            if field.mask[oc] {
                m[c] = field.m[oc];
                continue;
            }
        }
        if !mask[c] {
            continue;
        }
        m[c] = match fill {
            Some(sign) => [0.0, 0.0, sign],
            None => {
                let x = grid.center(c);
                let fr = dom.project(x)?;
                let d = dom.signed_distance(x).max(0.0);
                let y = [fr.p[0] - (0.5 * h + d) * fr.n[0], fr.p[1] - (0.5 * h + d) * fr.n[1]];
                let st = bilinear(old, &field.mask, y)
                    .ok_or_else(|| MmtfError::invalid("reflected point not covered by the field"))?;
                let mut v: Vec3 = [0.0; 3];
                for &(oc, w) in &st {
                    for k in 0..3 {
                        v[k] += w * field.m[oc][k];
                    }
                }
                normalize(v)
            }
        };
    }
    let mut mask = mask;
    for c in 0..grid.len() {
        if m[c] != [0.0; 3] {
            mask[c] = true;
        }
    }
    Ok(Magnetization { grid, mask, m })
}

/// One row of an ε-sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub g_eps: f64,
    pub offset: f64,
    pub limit: f64,
    pub gap: f64,
    pub r_perp: f64,
    pub r_par: f64,
    pub g_eps_with_fields: f64,
    pub limit_with_fields: f64,
    pub gap_with_fields: f64,
    pub d_eps: f64,
    pub breakdown: EnergyBreakdown,
}

pub const SWEEP_COLUMNS: [&str; 7] = ["eps", "G_eps", "offset", "limit", "gap", "R_perp", "R_par"];

impl SweepRow {
    pub fn csv_fields(&self) -> [f64; 7] {
        [self.eps, self.g_eps, self.offset, self.limit, self.gap, self.r_perp, self.r_par]
    }
}

/// Everything a sweep needs that does not depend on `ε`.
pub struct SweepContext<'a> {
    pub field: &'a Magnetization,
    pub ops: &'a OmegaOps,
    pub dom: &'a Domain,
    pub profile: Profile,
    pub ext: Extension,
    pub opts: LayerOpts,
    pub limit: LimitBreakdown,
    pub dec: StrayDecomposition,
}

impl<'a> SweepContext<'a> {
    pub fn new(
        field: &'a Magnetization,
        ops: &'a OmegaOps,
        dom: &'a Domain,
        profile: Profile,
        ext: Extension,
        rp: &RegimeParams,
        opts: LayerOpts,
    ) -> Result<Self> {
        if opts.n_s != ops.trace.frames.len() {
            return Err(MmtfError::invalid("layer and trace node counts differ"));
        }
        opts.check()?;
        let limit = limit_energy(field, ops, rp, Method::Fft)?;
        let dec = decomposed_stray(field, ops, Method::Fft)?;
        Ok(Self { field, ops, dom, profile, ext, opts, limit, dec })
    }

    /// `G_ε` of the recovery sequence, the regime offset, the gap to the limit
    /// and the decomposition residuals.
    pub fn row(&self, rp: &RegimeParams) -> Result<SweepRow> {
        let eps = rp.eps;
        let parts = layered_parts(self.field, self.ops, self.dom, &self.profile, eps, self.ext, &rp.local(), &self.opts)?;
        let b = EnergyBreakdown::assemble(eps, parts.local, &rp.local(), parts.v, parts.v_tilde, rp.stray_coeff());
        let length = self.ops.trace.weight * self.ops.trace.frames.len() as f64;
        let offset = rp.offset(length, parts.d_eps);
        let l = rp.log_eps();
        let d = &self.dec;
        let r_perp = parts.v - (d.v_oo - 2.0 * d.v_bo + 2.0 * l * d.bnd_norm_inplane);
        let r_par = parts.v_tilde - (d.vt_oo - 2.0 * d.vt_bo + parts.d_eps - 2.0 * l * d.bnd_defect);
        let g = b.total + offset;
        let gw = b.total_with_fields + offset;
        Ok(SweepRow {
            eps,
            g_eps: b.total,
            offset,
            limit: self.limit.total,
            gap: g - self.limit.total,
            r_perp,
            r_par,
            g_eps_with_fields: b.total_with_fields,
            limit_with_fields: self.limit.total_with_fields,
            gap_with_fields: gw - self.limit.total_with_fields,
            d_eps: parts.d_eps,
            breakdown: b,
        })
    }
}

/// Sweep over `eps_list` (decreasing), one row per value.
#[allow(clippy::too_many_arguments)]
pub fn gamma_sweep(
    field: &Magnetization,
    ops: &OmegaOps,
    dom: &Domain,
    profile: Profile,
    ext: Extension,
    rp: &RegimeParams,
    eps_list: &[f64],
    opts: LayerOpts,
) -> Result<Vec<SweepRow>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MmtfError::invalid("ε list must be strictly decreasing"));
    }
    if let (Extension::Reflect, Some(&e0)) = (ext, eps_list.first()) {
        if e0 >= 0.5 * dom.eps_bar() {
            return Err(MmtfError::invalid("reflection needs ε < ε̄/2"));
        }
    }
    let ctx = SweepContext::new(field, ops, dom, profile, ext, rp, opts)?;
    eps_list.iter().map(|&e| ctx.row(&rp.with_eps(e)?)).collect()
}

/// Dyadic list `2^-from, ..., 2^-to` in `steps` points.
pub fn dyadic(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(to >= from) || from <= 0.0 {
        return Err(MmtfError::invalid("dyadic range needs 0 < from <= to and steps >= 1"));
    }
    if steps == 1 {
        return Ok(vec![2f64.powf(-from)]);
    }
    Ok((0..steps).map(|k| 2f64.powf(-(from + (to - from) * k as f64 / (steps - 1) as f64))).collect())
}

/// `(V_ΩΩ, Ṽ_ΩΩ)` of a field on Ω.
pub fn omega_pair(field: &Magnetization, ops: &OmegaOps, method: Method) -> Result<(f64, f64)> {
    ops.check(field)?;
    Ok(stray_pair(field, None, &ops.kernel, method))
}

/// Local energies of a field on Ω, without cutoff.
pub fn omega_local(field: &Magnetization, p: &LocalParams) -> LocalEnergies {
    local_energies(field, p, None)
}
