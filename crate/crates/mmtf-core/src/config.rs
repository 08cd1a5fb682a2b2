//! Run configuration from flat `section.key = value` text.
//!
//! Lines starting with `#` or `;` and blank lines are ignored. Unknown keys
//! are rejected so typos surface as validation errors.
//!
//! | key | default |
//! |-----|---------|
//! | `seed` | 1 |
//! | `domain.kind` | `disk` (`disk`, `ellipse`, `star`) |
//! | `domain.a`, `domain.b` | 1, 1 (radius or semi-axes; star base radius `a`) |
//! | `domain.star_eps`, `domain.star_k` | 0.1, 5 |
//! | `domain.eps_cap` | 0.5 |
//! | `cutoff.kind`, `cutoff.a` | `linear`, 0.5 |
//! | `regime.kind` | `ks` (`gj`, `ks`, `clamped`, `nonlocal`) |
//! | `regime.alpha`, `regime.beta_z`, `regime.lambda` | 0, 0, 0 |
//! | `regime.gamma`, `regime.nu` | 1, 1 |
//! | `regime.schedule_c`, `regime.schedule_p` | 1, 0.5 |
//! | `regime.eps` | 0.01 |
//! | `grid.n` | 64 (cells across the bounding box of Ω) |
//! | `grid.n_s` | 1024 (boundary nodes) |
//! | `grid.method` | `fft` (`fft`, `direct`) |
//! | `sweep.eps_from`, `sweep.eps_to`, `sweep.eps_steps` | 2^-4, 2^-12, 5 (largest and smallest ε, geometric spacing) |
//! | `sweep.extension` | `auto` (`auto`, `reflect`, `constant_e3`; `auto` uses `constant_e3` for clamped regimes) |
//! | `field.init` | `tilted` (`uniform`, `tilted`, `skyrmion`, `hedgehog`, `random`, `random_smooth`) |
//! | `field.r0`, `field.polarity`, `field.chirality`, `field.cutoff` | 0.25, 1, 1, 0.8 |
//! | `field.theta0`, `field.grad_x`, `field.grad_y`, `field.psi` | 0.3, 0.4, 0.2, 0.7 |
//! | `minimize.max_iter`, `minimize.tol`, `minimize.step` | 2000, 1e-6, `backtracking` |
//! | `minimize.clamp` | `free` (`up`, `down`, `free`) |
//! | `minimize.functional` | `limit` (`limit`, `g_eps`) |
//! | `meanfield.beta`, `meanfield.j0`, `meanfield.delta` | 6, 1, 0.1 |
//! | `meanfield.shape` | `parabolic` (`parabolic`, `flat`, `quartic`) |
//! | `meanfield.x_max`, `meanfield.samples` | 4, 2001 |
//! | `asymptotics.probes` | `0,0;0.5,0` (points `x,y` separated by `;`) |

use crate::cutoff::Profile;
use crate::energy::{Extension, LocalParams};
use crate::error::{MmtfError, Result};
use crate::geometry::{Domain, Shape, Vec2};
use crate::kernel::Method;
use crate::limits::{Regime, RegimeParams, Strength};
use crate::meanfield::KernelShape;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

/// Parsed `key -> value` pairs in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini(pub BTreeMap<String, String>);

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| MmtfError::invalid(format!("config line {}: expected key = value", ln + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(MmtfError::invalid(format!("config line {}: empty key", ln + 1)));
            }
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Self(map))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSection {
    pub kind: String,
    pub a: f64,
    pub b: f64,
    pub star_eps: f64,
    pub star_k: u32,
    pub eps_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSection {
    pub kind: String,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSection {
    pub kind: String,
    pub alpha: f64,
    pub beta_z: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub nu: f64,
    pub schedule_c: f64,
    pub schedule_p: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub n: usize,
    pub n_s: usize,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub eps_from: f64,
    pub eps_to: f64,
    pub eps_steps: usize,
    pub extension: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSection {
    pub init: String,
    pub r0: f64,
    pub polarity: f64,
    pub chirality: f64,
    pub cutoff: f64,
    pub theta0: f64,
    pub grad_x: f64,
    pub grad_y: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSection {
    pub max_iter: usize,
    pub tol: f64,
    pub step: String,
    pub clamp: String,
    pub functional: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSection {
    pub beta: f64,
    pub j0: f64,
    pub delta: f64,
    pub shape: String,
    pub x_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsSection {
    pub probes: Vec<Vec2>,
}

/// Fully resolved configuration, embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub domain: DomainSection,
    pub cutoff: CutoffSection,
    pub regime: RegimeSection,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub field: FieldSection,
    pub minimize: MinimizeSection,
    pub meanfield: MeanFieldSection,
    pub asymptotics: AsymptoticsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            domain: DomainSection { kind: "disk".into(), a: 1.0, b: 1.0, star_eps: 0.1, star_k: 5, eps_cap: 0.5 },
            cutoff: CutoffSection { kind: "linear".into(), a: 0.5 },
            regime: RegimeSection {
                kind: "ks".into(),
                alpha: 0.0,
                beta_z: 0.0,
                lambda: 0.0,
                gamma: 1.0,
                nu: 1.0,
                schedule_c: 1.0,
                schedule_p: 0.5,
                eps: 0.01,
            },
            grid: GridSection { n: 64, n_s: 1024, method: "fft".into() },
            sweep: SweepSection { eps_from: 0.0625, eps_to: 1.0 / 4096.0, eps_steps: 5, extension: "auto".into() },
            field: FieldSection {
                init: "tilted".into(),
                r0: 0.25,
                polarity: 1.0,
                chirality: 1.0,
                cutoff: 0.8,
                theta0: 0.3,
                grad_x: 0.4,
                grad_y: 0.2,
                psi: 0.7,
            },
            minimize: MinimizeSection {
                max_iter: 2000,
                tol: 1e-6,
                step: "backtracking".into(),
                clamp: "free".into(),
                functional: "limit".into(),
            },
            meanfield: MeanFieldSection { beta: 6.0, j0: 1.0, delta: 0.1, shape: "parabolic".into(), x_max: 4.0, samples: 2001 },
            asymptotics: AsymptoticsSection { probes: vec![[0.0, 0.0], [0.5, 0.0]] },
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| MmtfError::invalid(format!("config key '{key}': cannot parse '{v}'")))
}

fn parse_points(v: &str) -> Result<Vec<Vec2>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            let xy: Vec<&str> = p.split(',').map(str::trim).collect();
            if xy.len() != 2 {
                return Err(MmtfError::invalid(format!("probe '{p}' is not of the form x,y")));
            }
            Ok([num("asymptotics.probes", xy[0])?, num("asymptotics.probes", xy[1])?])
        })
        .collect()
}

impl RunConfig {
    pub fn from_ini(ini: &Ini) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in &ini.0 {
            let v = v.as_str();
            match k.as_str() {
                "seed" => c.seed = num(k, v)?,
                "domain.kind" => c.domain.kind = v.into(),
                "domain.a" => c.domain.a = num(k, v)?,
                "domain.b" => c.domain.b = num(k, v)?,
                "domain.star_eps" => c.domain.star_eps = num(k, v)?,
                "domain.star_k" => c.domain.star_k = num(k, v)?,
                "domain.eps_cap" => c.domain.eps_cap = num(k, v)?,
                "cutoff.kind" => c.cutoff.kind = v.into(),
                "cutoff.a" => c.cutoff.a = num(k, v)?,
                "regime.kind" => c.regime.kind = v.into(),
                "regime.alpha" => c.regime.alpha = num(k, v)?,
                "regime.beta_z" => c.regime.beta_z = num(k, v)?,
                "regime.lambda" => c.regime.lambda = num(k, v)?,
                "regime.gamma" => c.regime.gamma = num(k, v)?,
                "regime.nu" => c.regime.nu = num(k, v)?,
                "regime.schedule_c" => c.regime.schedule_c = num(k, v)?,
                "regime.schedule_p" => c.regime.schedule_p = num(k, v)?,
                "regime.eps" => c.regime.eps = num(k, v)?,
                "grid.n" => c.grid.n = num(k, v)?,
                "grid.n_s" => c.grid.n_s = num(k, v)?,
                "grid.method" => c.grid.method = v.into(),
                "sweep.eps_from" => c.sweep.eps_from = num(k, v)?,
                "sweep.eps_to" => c.sweep.eps_to = num(k, v)?,
                "sweep.eps_steps" => c.sweep.eps_steps = num(k, v)?,
                "sweep.extension" => c.sweep.extension = v.into(),
                "field.init" => c.field.init = v.into(),
                "field.r0" => c.field.r0 = num(k, v)?,
                "field.polarity" => c.field.polarity = num(k, v)?,
                "field.chirality" => c.field.chirality = num(k, v)?,
                "field.cutoff" => c.field.cutoff = num(k, v)?,
                "field.theta0" => c.field.theta0 = num(k, v)?,
                "field.grad_x" => c.field.grad_x = num(k, v)?,
                "field.grad_y" => c.field.grad_y = num(k, v)?,
                "field.psi" => c.field.psi = num(k, v)?,
                "minimize.max_iter" => c.minimize.max_iter = num(k, v)?,
                "minimize.tol" => c.minimize.tol = num(k, v)?,
                "minimize.step" => c.minimize.step = v.into(),
                "minimize.clamp" => c.minimize.clamp = v.into(),
                "minimize.functional" => c.minimize.functional = v.into(),
                "meanfield.beta" => c.meanfield.beta = num(k, v)?,
                "meanfield.j0" => c.meanfield.j0 = num(k, v)?,
                "meanfield.delta" => c.meanfield.delta = num(k, v)?,
                "meanfield.shape" => c.meanfield.shape = v.into(),
                "meanfield.x_max" => c.meanfield.x_max = num(k, v)?,
                "meanfield.samples" => c.meanfield.samples = num(k, v)?,
                "asymptotics.probes" => c.asymptotics.probes = parse_points(v)?,
                other => return Err(MmtfError::invalid(format!("unknown config key '{other}'"))),
            }
        }
        Ok(c)
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = &self.domain;
        let shape = match d.kind.as_str() {
            "disk" => Shape::Disk { r: d.a },
            "ellipse" => Shape::Ellipse { a: d.a, b: d.b },
            "star" => Shape::Star { a: d.a, amp: d.star_eps, k: d.star_k },
            other => return Err(MmtfError::invalid(format!("unknown domain kind '{other}'"))),
        };
        Domain::new(shape, d.eps_cap)
    }

    pub fn profile(&self) -> Result<Profile> {
        Profile::parse(&self.cutoff.kind, Some(self.cutoff.a))
    }

    pub fn method(&self) -> Result<Method> {
        self.grid.method.parse()
    }

    pub fn extension(&self) -> Result<Extension> {
        self.sweep.extension.parse()
    }

    pub fn regime(&self) -> Result<Regime> {
        self.regime.kind.parse()
    }

    pub fn regime_params(&self) -> Result<RegimeParams> {
        let r = &self.regime;
        let regime = self.regime()?;
        let strength = match regime {
            Regime::Gj => Strength::Schedule { c: 1.0, p: -1.0 },
            Regime::Ks => Strength::Gamma(r.gamma),
            Regime::ClampedLocal => Strength::Schedule { c: r.schedule_c, p: r.schedule_p },
            Regime::ClampedNonlocal => Strength::Nu(r.nu),
        };
        let local = LocalParams { lambda: r.lambda, alpha: r.alpha, beta_z: r.beta_z };
        RegimeParams::new(regime, local, strength, r.eps)
    }

    pub fn kernel_shape(&self) -> Result<KernelShape> {
        match self.meanfield.shape.as_str() {
            "parabolic" => Ok(KernelShape::Parabolic),
            "flat" => Ok(KernelShape::Flat),
            "quartic" => Ok(KernelShape::Quartic),
            other => Err(MmtfError::invalid(format!("unknown kernel shape '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let ini = Ini::parse("# c\nseed = 9\n\nregime.kind = nonlocal\nregime.nu = 2.5\n; x\n").unwrap();
        let c = RunConfig::from_ini(&ini).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.regime().unwrap(), Regime::ClampedNonlocal);
        assert_eq!(c.regime.nu, 2.5);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(RunConfig::from_ini(&Ini::parse("grid.nx = 3").unwrap()).is_err());
        assert!(Ini::parse("no equals sign").is_err());
        assert!(RunConfig::from_ini(&Ini::parse("grid.n = many").unwrap()).is_err());
    }

    #[test]
    fn probes_parse() {
        assert_eq!(parse_points("0,0; 0.5 ,-1").unwrap(), vec![[0.0, 0.0], [0.5, -1.0]]);
    }
}
