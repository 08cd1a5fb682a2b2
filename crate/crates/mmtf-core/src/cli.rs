//! Command-line front end: `mmtf <command> [--config file] [flags]`.
//!
//! Every command writes its artifacts plus `run_config.json` (the resolved
//! configuration) under `--out-dir`. Exit codes: 0 success, 2 validation
//! error, 3 numerical or resolution failure.

use crate::config::{Ini, RunConfig};
use crate::cutoff::Profile;
use crate::energy::{d_eps, f_eps, Extension, LayerOpts, OmegaOps};
use crate::error::{MmtfError, Result};
use crate::fields::{fmt17, make_field, read_csv, write_csv, Init, Magnetization};
use crate::geometry::Domain;
use crate::kernel::GridKernel;
use crate::limits::{gamma_sweep, limit_energy, Regime, SWEEP_COLUMNS};
use crate::meanfield::{bifurcation, saturation_s0, wall_profile, MeanFieldParams};
use crate::minimize::{minimize, BoundaryHandling, GEpsFunctional, LimitFunctional, MinimizeOptions, StepRule};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "mmtf", about = "Boundary-layer asymptotics of thin-film micromagnetic energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `section.key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving every artifact.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra `section.key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geometry diagnostics and boundary nodes.
    Domain {
        #[command(flatten)]
        common: Common,
    },
    /// Energy breakdown of one field at one ε (JSON).
    Energy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Gap to the limit functional over a dyadic ε list (CSV).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        regime: Option<String>,
        /// Largest ε of the list.
        #[arg(long)]
        eps_from: Option<f64>,
        /// Smallest ε of the list.
        #[arg(long)]
        eps_to: Option<f64>,
        #[arg(long)]
        eps_steps: Option<usize>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// `D_ε` and `f_ε` at probe points over the ε list (CSV).
    Asymptotics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps_from: Option<f64>,
        #[arg(long)]
        eps_to: Option<f64>,
        #[arg(long)]
        eps_steps: Option<usize>,
        #[arg(long, default_value = "asymptotics.csv")]
        out: PathBuf,
    },
    /// Projected gradient descent on a limit functional or on `G_ε`.
    Minimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// `up`, `down` or `free`.
        #[arg(long)]
        clamp: Option<String>,
        /// `skyrmion`, `uniform`, `random` (or any `field.init` value).
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, default_value = "field.csv")]
        out: PathBuf,
    },
    /// Edge profile or bifurcation sweep of the mean-field model (CSV).
    Meanfield {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        j0: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value = "profile.csv")]
        profile_out: PathBuf,
        #[arg(long)]
        beta_from: Option<f64>,
        #[arg(long)]
        beta_to: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    apply_thread_cap();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn apply_thread_cap() {
    if let Some(n) = std::env::var("MMTF_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn resolve(common: &Common, overrides: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut ini = match &common.config {
        Some(p) => Ini::parse(&fs::read_to_string(p)?)?,
        None => Ini::default(),
    };
    if let Some(s) = common.seed {
        ini.set("seed", s);
    }
    for (k, v) in overrides {
        if let Some(v) = v {
            ini.set(k, v);
        }
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| MmtfError::invalid(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        ini.set(k.trim(), v.trim());
    }
    RunConfig::from_ini(&ini)
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|x| x.to_string())
}

struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    fn json(&self, name: &Path, v: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v).map_err(|e| MmtfError::invalid(e.to_string()))?;
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }

    fn csv(&self, name: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(self.path(name))?);
        writeln!(out, "{}", header.join(","))?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|&x| fmt17(x)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    fn field(&self, name: &Path, f: &Magnetization) -> Result<()> {
        write_csv(f, fs::File::create(self.path(name))?, None)
    }

    fn config(&self, command: &str, cfg: &RunConfig) -> Result<()> {
        self.json(Path::new("run_config.json"), &json!({ "command": command, "config": cfg }))
    }
}

/// Initial field from the `field.*` section on the given grid and mask.
pub fn init_field(cfg: &RunConfig, ops_grid: crate::fields::Grid, mask: Vec<bool>) -> Result<Magnetization> {
    let f = &cfg.field;
    let init = match f.init.as_str() {
        "uniform" => Init::Uniform { v: [0.0, 0.0, f.polarity.signum()] },
        "tilted" => Init::Tilted { theta0: f.theta0, grad: [f.grad_x, f.grad_y], psi: f.psi },
        "skyrmion" => Init::NeelSkyrmion {
            center: [0.0, 0.0],
            r0: f.r0,
            polarity: f.polarity,
            chirality: f.chirality,
            cutoff: (f.cutoff > 0.0).then_some(f.cutoff),
        },
        "hedgehog" => Init::Hedgehog { center: [0.0, 0.0] },
        "random" => Init::Random { seed: cfg.seed },
        "random_smooth" => Init::RandomSmooth { seed: cfg.seed, modes: 3, amplitude: 0.8 },
        other => return Err(MmtfError::invalid(format!("unknown field init '{other}'"))),
    };
    make_field(ops_grid, mask, &init)
}

/// Field on Ω either read from `path` or built from the config.
fn omega_field(cfg: &RunConfig, dom: &Domain, path: Option<&Path>) -> Result<(Magnetization, OmegaOps)> {
    match path {
        Some(p) => {
            let f = read_csv(fs::File::open(p)?)?;
            let ops = OmegaOps::new(dom, f.grid.clone(), f.mask.clone(), cfg.grid.n_s)?;
            Ok((f, ops))
        }
        None => {
            let ops = OmegaOps::for_domain(dom, cfg.grid.n, cfg.grid.n_s)?;
            let f = init_field(cfg, ops.grid.clone(), ops.mask.clone())?;
            Ok((f, ops))
        }
    }
}

fn extension_for(cfg: &RunConfig, regime: Regime) -> Result<Extension> {
    if cfg.sweep.extension == "auto" {
        Ok(if regime.is_clamped() { Extension::ConstantE3 } else { Extension::Reflect })
    } else {
        cfg.extension()
    }
}

/// Geometric list from `eps_from` down to `eps_to` in `steps` points.
fn eps_list(cfg: &RunConfig) -> Result<Vec<f64>> {
    let sw = &cfg.sweep;
    if !(sw.eps_from > 0.0 && sw.eps_to > 0.0 && sw.eps_from < 1.0 && sw.eps_to <= sw.eps_from) {
        return Err(MmtfError::invalid("ε list needs 1 > eps_from >= eps_to > 0"));
    }
    crate::limits::dyadic(-sw.eps_from.log2(), -sw.eps_to.log2(), sw.eps_steps)
}

fn layer_opts(cfg: &RunConfig) -> LayerOpts {
    LayerOpts { n_s: cfg.grid.n_s, ..LayerOpts::default() }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Domain { common } => {
            let cfg = resolve(&common, &[])?;
            let dom = cfg.domain()?;
            let (lo, hi) = dom.bbox();
            let nodes = dom.nodes(cfg.grid.n_s);
            let rows: Vec<Vec<f64>> =
                nodes.iter().map(|f| vec![f.s, f.p[0], f.p[1], f.n[0], f.n[1], f.kappa]).collect();
            let out = Artifacts::new(&common.out_dir)?;
            out.json(
                Path::new("domain.json"),
                &json!({
                    "shape": dom.shape(),
                    "length": dom.length(),
                    "area": dom.area(),
                    "kappa_max": dom.kappa_max(),
                    "eps_bar": dom.eps_bar(),
                    "bbox": [lo, hi],
                }),
            )?;
            out.csv(Path::new("boundary.csv"), &["s", "x", "y", "nx", "ny", "kappa"], &rows)?;
            out.config("domain", &cfg)
        }
        Command::Energy { common, field, regime, eps, method } => {
            let cfg = resolve(&common, &[("regime.kind", regime), ("regime.eps", s(&eps)), ("grid.method", method)])?;
            let dom = cfg.domain()?;
            let rp = cfg.regime_params()?;
            let (f, ops) = omega_field(&cfg, &dom, field.as_deref())?;
            let ext = extension_for(&cfg, rp.regime)?;
            let rows = gamma_sweep(&f, &ops, &dom, cfg.profile()?, ext, &rp, &[rp.eps], layer_opts(&cfg))?;
            let r = &rows[0];
            let limit = limit_energy(&f, &ops, &rp, cfg.method()?)?;
            let out = Artifacts::new(&common.out_dir)?;
            out.json(
                Path::new("energy.json"),
                &json!({
                    "regime": rp.regime.name(),
                    "eps": rp.eps,
                    "breakdown": r.breakdown,
                    "offset": r.offset,
                    "D_eps": r.d_eps,
                    "limit": limit,
                    "gap": r.gap,
                    "gap_with_fields": r.gap_with_fields,
                }),
            )?;
            out.config("energy", &cfg)
        }
        Command::Sweep { common, regime, eps_from, eps_to, eps_steps, field, out } => {
            let cfg = resolve(
                &common,
                &[
                    ("regime.kind", regime),
                    ("sweep.eps_from", s(&eps_from)),
                    ("sweep.eps_to", s(&eps_to)),
                    ("sweep.eps_steps", s(&eps_steps)),
                ],
            )?;
            let dom = cfg.domain()?;
            let list = eps_list(&cfg)?;
            let rp = cfg.regime_params()?.with_eps(list[0])?;
            let (f, ops) = omega_field(&cfg, &dom, field.as_deref())?;
            let ext = extension_for(&cfg, rp.regime)?;
            let rows = gamma_sweep(&f, &ops, &dom, cfg.profile()?, ext, &rp, &list, layer_opts(&cfg))?;
            let table: Vec<Vec<f64>> = rows.iter().map(|r| r.csv_fields().to_vec()).collect();
            let art = Artifacts::new(&common.out_dir)?;
            art.csv(&out, &SWEEP_COLUMNS, &table)?;
            art.config("sweep", &cfg)
        }
        Command::Asymptotics { common, eps_from, eps_to, eps_steps, out } => {
            let cfg = resolve(
                &common,
                &[("sweep.eps_from", s(&eps_from)), ("sweep.eps_to", s(&eps_to)), ("sweep.eps_steps", s(&eps_steps))],
            )?;
            let dom = cfg.domain()?;
            let profile: Profile = cfg.profile()?;
            let opts = layer_opts(&cfg);
            let mut header = vec!["eps".to_string(), "abs_ln_eps".to_string(), "D_eps".to_string()];
            header.extend((0..cfg.asymptotics.probes.len()).map(|k| format!("f_eps_{k}")));
            let mut table = Vec::new();
            for e in eps_list(&cfg)? {
                let mut row = vec![e, e.ln().abs(), d_eps(&profile, &dom, e, &opts)?];
                for &x in &cfg.asymptotics.probes {
                    row.push(f_eps(&profile, &dom, e, x, &opts)?);
                }
                table.push(row);
            }
            let art = Artifacts::new(&common.out_dir)?;
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            art.csv(&out, &h, &table)?;
            art.config("asymptotics", &cfg)
        }
        Command::Minimize { common, regime, lambda, nu, gamma, clamp, init, max_iter, out } => {
            let cfg = resolve(
                &common,
                &[
                    ("regime.kind", regime),
                    ("regime.lambda", s(&lambda)),
                    ("regime.nu", s(&nu)),
                    ("regime.gamma", s(&gamma)),
                    ("minimize.clamp", clamp),
                    ("field.init", init),
                    ("minimize.max_iter", s(&max_iter)),
                ],
            )?;
            let dom = cfg.domain()?;
            let rp = cfg.regime_params()?;
            let method = cfg.method()?;
            let m = &cfg.minimize;
            let boundary = match m.clamp.as_str() {
                "up" => BoundaryHandling::Clamped(1.0),
                "down" => BoundaryHandling::Clamped(-1.0),
                "free" => BoundaryHandling::Free,
                other => return Err(MmtfError::invalid(format!("unknown clamp '{other}'"))),
            };
            let step = match m.step.as_str() {
                "backtracking" => StepRule::Backtracking,
                "fixed" => StepRule::Fixed(f64::INFINITY),
                other => return Err(MmtfError::invalid(format!("unknown step rule '{other}'"))),
            };
            let opts = MinimizeOptions { step, max_iter: m.max_iter, tol: m.tol, boundary };
            let ops = OmegaOps::for_domain(&dom, cfg.grid.n, cfg.grid.n_s)?;
            let res = match m.functional.as_str() {
                "limit" => {
                    let f0 = init_field(&cfg, ops.grid.clone(), ops.mask.clone())?;
                    let func = LimitFunctional::new(&ops, rp, method);
                    minimize(&f0, &func, &opts, &ops.trace.support())?
                }
                "g_eps" => {
                    let (grid, _) = crate::limits::layer_grid(&init_field(&cfg, ops.grid.clone(), ops.mask.clone())?, rp.eps)?;
                    let sub = crate::energy::GridCutoff::default_sub(grid.h, rp.eps);
                    let cut = crate::energy::GridCutoff::new(&grid, &dom, &cfg.profile()?, rp.eps, sub)?;
                    let f0 = init_field(&cfg, grid.clone(), cut.support())?;
                    let kernel = GridKernel::new(grid.nx, grid.ny, grid.h);
                    let func = GEpsFunctional::new(&f0, &cut, &kernel, rp, method)?;
                    let outer: Vec<usize> = (0..grid.len())
                        .filter(|&c| cut.eta[c] > 0.0 && dom.signed_distance(grid.center(c)) > 0.0)
                        .collect();
                    minimize(&f0, &func, &opts, &outer)?
                }
                other => return Err(MmtfError::invalid(format!("unknown functional '{other}'"))),
            };
            let art = Artifacts::new(&common.out_dir)?;
            art.field(&out, &res.field)?;
            let hist: Vec<Vec<f64>> = res.history.iter().enumerate().map(|(k, &e)| vec![k as f64, e]).collect();
            art.csv(Path::new("energy_history.csv"), &["iteration", "energy"], &hist)?;
            art.json(
                Path::new("minimize.json"),
                &json!({
                    "iterations": res.iterations,
                    "converged": res.converged,
                    "stalled": res.stalled,
                    "grad_norm": res.grad_norm,
                    "energy": res.history.last(),
                    "skyrmion_number": res.field.skyrmion_number(),
                }),
            )?;
            art.config("minimize", &cfg)
        }
        Command::Meanfield { common, beta, j0, delta, profile_out, beta_from, beta_to, steps } => {
            let cfg = resolve(&common, &[("meanfield.beta", s(&beta)), ("meanfield.j0", s(&j0)), ("meanfield.delta", s(&delta))])?;
            let mf = &cfg.meanfield;
            let art;
            if beta_from.is_some() || beta_to.is_some() || steps.is_some() {
                let (Some(a), Some(b)) = (beta_from, beta_to) else {
                    return Err(MmtfError::invalid("bifurcation sweep needs --beta-from and --beta-to"));
                };
                let rows = bifurcation(mf.j0, mf.delta, a, b, steps.unwrap_or(101))?;
                let table: Vec<Vec<f64>> = rows.iter().map(|&(b, s0)| vec![b, s0]).collect();
                art = Artifacts::new(&common.out_dir)?;
                art.csv(Path::new("bifurcation.csv"), &["beta_T", "s0"], &table)?;
            } else {
                let p = MeanFieldParams::with_shape(mf.beta, mf.j0, mf.delta, cfg.kernel_shape()?)?;
                let w = wall_profile(&p, mf.x_max, mf.samples, [0.0, 0.0, 1.0])?;
                let table: Vec<Vec<f64>> = w.x.iter().zip(&w.phi).map(|(&x, &y)| vec![x, y]).collect();
                art = Artifacts::new(&common.out_dir)?;
                art.csv(&profile_out, &["x", "phi"], &table)?;
                art.json(
                    Path::new("meanfield.json"),
                    &json!({
                        "s0": saturation_s0(&p),
                        "g_delta": w.g,
                        "minimal_energy": w.minimal_energy,
                        "direct_energy": w.direct_energy(&p),
                    }),
                )?;
            }
            art.config("meanfield", &cfg)
        }
    }
}
