//! Cell-centred magnetization fields on a uniform grid.

use crate::error::{MmtfError, Result};
use crate::geometry::{Domain, Frame, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn normalize(v: Vec3) -> Vec3 {
    let r = dot3(v, v).sqrt();
    if r > 0.0 {
        [v[0] / r, v[1] / r, v[2] / r]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Uniform grid; cell `(i, j)` has centre `origin + h (i, j)` and index `j nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Vec2,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: Vec2) -> Result<Self> {
        if nx < 2 || ny < 2 || !(h > 0.0) {
            return Err(MmtfError::invalid("grid needs nx, ny >= 2 and h > 0"));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// Square-celled grid covering `[lo, hi]` with `n` cells along the longer side.
    pub fn covering(lo: Vec2, hi: Vec2, n: usize) -> Result<Self> {
        let w = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let h = w / n as f64;
        let nx = ((hi[0] - lo[0]) / h).ceil().max(2.0) as usize;
        let ny = ((hi[1] - lo[1]) / h).ceil().max(2.0) as usize;
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let origin = [cx - 0.5 * (nx as f64 - 1.0) * h, cy - 0.5 * (ny as f64 - 1.0) * h];
        Self::new(nx, ny, h, origin)
    }

    /// Grid over the bounding box of `dom` enlarged by `pad` on every side.
    pub fn for_domain(dom: &Domain, n: usize, pad: f64) -> Result<Self> {
        let (lo, hi) = dom.bbox();
        Self::covering([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad], n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn center(&self, c: usize) -> Vec2 {
        let (i, j) = (c % self.nx, c / self.nx);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }
}

/// Cells whose centre has signed distance below `level` (0 for Ω, ε for Ω_ε).
pub fn mask_below(grid: &Grid, dom: &Domain, level: f64) -> Vec<bool> {
    use rayon::prelude::*;
    (0..grid.len())
        .into_par_iter()
        .map(|c| dom.signed_distance(grid.center(c)) < level)
        .collect()
}

/// Unit-vector field on the masked cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Magnetization {
    pub grid: Grid,
    pub mask: Vec<bool>,
    pub m: Vec<Vec3>,
}

impl Magnetization {
    pub fn from_fn<F: Fn(Vec2) -> Vec3>(grid: Grid, mask: Vec<bool>, f: F) -> Self {
        let m = (0..grid.len())
            .map(|c| if mask[c] { normalize(f(grid.center(c))) } else { [0.0; 3] })
            .collect();
        Self { grid, mask, m }
    }

    pub fn masked(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(move |&c| self.mask[c])
    }

    pub fn n_masked(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Largest deviation of `|m|` from 1 over masked cells.
    pub fn norm_defect(&self) -> f64 {
        self.masked().map(|c| (dot3(self.m[c], self.m[c]).sqrt() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.m.iter().map(|v| v[k]).collect()
    }

    /// Divides every masked value by its norm.
    pub fn project_to_sphere(&mut self) -> Result<()> {
        for c in 0..self.m.len() {
            if !self.mask[c] {
                continue;
            }
            let n = dot3(self.m[c], self.m[c]).sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(MmtfError::invalid(format!("cannot normalize cell {c}")));
            }
            self.m[c] = [self.m[c][0] / n, self.m[c][1] / n, self.m[c][2] / n];
        }
        Ok(())
    }

    /// Topological degree `(1/4π) Σ h² m·(∂ₓm × ∂ᵧm)` with the grid stencils.
    pub fn skyrmion_number(&self) -> f64 {
        let d = DiffOps::new(&self.grid, &self.mask);
        let comps: Vec<Vec<f64>> = (0..3).map(|k| self.component(k)).collect();
        let dx: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(0, f)).collect();
        let dy: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(1, f)).collect();
        let mut acc = crate::quad::Neumaier::new();
        for c in self.masked() {
            let a = [dx[0][c], dx[1][c], dx[2][c]];
            let b = [dy[0][c], dy[1][c], dy[2][c]];
            acc.add(dot3(self.m[c], cross(a, b)));
        }
        acc.value() * self.grid.cell_area() / (4.0 * PI)
    }
}

/// First-derivative stencils on a masked grid: central where both
/// neighbours are masked, one-sided at the mask edge, zero for isolated cells.
#[derive(Debug, Clone)]
pub struct DiffOps {
    /// `st[dir][c] = [(idx, w); 2]`.
    st: [Vec<[(usize, f64); 2]>; 2],
}

impl DiffOps {
    pub fn new(grid: &Grid, mask: &[bool]) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let h = grid.h;
        let build = |dir: usize| -> Vec<[(usize, f64); 2]> {
            (0..grid.len())
                .map(|c| {
                    if !mask[c] {
                        return [(c, 0.0), (c, 0.0)];
                    }
                    let (i, j) = (c % nx, c / nx);
                    let (plus, minus) = if dir == 0 {
                        ((i + 1 < nx).then(|| c + 1), (i > 0).then(|| c - 1))
                    } else {
                        ((j + 1 < ny).then(|| c + nx), (j > 0).then(|| c - nx))
                    };
                    let plus = plus.filter(|&p| mask[p]);
                    let minus = minus.filter(|&p| mask[p]);
                    match (plus, minus) {
                        (Some(p), Some(q)) => [(p, 0.5 / h), (q, -0.5 / h)],
                        (Some(p), None) => [(p, 1.0 / h), (c, -1.0 / h)],
                        (None, Some(q)) => [(c, 1.0 / h), (q, -1.0 / h)],
                        (None, None) => [(c, 0.0), (c, 0.0)],
                    }
                })
                .collect()
        };
        Self { st: [build(0), build(1)] }
    }

    pub fn apply(&self, dir: usize, f: &[f64]) -> Vec<f64> {
        self.st[dir].iter().map(|s| s[0].1 * f[s[0].0] + s[1].1 * f[s[1].0]).collect()
    }

    /// Adds `Dᵀ g` to `out`.
    pub fn apply_adjoint_add(&self, dir: usize, g: &[f64], out: &mut [f64]) {
        for (c, s) in self.st[dir].iter().enumerate() {
            if g[c] != 0.0 {
                out[s[0].0] += s[0].1 * g[c];
                out[s[1].0] += s[1].1 * g[c];
            }
        }
    }
}

/// Boundary samples of `m∥`, `m⊥·n` and `m⊥·τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub s: Vec<f64>,
    pub weight: f64,
    pub m_par: Vec<f64>,
    pub m_n: Vec<f64>,
    pub m_tau: Vec<f64>,
}

/// Trace of a field at `n` boundary nodes, sampled half a cell inside `∂Ω`.
pub fn boundary_trace(field: &Magnetization, dom: &Domain, n: usize) -> Result<BoundaryTrace> {
    let op = TraceOp::new(dom, &field.grid, &field.mask, n, 0.5 * field.grid.h)?;
    let c: Vec<Vec<f64>> = (0..3).map(|k| op.apply(&field.component(k))).collect();
    let mut out = BoundaryTrace { s: Vec::new(), weight: op.weight, m_par: c[2].clone(), m_n: Vec::new(), m_tau: Vec::new() };
    for (q, f) in op.frames.iter().enumerate() {
        out.s.push(f.s);
        out.m_n.push(c[0][q] * f.n[0] + c[1][q] * f.n[1]);
        out.m_tau.push(c[0][q] * f.tau[0] + c[1][q] * f.tau[1]);
    }
    Ok(out)
}

/// Linear map from cell values to boundary samples by bilinear interpolation
/// restricted to masked cells, with weights renormalized over masked corners.
#[derive(Debug, Clone)]
pub struct TraceOp {
    pub frames: Vec<Frame>,
    /// Arc-length quadrature weight per sample.
    pub weight: f64,
    pub stencils: Vec<Vec<(usize, f64)>>,
}

impl TraceOp {
    /// Samples at `σ - offset n(σ)` for `n_nodes` uniformly spaced boundary nodes.
    pub fn new(
        dom: &Domain,
        grid: &Grid,
        mask: &[bool],
        n_nodes: usize,
        offset: f64,
    ) -> Result<Self> {
        let frames = dom.nodes(n_nodes);
        let mut stencils = Vec::with_capacity(n_nodes);
        for fr in &frames {
            let x = [fr.p[0] - offset * fr.n[0], fr.p[1] - offset * fr.n[1]];
            let st = bilinear(grid, mask, x).ok_or_else(|| {
                MmtfError::invalid(format!("grid does not cover boundary sample at ({:.4}, {:.4})", x[0], x[1]))
            })?;
            stencils.push(st);
        }
        Ok(Self { frames, weight: dom.length() / n_nodes as f64, stencils })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.stencils.iter().map(|st| st.iter().map(|&(c, w)| w * f[c]).sum()).collect()
    }

    pub fn apply_adjoint_add(&self, g: &[f64], out: &mut [f64]) {
        for (st, &gq) in self.stencils.iter().zip(g) {
            for &(c, w) in st {
                out[c] += w * gq;
            }
        }
    }

    /// Cells that influence any boundary sample.
    pub fn support(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.stencils.iter().flatten().map(|&(c, _)| c).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Bilinear stencil at `x` over masked cells; falls back to the nearest
/// masked cell within two spacings when no corner is masked.
pub fn bilinear(grid: &Grid, mask: &[bool], x: Vec2) -> Option<Vec<(usize, f64)>> {
    let fx = (x[0] - grid.origin[0]) / grid.h;
    let fy = (x[1] - grid.origin[1]) / grid.h;
    let i0 = fx.floor();
    let j0 = fy.floor();
    let (ax, ay) = (fx - i0, fy - j0);
    let mut st = Vec::with_capacity(4);
    let mut wsum = 0.0;
    for (di, dj, w) in [
        (0, 0, (1.0 - ax) * (1.0 - ay)),
        (1, 0, ax * (1.0 - ay)),
        (0, 1, (1.0 - ax) * ay),
        (1, 1, ax * ay),
    ] {
        let (i, j) = (i0 as i64 + di, j0 as i64 + dj);
        if i < 0 || j < 0 || i >= grid.nx as i64 || j >= grid.ny as i64 {
            continue;
        }
        let c = j as usize * grid.nx + i as usize;
        if mask[c] && w > 0.0 {
            st.push((c, w));
            wsum += w;
        }
    }
    if wsum > 1e-12 {
        for e in &mut st {
            e.1 /= wsum;
        }
        return Some(st);
    }
    let (ic, jc) = (fx.round() as i64, fy.round() as i64);
    let mut best: Option<(usize, f64)> = None;
    for dj in -2..=2 {
        for di in -2..=2 {
            let (i, j) = (ic + di, jc + dj);
            if i < 0 || j < 0 || i >= grid.nx as i64 || j >= grid.ny as i64 {
                continue;
            }
            let c = j as usize * grid.nx + i as usize;
            if mask[c] {
                let d = (i as f64 - fx).hypot(j as f64 - fy);
                if best.is_none_or(|b| d < b.1) {
                    best = Some((c, d));
                }
            }
        }
    }
    best.map(|(c, _)| vec![(c, 1.0)])
}

/// Initial magnetization recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Uniform { v: Vec3 },
    /// `θ(ρ) = 2 atan(r0/ρ)`; the core points along `polarity e₃` and the
    /// in-plane part is `chirality sin θ ρ̂`. With `cutoff = Some(R)` the profile
    /// is corrected to reach the far value exactly at `ρ = R`.
    NeelSkyrmion { center: Vec2, r0: f64, polarity: f64, chirality: f64, cutoff: Option<f64> },
    Random { seed: u64 },
    /// Smooth random field: normalized sum of low Fourier modes about `e₃`.
    RandomSmooth { seed: u64, modes: usize, amplitude: f64 },
    /// Polar angle `θ0 + g·x` at azimuth `psi`.
    Tilted { theta0: f64, grad: Vec2, psi: f64 },
    /// In-plane radial field `((x - c)/|x - c|, 0)`, `e₃` at the centre.
    Hedgehog { center: Vec2 },
}

pub fn neel_theta(rho: f64, r0: f64, cutoff: Option<f64>) -> f64 {
    match cutoff {
        None => 2.0 * (r0 / rho.max(1e-300)).atan(),
        Some(r) => {
            if rho >= r {
                0.0
            } else {
                2.0 * (r0 / rho.max(1e-300)).atan() - (rho / r) * 2.0 * (r0 / r).atan()
            }
        }
    }
}

pub fn make_field(grid: Grid, mask: Vec<bool>, init: &Init) -> Result<Magnetization> {
    match init {
        Init::Uniform { v } => {
            if dot3(*v, *v) < 1e-24 {
                return Err(MmtfError::invalid("uniform direction must be nonzero"));
            }
            Ok(Magnetization::from_fn(grid, mask, |_| *v))
        }
        Init::NeelSkyrmion { center, r0, polarity, chirality, cutoff } => {
            if !(*r0 > 0.0) {
                return Err(MmtfError::invalid("skyrmion radius must be positive"));
            }
            let (p, chi) = (polarity.signum(), chirality.signum());
            Ok(Magnetization::from_fn(grid, mask, |x| {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let rho = dx.hypot(dy);
                let th = neel_theta(rho, *r0, *cutoff);
                let (ux, uy) = if rho > 0.0 { (dx / rho, dy / rho) } else { (0.0, 0.0) };
                [chi * th.sin() * ux, chi * th.sin() * uy, -p * th.cos()]
            }))
        }
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let m = (0..grid.len())
                .map(|c| {
                    let z: f64 = rng.gen_range(-1.0..1.0);
                    let ph: f64 = rng.gen_range(0.0..2.0 * PI);
                    let r = (1.0 - z * z).sqrt();
                    if mask[c] {
                        [r * ph.cos(), r * ph.sin(), z]
                    } else {
                        [0.0; 3]
                    }
                })
                .collect();
            Ok(Magnetization { grid, mask, m })
        }
        Init::RandomSmooth { seed, modes, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let terms: Vec<(Vec2, f64, Vec3)> = (0..*modes)
                .map(|_| {
                    let k = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                    let ph = rng.gen_range(0.0..2.0 * PI);
                    let a = [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ];
                    (k, ph, a)
                })
                .collect();
            Ok(Magnetization::from_fn(grid, mask, |x| {
                let mut v = [0.0, 0.0, 1.0];
                for (k, ph, a) in &terms {
                    let c = (k[0] * x[0] + k[1] * x[1] + ph).cos() * amplitude;
                    for d in 0..3 {
                        v[d] += c * a[d];
                    }
                }
                v
            }))
        }
        Init::Hedgehog { center } => Ok(Magnetization::from_fn(grid, mask, |x| {
            let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
            let r = dx.hypot(dy);
            if r > 0.0 {
                [dx / r, dy / r, 0.0]
            } else {
                [0.0, 0.0, 1.0]
            }
        })),
        Init::Tilted { theta0, grad, psi } => Ok(Magnetization::from_fn(grid, mask, |x| {
            let th = theta0 + grad[0] * x[0] + grad[1] * x[1];
            [th.sin() * psi.cos(), th.sin() * psi.sin(), th.cos()]
        })),
    }
}

/// Writes `x,y,mx,my,mz` rows for masked cells, row-major, 17 significant digits.
pub fn write_csv<W: Write>(field: &Magnetization, out: W, header_comment: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    if let Some(c) = header_comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "x,y,mx,my,mz")?;
    for c in field.masked() {
        let p = field.grid.center(c);
        let m = field.m[c];
        writeln!(out, "{},{},{},{},{}", fmt17(p[0]), fmt17(p[1]), fmt17(m[0]), fmt17(m[1]), fmt17(m[2]))?;
    }
    out.flush()?;
    Ok(())
}

/// Formats with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads a field written by [`write_csv`]. The lattice is inferred from the
/// coordinates; rows must be unit vectors within 1e-6 and are renormalized.
pub fn read_csv<R: Read>(input: R) -> Result<Magnetization> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| MmtfError::invalid(e.to_string()))?.clone();
    let want = ["x", "y", "mx", "my", "mz"];
    if headers.len() != 5 || headers.iter().zip(want).any(|(a, b)| a != b) {
        return Err(MmtfError::invalid("field csv header must be x,y,mx,my,mz"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MmtfError::invalid(e.to_string()))?;
        let mut v = [0.0f64; 5];
        for (k, s) in rec.iter().enumerate() {
            v[k] = s.parse().map_err(|_| MmtfError::invalid(format!("bad number '{s}'")))?;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MmtfError::invalid("non-finite value in field csv"));
        }
        let r = (v[2] * v[2] + v[3] * v[3] + v[4] * v[4]).sqrt();
        if (r - 1.0).abs() > 1e-6 {
            return Err(MmtfError::invalid(format!("|m| = {r} deviates from 1 at ({}, {})", v[0], v[1])));
        }
        rows.push(v);
    }
    if rows.len() < 4 {
        return Err(MmtfError::invalid("field csv has too few rows"));
    }
    let spacing = |k: usize| -> f64 {
        let mut xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 1e-12).fold(f64::INFINITY, f64::min)
    };
    let h = spacing(0).min(spacing(1));
    if !h.is_finite() {
        return Err(MmtfError::invalid("cannot infer grid spacing"));
    }
    let x0 = rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let y0 = rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min);
    let x1 = rows.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    let y1 = rows.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    let nx = ((x1 - x0) / h).round() as usize + 1;
    let ny = ((y1 - y0) / h).round() as usize + 1;
    let grid = Grid::new(nx.max(2), ny.max(2), h, [x0, y0])?;
    let mut mask = vec![false; grid.len()];
    let mut m = vec![[0.0; 3]; grid.len()];
    for r in &rows {
        let fi = (r[0] - x0) / h;
        let fj = (r[1] - y0) / h;
        if (fi - fi.round()).abs() > 1e-6 || (fj - fj.round()).abs() > 1e-6 {
            return Err(MmtfError::invalid("field csv coordinates are not on a uniform lattice"));
        }
        let c = fj.round() as usize * grid.nx + fi.round() as usize;
        mask[c] = true;
        m[c] = normalize([r[2], r[3], r[4]]);
    }
    Ok(Magnetization { grid, mask, m })
}

/// Bilinear sample of the field and of its cell gradients at `x`.
pub struct Sampler<'a> {
    field: &'a Magnetization,
    grad: [Vec<Vec3>; 2],
}

impl<'a> Sampler<'a> {
    pub fn new(field: &'a Magnetization) -> Self {
        let d = DiffOps::new(&field.grid, &field.mask);
        let comps: Vec<Vec<f64>> = (0..3).map(|k| field.component(k)).collect();
        let g = |dir: usize| -> Vec<Vec3> {
            let parts: Vec<Vec<f64>> = comps.iter().map(|f| d.apply(dir, f)).collect();
            (0..field.grid.len()).map(|c| [parts[0][c], parts[1][c], parts[2][c]]).collect()
        };
        Self { field, grad: [g(0), g(1)] }
    }

    /// Interpolated `m` (renormalized) and `[∂ₓm, ∂ᵧm]`.
    pub fn sample(&self, x: Vec2) -> Option<(Vec3, [Vec3; 2])> {
        let st = bilinear(&self.field.grid, &self.field.mask, x)?;
        let mut m = [0.0; 3];
        let mut g = [[0.0; 3]; 2];
        for &(c, w) in &st {
            for k in 0..3 {
                m[k] += w * self.field.m[c][k];
                g[0][k] += w * self.grad[0][c][k];
                g[1][k] += w * self.grad[1][c][k];
            }
        }
        Some((normalize(m), g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Grid {
        Grid::new(n, n, 2.0 / n as f64, [-1.0 + 1.0 / n as f64, -1.0 + 1.0 / n as f64]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = square(8);
        let f = make_field(g, vec![true; 64], &Init::Random { seed: 3 }).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf, Some("note")).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.mask, f.mask);
        for c in 0..64 {
            for k in 0..3 {
                assert_eq!(back.m[c][k].to_bits(), normalize(f.m[c])[k].to_bits());
            }
        }
    }

    #[test]
    fn csv_rejects_non_unit_rows() {
        let text = "x,y,mx,my,mz\n0,0,0,0,1\n1,0,0,0,1\n0,1,0,0,1\n1,1,0,0,1.1\n";
        assert!(read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn adjoint_matches_transpose() {
        let g = square(6);
        let mut mask = vec![true; 36];
        mask[7] = false;
        mask[20] = false;
        let d = DiffOps::new(&g, &mask);
        let f: Vec<f64> = (0..36).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let q: Vec<f64> = (0..36).map(|i| ((i * 104729) % 11) as f64 - 5.0).collect();
        for dir in 0..2 {
            let df = d.apply(dir, &f);
            let mut dtq = vec![0.0; 36];
            d.apply_adjoint_add(dir, &q, &mut dtq);
            let a: f64 = df.iter().zip(&q).map(|(x, y)| x * y).sum();
            let b: f64 = f.iter().zip(&dtq).map(|(x, y)| x * y).sum();
            assert!((a - b).abs() < 1e-10);
        }
    }
}
