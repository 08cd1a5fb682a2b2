use mmtf_core::cutoff::Profile;
use mmtf_core::energy::*;
use mmtf_core::fields::*;
use mmtf_core::geometry::*;
use mmtf_core::kernel::{GridKernel, Method};
use mmtf_core::MmtfError;
use proptest::prelude::*;
use std::f64::consts::PI;

fn disk() -> Domain {
    Domain::new(Shape::Disk { r: 1.0 }, 0.5).unwrap()
}

/// Field on a grid covering `Ω_ε` together with its cutoff and kernel.
fn layer_setup(n: usize, eps: f64, init: &Init) -> (Magnetization, GridCutoff, GridKernel) {
    let dom = disk();
    let grid = Grid::for_domain(&dom, n, eps + 0.1).unwrap();
    let cut = GridCutoff::new(&grid, &dom, &Profile::Linear, eps, GridCutoff::default_sub(grid.h, eps)).unwrap();
    let field = make_field(grid, cut.support(), init).unwrap();
    let kernel = GridKernel::new(grid.nx, grid.ny, grid.h);
    (field, cut, kernel)
}

fn e3() -> Init {
    Init::Uniform { v: [0.0, 0.0, 1.0] }
}

fn skyrmion(center: Vec2, r0: f64) -> Init {
    Init::NeelSkyrmion { center, r0, polarity: 1.0, chirality: 1.0, cutoff: None }
}

fn params() -> LocalParams {
    LocalParams { lambda: 1.0, alpha: 0.5, beta_z: 0.3 }
}

#[test]
fn uniform_local_energies() {
    for eps in [0.2, 0.1] {
        let (f, cut, _) = layer_setup(96, eps, &e3());
        let e = local_energies(&f, &params(), Some((&cut.eta2, &cut.eta)));
        assert_eq!((e.exchange, e.dmi, e.anisotropy), (0.0, 0.0, 0.0));
        let area = e.zeeman / (-2.0 * params().beta_z);
        // ∫η_ε = |Ω| + ε H¹ ∫η + O(ε²), with ∫η = 1/2 for the linear profile.
        let expect = PI + eps * PI + PI * eps * eps / 3.0;
        assert!((area - expect).abs() < 2e-3, "{area} vs {expect}");
    }
}

#[test]
fn dmi_flips_with_out_of_plane_component() {
    let (f, cut, _) = layer_setup(48, 0.2, &skyrmion([0.1, -0.05], 0.3));
    let mut g = f.clone();
    for v in g.m.iter_mut() {
        v[2] = -v[2];
    }
    let w = Some((&cut.eta2[..], &cut.eta[..]));
    let (a, b) = (local_energies(&f, &params(), w), local_energies(&g, &params(), w));
    assert!(a.dmi.abs() > 1e-3);
    assert!((a.dmi + b.dmi).abs() < 1e-12 * a.dmi.abs().max(1.0));
    assert!((a.exchange - b.exchange).abs() < 1e-12 * a.exchange);
}

#[test]
fn conformal_skyrmion_exchange_under_refinement() {
    // θ = 2 atan(r0/ρ) has density 8 r0² / (ρ² + r0²)²; on a disk of radius R
    // the exchange is 8π R² / (R² + r0²).
    let (r, r0) = (2.0, 0.2);
    let dom = Domain::new(Shape::Disk { r }, 1.0).unwrap();
    let exact = 8.0 * PI * r * r / (r * r + r0 * r0);
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let grid = Grid::for_domain(&dom, n, 0.0).unwrap();
        let mask = mask_below(&grid, &dom, 0.0);
        let f = make_field(grid, mask, &skyrmion([0.0, 0.0], r0)).unwrap();
        let e = local_energies(&f, &LocalParams::default(), None);
        errs.push((e.exchange - exact).abs() / exact);
    }
    assert!(errs[2] < 1e-2, "{errs:?}");
    assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
}

#[test]
fn uniform_stray_pair_reduces_to_d_eps() {
    let (f, cut, k) = layer_setup(64, 0.2, &e3());
    for method in [Method::Direct, Method::Fft] {
        let (v, vt) = stray_pair(&f, Some(&cut), &k, method);
        assert_eq!(v, 0.0);
        let d = d_eps_grid(&cut, &k, method);
        assert!((vt - d).abs() < 1e-12 * d, "{vt} {d}");
    }
}

#[test]
fn direct_and_fft_paths_agree_on_random_field() {
    let (f, cut, k) = layer_setup(64, 0.2, &Init::Random { seed: 11 });
    let a = stray_pair(&f, Some(&cut), &k, Method::Direct);
    let b = stray_pair(&f, Some(&cut), &k, Method::Fft);
    assert!((a.0 - b.0).abs() < 1e-3 * a.0);
    assert!((a.1 - b.1).abs() < 1e-3 * a.1);
}

#[test]
fn layered_d_eps_matches_grid_sum() {
    let dom = disk();
    let eps = 0.25;
    let layered = d_eps(&Profile::Linear, &dom, eps, &LayerOpts::default()).unwrap();
    let mut errs = Vec::new();
    for n in [64, 128] {
        let grid = Grid::for_domain(&dom, n, eps + 0.05).unwrap();
        let cut = GridCutoff::new(&grid, &dom, &Profile::Linear, eps, 8).unwrap();
        let k = GridKernel::new(grid.nx, grid.ny, grid.h);
        errs.push((d_eps_grid(&cut, &k, Method::Fft) - layered).abs() / layered);
    }
    assert!(errs[1] < 1e-2 && errs[1] < errs[0], "{errs:?}");
}

#[test]
fn pair_kernel_is_second_order_on_gaussian() {
    // ∬ g(x) g(y) / |x - y| = 2 π^{5/2} s³ for g = exp(-|x|²/(2s²)).
    let s: f64 = 0.15;
    let exact = 2.0 * PI.powf(2.5) * s.powi(3);
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let h = 2.0 / n as f64;
        let grid = Grid::new(n, n, h, [-1.0, -1.0]).unwrap();
        let q: Vec<f64> = (0..grid.len())
            .map(|c| {
                let x = grid.center(c);
                (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * s * s)).exp()
            })
            .collect();
        let k = GridKernel::new(n, n, h);
        errs.push((k.quadratic(&[&q], Method::Direct) - exact).abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "{errs:?}");
    }
}

#[test]
fn fourier_stray_examples() {
    let dom = Domain::new(Shape::Disk { r: 1.5 }, 0.5).unwrap();
    let grid = Grid::for_domain(&dom, 64, 0.0).unwrap();
    let all = vec![true; grid.len()];
    let m0 = [0.0, 0.0, -1.0];
    let flat = make_field(grid, all.clone(), &Init::Uniform { v: m0 }).unwrap();
    let z = stray_fourier(&flat, m0, 0.3, 2).unwrap();
    assert_eq!((z.local, z.bulk, z.surface), (0.0, 0.0, 0.0));

    let sk = Init::NeelSkyrmion { center: [0.0, 0.0], r0: 0.3, polarity: 1.0, chirality: 1.0, cutoff: Some(1.2) };
    let f = make_field(grid, all.clone(), &sk).unwrap();
    let e = stray_fourier(&f, m0, 0.3, 2).unwrap();
    assert!((e.local - e.local_real).abs() < 1e-6 * e.local_real.abs());
    assert!(e.bulk > 0.0 && e.surface < 0.0);

    let undecayed = make_field(grid, all, &skyrmion([0.0, 0.0], 0.3)).unwrap();
    assert!(stray_fourier(&undecayed, m0, 0.3, 2).is_err());
}

#[test]
fn fourier_bulk_term_matches_real_space_sum() {
    // (δ/2) ∫|k·m̂⊥|²/|k| dk/(2π)² = (δ/4π) ∬ div m⊥(x) div m⊥(y) / |x - y|.
    let n = 128;
    let h = 4.0 / n as f64;
    let grid = Grid::new(n, n, h, [-2.0, -2.0]).unwrap();
    let mask = vec![true; grid.len()];
    let f = Magnetization::from_fn(grid, mask, |x| {
        let b = 0.8 * (-(x[0] * x[0] + x[1] * x[1]) / 0.18).exp();
        [b * (x[0] + 0.3 * x[1]), b * (x[1] - 0.2), -1.0]
    });
    let delta = 0.4;
    let e = stray_fourier(&f, [0.0, 0.0, -1.0], delta, 2).unwrap();
    let k = GridKernel::new(n, n, h);
    let (v, _) = stray_pair(&f, None, &k, Method::Fft);
    let real = delta / (4.0 * PI) * v;
    assert!((e.bulk - real).abs() < 1e-2 * real, "{} vs {real}", e.bulk);
}

fn omega_field(n: usize, init: &Init) -> (Domain, OmegaOps, Magnetization) {
    let dom = disk();
    let ops = OmegaOps::for_domain(&dom, n, 512).unwrap();
    let f = make_field(ops.grid, ops.mask.clone(), init).unwrap();
    (dom, ops, f)
}

#[test]
fn decomposition_of_uniform_and_hedgehog() {
    let (_, ops, f) = omega_field(48, &e3());
    let d = decomposed_stray(&f, &ops, Method::Fft).unwrap();
    assert_eq!(d.v_oo, 0.0);
    assert_eq!(d.vt_oo, 0.0);
    assert_eq!(d.v_bo, 0.0);
    assert_eq!(d.vt_bo, 0.0);
    assert_eq!(d.bnd_norm_inplane, 0.0);
    assert!(d.bnd_defect.abs() < 1e-12);

    let (dom, ops, f) = omega_field(96, &Init::Hedgehog { center: [0.0, 0.0] });
    let d = decomposed_stray(&f, &ops, Method::Fft).unwrap();
    assert!((d.bnd_norm_inplane - dom.length()).abs() < 5e-3 * dom.length());
    assert!((d.bnd_defect - dom.length()).abs() < 1e-12);
}

#[test]
fn boundary_bulk_term_vanishes_with_trace() {
    // m∥ = cos(πρ/2) vanishes on ∂Ω; the sampled trace is O(h).
    let mut vals = Vec::new();
    for n in [32, 64, 128] {
        let dom = disk();
        let ops = OmegaOps::for_domain(&dom, n, 512).unwrap();
        let f = Magnetization::from_fn(ops.grid, ops.mask.clone(), |x| {
            let r = x[0].hypot(x[1]);
            let th = 0.5 * PI * r;
            let (ux, uy) = if r > 0.0 { (x[0] / r, x[1] / r) } else { (0.0, 0.0) };
            [th.sin() * ux, th.sin() * uy, th.cos()]
        });
        vals.push(decomposed_stray(&f, &ops, Method::Fft).unwrap().vt_bo.abs());
    }
    assert!(vals[2] < 0.6 * vals[1] && vals[1] < 0.6 * vals[0], "{vals:?}");
}

#[test]
fn b_field_dual_route_matches_boundary_bulk_term() {
    let (dom, ops, f) = omega_field(64, &skyrmion([0.15, 0.1], 0.45));
    let d = decomposed_stray(&f, &ops, Method::Direct).unwrap();
    let h = ops.grid.h;
    let mz = f.component(2);
    let trace = |fr: &Frame| -> f64 {
        let x = [fr.p[0] - 0.5 * h * fr.n[0], fr.p[1] - 0.5 * h * fr.n[1]];
        bilinear(&ops.grid, &ops.mask, x).unwrap().iter().map(|&(c, w)| w * mz[c]).sum()
    };
    let grads = cell_gradients(&f, &ops.diff);
    let mut route = 0.0;
    for c in f.masked() {
        let b = b_field(&dom, ops.grid.center(c), trace, 512).unwrap();
        route += h * h * (b[0] * grads[c][0][2] + b[1] * grads[c][1][2]);
    }
    assert!((route - d.vt_bo).abs() < 2e-2 * d.vt_bo.abs(), "{route} vs {}", d.vt_bo);
}

#[test]
fn b_field_examples() {
    let dom = disk();
    let one = |_: &Frame| 1.0;
    let b = b_field(&dom, [0.0, 0.0], one, 256).unwrap();
    assert!(b[0].abs() < 1e-12 && b[1].abs() < 1e-12);
    assert!(matches!(b_field(&dom, [1.2, 0.0], one, 256), Err(MmtfError::Invalid(_))));
    let dists = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let mags: Vec<f64> = dists.iter().map(|&d| b_field(&dom, [1.0 - d, 0.0], one, 256).unwrap()[0]).collect();
    let slopes: Vec<f64> = mags.windows(2).map(|w| (w[1] - w[0]) / 10f64.ln()).collect();
    assert!(slopes.iter().all(|&s| s > 0.0), "{slopes:?}");
    // Slope approaches 2, the coefficient of ∫ dσ / |x - σ| ≈ 2|ln d|.
    assert!((slopes[3] - slopes[2]).abs() < 1e-2 && (slopes[3] - 2.0).abs() < 1e-2, "{slopes:?}");
}

#[test]
fn d_eps_leading_coefficient() {
    let dom = disk();
    let opts = LayerOpts::default();
    let lin = |e: f64| d_eps(&Profile::Linear, &dom, e, &opts).unwrap();
    let ss = |e: f64| d_eps(&Profile::Smoothstep, &dom, e, &opts).unwrap();
    let rem = |e: f64| lin(e) - 4.0 * PI * e.ln().abs();
    let (r1, r2, r3) = (rem(1e-4), rem(1e-8), rem(1e-16));
    assert!((r2 - r3).abs() < 1e-2 * r2.abs().max(1.0), "{r1} {r2} {r3}");
    let ratio = |e: f64| lin(e) / (4.0 * PI * e.ln().abs());
    assert!((ratio(1e-64) - 1.0).abs() < (ratio(1e-8) - 1.0).abs());
    let span = 1e3f64.ln();
    let slope_lin = (lin(1e-6) - lin(1e-3)) / span;
    let slope_ss = (ss(1e-6) - ss(1e-3)) / span;
    assert!((slope_lin / slope_ss - 1.0).abs() < 1e-2, "{slope_lin} {slope_ss}");
    assert!((slope_lin / (4.0 * PI) - 1.0).abs() < 1e-2);
    assert!(matches!(d_eps(&Profile::Linear, &dom, dom.eps_bar(), &opts), Err(MmtfError::OutsideTube { .. })));
}

#[test]
fn f_eps_at_disk_centre_is_two_pi() {
    let dom = disk();
    for eps in [1e-1, 1e-3, 1e-6] {
        let f = f_eps(&Profile::Smoothstep, &dom, eps, [0.0, 0.0], &LayerOpts::default()).unwrap();
        assert!((f - 2.0 * PI).abs() < 1e-8, "{eps}: {f}");
    }
}

#[test]
fn total_is_linear_in_lambda() {
    for seed in [1, 2, 3] {
        let (f, cut, k) = layer_setup(64, 0.2, &Init::RandomSmooth { seed, modes: 5, amplitude: 0.6 });
        let p0 = LocalParams { lambda: 0.0, ..params() };
        let p1 = LocalParams { lambda: 2.5, ..params() };
        let a = total_g_eps_grid(&f, &cut, &k, Method::Fft, &p0, 0.3).unwrap();
        let b = total_g_eps_grid(&f, &cut, &k, Method::Fft, &p1, 0.3).unwrap();
        assert!((b.total - a.total - 2.5 * a.dmi).abs() < 1e-10 * b.total.abs().max(1.0));
        assert!((a.w - (a.v - a.v_tilde) / (2.0 * 0.2f64.ln().abs())).abs() < 1e-14 * a.v.max(1.0));
    }
}

#[test]
fn under_resolved_layers_are_refused() {
    let opts = LayerOpts { n_edge: 2, ..LayerOpts::default() };
    let dom = disk();
    let ops = OmegaOps::for_domain(&dom, 24, 256).unwrap();
    let f = make_field(ops.grid, ops.mask.clone(), &e3()).unwrap();
    let r = layered_parts(&f, &ops, &dom, &Profile::Linear, 0.1, Extension::Reflect, &params(), &opts);
    assert!(matches!(r, Err(MmtfError::Resolution(_))));
    assert!(matches!(d_eps(&Profile::Linear, &dom, 0.1, &opts), Err(MmtfError::Resolution(_))));
    let (f, cut, k) = layer_setup(32, 0.2, &e3());
    let r = total_g_eps_grid(&f, &cut, &k, Method::Fft, &params(), 0.3);
    assert!(matches!(r, Err(MmtfError::Resolution(_))));
}

fn rotate_quarter(f: &Magnetization) -> Magnetization {
    let n = f.grid.nx;
    let mut g = f.clone();
    for j in 0..n {
        for i in 0..n {
            let v = f.m[j * n + i];
            let c = i * n + (n - 1 - j);
            g.m[c] = [-v[1], v[0], v[2]];
            g.mask[c] = f.mask[j * n + i];
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stray_terms_nonnegative(seed in 0u64..10_000) {
        let (f, cut, k) = layer_setup(32, 0.2, &Init::Random { seed });
        let (v, vt) = stray_pair(&f, Some(&cut), &k, Method::Fft);
        prop_assert!(v >= 0.0 && vt >= 0.0);
    }

    #[test]
    fn kernel_is_symmetric(seed in 0u64..10_000) {
        let (f, _, k) = layer_setup(32, 0.2, &Init::Random { seed });
        let (g, _, _) = layer_setup(32, 0.2, &Init::Random { seed: seed + 1 });
        let a = f.component(0);
        let b = g.component(1);
        let ka = k.convolve(&a, Method::Direct);
        let kb = k.convolve(&b, Method::Direct);
        let ab: f64 = a.iter().zip(&kb).map(|(x, y)| x * y).sum();
        let ba: f64 = b.iter().zip(&ka).map(|(x, y)| x * y).sum();
        prop_assert!((ab - ba).abs() < 1e-10 * ab.abs().max(1.0));
    }

    #[test]
    fn exchange_invariant_under_rotation(a in 0.0f64..6.3, b in 0.0f64..3.1, c in 0.0f64..6.3, seed in 0u64..100) {
        let (f, cut, _) = layer_setup(32, 0.2, &Init::RandomSmooth { seed, modes: 4, amplitude: 0.8 });
        let rz = |t: f64, v: Vec3| [t.cos() * v[0] - t.sin() * v[1], t.sin() * v[0] + t.cos() * v[1], v[2]];
        let rx = |t: f64, v: Vec3| [v[0], t.cos() * v[1] - t.sin() * v[2], t.sin() * v[1] + t.cos() * v[2]];
        let mut g = f.clone();
        for v in g.m.iter_mut() {
            *v = rz(c, rx(b, rz(a, *v)));
        }
        let w = Some((&cut.eta2[..], &cut.eta[..]));
        let (e1, e2) = (local_energies(&f, &params(), w), local_energies(&g, &params(), w));
        prop_assert!((e1.exchange - e2.exchange).abs() < 1e-10 * e1.exchange);
    }

    #[test]
    fn dmi_invariant_under_quarter_turn(x in -0.3f64..0.3, y in -0.3f64..0.3, r0 in 0.1f64..0.5) {
        let (f, _, _) = layer_setup(40, 0.2, &skyrmion([x, y], r0));
        let g = rotate_quarter(&f);
        let p = params();
        let (a, b) = (local_energies(&f, &p, None), local_energies(&g, &p, None));
        prop_assert!((a.dmi - b.dmi).abs() < 1e-10 * a.dmi.abs().max(1.0));
        prop_assert!((a.exchange - b.exchange).abs() < 1e-10 * a.exchange);
    }
}
