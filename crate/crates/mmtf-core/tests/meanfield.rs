use mmtf_core::meanfield::*;
use mmtf_core::quad::{gauss_on, integrate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn params(beta: f64) -> MeanFieldParams {
    MeanFieldParams::new(beta, 1.0, 0.1).unwrap()
}

#[test]
fn langevin_inverse_examples() {
    assert_eq!(langevin_inv(0.0).unwrap(), 0.0);
    let f = langevin_inv(0.5).unwrap();
    assert!((1.0 / f.tanh() - 1.0 / f - 0.5).abs() < 1e-12);
    let h = 1e-5;
    assert!((langevin_inv(h).unwrap() / h - 3.0).abs() < 1e-4);
    assert!(langevin_inv(1.0).is_err());
    let mut prev = 0.0;
    for k in 1..10_000 {
        let v = langevin_inv(k as f64 / 10_000.0).unwrap();
        assert!(v > prev);
        prev = v;
    }
}

#[test]
fn potential_shapes() {
    let p = params(2.0);
    assert!((potential_u(&p, 0.0).unwrap() + (4.0 * PI).ln() / 2.0).abs() < 1e-15);
    let grid: Vec<f64> = (0..2000).map(|k| k as f64 / 2000.0).collect();
    let argmin = |p: &MeanFieldParams| {
        grid.iter().copied().min_by(|a, b| potential_u(p, *a).unwrap().partial_cmp(&potential_u(p, *b).unwrap()).unwrap()).unwrap()
    };
    for beta in [1.0, 2.5, 3.0] {
        assert_eq!(argmin(&params(beta)), 0.0);
    }
    let hot = params(6.0);
    let s = argmin(&hot);
    assert!(s > 0.0 && potential_u(&hot, s).unwrap() < potential_u(&hot, 0.0).unwrap());
    assert!(potential_u(&p, 1.0).is_err());
}

#[test]
fn saturation_examples() {
    for beta in [0.5, 2.0, 3.0] {
        assert_eq!(saturation_s0(&params(beta)), 0.0);
    }
    let s0 = saturation_s0(&params(6.0));
    assert!(s0 > 0.0 && s0 < 1.0);
    assert!((langevin_inv(s0).unwrap() - 6.0 * s0).abs() < 1e-10);
    let mut prev = 0.0;
    for beta in [3.5, 5.0, 10.0, 50.0, 500.0, 5000.0] {
        let p = params(beta);
        let s = saturation_s0(&p);
        assert!(s > prev);
        prev = s;
        let h = 1e-7 * s;
        let du = (potential_u(&p, s + h).unwrap() - potential_u(&p, s - h).unwrap()) / (2.0 * h);
        assert!(du.abs() < 1e-6, "{beta}: {du}");
        // Fixed point against an independent bisection on the Langevin function itself.
        let (mut lo, mut hi) = (1e-12, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let f = beta * mid;
            if 1.0 / f.tanh() - 1.0 / f > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((s - lo).abs() < 1e-9, "{beta}: {s} vs {lo}");
    }
    assert!(prev > 0.999);
}

#[test]
fn kernel_normalization_and_gradient_coefficient() {
    for shape in [KernelShape::Parabolic, KernelShape::Flat, KernelShape::Quartic] {
        let ratios: Vec<f64> = [0.02, 0.1, 1.0]
            .iter()
            .map(|&d| {
                let p = MeanFieldParams::with_shape(4.0, 1.7, d, shape).unwrap();
                let (mass, _) = integrate(|r| 2.0 * PI * r * p.j_delta(r), 0.0, d, 1e-14);
                assert!((mass - 1.7).abs() < 1e-10, "{shape:?} {d} {mass}");
                let (g, _) = integrate(|r| 0.25 * PI * r.powi(3) * p.j_delta(r), 0.0, d, 1e-16);
                assert!((g - p.g_delta()).abs() < 1e-10 * g);
                p.g_delta() / (d * d)
            })
            .collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12 * ratios[0]));
    }
}

/// `(∫ρ̄, ∫ m ρ̄, ∫ ρ̄ ln ρ̄)` on the sphere, Gauss in `cos θ`, trapezoid in azimuth.
fn sphere_moments(c: &Closure, beta: f64) -> (f64, [f64; 3], f64) {
    let (zs, ws) = gauss_on(96, -1.0, 1.0);
    let nphi = 192;
    let (mut mass, mut first, mut ent) = (0.0, [0.0; 3], 0.0);
    for (z, w) in zs.iter().zip(&ws) {
        let r = (1.0 - z * z).sqrt();
        for k in 0..nphi {
            let ph = 2.0 * PI * k as f64 / nphi as f64;
            let m = [r * ph.cos(), r * ph.sin(), *z];
            let lnrho = beta * (c.mu + c.lambda[0] * m[0] + c.lambda[1] * m[1] + c.lambda[2] * m[2]);
            let rho = lnrho.exp();
            let dw = w * 2.0 * PI / nphi as f64;
            mass += dw * rho;
            for d in 0..3 {
                first[d] += dw * rho * m[d];
            }
            ent += dw * rho * lnrho;
        }
    }
    (mass, first, ent)
}

#[test]
fn closure_examples() {
    let c = closure_multipliers([0.0; 3], 2.0).unwrap();
    assert_eq!(c.lambda, [0.0; 3]);
    assert!((c.weight - 1.0 / (4.0 * PI)).abs() < 1e-15);
    assert!(closure_multipliers([0.6, 0.8, 0.0], 2.0).is_err());
    let beta = 3.0;
    let mbar = [0.3, -0.4, 0.5];
    let c = closure_multipliers(mbar, beta).unwrap();
    let (mass, first, _) = sphere_moments(&c, beta);
    assert!((mass - 1.0).abs() < 1e-10);
    for d in 0..3 {
        assert!((first[d] - mbar[d]).abs() < 1e-8);
    }
}

#[test]
fn entropy_identity() {
    for k in 1..=20 {
        let s = k as f64 / 21.0;
        let mbar = [s * 0.6, 0.0, s * 0.8];
        let beta = 1.7;
        let c = closure_multipliers(mbar, beta).unwrap();
        let (_, _, ent) = sphere_moments(&c, beta);
        assert!((ent - entropy(s).unwrap()).abs() < 1e-6, "{s}");
    }
}

#[test]
fn wall_profile_properties() {
    let p = params(6.0);
    let w = wall_profile(&p, 1.0, 2001, [0.0, 0.0, 1.0]).unwrap();
    assert_eq!(w.phi[0], 0.0);
    assert!(w.phi.windows(2).all(|v| v[1] >= v[0]));
    assert!(w.phi.windows(2).filter(|v| v[0] < w.s0 - 1e-8).all(|v| v[1] > v[0]));
    assert!((w.phi.last().unwrap() - w.s0).abs() < 1e-8);
    let direct = w.direct_energy(&p);
    assert!((direct - w.minimal_energy).abs() < 1e-3 * w.minimal_energy, "{direct} vs {}", w.minimal_energy);
    let v = wall_profile(&p, 1.0, 2001, [1.0, -2.0, 0.5]).unwrap();
    assert!((v.direct_energy(&p) - direct).abs() < 1e-14 * direct);
    for k in [50, 100, 200] {
        assert!((w.position_of(&p, w.phi[k]) - w.x[k]).abs() < 1e-6, "{k}");
    }
    assert!(wall_profile(&params(2.0), 1.0, 100, [0.0, 0.0, 1.0]).is_err());
}

#[test]
fn rho_closed_form_examples() {
    for b in [1e-4, 1e-2, 1.0] {
        let (q, _) = integrate(|s| 2.0 / (s * s + b).sqrt(), 0.0, 0.5, 1e-14);
        assert!((rho_closed_form(b).unwrap() - q).abs() < 1e-10, "{b}");
    }
    assert!((rho_closed_form(1.0).unwrap() - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
    for k in 1..300 {
        let b = 10f64.powi(-k);
        assert!((rho_closed_form(b).unwrap() + b.ln()).abs() < 1.0);
    }
    assert!(rho_closed_form(-1.0).is_err());
}

#[test]
fn bifurcation_sweep_brackets_critical_point() {
    let rows = bifurcation(1.0, 0.1, 2.0, 4.0, 21).unwrap();
    for (b, s) in &rows {
        assert_eq!(*s == 0.0, *b <= 3.0, "{b} {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_energy_forms_agree(seed in 0u64..1000, beta in 1.0f64..8.0) {
        // −½∬J m·m + (J₀/2)∫|m|² and ¼∬J|m(x) − m(y)|² on a grid whose discrete kernel mass is J₀.
        let p = MeanFieldParams::new(beta, 1.3, 0.25).unwrap();
        let n = 24;
        let h = 1.0 / n as f64;
        let r = (p.delta / h).ceil() as i64;
        let mut stencil = Vec::new();
        for dj in -r..=r {
            for di in -r..=r {
                let w = p.j_delta(h * (di as f64).hypot(dj as f64)) * h * h;
                if w > 0.0 {
                    stencil.push((di, dj, w));
                }
            }
        }
        let j0: f64 = stencil.iter().map(|s| s.2).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = vec![[0.0f64; 3]; n * n];
        for j in 7..n - 7 {
            for i in 7..n - 7 {
                let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let s: f64 = rng.gen_range(0.0..0.95) / (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
                m[j * n + i] = [s * v[0], s * v[1], s * v[2]];
            }
        }
        let (mut quad, mut diff, mut sq) = (0.0, 0.0, 0.0);
        for j in 0..n as i64 {
            for i in 0..n as i64 {
                let a = m[(j as usize) * n + i as usize];
                sq += h * h * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
                for &(di, dj, w) in &stencil {
                    let (ii, jj) = (i + di, j + dj);
                    let b = if ii >= 0 && jj >= 0 && ii < n as i64 && jj < n as i64 { m[jj as usize * n + ii as usize] } else { [0.0; 3] };
                    quad += h * h * w * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
                    diff += h * h * w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2));
                }
            }
        }
        let u: f64 = m.iter().map(|v| potential_u(&p, (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).unwrap() * h * h).sum();
        let f1 = -0.5 * quad + 0.5 * j0 * sq + u;
        let f2 = 0.25 * diff + u;
        prop_assert!((f1 - f2).abs() < 1e-12 * f1.abs().max(1.0));
        prop_assert!((j0 - 1.3).abs() < 0.05);
    }
}
