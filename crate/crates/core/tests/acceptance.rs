//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nlscat::jost::{classify, coefficients_at, scattering_coefficients, Direction, JostSolver, VolterraScheme};
use nlscat::nls::{evolve_nls, x_norm, NlsConfig};
use nlscat::numerics::MomentumGrid;
use nlscat::potential::{build_potential, Classification, Family, Potential};
use nlscat::propagator::{decay_scan, evolve_linear, free_kernel, kernel_continuous, Mode};
use nlscat::scattering::{
    fit_convention, low_energy_limit, nonlinear_s_v, recover_lambda, sl_matrix, LambdaRecovery, CONVENTION,
};
use nlscat::spectral::{find_bound_states, inner_dx, norm_dx, SpectralData};
use nlscat::{SpatialGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() <= budget_s {
        Ok(())
    } else {
        Err(format!("runtime {:.1}s over {budget_s}s", elapsed.as_secs_f64()))
    }
}

fn fam_err<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn gaussian_barrier() -> Family {
    Family::Gaussian {
        amplitude: 0.3,
        width: 1.0,
    }
}

fn resonant_well() -> Family {
    Family::SquareWell {
        depth: (PI / 2.0).powi(2),
        half_width: 1.0,
    }
}

fn on_default(f: Family) -> Result<Potential, String> {
    fam_err(build_potential(f, &SpatialGrid::default_box()))
}

fn sd_on(f: Family, x_max: f64, n: usize, k_max: f64) -> Result<SpectralData, String> {
    let g = fam_err(SpatialGrid::symmetric(x_max, n))?;
    let v = fam_err(build_potential(f, &g))?;
    fam_err(SpectralData::with_kgrid(&v, MomentumGrid::dual_truncated(&g, k_max)))
}

fn c1_jost_closed_form() -> Outcome {
    let v = on_default(Family::PoschlTeller { s: 1.0 })?;
    let solver = JostSolver::new(&v);
    let i = C64::new(0.0, 1.0);
    let (mut m_err, mut t_err, mut r_err) = (0.0f64, 0.0f64, 0.0f64);
    for k in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let kc = C64::new(k, 0.0);
        let col = fam_err(solver.solve(Direction::One, kc, VolterraScheme::Marching))?;
        for j in 0..=400 {
            let x = -10.0 + 0.05 * j as f64;
            m_err = m_err.max((col.value(x) - (kc + i * x.tanh()) / (kc + i)).norm());
        }
        let co = fam_err(coefficients_at(&solver, k))?;
        t_err = t_err.max((co.t - (kc + i) / (kc - i)).norm());
        r_err = r_err.max(co.r1.norm().max(co.r2.norm()));
    }
    ensure(
        m_err < 1e-6 && t_err < 1e-6 && r_err < 1e-6,
        format!("sup|m1 - oracle| = {m_err:.2e}, |T - oracle| = {t_err:.2e}, |R| = {r_err:.2e}"),
    )
}

fn c2_unitarity() -> Outcome {
    let kg = fam_err(MomentumGrid::from_range(0.05, 8.0, 64))?;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for f in [
        Family::Zero,
        Family::SquareWell {
            depth: 1.0,
            half_width: 1.0,
        },
        Family::PoschlTeller { s: 1.0 },
        gaussian_barrier(),
    ] {
        let name = f.name();
        let sc = fam_err(scattering_coefficients(&on_default(f)?, &kg))?;
        let d = sc.max_unitarity_defect();
        worst = worst.max(d);
        parts.push(format!("{name} {d:.1e}"));
    }
    ensure(worst < 1e-8, format!("max defect {worst:.2e} ({})", parts.join(", ")))
}

fn c3_classification() -> Outcome {
    let cases = [
        (Family::Zero, Classification::Exceptional),
        (resonant_well(), Classification::Exceptional),
        (
            Family::SquareWell {
                depth: 1.0,
                half_width: 1.0,
            },
            Classification::Generic,
        ),
    ];
    let coarse = SpatialGrid::default_box();
    let fine = coarse.refined();
    let mut notes = Vec::new();
    let mut ok = true;
    for (f, want) in cases {
        let name = f.name();
        let a = fam_err(classify(&fam_err(build_potential(f.clone(), &coarse))?))?;
        let b = fam_err(classify(&fam_err(build_potential(f.clone(), &fine))?))?;
        ok &= a.classification == want && b.classification == want;
        if matches!(f, Family::Zero) {
            let a1 = a.a.unwrap_or(f64::NAN);
            ok &= (a1 - 1.0).abs() < 1e-8;
            notes.push(format!("zero a = {a1}"));
        }
        notes.push(format!("{name}: {} / {}", a.classification.as_str(), b.classification.as_str()));
    }
    ensure(ok, notes.join("; "))
}

/// `β` from RK4 shooting on `f'' = (V + β²)f` inward from `x = 20`, matched
/// to the even-parity condition `f'(0) = 0`.
fn shooting_beta(v: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let slope = |beta: f64| {
        let e = (-beta * 20.0f64).exp();
        let (mut f, mut fp, mut x) = (e, -beta * e, 20.0);
        let h = -1e-3;
        let rhs = |x: f64, f: f64, fp: f64| (fp, (v(x) + beta * beta) * f);
        for _ in 0..20_000 {
            let (a1, b1) = rhs(x, f, fp);
            let (a2, b2) = rhs(x + h / 2.0, f + a1 * h / 2.0, fp + b1 * h / 2.0);
            let (a3, b3) = rhs(x + h / 2.0, f + a2 * h / 2.0, fp + b2 * h / 2.0);
            let (a4, b4) = rhs(x + h, f + a3 * h, fp + b3 * h);
            f += (a1 + 2.0 * a2 + 2.0 * a3 + a4) * h / 6.0;
            fp += (b1 + 2.0 * b2 + 2.0 * b3 + b4) * h / 6.0;
            x += h;
        }
        fp / f
    };
    let (mut a, mut b) = (lo, hi);
    let sa = slope(a);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if slope(m) * sa > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn c4_bound_state() -> Outcome {
    let v = on_default(Family::PoschlTeller { s: 1.0 })?;
    let states = fam_err(find_bound_states(&v))?;
    if states.len() != 1 {
        return Err(format!("{} states found", states.len()));
    }
    let s = &states[0];
    let beta_shoot = shooting_beta(|x| -2.0 / x.cosh().powi(2), 0.5, 1.5);
    let grid = v.grid();
    let exact: Vec<C64> = grid
        .points()
        .iter()
        .map(|&x| C64::new(1.0 / (x.cosh() * 2f64.sqrt()), 0.0))
        .collect();
    let ov = inner_dx(&s.psi, &exact, grid);
    let phase = ov / ov.norm();
    let diff: Vec<C64> = s.psi.iter().zip(&exact).map(|(a, b)| a - phase * b).collect();
    let err = norm_dx(&diff, grid);
    let db = (s.beta - 1.0).abs();
    let ds = (s.beta - beta_shoot).abs();
    ensure(
        db < 1e-6 && ds < 1e-6 && err < 1e-5,
        format!("|β-1| = {db:.2e}, |β-β_shoot| = {ds:.2e}, ‖ψ - sech/√2‖ = {err:.2e}"),
    )
}

fn random_field(rng: &mut ChaCha8Rng, grid: &SpatialGrid) -> Vec<C64> {
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-4.0..4.0),
                rng.gen_range(1.0..2.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let u: Vec<C64> = grid
        .points()
        .iter()
        .map(|&x| {
            terms
                .iter()
                .map(|&(c, w, k, a, ph)| C64::from_polar(a * (-((x - c) / w).powi(2)).exp(), k * x + ph))
                .sum()
        })
        .collect();
    let n = norm_dx(&u, grid);
    u.iter().map(|z| z / n).collect()
}

fn c5_parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for f in [
        Family::PoschlTeller { s: 1.0 },
        Family::SquareWell {
            depth: 1.0,
            half_width: 1.0,
        },
        gaussian_barrier(),
        resonant_well(),
    ] {
        let name = f.name();
        let sd = fam_err(SpectralData::new(&on_default(f)?))?;
        let mut w = 0.0f64;
        for _ in 0..20 {
            let phi = random_field(&mut rng, sd.grid());
            let cont = sd.norm_k(&fam_err(sd.forward(&phi))?).powi(2);
            let bound: f64 = fam_err(sd.bound_coefficients(&phi))?.iter().map(|c| c.norm_sqr()).sum();
            w = w.max((cont + bound - 1.0).abs());
        }
        worst = worst.max(w);
        parts.push(format!("{name} {w:.1e}"));
    }
    ensure(worst < 1e-6, format!("max defect {worst:.2e} ({})", parts.join(", ")))
}

fn c6_free_kernel() -> Outcome {
    let mut modulus = 0.0f64;
    for t in [0.1, 0.5, 1.0, 3.0, 10.0] {
        for (x, y) in [(0.0, 0.0), (1.0, -2.0), (5.0, 3.5), (-7.0, 7.0)] {
            let k = fam_err(free_kernel(t, x, y))?;
            let want = 1.0 / (4.0 * PI * t).sqrt();
            modulus = modulus.max((k.norm() - want).abs() / want);
        }
    }
    let sd = fam_err(SpectralData::new(&Potential::zero(&SpatialGrid::default_box())))?;
    let xs = [-3.0, 0.0, 1.5, 4.0];
    let slice = fam_err(kernel_continuous(2.0, &sd, &xs, &xs))?;
    let mut kern = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            kern = kern.max((slice.get(i, j) - fam_err(free_kernel(2.0, x, y))?).norm());
        }
    }
    ensure(
        modulus < 1e-14 && kern < 1e-5,
        format!("relative modulus error {modulus:.1e}, V=0 continuous kernel error {kern:.2e}"),
    )
}

fn c7_decay() -> Outcome {
    let times = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let mut parts = Vec::new();
    let mut ok = true;
    for f in [Family::PoschlTeller { s: 1.0 }, resonant_well()] {
        let name = f.name();
        let sd = fam_err(SpectralData::new(&on_default(f)?))?;
        let r = fam_err(decay_scan(&sd, &times))?;
        ok &= r.max_over_min < 5.0;
        parts.push(format!("{name} {:.3}", r.max_over_min));
    }
    let sd = fam_err(SpectralData::new(&Potential::zero(&SpatialGrid::default_box())))?;
    let r = fam_err(decay_scan(&sd, &times))?;
    ok &= (r.max_over_min - 1.0).abs() < 1e-6;
    parts.push(format!("zero {:.2e} off 1", (r.max_over_min - 1.0).abs()));
    ensure(ok, format!("max/min of √t·sup|K_t|: {}", parts.join(", ")))
}

fn c8_nls_conservation() -> Outcome {
    let sd = sd_on(Family::PoschlTeller { s: -0.5 }, 30.0, 512, 8.0)?;
    let raw: Vec<C64> = sd
        .grid()
        .points()
        .iter()
        .map(|&x| C64::from_polar((-x * x / 8.0).exp(), 0.3 * x))
        .collect();
    let xn = fam_err(x_norm(&raw, &sd))?;
    let phi: Vec<C64> = raw.iter().map(|z| z * (0.3 / xn)).collect();
    let cfg = fam_err(NlsConfig::new(0.1, 5.0, 1e-3, 10.0))?;
    let traj = fam_err(evolve_nls(&phi, &cfg, &sd))?;
    let (dm, de) = (traj.mass_drift(), traj.energy_drift());
    // Self-convergence on a shorter, stronger run where the splitting error
    // dominates rounding.
    let strong: Vec<C64> = raw.iter().map(|z| z * 0.8).collect();
    let run = |dt: f64| -> Result<Vec<C64>, String> {
        let cfg = fam_err(NlsConfig::new(0.5, 5.0, dt, 1.0))?;
        Ok(fam_err(evolve_nls(&strong, &cfg, &sd))?.final_state.g)
    };
    let (a, b, c) = (run(0.1)?, run(0.05)?, run(0.025)?);
    let d = |x: &[C64], y: &[C64]| sd.norm_k(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
    let order = (d(&a, &b) / d(&b, &c)).log2();
    ensure(
        dm < 1e-8 && de < 1e-6 && (order - 2.0).abs() < 0.2,
        format!("mass drift {dm:.2e}, energy drift {de:.2e}, order {order:.3}"),
    )
}

fn c9_smatrix() -> Outcome {
    let sd = sd_on(gaussian_barrier(), 80.0, 4096, 4.0)?;
    let mut worst = 0.0f64;
    let mut unit = 0.0f64;
    for k in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let s = fam_err(sl_matrix(k, &sd))?;
        worst = worst.max(s.defect_vs_jost);
        unit = unit.max(s.unitarity_defect);
    }
    ensure(
        worst < 2e-3,
        format!("max |sl_matrix - Jost| = {worst:.2e}, max unitarity defect {unit:.2e}"),
    )
}

fn standard_gaussian(sd: &SpectralData) -> Vec<C64> {
    sd.grid().points().iter().map(|&x| C64::new((-x * x / 2.0).exp(), 0.0)).collect()
}

fn c10_x_norm() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, f) in [("zero", Family::Zero), ("gaussian", gaussian_barrier())] {
        let sd = sd_on(f, 80.0, 1024, 5.0)?;
        let raw = standard_gaussian(&sd);
        let xn = fam_err(x_norm(&raw, &sd))?;
        let phi: Vec<C64> = raw.iter().map(|z| z * (0.3 / xn)).collect();
        for lambda in [0.1, -0.1] {
            let cfg = fam_err(NlsConfig::new(lambda, 5.0, 0.01, 1.0))?;
            let out = fam_err(nonlinear_s_v(&phi, &cfg, &sd, 40.0))?;
            let d = (out.x_norm_plus - out.x_norm_minus).abs();
            worst = worst.max(d);
            parts.push(format!("{name} λ={lambda}: {d:.1e} (T={})", out.horizon));
        }
    }
    ensure(worst < 1e-4, parts.join(", "))
}

/// `∫_{-T}^{T}‖e^{-itH}φ‖₆⁶ dt` by Simpson's rule on a uniform grid, via the
/// propagator.
fn born_denominator(phi: &[C64], horizon: f64, sd: &SpectralData) -> Result<f64, String> {
    let n = (2.0 * horizon / 0.1).round() as usize;
    let n = n + n % 2;
    let h = 2.0 * horizon / n as f64;
    let dx = sd.grid().dx();
    let mut sum = 0.0;
    for j in 0..=n {
        let t = -horizon + h * j as f64;
        let u = fam_err(evolve_linear(phi, t, sd, Mode::Full))?;
        let f: f64 = u.iter().map(|z| z.norm_sqr().powi(3)).sum::<f64>() * dx;
        let w = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * f;
    }
    Ok(sum * h / 3.0)
}

fn c11_lambda_recovery() -> Outcome {
    let eps = [0.2, 0.1, 0.05];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, f, x_max, n) in [
        ("zero", Family::Zero, 80.0, 1024),
        ("gaussian", gaussian_barrier(), 160.0, 2048),
    ] {
        let sd = sd_on(f.clone(), x_max, n, 5.0)?;
        let phi = standard_gaussian(&sd);
        for lambda in [-0.08, 0.05] {
            let cfg = fam_err(NlsConfig::new(lambda, 5.0, 0.01, 1.0))?;
            let r: LambdaRecovery = fam_err(recover_lambda(&phi, &cfg, &sd, &eps, 40.0))?;
            let rel = (r.calibrated - lambda).abs() / lambda.abs();
            let born = match f {
                // Free Gaussian: ∫‖e^{itΔ}e^{-x²/2}‖₆⁶ dt = √(π/3)·atan(2T) on [-T, T].
                Family::Zero => (PI / 3.0).sqrt() * (2.0 * r.horizon).atan(),
                _ => born_denominator(&phi, r.horizon, &sd)?,
            };
            let numerator = r.extrapolated * r.denominator;
            let born_numerator = C64::new(0.0, -lambda) * born;
            let born_rel = (numerator - born_numerator).norm() / born_numerator.norm();
            let (kappa, _) = fit_convention(r.extrapolated, lambda);
            ok &= rel < 0.1 && born_rel < 0.05 && kappa == CONVENTION;
            parts.push(format!(
                "{name} λ={lambda}: λ̂={:.5} rel {rel:.1e}, Born {born_rel:.1e}, κ={}",
                r.calibrated, kappa
            ));
        }
    }
    ensure(ok, parts.join("; "))
}

fn c12_low_energy() -> Outcome {
    let eps = [0.2, 0.1, 0.05];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, f, x_max, n) in [
        ("zero", Family::Zero, 80.0, 1024),
        ("gaussian", gaussian_barrier(), 160.0, 2048),
    ] {
        let sd = sd_on(f, x_max, n, 5.0)?;
        let phi = standard_gaussian(&sd);
        let psi: Vec<C64> = sd
            .grid()
            .points()
            .iter()
            .map(|&x| C64::from_polar((-(x - 1.0) * (x - 1.0) / 2.0).exp(), 0.5 * x))
            .collect();
        let cfg = fam_err(NlsConfig::new(0.1, 5.0, 0.01, 1.0))?;
        let table = fam_err(low_energy_limit(&phi, &psi, &cfg, &sd, &eps, 40.0))?;
        let first = table.rows.first().map(|r| r.defect).unwrap_or(f64::NAN);
        let last = table.rows.last().map(|r| r.defect).unwrap_or(f64::NAN);
        ok &= last < first && last < 0.02;
        parts.push(format!("{name}: ε=0.2 {first:.2e}, ε=0.05 {last:.2e}"));
    }
    ensure(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, f64); 12] = [
        ("1 Jost closed form", c1_jost_closed_form, 5.0),
        ("2 unitarity", c2_unitarity, 30.0),
        ("3 classification", c3_classification, 10.0),
        ("4 bound state", c4_bound_state, 5.0),
        ("5 completeness/Parseval", c5_parseval, 60.0),
        ("6 free kernel", c6_free_kernel, f64::INFINITY),
        ("7 dispersive decay", c7_decay, 600.0),
        ("8 NLS conservation", c8_nls_conservation, 120.0),
        ("9 S-matrix identity", c9_smatrix, 300.0),
        ("10 X-norm identity", c10_x_norm, 180.0),
        ("11 coupling recovery", c11_lambda_recovery, 900.0),
        ("12 low-energy limit", c12_low_energy, f64::INFINITY),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|d| within(elapsed, budget).map(|_| d));
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{:.1}s]", elapsed.as_secs_f64()),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{:.1}s]", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
