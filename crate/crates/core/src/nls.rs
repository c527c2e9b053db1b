//! Nonlinear Schrödinger evolution `i u_t = Hu + λ|u|^{p-1}u` by Strang
//! splitting in the spectral representation of `H`.

use crate::error::{Error, Result};
use crate::io::csv;
use crate::numerics::{all_finite, check_aligned, C64};
use crate::spectral::SpectralData;

/// Smallest admissible power.
pub const P_MIN: f64 = 5.0;
/// Bound on `|λ|·sup|u₀|^{p-1}·dt` for the stability advisory.
pub const ADVISORY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct NlsConfig {
    pub lambda: f64,
    pub p: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Store the field every this many steps; 0 stores only the endpoints.
    pub snapshot_every: usize,
}

impl NlsConfig {
    pub fn new(lambda: f64, p: f64, dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            p,
            dt,
            t_end,
            snapshot_every: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_snapshots(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= P_MIN) || !self.p.is_finite() {
            return Err(Error::Validation(format!("p = {} must be ≥ {P_MIN}", self.p)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Validation(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Validation(format!("t_end = {} must be ≥ 0", self.t_end)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Validation("λ must be finite".into()));
        }
        Ok(())
    }

    /// `|λ|·(sup|u₀|)^{p-1}·dt < 0.1`.
    pub fn advisory_holds(&self, sup_abs: f64) -> bool {
        self.lambda.abs() * sup_abs.powf(self.p - 1.0) * self.dt < ADVISORY
    }
}

/// `λ|u|^{p-1}u`, zero at `u = 0`.
pub fn nonlinearity(u: C64, lambda: f64, p: f64) -> C64 {
    let r = u.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    u * (lambda * r.powf(p - 1.0))
}

/// `F(μ) = λμ^{p+1}/(p+1)`.
pub fn primitive(mu: f64, lambda: f64, p: f64) -> f64 {
    lambda * mu.powf(p + 1.0) / (p + 1.0)
}

/// Field in the spectral representation: `g = F₊u` and `c_j = ⟨u, ψ_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub g: Vec<C64>,
    pub c: Vec<C64>,
}

impl SpectralState {
    pub fn from_field(u: &[C64], sd: &SpectralData) -> Result<Self> {
        Ok(Self {
            g: sd.forward(u)?,
            c: sd.bound_coefficients(u)?,
        })
    }

    pub fn to_field(&self, sd: &SpectralData) -> Result<Vec<C64>> {
        let mut u = sd.adjoint(&self.g)?;
        for (c, b) in self.c.iter().zip(sd.bound_states()) {
            for (o, p) in u.iter_mut().zip(&b.psi) {
                *o += c * p;
            }
        }
        Ok(u)
    }

    /// `e^{-itH}` applied exactly.
    pub fn propagate(&mut self, t: f64, sd: &SpectralData) {
        for (g, &k) in self.g.iter_mut().zip(sd.kgrid().values()) {
            *g *= C64::from_polar(1.0, -k * k * t);
        }
        for (c, b) in self.c.iter_mut().zip(sd.bound_states()) {
            *c *= C64::from_polar(1.0, b.beta * b.beta * t);
        }
    }

    pub fn mass(&self, sd: &SpectralData) -> f64 {
        sd.norm_k(&self.g).powi(2) + self.c.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `⟨Hu, u⟩`.
    pub fn kinetic(&self, sd: &SpectralData) -> f64 {
        let cont: f64 = self
            .g
            .iter()
            .zip(sd.kgrid().values())
            .map(|(g, k)| k * k * g.norm_sqr())
            .sum::<f64>()
            * sd.kgrid().dk();
        let bound: f64 = self
            .c
            .iter()
            .zip(sd.bound_states())
            .map(|(c, b)| b.beta * b.beta * c.norm_sqr())
            .sum();
        cont - bound
    }

    /// `‖u‖_X² = ⟨(H+1)u, u⟩`.
    pub fn x_norm_sqr(&self, sd: &SpectralData) -> f64 {
        self.kinetic(sd) + self.mass(sd)
    }

    fn add_field(&mut self, delta: &[C64], sd: &SpectralData) -> Result<()> {
        for (g, d) in self.g.iter_mut().zip(sd.forward(delta)?) {
            *g += d;
        }
        for (c, d) in self.c.iter_mut().zip(sd.bound_coefficients(delta)?) {
            *c += d;
        }
        Ok(())
    }
}

/// `‖u‖_X` through the spectral maps.
pub fn x_norm(u: &[C64], sd: &SpectralData) -> Result<f64> {
    Ok(SpectralState::from_field(u, sd)?.x_norm_sqr(sd).max(0.0).sqrt())
}

/// Exact flow of `i u_t = λ|u|^{p-1}u` over `dt`: the modulus is invariant.
fn rotate(u: &[C64], dt: f64, lambda: f64, p: f64) -> Vec<C64> {
    u.iter()
        .map(|&z| {
            let r = z.norm();
            if r == 0.0 {
                z
            } else {
                z * C64::from_polar(1.0, -dt * lambda * r.powf(p - 1.0))
            }
        })
        .collect()
}

/// One Strang step on the spectral state.
pub fn step_spectral(state: &mut SpectralState, dt: f64, lambda: f64, p: f64, sd: &SpectralData) -> Result<()> {
    state.propagate(0.5 * dt, sd);
    if lambda != 0.0 {
        let u = state.to_field(sd)?;
        if !all_finite(&u) {
            return Err(Error::Overflow { t: f64::NAN });
        }
        let rotated = rotate(&u, dt, lambda, p);
        let delta: Vec<C64> = rotated.iter().zip(&u).map(|(a, b)| a - b).collect();
        state.add_field(&delta, sd)?;
    }
    state.propagate(0.5 * dt, sd);
    if !all_finite(&state.g) || !all_finite(&state.c) {
        return Err(Error::Overflow { t: f64::NAN });
    }
    Ok(())
}

/// `e^{-i(dt/2)H} ∘ N_dt ∘ e^{-i(dt/2)H}` on a field.
pub fn step(u: &[C64], dt: f64, cfg: &NlsConfig, sd: &SpectralData) -> Result<Vec<C64>> {
    check_aligned(u, sd.grid().len())?;
    if !all_finite(u) {
        return Err(Error::Overflow { t: f64::NAN });
    }
    let mut s = SpectralState::from_field(u, sd)?;
    step_spectral(&mut s, dt, cfg.lambda, cfg.p, sd)?;
    s.to_field(sd)
}

/// `(mass, energy)` with energy `½⟨Hu,u⟩ + ∫F(|u|)`.
pub fn conserved_quantities(u: &[C64], cfg: &NlsConfig, sd: &SpectralData) -> Result<(f64, f64)> {
    check_aligned(u, sd.grid().len())?;
    let s = SpectralState::from_field(u, sd)?;
    Ok((s.mass(sd), 0.5 * s.kinetic(sd) + potential_energy(u, cfg, sd)))
}

/// `∫F(|u|) dx`.
pub fn potential_energy(u: &[C64], cfg: &NlsConfig, sd: &SpectralData) -> f64 {
    u.iter().map(|z| primitive(z.norm(), cfg.lambda, cfg.p)).sum::<f64>() * sd.grid().dx()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// `½⟨Hu,u⟩ + ∫F`.
    pub energy: Vec<f64>,
    /// `½‖u‖_X² + ∫F`.
    pub energy_x: Vec<f64>,
    pub sup_abs: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Vec<C64>>,
    pub advisory_holds: bool,
    pub final_state: SpectralState,
}

impl Trajectory {
    fn drift(v: &[f64]) -> f64 {
        let v0 = v[0];
        let scale = if v0 != 0.0 { v0.abs() } else { 1.0 };
        v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max) / scale
    }

    /// `max |m(t) - m(0)| / m(0)`.
    pub fn mass_drift(&self) -> f64 {
        Self::drift(&self.mass)
    }

    pub fn energy_drift(&self) -> f64 {
        Self::drift(&self.energy)
    }

    pub fn energy_x_drift(&self) -> f64 {
        Self::drift(&self.energy_x)
    }

    pub fn to_csv(&self) -> String {
        csv(
            &["t", "mass", "energy", "sup_abs"],
            (0..self.times.len()).map(|i| [self.times[i], self.mass[i], self.energy[i], self.sup_abs[i]]),
        )
    }

    /// Snapshot rows `(t, x, Re u, Im u)`.
    pub fn snapshots_csv(&self, sd: &SpectralData) -> String {
        let xs = sd.grid().points();
        let rows = self.snapshot_times.iter().zip(&self.snapshots).flat_map(|(&t, u)| {
            xs.iter().zip(u).map(move |(&x, z)| [t, x, z.re, z.im]).collect::<Vec<_>>()
        });
        csv(&["t", "x", "ReU", "ImU"], rows)
    }
}

/// Integrates from `0` to `cfg.t_end` with fixed step `cfg.dt` (the last
/// step is shortened to land on `t_end`).
pub fn evolve_nls(phi: &[C64], cfg: &NlsConfig, sd: &SpectralData) -> Result<Trajectory> {
    cfg.validate()?;
    check_aligned(phi, sd.grid().len())?;
    let mut state = SpectralState::from_field(phi, sd)?;
    let sup0 = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut traj = Trajectory {
        times: Vec::new(),
        mass: Vec::new(),
        energy: Vec::new(),
        energy_x: Vec::new(),
        sup_abs: Vec::new(),
        snapshot_times: Vec::new(),
        snapshots: Vec::new(),
        advisory_holds: cfg.advisory_holds(sup0),
        final_state: state.clone(),
    };
    let record = |traj: &mut Trajectory, t: f64, state: &SpectralState, snap: bool| -> Result<()> {
        let u = state.to_field(sd)?;
        if !all_finite(&u) {
            return Err(Error::Overflow { t });
        }
        let pe = potential_energy(&u, cfg, sd);
        let (m, kin) = (state.mass(sd), state.kinetic(sd));
        traj.times.push(t);
        traj.mass.push(m);
        traj.energy.push(0.5 * kin + pe);
        traj.energy_x.push(0.5 * (kin + m) + pe);
        traj.sup_abs.push(u.iter().map(|z| z.norm()).fold(0.0, f64::max));
        if snap {
            traj.snapshot_times.push(t);
            traj.snapshots.push(u);
        }
        Ok(())
    };
    record(&mut traj, 0.0, &state, true)?;
    let n = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let mut t = 0.0;
    for i in 1..=n {
        let h = if i == n { cfg.t_end - t } else { cfg.dt };
        step_spectral(&mut state, h, cfg.lambda, cfg.p, sd).map_err(|e| match e {
            Error::Overflow { .. } => Error::Overflow { t },
            other => other,
        })?;
        t = if i == n { cfg.t_end } else { i as f64 * cfg.dt };
        let snap = i == n || (cfg.snapshot_every > 0 && i % cfg.snapshot_every == 0);
        record(&mut traj, t, &state, snap)?;
    }
    traj.final_state = state;
    Ok(traj)
}

/// `‖u(t) - e^{-itH}φ + i∫₀ᵗ e^{-i(t-τ)H} N(u(τ)) dτ‖₂` at the last snapshot,
/// using the trapezoid rule over the stored snapshots in the interaction
/// picture.
pub fn duhamel_residual(traj: &Trajectory, phi: &[C64], cfg: &NlsConfig, sd: &SpectralData) -> Result<f64> {
    let n = traj.snapshots.len();
    if n < 2 {
        return Err(Error::Domain("Duhamel residual needs at least two snapshots".into()));
    }
    let t_end = traj.snapshot_times[n - 1];
    let integrand = |j: usize| -> Result<SpectralState> {
        let nl: Vec<C64> = traj.snapshots[j]
            .iter()
            .map(|&z| nonlinearity(z, cfg.lambda, cfg.p))
            .collect();
        let mut s = SpectralState::from_field(&nl, sd)?;
        s.propagate(-traj.snapshot_times[j], sd);
        Ok(s)
    };
    let mut acc = SpectralState {
        g: vec![C64::new(0.0, 0.0); sd.kgrid().len()],
        c: vec![C64::new(0.0, 0.0); sd.bound_states().len()],
    };
    let mut prev = integrand(0)?;
    for j in 1..n {
        let cur = integrand(j)?;
        let h = 0.5 * (traj.snapshot_times[j] - traj.snapshot_times[j - 1]);
        for ((a, x), y) in acc.g.iter_mut().zip(&prev.g).zip(&cur.g) {
            *a += (x + y) * h;
        }
        for ((a, x), y) in acc.c.iter_mut().zip(&prev.c).zip(&cur.c) {
            *a += (x + y) * h;
        }
        prev = cur;
    }
    let mut lin = SpectralState::from_field(phi, sd)?;
    let i = C64::new(0.0, 1.0);
    for (l, a) in lin.g.iter_mut().zip(&acc.g) {
        *l -= i * a;
    }
    for (l, a) in lin.c.iter_mut().zip(&acc.c) {
        *l -= i * a;
    }
    lin.propagate(t_end, sd);
    let u = SpectralState::from_field(&traj.snapshots[n - 1], sd)?;
    let diff = SpectralState {
        g: u.g.iter().zip(&lin.g).map(|(a, b)| a - b).collect(),
        c: u.c.iter().zip(&lin.c).map(|(a, b)| a - b).collect(),
    };
    Ok(diff.mass(sd).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{MomentumGrid, SpatialGrid};
    use crate::potential::{build_potential, Family, Potential};
    use crate::propagator::{evolve_linear, Mode};
    use crate::spectral::norm_dx;
    use proptest::prelude::*;

    fn small_grid() -> SpatialGrid {
        SpatialGrid::symmetric(30.0, 512).unwrap()
    }

    fn sd_for(family: Family) -> SpectralData {
        let g = small_grid();
        let v = build_potential(family, &g).unwrap();
        SpectralData::with_kgrid(&v, MomentumGrid::dual_truncated(&g, 8.0)).unwrap()
    }

    fn packet(sd: &SpectralData, amp: f64) -> Vec<C64> {
        sd.grid()
            .points()
            .iter()
            .map(|&x| C64::from_polar(amp * (-x * x / 8.0).exp(), 0.3 * x))
            .collect()
    }

    fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn nonlinearity_values() {
        assert_eq!(nonlinearity(C64::new(0.0, 0.0), 1.0, 5.0), C64::new(0.0, 0.0));
        assert!((nonlinearity(C64::new(2.0, 0.0), 1.0, 5.0) - C64::new(32.0, 0.0)).norm() < 1e-12);
        assert!((primitive(2.0, 1.0, 5.0) - 64.0 / 6.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nonlinearity_gauge(re in -3.0f64..3.0, im in -3.0f64..3.0, th in 0.0f64..6.3, lam in -1.0f64..1.0) {
            let u = C64::new(re, im);
            let e = C64::from_polar(1.0, th);
            let a = nonlinearity(e * u, lam, 5.0);
            let b = e * nonlinearity(u, lam, 5.0);
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(NlsConfig::new(0.1, 3.0, 1e-3, 1.0), Err(Error::Validation(_))));
        assert!(matches!(NlsConfig::new(0.1, 5.0, 0.0, 1.0), Err(Error::Validation(_))));
        assert!(NlsConfig::new(0.1, 5.0, 1e-3, 1.0).unwrap().advisory_holds(1.0));
        assert!(!NlsConfig::new(10.0, 5.0, 0.1, 1.0).unwrap().advisory_holds(1.0));
    }

    #[test]
    fn linear_limit_matches_propagator() {
        let sd = sd_for(Family::PoschlTeller { s: 1.0 });
        let phi = packet(&sd, 0.3);
        let cfg = NlsConfig::new(0.0, 5.0, 0.05, 1.0).unwrap();
        let u = step(&phi, 0.05, &cfg, &sd).unwrap();
        let lin = evolve_linear(&phi, 0.05, &sd, Mode::Full).unwrap();
        assert!(norm_dx(&diff(&u, &lin), sd.grid()) < 1e-10);
        let traj = evolve_nls(&phi, &cfg, &sd).unwrap();
        let lin = evolve_linear(&phi, 1.0, &sd, Mode::Full).unwrap();
        assert!(norm_dx(&diff(traj.snapshots.last().unwrap(), &lin), sd.grid()) < 1e-8);
    }

    #[test]
    fn constant_field_rotates() {
        // V = 0 and the dual grid: a constant field is the k ≈ 0 plane wave up
        // to the half-shift, so compare with the exact flow at k = ±dk/2.
        let g = SpatialGrid::symmetric(30.0, 256).unwrap();
        let sd = SpectralData::with_kgrid(&Potential::zero(&g), MomentumGrid::dual(&g)).unwrap();
        let k0 = sd.kgrid().values()[sd.kgrid().len() / 2];
        let a = 0.5;
        let phi: Vec<C64> = g.points().iter().map(|&x| C64::from_polar(a, k0 * x)).collect();
        let cfg = NlsConfig::new(0.2, 5.0, 0.01, 1.0).unwrap();
        let traj = evolve_nls(&phi, &cfg, &sd).unwrap();
        let phase = -(k0 * k0 + 0.2 * a.powi(4));
        let exact: Vec<C64> = phi.iter().map(|z| z * C64::from_polar(1.0, phase)).collect();
        assert!(norm_dx(&diff(traj.snapshots.last().unwrap(), &exact), &g) < 1e-10);
    }

    #[test]
    fn conservation_gauge_and_reversibility() {
        let sd = sd_for(Family::Gaussian { amplitude: 0.3, width: 1.0 });
        let phi = packet(&sd, 0.6);
        let cfg = NlsConfig::new(0.1, 5.0, 0.01, 2.0).unwrap();
        let traj = evolve_nls(&phi, &cfg, &sd).unwrap();
        assert!(traj.mass_drift() < 1e-8, "{}", traj.mass_drift());
        assert!(traj.energy_drift() < 1e-6, "{}", traj.energy_drift());
        assert!(traj.energy_x_drift() < 1e-6);
        let e = C64::from_polar(1.0, 0.7);
        let rot: Vec<C64> = phi.iter().map(|z| z * e).collect();
        let tr = evolve_nls(&rot, &cfg, &sd).unwrap();
        let expect: Vec<C64> = traj.snapshots.last().unwrap().iter().map(|z| z * e).collect();
        assert!(norm_dx(&diff(tr.snapshots.last().unwrap(), &expect), sd.grid()) < 1e-10);
        let mut s = SpectralState::from_field(&phi, &sd).unwrap();
        let s0 = s.clone();
        step_spectral(&mut s, 0.05, 0.1, 5.0, &sd).unwrap();
        step_spectral(&mut s, -0.05, 0.1, 5.0, &sd).unwrap();
        let d: Vec<C64> = s.g.iter().zip(&s0.g).map(|(a, b)| a - b).collect();
        assert!(sd.norm_k(&d) < 1e-9, "{}", sd.norm_k(&d));
    }

    #[test]
    fn second_order() {
        let sd = sd_for(Family::Gaussian { amplitude: 0.3, width: 1.0 });
        let phi = packet(&sd, 0.8);
        let run = |dt: f64| {
            let cfg = NlsConfig::new(0.5, 5.0, dt, 1.0).unwrap();
            evolve_nls(&phi, &cfg, &sd).unwrap().final_state
        };
        let (a, b, c) = (run(0.1), run(0.05), run(0.025));
        let e1: Vec<C64> = a.g.iter().zip(&b.g).map(|(x, y)| x - y).collect();
        let e2: Vec<C64> = b.g.iter().zip(&c.g).map(|(x, y)| x - y).collect();
        let order = (sd.norm_k(&e1) / sd.norm_k(&e2)).log2();
        assert!((order - 2.0).abs() < 0.2, "{order}");
    }

    #[test]
    fn duhamel_identity() {
        let sd = sd_for(Family::Gaussian { amplitude: 0.3, width: 1.0 });
        let phi = packet(&sd, 0.8);
        let cfg = NlsConfig::new(0.3, 5.0, 1e-3, 1.0).unwrap().with_snapshots(5);
        let traj = evolve_nls(&phi, &cfg, &sd).unwrap();
        let r = duhamel_residual(&traj, &phi, &cfg, &sd).unwrap();
        assert!(r < 5e-4, "{r}");
        // Without the integral term the residual is of the size of the
        // nonlinear effect, so the check is not vacuous.
        let lin = evolve_linear(&phi, 1.0, &sd, Mode::Full).unwrap();
        assert!(norm_dx(&diff(traj.snapshots.last().unwrap(), &lin), sd.grid()) > 100.0 * r);
    }

    #[test]
    fn energy_pieces() {
        let sd = sd_for(Family::Gaussian { amplitude: 0.3, width: 1.0 });
        let zero = vec![C64::new(0.0, 0.0); sd.grid().len()];
        let cfg = NlsConfig::new(0.1, 5.0, 1e-3, 1.0).unwrap();
        assert_eq!(conserved_quantities(&zero, &cfg, &sd).unwrap(), (0.0, 0.0));
        let u = packet(&sd, 0.5);
        let cfg0 = NlsConfig::new(0.0, 5.0, 1e-3, 1.0).unwrap();
        let (_, e0) = conserved_quantities(&u, &cfg0, &sd).unwrap();
        // ⟨Hu,u⟩ = ∫|u′|² + ∫V|u|²; for u = a e^{-x²/8 + 0.3ix},
        // ∫|u′|² = a²√π(1/4 + 2·0.09).
        let dx = sd.grid().dx();
        let v = sd.potential().values();
        let pot: f64 = u.iter().zip(v).map(|(z, v)| v * z.norm_sqr()).sum::<f64>() * dx;
        let hu = 0.25 * std::f64::consts::PI.sqrt() * (0.25 + 0.18) + pot;
        assert!((e0 - 0.5 * hu).abs() < 1e-8, "{e0} {}", 0.5 * hu);
        let (_, e1) = conserved_quantities(&u, &cfg, &sd).unwrap();
        let l6: f64 = u.iter().map(|z| z.norm().powi(6)).sum::<f64>() * dx;
        assert!((e1 - e0 - 0.1 * l6 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn overflow_is_reported() {
        let sd = sd_for(Family::Zero);
        let mut phi = packet(&sd, 0.1);
        phi[10] = C64::new(f64::NAN, 0.0);
        let cfg = NlsConfig::new(0.1, 5.0, 0.01, 0.1).unwrap();
        assert!(matches!(step(&phi, 0.01, &cfg, &sd), Err(Error::Overflow { .. })));
    }
}
