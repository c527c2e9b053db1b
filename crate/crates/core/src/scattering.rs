//! Wave operators, linear and nonlinear scattering operators and recovery
//! of the coupling constant from low-energy scattering data.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{csv, json_num, json_nums};
use crate::jost::{coefficients_at, coefficients_from, Direction};
use crate::nls::{step_spectral, NlsConfig, SpectralState};
use crate::numerics::{
    check_aligned, fourier_forward, fourier_inverse, fourier_inverse_on, fourier_on, SpatialGrid, C64,
    FRAC_1_SQRT_2PI,
};
use crate::spectral::{inner_dx, SpectralData};

/// `t → -∞` or `t → +∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

/// Which generalized Fourier map a wave operator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `F₊`
    Plus,
    /// `F₋`
    Minus,
}

/// `W_- = F₊*F`, `W_+ = F₋*F`; checked by [`calibrate_wave_operators`].
pub fn pinned_branch(sign: Sign) -> Branch {
    match sign {
        Sign::Minus => Branch::Plus,
        Sign::Plus => Branch::Minus,
    }
}

/// Times `|t|` of the calibration protocol.
pub const CALIBRATION_TIMES: [f64; 3] = [10.0, 20.0, 40.0];
/// Largest admissible calibration defect at the last time.
pub const CALIBRATION_BOUND: f64 = 0.05;
/// Convention factor mapping the raw extrapolate to `λ`.
pub const CONVENTION: C64 = C64::new(0.0, 1.0);
/// Momentum width of the `sl_matrix` packets.
pub const PACKET_WIDTH: f64 = 0.1;
/// Nodes in the interpolation of channel ratios.
const STENCIL: usize = 6;
pub const DEFAULT_HORIZON: f64 = 40.0;
pub const MAX_HORIZON: f64 = 640.0;
/// Horizon doubling stops once `φ₊` moves less than this in `X`-norm.
pub const HORIZON_TOL: f64 = 1e-4;
/// Longest step of the graded time grid.
pub const MAX_STEP: f64 = 0.5;
/// Largest accepted relative tail of the denominator integral.
pub const DENOMINATOR_TAIL_TOL: f64 = 0.05;

pub fn require_no_bound_states(sd: &SpectralData) -> Result<()> {
    if sd.bound_states().is_empty() {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!(
            "H has {} negative eigenvalue(s); scattering needs none",
            sd.bound_states().len()
        )))
    }
}

fn fourier(phi: &[C64], sd: &SpectralData) -> Vec<C64> {
    fourier_on(phi, sd.grid(), sd.kgrid())
}

fn fourier_inv(g: &[C64], sd: &SpectralData) -> Vec<C64> {
    fourier_inverse_on(g, sd.grid(), sd.kgrid())
}

fn adjoint_branch(branch: Branch, g: &[C64], sd: &SpectralData) -> Result<Vec<C64>> {
    match branch {
        Branch::Plus => sd.adjoint(g),
        Branch::Minus => sd.adjoint_minus(g),
    }
}

fn forward_branch(branch: Branch, phi: &[C64], sd: &SpectralData) -> Result<Vec<C64>> {
    match branch {
        Branch::Plus => sd.forward(phi),
        Branch::Minus => sd.forward_minus(phi),
    }
}

/// `W_± φ`.
pub fn wave_operator(phi: &[C64], sign: Sign, sd: &SpectralData) -> Result<Vec<C64>> {
    require_no_bound_states(sd)?;
    check_aligned(phi, sd.grid().len())?;
    adjoint_branch(pinned_branch(sign), &fourier(phi, sd), sd)
}

/// `W_±* φ = F* F_σ φ`.
pub fn wave_operator_adjoint(phi: &[C64], sign: Sign, sd: &SpectralData) -> Result<Vec<C64>> {
    require_no_bound_states(sd)?;
    check_aligned(phi, sd.grid().len())?;
    Ok(fourier_inv(&forward_branch(pinned_branch(sign), phi, sd)?, sd))
}

/// `S_L = W₊* W₋`.
pub fn linear_s(phi: &[C64], sd: &SpectralData) -> Result<Vec<C64>> {
    let w = wave_operator(phi, Sign::Minus, sd)?;
    wave_operator_adjoint(&w, Sign::Plus, sd)
}

/// Evaluates `F₊f` and `F₋f` on the continuum grid of `sd` for fields
/// sampled on a larger box that contains `sd`'s grid.
struct FarField<'a> {
    sd: &'a SpectralData,
    grid: SpatialGrid,
}

impl<'a> FarField<'a> {
    /// A box with the same spacing as `sd`, wide enough to hold free
    /// evolution up to `|t| = t_max` of a field with momenta below `k_eff`.
    fn new(sd: &'a SpectralData, t_max: f64, k_eff: f64) -> Result<Self> {
        let g = sd.grid();
        let dx = g.dx();
        let half = g.x_max().max(-g.x_min()) + 2.0 * t_max * k_eff + 10.0;
        let mut n = g.len();
        while (n as f64 - 1.0) * dx < 2.0 * half {
            n *= 2;
        }
        let grid = SpatialGrid::symmetric(0.5 * (n as f64 - 1.0) * dx, n)?;
        Ok(Self { sd, grid })
    }

    fn embed(&self, phi: &[C64]) -> Vec<C64> {
        let off = (self.grid.len() - self.sd.grid().len()) / 2;
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        out[off..off + phi.len()].copy_from_slice(phi);
        out
    }

    fn free_evolve(&self, big: &[C64], t: f64) -> Result<Vec<C64>> {
        let (kg, hat) = fourier_forward(big, &self.grid)?;
        let hat: Vec<C64> = hat
            .iter()
            .zip(kg.values())
            .map(|(h, &k)| h * C64::from_polar(1.0, -k * k * t))
            .collect();
        fourier_inverse(&hat, &self.grid)
    }

    /// `(F₊f_i, F₋f_i)` for each field.
    fn transforms(&self, fields: &[Vec<C64>]) -> Result<Vec<(Vec<C64>, Vec<C64>)>> {
        let sd = self.sd;
        let solver = sd.solver();
        let xs = self.grid.points();
        let dx = self.grid.dx();
        let locs: Vec<_> = xs.iter().map(|&x| solver.locate(x)).collect();
        let nk = sd.kgrid().len();
        let mut out: Vec<(Vec<C64>, Vec<C64>)> =
            fields.iter().map(|_| (vec![C64::new(0.0, 0.0); nk], vec![C64::new(0.0, 0.0); nk])).collect();
        let mut pos = vec![C64::new(0.0, 0.0); xs.len()];
        let mut neg = vec![C64::new(0.0, 0.0); xs.len()];
        for (m, &k) in sd.kgrid().values().iter().enumerate() {
            if k < 0.0 {
                continue;
            }
            let mirror = sd.kgrid().mirror_index(m);
            let kc = C64::new(k, 0.0);
            let c1 = solver.solve_fast(Direction::One, kc)?;
            let c2 = solver.solve_fast(Direction::Two, kc)?;
            let s = coefficients_from(&c1, &c2)?.t * FRAC_1_SQRT_2PI * dx;
            for (j, loc) in locs.iter().enumerate() {
                let ph = C64::from_polar(1.0, k * xs[j]);
                pos[j] = s * ph * c1.eval_at(loc).0;
                neg[j] = s * ph.conj() * c2.eval_at(loc).0;
            }
            for (f, (fp, fm)) in fields.iter().zip(out.iter_mut()) {
                let (mut a, mut b, mut c, mut d) = (C64::default(), C64::default(), C64::default(), C64::default());
                for j in 0..xs.len() {
                    let v = f[j];
                    a += pos[j].conj() * v;
                    b += neg[j].conj() * v;
                    c += neg[j] * v;
                    d += pos[j] * v;
                }
                // F₊f(k), F₊f(-k), F₋f(k) = ∫Ψ₊(x,-k)f, F₋f(-k) = ∫Ψ₊(x,k)f.
                fp[m] = a;
                fp[mirror] = b;
                fm[m] = c;
                fm[mirror] = d;
            }
        }
        Ok(out)
    }
}

/// Largest `|k|` on the continuum grid where `|ĝ|` exceeds `1e-10·max|ĝ|`.
fn effective_k(g: &[C64], sd: &SpectralData) -> f64 {
    let peak = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    g.iter()
        .zip(sd.kgrid().values())
        .filter(|(z, _)| z.norm() > 1e-10 * peak)
        .map(|(_, k)| k.abs())
        .fold(1.0, f64::max)
}

/// `‖e^{itH}e^{-itH₀}φ - F_σ*Fφ‖₂` for each `t`, both branches.
pub fn limit_defects(phi: &[C64], times: &[f64], sd: &SpectralData) -> Result<Vec<[f64; 2]>> {
    require_no_bound_states(sd)?;
    check_aligned(phi, sd.grid().len())?;
    let hat = fourier(phi, sd);
    let t_max = times.iter().map(|t| t.abs()).fold(0.0, f64::max);
    let far = FarField::new(sd, t_max, effective_k(&hat, sd))?;
    let big = far.embed(phi);
    let fields: Vec<Vec<C64>> = times.iter().map(|&t| far.free_evolve(&big, t)).collect::<Result<_>>()?;
    let tr = far.transforms(&fields)?;
    Ok(times
        .iter()
        .zip(&tr)
        .map(|(&t, (fp, fm))| {
            let d = |f: &[C64]| {
                let diff: Vec<C64> = f
                    .iter()
                    .zip(sd.kgrid().values())
                    .zip(&hat)
                    .map(|((a, &k), h)| a * C64::from_polar(1.0, k * k * t) - h)
                    .collect();
                sd.norm_k(&diff)
            };
            [d(fp), d(fm)]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub times: Vec<f64>,
    /// `defects[sign][branch][time]`, sign order (−, +), branch order (F₊, F₋).
    pub defects: [[Vec<f64>; 2]; 2],
    pub chosen: [Branch; 2],
}

fn admissible(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[1] < w[0]) && d.last().is_some_and(|&x| x < CALIBRATION_BOUND)
}

/// Mean momentum of the calibration packet. A packet at rest carries
/// weight at `k = 0`, where the limit converges too slowly to be useful.
pub const CALIBRATION_MOMENTUM: f64 = 2.0;

/// `π^{-1/4} e^{-x²/2 + ik₀x}` with `k₀` = [`CALIBRATION_MOMENTUM`].
pub fn calibration_field(grid: &SpatialGrid) -> Vec<C64> {
    grid.points()
        .iter()
        .map(|&x| C64::from_polar((-x * x / 2.0).exp() / PI.powf(0.25), CALIBRATION_MOMENTUM * x))
        .collect()
}

/// Runs the time-limit protocol on [`calibration_field`] and checks the
/// pinned branches.
pub fn calibrate_wave_operators(sd: &SpectralData) -> Result<CalibrationReport> {
    require_no_bound_states(sd)?;
    let phi = calibration_field(sd.grid());
    let mut defects: [[Vec<f64>; 2]; 2] = Default::default();
    for (si, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        let times: Vec<f64> = CALIBRATION_TIMES.iter().map(|t| t * sign.factor()).collect();
        let d = limit_defects(&phi, &times, sd)?;
        defects[si][0] = d.iter().map(|x| x[0]).collect();
        defects[si][1] = d.iter().map(|x| x[1]).collect();
    }
    let report = CalibrationReport {
        times: CALIBRATION_TIMES.to_vec(),
        defects,
        chosen: [pinned_branch(Sign::Minus), pinned_branch(Sign::Plus)],
    };
    for (si, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        let bi = match pinned_branch(sign) {
            Branch::Plus => 0,
            Branch::Minus => 1,
        };
        if !admissible(&report.defects[si][bi]) {
            return Err(Error::Convention(format!(
                "W{:?}: defects F₊ {:?}, F₋ {:?}",
                sign, report.defects[si][0], report.defects[si][1]
            )));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrixSample {
    pub k: f64,
    /// `[[T, R₁], [R₂, T]]` as measured.
    pub entries: [[C64; 2]; 2],
    pub unitarity_defect: f64,
    pub defect_vs_jost: f64,
}

/// Channel amplitudes of `S_L` applied to Gaussian packets of momentum width
/// [`PACKET_WIDTH`] centred at `±k`, read off node by node.
pub fn sl_matrix(k: f64, sd: &SpectralData) -> Result<SMatrixSample> {
    require_no_bound_states(sd)?;
    let sigma = PACKET_WIDTH;
    if k < 3.0 * sigma {
        return Err(Error::Resolution(format!("k = {k} is below 3·width = {}", 3.0 * sigma)));
    }
    let reach = sd.grid().x_max().min(-sd.grid().x_min());
    if reach * sigma < 6.0 {
        return Err(Error::Resolution(format!(
            "packet of spatial width {} does not fit in |x| ≤ {reach}",
            1.0 / sigma
        )));
    }
    if k + 6.0 * sigma > sd.kgrid().k_max() {
        return Err(Error::Resolution(format!("k = {k} too close to the momentum cut-off")));
    }
    let kg = sd.kgrid();
    let ks = kg.values();
    let packet = |c: f64| -> Vec<C64> {
        ks.iter()
            .map(|&q| C64::new((-(q - c) * (q - c) / (2.0 * sigma * sigma)).exp(), 0.0))
            .collect()
    };
    let apply = |g: &[C64]| -> Result<Vec<C64>> {
        let x = sd.adjoint(g)?;
        sd.forward_minus(&x)
    };
    let gp = packet(k);
    let gm = packet(-k);
    let sp = apply(&gp)?;
    let sm = apply(&gm)?;
    // Channel ratios at the positive nodes nearest k, interpolated to k.
    let centre = kg.nearest(k);
    let mut nodes: Vec<usize> = kg
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &q)| q > 0.0)
        .map(|(m, _)| m)
        .collect();
    nodes.sort_by(|&a, &b| (ks[a] - k).abs().partial_cmp(&(ks[b] - k).abs()).expect("finite"));
    nodes.truncate(STENCIL);
    debug_assert!(nodes.contains(&centre));
    let mut entries = [[C64::default(); 2]; 2];
    for &m in &nodes {
        let mm = kg.mirror_index(m);
        let w: f64 = nodes
            .iter()
            .filter(|&&j| j != m)
            .map(|&j| (k - ks[j]) / (ks[m] - ks[j]))
            .product();
        entries[0][0] += w * sp[m] / gp[m];
        entries[0][1] += w * sm[m] / gm[mm];
        entries[1][0] += w * sp[mm] / gp[m];
        entries[1][1] += w * sm[mm] / gm[mm];
    }
    let jost = coefficients_at(sd.solver(), k)?;
    let expected = [[jost.t, jost.r1], [jost.r2, jost.t]];
    let mut defect_vs_jost: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            defect_vs_jost = defect_vs_jost.max((entries[i][j] - expected[i][j]).norm());
        }
    }
    let mut unitarity_defect: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let s: C64 = (0..2).map(|l| entries[l][i].conj() * entries[l][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            unitarity_defect = unitarity_defect.max((s - target).norm());
        }
    }
    Ok(SMatrixSample {
        k,
        entries,
        unitarity_defect,
        defect_vs_jost,
    })
}

pub fn smatrix_csv(samples: &[SMatrixSample]) -> String {
    csv(
        &[
            "k", "ReS11", "ImS11", "ReS12", "ImS12", "ReS21", "ImS21", "ReS22", "ImS22", "defect_vs_jost",
        ],
        samples.iter().map(|s| {
            let e = &s.entries;
            [
                s.k, e[0][0].re, e[0][0].im, e[0][1].re, e[0][1].im, e[1][0].re, e[1][0].im, e[1][1].re, e[1][1].im,
                s.defect_vs_jost,
            ]
        }),
    )
}

/// Graded nodes on `[-T, T]`: step `dt·(1 + |t|)` capped at [`MAX_STEP`].
pub fn time_nodes(horizon: f64, dt: f64) -> Vec<f64> {
    let mut half = vec![0.0];
    let mut t: f64 = 0.0;
    while t < horizon {
        let h = (dt * (1.0 + t)).min(MAX_STEP);
        t = if t + h > horizon * (1.0 - 1e-12) { horizon } else { t + h };
        half.push(t);
    }
    let mut nodes: Vec<f64> = half.iter().rev().map(|t| -t).collect();
    nodes.extend(half.into_iter().skip(1));
    nodes
}

/// `e^{-ik²t}` applied to a continuum amplitude.
fn phase(g: &[C64], t: f64, sd: &SpectralData) -> Vec<C64> {
    g.iter()
        .zip(sd.kgrid().values())
        .map(|(a, &k)| a * C64::from_polar(1.0, -k * k * t))
        .collect()
}

/// Maps the incoming amplitude `F₊φ₋` to the outgoing `F₊φ₊` by integrating
/// on `[-T, T]`.
fn scatter_amplitude(g_minus: &[C64], cfg: &NlsConfig, sd: &SpectralData, horizon: f64) -> Result<Vec<C64>> {
    let nodes = time_nodes(horizon, cfg.dt);
    let mut state = SpectralState {
        g: phase(g_minus, -horizon, sd),
        c: Vec::new(),
    };
    if cfg.lambda != 0.0 {
        for w in nodes.windows(2) {
            step_spectral(&mut state, w[1] - w[0], cfg.lambda, cfg.p, sd).map_err(|e| match e {
                Error::Overflow { .. } => Error::Overflow { t: w[0] },
                other => other,
            })?;
        }
    } else {
        state.propagate(2.0 * horizon, sd);
    }
    Ok(phase(&state.g, -horizon, sd))
}

fn x_norm_k(g: &[C64], sd: &SpectralData) -> f64 {
    (g.iter()
        .zip(sd.kgrid().values())
        .map(|(a, k)| (1.0 + k * k) * a.norm_sqr())
        .sum::<f64>()
        * sd.kgrid().dk())
    .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearScattering {
    pub phi_plus: Vec<C64>,
    /// `F₊φ₊`.
    pub amplitude: Vec<C64>,
    pub horizon: f64,
    /// `X`-norm change of `φ₊` under the last horizon doubling.
    pub defect: f64,
    pub x_norm_minus: f64,
    pub x_norm_plus: f64,
}

fn nonlinear_amplitude(
    g_minus: &[C64],
    cfg: &NlsConfig,
    sd: &SpectralData,
    horizon: f64,
) -> Result<(Vec<C64>, f64, f64)> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon {horizon} must be positive")));
    }
    let mut h = horizon;
    let mut prev = scatter_amplitude(g_minus, cfg, sd, h)?;
    if cfg.lambda == 0.0 {
        return Ok((prev, h, 0.0));
    }
    loop {
        let next = scatter_amplitude(g_minus, cfg, sd, 2.0 * h)?;
        let diff: Vec<C64> = next.iter().zip(&prev).map(|(a, b)| a - b).collect();
        let defect = x_norm_k(&diff, sd);
        h *= 2.0;
        if defect < HORIZON_TOL {
            return Ok((next, h, defect));
        }
        if 2.0 * h > MAX_HORIZON {
            return Err(Error::Horizon(format!(
                "φ₊ still moves by {defect:e} in X-norm at T = {h}"
            )));
        }
        prev = next;
    }
}

/// `S_V`: incoming linear asymptote `φ₋` to the outgoing one `φ₊`.
pub fn nonlinear_s_v(phi_minus: &[C64], cfg: &NlsConfig, sd: &SpectralData, horizon: f64) -> Result<NonlinearScattering> {
    require_no_bound_states(sd)?;
    cfg.validate()?;
    check_aligned(phi_minus, sd.grid().len())?;
    let g = sd.forward(phi_minus)?;
    let (amp, horizon, defect) = nonlinear_amplitude(&g, cfg, sd, horizon)?;
    Ok(NonlinearScattering {
        phi_plus: sd.adjoint(&amp)?,
        x_norm_minus: x_norm_k(&g, sd),
        x_norm_plus: x_norm_k(&amp, sd),
        amplitude: amp,
        horizon,
        defect,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullScattering {
    pub psi_plus: Vec<C64>,
    pub horizon: f64,
    pub defect: f64,
}

/// `S = W₊* S_V W₋`.
pub fn full_s(psi_minus: &[C64], cfg: &NlsConfig, sd: &SpectralData, horizon: f64) -> Result<FullScattering> {
    require_no_bound_states(sd)?;
    cfg.validate()?;
    check_aligned(psi_minus, sd.grid().len())?;
    // F₊W₋ψ = Fψ.
    let g = fourier(psi_minus, sd);
    let (amp, horizon, defect) = nonlinear_amplitude(&g, cfg, sd, horizon)?;
    let phi_plus = sd.adjoint(&amp)?;
    Ok(FullScattering {
        psi_plus: wave_operator_adjoint(&phi_plus, Sign::Plus, sd)?,
        horizon,
        defect,
    })
}

/// `‖e^{-itH}W_±ψ - e^{-itH₀}ψ‖₂` at time `t`, evaluated on a box large
/// enough to hold the free evolution.
pub fn asymptotic_defect(psi: &[C64], sign: Sign, t: f64, sd: &SpectralData) -> Result<f64> {
    let d = limit_defects(psi, &[t], sd)?;
    Ok(match pinned_branch(sign) {
        Branch::Plus => d[0][0],
        Branch::Minus => d[0][1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowEnergyRow {
    pub epsilon: f64,
    /// `⟨S(εφ), ψ⟩/ε`.
    pub normalized: C64,
    /// `⟨S(εφ), ψ⟩`.
    pub unnormalized: C64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowEnergyTable {
    /// `⟨S_Lφ, ψ⟩`.
    pub target: C64,
    pub rows: Vec<LowEnergyRow>,
}

impl LowEnergyTable {
    pub fn to_csv(&self) -> String {
        csv(
            &[
                "epsilon", "ReNormalized", "ImNormalized", "ReUnnormalized", "ImUnnormalized", "ReTarget", "ImTarget",
                "defect",
            ],
            self.rows.iter().map(|r| {
                [
                    r.epsilon,
                    r.normalized.re,
                    r.normalized.im,
                    r.unnormalized.re,
                    r.unnormalized.im,
                    self.target.re,
                    self.target.im,
                    r.defect,
                ]
            }),
        )
    }
}

pub fn low_energy_limit(
    phi: &[C64],
    psi: &[C64],
    cfg: &NlsConfig,
    sd: &SpectralData,
    epsilons: &[f64],
    horizon: f64,
) -> Result<LowEnergyTable> {
    check_aligned(psi, sd.grid().len())?;
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Validation("epsilons must be positive and nonempty".into()));
    }
    let target = inner_dx(&linear_s(phi, sd)?, psi, sd.grid());
    let rows = epsilons
        .iter()
        .map(|&eps| {
            let scaled: Vec<C64> = phi.iter().map(|z| z * eps).collect();
            let out = full_s(&scaled, cfg, sd, horizon)?;
            let unnormalized = inner_dx(&out.psi_plus, psi, sd.grid());
            let normalized = unnormalized / eps;
            Ok(LowEnergyRow {
                epsilon: eps,
                normalized,
                unnormalized,
                defect: (normalized - target).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LowEnergyTable { target, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRecovery {
    pub epsilons: Vec<f64>,
    pub raw: Vec<C64>,
    pub extrapolated: C64,
    pub convention: C64,
    pub calibrated: f64,
    pub denominator: f64,
    /// Estimated relative tail of the denominator beyond the horizon.
    pub denominator_tail: f64,
    pub horizon: f64,
    pub defects: Vec<f64>,
}

impl LambdaRecovery {
    pub fn to_json(&self) -> serde_json::Value {
        let cx = |z: C64| serde_json::json!({"re": json_num(z.re), "im": json_num(z.im)});
        serde_json::json!({
            "epsilons": json_nums(&self.epsilons),
            "raw": self.raw.iter().map(|&z| cx(z)).collect::<Vec<_>>(),
            "extrapolated": cx(self.extrapolated),
            "convention": cx(self.convention),
            "calibrated": json_num(self.calibrated),
            "denominator": json_num(self.denominator),
            "denominator_tail": json_num(self.denominator_tail),
            "horizon": json_num(self.horizon),
            "defects": json_nums(&self.defects),
        })
    }
}

/// `∫_{-T}^{T} ‖e^{-itH}φ‖_{p+1}^{p+1} dt` on the graded nodes, with the
/// relative tail `2·f(T)·T/((p-1)/2 - 1)` from `t^{-(p-1)/2}` decay.
pub fn denominator(phi: &[C64], p: f64, dt: f64, horizon: f64, sd: &SpectralData) -> Result<(f64, f64)> {
    let g = sd.forward(phi)?;
    let nodes = time_nodes(horizon, dt);
    let dx = sd.grid().dx();
    let f = |t: f64| -> Result<f64> {
        let u = sd.adjoint(&phase(&g, t, sd))?;
        Ok(u.iter().map(|z| z.norm().powf(p + 1.0)).sum::<f64>() * dx)
    };
    let vals: Vec<f64> = nodes.iter().map(|&t| f(t)).collect::<Result<_>>()?;
    let integral: f64 = nodes
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    let rate = 0.5 * (p - 1.0) - 1.0;
    let tail = (vals[0] + vals[vals.len() - 1]) * horizon / rate;
    Ok((integral, tail / integral))
}

/// Least-squares fit `raw(ε) = c₀ + c₁ε^{p-1}`; returns `c₀`.
pub fn extrapolate(epsilons: &[f64], raw: &[C64], p: f64) -> Result<C64> {
    if epsilons.len() < 3 || epsilons.len() != raw.len() {
        return Err(Error::Validation("extrapolation needs at least three ε values".into()));
    }
    let n = epsilons.len() as f64;
    let xs: Vec<f64> = epsilons.iter().map(|e| e.powf(p - 1.0)).collect();
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: C64 = raw.iter().sum();
    let sxy: C64 = xs.iter().zip(raw).map(|(x, y)| y * x).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::Validation("ε values must be distinct".into()));
    }
    Ok((sy * sxx - sxy * sx) / det)
}

/// The factor `κ ∈ {1, -1, i, -i}` minimizing `|κ·raw - λ|`, and that misfit.
pub fn fit_convention(raw: C64, lambda: f64) -> (C64, f64) {
    [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)]
        .into_iter()
        .map(|k| (k, (k * raw - lambda).norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite misfit"))
        .expect("four candidates")
}

/// `λ̂` from `(1/ε^p)⟨(S_V - I)εφ, φ⟩ / ∫‖e^{-itH}φ‖_{p+1}^{p+1}`.
pub fn recover_lambda(
    phi: &[C64],
    cfg: &NlsConfig,
    sd: &SpectralData,
    epsilons: &[f64],
    horizon: f64,
) -> Result<LambdaRecovery> {
    require_no_bound_states(sd)?;
    cfg.validate()?;
    check_aligned(phi, sd.grid().len())?;
    if phi.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::Domain("φ must be nonzero".into()));
    }
    if epsilons.len() < 3 || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Validation("recovery needs at least three positive ε values".into()));
    }
    let g = sd.forward(phi)?;
    let mut raw = Vec::new();
    let mut defects = Vec::new();
    let mut h_used: f64 = horizon;
    for &eps in epsilons {
        let gm: Vec<C64> = g.iter().map(|z| z * eps).collect();
        let (amp, h, defect) = nonlinear_amplitude(&gm, cfg, sd, horizon)?;
        h_used = h_used.max(h);
        let diff: Vec<C64> = amp.iter().zip(&gm).map(|(a, b)| a - b).collect();
        raw.push(sd.inner_k(&diff, &g) / eps.powf(cfg.p));
        defects.push(defect);
    }
    let (den, tail) = denominator(phi, cfg.p, cfg.dt, h_used, sd)?;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Horizon(format!("denominator {den} is not positive and finite")));
    }
    if tail > DENOMINATOR_TAIL_TOL {
        return Err(Error::Horizon(format!(
            "denominator tail {tail:e} exceeds {DENOMINATOR_TAIL_TOL} at T = {h_used}"
        )));
    }
    let raw: Vec<C64> = raw.into_iter().map(|r| r / den).collect();
    let extrapolated = extrapolate(epsilons, &raw, cfg.p)?;
    Ok(LambdaRecovery {
        epsilons: epsilons.to_vec(),
        calibrated: (CONVENTION * extrapolated).re,
        raw,
        extrapolated,
        convention: CONVENTION,
        denominator: den,
        denominator_tail: tail,
        horizon: h_used,
        defects,
    })
}
