//! Free kernel, the continuous-spectrum propagator `e^{-itH}P_c` and
//! dispersive-decay diagnostics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::io::csv;
use crate::jost::{coefficients_from, Direction};
use crate::numerics::{check_aligned, lagrange_weights, C64};
use crate::spectral::SpectralData;

/// Smallest time accepted by [`kernel_continuous`].
pub const T_MIN: f64 = 0.1;
/// Taper width is `K(t) = √(TAPER_PRODUCT / t)`.
pub const TAPER_PRODUCT: f64 = 400.0;
/// Spacing of the coarse momentum table holding `T·m`.
pub const COARSE_DK: f64 = 0.01;
const STENCIL: usize = 8;
/// Target spacing of the observation sub-grid in [`decay_scan`].
pub const WINDOW_SPACING: f64 = 0.5;

/// `(4πit)^{-1/2} e^{i(x-y)²/4t}` with `√i = e^{iπ/4}`.
pub fn free_kernel(t: f64, x: f64, y: f64) -> Result<C64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("free kernel needs t > 0, got {t}")));
    }
    let d = x - y;
    Ok(C64::from_polar(1.0 / (4.0 * PI * t).sqrt(), d * d / (4.0 * t) - PI / 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ContinuousOnly,
    Full,
}

/// `F₊* e^{-ik²t} F₊ φ`, plus `Σ e^{iβ²t}⟨φ,ψ⟩ψ` in [`Mode::Full`].
pub fn evolve_linear(phi: &[C64], t: f64, sd: &SpectralData, mode: Mode) -> Result<Vec<C64>> {
    let g = sd.forward(phi)?;
    let g: Vec<C64> = g
        .iter()
        .zip(sd.kgrid().values())
        .map(|(a, &k)| a * C64::from_polar(1.0, -k * k * t))
        .collect();
    let mut out = sd.adjoint(&g)?;
    if mode == Mode::Full {
        let coeffs = sd.bound_coefficients(phi)?;
        for (c, b) in coeffs.iter().zip(sd.bound_states()) {
            let c = c * C64::from_polar(1.0, b.beta * b.beta * t);
            for (o, p) in out.iter_mut().zip(&b.psi) {
                *o += c * p;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major in `xs`.
    pub values: Vec<C64>,
    pub sup_abs: f64,
}

impl KernelSlice {
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn to_csv(&self) -> String {
        let rows = self.xs.iter().enumerate().flat_map(|(i, &x)| {
            self.ys.iter().enumerate().map(move |(j, &y)| {
                let v = self.values[i * self.ys.len() + j];
                [x, y, v.re, v.im]
            })
        });
        csv(&["x", "y", "ReK", "ImK"], rows)
    }
}

/// Taper width used at time `t`, capped at `k_cap`.
pub fn taper_width(t: f64, k_cap: f64) -> f64 {
    (TAPER_PRODUCT / t).sqrt().min(k_cap)
}

/// Coarse table of `a₊(x, κ) = T(κ)m₁(x, κ)` and `a₋(x, κ) = T(κ)m₂(x, κ)`
/// on `κ_j = (j + ½)·COARSE_DK`, for a fixed set of points. Each kernel
/// evaluation interpolates it onto a momentum grid fine enough for the chirp
/// `e^{-ik²t}`.
#[derive(Debug, Clone)]
pub struct KernelEngine {
    points: Vec<f64>,
    k_cap: f64,
    n_coarse: usize,
    free: bool,
    plus: Vec<C64>,
    minus: Vec<C64>,
}

impl KernelEngine {
    /// Table good for every `t ≥ t_min`.
    pub fn new(sd: &SpectralData, points: &[f64], t_min: f64) -> Result<Self> {
        if t_min < T_MIN {
            return Err(Error::Resolution(format!("t = {t_min} is below t_min = {T_MIN}")));
        }
        let k_cap = (TAPER_PRODUCT / t_min).sqrt();
        let n_coarse = (2.0 * k_cap / COARSE_DK).ceil() as usize + STENCIL;
        let np = points.len();
        let free = sd.potential().is_zero();
        let (mut plus, mut minus) = (Vec::new(), Vec::new());
        if !free {
            let solver = sd.solver();
            let locs: Vec<_> = points.iter().map(|&x| solver.locate(x)).collect();
            plus = vec![C64::new(0.0, 0.0); n_coarse * np];
            minus = plus.clone();
            for j in 0..n_coarse {
                let k = C64::new((j as f64 + 0.5) * COARSE_DK, 0.0);
                let c1 = solver.solve_fast(Direction::One, k)?;
                let c2 = solver.solve_fast(Direction::Two, k)?;
                let t = coefficients_from(&c1, &c2)?.t;
                for (p, loc) in locs.iter().enumerate() {
                    plus[j * np + p] = t * c1.eval_at(loc).0;
                    minus[j * np + p] = t * c2.eval_at(loc).0;
                }
            }
        }
        Ok(Self {
            points: points.to_vec(),
            k_cap,
            n_coarse,
            free,
            plus,
            minus,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn t_min(&self) -> f64 {
        TAPER_PRODUCT / (self.k_cap * self.k_cap)
    }

    fn amplitudes(&self, kappa: f64, out_plus: &mut [C64], out_minus: &mut [C64]) {
        let np = self.points.len();
        if self.free {
            out_plus.iter_mut().for_each(|a| *a = C64::new(1.0, 0.0));
            out_minus.iter_mut().for_each(|a| *a = C64::new(1.0, 0.0));
            return;
        }
        let centre = (kappa / COARSE_DK - 0.5).floor() as isize - (STENCIL as isize / 2 - 1);
        let start = centre.clamp(0, (self.n_coarse - STENCIL) as isize) as usize;
        let nodes: Vec<f64> = (start..start + STENCIL).map(|j| (j as f64 + 0.5) * COARSE_DK).collect();
        let w = lagrange_weights(&nodes, kappa);
        out_plus.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        out_minus.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (s, ws) in w.iter().enumerate() {
            let row = (start + s) * np;
            for p in 0..np {
                out_plus[p] += self.plus[row + p] * ws;
                out_minus[p] += self.minus[row + p] * ws;
            }
        }
    }

    /// Tapered kernel `∫ e^{-ik²t} e^{-(k/K(t))⁸} Ψ₊(x,k) conj Ψ₊(y,k) dk` for
    /// `x = points[i]`, `y = points[j]`.
    pub fn kernel(&self, t: f64, xi: &[usize], yi: &[usize]) -> Result<KernelSlice> {
        if t < self.t_min() * (1.0 - 1e-12) {
            return Err(Error::Resolution(format!(
                "t = {t} is below the table's t_min = {}",
                self.t_min()
            )));
        }
        let xs: Vec<f64> = xi.iter().map(|&i| self.points[i]).collect();
        let ys: Vec<f64> = yi.iter().map(|&j| self.points[j]).collect();
        let kt = taper_width(t, self.k_cap);
        let range = 2.0 * kt;
        let reach = 2.0 * (xs.iter().chain(&ys).fold(0.0f64, |m, x| m.max(x.abs())));
        let dk = (0.9 * (PI / 4.0) / (2.0 * range * t + 2.0 * reach)).min(COARSE_DK);
        let nf = (range / dk).ceil() as usize;
        let np = self.points.len();
        let (mut ap, mut am) = (vec![C64::new(0.0, 0.0); np], vec![C64::new(0.0, 0.0); np]);
        let (mut px, mut mx) = (vec![C64::new(0.0, 0.0); xs.len()], vec![C64::new(0.0, 0.0); xs.len()]);
        let (mut py, mut my) = (vec![C64::new(0.0, 0.0); ys.len()], vec![C64::new(0.0, 0.0); ys.len()]);
        let mut values = vec![C64::new(0.0, 0.0); xs.len() * ys.len()];
        for f in 0..nf {
            let kappa = (f as f64 + 0.5) * dk;
            let taper = (-(kappa / kt).powi(8)).exp();
            if taper < 1e-300 {
                break;
            }
            self.amplitudes(kappa, &mut ap, &mut am);
            let w = C64::from_polar(taper * dk / (2.0 * PI), -kappa * kappa * t);
            for (a, &i) in xi.iter().enumerate() {
                let ph = C64::from_polar(1.0, kappa * self.points[i]);
                px[a] = ap[i] * ph * w;
                mx[a] = am[i] * ph.conj() * w;
            }
            for (b, &j) in yi.iter().enumerate() {
                let ph = C64::from_polar(1.0, kappa * self.points[j]);
                py[b] = (ap[j] * ph).conj();
                my[b] = (am[j] * ph.conj()).conj();
            }
            for a in 0..xs.len() {
                let row = &mut values[a * ys.len()..(a + 1) * ys.len()];
                let (p, m) = (px[a], mx[a]);
                for (b, v) in row.iter_mut().enumerate() {
                    *v += p * py[b] + m * my[b];
                }
            }
        }
        let sup_abs = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(KernelSlice {
            t,
            xs,
            ys,
            values,
            sup_abs,
        })
    }
}

/// Kernel of `e^{-itH}P_c` on `xs × ys`.
pub fn kernel_continuous(t: f64, sd: &SpectralData, xs: &[f64], ys: &[f64]) -> Result<KernelSlice> {
    if t < T_MIN {
        return Err(Error::Resolution(format!("t = {t} is below t_min = {T_MIN}")));
    }
    let points: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let engine = KernelEngine::new(sd, &points, t)?;
    let xi: Vec<usize> = (0..xs.len()).collect();
    let yi: Vec<usize> = (xs.len()..points.len()).collect();
    engine.kernel(t, &xi, &yi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub sup_abs: Vec<f64>,
    pub scaled_sup: Vec<f64>,
    pub max_over_min: f64,
    pub x_obs: f64,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        csv(
            &["t", "sup_abs", "scaled_sup"],
            self.times
                .iter()
                .zip(&self.sup_abs)
                .zip(&self.scaled_sup)
                .map(|((t, s), c)| [*t, *s, *c]),
        )
    }
}

/// Observation points `|x| ≤ x_max/2` taken from the spatial grid.
pub fn observation_window(sd: &SpectralData) -> Vec<f64> {
    let grid = sd.grid();
    let x_obs = 0.5 * grid.x_max().min(-grid.x_min());
    let stride = ((WINDOW_SPACING / grid.dx()).round() as usize).max(1);
    grid.points()
        .into_iter()
        .step_by(stride)
        .filter(|x| x.abs() <= x_obs)
        .collect()
}

/// `√t·sup|K_t|` over the observation window.
pub fn decay_scan(sd: &SpectralData, times: &[f64]) -> Result<DecayReport> {
    if times.is_empty() {
        return Err(Error::Domain("decay scan needs at least one time".into()));
    }
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    if t_min < T_MIN {
        return Err(Error::Resolution(format!("t = {t_min} is below t_min = {T_MIN}")));
    }
    let points = observation_window(sd);
    let engine = KernelEngine::new(sd, &points, t_min)?;
    let idx: Vec<usize> = (0..points.len()).collect();
    let mut sup_abs = Vec::with_capacity(times.len());
    for &t in times {
        sup_abs.push(engine.kernel(t, &idx, &idx)?.sup_abs);
    }
    let scaled_sup: Vec<f64> = times.iter().zip(&sup_abs).map(|(t, s)| t.sqrt() * s).collect();
    let hi = scaled_sup.iter().copied().fold(0.0, f64::max);
    let lo = scaled_sup.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DecayReport {
        times: times.to_vec(),
        sup_abs,
        scaled_sup,
        max_over_min: hi / lo,
        x_obs: points.iter().copied().fold(0.0, f64::max),
    })
}

fn lp_dx(phi: &[C64], dx: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    (phi.iter().map(|z| z.norm().powf(p)).sum::<f64>() * dx).powf(1.0 / p)
}

/// `t^{1/p - 1/2} ‖e^{-itH}P_c φ‖_{p′} / ‖φ‖_p`.
pub fn lp_ratio(p: f64, phi: &[C64], t: f64, sd: &SpectralData) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [1, 2]")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    check_aligned(phi, sd.grid().len())?;
    let dx = sd.grid().dx();
    let denom = lp_dx(phi, dx, p);
    if denom == 0.0 {
        return Err(Error::Domain("φ must be nonzero".into()));
    }
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let u = evolve_linear(phi, t, sd, Mode::ContinuousOnly)?;
    Ok(t.powf(1.0 / p - 0.5) * lp_dx(&u, dx, q) / denom)
}

/// `∫_{-T}^{T} ‖e^{-itH}P_c φ‖₆⁶ dt` by the composite trapezoid rule on
/// `2·steps` intervals.
pub fn spacetime_l6(phi: &[C64], horizon: f64, steps: usize, sd: &SpectralData) -> Result<f64> {
    if !(horizon > 0.0) || steps == 0 {
        return Err(Error::Domain("space-time norm needs T > 0 and steps > 0".into()));
    }
    let dx = sd.grid().dx();
    let g = sd.forward(phi)?;
    let h = horizon / steps as f64;
    let mut acc = 0.0;
    for s in 0..=2 * steps {
        let t = -horizon + s as f64 * h;
        let gt: Vec<C64> = g
            .iter()
            .zip(sd.kgrid().values())
            .map(|(a, &k)| a * C64::from_polar(1.0, -k * k * t))
            .collect();
        let u = sd.adjoint(&gt)?;
        let l6 = u.iter().map(|z| z.norm_sqr().powi(3)).sum::<f64>() * dx;
        acc += if s == 0 || s == 2 * steps { 0.5 * l6 } else { l6 };
    }
    Ok(acc * h)
}
