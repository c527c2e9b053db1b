//! Bound states, continuum eigenfunctions `Ψ₊` and the generalized Fourier
//! maps built from them.

use crate::error::{Error, Result};
use crate::io::csv;
use crate::jost::{coefficients_from, inverse_transmission_imaginary, Direction, JostSolver};
use crate::numerics::{check_aligned, MomentumGrid, SpatialGrid, C64, FRAC_1_SQRT_2PI};
use crate::potential::Potential;

/// Default momentum cut-off of the continuum grid.
pub const DEFAULT_K_MAX: f64 = 10.0;
/// Cut-off used when `V` has jumps: bound states then carry a `k⁻³` tail.
pub const JUMP_K_MAX: f64 = 40.0;

pub fn default_k_max(v: &Potential) -> f64 {
    if v.family().discontinuities().is_empty() {
        DEFAULT_K_MAX
    } else {
        JUMP_K_MAX
    }
}
const SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    /// Eigenvalue is `-β²`.
    pub beta: f64,
    pub psi: Vec<C64>,
    pub norm_residual: f64,
    pub eigen_residual: f64,
}

/// `(φ, ψ) = ∫ φ conj ψ` with the uniform weight `dx`.
pub fn inner_dx(phi: &[C64], psi: &[C64], grid: &SpatialGrid) -> C64 {
    phi.iter().zip(psi).map(|(a, b)| a * b.conj()).sum::<C64>() * grid.dx()
}

pub fn norm_dx(phi: &[C64], grid: &SpatialGrid) -> f64 {
    (phi.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx()).sqrt()
}

/// Number of zeros of the zero-energy solution `f₁(·, 0)` on the line.
pub fn zero_energy_node_count(solver: &JostSolver) -> Result<usize> {
    let col = solver.solve_fast(Direction::One, C64::new(0.0, 0.0))?;
    let vals: Vec<f64> = col.mesh_values().iter().map(|z| z.re).collect();
    let mut count = vals.windows(2).filter(|w| w[0] * w[1] < 0.0 || (w[1] == 0.0 && w[0] != 0.0)).count();
    // Beyond the left end f₁(x, 0) = m_L + (x_L - x)·B is linear.
    if let Some((_, m_l)) = col.inner_end() {
        let b = col.total().re;
        if b != 0.0 && -m_l.re / b > 0.0 {
            count += 1;
        }
    }
    Ok(count)
}

/// Roots of `β ↦ 1/T(iβ)` on `(0, √|min V| + 1]`.
pub fn find_bound_states(v: &Potential) -> Result<Vec<BoundState>> {
    find_bound_states_with(&JostSolver::new(v), v)
}

pub fn find_bound_states_with(solver: &JostSolver, v: &Potential) -> Result<Vec<BoundState>> {
    if v.is_zero() || v.min_value() >= 0.0 {
        return Ok(Vec::new());
    }
    let beta_max = (-v.min_value()).sqrt() + 1.0;
    let expected = zero_energy_node_count(solver)?;
    let g = |b: f64| inverse_transmission_imaginary(solver, b);
    let mut roots = Vec::new();
    for refine in [1usize, 4, 16] {
        let n = SCAN_POINTS * refine;
        let first = beta_max / n as f64;
        let mut scan: Vec<f64> = (0..40).map(|i| first * 1e-6f64.powf(1.0 - i as f64 / 40.0)).collect();
        scan.extend((1..=n).map(|i| beta_max * i as f64 / n as f64));
        let vals: Vec<f64> = scan.iter().map(|&b| g(b)).collect::<Result<_>>()?;
        roots.clear();
        for i in 0..scan.len() - 1 {
            if vals[i] == 0.0 {
                roots.push(scan[i]);
            } else if vals[i] * vals[i + 1] < 0.0 {
                roots.push(bisect(&g, scan[i], scan[i + 1], vals[i])?);
            }
        }
        if roots.len() == expected {
            break;
        }
    }
    if roots.len() != expected {
        return Err(Error::Tolerance(format!(
            "found {} bound states but the zero-energy solution has {} nodes",
            roots.len(),
            expected
        )));
    }
    roots.sort_by(|a, b| b.partial_cmp(a).expect("finite roots"));
    roots
        .into_iter()
        .map(|beta| bound_state(solver, v, beta))
        .collect()
}

fn bisect(g: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, mut glo: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * hi.max(1.0) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let gm = g(mid)?;
        if !gm.is_finite() {
            return Err(Error::Tolerance(format!("1/T(iβ) not finite at β = {mid}")));
        }
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm * glo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    Err(Error::Tolerance(format!("bisection stagnated on [{lo}, {hi}]")))
}

fn bound_state(solver: &JostSolver, v: &Potential, beta: f64) -> Result<BoundState> {
    let grid = v.grid();
    let k = C64::new(0.0, beta);
    let c1 = solver.solve_fast(Direction::One, k)?;
    let c2 = solver.solve_fast(Direction::Two, k)?;
    let xs = grid.points();
    let f1: Vec<f64> = xs.iter().map(|&x| (-beta * x).exp() * c1.value(x).re).collect();
    let f2: Vec<f64> = xs.iter().map(|&x| (beta * x).exp() * c2.value(x).re).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &x) in xs.iter().enumerate() {
        if x.abs() <= 1.0 {
            num += f1[j] * f2[j];
            den += f2[j] * f2[j];
        }
    }
    let scale = if den > 0.0 { num / den } else { 1.0 };
    let mut psi: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| if x >= 0.0 { f1[j] } else { scale * f2[j] })
        .collect();
    let norm = (psi.iter().map(|p| p * p).sum::<f64>() * grid.dx()).sqrt();
    let peak = psi.iter().copied().fold(0.0f64, |m, p| if p.abs() > m.abs() { p } else { m });
    let sign = if peak < 0.0 { -1.0 } else { 1.0 };
    for p in &mut psi {
        *p *= sign / norm;
    }
    let psi: Vec<C64> = psi.into_iter().map(|p| C64::new(p, 0.0)).collect();
    let norm_residual = (norm_dx(&psi, grid) - 1.0).abs();
    let eigen_residual = eigen_residual(&psi, v, beta);
    Ok(BoundState {
        beta,
        psi,
        norm_residual,
        eigen_residual,
    })
}

/// Eighth-order central second difference.
const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// `‖-ψ″ + Vψ + β²ψ‖₂` over nodes whose stencil does not straddle a jump of `V`.
pub fn eigen_residual(psi: &[C64], v: &Potential, beta: f64) -> f64 {
    let grid = v.grid();
    let dx = grid.dx();
    let jumps = v.family().discontinuities();
    let vals = v.values();
    let mut acc = 0.0;
    for j in 4..grid.len() - 4 {
        let (lo, hi) = (grid.x(j - 4), grid.x(j + 4));
        if jumps.iter().any(|&b| b >= lo && b <= hi) {
            continue;
        }
        let mut d2 = psi[j] * D2[0];
        for s in 1..5 {
            d2 += (psi[j - s] + psi[j + s]) * D2[s];
        }
        let r = -d2 / (dx * dx) + psi[j] * (vals[j] + beta * beta);
        acc += r.norm_sqr();
    }
    (acc * dx).sqrt()
}

pub fn bound_states_csv(states: &[BoundState]) -> String {
    csv(
        &["beta", "norm_residual", "eigen_residual"],
        states.iter().map(|s| [s.beta, s.norm_residual, s.eigen_residual]),
    )
}

/// Discretized spectral resolution of `H`: bound states plus `Ψ₊(x, k)`
/// stored densely, row-major in `k`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    potential: Potential,
    kgrid: MomentumGrid,
    solver: JostSolver,
    bound_states: Vec<BoundState>,
    transmission: Vec<C64>,
    psi: Vec<C64>,
}

impl SpectralData {
    /// Continuum grid: the dual momentum grid of the potential's spatial grid,
    /// truncated at [`default_k_max`].
    pub fn new(v: &Potential) -> Result<Self> {
        Self::with_kgrid(v, MomentumGrid::dual_truncated(v.grid(), default_k_max(v)))
    }

    pub fn with_kgrid(v: &Potential, kgrid: MomentumGrid) -> Result<Self> {
        let solver = JostSolver::new(v);
        Self::with_solver(v, kgrid, solver)
    }

    pub fn with_solver(v: &Potential, kgrid: MomentumGrid, solver: JostSolver) -> Result<Self> {
        if kgrid.values().iter().any(|&k| k == 0.0) {
            return Err(Error::Domain("continuum grid must exclude k = 0".into()));
        }
        let bound_states = find_bound_states_with(&solver, v)?;
        let grid = v.grid();
        let nx = grid.len();
        let xs = grid.points();
        let locs = solver.locate_grid(grid);
        let nk = kgrid.len();
        let mut psi = vec![C64::new(0.0, 0.0); nk * nx];
        let mut transmission = vec![C64::new(0.0, 0.0); nk];
        for (m, &k) in kgrid.values().iter().enumerate() {
            if k < 0.0 {
                continue;
            }
            let kc = C64::new(k, 0.0);
            let c1 = solver.solve_fast(Direction::One, kc)?;
            let c2 = solver.solve_fast(Direction::Two, kc)?;
            let t = coefficients_from(&c1, &c2)?.t;
            let mirror = kgrid.mirror_index(m);
            transmission[m] = t;
            transmission[mirror] = t;
            let s = t * FRAC_1_SQRT_2PI;
            for (j, loc) in locs.iter().enumerate() {
                let ph = C64::from_polar(1.0, k * xs[j]);
                psi[m * nx + j] = s * ph * c1.eval_at(loc).0;
                psi[mirror * nx + j] = s * ph.conj() * c2.eval_at(loc).0;
            }
        }
        Ok(Self {
            potential: v.clone(),
            kgrid,
            solver,
            bound_states,
            transmission,
            psi,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.potential.grid()
    }

    pub fn kgrid(&self) -> &MomentumGrid {
        &self.kgrid
    }

    pub fn solver(&self) -> &JostSolver {
        &self.solver
    }

    pub fn bound_states(&self) -> &[BoundState] {
        &self.bound_states
    }

    /// `T(|k|)` for each node of the continuum grid.
    pub fn transmission(&self) -> &[C64] {
        &self.transmission
    }

    /// Row `Ψ₊(·, k_m)`.
    pub fn psi_plus(&self, m: usize) -> &[C64] {
        let nx = self.grid().len();
        &self.psi[m * nx..(m + 1) * nx]
    }

    /// `(F₊φ)(k) = ∫ conj Ψ₊(x, k) φ(x) dx`.
    pub fn forward(&self, phi: &[C64]) -> Result<Vec<C64>> {
        check_aligned(phi, self.grid().len())?;
        let dx = self.grid().dx();
        Ok((0..self.kgrid.len())
            .map(|m| {
                self.psi_plus(m)
                    .iter()
                    .zip(phi)
                    .map(|(p, f)| p.conj() * f)
                    .sum::<C64>()
                    * dx
            })
            .collect())
    }

    /// `(F₊*g)(x) = ∫ Ψ₊(x, k) g(k) dk`.
    pub fn adjoint(&self, g: &[C64]) -> Result<Vec<C64>> {
        check_aligned(g, self.kgrid.len())?;
        let nx = self.grid().len();
        let dk = self.kgrid.dk();
        let mut out = vec![C64::new(0.0, 0.0); nx];
        for (m, gm) in g.iter().enumerate() {
            let w = gm * dk;
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.psi_plus(m)) {
                *o += p * w;
            }
        }
        Ok(out)
    }

    /// `(F₋φ)(k) = ∫ conj Ψ₋(x, k) φ(x) dx` with `conj Ψ₋(x, k) = Ψ₊(x, -k)`.
    pub fn forward_minus(&self, phi: &[C64]) -> Result<Vec<C64>> {
        check_aligned(phi, self.grid().len())?;
        let dx = self.grid().dx();
        Ok((0..self.kgrid.len())
            .map(|m| {
                self.psi_plus(self.kgrid.mirror_index(m))
                    .iter()
                    .zip(phi)
                    .map(|(p, f)| p * f)
                    .sum::<C64>()
                    * dx
            })
            .collect())
    }

    /// `(F₋*g)(x) = ∫ Ψ₋(x, k) g(k) dk`.
    pub fn adjoint_minus(&self, g: &[C64]) -> Result<Vec<C64>> {
        check_aligned(g, self.kgrid.len())?;
        let nx = self.grid().len();
        let dk = self.kgrid.dk();
        let mut out = vec![C64::new(0.0, 0.0); nx];
        for (m, gm) in g.iter().enumerate() {
            let w = gm * dk;
            for (o, p) in out.iter_mut().zip(self.psi_plus(self.kgrid.mirror_index(m))) {
                *o += p.conj() * w;
            }
        }
        Ok(out)
    }

    /// `⟨φ, ψ_j⟩` for every bound state.
    pub fn bound_coefficients(&self, phi: &[C64]) -> Result<Vec<C64>> {
        check_aligned(phi, self.grid().len())?;
        Ok(self
            .bound_states
            .iter()
            .map(|b| inner_dx(phi, &b.psi, self.grid()))
            .collect())
    }

    /// `P_c φ = φ - Σ ⟨φ, ψ_j⟩ ψ_j`.
    pub fn project_continuous(&self, phi: &[C64]) -> Result<Vec<C64>> {
        let coeffs = self.bound_coefficients(phi)?;
        let mut out = phi.to_vec();
        for (c, b) in coeffs.iter().zip(&self.bound_states) {
            for (o, p) in out.iter_mut().zip(&b.psi) {
                *o -= c * p;
            }
        }
        Ok(out)
    }

    pub fn norm_k(&self, g: &[C64]) -> f64 {
        (g.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.kgrid.dk()).sqrt()
    }

    pub fn inner_k(&self, g: &[C64], h: &[C64]) -> C64 {
        g.iter().zip(h).map(|(a, b)| a * b.conj()).sum::<C64>() * self.kgrid.dk()
    }
}
