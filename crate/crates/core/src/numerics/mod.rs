//! Grids, quadrature, the unitary Fourier transform and interpolation.

mod grid;

pub use grid::{MomentumGrid, SpatialGrid};

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex samples aligned to a spatial or momentum grid.
pub type ComplexField = Vec<C64>;

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn check_aligned(field: &[C64], n: usize) -> Result<()> {
    if field.len() != n {
        return Err(Error::Alignment {
            field: field.len(),
            grid: n,
        });
    }
    Ok(())
}

pub fn all_finite(field: &[C64]) -> bool {
    field.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Composite Simpson approximation of `∫ f dx` over the grid.
pub fn quadrature(f: &[C64], grid: &SpatialGrid) -> Result<C64> {
    check_aligned(f, grid.len())?;
    Ok(f.iter().zip(grid.weights()).map(|(v, w)| v * w).sum())
}

/// Real-valued Simpson quadrature.
pub fn quadrature_real(f: &[f64], grid: &SpatialGrid) -> f64 {
    f.iter().zip(grid.weights()).map(|(v, w)| v * w).sum()
}

/// `(φ, ψ) = ∫ φ conj(ψ) dx`.
pub fn inner(phi: &[C64], psi: &[C64], grid: &SpatialGrid) -> C64 {
    phi.iter()
        .zip(psi)
        .zip(grid.weights())
        .map(|((a, b), w)| a * b.conj() * w)
        .sum()
}

pub fn norm2(phi: &[C64], grid: &SpatialGrid) -> f64 {
    phi.iter()
        .zip(grid.weights())
        .map(|(a, w)| a.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

/// Discrete `Lᵖ` norm; `p = ∞` gives the maximum modulus.
pub fn lp_norm(phi: &[C64], grid: &SpatialGrid, p: f64) -> f64 {
    if p.is_infinite() {
        return phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    phi.iter()
        .zip(grid.weights())
        .map(|(a, w)| a.norm().powf(p) * w)
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `(g, h)` on a momentum grid with uniform weight `dk`.
pub fn inner_k(g: &[C64], h: &[C64], kgrid: &MomentumGrid) -> C64 {
    g.iter().zip(h).map(|(a, b)| a * b.conj()).sum::<C64>() * kgrid.dk()
}

pub fn norm2_k(g: &[C64], kgrid: &MomentumGrid) -> f64 {
    (g.iter().map(|a| a.norm_sqr()).sum::<f64>() * kgrid.dk()).sqrt()
}

/// `φ̂(k) = (2π)^{-1/2} ∫ e^{-ikx} φ(x) dx` on the dual momentum grid.
///
/// The dual grid is half-shifted, so the discrete map is exactly unitary
/// between `(dx·Σ|φ|²)` and `(dk·Σ|φ̂|²)`.
pub fn fourier_forward(phi: &[C64], grid: &SpatialGrid) -> Result<(MomentumGrid, ComplexField)> {
    check_aligned(phi, grid.len())?;
    if !grid.is_symmetric() {
        return Err(Error::Contract(
            "fourier_forward requires a symmetric grid".into(),
        ));
    }
    let n = grid.len();
    let kgrid = MomentumGrid::dual(grid);
    let mut buf: Vec<C64> = phi
        .iter()
        .enumerate()
        .map(|(j, v)| v * C64::from_polar(1.0, -PI * j as f64 / n as f64))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let x0 = grid.x_min();
    let scale = grid.dx() * FRAC_1_SQRT_2PI;
    let out = kgrid
        .values()
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let m = i as isize - (n / 2) as isize;
            let idx = m.rem_euclid(n as isize) as usize;
            buf[idx] * C64::from_polar(scale, -k * x0)
        })
        .collect();
    Ok((kgrid, out))
}

/// Inverse of [`fourier_forward`].
pub fn fourier_inverse(phi_hat: &[C64], grid: &SpatialGrid) -> Result<ComplexField> {
    check_aligned(phi_hat, grid.len())?;
    if !grid.is_symmetric() {
        return Err(Error::Contract(
            "fourier_inverse requires a symmetric grid".into(),
        ));
    }
    let n = grid.len();
    let kgrid = MomentumGrid::dual(grid);
    let x0 = grid.x_min();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (i, (&k, v)) in kgrid.values().iter().zip(phi_hat).enumerate() {
        let m = i as isize - (n / 2) as isize;
        buf[m.rem_euclid(n as isize) as usize] = v * C64::from_polar(1.0, k * x0);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = kgrid.dk() * FRAC_1_SQRT_2PI;
    Ok(buf
        .iter()
        .enumerate()
        .map(|(j, v)| v * C64::from_polar(scale, PI * j as f64 / n as f64))
        .collect())
}

/// Fourier transform evaluated by direct summation on an arbitrary momentum
/// grid. Oscillatory `x`-integrals use the uniform rule: Simpson's alternating
/// weights alias momenta near the Nyquist limit.
pub fn fourier_on(phi: &[C64], grid: &SpatialGrid, kgrid: &MomentumGrid) -> ComplexField {
    let xs = grid.points();
    let dx = grid.dx();
    kgrid
        .values()
        .iter()
        .map(|&k| {
            let s: C64 = xs
                .iter()
                .zip(phi)
                .map(|(&x, v)| v * C64::from_polar(dx, -k * x))
                .sum();
            s * FRAC_1_SQRT_2PI
        })
        .collect()
}

/// `(2π)^{-1/2} ∫ e^{ikx} g(k) dk` on an arbitrary momentum grid.
pub fn fourier_inverse_on(g: &[C64], grid: &SpatialGrid, kgrid: &MomentumGrid) -> ComplexField {
    let ks = kgrid.values();
    let scale = kgrid.dk() * FRAC_1_SQRT_2PI;
    (0..grid.len())
        .map(|j| {
            let x = grid.x(j);
            ks.iter()
                .zip(g)
                .map(|(&k, v)| v * C64::from_polar(1.0, k * x))
                .sum::<C64>()
                * scale
        })
        .collect()
}

/// Cubic (4-point Lagrange) interpolation; exact at nodes and for cubics.
pub fn interpolate(field: &[C64], grid: &SpatialGrid, x: f64) -> Result<C64> {
    check_aligned(field, grid.len())?;
    if !grid.contains(x) {
        return Err(Error::Domain(format!(
            "x = {x} outside [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let n = grid.len();
    let u = ((x - grid.x_min()) / grid.dx()).clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    if (u - u.round()).abs() < 1e-13 {
        return Ok(field[u.round() as usize]);
    }
    let start = i.saturating_sub(1).min(n - 4);
    let nodes: Vec<f64> = (start..start + 4).map(|j| j as f64).collect();
    let w = lagrange_weights(&nodes, u);
    Ok((0..4).map(|l| field[start + l] * w[l]).sum())
}

/// Lagrange basis values `L_l(x)` for the given nodes.
pub fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|l| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != l)
                .map(|(_, &xm)| (x - xm) / (nodes[l] - xm))
                .product()
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `(e^z - 1)/z`, continuous through `z = 0`.
pub fn expm1_over_z(z: C64) -> C64 {
    if z.norm() < 0.5 {
        // Σ z^n/(n+1)!
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..30 {
            term = term * z / (n as f64 + 1.0);
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `d/dz [(e^z - 1)/z] = (z e^z - e^z + 1)/z²`.
pub fn d_expm1_over_z(z: C64) -> C64 {
    if z.norm() < 0.5 {
        // Σ n z^{n-1}/(n+1)!
        let mut sum = C64::new(0.0, 0.0);
        let mut pow = C64::new(1.0, 0.0);
        let mut fact = 2.0;
        for n in 1..30 {
            let term = pow * (n as f64 / fact);
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
            pow *= z;
            fact *= n as f64 + 2.0;
        }
        sum
    } else {
        (z * z.exp() - z.exp() + 1.0) / (z * z)
    }
}
