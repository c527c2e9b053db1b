//! Jost solutions, transmission/reflection coefficients and the
//! generic/exceptional classification.

mod solver;

pub use solver::{
    Direction, JostColumn, JostDerivative, JostSolver, Location, VolterraScheme, DEFAULT_SPACING,
    DERIVATIVE_K_MIN,
};

use crate::error::{Error, Result};
use crate::io::csv;
use crate::numerics::{expm1_over_z, MomentumGrid, SpatialGrid, C64};
use crate::potential::{Classification, Potential};

/// Relative Wronskian threshold separating generic from exceptional.
pub const CLASSIFICATION_TOLERANCE: f64 = 1e-6;
/// Modulus of `1/T` below which a transmission pole is reported.
pub const DEGENERATE_INV_T: f64 = 1e-12;
/// Momentum used for the finite-difference slope of `T` at the origin.
pub const ALPHA_PROBE: f64 = 0.05;

/// `D_k(x) = ∫₀ˣ e^{2iky} dy`.
pub fn dk_kernel(k: C64, x: f64) -> Result<C64> {
    if k.im < 0.0 {
        return Err(Error::Domain(format!("Im k must be >= 0, got {k}")));
    }
    Ok(expm1_over_z(C64::new(0.0, 2.0) * k * x) * x)
}

/// `m₁(·, k)` (or `m₂`) for a single momentum, on the Volterra mesh.
pub fn solve_m(dir: Direction, v: &Potential, k: C64, scheme: VolterraScheme) -> Result<JostColumn> {
    JostSolver::new(v).solve(dir, k, scheme)
}

/// `∂m/∂k` for a single real momentum.
pub fn solve_m_derivative(dir: Direction, v: &Potential, k: f64) -> Result<JostDerivative> {
    JostSolver::new(v).solve_derivative(dir, k)
}

/// `m₁`, `m₂` sampled on a spatial grid for every momentum of a set.
#[derive(Debug, Clone)]
pub struct JostData {
    pub grid: SpatialGrid,
    pub ks: Vec<f64>,
    pub m1: Vec<Vec<C64>>,
    pub m2: Vec<Vec<C64>>,
    pub iterations: Vec<[usize; 2]>,
    pub residual: Vec<[f64; 2]>,
}

impl JostData {
    pub fn compute(v: &Potential, kgrid: &MomentumGrid, scheme: VolterraScheme) -> Result<Self> {
        let solver = JostSolver::new(v);
        let grid = v.grid().clone();
        let locs = solver.locate_grid(&grid);
        let mut out = Self {
            grid,
            ks: kgrid.values().to_vec(),
            m1: Vec::new(),
            m2: Vec::new(),
            iterations: Vec::new(),
            residual: Vec::new(),
        };
        for &k in kgrid.values() {
            let c1 = solver.solve(Direction::One, C64::new(k, 0.0), scheme)?;
            let c2 = solver.solve(Direction::Two, C64::new(k, 0.0), scheme)?;
            out.m1.push(c1.sample_located(&locs));
            out.m2.push(c2.sample_located(&locs));
            out.iterations.push([c1.iterations, c2.iterations]);
            out.residual.push([c1.residual, c2.residual]);
        }
        Ok(out)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// `T`, `R₁`, `R₂` at one momentum, with both evaluations of `1/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub t: C64,
    pub r1: C64,
    pub r2: C64,
    pub inv_t1: C64,
    pub inv_t2: C64,
}

impl Coefficients {
    pub fn unitarity_defect(&self) -> f64 {
        let t2 = self.t.norm_sqr();
        (t2 + self.r1.norm_sqr() - 1.0)
            .abs()
            .max((t2 + self.r2.norm_sqr() - 1.0).abs())
    }

    /// Disagreement of the two transmission evaluations.
    pub fn cross_check(&self) -> f64 {
        (self.inv_t1 - self.inv_t2).norm()
    }
}

/// Coefficients from the two mesh-end sums of the Jost columns at real `k ≠ 0`.
pub fn coefficients_from(c1: &JostColumn, c2: &JostColumn) -> Result<Coefficients> {
    let k = c1.k;
    let two_ik = C64::new(0.0, 2.0) * k;
    if k.norm() == 0.0 {
        return Err(Error::Domain("coefficients need k != 0".into()));
    }
    let inv_t1 = 1.0 - c1.total() / two_ik;
    let inv_t2 = 1.0 - c2.total() / two_ik;
    if inv_t1.norm() < DEGENERATE_INV_T {
        return Err(Error::Degenerate {
            k: k.re,
            inv_t_abs: inv_t1.norm(),
        });
    }
    let t = 1.0 / inv_t1;
    let (r1, r2) = match (c1.inner_end(), c2.inner_end()) {
        (Some((xl, m1l)), Some((xr, m2r))) => {
            let r2_t = (two_ik * xl).exp() * (c1.total() / two_ik + m1l - 1.0);
            let r1_t = (-two_ik * xr).exp() * (c2.total() / two_ik + m2r - 1.0);
            (r1_t * t, r2_t * t)
        }
        _ => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
    };
    Ok(Coefficients {
        t,
        r1,
        r2,
        inv_t1,
        inv_t2,
    })
}

pub fn coefficients_at(solver: &JostSolver, k: f64) -> Result<Coefficients> {
    let kc = C64::new(k, 0.0);
    let c1 = solver.solve_fast(Direction::One, kc)?;
    let c2 = solver.solve_fast(Direction::Two, kc)?;
    coefficients_from(&c1, &c2)
}

/// `1/T(iβ) = 1 + (2β)^{-1} ∫ V m₁(·, iβ)`, real for `β > 0`.
pub fn inverse_transmission_imaginary(solver: &JostSolver, beta: f64) -> Result<f64> {
    let c = solver.solve_fast(Direction::One, C64::new(0.0, beta))?;
    Ok(1.0 + c.total().re / (2.0 * beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyReport {
    pub classification: Classification,
    pub wronskian: f64,
    pub threshold: f64,
    /// `lim f₁(x, 0)` as `x → x_min`, for exceptional potentials.
    pub a: Option<f64>,
    /// Zero-energy solution `f₁(·, 0)` on the potential's grid.
    pub half_bound_state: Option<Vec<f64>>,
}

/// Zero-energy Wronskian test, evaluated exactly at `k = 0`.
pub fn classify(v: &Potential) -> Result<ClassifyReport> {
    classify_with(&JostSolver::new(v), v)
}

pub fn classify_with(solver: &JostSolver, v: &Potential) -> Result<ClassifyReport> {
    let zero = C64::new(0.0, 0.0);
    let c1 = solver.solve(Direction::One, zero, VolterraScheme::Marching)?;
    let c2 = solver.solve(Direction::Two, zero, VolterraScheme::Marching)?;
    let (f1, f1p) = (c1.value(0.0), c1.derivative(0.0));
    let (f2, f2p) = (c2.value(0.0), c2.derivative(0.0));
    let wronskian = (f1p * f2 - f1 * f2p).re;
    let threshold = CLASSIFICATION_TOLERANCE * (1.0 + v.weighted_norm(1.0)?);
    if wronskian.abs() < threshold {
        let grid = v.grid();
        Ok(ClassifyReport {
            classification: Classification::Exceptional,
            wronskian,
            threshold,
            a: Some(c1.value(grid.x_min()).re),
            half_bound_state: Some(c1.sample(grid).iter().map(|z| z.re).collect()),
        })
    } else {
        Ok(ClassifyReport {
            classification: Classification::Generic,
            wronskian,
            threshold,
            a: None,
            half_bound_state: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringCoefficients {
    pub ks: Vec<f64>,
    pub t: Vec<C64>,
    pub r1: Vec<C64>,
    pub r2: Vec<C64>,
    /// `|1/T|` disagreement between the two Jost directions, per `k`.
    pub cross_check: Vec<f64>,
    pub classification: Classification,
    pub wronskian: f64,
    pub a: Option<f64>,
    pub alpha_estimate: Option<C64>,
}

/// Disagreement of the two `1/T` evaluations above which a momentum is
/// considered under-resolved.
pub const CROSS_CHECK_FLAG: f64 = 1e-6;

pub fn scattering_coefficients(v: &Potential, kgrid: &MomentumGrid) -> Result<ScatteringCoefficients> {
    let solver = JostSolver::new(v);
    scattering_coefficients_with(&solver, v, kgrid.values())
}

pub fn scattering_coefficients_with(
    solver: &JostSolver,
    v: &Potential,
    ks: &[f64],
) -> Result<ScatteringCoefficients> {
    if let Some(k) = ks.iter().find(|k| **k == 0.0 || !k.is_finite()) {
        return Err(Error::Domain(format!(
            "momentum grid must be punctured at 0 and finite, found {k}"
        )));
    }
    let class = classify_with(solver, v)?;
    let mut out = ScatteringCoefficients {
        ks: ks.to_vec(),
        t: Vec::with_capacity(ks.len()),
        r1: Vec::with_capacity(ks.len()),
        r2: Vec::with_capacity(ks.len()),
        cross_check: Vec::with_capacity(ks.len()),
        classification: class.classification,
        wronskian: class.wronskian,
        a: class.a,
        alpha_estimate: None,
    };
    for &k in ks {
        let c = coefficients_at(solver, k)?;
        out.t.push(c.t);
        out.r1.push(c.r1);
        out.r2.push(c.r2);
        out.cross_check.push(c.cross_check());
    }
    if class.classification == Classification::Generic {
        let tp = coefficients_at(solver, ALPHA_PROBE)?.t;
        let tm = coefficients_at(solver, -ALPHA_PROBE)?.t;
        out.alpha_estimate = Some((tp - tm) / (2.0 * ALPHA_PROBE));
    }
    Ok(out)
}

impl ScatteringCoefficients {
    pub fn unitarity_defects(&self) -> Vec<f64> {
        (0..self.ks.len())
            .map(|i| {
                let t2 = self.t[i].norm_sqr();
                (t2 + self.r1[i].norm_sqr() - 1.0)
                    .abs()
                    .max((t2 + self.r2[i].norm_sqr() - 1.0).abs())
            })
            .collect()
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.unitarity_defects().into_iter().fold(0.0, f64::max)
    }

    /// Momenta where the two transmission evaluations disagree beyond
    /// [`CROSS_CHECK_FLAG`].
    pub fn under_resolved(&self) -> Vec<f64> {
        self.ks
            .iter()
            .zip(&self.cross_check)
            .filter(|(_, &c)| c > CROSS_CHECK_FLAG)
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let defects = self.unitarity_defects();
        let rows = (0..self.ks.len()).map(|i| {
            [
                self.ks[i],
                self.t[i].re,
                self.t[i].im,
                self.r1[i].re,
                self.r1[i].im,
                self.r2[i].re,
                self.r2[i].im,
                defects[i],
            ]
        });
        csv(
            &["k", "ReT", "ImT", "ReR1", "ImR1", "ReR2", "ImR2", "unitarity_defect"],
            rows,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationReport {
    /// `sup |T m₂ − R₁ e^{2ikx} m₁ − m₁(·,−k)|`.
    pub relation_1: f64,
    /// `sup |T m₁ − R₂ e^{−2ikx} m₂ − m₂(·,−k)|`.
    pub relation_2: f64,
    pub unitarity: f64,
}

/// Checks the Jost-basis relations and unitarity over a symmetric `k`-set.
pub fn verify_relations(data: &JostData, coeffs: &ScatteringCoefficients) -> Result<RelationReport> {
    if data.ks != coeffs.ks {
        return Err(Error::Contract("Jost data and coefficients use different k-sets".into()));
    }
    let n = data.ks.len();
    let xs = data.grid.points();
    let mut rel1: f64 = 0.0;
    let mut rel2: f64 = 0.0;
    for i in 0..n {
        let k = data.ks[i];
        let Some(mi) = data.ks.iter().position(|&q| q == -k) else {
            return Err(Error::Contract(format!("k-set lacks the mirror of {k}")));
        };
        for (j, &x) in xs.iter().enumerate() {
            let ph = C64::from_polar(1.0, 2.0 * k * x);
            let d1 = coeffs.t[i] * data.m2[i][j] - coeffs.r1[i] * ph * data.m1[i][j] - data.m1[mi][j];
            let d2 = coeffs.t[i] * data.m1[i][j] - coeffs.r2[i] * ph.conj() * data.m2[i][j] - data.m2[mi][j];
            rel1 = rel1.max(d1.norm());
            rel2 = rel2.max(d2.norm());
        }
    }
    Ok(RelationReport {
        relation_1: rel1,
        relation_2: rel2,
        unitarity: coeffs.max_unitarity_defect(),
    })
}
