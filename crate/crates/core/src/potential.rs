//! Potential families, sampling, weighted norms and decay checks.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, quadrature_real, SpatialGrid};

/// Relative level below which a potential is treated as zero when the
/// Volterra mesh is laid out.
const SUPPORT_CUTOFF: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Zero,
    /// `V = -depth` on `[-half_width, half_width]`.
    SquareWell { depth: f64, half_width: f64 },
    /// `V = -s(s+1) sech²x`.
    PoschlTeller { s: f64 },
    /// `V = amplitude · exp(-x²/width²)`.
    Gaussian { amplitude: f64, width: f64 },
    /// Tabulated `(x, V)` pairs, cubic interpolation, zero outside the table.
    Samples { xs: Vec<f64>, vs: Vec<f64> },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.into()));
        match *self {
            Family::Zero => Ok(()),
            Family::SquareWell { depth, half_width } => {
                if !(depth > 0.0 && depth.is_finite() && half_width > 0.0 && half_width.is_finite()) {
                    return bad("square_well needs depth > 0 and half_width > 0");
                }
                Ok(())
            }
            Family::PoschlTeller { s } => {
                // s ∈ (-1, 0) gives the repulsive profile.
                if !(s > -1.0 && s != 0.0 && s.is_finite()) {
                    return bad("poschl_teller needs s > -1, s ≠ 0");
                }
                Ok(())
            }
            Family::Gaussian { amplitude, width } => {
                if !(amplitude.is_finite() && width > 0.0 && width.is_finite()) {
                    return bad("gaussian needs finite amplitude and width > 0");
                }
                Ok(())
            }
            Family::Samples { ref xs, ref vs } => {
                if xs.len() < 4 || xs.len() != vs.len() {
                    return bad("sample table needs at least 4 (x, V) rows");
                }
                if xs.iter().chain(vs).any(|v| !v.is_finite()) {
                    return bad("sample table contains non-finite values");
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("sample abscissae must be strictly increasing");
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::SquareWell { .. } => "square_well",
            Family::PoschlTeller { .. } => "poschl_teller",
            Family::Gaussian { .. } => "gaussian",
            Family::Samples { .. } => "samples",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Family::Zero => 0.0,
            Family::SquareWell { depth, half_width } => {
                if x.abs() <= half_width {
                    -depth
                } else {
                    0.0
                }
            }
            Family::PoschlTeller { s } => {
                let c = x.cosh();
                -s * (s + 1.0) / (c * c)
            }
            Family::Gaussian { amplitude, width } => amplitude * (-(x / width).powi(2)).exp(),
            Family::Samples { ref xs, ref vs } => table_eval(xs, vs, x),
        }
    }

    /// Points where `V` jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match *self {
            Family::SquareWell { half_width, .. } => vec![-half_width, half_width],
            _ => Vec::new(),
        }
    }

    /// Interval outside of which `|V| < 1e-18 · max|V|`, or `None` for `V ≡ 0`.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Family::Zero => None,
            Family::SquareWell { half_width, .. } => Some((-half_width, half_width)),
            Family::PoschlTeller { .. } => {
                // 4 e^{-2|x|} ≥ sech²x
                let r = 0.5 * (4.0 / SUPPORT_CUTOFF).ln();
                Some((-r, r))
            }
            Family::Gaussian { amplitude, width } => {
                if amplitude == 0.0 {
                    return None;
                }
                let r = width * (-SUPPORT_CUTOFF.ln()).sqrt();
                Some((-r, r))
            }
            Family::Samples { ref xs, ref vs } => {
                let max = vs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if max == 0.0 {
                    return None;
                }
                let keep = |v: &f64| v.abs() >= SUPPORT_CUTOFF * max;
                let lo = vs.iter().position(keep)?;
                let hi = vs.iter().rposition(keep)?;
                Some((xs[lo.saturating_sub(2)], xs[(hi + 2).min(xs.len() - 1)]))
            }
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, Family::Samples { .. })
    }

    /// Reads a two-column CSV `(x, V)`; lines starting with `#` and a
    /// non-numeric header line are skipped.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => {
                    xs.push(v[0]);
                    vs.push(v[1]);
                }
                Ok(_) => {
                    return Err(Error::Validation(format!(
                        "{}:{}: expected two columns (x, V)",
                        path.display(),
                        lineno + 1
                    )))
                }
                Err(_) if xs.is_empty() && lineno == 0 => continue,
                Err(_) => {
                    return Err(Error::Validation(format!(
                        "{}:{}: non-numeric or non-real sample",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        let fam = Family::Samples { xs, vs };
        fam.validate()?;
        Ok(fam)
    }
}

fn table_eval(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
    let start = i.saturating_sub(1).min(n - 4);
    let nodes = &xs[start..start + 4];
    let w = crate::numerics::lagrange_weights(nodes, x);
    (0..4).map(|l| w[l] * vs[start + l]).sum()
}

/// A potential family sampled on a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    family: Family,
    grid: SpatialGrid,
    values: Vec<f64>,
}

/// Samples `family` on `grid`.
pub fn build_potential(family: Family, grid: &SpatialGrid) -> Result<Potential> {
    family.validate()?;
    let values: Vec<f64> = grid.points().iter().map(|&x| family.eval(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("potential samples are not finite".into()));
    }
    Ok(Potential {
        family,
        grid: grid.clone(),
        values,
    })
}

impl Potential {
    pub fn zero(grid: &SpatialGrid) -> Self {
        build_potential(Family::Zero, grid).expect("zero potential is valid")
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.family.eval(x)
    }

    /// Flag carried by tabulated potentials: decay is measured, not known.
    pub fn unverified_decay(&self) -> bool {
        self.family.is_tabulated()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0) && self.family.support().is_none()
    }

    pub fn min_value(&self) -> f64 {
        let sampled = self.values.iter().copied().fold(0.0, f64::min);
        match self.family {
            Family::SquareWell { depth, .. } => -depth,
            Family::PoschlTeller { s } => (-s * (s + 1.0)).min(0.0),
            Family::Gaussian { amplitude, .. } => amplitude.min(0.0),
            _ => sampled,
        }
    }

    /// Support interval clipped to the grid box.
    pub fn support(&self) -> Option<(f64, f64)> {
        let (lo, hi) = self.family.support()?;
        let lo = lo.max(self.grid.x_min());
        let hi = hi.min(self.grid.x_max());
        (hi > lo).then_some((lo, hi))
    }

    /// Same family resampled on another grid.
    pub fn resampled(&self, grid: &SpatialGrid) -> Self {
        build_potential(self.family.clone(), grid).expect("family already validated")
    }

    /// `∫ |V(x)| (1+|x|)^γ dx` over the grid box.
    ///
    /// Analytic families are integrated with Gauss–Legendre panels split at
    /// `x = 0` (the weight has a kink there) and at the jumps of `V`;
    /// tabulated potentials use Simpson on the grid samples.
    pub fn weighted_norm(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0) {
            return Err(Error::Domain(format!("weight exponent must be >= 0, got {gamma}")));
        }
        let weight = |x: f64| (1.0 + x.abs()).powf(gamma);
        if self.family.is_tabulated() {
            let f: Vec<f64> = self
                .grid
                .points()
                .iter()
                .zip(&self.values)
                .map(|(&x, v)| v.abs() * weight(x))
                .collect();
            return Ok(quadrature_real(&f, &self.grid));
        }
        let Some((lo, hi)) = self.support() else {
            return Ok(0.0);
        };
        let mut cuts = vec![lo, hi];
        cuts.extend(
            std::iter::once(0.0)
                .chain(self.family.discontinuities())
                .filter(|&c| c > lo && c < hi),
        );
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut points"));
        let (nodes, wts) = gauss_legendre(8);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let panels = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / panels as f64;
            for p in 0..panels {
                let a = w[0] + p as f64 * h;
                for (t, wt) in nodes.iter().zip(&wts) {
                    let x = a + 0.5 * h * (1.0 + t);
                    total += 0.5 * h * wt * self.family.eval(x).abs() * weight(x);
                }
            }
        }
        Ok(total)
    }

    /// Polynomial decay exponent `ρ` of the tail, `|V| ~ (1+|x|)^{-ρ}`, fitted
    /// on the outer half of the box. Infinite when the tail vanishes.
    pub fn tail_exponent(&self) -> f64 {
        let xm = self.grid.x_max().abs().max(self.grid.x_min().abs());
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return f64::INFINITY;
        }
        let pts: Vec<(f64, f64)> = self
            .grid
            .points()
            .iter()
            .zip(&self.values)
            .filter(|(x, v)| x.abs() >= 0.5 * xm && v.abs() > 1e-300)
            .map(|(x, v)| ((1.0 + x.abs()).ln(), v.abs().ln()))
            .collect();
        if pts.len() < 8 {
            return f64::INFINITY;
        }
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (x, y) in &pts {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
        let slope = sxy / sxx;
        (-slope).max(0.0)
    }

    pub fn decay_report(&self) -> DecayReport {
        let rho = self.tail_exponent();
        let norms: Vec<(f64, f64)> = GAMMA_LADDER
            .iter()
            .map(|&g| (g, self.weighted_norm(g).expect("ladder is non-negative")))
            .collect();
        let gamma_star = GAMMA_LADDER
            .iter()
            .copied()
            .filter(|&g| rho - g > 1.0)
            .fold(f64::NAN, f64::max);
        DecayReport {
            gamma_star: if gamma_star.is_nan() { None } else { Some(gamma_star) },
            tail_exponent: rho,
            norms,
            unverified: self.unverified_decay(),
        }
    }
}

/// Weights tested when reporting `‖V‖_{L¹_γ}`.
pub const GAMMA_LADDER: [f64; 10] = [0.0, 0.5, 1.0, 1.5, 1.75, 2.0, 2.5, 2.75, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Generic,
    Exceptional,
}

impl Classification {
    /// Weight the decay hypothesis demands, with a margin of 1/4.
    pub fn required_gamma(self) -> f64 {
        match self {
            Classification::Generic => 1.75,
            Classification::Exceptional => 2.75,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Generic => "generic",
            Classification::Exceptional => "exceptional",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// Largest ladder weight whose norm is finite, if any.
    pub gamma_star: Option<f64>,
    pub tail_exponent: f64,
    pub norms: Vec<(f64, f64)>,
    pub unverified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub required_gamma: f64,
    pub report: DecayReport,
}

/// A discrete norm on a finite box is always finite; the norm counts as
/// finite when the measured tail `(1+|x|)^{-ρ}` makes `|V|(1+|x|)^γ`
/// integrable, i.e. `ρ - γ > 1`.
pub fn hypothesis_check(v: &Potential, class: Classification) -> HypothesisCheck {
    let report = v.decay_report();
    let required = class.required_gamma();
    HypothesisCheck {
        pass: report.tail_exponent - required > 1.0,
        required_gamma: required,
        report,
    }
}

#[derive(Debug, Deserialize)]
struct GridSection {
    x_max: f64,
    n: usize,
}

#[derive(Debug, Deserialize)]
struct SpecFile {
    family: String,
    #[serde(default)]
    params: Map<String, Value>,
    grid: Option<GridSection>,
}

/// A parsed potential description: family plus the requested grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub family: Family,
    pub grid: SpatialGrid,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        build_potential(self.family.clone(), &self.grid)
    }

    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: SpecFile =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("potential description: {e}")))?;
        let p = |names: &[&str]| -> Result<f64> {
            names
                .iter()
                .find_map(|n| raw.params.get(*n))
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Validation(format!("missing numeric parameter `{}`", names[0])))
        };
        let family = match raw.family.as_str() {
            "zero" => Family::Zero,
            "square_well" => Family::SquareWell {
                depth: p(&["depth", "V0"])?,
                half_width: p(&["half_width", "a"])?,
            },
            "poschl_teller" => Family::PoschlTeller { s: p(&["s", "strength"])? },
            "gaussian" => Family::Gaussian {
                amplitude: p(&["amplitude", "A"])?,
                width: p(&["width", "w"])?,
            },
            "samples" => {
                let file = raw
                    .params
                    .get("file")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Validation("samples family needs params.file".into()))?;
                let mut path = PathBuf::from(file);
                if path.is_relative() {
                    if let Some(dir) = base_dir {
                        path = dir.join(path);
                    }
                }
                Family::from_csv(&path)?
            }
            other => return Err(Error::Validation(format!("unknown potential family `{other}`"))),
        };
        family.validate()?;
        let grid = match raw.grid {
            Some(g) => SpatialGrid::symmetric(g.x_max, g.n)?,
            None => SpatialGrid::default_box(),
        };
        Ok(Self { family, grid })
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, path.parent())
    }
}
