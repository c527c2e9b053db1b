//! Discrete Volterra sweeps on a mesh covering the support of `V`.
//!
//! The integral `∫ D_k(|y - x|) V(y) m(y) dy` is accumulated interval by
//! interval from the asymptotic end inward. On each interval `m` is replaced
//! by its Lagrange interpolant through up to six already-known nodes (plus
//! the new one) and the product `D_k · V · L_l` is integrated exactly by
//! Gauss–Legendre. The new value solves a scalar linear equation, so one
//! sweep yields the exact fixed point of the discretized equation.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{d_expm1_over_z, expm1_over_z, gauss_legendre, lagrange_weights, SpatialGrid, C64};
use crate::potential::Potential;

pub(crate) const STENCIL: usize = 6;
const GAUSS: usize = 6;
/// Mesh spacing inside the support.
pub const DEFAULT_SPACING: f64 = 0.01;
/// Fractions of the spacing at which extra nodes cluster around a jump of `V`.
const GRADING: [f64; 4] = [1e-3, 1e-2, 0.1, 0.3];

/// `1`: normalized at `+∞` (`m₁`, swept leftward); `2`: at `-∞` (`m₂`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    One,
    Two,
}

impl Direction {
    fn idx(self) -> usize {
        match self {
            Direction::One => 0,
            Direction::Two => 1,
        }
    }

    /// `m′ = sign · (B + 2ik(m - 1))`.
    fn sign(self) -> f64 {
        match self {
            Direction::One => -1.0,
            Direction::Two => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolterraScheme {
    /// Single implicit sweep.
    Marching,
    /// `m ← 1 + K m` until successive iterates differ by less than `tol`.
    Picard { tol: f64, max_iter: usize },
}

impl Default for VolterraScheme {
    fn default() -> Self {
        VolterraScheme::Marching
    }
}

impl VolterraScheme {
    pub fn picard() -> Self {
        VolterraScheme::Picard {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

type Table = [[f64; STENCIL]; GAUSS];

#[derive(Debug)]
struct DirTables {
    p: Vec<Table>,
    w1: Vec<[f64; STENCIL]>,
    len: Vec<u8>,
}

#[derive(Debug)]
pub(crate) struct Mesh {
    x: Vec<f64>,
    seg_lo: Vec<usize>,
    seg_hi: Vec<usize>,
    class: Vec<usize>,
    widths: Vec<f64>,
    gl_s: Vec<[f64; GAUSS]>,
    tables: [DirTables; 2],
}

/// Where a query point sits relative to the mesh.
#[derive(Debug, Clone, Copy)]
pub enum Location {
    Left(f64),
    Right(f64),
    Inside { start: usize, len: usize, w: [f64; STENCIL] },
    Empty,
}

impl Mesh {
    fn build(v: &Potential, h: f64) -> Option<Self> {
        let (lo, hi) = v.support()?;
        let fam = v.family();
        let jumps: Vec<f64> = fam
            .discontinuities()
            .into_iter()
            .filter(|&b| b >= lo && b <= hi)
            .collect();
        let mut knots = vec![lo, hi];
        knots.extend(jumps.iter().copied());
        if lo < 0.0 && hi > 0.0 {
            knots.push(0.0);
        }
        knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut x = Vec::new();
        for w in knots.windows(2) {
            let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
            let step = (w[1] - w[0]) / n as f64;
            for i in 0..n {
                x.push(w[0] + i as f64 * step);
            }
        }
        x.push(*knots.last().expect("two knots"));
        for &b in &jumps {
            for f in GRADING {
                for c in [b - f * h, b + f * h] {
                    if c > lo && c < hi {
                        x.push(c);
                    }
                }
            }
        }
        x.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
        x.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let n = x.len();
        let is_jump: Vec<bool> = x
            .iter()
            .map(|&xi| jumps.iter().any(|&b| (xi - b).abs() < 1e-12))
            .collect();
        let mut seg_lo = vec![0; n - 1];
        let mut seg_hi = vec![n - 1; n - 1];
        let mut last = 0;
        for j in 0..n - 1 {
            if is_jump[j] {
                last = j;
            }
            seg_lo[j] = last;
        }
        let mut next = n - 1;
        for j in (0..n - 1).rev() {
            if is_jump[j + 1] {
                next = j + 1;
            }
            seg_hi[j] = next;
        }

        let (gx, gw) = gauss_legendre(GAUSS);
        let mut class = Vec::with_capacity(n - 1);
        let mut widths = Vec::new();
        let mut gl_s = Vec::new();
        let mut ids: HashMap<u64, usize> = HashMap::new();
        for j in 0..n - 1 {
            let hj = x[j + 1] - x[j];
            let id = *ids.entry(hj.to_bits()).or_insert_with(|| {
                widths.push(hj);
                let mut s = [0.0; GAUSS];
                for g in 0..GAUSS {
                    s[g] = 0.5 * hj * (1.0 + gx[g]);
                }
                gl_s.push(s);
                widths.len() - 1
            });
            class.push(id);
        }

        let mut tables = [
            DirTables { p: Vec::new(), w1: Vec::new(), len: Vec::new() },
            DirTables { p: Vec::new(), w1: Vec::new(), len: Vec::new() },
        ];
        for (d, tab) in tables.iter_mut().enumerate() {
            for j in 0..n - 1 {
                let hj = x[j + 1] - x[j];
                let (new, len) = if d == 0 {
                    (j, (seg_hi[j] - j + 1).min(STENCIL))
                } else {
                    (j + 1, (j + 1 - seg_lo[j] + 1).min(STENCIL))
                };
                let node = |l: usize| if d == 0 { new + l } else { new - l };
                let s_nodes: Vec<f64> = (0..len).map(|l| (x[node(l)] - x[new]).abs()).collect();
                let mut p = [[0.0; STENCIL]; GAUSS];
                let mut w1 = [0.0; STENCIL];
                for g in 0..GAUSS {
                    let s = 0.5 * hj * (1.0 + gx[g]);
                    let y = if d == 0 { x[new] + s } else { x[new] - s };
                    let base = 0.5 * hj * gw[g] * fam.eval(y);
                    let lw = lagrange_weights(&s_nodes, s);
                    for l in 0..len {
                        p[g][l] = base * lw[l];
                        w1[l] += p[g][l];
                    }
                }
                tab.p.push(p);
                tab.w1.push(w1);
                tab.len.push(len as u8);
            }
        }
        Some(Self {
            x,
            seg_lo,
            seg_hi,
            class,
            widths,
            gl_s,
            tables,
        })
    }

    fn locate(&self, x: f64) -> Location {
        let n = self.x.len();
        if x < self.x[0] {
            return Location::Left(self.x[0] - x);
        }
        if x > self.x[n - 1] {
            return Location::Right(x - self.x[n - 1]);
        }
        let j = self.x.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let (lo, hi) = (self.seg_lo[j], self.seg_hi[j]);
        let len = (hi - lo + 1).min(STENCIL);
        let start = j.saturating_sub(2).clamp(lo, hi + 1 - len);
        let nodes: Vec<f64> = self.x[start..start + len].to_vec();
        let lw = lagrange_weights(&nodes, x);
        let mut w = [0.0; STENCIL];
        w[..len].copy_from_slice(&lw);
        Location::Inside { start, len, w }
    }
}

/// Per-`k` kernel values for every interval width class.
struct KernelCache {
    d: Vec<[C64; GAUSS]>,
    big_e: Vec<C64>,
    dh: Vec<C64>,
}

impl KernelCache {
    fn new(mesh: &Mesh, k: C64) -> Self {
        let two_ik = C64::new(0.0, 2.0) * k;
        let mut d = Vec::with_capacity(mesh.widths.len());
        let mut big_e = Vec::with_capacity(mesh.widths.len());
        let mut dh = Vec::with_capacity(mesh.widths.len());
        for (c, &h) in mesh.widths.iter().enumerate() {
            let mut dc = [C64::new(0.0, 0.0); GAUSS];
            for g in 0..GAUSS {
                let s = mesh.gl_s[c][g];
                dc[g] = expm1_over_z(two_ik * s) * s;
            }
            d.push(dc);
            big_e.push((two_ik * h).exp());
            dh.push(expm1_over_z(two_ik * h) * h);
        }
        Self { d, big_e, dh }
    }

    /// `∂/∂k` of `D` and of `D_k(h)`.
    fn derivative(mesh: &Mesh, k: C64) -> (Vec<[C64; GAUSS]>, Vec<C64>) {
        let two_ik = C64::new(0.0, 2.0) * k;
        let i2 = C64::new(0.0, 2.0);
        let mut d = Vec::with_capacity(mesh.widths.len());
        let mut dh = Vec::with_capacity(mesh.widths.len());
        for (c, &h) in mesh.widths.iter().enumerate() {
            let mut dc = [C64::new(0.0, 0.0); GAUSS];
            for g in 0..GAUSS {
                let s = mesh.gl_s[c][g];
                dc[g] = i2 * s * s * d_expm1_over_z(two_ik * s);
            }
            d.push(dc);
            dh.push(i2 * h * h * d_expm1_over_z(two_ik * h));
        }
        (d, dh)
    }
}

/// `∫ D_k · V · L_l` over interval `j` for each stencil slot.
fn weights(tab: &Table, len: usize, d: &[C64; GAUSS]) -> [C64; STENCIL] {
    let mut w = [C64::new(0.0, 0.0); STENCIL];
    for g in 0..GAUSS {
        for l in 0..len {
            w[l] += d[g] * tab[g][l];
        }
    }
    w
}

/// One direction, one `k`: values of `m` and of `B(x) = ∫ V m` (taken from
/// the asymptotic end up to `x`) on the mesh.
#[derive(Debug, Clone)]
pub struct JostColumn {
    pub direction: Direction,
    pub k: C64,
    pub iterations: usize,
    pub residual: f64,
    mesh: Option<Arc<Mesh>>,
    m: Vec<C64>,
    b: Vec<C64>,
}

impl JostColumn {
    fn trivial(direction: Direction, k: C64) -> Self {
        Self {
            direction,
            k,
            iterations: 0,
            residual: 0.0,
            mesh: None,
            m: Vec::new(),
            b: Vec::new(),
        }
    }

    fn inner_index(&self) -> usize {
        match self.direction {
            Direction::One => 0,
            Direction::Two => self.m.len() - 1,
        }
    }

    /// `∫ V m` over the whole support.
    pub fn total(&self) -> C64 {
        if self.m.is_empty() {
            return C64::new(0.0, 0.0);
        }
        self.b[self.inner_index()]
    }

    /// `m` at the inner end of the mesh and the position of that end.
    pub fn inner_end(&self) -> Option<(f64, C64)> {
        let mesh = self.mesh.as_ref()?;
        let i = self.inner_index();
        Some((mesh.x[i], self.m[i]))
    }

    pub fn locate(&self, x: f64) -> Location {
        match &self.mesh {
            Some(mesh) => mesh.locate(x),
            None => Location::Empty,
        }
    }

    /// `(m, B)` at a located point.
    pub fn eval_at(&self, loc: &Location) -> (C64, C64) {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let beyond = |d: f64| {
            let i = self.inner_index();
            let z = C64::new(0.0, 2.0) * self.k * d;
            let m = one + expm1_over_z(z) * d * self.b[i] + z.exp() * (self.m[i] - one);
            (m, self.b[i])
        };
        match (*loc, self.direction) {
            (Location::Empty, _) => (one, zero),
            (Location::Left(d), Direction::One) | (Location::Right(d), Direction::Two) => beyond(d),
            (Location::Left(_), Direction::Two) | (Location::Right(_), Direction::One) => (one, zero),
            (Location::Inside { start, len, w }, _) => {
                let mut m = zero;
                let mut b = zero;
                for l in 0..len {
                    m += self.m[start + l] * w[l];
                    b += self.b[start + l] * w[l];
                }
                (m, b)
            }
        }
    }

    pub fn value(&self, x: f64) -> C64 {
        self.eval_at(&self.locate(x)).0
    }

    /// `∂m/∂x`.
    pub fn derivative(&self, x: f64) -> C64 {
        let (m, b) = self.eval_at(&self.locate(x));
        (b + C64::new(0.0, 2.0) * self.k * (m - 1.0)) * self.direction.sign()
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<C64> {
        grid.points().iter().map(|&x| self.value(x)).collect()
    }

    pub fn sample_located(&self, locs: &[Location]) -> Vec<C64> {
        locs.iter().map(|l| self.eval_at(l).0).collect()
    }

    pub fn mesh_nodes(&self) -> &[f64] {
        self.mesh.as_ref().map(|m| m.x.as_slice()).unwrap_or(&[])
    }

    pub fn mesh_values(&self) -> &[C64] {
        &self.m
    }
}

/// Volterra solver for a fixed potential; reusable across `k`.
#[derive(Debug, Clone)]
pub struct JostSolver {
    mesh: Option<Arc<Mesh>>,
    spacing: f64,
}

impl JostSolver {
    pub fn new(v: &Potential) -> Self {
        Self::with_spacing(v, DEFAULT_SPACING).expect("default spacing is valid")
    }

    pub fn with_spacing(v: &Potential, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Validation(format!("mesh spacing must be positive, got {h}")));
        }
        Ok(Self {
            mesh: Mesh::build(v, h).map(Arc::new),
            spacing: h,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn mesh_len(&self) -> usize {
        self.mesh.as_ref().map_or(0, |m| m.x.len())
    }

    /// Mesh extent `[x_L, x_R]`, if `V ≢ 0`.
    pub fn extent(&self) -> Option<(f64, f64)> {
        let m = self.mesh.as_ref()?;
        Some((m.x[0], *m.x.last().expect("non-empty mesh")))
    }

    pub fn locate(&self, x: f64) -> Location {
        match &self.mesh {
            Some(mesh) => mesh.locate(x),
            None => Location::Empty,
        }
    }

    pub fn locate_grid(&self, grid: &SpatialGrid) -> Vec<Location> {
        grid.points().iter().map(|&x| self.locate(x)).collect()
    }

    pub fn solve(&self, dir: Direction, k: C64, scheme: VolterraScheme) -> Result<JostColumn> {
        check_k(k)?;
        let Some(mesh) = &self.mesh else {
            return Ok(JostColumn::trivial(dir, k));
        };
        let cache = KernelCache::new(mesh, k);
        let (m, b, iterations) = match scheme {
            VolterraScheme::Marching => {
                let (m, b) = march(mesh, dir, &cache);
                (m, b, 1)
            }
            VolterraScheme::Picard { tol, max_iter } => {
                let one = C64::new(1.0, 0.0);
                let mut m = vec![one; mesh.x.len()];
                let mut diff = f64::INFINITY;
                let mut it = 0;
                while diff >= tol {
                    if it == max_iter {
                        return Err(Error::Iteration {
                            iterations: it,
                            residual: diff,
                        });
                    }
                    let (km, _) = apply(mesh, dir, &cache, &m);
                    diff = km
                        .iter()
                        .zip(&m)
                        .map(|(a, old)| (one + a - old).norm())
                        .fold(0.0, f64::max);
                    m = km.into_iter().map(|a| one + a).collect();
                    it += 1;
                }
                let (_, b) = apply(mesh, dir, &cache, &m);
                (m, b, it)
            }
        };
        let (km, _) = apply(mesh, dir, &cache, &m);
        let residual = km
            .iter()
            .zip(&m)
            .map(|(a, mv)| (mv - 1.0 - a).norm())
            .fold(0.0, f64::max);
        Ok(JostColumn {
            direction: dir,
            k,
            iterations,
            residual,
            mesh: Some(mesh.clone()),
            m,
            b,
        })
    }

    /// Single sweep without the confirming residual pass.
    pub fn solve_fast(&self, dir: Direction, k: C64) -> Result<JostColumn> {
        check_k(k)?;
        let Some(mesh) = &self.mesh else {
            return Ok(JostColumn::trivial(dir, k));
        };
        let cache = KernelCache::new(mesh, k);
        let (m, b) = march(mesh, dir, &cache);
        Ok(JostColumn {
            direction: dir,
            k,
            iterations: 1,
            residual: f64::NAN,
            mesh: Some(mesh.clone()),
            m,
            b,
        })
    }

    /// `ṁ = ∂m/∂k` from the differentiated sweep (real `k` only).
    pub fn solve_derivative(&self, dir: Direction, k: f64) -> Result<JostDerivative> {
        if !k.is_finite() || k.abs() <= DERIVATIVE_K_MIN {
            return Err(Error::Domain(format!(
                "k-derivative needs |k| > {DERIVATIVE_K_MIN}, got {k}"
            )));
        }
        let kc = C64::new(k, 0.0);
        let base = self.solve_fast(dir, kc)?;
        let Some(mesh) = &self.mesh else {
            return Ok(JostDerivative { base, md: Vec::new(), bd: Vec::new() });
        };
        let cache = KernelCache::new(mesh, kc);
        let (dd, ddh) = KernelCache::derivative(mesh, kc);
        let (m, b) = (&base.m, &base.b);
        let n = mesh.x.len();
        let zero = C64::new(0.0, 0.0);
        let mut md = vec![zero; n];
        let mut bd = vec![zero; n];
        let tabs = &mesh.tables[dir.idx()];
        let ih2 = C64::new(0.0, 2.0);
        for step in 0..n - 1 {
            let (j, new) = match dir {
                Direction::One => (n - 2 - step, n - 2 - step),
                Direction::Two => (step, step + 1),
            };
            let node = |l: usize| match dir {
                Direction::One => new + l,
                Direction::Two => new - l,
            };
            let c = mesh.class[j];
            let len = tabs.len[j] as usize;
            let wd = weights(&tabs.p[j], len, &cache.d[c]);
            let wdd = weights(&tabs.p[j], len, &dd[c]);
            let prev = node(1);
            let e = cache.big_e[c];
            let ed = ih2 * mesh.widths[c] * e;
            let mut rhs = wdd[0] * m[new]
                + ddh[c] * b[prev]
                + cache.dh[c] * bd[prev]
                + ed * (m[prev] - 1.0)
                + e * md[prev];
            for l in 1..len {
                rhs += wdd[l] * m[node(l)] + wd[l] * md[node(l)];
            }
            md[new] = rhs / (1.0 - wd[0]);
            let mut acc = bd[prev];
            for l in 0..len {
                acc += md[node(l)] * tabs.w1[j][l];
            }
            bd[new] = acc;
        }
        Ok(JostDerivative { base, md, bd })
    }
}

/// Momenta at or below this modulus are rejected by the `k`-derivative.
pub const DERIVATIVE_K_MIN: f64 = 1e-2;

/// `ṁ = ∂m/∂k` alongside the column it differentiates.
#[derive(Debug, Clone)]
pub struct JostDerivative {
    pub base: JostColumn,
    md: Vec<C64>,
    bd: Vec<C64>,
}

impl JostDerivative {
    pub fn value(&self, x: f64) -> C64 {
        let zero = C64::new(0.0, 0.0);
        let col = &self.base;
        match (col.locate(x), col.direction) {
            (Location::Empty, _) => zero,
            (Location::Left(_), Direction::Two) | (Location::Right(_), Direction::One) => zero,
            (Location::Left(d), Direction::One) | (Location::Right(d), Direction::Two) => {
                let i = col.inner_index();
                let z = C64::new(0.0, 2.0) * col.k * d;
                let dk = expm1_over_z(z) * d;
                let dk_dot = C64::new(0.0, 2.0) * d * d * d_expm1_over_z(z);
                dk_dot * col.b[i]
                    + dk * self.bd[i]
                    + C64::new(0.0, 2.0) * d * z.exp() * (col.m[i] - 1.0)
                    + z.exp() * self.md[i]
            }
            (Location::Inside { start, len, w }, _) => {
                (0..len).map(|l| self.md[start + l] * w[l]).sum()
            }
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<C64> {
        grid.points().iter().map(|&x| self.value(x)).collect()
    }
}

fn check_k(k: C64) -> Result<()> {
    if !(k.re.is_finite() && k.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite momentum {k}")));
    }
    if k.im < 0.0 {
        return Err(Error::Domain(format!("Im k must be >= 0, got {k}")));
    }
    Ok(())
}

fn march(mesh: &Mesh, dir: Direction, cache: &KernelCache) -> (Vec<C64>, Vec<C64>) {
    let n = mesh.x.len();
    let one = C64::new(1.0, 0.0);
    let mut m = vec![one; n];
    let mut b = vec![C64::new(0.0, 0.0); n];
    let tabs = &mesh.tables[dir.idx()];
    for step in 0..n - 1 {
        let (j, new) = match dir {
            Direction::One => (n - 2 - step, n - 2 - step),
            Direction::Two => (step, step + 1),
        };
        let node = |l: usize| match dir {
            Direction::One => new + l,
            Direction::Two => new - l,
        };
        let c = mesh.class[j];
        let len = tabs.len[j] as usize;
        let wd = weights(&tabs.p[j], len, &cache.d[c]);
        let prev = node(1);
        let mut rest = cache.dh[c] * b[prev] + cache.big_e[c] * (m[prev] - one);
        for l in 1..len {
            rest += wd[l] * m[node(l)];
        }
        m[new] = (one + rest) / (one - wd[0]);
        let mut acc = b[prev];
        for l in 0..len {
            acc += m[node(l)] * tabs.w1[j][l];
        }
        b[new] = acc;
    }
    (m, b)
}

/// Discrete Volterra operator applied to given samples: returns `(K m, B)`.
fn apply(mesh: &Mesh, dir: Direction, cache: &KernelCache, m: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let n = mesh.x.len();
    let zero = C64::new(0.0, 0.0);
    let mut km = vec![zero; n];
    let mut b = vec![zero; n];
    let tabs = &mesh.tables[dir.idx()];
    for step in 0..n - 1 {
        let (j, new) = match dir {
            Direction::One => (n - 2 - step, n - 2 - step),
            Direction::Two => (step, step + 1),
        };
        let node = |l: usize| match dir {
            Direction::One => new + l,
            Direction::Two => new - l,
        };
        let c = mesh.class[j];
        let len = tabs.len[j] as usize;
        let wd = weights(&tabs.p[j], len, &cache.d[c]);
        let prev = node(1);
        let mut i = cache.dh[c] * b[prev] + cache.big_e[c] * km[prev];
        let mut acc = b[prev];
        for l in 0..len {
            i += wd[l] * m[node(l)];
            acc += m[node(l)] * tabs.w1[j][l];
        }
        km[new] = i;
        b[new] = acc;
    }
    (km, b)
}
