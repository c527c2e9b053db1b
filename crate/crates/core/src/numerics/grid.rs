use crate::error::{Error, Result};

/// Uniform sampling of `[x_min, x_max]` with `n` points, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    weights: Vec<f64>,
}

impl SpatialGrid {
    /// Symmetric grid `[-x_max, x_max]`.
    pub fn symmetric(x_max: f64, n: usize) -> Result<Self> {
        Self::new(-x_max, x_max, n)
    }

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Validation(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::Validation(format!(
                "invalid grid extent [{x_min}, {x_max}]"
            )));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n,
            dx,
            weights: simpson_weights(n, dx),
        })
    }

    /// The `[-40, 40]`, 2048-point box.
    pub fn default_box() -> Self {
        Self::symmetric(40.0, 2048).expect("default grid is valid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Composite Simpson weights (3/8 rule on the last three panels, since
    /// `n - 1` is odd).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.x_max.abs().max(1.0)
    }

    /// Same extent with `2n` samples.
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * self.n).expect("refinement of a valid grid")
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min - 1e-12 * self.dx && x <= self.x_max + 1e-12 * self.dx
    }
}

fn simpson_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    // Simpson 1/3 on nodes 0..=n-4 (an even number of panels), 3/8 on the rest.
    let m = n - 4;
    for (j, wj) in w.iter_mut().enumerate().take(m + 1) {
        *wj = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        } * dx
            / 3.0;
    }
    let c = 3.0 * dx / 8.0;
    w[m] += c;
    w[m + 1] += 3.0 * c;
    w[m + 2] += 3.0 * c;
    w[m + 3] += c;
    w
}

/// Symmetric set of momenta `±(start + j·dk)`, sorted ascending.
///
/// Integrals over `k` use the uniform weight `dk` per node, which is the
/// midpoint rule on each half-line when `start = dk/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    values: Vec<f64>,
    dk: f64,
    puncture: f64,
}

impl MomentumGrid {
    /// Momentum grid dual to a spatial grid: `k_m = (m + 1/2)·2π/(n·dx)` for
    /// `m = -n/2 .. n/2-1`. Symmetric and never contains `k = 0`.
    pub fn dual(grid: &SpatialGrid) -> Self {
        let n = grid.len();
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * grid.dx());
        Self::half_shifted(dk, n / 2)
    }

    /// Dual grid restricted to `|k| <= k_max`.
    pub fn dual_truncated(grid: &SpatialGrid, k_max: f64) -> Self {
        let full = Self::dual(grid);
        let count = full.positive().filter(|&k| k <= k_max).count();
        Self::half_shifted(full.dk, count.max(1))
    }

    /// `±(j + 1/2)·dk`, `j = 0..count`.
    pub fn half_shifted(dk: f64, count: usize) -> Self {
        let positive: Vec<f64> = (0..count).map(|j| (j as f64 + 0.5) * dk).collect();
        Self::mirror(&positive, dk, 0.0)
    }

    /// Uniform positive momenta from `k_lo` to `k_hi` (inclusive), mirrored.
    /// `k_lo > 0` is recorded as the puncture radius.
    pub fn from_range(k_lo: f64, k_hi: f64, count: usize) -> Result<Self> {
        if !(k_lo > 0.0 && k_hi > k_lo) || count < 2 {
            return Err(Error::Validation(format!(
                "invalid momentum range [{k_lo}, {k_hi}] with {count} points"
            )));
        }
        let dk = (k_hi - k_lo) / (count - 1) as f64;
        let positive: Vec<f64> = (0..count).map(|j| k_lo + j as f64 * dk).collect();
        Ok(Self::mirror(&positive, dk, k_lo))
    }

    /// Mirrors an explicit list of positive momenta (need not be uniform).
    pub fn from_positive(ks: &[f64]) -> Result<Self> {
        let mut pos: Vec<f64> = ks.to_vec();
        pos.sort_by(|a, b| a.partial_cmp(b).expect("finite momenta"));
        if pos.is_empty() || pos[0] <= 0.0 || pos.iter().any(|k| !k.is_finite()) {
            return Err(Error::Validation("momenta must be finite and > 0".into()));
        }
        pos.dedup();
        let dk = if pos.len() > 1 { pos[1] - pos[0] } else { 0.0 };
        let puncture = pos[0];
        Ok(Self::mirror(&pos, dk, puncture))
    }

    fn mirror(positive: &[f64], dk: f64, puncture: f64) -> Self {
        let mut values: Vec<f64> = positive.iter().rev().map(|k| -k).collect();
        values.extend_from_slice(positive);
        Self {
            values,
            dk,
            puncture,
        }
    }

    /// Masks `|k| < k_min`, keeping the grid symmetric.
    pub fn punctured(&self, k_min: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .copied()
                .filter(|k| k.abs() >= k_min)
                .collect(),
            dk: self.dk,
            puncture: self.puncture.max(k_min),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn puncture(&self) -> f64 {
        self.puncture
    }

    pub fn k_max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Strictly positive momenta in ascending order.
    pub fn positive(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|&k| k > 0.0)
    }

    /// Index of the node `-k` for node `m`.
    pub fn mirror_index(&self, m: usize) -> usize {
        self.values.len() - 1 - m
    }

    /// Index of the node nearest to `k`.
    pub fn nearest(&self, k: f64) -> usize {
        let mut best = 0;
        for (m, &v) in self.values.iter().enumerate() {
            if (v - k).abs() < (self.values[best] - k).abs() {
                best = m;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpatialGrid::symmetric(10.0, 8).is_err());
        assert!(SpatialGrid::symmetric(10.0, 100).is_err());
        assert!(SpatialGrid::new(1.0, -1.0, 64).is_err());
    }

    #[test]
    fn weights_sum_to_length() {
        let g = SpatialGrid::symmetric(7.0, 64).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 14.0).abs() < 1e-12);
        assert!((g.dx() - 14.0 / 63.0).abs() < 1e-15);
    }

    #[test]
    fn dual_grid_is_symmetric_and_punctured() {
        let g = SpatialGrid::symmetric(10.0, 64).unwrap();
        let k = MomentumGrid::dual(&g);
        assert_eq!(k.len(), 64);
        for m in 0..k.len() {
            assert_eq!(k.values()[m], -k.values()[k.mirror_index(m)]);
        }
        assert!(k.values().iter().all(|&v| v != 0.0));
        let p = k.punctured(1.0);
        assert!(p.values().iter().all(|v| v.abs() >= 1.0));
        assert_eq!(p.len() % 2, 0);
    }

    #[test]
    fn range_grid() {
        let k = MomentumGrid::from_range(0.05, 8.0, 64).unwrap();
        assert_eq!(k.len(), 128);
        assert!((k.k_max() - 8.0).abs() < 1e-12);
        assert_eq!(k.puncture(), 0.05);
    }
}
