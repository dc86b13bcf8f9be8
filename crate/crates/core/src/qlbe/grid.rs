//! Momentum-space discretization: a symmetric cubic grid for the tracer
//! momentum and a density matrix stored as real diagonal populations plus a
//! tracked set of off-diagonal coherence pairs.

use super::{BrownianParams, QlbeError};
use crate::linalg::C64;
use nalgebra::Vector3;

/// Largest points-per-axis for which all-pairs coherence storage is allowed;
/// beyond this, track a user-selected pair list instead.
pub const DENSE_MAX_AXIS: usize = 13;

/// Cubic momentum grid, symmetric about the origin: `points_per_axis` odd
/// values per axis spanning [−extent, extent]. Momentum-transfer vectors Q
/// are grid-difference vectors, so shifts P → P−Q stay on the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumGrid3 {
    n_axis: usize,
    extent: f64,
    spacing: f64,
}

impl MomentumGrid3 {
    pub fn new(points_per_axis: usize, extent: f64) -> Result<Self, QlbeError> {
        if points_per_axis < 3 || points_per_axis % 2 == 0 {
            return Err(QlbeError::BadAxisCount(points_per_axis));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(QlbeError::NonPositiveExtent(extent));
        }
        let half = ((points_per_axis - 1) / 2) as f64;
        Ok(Self {
            n_axis: points_per_axis,
            extent,
            spacing: extent / half,
        })
    }

    /// Default working grid: 21 points per axis out to five thermal momenta
    /// 5·√(M/β) of the tracer, enough to hold the equilibrium distribution.
    pub fn default_for(tracer: &BrownianParams, beta: f64) -> Result<Self, QlbeError> {
        Self::new(21, 5.0 * tracer.thermal_momentum(beta))
    }

    pub fn points_per_axis(&self) -> usize {
        self.n_axis
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n_axis * self.n_axis * self.n_axis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub(crate) fn half(&self) -> i64 {
        ((self.n_axis - 1) / 2) as i64
    }

    /// Volume ΔP³ of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    /// Flat index of the axis-index triple.
    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n_axis + iy) * self.n_axis + iz
    }

    /// Axis-index triple of a flat index.
    pub fn coords(&self, flat: usize) -> [usize; 3] {
        let n = self.n_axis;
        [flat / (n * n), (flat / n) % n, flat % n]
    }

    /// Signed integer lattice coordinates (in units of the spacing).
    pub fn int_coords(&self, flat: usize) -> [i64; 3] {
        let c = self.coords(flat);
        let h = self.half();
        [c[0] as i64 - h, c[1] as i64 - h, c[2] as i64 - h]
    }

    /// Momentum vector at a flat index.
    pub fn point(&self, flat: usize) -> Vector3<f64> {
        let ic = self.int_coords(flat);
        Vector3::new(
            ic[0] as f64 * self.spacing,
            ic[1] as f64 * self.spacing,
            ic[2] as f64 * self.spacing,
        )
    }

    /// Flat index of signed lattice coordinates, if on the grid.
    pub fn flat_of_ints(&self, ic: [i64; 3]) -> Option<usize> {
        let h = self.half();
        for c in ic {
            if c < -h || c > h {
                return None;
            }
        }
        Some(self.flat(
            (ic[0] + h) as usize,
            (ic[1] + h) as usize,
            (ic[2] + h) as usize,
        ))
    }

    /// Flat index of the grid point nearest the origin-centered vector `p`,
    /// if `p` lies within the grid box.
    pub fn nearest(&self, p: &Vector3<f64>) -> Option<usize> {
        let ic = [
            (p.x / self.spacing).round() as i64,
            (p.y / self.spacing).round() as i64,
            (p.z / self.spacing).round() as i64,
        ];
        self.flat_of_ints(ic)
    }
}

/// Tracer density matrix on a [`MomentumGrid3`]: real diagonal populations
/// ρ(P,P) plus complex coherences on a tracked list of canonical pairs
/// (i < j); the (j, i) entry is implied by Hermiticity. Traces and moments
/// carry the cell-volume measure, so a unit-trace state has
/// Σ_P ρ(P,P)·ΔP³ = 1.
#[derive(Debug, Clone)]
pub struct MomentumDensityMatrix {
    grid: MomentumGrid3,
    diag: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    coh: Vec<C64>,
}

impl MomentumDensityMatrix {
    /// Diagonal state from per-point weights (not normalized).
    pub fn diagonal(grid: MomentumGrid3, weights: Vec<f64>) -> Result<Self, QlbeError> {
        if weights.len() != grid.len() {
            return Err(QlbeError::WeightLength {
                got: weights.len(),
                expected: grid.len(),
            });
        }
        Ok(Self {
            grid,
            diag: weights,
            pairs: Vec::new(),
            coh: Vec::new(),
        })
    }

    /// Unit-trace thermal state ρ(P,P) ∝ exp(−β P²/2M).
    pub fn thermal(grid: MomentumGrid3, tracer: &BrownianParams, beta: f64) -> Self {
        let w: Vec<f64> = (0..grid.len())
            .map(|i| (-beta * grid.point(i).norm_squared() / (2.0 * tracer.mass)).exp())
            .collect();
        let mut state = Self::diagonal(grid, w).expect("matching length");
        state.normalize();
        state
    }

    /// Unit-trace state concentrated on a single grid point.
    pub fn point_state(grid: MomentumGrid3, flat: usize) -> Self {
        let mut w = vec![0.0; grid.len()];
        w[flat] = 1.0 / grid.cell_volume();
        Self::diagonal(grid, w).expect("matching length")
    }

    /// Attach a list of coherence pairs (initialized to zero). Pairs are
    /// canonicalized to i < j and deduplicated; diagonal pairs are rejected.
    pub fn with_pairs(mut self, pairs: &[(usize, usize)]) -> Result<Self, QlbeError> {
        let n = self.grid.len();
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a == b || a >= n || b >= n {
                return Err(QlbeError::InvalidPair(a, b));
            }
            let p = (a.min(b), a.max(b));
            if !canon.contains(&p) {
                canon.push(p);
            }
        }
        self.pairs = canon;
        self.coh = vec![C64::default(); self.pairs.len()];
        Ok(self)
    }

    /// Attach every off-diagonal pair; only allowed on grids up to
    /// [`DENSE_MAX_AXIS`]³ points.
    pub fn dense(grid: MomentumGrid3) -> Result<Self, QlbeError> {
        if grid.points_per_axis() > DENSE_MAX_AXIS {
            return Err(QlbeError::DenseTooLarge {
                max: DENSE_MAX_AXIS,
                got: grid.points_per_axis(),
            });
        }
        let n = grid.len();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        let coh = vec![C64::default(); pairs.len()];
        Ok(Self {
            grid,
            diag: vec![0.0; n],
            pairs,
            coh,
        })
    }

    pub(crate) fn from_parts(
        grid: MomentumGrid3,
        diag: Vec<f64>,
        pairs: Vec<(usize, usize)>,
        coh: Vec<C64>,
    ) -> Self {
        Self {
            grid,
            diag,
            pairs,
            coh,
        }
    }

    pub fn grid(&self) -> &MomentumGrid3 {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn coherences(&self) -> &[C64] {
        &self.coh
    }

    /// ρ(P_i, P_j) for a tracked pair (either order) or a diagonal entry.
    pub fn entry(&self, i: usize, j: usize) -> Option<C64> {
        if i == j {
            return self.diag.get(i).map(|&d| C64::new(d, 0.0));
        }
        let key = (i.min(j), i.max(j));
        let idx = self.pairs.iter().position(|&p| p == key)?;
        let v = self.coh[idx];
        Some(if i < j { v } else { v.conj() })
    }

    /// Set ρ(P_i, P_j); the Hermitian partner entry is implied.
    pub fn set_coherence(&mut self, i: usize, j: usize, value: C64) -> Result<(), QlbeError> {
        if i == j {
            return Err(QlbeError::InvalidPair(i, j));
        }
        let key = (i.min(j), i.max(j));
        let idx = self
            .pairs
            .iter()
            .position(|&p| p == key)
            .ok_or(QlbeError::InvalidPair(i, j))?;
        self.coh[idx] = if i < j { value } else { value.conj() };
        Ok(())
    }

    /// Σ_P ρ(P,P) ΔP³.
    pub fn trace(&self) -> f64 {
        self.diag.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescale to unit trace.
    pub fn normalize(&mut self) {
        let t = self.trace();
        if t != 0.0 {
            self.scale(1.0 / t);
        }
    }

    /// ⟨P²⟩ = Σ_P |P|² ρ(P,P) ΔP³ (divide by the trace for a mean if the
    /// state is not normalized).
    pub fn mean_p_squared(&self) -> f64 {
        let dv = self.grid.cell_volume();
        (0..self.grid.len())
            .map(|i| self.grid.point(i).norm_squared() * self.diag[i] * dv)
            .sum()
    }

    /// ⟨P⟩ = Σ_P P ρ(P,P) ΔP³.
    pub fn mean_momentum(&self) -> Vector3<f64> {
        let dv = self.grid.cell_volume();
        let mut acc = Vector3::zeros();
        for i in 0..self.grid.len() {
            acc += self.grid.point(i) * (self.diag[i] * dv);
        }
        acc
    }

    /// Most negative diagonal entry (0 for a valid state up to tolerance).
    pub fn min_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min).min(0.0)
    }

    /// Largest entry magnitude over diagonal and tracked coherences.
    pub fn sup_norm(&self) -> f64 {
        let d = self.diag.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        self.coh.iter().fold(d, |a, z| a.max(z.norm()))
    }

    /// self += a · other. Both states must share the grid and pair list.
    pub fn scaled_add(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        debug_assert_eq!(self.pairs, other.pairs);
        for (x, y) in self.diag.iter_mut().zip(&other.diag) {
            *x += a * y;
        }
        for (x, y) in self.coh.iter_mut().zip(&other.coh) {
            *x += y * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.diag {
            *x *= a;
        }
        for x in &mut self.coh {
            *x *= a;
        }
    }
}
