//! Precomputed collision kernel on a momentum grid: the diagonal gain matrix
//! M_in(P,P;P−P′), discrete and continuum out-rates, and per-sector coherence
//! couplings, together with the grid generator that applies them.

use super::{
    m_in_variant, m_out_cl, BrownianParams, LVariant, MomentumDensityMatrix, MomentumGrid3,
    QlbeError,
};
use crate::gasenv::GasParams;
use crate::linalg::C64;
use crate::par;
use crate::quad::QuadratureSpec;
use crate::scattering::ScatteringModel;
use nalgebra::Vector3;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Scaled modified Bessel function e^{−x} I₀(x) for x ≥ 0, by the standard
/// rational approximations (absolute accuracy ~2e-7, which is far below the
/// quadrature tolerances it is combined with).
fn i0_scaled(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 3.75 {
        let t = (x / 3.75) * (x / 3.75);
        let i0 = 1.0
            + t * (3.5156229
                + t * (3.0899424
                    + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
        i0 * (-x).exp()
    } else {
        let t = 3.75 / x;
        let s = 0.39894228
            + t * (0.01328592
                + t * (0.00225319
                    + t * (-0.00157565
                        + t * (0.00916281
                            + t * (-0.02057706
                                + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377)))))));
        s / x.sqrt()
    }
}

/// Reduced one-dimensional evaluator for the diagonal in-rate of a
/// rotationally invariant amplitude: the plane integral over K ⊥ Q collapses
/// to a radial quadrature with a Bessel-I₀ angular factor,
///
/// ```text
/// M_in(P,P;Q) = (n m)/(Q m*²) (2πm/β)^{−3/2} e^{−βa²/2m}
///               · 2π ∫₀^∞ du u e^{−β(u²+c²)/2m} I₀(βuc/m) |f|²((m*/m)u; Q)
/// ```
///
/// with a the Maxwell shift along Q and c = (m/M)|P_⊥Q| the in-plane offset
/// of the amplitude arguments.
pub(crate) struct DiagonalEvaluator<'a> {
    model: &'a dyn ScatteringModel,
    us: Vec<f64>,
    ws: Vec<f64>,
    mstar: f64,
    ratio: f64,
    beta_over_m: f64,
    gas_mass: f64,
    prefactor: f64,
}

impl<'a> DiagonalEvaluator<'a> {
    /// `c_max` bounds the in-plane offset c over all evaluation points; the
    /// radial rule is sized to resolve the thermal width out to c_max plus
    /// the Maxwell tail.
    pub(crate) fn new(
        model: &'a dyn ScatteringModel,
        gas: &GasParams,
        tracer: &BrownianParams,
        c_max: f64,
    ) -> Self {
        let sigma = (gas.mass / gas.beta).sqrt();
        let u_max = c_max + sigma * 80.0f64.sqrt();
        let n_u = ((8.0 * u_max / sigma).ceil() as usize).max(96);
        let gl = crate::quad::gauss_legendre(n_u);
        let mut us = Vec::with_capacity(n_u);
        let mut ws = Vec::with_capacity(n_u);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            us.push(0.5 * u_max * (x + 1.0));
            ws.push(0.5 * u_max * w);
        }
        let c_mu = (2.0 * PI * gas.mass / gas.beta).powf(-1.5);
        Self {
            model,
            us,
            ws,
            mstar: tracer.reduced_mass(gas),
            ratio: tracer.mass_ratio(gas),
            beta_over_m: gas.beta / gas.mass,
            gas_mass: gas.mass,
            prefactor: gas.density * gas.mass * c_mu * 2.0 * PI,
        }
    }

    /// |f|² at every radial node for transfer magnitude `qq`: the amplitude
    /// arguments are the on-shell pair with relative momentum (m*/m)u
    /// perpendicular to the transfer.
    pub(crate) fn amplitude_row(&self, qq: f64) -> Result<Vec<f64>, QlbeError> {
        let mut row = Vec::with_capacity(self.us.len());
        for &u in &self.us {
            let r = self.mstar / self.gas_mass * u;
            let p_in = Vector3::new(r, 0.0, 0.5 * qq);
            let p_out = Vector3::new(r, 0.0, -0.5 * qq);
            row.push(self.model.amplitude(0, &p_out, 0, &p_in)?.norm_sqr());
        }
        Ok(row)
    }

    /// M_in(P,P;Q) from the scalar invariants |P|², P·Q and Q = |Q|, with the
    /// amplitude row precomputed for this transfer magnitude.
    pub(crate) fn eval(&self, p_sq: f64, p_dot_q: f64, qq: f64, row: &[f64]) -> f64 {
        let p_par = p_dot_q / qq;
        let c = self.ratio * (p_sq - p_par * p_par).max(0.0).sqrt();
        let a = 0.5 * (1.0 + self.ratio) * qq + self.ratio * (p_par - qq);
        let bm = self.beta_over_m;
        let mut sum = 0.0;
        for i in 0..self.us.len() {
            let u = self.us[i];
            let d = u - c;
            sum += self.ws[i] * u * (-0.5 * bm * d * d).exp() * i0_scaled(bm * u * c) * row[i];
        }
        self.prefactor / (qq * self.mstar * self.mstar) * (-0.5 * bm * a * a).exp() * sum
    }
}

/// Open-addressing map from packed integer invariants to a dense value index;
/// the 86-million-pair fill loop makes a general-purpose hash map the
/// bottleneck, so this uses a fixed multiplicative hash with linear probing.
struct IntKeyMap {
    slots: Vec<u64>, // key + 1; 0 = empty
    vals: Vec<u32>,
    mask: usize,
    len: usize,
}

impl IntKeyMap {
    fn new() -> Self {
        let cap = 1 << 16;
        Self {
            slots: vec![0; cap],
            vals: vec![0; cap],
            mask: cap - 1,
            len: 0,
        }
    }

    #[inline]
    fn slot_of(&self, key: u64) -> usize {
        (key.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32) as usize & self.mask
    }

    fn grow(&mut self) {
        let cap = self.slots.len() * 2;
        let old_slots = std::mem::replace(&mut self.slots, vec![0; cap]);
        let old_vals = std::mem::replace(&mut self.vals, vec![0; cap]);
        self.mask = cap - 1;
        for (s, v) in old_slots.into_iter().zip(old_vals) {
            if s != 0 {
                let mut i = self.slot_of(s - 1);
                while self.slots[i] != 0 {
                    i = (i + 1) & self.mask;
                }
                self.slots[i] = s;
                self.vals[i] = v;
            }
        }
    }

    /// Value index of `key`, inserting the next free index if absent.
    /// Returns (index, was_new).
    #[inline]
    fn get_or_insert(&mut self, key: u64) -> (u32, bool) {
        if self.len * 10 >= self.slots.len() * 7 {
            self.grow();
        }
        let stored = key + 1;
        let mut i = self.slot_of(key);
        loop {
            let s = self.slots[i];
            if s == stored {
                return (self.vals[i], false);
            }
            if s == 0 {
                let v = self.len as u32;
                self.slots[i] = stored;
                self.vals[i] = v;
                self.len += 1;
                return (v, true);
            }
            i = (i + 1) & self.mask;
        }
    }

    #[inline]
    fn get(&self, key: u64) -> u32 {
        let stored = key + 1;
        let mut i = self.slot_of(key);
        loop {
            let s = self.slots[i];
            if s == stored {
                return self.vals[i];
            }
            debug_assert!(s != 0, "key must have been inserted");
            i = (i + 1) & self.mask;
        }
    }
}

#[inline]
fn pack_key(p2: i64, q2: i64, dot_shifted: i64) -> u64 {
    debug_assert!(p2 >= 0 && p2 < (1 << 21));
    debug_assert!(q2 >= 0 && q2 < (1 << 21));
    debug_assert!(dot_shifted >= 0 && dot_shifted < (1 << 21));
    ((p2 as u64) << 42) | ((q2 as u64) << 21) | dot_shifted as u64
}

#[inline]
fn unpack_key(key: u64) -> (i64, i64, i64) {
    (
        (key >> 42) as i64,
        ((key >> 21) & ((1 << 21) - 1)) as i64,
        (key & ((1 << 21) - 1)) as i64,
    )
}

/// Which loss term balances the gain in the grid generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TraceMode {
    /// Grid-consistent loss Σ_Q M_in(P+Q,P+Q;Q) ΔQ³: gain and loss balance
    /// exactly on the grid, so the trace is conserved to rounding.
    Discrete,
    /// Continuum out-rate from the 3D thermal-average formula: physically
    /// exact rates, but grid truncation leaks trace.
    Continuous,
}

/// Options for [`RatePairKernel::apply`].
#[derive(Debug, Clone, Copy)]
pub struct GeneratorOptions {
    pub trace_mode: TraceMode,
    /// Include the free kinetic phase −i(P² − P′²)/2M on coherences.
    pub kinetic: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            trace_mode: TraceMode::Discrete,
            kinetic: false,
        }
    }
}

/// Collision kernel cached on a [`MomentumGrid3`]: the diagonal gain matrix,
/// both out-rate conventions, and complex in-rates coupling the tracked
/// coherence pairs within their momentum-separation sectors.
///
/// The zero-transfer entry Q = 0 is excluded throughout: the 1/√Q prefactor
/// of the L function makes it singular, it carries zero measure in ∫d³Q, and
/// zero momentum transfer is no collision (forward scattering is bookkept in
/// the total cross section of the out-rate).
pub struct RatePairKernel {
    grid: MomentumGrid3,
    tracer: BrownianParams,
    gain: Vec<f32>,
    out_discrete: Vec<f64>,
    out_continuous: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    pair_gain: Vec<Vec<(u32, C64)>>,
}

impl RatePairKernel {
    /// Precompute the kernel for `model` on `grid`, tracking the given
    /// coherence pairs (canonical i < j).
    ///
    /// The diagonal gain uses the reduced one-dimensional evaluator for
    /// rotationally invariant amplitudes (deduplicated over the O(3)
    /// invariants |P|², |Q|², P·Q) and falls back to plane quadrature
    /// otherwise; the fallback is only practical on small grids. The
    /// diagonal in-rate is identical for both L-function variants, so
    /// `variant` affects only the coherence couplings.
    pub fn build(
        model: &dyn ScatteringModel,
        grid: MomentumGrid3,
        gas: &GasParams,
        tracer: &BrownianParams,
        spec: &QuadratureSpec,
        pairs: &[(usize, usize)],
        variant: LVariant,
    ) -> Result<Self, QlbeError> {
        let n3 = grid.len();
        let ic: Vec<[i64; 3]> = (0..n3).map(|i| grid.int_coords(i)).collect();
        for &(i, j) in pairs {
            if i >= j || j >= n3 {
                return Err(QlbeError::InvalidPair(i, j));
            }
        }

        let (gain, out_discrete) = if model.is_rotationally_invariant() {
            build_diag_fast(model, &grid, gas, tracer, &ic)?
        } else {
            build_diag_plane(model, &grid, gas, tracer, spec, &ic)?
        };

        let out_continuous = build_out_continuous(model, &grid, gas, tracer, spec, &ic)?;
        let pair_gain = build_pair_gain(model, &grid, gas, tracer, spec, pairs, variant, &ic)?;

        Ok(Self {
            grid,
            tracer: *tracer,
            gain,
            out_discrete,
            out_continuous,
            pairs: pairs.to_vec(),
            pair_gain,
        })
    }

    pub fn grid(&self) -> &MomentumGrid3 {
        &self.grid
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Diagonal gain M_in(P_i,P_i;P_i−P_j) (rate per momentum³); zero on i = j.
    pub fn diagonal_gain(&self, i: usize, j: usize) -> f64 {
        self.gain[i * self.grid.len() + j] as f64
    }

    /// Grid-consistent loss rates Σ_Q M_in(P+Q,P+Q;Q) ΔQ³.
    pub fn out_discrete(&self) -> &[f64] {
        &self.out_discrete
    }

    /// Continuum out-rates from the 3D thermal-average formula.
    pub fn out_continuous(&self) -> &[f64] {
        &self.out_continuous
    }

    /// Largest loss rate on the grid; the natural scale for step-size checks
    /// and residual normalizations.
    pub fn rate_scale(&self) -> f64 {
        self.out_discrete.iter().fold(0.0f64, |a, &x| a.max(x))
    }

    /// Apply the master-equation generator to `rho`:
    ///
    /// ```text
    /// ∂_t ρ(P,P′) = Σ_Q M_in(P,P′;Q) ρ(P−Q,P′−Q) ΔQ³
    ///               − ½ [M_out(P) + M_out(P′)] ρ(P,P′)
    ///               [ − i (P² − P′²)/2M · ρ(P,P′) ]
    /// ```
    ///
    /// The Q-shift preserves the momentum separation P − P′, so populations
    /// evolve among themselves and each coherence sector couples only to
    /// itself; gain into a tracked pair comes from tracked pairs of the same
    /// separation.
    pub fn apply(
        &self,
        rho: &MomentumDensityMatrix,
        opts: &GeneratorOptions,
    ) -> Result<MomentumDensityMatrix, QlbeError> {
        if rho.grid() != &self.grid || rho.pairs() != self.pairs.as_slice() {
            return Err(QlbeError::GridMismatch);
        }
        let n3 = self.grid.len();
        let dq3 = self.grid.cell_volume();
        let out = match opts.trace_mode {
            TraceMode::Discrete => &self.out_discrete,
            TraceMode::Continuous => &self.out_continuous,
        };
        let diag_in = rho.diag();
        let diag = par::map_range(n3, |i| {
            let row = &self.gain[i * n3..(i + 1) * n3];
            let mut acc = 0.0f64;
            for (g, d) in row.iter().zip(diag_in) {
                acc += *g as f64 * d;
            }
            acc * dq3 - out[i] * diag_in[i]
        });
        let coh_in = rho.coherences();
        let coh = par::map_range(self.pairs.len(), |d| {
            let (i, j) = self.pairs[d];
            let mut gain = C64::default();
            for &(src, m) in &self.pair_gain[d] {
                gain += m * coh_in[src as usize];
            }
            let mut v = gain * dq3 - coh_in[d] * (0.5 * (out[i] + out[j]));
            if opts.kinetic {
                let de = (self.grid.point(i).norm_squared() - self.grid.point(j).norm_squared())
                    / (2.0 * self.tracer.mass);
                v += coh_in[d] * C64::new(0.0, -de);
            }
            v
        });
        Ok(MomentumDensityMatrix::from_parts(
            self.grid,
            diag,
            self.pairs.clone(),
            coh,
        ))
    }
}

/// Diagonal gain matrix and discrete out-rates via the reduced evaluator,
/// deduplicated over the O(3) invariants (|P|², |Q|², P·Q) of the lattice.
fn build_diag_fast(
    model: &dyn ScatteringModel,
    grid: &MomentumGrid3,
    gas: &GasParams,
    tracer: &BrownianParams,
    ic: &[[i64; 3]],
) -> Result<(Vec<f32>, Vec<f64>), QlbeError> {
    let n3 = grid.len();
    let h = grid.half();
    assert!(h <= 400, "lattice invariants must fit the packed key layout");
    let sp = grid.spacing();
    let sp2 = sp * sp;
    let dot_offset = 6 * h * h;
    let c_max = tracer.mass_ratio(gas) * grid.extent() * 3.0f64.sqrt();
    let ev = DiagonalEvaluator::new(model, gas, tracer, c_max);

    // Amplitude rows per achievable squared transfer magnitude.
    let max_q2 = (12 * h * h) as usize;
    let mut occupied = vec![false; max_q2 + 1];
    for a in 0..=(2 * h) {
        for b in 0..=(2 * h) {
            for c in 0..=(2 * h) {
                occupied[(a * a + b * b + c * c) as usize] = true;
            }
        }
    }
    let row_results = par::map_range(max_q2 + 1, |q2| {
        if q2 == 0 || !occupied[q2] {
            return Ok(Vec::new());
        }
        ev.amplitude_row((q2 as f64).sqrt() * sp)
    });
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max_q2 + 1);
    for r in row_results {
        rows.push(r?);
    }

    // Pass 1: collect unique invariant keys.
    let mut map = IntKeyMap::new();
    let mut keys: Vec<u64> = Vec::new();
    for i in 0..n3 {
        let pi = ic[i];
        let p2 = pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2];
        for j in 0..n3 {
            if i == j {
                continue;
            }
            let pj = ic[j];
            let q = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
            let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
            let dot = pi[0] * q[0] + pi[1] * q[1] + pi[2] * q[2];
            let key = pack_key(p2, q2, dot + dot_offset);
            let (_, new) = map.get_or_insert(key);
            if new {
                keys.push(key);
            }
        }
    }

    // Pass 2: evaluate each unique invariant once.
    let uvals: Vec<f32> = par::map_range(keys.len(), |u| {
        let (p2, q2, dots) = unpack_key(keys[u]);
        let dot = dots - dot_offset;
        let row = &rows[q2 as usize];
        ev.eval(
            p2 as f64 * sp2,
            dot as f64 * sp2,
            (q2 as f64).sqrt() * sp,
            row,
        ) as f32
    });

    // Pass 3: fill the dense gain matrix and accumulate column sums.
    let mut gain = vec![0.0f32; n3 * n3];
    let mut col = vec![0.0f64; n3];
    for i in 0..n3 {
        let pi = ic[i];
        let p2 = pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2];
        let row_out = &mut gain[i * n3..(i + 1) * n3];
        for j in 0..n3 {
            if i == j {
                continue;
            }
            let pj = ic[j];
            let q = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
            let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
            let dot = pi[0] * q[0] + pi[1] * q[1] + pi[2] * q[2];
            let v = uvals[map.get(pack_key(p2, q2, dot + dot_offset)) as usize];
            row_out[j] = v;
            col[j] += v as f64;
        }
    }
    let dq3 = grid.cell_volume();
    let out_discrete = col.into_iter().map(|s| s * dq3).collect();
    Ok((gain, out_discrete))
}

/// Plane-quadrature fallback for amplitudes without rotational invariance;
/// every pair costs a 2D quadrature, so this is for small grids only.
fn build_diag_plane(
    model: &dyn ScatteringModel,
    grid: &MomentumGrid3,
    gas: &GasParams,
    tracer: &BrownianParams,
    spec: &QuadratureSpec,
    ic: &[[i64; 3]],
) -> Result<(Vec<f32>, Vec<f64>), QlbeError> {
    let n3 = grid.len();
    let sp = grid.spacing();
    let results = par::map_range(n3 * n3, |idx| -> Result<f32, QlbeError> {
        let (i, j) = (idx / n3, idx % n3);
        if i == j {
            return Ok(0.0);
        }
        let p = grid.point(i);
        let q = Vector3::new(
            (ic[i][0] - ic[j][0]) as f64 * sp,
            (ic[i][1] - ic[j][1]) as f64 * sp,
            (ic[i][2] - ic[j][2]) as f64 * sp,
        );
        Ok(super::m_in(model, &p, &p, &q, gas, tracer, spec)?.re as f32)
    });
    let mut gain = Vec::with_capacity(n3 * n3);
    for r in results {
        gain.push(r?);
    }
    let mut col = vec![0.0f64; n3];
    for i in 0..n3 {
        for j in 0..n3 {
            col[j] += gain[i * n3 + j] as f64;
        }
    }
    let dq3 = grid.cell_volume();
    let out_discrete = col.into_iter().map(|s| s * dq3).collect();
    Ok((gain, out_discrete))
}

fn build_out_continuous(
    model: &dyn ScatteringModel,
    grid: &MomentumGrid3,
    gas: &GasParams,
    tracer: &BrownianParams,
    spec: &QuadratureSpec,
    ic: &[[i64; 3]],
) -> Result<Vec<f64>, QlbeError> {
    let n3 = grid.len();
    if model.is_rotationally_invariant() {
        // The rate depends on |P| only; compute one value per shell.
        let mut by_p2: HashMap<i64, f64> = HashMap::new();
        let mut shells: Vec<i64> = Vec::new();
        for c in ic {
            let p2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
            if !by_p2.contains_key(&p2) {
                by_p2.insert(p2, 0.0);
                shells.push(p2);
            }
        }
        let sp = grid.spacing();
        let vals = par::map_range(shells.len(), |s| {
            let p = Vector3::new(0.0, 0.0, (shells[s] as f64).sqrt() * sp);
            m_out_cl(model, &p, gas, tracer, spec)
        });
        for (p2, v) in shells.iter().zip(vals) {
            by_p2.insert(*p2, v?);
        }
        Ok(ic
            .iter()
            .map(|c| by_p2[&(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])])
            .collect())
    } else {
        let vals = par::map_range(n3, |i| m_out_cl(model, &grid.point(i), gas, tracer, spec));
        vals.into_iter().collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn build_pair_gain(
    model: &dyn ScatteringModel,
    grid: &MomentumGrid3,
    gas: &GasParams,
    tracer: &BrownianParams,
    spec: &QuadratureSpec,
    pairs: &[(usize, usize)],
    variant: LVariant,
    ic: &[[i64; 3]],
) -> Result<Vec<Vec<(u32, C64)>>, QlbeError> {
    // Group tracked pairs by their momentum-separation sector.
    let mut sectors: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        let s = [
            ic[i][0] - ic[j][0],
            ic[i][1] - ic[j][1],
            ic[i][2] - ic[j][2],
        ];
        sectors.entry(s).or_default().push(idx as u32);
    }
    let sp = grid.spacing();
    let mut tasks: Vec<(u32, u32, Vector3<f64>)> = Vec::new();
    for group in sectors.values() {
        for &d in group {
            for &s in group {
                if d == s {
                    continue; // Q = 0 excluded
                }
                let (di, _) = pairs[d as usize];
                let (si, _) = pairs[s as usize];
                let q = Vector3::new(
                    (ic[di][0] - ic[si][0]) as f64 * sp,
                    (ic[di][1] - ic[si][1]) as f64 * sp,
                    (ic[di][2] - ic[si][2]) as f64 * sp,
                );
                tasks.push((d, s, q));
            }
        }
    }
    let vals = par::map_range(tasks.len(), |t| {
        let (d, _, q) = tasks[t];
        let (i, j) = pairs[d as usize];
        m_in_variant(
            model,
            variant,
            &grid.point(i),
            &grid.point(j),
            &q,
            gas,
            tracer,
            spec,
        )
    });
    let mut pair_gain: Vec<Vec<(u32, C64)>> = vec![Vec::new(); pairs.len()];
    for ((d, s, _), v) in tasks.into_iter().zip(vals) {
        pair_gain[d as usize].push((s, v?));
    }
    Ok(pair_gain)
}

#[cfg(test)]
mod tests {
    use super::i0_scaled;

    #[test]
    fn bessel_i0_scaled_reference_values() {
        // e^{-x} I0(x) at x = 0, 1, 3.75, 10, 50 (series / asymptotic oracle)
        let series = |x: f64| {
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..200 {
                term *= (x / (2.0 * k as f64)) * (x / (2.0 * k as f64));
                sum += term;
            }
            sum * (-x).exp()
        };
        for &x in &[0.0, 0.5, 1.0, 3.0, 3.75, 5.0, 10.0, 50.0, 400.0] {
            let exact = if x <= 60.0 {
                series(x)
            } else {
                // leading asymptotics with first corrections
                (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x))
                    / (2.0 * std::f64::consts::PI * x).sqrt()
            };
            let got = i0_scaled(x);
            assert!(
                (got - exact).abs() <= 3e-7 * exact.max(1.0),
                "x={x}: got {got}, expected {exact}"
            );
        }
    }
}
