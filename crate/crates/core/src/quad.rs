//! Numerical integration engine: Gaussian-weighted 3D momentum integrals,
//! on-shell angular integrals, 2D plane integrals with a Gaussian envelope,
//! and a Monte Carlo fallback oracle.
//!
//! The radial Maxwell integral uses Gauss-Legendre mapped to [0, p_max]
//! with the weight p² exp(-βp²/2m) kept in the integrand — geometric
//! convergence for anything smooth in p, including odd powers where a
//! Laguerre rule in t = βp²/2m stalls at O(n⁻²). Angles use product
//! Gauss-Legendre(cosθ) × uniform(φ); plane integrals use Gauss-Hermite
//! matched to the declared envelope width. Convergence is declared only on
//! agreement of successive refinements (node counts doubled).

use crate::gasenv::GasParams;
use crate::linalg::C64;
use crate::par;
use nalgebra::{DMatrix, Vector3};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: last estimates differ by {rel:e} (target {target:e})")]
    NoConvergence { rel: f64, target: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

/// Node counts and refinement policy for all quadrature routines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub radial_nodes: usize,
    pub angular_order: usize,
    pub plane_nodes_per_axis: usize,
    pub rel_tol: f64,
    pub max_refinements: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            radial_nodes: 48,
            angular_order: 32,
            plane_nodes_per_axis: 40,
            rel_tol: 1e-8,
            max_refinements: 4,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(QuadError::InvalidSpec(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.radial_nodes < 4 || self.angular_order < 4 || self.plane_nodes_per_axis < 4 {
            return Err(QuadError::InvalidSpec("node counts must be >= 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RuleKind {
    Legendre,
    LaguerreHalf,
    /// Hermite nodes with weights multiplied by exp(u²), for integrands that
    /// carry their own Gaussian envelope.
    HermiteModified,
}

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
/// mu0 times the squared first eigenvector components.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> GaussRule {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
    }
    for i in 0..n - 1 {
        j[(i, i + 1)] = offdiag[i];
        j[(i + 1, i)] = offdiag[i];
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

fn build_rule(kind: RuleKind, n: usize) -> GaussRule {
    match kind {
        RuleKind::Legendre => {
            let diag = vec![0.0; n];
            let offdiag: Vec<f64> = (1..n)
                .map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt())
                .collect();
            golub_welsch(&diag, &offdiag, 2.0)
        }
        RuleKind::LaguerreHalf => {
            let alpha = 0.5;
            let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
            let offdiag: Vec<f64> = (1..n)
                .map(|k| (k as f64 * (k as f64 + alpha)).sqrt())
                .collect();
            // mu0 = Gamma(3/2)
            golub_welsch(&diag, &offdiag, 0.5 * PI.sqrt())
        }
        RuleKind::HermiteModified => {
            let diag = vec![0.0; n];
            let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
            let mut rule = golub_welsch(&diag, &offdiag, PI.sqrt());
            // w~ = w * exp(u^2), evaluated through logs to dodge overflow
            for i in 0..n {
                let u = rule.nodes[i];
                let lw = rule.weights[i].ln() + u * u;
                rule.weights[i] = lw.exp();
            }
            rule
        }
    }
}

fn cached_rule(kind: RuleKind, n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<(RuleKind, usize), Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&(kind, n)) {
        return r.clone();
    }
    let rule = Arc::new(build_rule(kind, n));
    cache.lock().unwrap().insert((kind, n), rule.clone());
    rule
}

pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    cached_rule(RuleKind::Legendre, n)
}

/// Generalized Gauss-Laguerre with weight t^(1/2) e^(-t).
pub fn gauss_laguerre_half(n: usize) -> Arc<GaussRule> {
    cached_rule(RuleKind::LaguerreHalf, n)
}

/// Gauss-Hermite nodes with envelope-stripped weights w·exp(u²).
pub fn gauss_hermite_modified(n: usize) -> Arc<GaussRule> {
    cached_rule(RuleKind::HermiteModified, n)
}

/// Successive estimates closer than this in absolute value count as
/// converged regardless of scale; a result this small is indistinguishable
/// from zero in double precision for O(1)-normalized integrands.
const ABS_FLOOR: f64 = 1e-14;

/// Run `eval` at successive refinement levels (node counts doubled per
/// level) until two estimates agree to `spec.rel_tol`.
pub fn converge(
    spec: &QuadratureSpec,
    eval: impl Fn(u32) -> C64,
) -> Result<C64, QuadError> {
    spec.validate()?;
    let mut prev = eval(0);
    if spec.max_refinements == 0 {
        return Ok(prev);
    }
    let mut last_rel = f64::INFINITY;
    for level in 1..=spec.max_refinements {
        let cur = eval(level);
        let scale = cur.norm().max(prev.norm());
        let diff = (cur - prev).norm();
        if diff <= spec.rel_tol * scale || diff <= ABS_FLOOR {
            return Ok(cur);
        }
        last_rel = diff / scale.max(f64::MIN_POSITIVE);
        prev = cur;
    }
    Err(QuadError::NoConvergence {
        rel: last_rel,
        target: spec.rel_tol,
    })
}

/// Radial cutoff in t = βp²/2m: the discarded tail weight e^(-40) ≈ 4e-18
/// is below double precision for polynomially bounded integrands.
const RADIAL_T_MAX: f64 = 40.0;

/// Gauss-Legendre nodes mapped to momenta [0, p_max] with weights carrying
/// the Jacobian and the Maxwell factor p² exp(-βp²/2m). Combined with
/// [`maxwell_norm`] these evaluate ∫d³p μ(p) g(p) for isotropic g as
/// norm · Σ w_i g(p_i).
/// Upper momentum cutoff used by [`radial_maxwell_rule`].
pub fn radial_cutoff(gas: &GasParams) -> f64 {
    (2.0 * gas.mass * RADIAL_T_MAX / gas.beta).sqrt()
}

pub fn radial_maxwell_rule(gas: &GasParams, n: usize) -> (Vec<f64>, Vec<f64>) {
    let p_max = radial_cutoff(gas);
    let gl = gauss_legendre(n);
    let mut ps = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
        let p = 0.5 * p_max * (x + 1.0);
        ps.push(p);
        ws.push(w * 0.5 * p_max * p * p * (-gas.beta * p * p / (2.0 * gas.mass)).exp());
    }
    (ps, ws)
}

/// Prefactor 4π (2πm/β)^(-3/2) turning a [`radial_maxwell_rule`] sum into
/// the isotropic Maxwell average ∫d³p μ(p) g(|p|).
pub fn maxwell_norm(gas: &GasParams) -> f64 {
    4.0 * PI * (2.0 * PI * gas.mass / gas.beta).powf(-1.5)
}

/// Unit vectors and weights of the product sphere rule of the given order;
/// weights sum to 4π.
pub fn sphere_points(order: usize) -> Vec<(Vector3<f64>, f64)> {
    let (gl, n_phi, w_phi) = sphere_nodes(order);
    let mut pts = Vec::with_capacity(order * n_phi);
    for j in 0..order {
        let ct = gl.nodes[j];
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = w_phi * k as f64;
            pts.push((
                Vector3::new(st * phi.cos(), st * phi.sin(), ct),
                gl.weights[j] * w_phi,
            ));
        }
    }
    pts
}

fn sphere_nodes(order: usize) -> (Arc<GaussRule>, usize, f64) {
    let gl = gauss_legendre(order);
    let n_phi = 2 * order;
    let w_phi = 2.0 * PI / n_phi as f64;
    (gl, n_phi, w_phi)
}

/// ∫ dΩ f(n̂) over the unit sphere.
pub fn integrate_sphere(
    f: impl Fn(&Vector3<f64>) -> C64 + Sync,
    spec: &QuadratureSpec,
) -> Result<C64, QuadError> {
    converge(spec, |level| {
        let order = spec.angular_order << level;
        let (gl, n_phi, w_phi) = sphere_nodes(order);
        let vals = par::map_range(order, |j| {
            let ct = gl.nodes[j];
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let mut acc = C64::default();
            for k in 0..n_phi {
                let phi = w_phi * k as f64;
                let n_hat = Vector3::new(st * phi.cos(), st * phi.sin(), ct);
                acc += f(&n_hat);
            }
            acc * gl.weights[j] * w_phi
        });
        vals.into_iter().sum()
    })
}

/// ∫ d³p μ(p) f(p) against the Maxwell weight of `gas`.
pub fn integrate_maxwell_3d(
    f: impl Fn(&Vector3<f64>) -> C64 + Sync,
    gas: &GasParams,
    spec: &QuadratureSpec,
) -> Result<C64, QuadError> {
    let norm = (2.0 * PI * gas.mass / gas.beta).powf(-1.5);
    converge(spec, |level| {
        let n_rad = spec.radial_nodes << level;
        let order = spec.angular_order << level;
        let (ps, ws) = radial_maxwell_rule(gas, n_rad);
        let (gl, n_phi, w_phi) = sphere_nodes(order);
        let vals = par::map_range(n_rad, |i| {
            let p = ps[i];
            let mut radial = C64::default();
            for j in 0..order {
                let ct = gl.nodes[j];
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                let mut acc = C64::default();
                for k in 0..n_phi {
                    let phi = w_phi * k as f64;
                    acc += f(&Vector3::new(p * st * phi.cos(), p * st * phi.sin(), p * ct));
                }
                radial += acc * gl.weights[j] * w_phi;
            }
            radial * ws[i]
        });
        vals.into_iter().sum::<C64>() * norm
    })
}

/// ∫ d³p μ(p) g(|p|) for isotropic integrands: the angular integral is done
/// analytically and only the radial Laguerre rule is applied.
pub fn integrate_maxwell_radial(
    g: impl Fn(f64) -> C64 + Sync,
    gas: &GasParams,
    spec: &QuadratureSpec,
) -> Result<C64, QuadError> {
    let norm = 4.0 * PI * (2.0 * PI * gas.mass / gas.beta).powf(-1.5);
    converge(spec, |level| {
        let n_rad = spec.radial_nodes << level;
        let (ps, ws) = radial_maxwell_rule(gas, n_rad);
        let vals = par::map_range(n_rad, |i| g(ps[i]) * ws[i]);
        vals.into_iter().sum::<C64>() * norm
    })
}

/// ∫∫ dx dy f(x, y) over the plane, for integrands decaying at least as fast
/// as a centered Gaussian of standard deviation `width` per axis.
pub fn integrate_plane(
    f: impl Fn(f64, f64) -> C64 + Sync,
    width: f64,
    spec: &QuadratureSpec,
) -> Result<C64, QuadError> {
    integrate_plane_offset(f, width, [0.0, 0.0], spec)
}

/// Same as [`integrate_plane`] with the Gaussian envelope centered at `center`.
pub fn integrate_plane_offset(
    f: impl Fn(f64, f64) -> C64 + Sync,
    width: f64,
    center: [f64; 2],
    spec: &QuadratureSpec,
) -> Result<C64, QuadError> {
    let s = width * 2.0_f64.sqrt();
    converge(spec, |level| {
        let n = spec.plane_nodes_per_axis << level;
        let rule = gauss_hermite_modified(n);
        let vals = par::map_range(n, |i| {
            let x = s * rule.nodes[i] + center[0];
            let mut acc = C64::default();
            for j in 0..n {
                let y = s * rule.nodes[j] + center[1];
                acc += f(x, y) * rule.weights[j];
            }
            acc * rule.weights[i]
        });
        vals.into_iter().sum::<C64>() * (s * s)
    })
}

/// Monte Carlo estimate with standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: C64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Unbiased sample mean of `f` over draws from `sample`, with the standard
/// error of the (complex) mean. Deterministic for a fixed seed; samples are
/// drawn from per-chunk counter streams so the result does not depend on the
/// number of worker threads.
pub fn mc_integrate<T: Send>(
    f: impl Fn(&T) -> C64 + Sync,
    sample: impl Fn(&mut ChaCha8Rng) -> T + Sync,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    const CHUNK: usize = 4096;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partials = par::map_range(n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(n_samples);
        let mut s = C64::default();
        let mut s2 = 0.0f64;
        for _ in lo..hi {
            let x = sample(&mut rng);
            let v = f(&x);
            s += v;
            s2 += v.norm_sqr();
        }
        (s, s2, hi - lo)
    });
    let mut sum = C64::default();
    let mut sum2 = 0.0;
    for (s, s2, _) in &partials {
        sum += s;
        sum2 += s2;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean.norm_sqr()).max(0.0);
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn gas() -> GasParams {
        GasParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rule_moments() {
        // Legendre: integrate x^8 over [-1,1] exactly with 5 nodes
        let gl = gauss_legendre(5);
        let v: f64 = gl
            .nodes
            .iter()
            .zip(&gl.weights)
            .map(|(x, w)| w * x.powi(8))
            .sum();
        assert_relative_eq!(v, 2.0 / 9.0, max_relative = 1e-13);
        // Laguerre-half: ∫ t^(1/2) e^-t dt = √π/2, ∫ t^(3/2) e^-t = 3√π/4
        let lag = gauss_laguerre_half(12);
        let m0: f64 = lag.weights.iter().sum();
        let m1: f64 = lag.nodes.iter().zip(&lag.weights).map(|(t, w)| w * t).sum();
        assert_relative_eq!(m0, 0.5 * PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(m1, 0.75 * PI.sqrt(), max_relative = 1e-12);
        // Modified Hermite integrates a unit Gaussian envelope directly
        let h = gauss_hermite_modified(24);
        let g: f64 = h
            .nodes
            .iter()
            .zip(&h.weights)
            .map(|(u, w)| w * (-u * u).exp())
            .sum();
        assert_relative_eq!(g, PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn sphere_examples() {
        let spec = QuadratureSpec::default();
        let one = integrate_sphere(|_| re(1.0), &spec).unwrap();
        assert_relative_eq!(one.re, 4.0 * PI, max_relative = 1e-13);
        let odd = integrate_sphere(|n| re(n.z), &spec).unwrap();
        assert!(odd.norm() < 1e-13);
        // P2(nz)^2 integrates to 4π/5
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let v = integrate_sphere(|n| re(p2(n.z).powi(2)), &spec).unwrap();
        assert_relative_eq!(v.re, 4.0 * PI / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn maxwell_examples() {
        let spec = QuadratureSpec::default();
        let g = gas();
        let one = integrate_maxwell_3d(|_| re(1.0), &g, &spec).unwrap();
        assert_relative_eq!(one.re, 1.0, max_relative = 1e-12);
        let p2 = integrate_maxwell_3d(|p| re(p.norm_squared()), &g, &spec).unwrap();
        assert_relative_eq!(p2.re, 3.0, max_relative = 1e-10);
        let pabs = integrate_maxwell_3d(|p| re(p.norm()), &g, &spec).unwrap();
        assert_relative_eq!(pabs.re, (8.0 / PI).sqrt(), max_relative = 1e-8);
        // radial route agrees
        let pabs_r = integrate_maxwell_radial(|p| re(p), &g, &spec).unwrap();
        assert_relative_eq!(pabs_r.re, (8.0 / PI).sqrt(), max_relative = 1e-10);
        // mean speed matches gasenv
        assert_relative_eq!(pabs_r.re / g.mass, g.mean_speed(), max_relative = 1e-10);
    }

    #[test]
    fn plane_examples() {
        let spec = QuadratureSpec::default();
        let sigma = 0.7;
        let norm = 1.0 / (2.0 * PI * sigma * sigma);
        let f = move |x: f64, y: f64| re(norm * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        let v = integrate_plane(f, sigma, &spec).unwrap();
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
        let fx2 = move |x: f64, y: f64| re(x * x) * f(x, y);
        let v2 = integrate_plane(fx2, sigma, &spec).unwrap();
        assert_relative_eq!(v2.re, sigma * sigma, max_relative = 1e-10);
        // offset rule recovers a shifted Gaussian
        let shifted =
            move |x: f64, y: f64| re(norm * (-((x - 2.0).powi(2) + y * y) / (2.0 * sigma * sigma)).exp());
        let v3 = integrate_plane_offset(shifted, sigma, [2.0, 0.0], &spec).unwrap();
        assert_relative_eq!(v3.re, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn plane_agrees_with_mc() {
        let spec = QuadratureSpec::default();
        let f = |x: f64, y: f64| re((1.0 + 0.3 * x + 0.1 * x * y) * (-(x * x + y * y) / 2.0).exp());
        let quad = integrate_plane(f, 1.0, &spec).unwrap();
        // MC with importance sampling from the same Gaussian
        let est = mc_integrate(
            |xy: &(f64, f64)| {
                let (x, y) = *xy;
                let density = (-(x * x + y * y) / 2.0).exp() / (2.0 * PI);
                f(x, y) / density
            },
            |rng| {
                use rand_distr::{Distribution, StandardNormal};
                (
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                )
            },
            200_000,
            77,
        );
        assert!(
            (est.mean - quad).norm() < 3.0 * est.std_error,
            "quad {quad}, mc {} ± {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn mc_basics() {
        // constant integrand is exact
        let est = mc_integrate(|_: &f64| re(2.5), |_| 0.0, 10_000, 1);
        assert_relative_eq!(est.mean.re, 2.5, max_relative = 1e-14);
        assert_eq!(est.std_error, 0.0);
        // odd function near zero within 3 sigma
        let est = mc_integrate(
            |x: &f64| re(*x),
            |rng| {
                use rand_distr::{Distribution, StandardNormal};
                StandardNormal.sample(rng)
            },
            50_000,
            2,
        );
        assert!(est.mean.norm() < 3.0 * est.std_error);
        // determinism
        let a = mc_integrate(|x: &f64| re(*x), |rng| rand::Rng::random::<f64>(rng), 5000, 9);
        let b = mc_integrate(|x: &f64| re(*x), |rng| rand::Rng::random::<f64>(rng), 5000, 9);
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn no_convergence_reported() {
        // A spec with zero tolerance headroom on a hard integrand
        let spec = QuadratureSpec {
            radial_nodes: 4,
            angular_order: 4,
            plane_nodes_per_axis: 4,
            rel_tol: 1e-14,
            max_refinements: 1,
        };
        let g = gas();
        let r = integrate_maxwell_3d(|p| re((10.0 * p.x).cos() * p.norm()), &g, &spec);
        assert!(matches!(r, Err(QuadError::NoConvergence { .. })));
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = QuadratureSpec {
            rel_tol: 0.5,
            ..QuadratureSpec::default()
        };
        assert!(matches!(
            integrate_sphere(|_| re(1.0), &spec),
            Err(QuadError::InvalidSpec(_))
        ));
    }
}
