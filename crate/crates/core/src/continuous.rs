//! Continuous-time dynamics: Euler–Maruyama simulation of the kinetic
//! Langevin SDE and its first-order SGD analogue, the continuous-time rate
//! formulas, and the exact second-moment ODE on scalar quadratics.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::discrete::{check_exit_setup, Estimate, InitialLaw};
use crate::landscape::ProblemSpec;
use crate::par::{map_indexed, pairwise_sum_vecs};
use crate::rng::path_stream;
use crate::{Error, Result};

const CHUNK: usize = 64;

/// Branch-point offset used by [`sde_optimal_rate`].
pub const BRANCH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub init: InitialLaw,
    /// Record statistics every this many steps.
    pub record_every: usize,
}

impl SdeParams {
    fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    fn validate(&self, spec: &ProblemSpec, needs_friction: bool) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::invalid("t_end must be >= dt"));
        }
        if needs_friction && !(self.mu > 0.0) {
            return Err(Error::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.n_paths == 0 || self.record_every == 0 {
            return Err(Error::invalid("n_paths and record_every must be >= 1"));
        }
        if let InitialLaw::Point { x0, v0 } = &self.init {
            if x0.len() != spec.dim() || v0.len() != spec.dim() {
                return Err(Error::invalid(format!("initial state must have dimension {}", spec.dim())));
            }
        }
        Ok(())
    }
}

/// Means over paths that have not left the domain by time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeTrajectoryStats {
    pub t: Vec<f64>,
    pub mean_f: Vec<f64>,
    pub mean_x2: Vec<f64>,
    pub mean_v2: Vec<f64>,
    pub alive_fraction: Vec<f64>,
    pub n_paths: usize,
    pub truncated_at: Option<f64>,
}

impl SdeTrajectoryStats {
    pub const CSV_HEADER: &'static str = "t,mean_f,mean_x2,mean_v2,alive_fraction";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.t.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.t[i], self.mean_f[i], self.mean_x2[i], self.mean_v2[i], self.alive_fraction[i]
            )?;
        }
        if let Some(t) = self.truncated_at {
            writeln!(w, "# truncated at t = {t}: no surviving paths")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Order {
    Second,
    First,
}

/// Sums `[f, x2, v2, alive]` per recorded time for one chunk of paths.
fn sde_chunk(spec: &ProblemSpec, p: &SdeParams, order: Order, chunk: usize) -> Result<Vec<f64>> {
    let d = spec.dim();
    let n_steps = p.n_steps();
    let n_rec = n_steps / p.record_every + 1;
    let mut acc = vec![0.0; 4 * n_rec];
    let (mut x, mut v, mut grad) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let sqdt = p.dt.sqrt();
    let first = chunk * CHUNK;
    for path in first..(first + CHUNK).min(p.n_paths) {
        let mut rng = path_stream(p.seed, path as u64);
        p.init.sample(spec, &mut rng, &mut x, &mut v);
        if matches!(order, Order::First) {
            v.iter_mut().for_each(|c| *c = 0.0);
        }
        let mut alive = spec.domain.contains(&x);
        for n in 0..=n_steps {
            if !alive {
                break;
            }
            let fx = spec.value(&x);
            if n % p.record_every == 0 {
                let slot = 4 * (n / p.record_every);
                acc[slot] += fx;
                acc[slot + 1] += x.iter().map(|c| c * c).sum::<f64>();
                acc[slot + 2] += v.iter().map(|c| c * c).sum::<f64>();
                acc[slot + 3] += 1.0;
            }
            if n == n_steps {
                break;
            }
            spec.gradient_into(&x, &mut grad);
            let scale = sqdt * (spec.sigma * fx / d as f64).max(0.0).sqrt();
            for i in 0..d {
                let kick = if scale > 0.0 { scale * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                match order {
                    Order::Second => {
                        v[i] += -p.dt * (p.mu * v[i] + grad[i]) + kick;
                        x[i] += p.dt * v[i];
                    }
                    Order::First => x[i] += -p.dt * grad[i] + kick,
                }
            }
            if x.iter().chain(&v).any(|c| !c.is_finite()) {
                return Err(Error::NumericalOverflow { step: n + 1 });
            }
            alive = spec.domain.contains(&x);
        }
    }
    Ok(acc)
}

fn run_sde(spec: &ProblemSpec, p: &SdeParams, order: Order) -> Result<SdeTrajectoryStats> {
    p.validate(spec, matches!(order, Order::Second))?;
    let n_chunks = p.n_paths.div_ceil(CHUNK);
    let parts = map_indexed(n_chunks, |c| sde_chunk(spec, p, order, c))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let sums = pairwise_sum_vecs(&parts);
    let mut out = SdeTrajectoryStats {
        t: Vec::new(),
        mean_f: Vec::new(),
        mean_x2: Vec::new(),
        mean_v2: Vec::new(),
        alive_fraction: Vec::new(),
        n_paths: p.n_paths,
        truncated_at: None,
    };
    for (i, cell) in sums.chunks_exact(4).enumerate() {
        let t = (i * p.record_every) as f64 * p.dt;
        if cell[3] == 0.0 {
            out.truncated_at = Some(t);
            break;
        }
        out.t.push(t);
        out.mean_f.push(cell[0] / cell[3]);
        out.mean_x2.push(cell[1] / cell[3]);
        out.mean_v2.push(cell[2] / cell[3]);
        out.alive_fraction.push(cell[3] / p.n_paths as f64);
    }
    Ok(out)
}

/// Velocity-first Euler–Maruyama for
/// `dX = V dt`, `dV = −(μV + ∇f(X)) dt + Σ(X) dW` with
/// `Σ(x) = sqrt(σ f(x) / d) · I`, so `‖Σ(x)‖_F² = σ f(x)`.
pub fn euler_maruyama_msgd(spec: &ProblemSpec, params: &SdeParams) -> Result<SdeTrajectoryStats> {
    run_sde(spec, params, Order::Second)
}

/// Euler–Maruyama for `dX = −∇f(X) dt + Σ(X) dW`; `params.mu` is ignored.
pub fn euler_maruyama_sgd(spec: &ProblemSpec, params: &SdeParams) -> Result<SdeTrajectoryStats> {
    run_sde(spec, params, Order::First)
}

/// Generator of `(E[X²], E[XV], E[V²])` for `f(x) = ½λx²` with
/// `Σ(x)² = σλx²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrix {
    pub m: Matrix3<f64>,
    pub dominant_eig_real: f64,
}

impl MomentMatrix {
    /// `exp(tM)` applied to `(E[X²], E[XV], E[V²])` at time zero.
    pub fn moments_at(&self, t: f64, initial: [f64; 3]) -> [f64; 3] {
        let out = (self.m * t).exp() * Vector3::from(initial);
        [out[0], out[1], out[2]]
    }
}

pub fn moment_ode_quadratic(lambda: f64, mu: f64, sigma: f64) -> MomentMatrix {
    let m = Matrix3::new(
        0.0, 2.0, 0.0,
        -lambda, -mu, 1.0,
        sigma * lambda / 2.0, -2.0 * lambda, -2.0 * mu,
    );
    let dominant_eig_real = m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    MomentMatrix { m, dominant_eig_real }
}

fn check_b(b: f64, l: f64, sigma: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("b must be > 0, got {b}")));
    }
    if sigma > 0.0 && b >= 4.0 * l / sigma {
        return Err(Error::invalid(format!("b = {b} must be < 4L/sigma = {}", 4.0 * l / sigma)));
    }
    Ok(())
}

/// Friction window `(μ_−^b, μ_+^b)`.
pub fn sde_mu_bounds(b: f64, c_l: f64, l: f64, sigma: f64) -> Result<(f64, f64)> {
    check_b(b, l, sigma)?;
    let s = b + c_l / b;
    let disc = s * s - 4.0 * l + b * sigma;
    if disc < 0.0 {
        return Err(Error::InternalConsistency(format!("negative discriminant {disc} at b = {b}")));
    }
    let root = disc.sqrt();
    let centre = b + 3.0 * c_l / b;
    Ok(((centre - root) / 2.0, (centre + root) / 2.0))
}

/// `Φ(b) = b⁴ + (9/8)σb³ + (2C_L − 9L/2)b² + C_L²`.
pub fn sde_phi(b: f64, c_l: f64, l: f64, sigma: f64) -> f64 {
    let b2 = b * b;
    b2 * b2 + 9.0 / 8.0 * sigma * b2 * b + (2.0 * c_l - 4.5 * l) * b2 + c_l * c_l
}

/// Rate `m(b, μ)` for admissible friction.
pub fn sde_rate_for(b: f64, mu: f64, c_l: f64, l: f64, sigma: f64, eps: f64) -> Result<f64> {
    let (lo, hi) = sde_mu_bounds(b, c_l, l, sigma)?;
    if mu <= c_l / b {
        return Err(Error::invalid(format!("mu = {mu} must exceed C_L/b = {}", c_l / b)));
    }
    if mu >= b + 2.0 * c_l / b {
        return Err(Error::invalid(format!("mu = {mu} must be below b + 2C_L/b = {}", b + 2.0 * c_l / b)));
    }
    if mu > lo && mu < hi {
        return Err(Error::invalid(format!("mu = {mu} lies inside the excluded window ({lo}, {hi})")));
    }
    let branch = (b + 4.0 * c_l / b) / 3.0;
    Ok(if mu < branch {
        2.0 * (mu - c_l / b)
    } else if mu > branch {
        b + 2.0 * c_l / b - mu
    } else {
        2.0 / 3.0 * (b + c_l / b) - eps
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeRate {
    pub b: f64,
    pub mu: f64,
    pub m: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub phi: f64,
    /// `C_L* = max(C_L, 9L/8)`.
    pub c_star: f64,
}

/// Best rate at fixed `b`, choosing μ by the sign of `Φ(b)`.
fn rate_at_b(b: f64, c_l: f64, l: f64, sigma: f64) -> Option<SdeRate> {
    let (mu_minus, mu_plus) = sde_mu_bounds(b, c_l, l, sigma).ok()?;
    let phi = sde_phi(b, c_l, l, sigma);
    let (mu, m) = if phi >= 0.0 {
        (mu_minus, sde_rate_for(b, mu_minus, c_l, l, sigma, BRANCH_EPS).ok()?)
    } else {
        let mu = (b + 4.0 * c_l / b) / 3.0;
        (mu, 2.0 / 3.0 * (b + c_l / b) - BRANCH_EPS)
    };
    Some(SdeRate { b, mu, m, mu_minus, mu_plus, phi, c_star: c_l.max(9.0 * l / 8.0) })
}

/// Maximise `m(b, μ)` over `b` on a log grid, then by golden-section search.
pub fn sde_optimal_rate(l: f64, c_l: f64, sigma: f64) -> Result<SdeRate> {
    if !(l > 0.0 && c_l >= l && sigma >= 0.0) {
        return Err(Error::invalid("need C_L >= L > 0 and sigma >= 0"));
    }
    let b_max = if sigma > 0.0 { 4.0 * l / sigma } else { 1e3 * c_l.sqrt() };
    let b_min = b_max * 1e-9;
    let n = 1000;
    let score = |lb: f64| rate_at_b(lb.exp(), c_l, l, sigma).map_or(f64::NEG_INFINITY, |r| r.m);
    let (lo, hi) = (b_min.ln(), b_max.ln());
    // Keep the last grid point strictly inside the open range when σ > 0.
    let top = if sigma > 0.0 { hi - 1e-12 } else { hi };
    let grid: Vec<f64> = (0..n).map(|i| lo + (top - lo) * i as f64 / (n - 1) as f64).collect();
    let best = (0..n)
        .max_by(|&i, &j| score(grid[i]).total_cmp(&score(grid[j])).then(j.cmp(&i)))
        .unwrap();
    let (mut a, mut c) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n - 1)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let (mut f1, mut f2) = (score(x1), score(x2));
    for _ in 0..200 {
        if (c - a).abs() < 1e-14 {
            break;
        }
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = score(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = score(x2);
        }
    }
    let candidates = [grid[best], x1, x2];
    let pick = candidates
        .iter()
        .copied()
        .max_by(|p, q| score(*p).total_cmp(&score(*q)))
        .unwrap();
    rate_at_b(pick.exp(), c_l, l, sigma)
        .ok_or_else(|| Error::InternalConsistency("no admissible b found".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoSdeRate {
    pub mu: f64,
    pub m: f64,
    pub c_star: f64,
}

/// Closed-form friction and rate with `b = √C_L*`.
pub fn theo_sde2_rate(l: f64, c_l: f64, sigma: f64) -> Result<TheoSdeRate> {
    if !(l > 0.0 && c_l >= l && sigma >= 0.0) {
        return Err(Error::invalid("need C_L >= L > 0 and sigma >= 0"));
    }
    let c_star = c_l.max(9.0 * l / 8.0);
    let root = c_star.sqrt();
    if sigma >= 4.0 * l / root {
        return Err(Error::OutOfRange(format!("sigma = {sigma} must be < 4L/sqrt(C_L*) = {}", 4.0 * l / root)));
    }
    let inner = (c_star - l + 0.25 * root * sigma).sqrt();
    Ok(TheoSdeRate { mu: 2.0 * root - inner, m: 2.0 * (root - inner), c_star })
}

/// `m_SGD = 2L − C_L σ / 2`; non-positive values certify nothing.
pub fn sgd_sde_rate(l: f64, c_l: f64, sigma: f64) -> f64 {
    2.0 * l - c_l * sigma / 2.0
}

/// Fraction of paths started uniformly in `B_{r0}(y)` with `E|V_0|² = r0`
/// that leave the domain before `t_end`. `params.init` is replaced.
pub fn sde_exit_probability(spec: &ProblemSpec, params: &SdeParams, r0: f64) -> Result<Estimate> {
    check_exit_setup(spec, r0)?;
    let params = SdeParams { init: InitialLaw::BallUniform { radius: r0, v0_scale: 1.0 }, ..params.clone() };
    let stats = euler_maruyama_msgd(spec, &params)?;
    let p = if stats.truncated_at.is_some() {
        1.0
    } else {
        1.0 - stats.alive_fraction.last().copied().unwrap_or(0.0)
    };
    Ok(Estimate::binomial(p, params.n_paths))
}
