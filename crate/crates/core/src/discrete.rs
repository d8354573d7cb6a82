//! Discrete-time MSGD and SGD ensembles.
//!
//! The MSGD recursion updates the velocity first and moves the position with
//! the new velocity:
//!
//! ```text
//! V' = V − γμV − γ∇f(X) + γD
//! X' = X + γV'
//! ```
//!
//! Paths that leave the domain are frozen, so both the surviving fraction and
//! the means over surviving paths can be read off [`EnsembleStats`].

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::landscape::{Domain, NoiseSample, ProblemSpec};
use crate::par::{map_indexed, pairwise_sum_vecs};
use crate::rng::{path_stream, PathRng};
use crate::{Error, Result};

/// Paths per work item. Accumulation inside a chunk is sequential, and chunk
/// sums are combined pairwise in index order.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant(f64),
    /// Explicit `γ_1, γ_2, …`.
    Sequence(Vec<f64>),
    /// `γ_n = γ_0 / √n`.
    InverseSqrt { gamma0: f64 },
}

impl StepSchedule {
    /// Step size `γ_n` for `n ≥ 1`.
    pub fn step(&self, n: usize) -> f64 {
        match self {
            StepSchedule::Constant(g) => *g,
            StepSchedule::Sequence(v) => v[n - 1],
            StepSchedule::InverseSqrt { gamma0 } => gamma0 / (n as f64).sqrt(),
        }
    }

    pub fn validate(&self, n_steps: usize) -> Result<()> {
        let bad = |g: f64| !(g > 0.0) || !g.is_finite();
        match self {
            StepSchedule::Constant(g) if bad(*g) => {
                Err(Error::invalid(format!("step size must be > 0, got {g}")))
            }
            StepSchedule::InverseSqrt { gamma0 } if bad(*gamma0) => {
                Err(Error::invalid(format!("step size must be > 0, got {gamma0}")))
            }
            StepSchedule::Sequence(v) => {
                if v.len() < n_steps {
                    return Err(Error::invalid(format!(
                        "schedule has {} entries, need {n_steps}",
                        v.len()
                    )));
                }
                match v.iter().position(|&g| bad(g)) {
                    Some(i) => Err(Error::invalid(format!("gamma_{} = {} is not > 0", i + 1, v[i]))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Numerical times `t_0 = 0, t_n = γ_1 + … + γ_n`.
    pub fn times(&self, n_steps: usize) -> Vec<f64> {
        let mut t = Vec::with_capacity(n_steps + 1);
        let mut acc = 0.0;
        t.push(acc);
        for n in 1..=n_steps {
            acc += self.step(n);
            t.push(acc);
        }
        t
    }
}

/// Law of `(X_0, V_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialLaw {
    Point { x0: Vec<f64>, v0: Vec<f64> },
    /// `X_0` uniform on the ball of `radius` around the problem's minimizer,
    /// `V_0 = v0_scale · sqrt(radius / d) · ξ` so `E|V_0|² = v0_scale² · radius`.
    BallUniform { radius: f64, v0_scale: f64 },
}

impl InitialLaw {
    pub fn at(x0: Vec<f64>) -> Self {
        let d = x0.len();
        InitialLaw::Point { x0, v0: vec![0.0; d] }
    }

    pub(crate) fn sample(&self, spec: &ProblemSpec, rng: &mut PathRng, x: &mut [f64], v: &mut [f64]) {
        match self {
            InitialLaw::Point { x0, v0 } => {
                x.copy_from_slice(x0);
                v.copy_from_slice(v0);
            }
            InitialLaw::BallUniform { radius, v0_scale } => {
                let d = x.len();
                let centre = spec.anchor();
                let mut norm = 0.0;
                for xi in x.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi = z;
                    norm += z * z;
                }
                let norm = norm.sqrt();
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / d as f64);
                for (xi, c) in x.iter_mut().zip(&centre) {
                    *xi = c + if norm > 0.0 { *xi / norm * r } else { 0.0 };
                }
                let scale = v0_scale * (radius / d as f64).sqrt();
                for vi in v.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *vi = scale * z;
                }
            }
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            InitialLaw::Point { x0, v0 } if x0.len() != d || v0.len() != d => {
                Err(Error::invalid(format!("initial state must have dimension {d}")))
            }
            InitialLaw::BallUniform { radius, v0_scale } if !(*radius > 0.0) || !(*v0_scale >= 0.0) => {
                Err(Error::invalid("ball radius must be > 0 and v0_scale >= 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteParams {
    pub schedule: StepSchedule,
    pub mu: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub init: InitialLaw,
}

impl DiscreteParams {
    fn validate(&self, spec: &ProblemSpec, needs_friction: bool) -> Result<()> {
        self.schedule.validate(self.n_steps)?;
        if needs_friction && !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be >= 1"));
        }
        self.init.validate(spec.dim())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Whether `X_0, …, X_n` all lie in the domain.
    pub alive: bool,
    pub step_index: usize,
}

impl PathState {
    pub fn new(x: Vec<f64>, v: Vec<f64>, domain: &Domain) -> Self {
        let alive = domain.contains(&x);
        Self { x, v, alive, step_index: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCoeffs {
    pub a: f64,
    pub b: f64,
}

/// `E = a f(x) + ⟨∇f(x), v⟩ + (b/2)|v|²`.
pub fn lyapunov_energy(x: &[f64], v: &[f64], spec: &ProblemSpec, lyap: &LyapunovCoeffs) -> f64 {
    let g = spec.gradient(x);
    energy_with(spec.value(x), &g, v, lyap)
}

fn energy_with(fx: f64, grad: &[f64], v: &[f64], lyap: &LyapunovCoeffs) -> f64 {
    let gv: f64 = grad.iter().zip(v).map(|(g, w)| g * w).sum();
    let v2: f64 = v.iter().map(|w| w * w).sum();
    lyap.a * fx + gv + 0.5 * lyap.b * v2
}

/// Velocity-first update in place. `grad` must hold `∇f(x)`.
fn msgd_update(x: &mut [f64], v: &mut [f64], grad: &[f64], noise: &[f64], gamma: f64, mu: f64) {
    for i in 0..x.len() {
        v[i] = v[i] - gamma * mu * v[i] - gamma * grad[i] + gamma * noise[i];
        x[i] += gamma * v[i];
    }
}

/// One MSGD step. Dead paths are returned unchanged.
pub fn msgd_step(
    state: &PathState,
    gamma: f64,
    spec: &ProblemSpec,
    mu: f64,
    noise: &NoiseSample,
) -> Result<PathState> {
    if !state.alive {
        return Ok(state.clone());
    }
    let grad = spec.gradient(&state.x);
    let mut next = state.clone();
    msgd_update(&mut next.x, &mut next.v, &grad, &noise.0, gamma, mu);
    next.step_index += 1;
    if next.x.iter().chain(&next.v).any(|c| !c.is_finite()) {
        return Err(Error::NumericalOverflow { step: next.step_index });
    }
    next.alive = spec.domain.contains(&next.x);
    Ok(next)
}

/// Per-step ensemble aggregates. Means are over paths still alive at that
/// step; multiply by `alive_fraction` for `E[1_A ·]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// Numerical time `t_n`.
    pub t: Vec<f64>,
    pub mean_f: Vec<f64>,
    pub mean_v2: Vec<f64>,
    /// Lyapunov energy, present when coefficients were supplied.
    pub mean_energy: Option<Vec<f64>>,
    pub alive_fraction: Vec<f64>,
    pub n_paths: usize,
    /// First step at which no path was alive; arrays stop before it.
    pub truncated_at: Option<usize>,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub const CSV_HEADER: &'static str = "step,t_n,mean_f,mean_v2,mean_energy,alive_fraction";

    /// Columns `step, t_n, mean_f, mean_v2, mean_energy, alive_fraction`.
    /// Missing energies are written as empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for n in 0..self.len() {
            let energy = self
                .mean_energy
                .as_ref()
                .map(|e| e[n].to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                n, self.t[n], self.mean_f[n], self.mean_v2[n], energy, self.alive_fraction[n]
            )?;
        }
        if let Some(k) = self.truncated_at {
            writeln!(w, "# truncated at step {k}: no surviving paths")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Scheme {
    Momentum,
    Plain,
}

/// Sums over one chunk of paths: `[f, v2, energy, alive]` per step, flattened.
fn simulate_chunk(
    spec: &ProblemSpec,
    params: &DiscreteParams,
    lyap: Option<&LyapunovCoeffs>,
    scheme: Scheme,
    chunk: usize,
) -> Result<Vec<f64>> {
    let d = spec.dim();
    let n_steps = params.n_steps;
    let mut acc = vec![0.0; 4 * (n_steps + 1)];
    let (mut x, mut v) = (vec![0.0; d], vec![0.0; d]);
    let (mut grad, mut noise) = (vec![0.0; d], vec![0.0; d]);
    let first = chunk * CHUNK;
    let last = (first + CHUNK).min(params.n_paths);
    for path in first..last {
        let mut rng = path_stream(params.seed, path as u64);
        params.init.sample(spec, &mut rng, &mut x, &mut v);
        if matches!(scheme, Scheme::Plain) {
            v.iter_mut().for_each(|c| *c = 0.0);
        }
        let mut alive = spec.domain.contains(&x);
        let mut fx = spec.value(&x);
        spec.gradient_into(&x, &mut grad);
        for n in 0..=n_steps {
            if !alive {
                break;
            }
            let slot = 4 * n;
            let v2: f64 = v.iter().map(|c| c * c).sum();
            acc[slot] += fx;
            acc[slot + 1] += v2;
            if let Some(ly) = lyap {
                acc[slot + 2] += energy_with(fx, &grad, &v, ly);
            }
            acc[slot + 3] += 1.0;
            if n == n_steps {
                break;
            }
            let gamma = params.schedule.step(n + 1);
            spec.fill_noise(&x, fx, &mut rng, &mut noise);
            match scheme {
                Scheme::Momentum => msgd_update(&mut x, &mut v, &grad, &noise, gamma, params.mu),
                Scheme::Plain => {
                    for i in 0..d {
                        x[i] += gamma * (noise[i] - grad[i]);
                    }
                }
            }
            if x.iter().chain(&v).any(|c| !c.is_finite()) {
                return Err(Error::NumericalOverflow { step: n + 1 });
            }
            alive = spec.domain.contains(&x);
            fx = spec.value(&x);
            spec.gradient_into(&x, &mut grad);
        }
    }
    Ok(acc)
}

fn run_ensemble(
    spec: &ProblemSpec,
    params: &DiscreteParams,
    lyap: Option<&LyapunovCoeffs>,
    scheme: Scheme,
    serial: bool,
) -> Result<EnsembleStats> {
    let n_chunks = params.n_paths.div_ceil(CHUNK);
    let job = |c: usize| simulate_chunk(spec, params, lyap, scheme, c);
    let parts: Vec<Vec<f64>> = if serial {
        crate::par::map_indexed_serial(n_chunks, job)
    } else {
        map_indexed(n_chunks, job)
    }
    .into_iter()
    .collect::<Result<_>>()?;
    let sums = pairwise_sum_vecs(&parts);

    let t_all = params.schedule.times(params.n_steps);
    let mut stats = EnsembleStats {
        t: Vec::new(),
        mean_f: Vec::new(),
        mean_v2: Vec::new(),
        mean_energy: lyap.map(|_| Vec::new()),
        alive_fraction: Vec::new(),
        n_paths: params.n_paths,
        truncated_at: None,
    };
    for n in 0..=params.n_steps {
        let alive = sums[4 * n + 3];
        if alive == 0.0 {
            stats.truncated_at = Some(n);
            break;
        }
        stats.t.push(t_all[n]);
        stats.mean_f.push(sums[4 * n] / alive);
        stats.mean_v2.push(sums[4 * n + 1] / alive);
        if let Some(e) = stats.mean_energy.as_mut() {
            e.push(sums[4 * n + 2] / alive);
        }
        stats.alive_fraction.push(alive / params.n_paths as f64);
    }
    Ok(stats)
}

/// Monte-Carlo MSGD ensemble with per-path streams keyed by `(seed, path)`.
pub fn run_msgd(
    spec: &ProblemSpec,
    params: &DiscreteParams,
    lyap: Option<&LyapunovCoeffs>,
) -> Result<EnsembleStats> {
    params.validate(spec, true)?;
    run_ensemble(spec, params, lyap, Scheme::Momentum, false)
}

/// [`run_msgd`] evaluated on the calling thread only.
pub fn run_msgd_serial(
    spec: &ProblemSpec,
    params: &DiscreteParams,
    lyap: Option<&LyapunovCoeffs>,
) -> Result<EnsembleStats> {
    params.validate(spec, true)?;
    run_ensemble(spec, params, lyap, Scheme::Momentum, true)
}

/// SGD baseline `X' = X − γ∇f(X) + γD`; the velocity column is zero and
/// `params.mu` is ignored.
pub fn run_sgd(spec: &ProblemSpec, params: &DiscreteParams) -> Result<EnsembleStats> {
    params.validate(spec, false)?;
    run_ensemble(spec, params, None, Scheme::Plain, false)
}

/// Least-squares fit of the exponential decay of a positive series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Per-step factor `exp(−m̂ h)` with `h` the mean step.
    pub rho: f64,
    /// Rate `m̂` in numerical time.
    pub rate: f64,
    pub rate_stderr: f64,
    pub rho_stderr: f64,
    pub blocks: usize,
}

/// Fit `log(block mean) ≈ c − m̂ t` after a 10% burn-in, using blocks of
/// `max(10, len/50)` steps. Non-positive block means are dropped.
pub fn estimate_decay_factor(series: &[f64], t: &[f64]) -> Result<DecayFit> {
    let len = series.len();
    if len < 20 {
        return Err(Error::InsufficientData(format!("series has {len} points, need >= 20")));
    }
    if t.len() != len {
        return Err(Error::invalid("series and time grid differ in length"));
    }
    let burn = len / 10;
    let k = (len / 50).max(10);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut start = burn;
    while start + k <= len {
        let mean = series[start..start + k].iter().sum::<f64>() / k as f64;
        let tm = t[start..start + k].iter().sum::<f64>() / k as f64;
        if mean > 0.0 && mean.is_finite() {
            pts.push((tm, mean.ln()));
        }
        start += k;
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("only {} usable blocks", pts.len())));
    }
    let n = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tbar).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.1 - ybar)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("time grid is degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = (sse / (n - 2.0) / sxx).sqrt();
    let h = (t[len - 1] - t[0]) / (len - 1) as f64;
    let rate = -slope;
    let rho = (-rate * h).exp();
    Ok(DecayFit { rho, rate, rate_stderr: slope_se, rho_stderr: rho * h * slope_se, blocks: pts.len() })
}

/// Monte-Carlo probability with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn binomial(p: f64, n: usize) -> Self {
        Estimate { value: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), samples: n }
    }
}

pub(crate) fn check_exit_setup(spec: &ProblemSpec, r0: f64) -> Result<()> {
    let Domain::Ball { center, radius } = &spec.domain else {
        return Err(Error::invalid("exit probabilities need a ball domain"));
    };
    if !(r0 > 0.0) {
        return Err(Error::invalid(format!("r0 must be > 0, got {r0}")));
    }
    let y = spec.anchor();
    let offset = y.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    if offset + r0 > *radius {
        return Err(Error::invalid(format!(
            "B(y, {r0}) is not contained in the domain of radius {radius}"
        )));
    }
    Ok(())
}

/// Fraction of MSGD paths started in `B_{r0}(y)` that leave the domain
/// within `params.n_steps` steps. `params.init` is replaced by the ball law.
pub fn exit_probability(spec: &ProblemSpec, params: &DiscreteParams, r0: f64, v0_scale: f64) -> Result<Estimate> {
    check_exit_setup(spec, r0)?;
    let params = DiscreteParams {
        init: InitialLaw::BallUniform { radius: r0, v0_scale },
        ..params.clone()
    };
    let stats = run_msgd(spec, &params, None)?;
    let p = if stats.truncated_at.is_some() {
        1.0
    } else {
        1.0 - stats.alive_fraction.last().copied().unwrap_or(0.0)
    };
    Ok(Estimate::binomial(p, params.n_paths))
}

/// Linearised MSGD on `f(x) = ½λx²` acting on `(X, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionOracle {
    pub matrix: [[f64; 2]; 2],
    /// Squared spectral radius: asymptotic per-step factor of `f`.
    pub rho_sq: f64,
    pub complex_pair: bool,
}

pub fn transition_matrix_quadratic(lambda: f64, gamma: f64, mu: f64) -> TransitionOracle {
    let damp = 1.0 - gamma * mu;
    let matrix = [[1.0 - gamma * gamma * lambda, gamma * damp], [-gamma * lambda, damp]];
    let tr = matrix[0][0] + matrix[1][1];
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    let disc = tr * tr - 4.0 * det;
    let (rho_sq, complex_pair) = if disc < 0.0 {
        (det.abs(), true)
    } else {
        let s = disc.sqrt();
        let r = ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs());
        (r * r, false)
    };
    TransitionOracle { matrix, rho_sq, complex_pair }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::make_quadratic;
    use approx::assert_abs_diff_eq;

    fn scalar(lambda: f64, sigma: f64) -> ProblemSpec {
        make_quadratic(&[lambda]).unwrap().with_sigma(sigma).unwrap()
    }

    fn params(gamma: f64, mu: f64, n_steps: usize, n_paths: usize) -> DiscreteParams {
        DiscreteParams {
            schedule: StepSchedule::Constant(gamma),
            mu,
            n_steps,
            n_paths,
            seed: 3,
            init: InitialLaw::at(vec![1.0]),
        }
    }

    #[test]
    fn msgd_step_hand_values() {
        let spec = scalar(1.0, 0.0);
        let s = PathState::new(vec![1.0], vec![0.0], &spec.domain);
        let n = msgd_step(&s, 0.1, &spec, 1.0, &NoiseSample::zeros(1)).unwrap();
        assert_abs_diff_eq!(n.v[0], -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(n.x[0], 0.99, epsilon = 1e-15);
        assert_eq!(n.step_index, 1);
    }

    #[test]
    fn msgd_step_free_drift_and_zero_step() {
        let spec = scalar(1.0, 0.0);
        let s = PathState::new(vec![0.0], vec![2.0], &spec.domain);
        let n = msgd_step(&s, 0.5, &spec, 0.0, &NoiseSample::zeros(1)).unwrap();
        assert_eq!((n.x[0], n.v[0]), (1.0, 2.0));

        let s = PathState::new(vec![0.3], vec![-0.2], &spec.domain);
        let n = msgd_step(&s, 0.0, &spec, 1.0, &NoiseSample::zeros(1)).unwrap();
        assert_eq!((n.x.clone(), n.v.clone()), (s.x.clone(), s.v.clone()));
    }

    #[test]
    fn dead_paths_stay_frozen() {
        let spec = scalar(1.0, 0.0).with_domain(Domain::ball(vec![0.0], 0.5).unwrap()).unwrap();
        let s = PathState::new(vec![1.0], vec![0.3], &spec.domain);
        assert!(!s.alive);
        let n = msgd_step(&s, 0.1, &spec, 1.0, &NoiseSample(vec![5.0])).unwrap();
        assert_eq!(n, s);
    }

    #[test]
    fn overflow_is_reported() {
        let spec = scalar(1.0, 0.0);
        let s = PathState::new(vec![0.0], vec![f64::MAX], &spec.domain);
        assert!(matches!(
            msgd_step(&s, 1.0, &spec, 0.0, &NoiseSample(vec![f64::MAX])),
            Err(Error::NumericalOverflow { step: 1 })
        ));
    }

    #[test]
    fn noise_free_ensemble_collapses_to_recursion() {
        let spec = scalar(1.0, 0.0);
        let stats = run_msgd(&spec, &params(0.1, 1.0, 50, 10), None).unwrap();
        let mut s = PathState::new(vec![1.0], vec![0.0], &spec.domain);
        for n in 0..=50 {
            assert_abs_diff_eq!(stats.mean_f[n], spec.value(&s.x), epsilon = 1e-15);
            s = msgd_step(&s, 0.1, &spec, 1.0, &NoiseSample::zeros(1)).unwrap();
        }
        assert!(stats.alive_fraction.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn msgd_decay_matches_spectral_oracle() {
        let oracle = transition_matrix_quadratic(1.0, 0.1, 1.0);
        assert!(oracle.complex_pair);
        assert_abs_diff_eq!(oracle.rho_sq, 0.9, epsilon = 1e-14);
        let stats = run_msgd(&scalar(1.0, 0.0), &params(0.1, 1.0, 1000, 1), None).unwrap();
        let fit = estimate_decay_factor(&stats.mean_f, &stats.t).unwrap();
        assert!((fit.rho - 0.9).abs() <= 0.005, "{fit:?}");
    }

    #[test]
    fn sgd_factors() {
        let stats = run_sgd(&scalar(1.0, 0.0), &params(0.01, 0.0, 100, 1)).unwrap();
        for w in stats.mean_f.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], 0.9801, epsilon = 1e-12);
        }
        let stats = run_sgd(&scalar(1.0, 0.0), &params(2.0, 0.0, 20, 1)).unwrap();
        for w in stats.mean_f.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], 1.0, epsilon = 1e-12);
        }
        assert!(stats.mean_v2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sgd_rejects_zero_step() {
        assert!(run_sgd(&scalar(1.0, 0.0), &params(0.0, 0.0, 10, 1)).is_err());
    }

    #[test]
    fn energy_examples() {
        let spec = scalar(1.0, 0.0);
        let ly = LyapunovCoeffs { a: 1.0, b: 1.0 };
        assert_abs_diff_eq!(lyapunov_energy(&[1.0], &[-1.0], &spec, &ly), 0.0, epsilon = 1e-15);
        let ly = LyapunovCoeffs { a: 2.5, b: 7.0 };
        assert_eq!(lyapunov_energy(&[0.8], &[0.0], &spec, &ly), 2.5 * spec.value(&[0.8]));
    }

    #[test]
    fn decay_fit_examples() {
        let series: Vec<f64> = (0..400).map(|n| 0.9f64.powi(n)).collect();
        let t: Vec<f64> = (0..400).map(|n| n as f64).collect();
        let fit = estimate_decay_factor(&series, &t).unwrap();
        assert!((fit.rho - 0.9).abs() <= 1e-12);
        let fit = estimate_decay_factor(&vec![3.0; 100], &t[..100]).unwrap();
        assert_eq!(fit.rho, 1.0);
        assert!(matches!(estimate_decay_factor(&[1.0; 10], &t[..10]), Err(Error::InsufficientData(_))));
        assert!(matches!(
            estimate_decay_factor(&vec![0.0; 100], &t[..100]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn transition_oracle_examples() {
        let o = transition_matrix_quadratic(1.0, 0.0, 1.0);
        assert_eq!(o.matrix, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(o.rho_sq, 1.0);
        let mu = std::f64::consts::SQRT_2;
        let o = transition_matrix_quadratic(1.0, 0.01, mu);
        assert_abs_diff_eq!(o.rho_sq, 1.0 - 0.01 * mu, epsilon = 1e-14);
        let implied = (1.0 / o.rho_sq).ln() / 0.01;
        assert!((implied - 1.424).abs() < 1e-3, "{implied}");
    }

    #[test]
    fn exit_probability_equilibrium_is_zero() {
        let spec = scalar(1.0, 0.0).with_domain(Domain::ball(vec![0.0], 1.0).unwrap()).unwrap();
        let est = exit_probability(&spec, &params(0.1, 1.0, 100, 50), 1e-300, 0.0).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn exit_probability_rejects_large_r0() {
        let spec = scalar(1.0, 1.0).with_domain(Domain::ball(vec![0.0], 1.0).unwrap()).unwrap();
        assert!(exit_probability(&spec, &params(0.1, 1.0, 10, 10), 2.0, 1.0).is_err());
        assert!(exit_probability(&scalar(1.0, 1.0), &params(0.1, 1.0, 10, 10), 0.5, 1.0).is_err());
    }

    #[test]
    fn huge_noise_exits() {
        let spec = scalar(1.0, 1e6).with_domain(Domain::ball(vec![0.0], 0.01).unwrap()).unwrap();
        let est = exit_probability(&spec, &params(0.1, 1.0, 200, 400), 0.005, 1.0).unwrap();
        assert!(est.value >= 0.99, "{est:?}");
    }

    #[test]
    fn csv_layout() {
        let stats = run_msgd(&scalar(1.0, 0.0), &params(0.1, 1.0, 3, 1), Some(&LyapunovCoeffs { a: 1.0, b: 1.0 }))
            .unwrap();
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], EnsembleStats::CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,0.5,0,0.5,1"));
    }
}
