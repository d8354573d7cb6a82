//! Objective landscapes with certified PL constants and gradient noise.
//!
//! A [`ProblemSpec`] bundles an objective `f ≥ 0` with its PL constant `L`
//! (`|∇f|² ≥ 2L f`), its inverse-PL constant `C_L` (`|∇f|² ≤ 2C_L f`), the
//! noise intensity `σ` and the validity domain. Two families are provided:
//! diagonal quadratics and least-squares regression with a linear model.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::path_stream;
use crate::{Error, Result};

/// Relative tolerance used when checking the `[L, C_L]` bracket.
pub const PL_TOLERANCE: f64 = 1e-10;

/// Region on which the PL assumptions are certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Domain {
    WholeSpace,
    /// Open ball `|x - center| < radius`.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::WholeSpace => true,
            Domain::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 < radius * radius
            }
        }
    }
}

/// How the gradient perturbation `D` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `D = sqrt(σ f(x) / d) ξ` with `ξ` standard normal, so `E|D|² = σ f(x)`.
    #[default]
    Isotropic,
    /// `D = ∇f(x) − ∇g(x, Γ)` with a single uniformly drawn sample.
    /// Only valid for least-squares problems.
    Minibatch,
}

/// Training set for linear least-squares regression `x = vec(W)`,
/// prediction `W θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqDataset {
    pub d_in: usize,
    pub d_out: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl LsqDataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::invalid("inputs and targets differ in length"));
        }
        let d_in = inputs[0].len();
        let d_out = targets[0].len();
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("input and output dimensions must be positive"));
        }
        if inputs.iter().any(|t| t.len() != d_in) || targets.iter().any(|z| z.len() != d_out) {
            return Err(Error::invalid("ragged dataset"));
        }
        Ok(Self { d_in, d_out, inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Parameter dimension `d_in · d_out`.
    pub fn dim(&self) -> usize {
        self.d_in * self.d_out
    }

    fn residual(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let theta = &self.inputs[i];
        for (o, r) in out.iter_mut().enumerate() {
            let row = &x[o * self.d_in..(o + 1) * self.d_in];
            let pred: f64 = row.iter().zip(theta).map(|(w, t)| w * t).sum();
            *r = pred - self.targets[i][o];
        }
    }

    /// Empirical risk `(1/2N) Σ |W θ_i − ζ_i|²`.
    pub fn risk(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.d_out];
        let mut total = 0.0;
        for i in 0..self.len() {
            self.residual(i, x, &mut r);
            total += r.iter().map(|v| v * v).sum::<f64>();
        }
        total / (2.0 * self.len() as f64)
    }

    /// Gradient of the single-sample loss `½|W θ_i − ζ_i|²`.
    pub fn sample_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let mut r = vec![0.0; self.d_out];
        self.residual(i, x, &mut r);
        let theta = &self.inputs[i];
        for o in 0..self.d_out {
            for j in 0..self.d_in {
                out[o * self.d_in + j] = r[o] * theta[j];
            }
        }
    }

    /// Full-batch gradient of [`risk`](Self::risk).
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let mut r = vec![0.0; self.d_out];
        for i in 0..self.len() {
            self.residual(i, x, &mut r);
            let theta = &self.inputs[i];
            for o in 0..self.d_out {
                for j in 0..self.d_in {
                    out[o * self.d_in + j] += r[o] * theta[j];
                }
            }
        }
        let n = self.len() as f64;
        out.iter_mut().for_each(|g| *g /= n);
    }

    /// Input second-moment matrix `(1/N) Σ θ_i θ_iᵀ`. The Hessian of the
    /// risk is this matrix tensored with the `d_out` identity.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.d_in, self.d_in);
        for theta in &self.inputs {
            for a in 0..self.d_in {
                for b in 0..self.d_in {
                    g[(a, b)] += theta[a] * theta[b];
                }
            }
        }
        g / self.len() as f64
    }

    /// Minimum-norm least-squares solution `W = Z Θ⁺`, flattened row-major.
    pub fn least_squares_solution(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let theta = DMatrix::from_fn(self.d_in, n, |j, i| self.inputs[i][j]);
        let z = DMatrix::from_fn(self.d_out, n, |o, i| self.targets[i][o]);
        let pinv = theta
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::InternalConsistency(format!("pseudo-inverse failed: {e}")))?;
        let w = z * pinv;
        Ok((0..self.d_out)
            .flat_map(|o| (0..self.d_in).map(move |j| (o, j)))
            .map(|(o, j)| w[(o, j)])
            .collect())
    }

    /// Exact `E[|D|² | x]` for minibatch noise with one uniform sample.
    pub fn minibatch_second_moment(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut full = vec![0.0; d];
        self.gradient(x, &mut full);
        let mut gi = vec![0.0; d];
        let mut acc = 0.0;
        for i in 0..self.len() {
            self.sample_gradient(i, x, &mut gi);
            acc += gi.iter().zip(&full).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        acc / self.len() as f64
    }
}

/// Objective function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// `f(x) = ½ Σ λ_i x_i²`.
    Quadratic { eigenvalues: Vec<f64> },
    LeastSquares(LsqDataset),
}

/// Objective with certified constants and a validity domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub objective: Objective,
    /// PL constant.
    pub l: f64,
    /// Inverse-PL (gradient Lipschitz) constant.
    pub c_l: f64,
    pub sigma: f64,
    pub domain: Domain,
    pub minimizer: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        match &self.objective {
            Objective::Quadratic { eigenvalues } => eigenvalues.len(),
            Objective::LeastSquares(ds) => ds.dim(),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.c_l / self.l
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Quadratic { eigenvalues } => {
                0.5 * eigenvalues.iter().zip(x).map(|(l, v)| l * v * v).sum::<f64>()
            }
            Objective::LeastSquares(ds) => ds.risk(x),
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.objective {
            Objective::Quadratic { eigenvalues } => {
                for ((g, l), v) in out.iter_mut().zip(eigenvalues).zip(x) {
                    *g = l * v;
                }
            }
            Objective::LeastSquares(ds) => ds.gradient(x, out),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if let Domain::Ball { center, .. } = &domain {
            if center.len() != self.dim() {
                return Err(Error::invalid("ball center dimension does not match problem"));
            }
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        if noise == NoiseModel::Minibatch && !matches!(self.objective, Objective::LeastSquares(_)) {
            return Err(Error::invalid("minibatch noise requires a least-squares problem"));
        }
        self.noise = noise;
        Ok(self)
    }

    /// Minimizer, or the origin when none is recorded.
    pub fn anchor(&self) -> Vec<f64> {
        self.minimizer.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    /// Write a noise draw at `x` into `out`. `fx` must equal `f(x)`.
    pub fn fill_noise<R: Rng + ?Sized>(&self, x: &[f64], fx: f64, rng: &mut R, out: &mut [f64]) {
        match (self.noise, &self.objective) {
            (NoiseModel::Minibatch, Objective::LeastSquares(ds)) => {
                let i = rng.random_range(0..ds.len());
                let mut gi = vec![0.0; out.len()];
                ds.sample_gradient(i, x, &mut gi);
                ds.gradient(x, out);
                for (o, g) in out.iter_mut().zip(gi) {
                    *o -= g;
                }
            }
            _ => {
                let scale = (self.sigma * fx / out.len() as f64).max(0.0).sqrt();
                if scale == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    for v in out.iter_mut() {
                        let xi: f64 = rng.sample(StandardNormal);
                        *v = scale * xi;
                    }
                }
            }
        }
    }
}

/// Gradient perturbation `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample(pub Vec<f64>);

impl NoiseSample {
    pub fn zeros(d: usize) -> Self {
        NoiseSample(vec![0.0; d])
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

pub fn sample_noise<R: Rng + ?Sized>(spec: &ProblemSpec, x: &[f64], rng: &mut R) -> NoiseSample {
    let mut out = vec![0.0; spec.dim()];
    spec.fill_noise(x, spec.value(x), rng, &mut out);
    NoiseSample(out)
}

/// Diagonal quadratic `½ Σ λ_i x_i²` with `L = min λ`, `C_L = max λ`.
pub fn make_quadratic(eigenvalues: &[f64]) -> Result<ProblemSpec> {
    if eigenvalues.is_empty() {
        return Err(Error::invalid("eigenvalue list is empty"));
    }
    if let Some(bad) = eigenvalues.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::invalid(format!("eigenvalues must be positive, got {bad}")));
    }
    let l = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let c_l = eigenvalues.iter().copied().fold(0.0, f64::max);
    Ok(ProblemSpec {
        objective: Objective::Quadratic { eigenvalues: eigenvalues.to_vec() },
        l,
        c_l,
        sigma: 0.0,
        domain: Domain::WholeSpace,
        minimizer: Some(vec![0.0; eigenvalues.len()]),
        noise: NoiseModel::Isotropic,
    })
}

/// Build the problem spec for an explicit dataset. `L` is the smallest
/// nonzero and `C_L` the largest eigenvalue of the input Gram matrix.
pub fn lsq_problem(dataset: LsqDataset) -> Result<ProblemSpec> {
    let eig = SymmetricEigen::new(dataset.gram());
    let c_l = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(c_l > 0.0) {
        return Err(Error::invalid("degenerate dataset: input Gram matrix is zero"));
    }
    let cutoff = c_l * 1e-10;
    let l = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v > cutoff)
        .fold(f64::INFINITY, f64::min);
    let minimizer = dataset.least_squares_solution()?;
    Ok(ProblemSpec {
        objective: Objective::LeastSquares(dataset),
        l,
        c_l,
        sigma: 0.0,
        domain: Domain::WholeSpace,
        minimizer: Some(minimizer),
        noise: NoiseModel::Isotropic,
    })
}

/// Random overparametrized regression problem, a pure function of `seed`.
/// Inputs and targets are standard normal.
pub fn make_overparam_lsq(
    seed: u64,
    n: usize,
    d_in: usize,
    d_out: usize,
) -> Result<(ProblemSpec, LsqDataset)> {
    if n == 0 || d_in == 0 || d_out == 0 {
        return Err(Error::invalid("N, d_in and d_out must be positive"));
    }
    if d_in * d_out <= n * d_out {
        return Err(Error::invalid(format!(
            "underparametrized: d = {} must exceed N·d_out = {}",
            d_in * d_out,
            n * d_out
        )));
    }
    let mut rng = path_stream(seed, 0);
    let mut normal_vec = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(d_in)).collect();
    let targets: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(d_out)).collect();
    let dataset = LsqDataset::new(inputs, targets)?;
    let spec = lsq_problem(dataset.clone())?;
    Ok((spec, dataset))
}

/// Largest observed `E[|D|² | x] / f(x)` for minibatch noise over `points`.
/// This is the empirical noise constant of the dataset on those points.
pub fn minibatch_sigma(dataset: &LsqDataset, points: &[Vec<f64>]) -> Option<f64> {
    points
        .iter()
        .filter_map(|x| {
            let f = dataset.risk(x);
            (f > 0.0).then(|| dataset.minibatch_second_moment(x) / f)
        })
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlReport {
    /// `min |∇f|² / (2f)` over evaluated points.
    pub min_ratio: f64,
    /// `max |∇f|² / (2f)` over evaluated points.
    pub max_ratio: f64,
    pub evaluated: usize,
    pub skipped: usize,
    /// Indices of points whose ratio leaves `[L, C_L]` beyond tolerance.
    pub violations: Vec<usize>,
}

impl PlReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_pl(spec: &ProblemSpec, points: &[Vec<f64>]) -> Result<PlReport> {
    let mut report = PlReport {
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        evaluated: 0,
        skipped: 0,
        violations: Vec::new(),
    };
    let mut g = vec![0.0; spec.dim()];
    for (i, x) in points.iter().enumerate() {
        let f = spec.value(x);
        if f == 0.0 {
            report.skipped += 1;
            continue;
        }
        spec.gradient_into(x, &mut g);
        let ratio = g.iter().map(|v| v * v).sum::<f64>() / (2.0 * f);
        report.evaluated += 1;
        report.min_ratio = report.min_ratio.min(ratio);
        report.max_ratio = report.max_ratio.max(ratio);
        if ratio < spec.l * (1.0 - PL_TOLERANCE) || ratio > spec.c_l * (1.0 + PL_TOLERANCE) {
            report.violations.push(i);
        }
    }
    if report.evaluated == 0 {
        return Err(Error::EmptyReport);
    }
    Ok(report)
}

/// Max componentwise error between `∇f(x)` and central differences with
/// step `1e-5`, relative to `max(|∇f(x)|_∞, 1)`.
pub fn check_gradient(spec: &ProblemSpec, x: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let g = spec.gradient(x);
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + H;
        let fp = spec.value(&probe);
        probe[i] = x[i] - H;
        let fm = spec.value(&probe);
        probe[i] = x[i];
        let fd = (fp - fm) / (2.0 * H);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    worst
}
