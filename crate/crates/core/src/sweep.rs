//! Declarative parameter sweeps comparing certified MSGD rates with SGD.
//!
//! A sweep is the cartesian product of its axes in row-major order (the first
//! axis varies slowest). Cells are independent and may be evaluated in
//! parallel; rows are always written in index order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certify::{certify_rate, sgd_step_factor, RateCertificate};
use crate::continuous::{sde_optimal_rate, sgd_sde_rate};
use crate::par::{map_indexed, map_indexed_serial};
use crate::{Error, Result};

pub const DISCRETE_HEADER: &str =
    "L,kappa,CL,gamma,sigma,mu_star,a,b,delta,r_msgd,rho_sgd,r_sgd,diff,scaled_diff,winner";
pub const SDE_HEADER: &str = "L,CL,sigma,b_star,mu_star,m_msgd,m_sgd";

/// Friction grid used when optimizing μ, in units of `√L`.
const MU_GRID: (f64, f64, usize) = (1e-2, 1e2, 64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    DiscreteHeatmap,
    DiscreteFrictionMap,
    SdeCurves,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisName {
    L,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "CL")]
    CL,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "mu")]
    Mu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl AxisSpec {
    pub fn new(name: AxisName, min: f64, max: f64, n_points: usize, scale: Scale) -> Self {
        Self { name, min, max, n_points, scale }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.n_points;
        if n == 1 {
            return vec![self.min];
        }
        let frac = |i: usize| i as f64 / (n - 1) as f64;
        match self.scale {
            Scale::Linear => (0..n).map(|i| self.min + (self.max - self.min) * frac(i)).collect(),
            Scale::Log => {
                let (lo, hi) = (self.min.ln(), self.max.ln());
                (0..n).map(|i| (lo + (hi - lo) * frac(i)).exp()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Friction {
    /// Maximise the certified rate over μ in every cell.
    #[default]
    Optimize,
    /// Use the fixed `mu`.
    Fixed,
    /// μ is one of the axes.
    Grid,
}

/// The `[sweep]` section of a configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(rename = "CL", default, skip_serializing_if = "Option::is_none")]
    pub c_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default)]
    pub friction: Friction,
    pub axes: Vec<AxisSpec>,
    #[serde(default)]
    pub seed: u64,
}

/// Fully resolved parameters of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    l: f64,
    c_l: f64,
    gamma: f64,
    sigma: f64,
    mu: Option<f64>,
}

impl SweepConfig {
    fn axis(&self, name: AxisName) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.axes.is_empty() {
            return bad("a sweep needs at least one axis".into());
        }
        for (i, a) in self.axes.iter().enumerate() {
            if a.n_points == 0 {
                return bad(format!("axis {:?} has n_points = 0", a.name));
            }
            if !(a.min.is_finite() && a.max.is_finite()) || a.min > a.max {
                return bad(format!("axis {:?} needs finite min <= max", a.name));
            }
            if a.scale == Scale::Log && !(a.min > 0.0) {
                return bad(format!("log axis {:?} needs min > 0", a.name));
            }
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return bad(format!("axis {:?} appears twice", a.name));
            }
        }
        let has = |name: AxisName, fixed: bool| fixed || self.axis(name);
        if !has(AxisName::L, self.l.is_some()) {
            return bad("L must be fixed or an axis".into());
        }
        let cl_sources = [self.c_l.is_some(), self.kappa.is_some(), self.axis(AxisName::CL), self.axis(AxisName::Kappa)]
            .iter()
            .filter(|&&b| b)
            .count();
        if cl_sources != 1 {
            return bad("give exactly one of CL, kappa (fixed or axis)".into());
        }
        if self.axis(AxisName::L) && self.l.is_some() || self.axis(AxisName::Sigma) && self.sigma != 0.0 {
            return bad("a parameter cannot be both fixed and an axis".into());
        }
        match self.mode {
            SweepMode::SdeCurves => {
                if self.axis(AxisName::Gamma) || self.axis(AxisName::Mu) {
                    return bad("sde-curves sweeps take no gamma or mu axis".into());
                }
            }
            SweepMode::DiscreteHeatmap | SweepMode::DiscreteFrictionMap => {
                if !has(AxisName::Gamma, self.gamma.is_some()) || self.gamma.is_some() && self.axis(AxisName::Gamma) {
                    return bad("gamma must be either fixed or an axis".into());
                }
                match self.friction {
                    Friction::Optimize if self.axis(AxisName::Mu) || self.mu.is_some() => {
                        return bad("friction = optimize takes no mu".into())
                    }
                    Friction::Fixed if self.mu.is_none() || self.axis(AxisName::Mu) => {
                        return bad("friction = fixed needs a fixed mu and no mu axis".into())
                    }
                    Friction::Grid if !self.axis(AxisName::Mu) || self.mu.is_some() => {
                        return bad("friction = grid needs a mu axis".into())
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("sweep config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.n_points).product()
    }

    fn points(&self) -> Vec<Point> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(AxisSpec::values).collect();
        let mut out = Vec::with_capacity(self.n_cells());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            let get = |name: AxisName| {
                self.axes.iter().position(|a| a.name == name).map(|k| values[k][idx[k]])
            };
            let l = get(AxisName::L).or(self.l).unwrap_or(f64::NAN);
            let c_l = get(AxisName::CL)
                .or(self.c_l)
                .or_else(|| get(AxisName::Kappa).or(self.kappa).map(|k| k * l))
                .unwrap_or(f64::NAN);
            out.push(Point {
                l,
                c_l,
                gamma: get(AxisName::Gamma).or(self.gamma).unwrap_or(f64::NAN),
                sigma: get(AxisName::Sigma).unwrap_or(self.sigma),
                mu: get(AxisName::Mu).or(self.mu),
            });
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < values[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

fn run_cells<T: Send, F: Fn(usize) -> T + Sync>(n: usize, exec: Execution, f: F) -> Vec<T> {
    match exec {
        Execution::Parallel => map_indexed(n, f),
        Execution::Serial => map_indexed_serial(n, f),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    Msgd,
    Sgd,
    SgdDivergent,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Msgd => "msgd",
            Winner::Sgd => "sgd",
            Winner::SgdDivergent => "sgd-divergent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub l: f64,
    pub kappa: f64,
    pub c_l: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub mu_star: Option<f64>,
    pub certificate: Option<RateCertificate>,
    pub rho_sgd: f64,
    pub r_sgd: f64,
    pub diff: Option<f64>,
    pub scaled_diff: Option<f64>,
    pub winner: Winner,
}

impl HeatmapCell {
    pub fn r_msgd(&self) -> Option<f64> {
        self.certificate.as_ref().map(|c| c.r)
    }

    fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let c = self.certificate.as_ref();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.l,
            self.kappa,
            self.c_l,
            self.gamma,
            self.sigma,
            opt(self.mu_star),
            opt(c.map(|c| c.a)),
            opt(c.map(|c| c.b)),
            opt(c.map(|c| c.delta)),
            opt(self.r_msgd()),
            self.rho_sgd,
            self.r_sgd,
            opt(self.diff),
            opt(self.scaled_diff),
            self.winner.as_str()
        )
    }
}

fn certified(p: &Point, mu: f64) -> Option<RateCertificate> {
    certify_rate(p.l, p.c_l, p.sigma, p.gamma, mu).ok().flatten()
}

/// Best certificate over μ: log grid on `[1e-2, 1e2]·√L`, then golden-section
/// search in `ln μ` around the best grid point.
fn optimize_mu(p: &Point) -> Option<RateCertificate> {
    let (lo, hi, n) = MU_GRID;
    let root = p.l.sqrt();
    let grid: Vec<f64> = (0..n)
        .map(|i| (lo * root).ln() + ((hi / lo).ln()) * i as f64 / (n - 1) as f64)
        .collect();
    let eval = |lm: f64| certified(p, lm.exp());
    let score = |c: &Option<RateCertificate>| c.as_ref().map_or(f64::NEG_INFINITY, |c| c.r);
    let certs: Vec<Option<RateCertificate>> = grid.iter().map(|&g| eval(g)).collect();
    let mut best_i = 0;
    for i in 1..n {
        if score(&certs[i]) > score(&certs[best_i]) {
            best_i = i;
        }
    }
    let mut best = certs[best_i].clone()?;

    let (mut a, mut c) = (grid[best_i.saturating_sub(1)], grid[(best_i + 1).min(n - 1)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let (mut c1, mut c2) = (eval(x1), eval(x2));
    for _ in 0..40 {
        if c - a < 1e-7 {
            break;
        }
        if score(&c1) >= score(&c2) {
            c = x2;
            x2 = x1;
            c2 = c1;
            x1 = c - inv_phi * (c - a);
            c1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            c1 = c2;
            x2 = a + inv_phi * (c - a);
            c2 = eval(x2);
        }
    }
    for cand in [c1, c2].into_iter().flatten() {
        if cand.r > best.r {
            best = cand;
        }
    }
    Some(best)
}

fn evaluate_discrete(p: &Point, friction: Friction) -> HeatmapCell {
    let (mu_star, certificate) = match (friction, p.mu) {
        (Friction::Optimize, _) => {
            let c = optimize_mu(p);
            (c.as_ref().map(|c| c.mu), c)
        }
        (_, Some(mu)) => (Some(mu), certified(p, mu)),
        (_, None) => (None, None),
    };
    let sgd = sgd_step_factor(p.l, p.c_l, p.sigma, p.gamma);
    let r_sgd = 1.0 / sgd.rho;
    let diff = certificate.as_ref().map(|c| c.r - r_sgd);
    let winner = match diff {
        _ if !sgd.convergent => Winner::SgdDivergent,
        Some(d) if d > 0.0 => Winner::Msgd,
        _ => Winner::Sgd,
    };
    HeatmapCell {
        l: p.l,
        kappa: p.c_l / p.l,
        c_l: p.c_l,
        gamma: p.gamma,
        sigma: p.sigma,
        mu_star,
        certificate,
        rho_sgd: sgd.rho,
        r_sgd,
        diff,
        scaled_diff: diff.map(|d| d / p.gamma),
        winner,
    }
}

pub fn discrete_cells(cfg: &SweepConfig, exec: Execution) -> Result<Vec<HeatmapCell>> {
    cfg.validate()?;
    if cfg.mode == SweepMode::SdeCurves {
        return Err(Error::Config("expected a discrete sweep mode".into()));
    }
    let points = cfg.points();
    if let Some(p) = points.iter().find(|p| !(p.l > 0.0 && p.c_l >= p.l && p.gamma > 0.0 && p.sigma >= 0.0)) {
        return Err(Error::invalid(format!("invalid cell parameters {p:?}: need C_L >= L > 0, gamma > 0")));
    }
    Ok(run_cells(points.len(), exec, |i| evaluate_discrete(&points[i], cfg.friction)))
}

pub fn write_discrete_csv<W: Write>(cells: &[HeatmapCell], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{DISCRETE_HEADER}")?;
    for c in cells {
        writeln!(w, "{}", c.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeCurveRow {
    pub l: f64,
    pub c_l: f64,
    pub sigma: f64,
    pub b_star: f64,
    pub mu_star: f64,
    pub m_msgd: f64,
    pub m_sgd: f64,
}

pub fn sde_rows(cfg: &SweepConfig, exec: Execution) -> Result<Vec<SdeCurveRow>> {
    cfg.validate()?;
    if cfg.mode != SweepMode::SdeCurves {
        return Err(Error::Config("expected mode = sde-curves".into()));
    }
    let points = cfg.points();
    run_cells(points.len(), exec, |i| {
        let p = &points[i];
        let r = sde_optimal_rate(p.l, p.c_l, p.sigma)?;
        Ok(SdeCurveRow {
            l: p.l,
            c_l: p.c_l,
            sigma: p.sigma,
            b_star: r.b,
            mu_star: r.mu,
            m_msgd: r.m,
            m_sgd: sgd_sde_rate(p.l, p.c_l, p.sigma),
        })
    })
    .into_iter()
    .collect()
}

pub fn write_sde_csv<W: Write>(rows: &[SdeCurveRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SDE_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.l, r.c_l, r.sigma, r.b_star, r.mu_star, r.m_msgd, r.m_sgd)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub rows: usize,
    pub csv: PathBuf,
}

impl RunManifest {
    /// `<csv>.manifest.json` next to the CSV.
    pub fn path_for(csv: &Path) -> PathBuf {
        let mut name = csv.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        csv.with_file_name(name)
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = Self::path_for(&self.csv);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Evaluate a discrete sweep and write its CSV and manifest.
pub fn sweep_discrete(cfg: &SweepConfig, csv: &Path, exec: Execution) -> Result<RunManifest> {
    let start = Instant::now();
    let cells = discrete_cells(cfg, exec)?;
    write_file(csv, |w| write_discrete_csv(&cells, w))?;
    let manifest = manifest(cfg, csv, cells.len(), start);
    manifest.write()?;
    Ok(manifest)
}

/// Evaluate an SDE rate sweep and write its CSV and manifest.
pub fn sweep_sde(cfg: &SweepConfig, csv: &Path, exec: Execution) -> Result<RunManifest> {
    let start = Instant::now();
    let rows = sde_rows(cfg, exec)?;
    write_file(csv, |w| write_sde_csv(&rows, w))?;
    let manifest = manifest(cfg, csv, rows.len(), start);
    manifest.write()?;
    Ok(manifest)
}

fn manifest(cfg: &SweepConfig, csv: &Path, rows: usize, start: Instant) -> RunManifest {
    RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        rows,
        csv: csv.to_path_buf(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// `L` against `κ`, noise-free.
    One,
    /// `L` against `κ` with `σ = 100`.
    Two,
    /// Step size against friction at `L = 0.02`, `C_L = 0.06`.
    Three,
    /// SDE rates against `σ` at `L = 0.5`, `C_L = 1`.
    FourA,
}

/// Desk-scale configuration for one of the comparison figures with `n`
/// points per axis.
pub fn figure_config(fig: Figure, n: usize) -> SweepConfig {
    let base = SweepConfig {
        mode: SweepMode::DiscreteHeatmap,
        l: None,
        kappa: None,
        c_l: None,
        gamma: Some(0.01),
        sigma: 0.0,
        mu: None,
        friction: Friction::Optimize,
        axes: vec![
            AxisSpec::new(AxisName::L, 1e-3, 1.0, n, Scale::Log),
            AxisSpec::new(AxisName::Kappa, 1.0, 10.0, n, Scale::Linear),
        ],
        seed: 0,
    };
    match fig {
        Figure::One => base,
        Figure::Two => SweepConfig { sigma: 100.0, ..base },
        Figure::Three => SweepConfig {
            mode: SweepMode::DiscreteFrictionMap,
            l: Some(0.02),
            c_l: Some(0.06),
            gamma: None,
            friction: Friction::Grid,
            axes: vec![
                AxisSpec::new(AxisName::Gamma, 1e-3, 1.0, n, Scale::Log),
                AxisSpec::new(AxisName::Mu, 0.01, 1.0, n, Scale::Log),
            ],
            ..base
        },
        Figure::FourA => SweepConfig {
            mode: SweepMode::SdeCurves,
            l: Some(0.5),
            c_l: Some(1.0),
            gamma: None,
            axes: vec![AxisSpec::new(AxisName::Sigma, 0.0, 3.0, n, Scale::Linear)],
            ..base
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_cell() -> SweepConfig {
        SweepConfig {
            mode: SweepMode::DiscreteHeatmap,
            l: Some(0.02),
            kappa: None,
            c_l: None,
            gamma: Some(0.01),
            sigma: 0.0,
            mu: None,
            friction: Friction::Optimize,
            axes: vec![AxisSpec::new(AxisName::Kappa, 3.0, 3.0, 1, Scale::Linear)],
            seed: 0,
        }
    }

    #[test]
    fn axis_values() {
        let a = AxisSpec::new(AxisName::L, 1e-3, 1.0, 4, Scale::Log);
        let v = a.values();
        assert!((v[1] - 1e-2).abs() < 1e-15 && (v[3] - 1.0).abs() < 1e-15);
        let a = AxisSpec::new(AxisName::Sigma, 0.0, 3.0, 4, Scale::Linear);
        assert_eq!(a.values(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(AxisSpec::new(AxisName::Sigma, 2.0, 3.0, 1, Scale::Linear).values(), vec![2.0]);
    }

    #[test]
    fn row_major_order() {
        let cfg = figure_config(Figure::One, 3);
        let pts = cfg.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0].l, pts[2].l);
        assert_ne!(pts[2].l, pts[3].l);
        assert_eq!(pts[1].c_l / pts[1].l, 5.5);
    }

    #[test]
    fn flat_cell_favours_momentum() {
        let cells = discrete_cells(&single_cell(), Execution::Serial).unwrap();
        assert_eq!(cells.len(), 1);
        let c = &cells[0];
        assert!(c.r_msgd().unwrap() > c.r_sgd, "{c:?}");
        assert_eq!(c.winner, Winner::Msgd);
    }

    #[test]
    fn winner_tracks_sgd_divergence() {
        let mut cfg = single_cell();
        cfg.sigma = 100.0;
        cfg.l = Some(0.001);
        cfg.axes = vec![AxisSpec::new(AxisName::Kappa, 3.9, 4.1, 2, Scale::Linear)];
        let cells = discrete_cells(&cfg, Execution::Serial).unwrap();
        assert_eq!(cells[0].winner == Winner::SgdDivergent, cells[0].rho_sgd >= 1.0);
        assert_eq!(cells[1].winner, Winner::SgdDivergent);
    }

    #[test]
    fn infeasible_cells_leave_r_msgd_empty() {
        let mut cfg = single_cell();
        cfg.friction = Friction::Fixed;
        cfg.mu = Some(1.0);
        cfg.gamma = Some(500.0);
        let cells = discrete_cells(&cfg, Execution::Serial).unwrap();
        assert!(cells[0].certificate.is_none());
        let mut buf = Vec::new();
        write_discrete_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 15);
        assert_eq!(row[9], "");
    }

    #[test]
    fn validation() {
        let mut cfg = single_cell();
        cfg.axes.push(cfg.axes[0].clone());
        assert!(cfg.validate().is_err());
        let mut cfg = single_cell();
        cfg.friction = Friction::Grid;
        assert!(cfg.validate().is_err());
        let mut cfg = single_cell();
        cfg.c_l = Some(1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = single_cell();
        cfg.axes[0].n_points = 0;
        assert!(cfg.validate().is_err());
        for fig in [Figure::One, Figure::Two, Figure::Three, Figure::FourA] {
            figure_config(fig, 5).validate().unwrap();
        }
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(single_cell().hash(), single_cell().hash());
        let mut other = single_cell();
        other.seed = 1;
        assert_ne!(single_cell().hash(), other.hash());
    }

    #[test]
    fn sde_rows_are_affine_in_sigma() {
        let rows = sde_rows(&figure_config(Figure::FourA, 7), Execution::Serial).unwrap();
        assert_eq!(rows.len(), 7);
        for w in rows.windows(2) {
            let slope = (w[1].m_sgd - w[0].m_sgd) / (w[1].sigma - w[0].sigma);
            assert!((slope + 0.5).abs() < 1e-12);
        }
    }
}
