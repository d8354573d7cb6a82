//! TOML configuration documents with `[problem]`, `[sweep]` and `[output]`
//! sections.
//!
//! ```toml
//! [problem]
//! kind = "quadratic"
//! eigenvalues = [0.02, 0.06]
//! sigma = 0.0
//! domain = { type = "ball", center = [0.0, 0.0], radius = 1.0 }
//!
//! [sweep]
//! mode = "discrete-heatmap"
//! gamma = 0.01
//! friction = "optimize"
//! axes = [
//!   { name = "L", min = 1e-3, max = 1.0, n_points = 30, scale = "log" },
//!   { name = "kappa", min = 1.0, max = 10.0, n_points = 30 },
//! ]
//!
//! [output]
//! csv = "fig1.csv"
//! image = "fig1.png"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::landscape::{make_overparam_lsq, make_quadratic, Domain, ProblemSpec};
use crate::sweep::SweepConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Lsq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsqConfig {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub d_in: usize,
    pub d_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsq: Option<LsqConfig>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        let spec = match self.kind {
            ProblemKind::Quadratic => {
                let eig = self
                    .eigenvalues
                    .as_ref()
                    .ok_or_else(|| Error::Config("quadratic problem needs `eigenvalues`".into()))?;
                make_quadratic(eig)?
            }
            ProblemKind::Lsq => {
                let c = self
                    .lsq
                    .as_ref()
                    .ok_or_else(|| Error::Config("lsq problem needs an `lsq` table".into()))?;
                make_overparam_lsq(c.seed, c.n, c.d_in, c.d_out)?.0
            }
        };
        let spec = spec.with_sigma(self.sigma)?;
        match &self.domain {
            Some(d) => spec.with_domain(d.clone()),
            None => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_problem_round_trip() {
        let doc = ConfigDocument::parse(
            r#"
            [problem]
            kind = "quadratic"
            eigenvalues = [0.02, 0.06]
            sigma = 1.5
            domain = { type = "ball", center = [0.0, 0.0], radius = 2.0 }
            "#,
        )
        .unwrap();
        let spec = doc.problem.as_ref().unwrap().build().unwrap();
        assert_eq!((spec.l, spec.c_l, spec.sigma), (0.02, 0.06, 1.5));
        assert!(matches!(spec.domain, Domain::Ball { radius, .. } if radius == 2.0));
        let again = ConfigDocument::parse(&doc.to_toml().unwrap()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn lsq_problem() {
        let doc = ConfigDocument::parse(
            r#"
            [problem]
            kind = "lsq"
            lsq = { seed = 7, N = 2, d_in = 3, d_out = 1 }
            "#,
        )
        .unwrap();
        let spec = doc.problem.unwrap().build().unwrap();
        assert_eq!(spec.dim(), 3);
        assert!(spec.l > 0.0 && spec.c_l >= spec.l);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(ConfigDocument::parse("[problem]\nkind = \"cubic\""), Err(Error::Config(_))));
        let doc = ConfigDocument::parse("[problem]\nkind = \"quadratic\"").unwrap();
        assert!(matches!(doc.problem.unwrap().build(), Err(Error::Config(_))));
        assert!(ConfigDocument::parse("[problem]\nkind = \"quadratic\"\nextra = 1").is_err());
    }
}
