use std::path::{Path, PathBuf};

use gsprt::expfam::{GaussianParams, ParamBox};
use gsprt::{Distribution, LinearFamily};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Finite {
        p0: Distribution,
        gamma: LinearFamily,
        /// Type to project; defaults to `p0`.
        #[serde(default)]
        q: Option<Distribution>,
    },
    Gaussian {
        gamma0: GaussianParams,
        #[serde(rename = "box")]
        bx: ParamBox,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdSpec {
    FirstOrder {
        eps0: f64,
        eps1: f64,
    },
    SecondOrder {
        eps: f64,
        eta0: f64,
        eta1: f64,
    },
    Manual {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HypothesisSpec {
    Named(String),
    Finite { gamma: Distribution },
    Gaussian { gamma: GaussianParams },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Extra alternatives, finite model: probability vectors.
    #[serde(default)]
    pub panel: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub model: Model,
    #[serde(default)]
    pub threshold: Option<ThresholdSpec>,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub n_max: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub hypothesis: Option<HypothesisSpec>,
    #[serde(default)]
    pub record_trajectory: bool,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub clt: CltSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    /// Reads a config file; a missing `model` key means the finite model.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg = Self::parse(&text)?;
        for out in [&cfg.output.csv, &cfg.output.summary].into_iter().flatten() {
            match out.parent() {
                Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
                    return Err(format!("output directory {} does not exist", dir.display()));
                }
                _ => {}
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(obj) = value.as_object_mut() {
            obj.entry("model").or_insert_with(|| "finite".into());
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| e.to_string())?;
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&self) -> Result<(), String> {
        if self.n == Some(0) {
            return Err("n must be positive".into());
        }
        if self.n_max == Some(0) {
            return Err("n_max must be positive".into());
        }
        if self.mc.trials == Some(0) || self.clt.trials == Some(0) {
            return Err("trials must be positive".into());
        }
        if self.mc.workers == Some(0) {
            return Err("workers must be positive".into());
        }
        if let Some(d) = self.clt.delta {
            if !(d > 0.0) {
                return Err("clt.delta must be positive".into());
            }
        }
        match self.threshold {
            Some(ThresholdSpec::FirstOrder { eps0, eps1 }) if !(eps0 > 0.0 && eps1 > 0.0) => {
                Err("eps0 and eps1 must be positive".into())
            }
            Some(ThresholdSpec::SecondOrder { eps, eta0, eta1 })
                if !(eta0 > 0.0 && eta1 > 0.0 && eta0 < eps && eta1 < eps && eps < 1.0) =>
            {
                Err("need 0 < eta0, eta1 < eps < 1".into())
            }
            Some(ThresholdSpec::Manual { a, b }) if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                Err("manual thresholds must be positive and finite".into())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_is_default_model() {
        let cfg = RunConfig::parse(
            r#"{"p0": [0.5, 0.3, 0.2], "gamma": {"w": [[1, 0, 0]], "xi": [0.3], "c0": 0.05},
                "threshold": {"mode": "manual", "A": 1, "B": 2}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.model, Model::Finite { .. }));
        assert!(matches!(cfg.threshold, Some(ThresholdSpec::Manual { a, b }) if a == 1.0 && b == 2.0));
        assert_eq!(cfg.seed, 1);
    }

    #[test]
    fn gaussian_model() {
        let cfg = RunConfig::parse(
            r#"{"model": "gaussian", "gamma0": {"mu": 0, "sigma2": 1},
                "box": {"mu": [0.5, 1.0], "sigma2": [1.5, 2.0]}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.model, Model::Gaussian { bx: ParamBox::MeanVariance { .. }, .. }));
    }

    #[test]
    fn rejects_bad_ranges() {
        let base = r#""p0": [0.5, 0.3, 0.2], "gamma": {"w": [[1, 0, 0]], "xi": [0.3]}"#;
        for extra in [
            r#""n": 0"#,
            r#""threshold": {"mode": "second_order", "eps": 0.2, "eta0": 0.3, "eta1": 0.05}"#,
            r#""threshold": {"mode": "manual", "A": -1, "B": 2}"#,
            r#""mc": {"trials": 0}"#,
        ] {
            assert!(RunConfig::parse(&format!("{{{base}, {extra}}}")).is_err(), "{extra}");
        }
        assert!(RunConfig::parse(r#"{"p0": [0.5, 0.6], "gamma": {"w": [[1, 0]], "xi": [0.3]}}"#).is_err());
        assert!(RunConfig::parse("not json").is_err());
    }
}
