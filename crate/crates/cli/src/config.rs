//! Run configuration: defaults, a flat `key = value` config file, and flags
//! layered on top in that order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use drainet_core::estimators::Params;

pub const DEFAULT_P: f64 = 0.5;
pub const DEFAULT_B: f64 = 1.0;
pub const DEFAULT_N: u64 = 50;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICAS: u64 = 10_000;
pub const DEFAULT_T_MAX: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Settings as given by one source; `None` means "not set here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partial {
    pub p: Option<f64>,
    pub b: Option<f64>,
    pub n: Option<u64>,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub t_max: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Partial {
    /// Fields set in `over` win.
    pub fn overlay(self, over: Partial) -> Partial {
        Partial {
            p: over.p.or(self.p),
            b: over.b.or(self.b),
            n: over.n.or(self.n),
            epsilon: over.epsilon.or(self.epsilon),
            alpha: over.alpha.or(self.alpha),
            seed: over.seed.or(self.seed),
            replicas: over.replicas.or(self.replicas),
            t_max: over.t_max.or(self.t_max),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
        }
    }

    pub fn from_file(path: &Path) -> Result<Partial> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Partial> {
        let mut cfg = Partial::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value, got {raw:?}", i + 1);
            };
            let (key, value) = (key.trim().replace('-', "_"), value.trim());
            let bad = |e: &dyn std::fmt::Display| anyhow::anyhow!("line {}: bad value for {key}: {e}", i + 1);
            match key.as_str() {
                "p" => cfg.p = Some(value.parse().map_err(|e| bad(&e))?),
                "b" => cfg.b = Some(value.parse().map_err(|e| bad(&e))?),
                "n" => cfg.n = Some(value.parse().map_err(|e| bad(&e))?),
                "epsilon" => cfg.epsilon = Some(value.parse().map_err(|e| bad(&e))?),
                "alpha" => cfg.alpha = Some(value.parse().map_err(|e| bad(&e))?),
                "seed" => cfg.seed = Some(value.parse().map_err(|e| bad(&e))?),
                "replicas" => cfg.replicas = Some(value.parse().map_err(|e| bad(&e))?),
                "t_max" => cfg.t_max = Some(value.parse().map_err(|e| bad(&e))?),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "format" => cfg.format = Some(Format::from_str(value, true).map_err(|e| bad(&e))?),
                _ => bail!("line {}: unknown key {key:?}", i + 1),
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: f64,
    pub b: f64,
    pub scale: Scale,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub replicas: u64,
    pub t_max: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Exactly one of `n` and `ε` fixes the scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    N(u64),
    Epsilon(f64),
}

impl RunConfig {
    pub fn resolve(cfg: Partial) -> Result<RunConfig> {
        let scale = match (cfg.n, cfg.epsilon) {
            (Some(_), Some(_)) => bail!("give either n or epsilon, not both"),
            (Some(n), None) => Scale::N(n),
            (None, Some(e)) => Scale::Epsilon(e),
            (None, None) => Scale::N(DEFAULT_N),
        };
        let run = RunConfig {
            p: cfg.p.unwrap_or(DEFAULT_P),
            b: cfg.b.unwrap_or(DEFAULT_B),
            scale,
            alpha: cfg.alpha,
            seed: cfg.seed.unwrap_or(DEFAULT_SEED),
            replicas: cfg.replicas.unwrap_or(DEFAULT_REPLICAS),
            t_max: cfg.t_max.unwrap_or(DEFAULT_T_MAX),
            out: cfg.out,
            format: cfg.format.unwrap_or(Format::Csv),
        };
        if run.replicas == 0 {
            bail!("replicas must be at least 1");
        }
        if run.t_max < 2 {
            bail!("t-max must be at least 2");
        }
        if !(run.b >= 0.0) || !run.b.is_finite() {
            bail!("b must be a non-negative number, got {}", run.b);
        }
        if let Some(a) = run.alpha {
            if !(a > 0.0) || !a.is_finite() {
                bail!("alpha must be positive, got {a}");
            }
        }
        if let Scale::N(0) = run.scale {
            bail!("n must be at least 1");
        }
        run.params(1.0)?;
        Ok(run)
    }

    /// Model parameters, with `default_alpha` used when none was given.
    pub fn params(&self, default_alpha: f64) -> Result<Params> {
        let alpha = self.alpha.unwrap_or(default_alpha);
        let params = match self.scale {
            Scale::N(n) => Params::new(self.p, self.b, n, alpha, self.seed)?,
            Scale::Epsilon(eps) => {
                // n is implied by ε = b / n^α; it only sets the space-time scaling
                let implied = (self.b / eps).powf(1.0 / alpha).round();
                let n = if implied.is_finite() && implied >= 1.0 {
                    implied as u64
                } else {
                    1
                };
                Params::with_epsilon(self.p, self.b, n, eps, self.seed)?
            }
        };
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_overlay() {
        let file = Partial::parse("# comment\np = 0.3\nt-max=500\nformat = json\n").unwrap();
        assert_eq!(file.p, Some(0.3));
        assert_eq!(file.t_max, Some(500));
        assert_eq!(file.format, Some(Format::Json));
        let flags = Partial {
            p: Some(0.7),
            ..Partial::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.p, Some(0.7));
        assert_eq!(merged.t_max, Some(500));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Partial::parse("p 0.3").is_err());
        assert!(Partial::parse("q = 1").is_err());
        assert!(Partial::parse("p = x").is_err());
    }

    #[test]
    fn defaults_resolve() {
        let run = RunConfig::resolve(Partial::default()).unwrap();
        assert_eq!(run.scale, Scale::N(50));
        let params = run.params(1.0).unwrap();
        assert_eq!(params.epsilon, 1.0 / 50.0);
        assert_eq!(run.replicas, 10_000);
    }

    #[test]
    fn validation() {
        let bad = |c: Partial| RunConfig::resolve(c).is_err();
        assert!(bad(Partial {
            p: Some(1.5),
            ..Partial::default()
        }));
        assert!(bad(Partial {
            n: Some(10),
            epsilon: Some(0.1),
            ..Partial::default()
        }));
        assert!(bad(Partial {
            replicas: Some(0),
            ..Partial::default()
        }));
        assert!(bad(Partial {
            epsilon: Some(2.0),
            ..Partial::default()
        }));
    }

    #[test]
    fn epsilon_implies_n() {
        let run = RunConfig::resolve(Partial {
            epsilon: Some(0.05),
            ..Partial::default()
        })
        .unwrap();
        assert_eq!(run.params(1.0).unwrap().n, 20);
        assert_eq!(run.params(1.0).unwrap().epsilon, 0.05);
    }
}
