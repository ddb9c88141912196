//! Command-line parameters, experiment config files and range validation.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Parameters shared by every subcommand. A config file (`--config`) supplies the same
/// fields as JSON; flags given on the command line take precedence.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// JSON experiment config with any of these fields.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Model-class file (schema decdim/v1).
    #[arg(long)]
    pub class: Option<PathBuf>,
    /// Auxiliary JSON input for table-driven bounds (general, fano, mixmix).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// What to compute: a DEC variant for `dec`, a bound for `bound`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Sub-optimality level Δ.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Quantile level δ.
    #[arg(long)]
    pub quantile: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    /// Number of seeds for simulation.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Grid: comma list "a,b,c" or range "start:stop:step".
    #[arg(long)]
    pub grid: Option<String>,
    /// Output directory; standard output when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub mc: Option<usize>,
    /// Certificate slack above which a result is flagged as budget-exhausted.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Reference: "member:K", "uniform", "mixture:w0,w1,..", "file" (the class file's
    /// reference) or "hull".
    #[arg(long)]
    pub reference: Option<String>,
    /// Algorithm: ucb, reduction, exo, uniform or fixed:K.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Index of the true model for simulation.
    #[arg(long)]
    pub model: Option<usize>,
    /// Confidence δ of the reduction algorithm.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// KL radius C_KL; defaults to the class file's reference.
    #[arg(long)]
    pub c_kl: Option<f64>,
    /// Linear-bandit dimension for fano-dmso.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Prior-radius constant for the linear-bandit Fano bound.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Mutual-information cap for the finite fano-dmso mode.
    #[arg(long)]
    pub mi_cap: Option<f64>,
    /// Write per-seed trace CSVs from `simulate`.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub traces: bool,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.take(); } )*
    };
}

impl Params {
    /// Fills unset fields from the config file, if one was given.
    pub fn resolve(mut self) -> anyhow::Result<Self> {
        if let Some(path) = self.config.clone() {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
            let mut file: Params = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            for p in [&mut file.class, &mut file.input].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            merge_fields!(self, file; class, input, kind, delta, eps, gamma, quantile, horizon, seeds, master_seed,
                grid, format, mc, tol, reference, algorithm, model, confidence, c_kl, dim, c0, mi_cap);
            self.traces |= file.traces;
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let positive = |name: &str, v: Option<f64>| -> anyhow::Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => bail!("--{name} must be positive and finite, got {x}"),
                _ => Ok(()),
            }
        };
        positive("delta", self.delta)?;
        positive("eps", self.eps)?;
        positive("gamma", self.gamma)?;
        positive("tol", self.tol)?;
        positive("c-kl", self.c_kl)?;
        positive("c0", self.c0)?;
        if let Some(x) = self.mi_cap {
            if !(x >= 0.0 && x.is_finite()) {
                bail!("--mi-cap must be nonnegative, got {x}");
            }
        }
        for (name, v) in [("quantile", self.quantile), ("confidence", self.confidence)] {
            if let Some(x) = v {
                if !(x > 0.0 && x < 1.0) {
                    bail!("--{name} must lie in (0, 1), got {x}");
                }
            }
        }
        for (name, v) in [("T", self.horizon), ("seeds", self.seeds), ("mc", self.mc)] {
            if v == Some(0) {
                bail!("--{name} must be at least 1");
            }
        }
        if let Some(g) = &self.grid {
            parse_grid(g)?;
        }
        Ok(())
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    pub fn require<T: Copy>(v: Option<T>, name: &str) -> anyhow::Result<T> {
        v.with_context(|| format!("--{name} is required"))
    }
}

/// Parses "a,b,c" or "start:stop:step" (inclusive of stop up to rounding).
pub fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let spec = spec.trim();
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid number '{s}'")))
            .collect::<anyhow::Result<_>>()?;
        let [start, stop, step] = parts[..] else { bail!("range grid must be start:stop:step") };
        if !(step > 0.0) || stop < start {
            bail!("range grid needs step > 0 and stop ≥ start");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 100_000 {
            bail!("grid has more than 100000 points");
        }
        // Rounded to 12 decimals so that 0.05 + 2·0.05 prints as 0.15.
        (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid number '{s}'")))
            .collect::<anyhow::Result<_>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        bail!("grid must hold finite numbers");
    }
    Ok(values)
}
