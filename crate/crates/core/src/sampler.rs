//! Seedable sampling of exchange-amount distributions.
//!
//! Every stochastic quantity draws from its own PCG64 stream (`pcg64`, 128-bit LCG with the
//! XSL-RR output function, period 2^128). The stream selector is a stable SHA-256 hash of the
//! owning sub-process and flow names, so adding or removing a flow leaves the draws of every
//! other flow untouched.

use rand::distr::{Distribution, Uniform};
use rand_distr::{LogNormal, Normal, Triangular};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid {kind} parameters: {reason}")]
    InvalidParameters { kind: &'static str, reason: String },
    #[error("sample size must be at least 1")]
    EmptySample,
}

/// A univariate distribution for an exchange amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    Point {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Triangular {
        low: f64,
        mode: f64,
        high: f64,
    },
    /// Parameters of the underlying normal.
    Lognormal {
        mu: f64,
        sigma: f64,
    },
}

impl DistributionSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Point { .. } => "point",
            Self::Uniform { .. } => "uniform",
            Self::Normal { .. } => "normal",
            Self::Triangular { .. } => "triangular",
            Self::Lognormal { .. } => "lognormal",
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |reason: &str| SamplerError::InvalidParameters {
            kind: self.kind(),
            reason: reason.to_owned(),
        };
        let params: &[f64] = match self {
            Self::Point { value } => &[*value],
            Self::Uniform { low, high } => &[*low, *high],
            Self::Normal { mean, sd } => &[*mean, *sd],
            Self::Triangular { low, mode, high } => &[*low, *mode, *high],
            Self::Lognormal { mu, sigma } => &[*mu, *sigma],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("parameters must be finite"));
        }
        match *self {
            Self::Uniform { low, high } if low > high => Err(bad("low > high")),
            Self::Triangular { low, mode, high } if !(low <= mode && mode <= high) => {
                Err(bad("requires low <= mode <= high"))
            }
            Self::Normal { sd, .. } if sd <= 0.0 => Err(bad("sd must be > 0")),
            Self::Lognormal { sigma, .. } if sigma <= 0.0 => Err(bad("sigma must be > 0")),
            _ => Ok(()),
        }
    }

    /// Expected value. Used as the deterministic stand-in outside Monte Carlo runs.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Point { value } => value,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Normal { mean, .. } => mean,
            Self::Triangular { low, mode, high } => (low + mode + high) / 3.0,
            Self::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// Whether `x` lies in the support of the distribution.
    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Self::Point { value } => x == value,
            Self::Uniform { low, high } | Self::Triangular { low, high, .. } => low <= x && x <= high,
            Self::Normal { .. } => x.is_finite(),
            Self::Lognormal { .. } => x > 0.0 && x.is_finite(),
        }
    }
}

/// Identifies one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplerStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl SamplerStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream of a flow's exchange amount.
    pub fn for_flow(seed: u64, subprocess: &str, flow: &str) -> Self {
        Self::new(seed, stream_id(subprocess, flow))
    }

    /// Stream of a sub-process amount (the amount of the sub-process in the main process).
    pub fn for_subprocess(seed: u64, subprocess: &str) -> Self {
        Self::new(seed, stream_id(subprocess, ""))
    }

    fn rng(&self) -> Pcg64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.stream_id.to_le_bytes());
        let digest = h.finalize();
        let state = u128::from_le_bytes(digest[..16].try_into().expect("16 bytes"));
        Pcg64::new(state, u128::from(self.stream_id))
    }
}

/// Stable 64-bit identifier of a (sub-process, flow) pair.
pub fn stream_id(subprocess: &str, flow: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(subprocess.as_bytes());
    h.update([0x1f]);
    h.update(flow.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Draws `n` i.i.d. values from `spec` on `stream`.
pub fn sample(spec: &DistributionSpec, n: usize, stream: SamplerStream) -> Result<Vec<f64>, SamplerError> {
    spec.validate()?;
    if n == 0 {
        return Err(SamplerError::EmptySample);
    }
    let mut rng = stream.rng();
    let out = match *spec {
        DistributionSpec::Point { value } => vec![value; n],
        DistributionSpec::Uniform { low, high } if low == high => vec![low; n],
        DistributionSpec::Uniform { low, high } => {
            let d = Uniform::new(low, high).map_err(|e| invalid(spec, e))?;
            draw(&d, n, &mut rng)
        }
        DistributionSpec::Normal { mean, sd } => {
            let d = Normal::new(mean, sd).map_err(|e| invalid(spec, e))?;
            draw(&d, n, &mut rng)
        }
        DistributionSpec::Triangular { low, high, .. } if low == high => vec![low; n],
        DistributionSpec::Triangular { low, mode, high } => {
            let d = Triangular::new(low, high, mode).map_err(|e| invalid(spec, e))?;
            draw(&d, n, &mut rng)
        }
        DistributionSpec::Lognormal { mu, sigma } => {
            let d = LogNormal::new(mu, sigma).map_err(|e| invalid(spec, e))?;
            draw(&d, n, &mut rng)
        }
    };
    Ok(out)
}

fn draw<D: Distribution<f64>>(d: &D, n: usize, rng: &mut Pcg64) -> Vec<f64> {
    (0..n).map(|_| d.sample(rng)).collect()
}

fn invalid(spec: &DistributionSpec, e: impl std::fmt::Display) -> SamplerError {
    SamplerError::InvalidParameters {
        kind: spec.kind(),
        reason: e.to_string(),
    }
}
