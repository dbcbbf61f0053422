use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imagecore::Dtype;
use crate::keyvalue::{format_triple, KeyValues};

/// Which filter drives the non-root cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Spatial particle filter: cells are predicted from their already-filtered tree parent.
    Spf,
    /// Independent standard particle filter per cell.
    Pf,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spf" => Ok(Method::Spf),
            "pf" => Ok(Method::Pf),
            other => Err(Error::Config(format!("unknown method {other:?} (expected spf or pf)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Spf => "spf",
            Method::Pf => "pf",
        })
    }
}

/// Tracking parameters. Lengths are in physical units (z scaled).
#[derive(Clone, Debug, PartialEq)]
pub struct TrackConfig {
    /// Particles per cell.
    pub particles: usize,
    /// Weight of the previous-frame relative position versus the reference one.
    pub alpha: f64,
    /// Per-axis noise std of the spatial proposal.
    pub sigma_step: [f64; 3],
    /// Per-axis std of the random-walk dynamics of the root (and of every cell under [`Method::Pf`]).
    pub sigma_root: [f64; 3],
    /// Collision radius of the rejection step.
    pub lambda_rej: f64,
    /// Likelihood window half widths `(w1, w2, w3)` in voxels.
    pub window: [usize; 3],
    /// Likelihood variance; `None` means `0.1 · max²` of the volume dtype.
    pub sigma_lik2: Option<f64>,
    /// Proposal attempts per particle before the last candidate is accepted.
    pub max_reject: usize,
    pub seed: u64,
    /// Frame whose relative positions the spatial proposal restores toward.
    pub ref_frame: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            particles: 1000,
            alpha: 0.6,
            sigma_step: [0.6, 0.6, 0.03],
            sigma_root: [3.0, 3.0, 0.3],
            lambda_rej: 4.5,
            window: [4, 3, 2],
            sigma_lik2: None,
            max_reject: 10,
            seed: 0,
            ref_frame: 0,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.particles == 0 {
            return bad("particles must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self
            .sigma_step
            .iter()
            .chain(&self.sigma_root)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return bad("noise standard deviations must be finite and >= 0".into());
        }
        if !(self.lambda_rej.is_finite() && self.lambda_rej >= 0.0) {
            return bad(format!("lambda_rej must be >= 0, got {}", self.lambda_rej));
        }
        if let Some(s) = self.sigma_lik2 {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("sigma_lik2 must be positive, got {s}"));
            }
        }
        if self.max_reject == 0 {
            return bad("max_reject must be >= 1".into());
        }
        Ok(())
    }

    pub fn sigma_lik2_for(&self, dtype: Dtype) -> f64 {
        self.sigma_lik2
            .unwrap_or_else(|| 0.1 * (dtype.max_value() as f64).powi(2))
    }

    /// Applies every recognized key, leaving unknown ones in `kv`.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(v) = kv.take("particles")? {
            self.particles = v;
        }
        if let Some(v) = kv.take("alpha")? {
            self.alpha = v;
        }
        if let Some(v) = kv.take_triple("sigma_step")? {
            self.sigma_step = v;
        }
        if let Some(v) = kv.take_triple("sigma_root")? {
            self.sigma_root = v;
        }
        if let Some(v) = kv.take("lambda_rej")? {
            self.lambda_rej = v;
        }
        if let Some(v) = kv.take_triple("window")? {
            self.window = v;
        }
        if let Some(v) = kv.take::<String>("sigma_lik2")? {
            self.sigma_lik2 = match v.as_str() {
                "auto" => None,
                s => Some(s.parse().map_err(|e| Error::Config(format!("sigma_lik2: {e}")))?),
            };
        }
        if let Some(v) = kv.take("max_reject")? {
            self.max_reject = v;
        }
        if let Some(v) = kv.take("seed")? {
            self.seed = v;
        }
        if let Some(v) = kv.take("ref_frame")? {
            self.ref_frame = v;
        }
        Ok(())
    }

    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let mut cfg = TrackConfig::default();
        cfg.apply(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key = value` lines accepted back by [`from_key_values`](Self::from_key_values).
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("particles".into(), self.particles.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("sigma_step".into(), format_triple(&self.sigma_step)),
            ("sigma_root".into(), format_triple(&self.sigma_root)),
            ("lambda_rej".into(), self.lambda_rej.to_string()),
            ("window".into(), format_triple(&self.window)),
            (
                "sigma_lik2".into(),
                self.sigma_lik2.map_or_else(|| "auto".to_string(), |s| s.to_string()),
            ),
            ("max_reject".into(), self.max_reject.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("ref_frame".into(), self.ref_frame.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_roundtrip() {
        let cfg = TrackConfig {
            particles: 17,
            sigma_lik2: Some(123.5),
            window: [2, 2, 1],
            ..TrackConfig::default()
        };
        let text: String = cfg.to_key_values().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let back = TrackConfig::from_key_values(KeyValues::parse("t", &text).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut TrackConfig)| {
            let mut c = TrackConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.alpha = 1.0));
        assert!(bad(|c| c.alpha = 0.0));
        assert!(bad(|c| c.particles = 0));
        assert!(bad(|c| c.sigma_root[1] = -1.0));
        assert!(bad(|c| c.max_reject = 0));
        assert!(TrackConfig::default().validate().is_ok());
        assert!(TrackConfig::from_key_values(KeyValues::parse("t", "particle = 5\n").unwrap()).is_err());
    }

    #[test]
    fn default_likelihood_variance_tracks_dtype() {
        let c = TrackConfig::default();
        assert_eq!(c.sigma_lik2_for(Dtype::U8), 0.1 * 255.0 * 255.0);
    }
}
