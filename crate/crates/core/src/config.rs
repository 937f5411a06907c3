//! Run configuration. Every tunable of a reconstruction lives here so an
//! emitted config file reproduces a run exactly.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::admm::{DataWeight, Weights};
use crate::dictlearn::HyperParams;
use crate::{Error, Result};

/// Width of the patch similarity kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KernelWidth {
    /// Median within-radius patch distance of the guide image.
    #[default]
    Median,
    Fixed(f64),
}

impl Serialize for KernelWidth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KernelWidth::Median => s.serialize_str("median"),
            KernelWidth::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for KernelWidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = KernelWidth;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"median\" or a positive number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<KernelWidth, E> {
                if v == "median" {
                    Ok(KernelWidth::Median)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<KernelWidth, E> {
                Ok(KernelWidth::Fixed(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<KernelWidth, E> {
                Ok(KernelWidth::Fixed(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<KernelWidth, E> {
                Ok(KernelWidth::Fixed(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

/// Which earlier frame guides the support and dependence of frame `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The reconstruction of frame `t − 1`.
    #[default]
    Prev,
    /// The reconstruction of frame 1.
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Pixels per patch; must be a perfect square.
    pub patch_area: usize,
    /// Dictionary size per group.
    pub num_atoms: usize,
    pub num_groups: usize,
    /// Spatial neighborhood radius in pixels.
    pub radius: f64,
    pub sigma: KernelWidth,
    /// Relative threshold of the reference wavelet support.
    pub support_threshold: f64,
    pub lambda_g: f64,
    pub rho: f64,
    pub lambda: f64,
    /// Replace sampled k-space entries by the measurements.
    pub noiseless: bool,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Sweeps run on a freshly initialized sampler before it is used.
    pub burn_in: usize,
    /// Dictionary-learn on `[re; im]` stacked patches instead of real parts.
    pub complex_patches: bool,
    pub first_rate: f64,
    pub rate: f64,
    pub reference: ReferenceMode,
    pub kmeans_iters: usize,
    pub seed: u64,
    pub hyper: HyperParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            patch_area: 16,
            num_atoms: 128,
            num_groups: 11,
            radius: 13.0,
            sigma: KernelWidth::Median,
            support_threshold: crate::linops::DEFAULT_SUPPORT_THRESHOLD,
            lambda_g: 10.0,
            rho: 1000.0,
            lambda: 1e10,
            noiseless: false,
            max_iters: 100,
            tolerance: 1e-4,
            burn_in: 20,
            complex_patches: true,
            first_rate: 0.4,
            rate: 0.2,
            reference: ReferenceMode::Prev,
            kmeans_iters: 50,
            seed: 0,
            hyper: HyperParams::default(),
        }
    }
}

impl RunConfig {
    pub fn patch_side(&self) -> usize {
        (self.patch_area as f64).sqrt().round() as usize
    }

    pub fn weights(&self) -> Weights {
        Weights {
            lambda_g: self.lambda_g,
            rho: self.rho,
            data: if self.noiseless {
                DataWeight::Noiseless
            } else {
                DataWeight::Finite(self.lambda)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ps = self.patch_side();
        if self.patch_area == 0 || ps * ps != self.patch_area {
            return Err(Error::param(format!(
                "patch_area = {} is not a positive perfect square",
                self.patch_area
            )));
        }
        if self.num_atoms == 0 {
            return Err(Error::param("num_atoms must be at least 1"));
        }
        if self.num_groups == 0 {
            return Err(Error::param("num_groups must be at least 1"));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::param(format!("radius = {} must be ≥ 0", self.radius)));
        }
        if let KernelWidth::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param(format!("sigma = {s} must be > 0")));
            }
        }
        if !(0.0..1.0).contains(&self.support_threshold) {
            return Err(Error::param(format!(
                "support_threshold = {} must lie in [0, 1)",
                self.support_threshold
            )));
        }
        self.weights().validate()?;
        if !(self.tolerance >= 0.0) {
            return Err(Error::param("tolerance must be ≥ 0"));
        }
        for (name, r) in [("first_rate", self.first_rate), ("rate", self.rate)] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::param(format!("{name} = {r} must lie in (0, 1]")));
            }
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::param("seed must fit in 63 bits"));
        }
        self.hyper.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }
}
