//! Run configuration: one JSON document, unknown keys rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bowen_core::charts::EPS1;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Linearize,
    Distortion,
    Spectrum,
    Splitting,
    Full,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Linearize => "linearize",
            Suite::Distortion => "distortion",
            Suite::Spectrum => "spectrum",
            Suite::Splitting => "splitting",
            Suite::Full => "full",
        }
    }

    /// The suites a run executes, in order.
    pub fn parts(self) -> Vec<Suite> {
        match self {
            Suite::Full => vec![Suite::Linearize, Suite::Distortion, Suite::Spectrum, Suite::Splitting],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "linearize" => Ok(Suite::Linearize),
            "distortion" => Ok(Suite::Distortion),
            "spectrum" => Ok(Suite::Spectrum),
            "splitting" => Ok(Suite::Splitting),
            "full" => Ok(Suite::Full),
            _ => Err(ConfigError(format!("unknown suite `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl SystemSpec {
    fn allowed(&self) -> Result<&'static [&'static str], ConfigError> {
        match self.name.as_str() {
            "cat" => Ok(&[]),
            "pcat" | "prod4" => Ok(&["eta"]),
            "solenoid" => Ok(&["a", "lambda"]),
            other => Err(ConfigError(format!("unknown system `{other}`"))),
        }
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    /// Split systems carry `E^u = E1 ⊕ E2`.
    pub fn is_split(&self) -> bool {
        self.name == "prod4"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub suite: Option<Suite>,
    pub eps: f64,
    pub delta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub p_max: usize,
    pub horizon: usize,
    pub centers: usize,
    pub budget: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Probes per center for the linearization suite.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Pinching threshold for the spectrum verdicts.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Block exponent; chosen from the measured spectrum when absent.
    #[serde(default)]
    pub block: Option<usize>,
    /// Number of points in the δ grid of `shrink_delta`.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_rho() -> f64 {
    0.5
}

fn default_probes() -> usize {
    16
}

fn default_alpha() -> f64 {
    0.5
}

fn default_grid() -> usize {
    20
}

/// Largest supported order of the linearization.
pub const P_CAP: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Settles the suite against the one named on the command line.
    pub fn resolve_suite(&mut self, cli: Suite) -> Result<Suite, ConfigError> {
        match self.suite {
            Some(s) if s != cli => Err(ConfigError(format!("config names suite `{s}` but `{cli}` was requested"))),
            _ => {
                self.suite = Some(cli);
                Ok(cli)
            }
        }
    }

    pub fn suite(&self) -> Suite {
        self.suite.unwrap_or(Suite::Full)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let allowed = self.system.allowed()?;
        if let Some(k) = self.system.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ConfigError(format!("system `{}` has no parameter `{k}`", self.system.name)));
        }
        if self.system.params.values().any(|v| !v.is_finite()) {
            return Err(ConfigError("system parameters must be finite".into()));
        }
        if !(self.delta > 0.0 && self.delta <= self.eps && self.eps <= EPS1) {
            return Err(ConfigError(format!("need 0 < delta <= eps <= {EPS1}, got delta = {}, eps = {}", self.delta, self.eps)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError(format!("rho = {} outside (0, 1)", self.rho)));
        }
        for (name, v) in [
            ("p_max", self.p_max),
            ("horizon", self.horizon),
            ("centers", self.centers),
            ("budget", self.budget),
            ("probes", self.probes),
            ("grid", self.grid),
        ] {
            if v < 1 {
                return Err(ConfigError(format!("{name} must be at least 1")));
            }
        }
        if self.block == Some(0) {
            return Err(ConfigError("block must be at least 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(ConfigError("alpha must be finite".into()));
        }
        let parts = self.suite().parts();
        if parts.contains(&Suite::Linearize) && self.p_max > P_CAP {
            return Err(ConfigError(format!("p_max = {} above the cap {P_CAP}", self.p_max)));
        }
        if (parts.contains(&Suite::Spectrum) || parts.contains(&Suite::Splitting)) && self.horizon < 10 {
            return Err(ConfigError(format!("horizon = {} below 10", self.horizon)));
        }
        if self.suite() == Suite::Splitting && !self.system.is_split() {
            return Err(ConfigError(format!("system `{}` has no dominated splitting", self.system.name)));
        }
        if parts.contains(&Suite::Splitting) && self.system.is_split() {
            if self.centers < 10 {
                return Err(ConfigError("the splitting suite needs at least 10 centers".into()));
            }
            if self.p_max > 2 * self.horizon {
                return Err(ConfigError("p_max must not exceed twice the horizon".into()));
            }
        }
        Ok(())
    }
}
