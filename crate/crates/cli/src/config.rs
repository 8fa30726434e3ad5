//! Run configuration, read from a single TOML file. Every section and field
//! is optional; omitted values take the library defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use codeplexity::ast::{ApiWhitelist, Canonicalization};
use codeplexity::evaluation::{default_grid, EloParams};
use codeplexity::model::lbfgs::LbfgsOptions;
use codeplexity::model::FitOptions;
use codeplexity::pipeline::HttpClientConfig;
use codeplexity::significance::SignificanceOptions;
use codeplexity::subtree::MiningParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub canonicalization: CanonSection,
    pub mining: MiningParams,
    pub regression: RegressionSection,
    pub analysis: SignificanceOptions,
    pub peg: PegSection,
    pub elo: EloParams,
    pub client: ClientSection,
    /// Directory relative paths are resolved against; not part of the digest.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonSection {
    /// One API name per line; the built-in list when absent.
    pub api_whitelist: Option<PathBuf>,
    pub strict: bool,
}

impl Default for CanonSection {
    fn default() -> Self {
        CanonSection {
            api_whitelist: None,
            strict: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSection {
    #[serde(rename = "reg_C")]
    pub reg_c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RegressionSection {
    fn default() -> Self {
        let s = LbfgsOptions::default();
        RegressionSection {
            reg_c: FitOptions::default().reg_c,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PegSection {
    pub alpha_grid: Vec<f64>,
}

impl Default for PegSection {
    fn default() -> Self {
        PegSection {
            alpha_grid: default_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSection {
    pub kind: ClientKind,
    /// Recorded completions for the stub, keyed by prompt hash.
    pub stub_fixture: Option<PathBuf>,
    pub questions_per_script: usize,
    pub http: HttpClientConfig,
    pub max_in_flight: usize,
    /// API description shown to the program generator; built-in when absent.
    pub api_spec: Option<PathBuf>,
    pub unclassified_note: bool,
}

impl Default for ClientSection {
    fn default() -> Self {
        ClientSection {
            kind: ClientKind::Stub,
            stub_fixture: None,
            questions_per_script: 2,
            http: HttpClientConfig::default(),
            max_in_flight: 4,
            api_spec: None,
            unclassified_note: false,
        }
    }
}

impl RunConfig {
    /// Reads and validates a TOML file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mining;
        if m.max_nodes == 0 || m.min_support == 0 || m.per_node_cap == 0 {
            bail!("mining: max_nodes, min_support and per_node_cap must be positive");
        }
        let r = &self.regression;
        if !(r.reg_c > 0.0 && r.reg_c.is_finite()) || r.tolerance.is_nan() || r.tolerance <= 0.0 || r.max_iterations == 0 {
            bail!("regression: reg_C, tolerance and max_iterations must be positive");
        }
        if !(self.analysis.alpha > 0.0 && self.analysis.alpha < 1.0) {
            bail!("analysis: alpha must lie in (0, 1)");
        }
        if self.peg.alpha_grid.is_empty() || self.peg.alpha_grid.iter().any(|a| !(*a > 0.0 && *a <= 0.5)) {
            bail!("peg: alpha_grid must be non-empty with values in (0, 0.5]");
        }
        if !(self.elo.beta > 0.0 && self.elo.k > 0.0 && self.elo.base.is_finite()) {
            bail!("elo: beta and k must be positive");
        }
        if self.client.max_in_flight == 0 || self.client.questions_per_script == 0 {
            bail!("client: max_in_flight and questions_per_script must be positive");
        }
        if self.client.http.timeout_secs.is_nan() || self.client.http.timeout_secs <= 0.0 {
            bail!("client.http: timeout_secs must be positive");
        }
        Ok(())
    }

    /// A path from the file, taken relative to the file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// SHA-256 of the compact JSON form; reports carry it. Paths enter as
    /// written, so the digest does not depend on the working directory.
    pub fn digest(&self) -> String {
        codeplexity::digest::of_json(self)
    }

    pub fn canonicalization(&self) -> Result<Canonicalization> {
        let api_whitelist = match &self.canonicalization.api_whitelist {
            Some(p) => {
                let p = self.resolve(p);
                ApiWhitelist::load(&p).with_context(|| format!("reading whitelist {}", p.display()))?
            }
            None => ApiWhitelist::default(),
        };
        Ok(Canonicalization {
            api_whitelist,
            strict: self.canonicalization.strict,
        })
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            reg_c: self.regression.reg_c,
            solver: LbfgsOptions {
                tolerance: self.regression.tolerance,
                max_iterations: self.regression.max_iterations,
                ..LbfgsOptions::default()
            },
        }
    }
}
