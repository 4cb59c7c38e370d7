//! TOML experiment configuration. Every field has a default, so a
//! missing file or empty table still yields a runnable setup; flags
//! override file values, and validation runs before any work starts.

use crate::CliError;
use biosketch::analysis::Scenario;
use biosketch::deephash::FusionMode;
use biosketch::pipeline::SketchPolicy;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: ExperimentSection,
    pub population: PopulationSection,
    pub code: CodeSection,
    pub eval: EvalSection,
    pub privacy: PrivacySection,
    pub unlink: UnlinkSection,
    pub retrieval: RetrievalSection,
    pub toy: ToySection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub seed: u64,
    pub out_dir: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            name: "experiment".into(),
            seed: 7,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSection {
    /// "synthetic" or "ingest".
    pub source: String,
    /// Feature file for the ingest source (.jsonl or .csv).
    pub path: Option<String>,
    pub subjects: usize,
    pub samples_per_subject: usize,
    /// Feature length J in bits (synthetic source).
    pub j: usize,
    pub p_genuine: f64,
    pub p_impostor: f64,
    /// "uniform" or "ramp" (mean p_genuine, linearly increasing noise).
    pub channel: String,
}

impl Default for PopulationSection {
    fn default() -> Self {
        PopulationSection {
            source: "synthetic".into(),
            path: None,
            subjects: 50,
            samples_per_subject: 20,
            j: 1024,
            p_genuine: 0.05,
            p_impostor: 0.5,
            channel: "uniform".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSection {
    pub n: usize,
    pub k: usize,
    /// Dimensions swept by the security curve, strictly increasing.
    pub k_sweep: Vec<usize>,
    /// Selected template size in bits. Optional because it is fully
    /// determined: it must equal 8N and exists only as a cross-check.
    pub g: Option<usize>,
    /// "fallback" (systematic message part on decode failure) or "strict".
    pub policy: String,
}

impl Default for CodeSection {
    fn default() -> Self {
        CodeSection {
            n: 96,
            k: 13,
            k_sweep: vec![7, 10, 13],
            g: None,
            policy: "fallback".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub analyses: Vec<String>,
    /// "stolen" or "unknown": the key the impostor presents.
    pub scenario: String,
    pub trials: usize,
    pub gs_probes_per_subject: usize,
    pub gs_impostor_probes: usize,
    pub far_target: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            analyses: vec![
                "distributions".into(),
                "eer".into(),
                "roc".into(),
                "gs".into(),
                "privacy".into(),
                "unlink".into(),
                "retrieval".into(),
            ],
            scenario: "stolen".into(),
            trials: 400,
            gs_probes_per_subject: 10,
            gs_impostor_probes: 500,
            far_target: 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacySection {
    /// Defaults to the population's J.
    pub j: Option<usize>,
    /// Defaults to the code's 8N.
    pub n_bits: Option<usize>,
    /// Defaults to the code's 8K.
    pub k_bits: Option<usize>,
    pub aligned_step: usize,
}

impl Default for PrivacySection {
    fn default() -> Self {
        PrivacySection {
            j: None,
            n_bits: None,
            k_bits: None,
            aligned_step: 8,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnlinkSection {
    pub databases: usize,
    pub bins: usize,
    pub omega: f64,
    pub max_non_mated: usize,
}

impl Default for UnlinkSection {
    fn default() -> Self {
        UnlinkSection {
            databases: 3,
            bins: 50,
            omega: 1.0,
            max_non_mated: 2000,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub r_cutoff: usize,
    pub radius: u32,
    pub k_points: Vec<usize>,
    pub queries_per_subject: usize,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection {
            r_cutoff: 1000,
            radius: 2,
            k_points: vec![1, 5, 10, 25, 50],
            queries_per_subject: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub classes: usize,
    pub per_class: usize,
    pub d_in_face: usize,
    pub d_in_iris: usize,
    pub d_face: usize,
    pub d_iris: usize,
    pub d_joint: usize,
    pub hash_bits: usize,
    /// "fca" or "bla".
    pub fusion: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub spread: f64,
    pub schedule: Vec<f64>,
    pub lr: f64,
    pub momentum: f64,
    pub max_epochs_per_stage: usize,
}

impl Default for ToySection {
    fn default() -> Self {
        ToySection {
            classes: 8,
            per_class: 16,
            d_in_face: 16,
            d_in_iris: 16,
            d_face: 12,
            d_iris: 12,
            d_joint: 24,
            hash_bits: 48,
            fusion: "fca".into(),
            alpha: 8.0,
            beta: 2.0,
            gamma: 2.0,
            lambda: 1e-3,
            spread: 0.3,
            schedule: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            lr: 0.05,
            momentum: 0.9,
            max_epochs_per_stage: 400,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        if let Some(g) = self.code.g {
            if g != 8 * self.code.n {
                return usage(format!(
                    "code.g = {g} but the template size must equal 8N = {}",
                    8 * self.code.n
                ));
            }
        }
        if self.code.k == 0 || self.code.k >= self.code.n {
            return usage(format!(
                "code dimensions ({}, {}) need 0 < K < N",
                self.code.n, self.code.k
            ));
        }
        if self.code.n > 255 {
            return usage(format!("code length {} exceeds the 8-bit field", self.code.n));
        }
        match self.population.source.as_str() {
            "synthetic" => {
                if 8 * self.code.n > self.population.j {
                    return usage(format!(
                        "template needs {} bits but features carry only {}",
                        8 * self.code.n,
                        self.population.j
                    ));
                }
            }
            "ingest" => {
                if self.population.path.is_none() {
                    return usage("population.source = \"ingest\" requires population.path".into());
                }
            }
            other => return usage(format!("unknown population source {other:?}")),
        }
        self.scenario()?;
        self.policy()?;
        self.fusion()?;
        if !matches!(self.population.channel.as_str(), "uniform" | "ramp") {
            return usage(format!("unknown channel {:?}", self.population.channel));
        }
        Ok(())
    }

    /// Referenced input paths must exist before any work starts. Run by
    /// the commands that will read them; train-toy creates the code file
    /// this same config may point eval at, so it skips the check.
    pub fn validate_paths(&self) -> Result<(), CliError> {
        if self.population.source == "ingest" {
            let path = self.population.path.as_deref().expect("validated");
            if !Path::new(path).exists() {
                return Err(CliError::Usage(format!(
                    "population.path {path} does not exist"
                )));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        match self.eval.scenario.as_str() {
            "stolen" => Ok(Scenario::StolenKey),
            "unknown" => Ok(Scenario::UnknownKey),
            other => Err(CliError::Usage(format!("unknown scenario {other:?}"))),
        }
    }

    pub fn policy(&self) -> Result<SketchPolicy, CliError> {
        parse_policy(&self.code.policy)
    }

    pub fn fusion(&self) -> Result<FusionMode, CliError> {
        match self.toy.fusion.as_str() {
            "fca" => Ok(FusionMode::Fca),
            "bla" => Ok(FusionMode::Bla),
            other => Err(CliError::Usage(format!("unknown fusion mode {other:?}"))),
        }
    }
}

pub fn parse_policy(name: &str) -> Result<SketchPolicy, CliError> {
    match name {
        "fallback" => Ok(SketchPolicy::SystematicFallback),
        "strict" => Ok(SketchPolicy::Strict),
        other => Err(CliError::Usage(format!("unknown sketch policy {other:?}"))),
    }
}
