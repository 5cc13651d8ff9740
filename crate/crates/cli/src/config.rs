//! JSON run configuration and oracle selection.

use std::path::{Path, PathBuf};

use regionwise::finetune::FineTuneMode;
use regionwise::io::load_image;
use regionwise::oracle::{LinearPatchClassifier, LinearPatchSpec, LookupClassifier, RemoteClassifier};
use regionwise::{
    BottomUpConfig, Error, Oracle, ProbabilityVector, Result, ShapeSearch, TopDownConfig,
    TransformSpec,
};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub oracle: Option<OracleConfig>,
    pub top_down: TopDownConfig,
    pub bottom_up: BottomUpConfig,
    pub shapes: ShapeSearch,
    /// Transforms appended to the base image to form the scoring ensemble.
    pub ensemble: Vec<TransformSpec>,
    pub finetune: FineTuneConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneConfig {
    pub moves: Vec<usize>,
    pub mode: FineTuneMode,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            moves: vec![1, 2],
            mode: FineTuneMode::Jittered,
        }
    }
}

/// Built-in synthetic oracles. Paths are relative to the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    LinearPatch {
        spec: PathBuf,
    },
    /// Answers by exact 8-bit match against stored images.
    Lookup {
        width: usize,
        height: usize,
        fallback: Vec<f64>,
        #[serde(default)]
        entries: Vec<LookupEntry>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookupEntry {
    pub image: PathBuf,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub config: Config,
    dir: PathBuf,
}

impl Loaded {
    pub fn read(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let config: Config = serde_json::from_str(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, dir })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// `--oracle-url` (or its environment fallback) wins over the config's
    /// synthetic oracle.
    pub fn oracle(&self, url: Option<&str>) -> Result<Oracle> {
        if let Some(url) = url.filter(|u| !u.is_empty()) {
            return Ok(Oracle::new(RemoteClassifier::connect(url)?));
        }
        match &self.config.oracle {
            None => Err(Error::InvalidConfig(
                "no oracle: pass --oracle-url, set the environment variable, or name one in --config"
                    .into(),
            )),
            Some(OracleConfig::LinearPatch { spec }) => {
                let spec = LinearPatchSpec::load(self.resolve(spec))?;
                Ok(Oracle::new(LinearPatchClassifier::new(spec)?))
            }
            Some(OracleConfig::Lookup {
                width,
                height,
                fallback,
                entries,
            }) => {
                let mut lookup = LookupClassifier::quantized(
                    (*width, *height),
                    ProbabilityVector::new(fallback.clone())?,
                );
                for e in entries {
                    let img = load_image(self.resolve(&e.image))?;
                    lookup.insert(img, ProbabilityVector::new(e.probs.clone())?)?;
                }
                Ok(Oracle::new(lookup))
            }
        }
    }
}
