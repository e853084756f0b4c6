//! Pipeline configuration, read from a TOML document. Unknown keys are rejected
//! at every level.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use inclusiveness::econometrics::{Effects, GmmModelSpec, InstrumentRecipe, Regressor};
use inclusiveness::multivariate::{IndexOptions, Retention, Weighting};
use inclusiveness::paneldata::{GapPolicy, Polarity, VariableDef, DEFAULT_SHIFT};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Table,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Table]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Long-format CSV; relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub gap_policy: GapPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableEntry {
    pub symbol: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source_tag: String,
    #[serde(default)]
    pub polarity: Polarity,
}

impl From<&VariableEntry> for VariableDef {
    fn from(v: &VariableEntry) -> Self {
        VariableDef {
            symbol: v.symbol.clone(),
            description: v.description.clone(),
            source_tag: v.source_tag.clone(),
            polarity: v.polarity,
        }
    }
}

fn default_shift() -> f64 {
    DEFAULT_SHIFT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformStep {
    Zscore {
        vars: Vec<String>,
    },
    ShiftLog {
        vars: Vec<String>,
        #[serde(default = "default_shift")]
        shift: f64,
    },
}

impl TransformStep {
    pub fn vars(&self) -> &[String] {
        match self {
            TransformStep::Zscore { vars } | TransformStep::ShiftLog { vars, .. } => vars,
        }
    }
}

fn default_index_name() -> String {
    "INCL".into()
}

fn kaiser() -> Retention {
    Retention::Kaiser
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    #[serde(default = "default_index_name")]
    pub name: String,
    pub indicators: Vec<String>,
    #[serde(default = "kaiser")]
    pub retention: Retention,
    #[serde(default = "yes")]
    pub rotate: bool,
    #[serde(default)]
    pub use_rotated_scores: bool,
    #[serde(default)]
    pub weighting: Weighting,
    /// Variable the index must correlate positively with. Defaults to `LFE`
    /// when the schema has it; otherwise the sign is left as computed.
    #[serde(default)]
    pub anchor: Option<String>,
    #[serde(default)]
    pub kmo_ridge: Option<f64>,
}

/// One estimated column of the regression table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default)]
    pub label: Option<String>,
    /// Defaults to the index.
    #[serde(default)]
    pub dependent: Option<String>,
    #[serde(default = "yes")]
    pub lag_dependent: bool,
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default)]
    pub determinants: Vec<Regressor>,
    #[serde(default)]
    pub effects: Option<Effects>,
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default)]
    pub instruments: Option<InstrumentRecipe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSection,
    pub variables: Vec<VariableEntry>,
    #[serde(default)]
    pub transforms: Vec<TransformStep>,
    #[serde(default)]
    pub index: Option<IndexSection>,
    #[serde(default)]
    pub models: Vec<ModelBlock>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io("config", path, &e))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::config("config", format!("{}: {}", path.display(), e.message)))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses and checks a config document. Relative paths stay relative to
    /// the current directory.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError { message: e.to_string() })?;
        cfg.check().map_err(|message| ConfigError { message })?;
        Ok(cfg)
    }

    pub fn input_path(&self) -> PathBuf {
        self.base_dir.join(&self.input.path)
    }

    pub fn default_out_dir(&self) -> PathBuf {
        self.base_dir.join(self.out_dir.as_deref().unwrap_or(Path::new("out")))
    }

    pub fn schema(&self) -> Vec<VariableDef> {
        self.variables.iter().map(VariableDef::from).collect()
    }

    pub fn index_options(&self) -> Option<IndexOptions> {
        let ix = self.index.as_ref()?;
        let anchor = ix.anchor.clone().or_else(|| self.has_symbol("LFE").then(|| "LFE".to_string()));
        Some(IndexOptions {
            name: ix.name.clone(),
            indicators: ix.indicators.clone(),
            retention: ix.retention,
            rotate: ix.rotate,
            use_rotated_scores: ix.use_rotated_scores,
            weighting: ix.weighting,
            anchor,
            kmo_ridge: ix.kmo_ridge,
        })
    }

    pub fn model_specs(&self) -> Vec<GmmModelSpec> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let dependent = m.dependent.clone().unwrap_or_else(|| self.index_name().unwrap_or_default());
                let mut spec = GmmModelSpec::new(&dependent, m.lag_dependent);
                spec.label = m.label.clone().unwrap_or_else(|| format!("({})", i + 1));
                spec.controls = m.controls.clone();
                spec.determinants = m.determinants.clone();
                if let Some(e) = m.effects {
                    spec.effects = e;
                }
                spec.intercept = m.intercept;
                if let Some(r) = &m.instruments {
                    spec.instruments = r.clone();
                }
                spec
            })
            .collect()
    }

    pub fn index_name(&self) -> Option<String> {
        self.index.as_ref().map(|i| i.name.clone())
    }

    fn has_symbol(&self, s: &str) -> bool {
        self.variables.iter().any(|v| v.symbol == s)
    }

    fn check(&self) -> Result<(), String> {
        if self.index.is_none() && self.models.is_empty() {
            return Err("nothing to do: configure an [index] section or at least one [[models]] block".into());
        }
        if self.formats.is_empty() {
            return Err("`formats` is empty".into());
        }
        let mut schema = BTreeSet::new();
        for v in &self.variables {
            let s = v.symbol.trim();
            if s.is_empty() || s == "country" || s == "year" {
                return Err(format!("invalid variable symbol `{}`", v.symbol));
            }
            if !schema.insert(s.to_string()) {
                return Err(format!("variable `{s}` is declared twice"));
            }
        }
        if schema.is_empty() {
            return Err("no variables declared".into());
        }
        let known = |s: &str, what: &str| {
            if schema.contains(s) {
                Ok(())
            } else {
                Err(format!("{what} references unknown variable `{s}`"))
            }
        };
        for (i, t) in self.transforms.iter().enumerate() {
            if t.vars().is_empty() {
                return Err(format!("transform {} lists no variables", i + 1));
            }
            for v in t.vars() {
                known(v, &format!("transform {}", i + 1))?;
            }
        }
        let mut estimable = schema.clone();
        if let Some(ix) = &self.index {
            if schema.contains(&ix.name) {
                return Err(format!("index name `{}` collides with a declared variable", ix.name));
            }
            if ix.indicators.len() < 2 {
                return Err("the index needs at least 2 indicators".into());
            }
            for v in &ix.indicators {
                known(v, "index")?;
            }
            if let Some(a) = &ix.anchor {
                known(a, "index anchor")?;
            }
            estimable.insert(ix.name.clone());
        }
        let in_model = |s: &str, label: &str| {
            if estimable.contains(s) {
                Ok(())
            } else {
                Err(format!("model {label} references unknown variable `{s}`"))
            }
        };
        for (spec, block) in self.model_specs().iter().zip(&self.models) {
            if block.dependent.is_none() && self.index.is_none() {
                return Err(format!("model {} has no dependent and no index is configured", spec.label));
            }
            in_model(&spec.dependent, &spec.label)?;
            for r in spec.regressors() {
                for s in r.symbols() {
                    in_model(s, &spec.label)?;
                }
            }
            for l in &spec.instruments.lagged {
                in_model(&l.var, &spec.label)?;
            }
            spec.check().map_err(|e| format!("model {}: {e}", spec.label))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}
