use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use inclusiveness::econometrics::{build_design, build_instruments, gmm_two_step, render_table, GmmEstimate};
use inclusiveness::multivariate::{
    construct_index, country_averages, render_adequacy, render_variance, IndexConstruction, PcaReport,
};
use inclusiveness::paneldata::{
    fill_gaps, load_panel_csv, shift_log, validate_csv, zscore, PanelDataset, ValidationReport, VariableDef,
};
use inclusiveness::synth::{simulate_panel, DgpSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Format, PipelineConfig, TransformStep};
use crate::error::{CliError, ErrorClass};

/// Per-invocation overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunOptions {
    fn formats(&self, cfg: &PipelineConfig) -> Vec<Format> {
        match self.format {
            Some(f) => vec![f],
            None => cfg.formats.clone(),
        }
    }

    fn out_dir(&self, cfg: &PipelineConfig) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| cfg.default_out_dir())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Files written into one output directory, in write order.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<ManifestEntry>,
}

impl Artifacts {
    pub fn create(dir: &Path, stage: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(stage, dir, &e))?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, stage: &'static str, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(stage, &path, &e))?;
        self.written.retain(|w| w.path != name);
        self.written.push(ManifestEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, stage: &'static str, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable artifact");
        text.push('\n');
        self.write(stage, name, text.as_bytes())
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.written
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    stages: Vec<&'static str>,
    files: Vec<&'a ManifestEntry>,
}

/// Reads the configured CSV, failing on any validation defect.
fn load_validated(cfg: &PipelineConfig) -> Result<PanelDataset, CliError> {
    let path = cfg.input_path();
    let schema = cfg.schema();
    let report = read_report(&path, &schema)?;
    if !report.pass {
        return Err(CliError::new(
            ErrorClass::Validation,
            "validate",
            format!("{}: {}", path.display(), report.defects.join("; ")),
        ));
    }
    load_panel_csv(&path, &schema).map_err(|e| with_path("load", &path, CliError::panel("load", e)))
}

fn with_path(stage: &'static str, path: &Path, e: CliError) -> CliError {
    if e.class == ErrorClass::Io {
        e
    } else {
        CliError::new(e.class, stage, format!("{}: {}", path.display(), e.message))
    }
}

fn read_report(path: &Path, schema: &[VariableDef]) -> Result<ValidationReport, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io("validate", path, &e))?;
    validate_csv(std::io::BufReader::new(file), schema).map_err(|e| with_path("validate", path, CliError::panel("validate", e)))
}

/// Gap filling and the configured transform list, in order.
fn prepare(cfg: &PipelineConfig, ds: &PanelDataset) -> Result<PanelDataset, CliError> {
    let mut ds = fill_gaps(ds, cfg.input.gap_policy);
    for step in &cfg.transforms {
        ds = match step {
            TransformStep::Zscore { vars } => zscore(&ds, vars),
            TransformStep::ShiftLog { vars, shift } => shift_log(&ds, vars, *shift),
        }
        .map_err(|e| CliError::panel("transform", e))?;
    }
    Ok(ds)
}

fn render_validation(report: &ValidationReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("report") + "\n",
        Format::Csv => {
            let mut out = String::from("symbol,missing,coverage,constant\n");
            for v in &report.variables {
                let _ = writeln!(out, "{},{},{:?},{}", v.symbol, v.missing, v.coverage, v.constant);
            }
            out
        }
        Format::Table => {
            let mut out = format!("{:<12}{:>9}{:>10}  {}\n", "variable", "missing", "coverage", "constant");
            for v in &report.variables {
                let _ = writeln!(out, "{:<12}{:>9}{:>10.3}  {}", v.symbol, v.missing, v.coverage, v.constant);
            }
            for d in &report.defects {
                let _ = writeln!(out, "defect: {d}");
            }
            let _ = writeln!(out, "{}", if report.pass { "PASS" } else { "FAIL" });
            out
        }
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
        Format::Table => "txt",
    }
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("output", Path::new("<stdout>"), &e))
}

/// Prints the validation report; a failing report is an error (exit code 1).
/// With `--out`, the report is also written there.
pub fn cmd_validate(cfg: &PipelineConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<ValidationReport, CliError> {
    let path = cfg.input_path();
    let report = read_report(&path, &cfg.schema())?;
    let format = opts.format.unwrap_or(Format::Table);
    let text = render_validation(&report, format);
    emit(stdout, &text)?;
    if let Some(dir) = &opts.out_dir {
        Artifacts::create(dir, "validate")?.write("validate", &format!("validation.{}", extension(format)), text.as_bytes())?;
    }
    if report.pass {
        Ok(report)
    } else {
        Err(CliError::new(ErrorClass::Validation, "validate", format!("{}: {}", path.display(), report.defects.join("; "))))
    }
}

fn run_index(cfg: &PipelineConfig, prepared: &PanelDataset) -> Result<IndexConstruction, CliError> {
    let opts = cfg.index_options().ok_or_else(|| CliError::config("index", "config has no [index] section"))?;
    construct_index(prepared, &opts).map_err(|e| CliError::multivariate("index", e))
}

fn write_index(out: &mut Artifacts, ix: &IndexConstruction, formats: &[Format]) -> Result<(), CliError> {
    for f in formats {
        match f {
            Format::Table => {
                out.write("index", "kmo_bartlett.txt", render_adequacy(&ix.kmo, &ix.bartlett).as_bytes())?;
                out.write("index", "variance_explained.txt", render_variance(&ix.model).as_bytes())?;
            }
            Format::Json => {
                out.write_json("index", "pca.json", &PcaReport::new(&ix.model, &ix.kmo, &ix.bartlett))?;
                out.write_json("index", "index_series.json", &ix.series)?;
            }
            Format::Csv => {
                let mut buf = Vec::new();
                ix.series.write_csv(&mut buf).map_err(|e| CliError::panel("index", e))?;
                out.write("index", "index_series.csv", &buf)?;
                let mut text = String::from("rank,country,average,years_observed\n");
                for (r, a) in country_averages(&ix.series).iter().enumerate() {
                    let _ = writeln!(text, "{},{},{:?},{}", r + 1, a.country, a.average, a.years_observed);
                }
                out.write("index", "country_averages.csv", text.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn list_written(stdout: &mut dyn Write, out: &Artifacts) -> Result<(), CliError> {
    let mut text = String::new();
    for e in out.entries() {
        let _ = writeln!(text, "wrote {}", out.dir().join(&e.path).display());
    }
    emit(stdout, &text)
}

/// Builds the index and writes the adequacy block, the variance table, the
/// index series and the per-country averages.
pub fn cmd_index(cfg: &PipelineConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<IndexConstruction, CliError> {
    let ds = load_validated(cfg)?;
    let prepared = prepare(cfg, &ds)?;
    let ix = run_index(cfg, &prepared)?;
    let mut out = Artifacts::create(&opts.out_dir(cfg), "index")?;
    write_index(&mut out, &ix, &opts.formats(cfg))?;
    list_written(stdout, &out)?;
    Ok(ix)
}

/// The panel the regressions run on: the prepared data plus the index when one is configured.
fn estimation_panel(prepared: &PanelDataset, ix: Option<&IndexConstruction>) -> Result<PanelDataset, CliError> {
    match ix {
        Some(ix) => prepared
            .with_variable(VariableDef::new(&ix.series.metadata.name), ix.series.values.clone())
            .map_err(|e| CliError::panel("gmm", e)),
        None => Ok(prepared.clone()),
    }
}

fn needs_index(cfg: &PipelineConfig) -> bool {
    let Some(name) = cfg.index_name() else { return false };
    cfg.model_specs().iter().any(|s| {
        s.dependent == name
            || s.regressors().iter().any(|r| r.symbols().contains(&name.as_str()))
            || s.instruments.lagged.iter().any(|l| l.var == name)
    })
}

fn run_models(cfg: &PipelineConfig, panel: &PanelDataset) -> Result<Vec<GmmEstimate>, CliError> {
    let specs = cfg.model_specs();
    if specs.is_empty() {
        return Err(CliError::config("gmm", "config has no [[models]] blocks"));
    }
    specs
        .iter()
        .map(|spec| {
            let fail = |e| {
                let e = CliError::econometrics("gmm", e);
                CliError::new(e.class, "gmm", format!("model {}: {}", spec.label, e.message))
            };
            let design = build_design(panel, spec).map_err(fail)?;
            let inst = build_instruments(panel, spec, &design).map_err(fail)?;
            let mut est = gmm_two_step(&design, &inst).map_err(fail)?;
            est.label = spec.label.clone();
            Ok(est)
        })
        .collect()
}

/// Distinct dependent variables in column order, the index marked as such.
fn dependent_label(cfg: &PipelineConfig) -> String {
    let index = cfg.index_name();
    let mut seen: Vec<String> = Vec::new();
    for spec in cfg.model_specs() {
        if !seen.contains(&spec.dependent) {
            seen.push(spec.dependent);
        }
    }
    seen.iter()
        .map(|d| if index.as_ref() == Some(d) { format!("{d} (index)") } else { d.clone() })
        .collect::<Vec<_>>()
        .join(", ")
}

fn coefficients_csv(models: &[GmmEstimate]) -> String {
    let mut out = String::from("model,term,kind,coefficient,std_error\n");
    for m in models {
        for j in 0..m.names.len() {
            let kind = serde_json::to_value(m.kinds[j]).expect("kind");
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?}",
                m.label,
                m.names[j],
                kind.as_str().unwrap_or_default(),
                m.coefficients[j],
                m.std_errors[j]
            );
        }
    }
    out
}

fn write_models(out: &mut Artifacts, cfg: &PipelineConfig, models: &[GmmEstimate], formats: &[Format]) -> Result<(), CliError> {
    for f in formats {
        match f {
            Format::Table => out.write("gmm", "gmm_table.txt", render_table(models, &dependent_label(cfg)).as_bytes())?,
            Format::Json => out.write_json("gmm", "gmm.json", &models)?,
            Format::Csv => out.write("gmm", "gmm_coefficients.csv", coefficients_csv(models).as_bytes())?,
        }
    }
    Ok(())
}

/// Estimates every model block and writes the regression table and JSON.
/// The index is rebuilt first when a model refers to it.
pub fn cmd_gmm(cfg: &PipelineConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<Vec<GmmEstimate>, CliError> {
    let ds = load_validated(cfg)?;
    let prepared = prepare(cfg, &ds)?;
    let ix = if needs_index(cfg) { Some(run_index(cfg, &prepared)?) } else { None };
    let panel = estimation_panel(&prepared, ix.as_ref())?;
    let models = run_models(cfg, &panel)?;
    let mut out = Artifacts::create(&opts.out_dir(cfg), "gmm")?;
    write_models(&mut out, cfg, &models, &opts.formats(cfg))?;
    list_written(stdout, &out)?;
    Ok(models)
}

#[derive(Debug)]
pub struct PipelineRun {
    pub manifest: PathBuf,
    pub files: Vec<ManifestEntry>,
    pub index: Option<IndexConstruction>,
    pub models: Vec<GmmEstimate>,
}

/// Every configured stage in order, stopping at the first failure. Writes
/// `manifest.json` listing each artifact with its SHA-256.
pub fn cmd_pipeline(cfg: &PipelineConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<PipelineRun, CliError> {
    let formats = opts.formats(cfg);
    let mut out = Artifacts::create(&opts.out_dir(cfg), "output")?;
    let mut stages = vec!["validate"];

    let path = cfg.input_path();
    let report = read_report(&path, &cfg.schema())?;
    for f in &formats {
        out.write("validate", &format!("validation.{}", extension(*f)), render_validation(&report, *f).as_bytes())?;
    }
    let ds = load_validated(cfg)?;

    stages.push("transform");
    let prepared = prepare(cfg, &ds)?;
    if formats.contains(&Format::Json) {
        out.write("transform", "transform_log.json", format!("{}\n", prepared.transform_log_json()).as_bytes())?;
    }

    let ix = match cfg.index {
        Some(_) => {
            stages.push("index");
            let ix = run_index(cfg, &prepared)?;
            write_index(&mut out, &ix, &formats)?;
            Some(ix)
        }
        None => None,
    };

    let mut models = Vec::new();
    if !cfg.models.is_empty() {
        stages.push("gmm");
        let panel = estimation_panel(&prepared, ix.as_ref())?;
        models = run_models(cfg, &panel)?;
        write_models(&mut out, cfg, &models, &formats)?;
    }

    let mut files: Vec<&ManifestEntry> = out.entries().iter().collect();
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { stages, files };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest") + "\n";
    let manifest_path = out.dir().join("manifest.json");
    std::fs::write(&manifest_path, text).map_err(|e| CliError::io("manifest", &manifest_path, &e))?;
    list_written(stdout, &out)?;
    emit(stdout, &format!("wrote {}\n", manifest_path.display()))?;
    let mut files = out.entries().to_vec();
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(PipelineRun { manifest: manifest_path, files, index: ix, models })
}

/// Reads a simulation spec from TOML, or JSON when the extension is `.json`.
pub fn load_dgp_spec(path: &Path) -> Result<DgpSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io("simulate", path, &e))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::config("simulate", format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub seed: u64,
    pub panel: PathBuf,
    pub truth: PathBuf,
}

/// Writes `panel.csv` and `truth.json`; `seed` overrides the spec's seed.
pub fn cmd_simulate(
    spec: Option<&Path>,
    seed: Option<u64>,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<SimulateOutput, CliError> {
    let mut dgp = match spec {
        Some(p) => load_dgp_spec(p)?,
        None => DgpSpec::default(),
    };
    if let Some(s) = seed {
        dgp.seed = s;
    }
    let sim = simulate_panel(&dgp).map_err(|e| CliError::synth("simulate", e))?;
    let mut out = Artifacts::create(out_dir, "simulate")?;
    let mut buf = Vec::new();
    inclusiveness::paneldata::write_panel_csv(&sim.panel, &mut buf).map_err(|e| CliError::panel("simulate", e))?;
    out.write("simulate", "panel.csv", &buf)?;
    out.write_json("simulate", "truth.json", &sim.truth)?;
    emit(stdout, &format!("seed: {}\n", dgp.seed))?;
    list_written(stdout, &out)?;
    Ok(SimulateOutput { seed: dgp.seed, panel: out_dir.join("panel.csv"), truth: out_dir.join("truth.json") })
}

/// SHA-256 of every file named in a manifest, keyed by path.
pub fn manifest_hashes(manifest: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| CliError::io("manifest", manifest, &e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::new(ErrorClass::Validation, "manifest", e.to_string()))?;
    Ok(v["files"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|f| (f["path"].as_str().unwrap_or_default().to_string(), f["sha256"].as_str().unwrap_or_default().to_string()))
        .collect())
}
