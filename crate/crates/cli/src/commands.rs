use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lexaudit_core::dataset::{
    generate_fixture, load_corpus, write_corpus, Corpus, FixtureOptions, LabelDefinition,
    PlantedEffect, StubPredictor, StubPredictorConfig,
};
use lexaudit_core::metrics::{analyze_all, AnalysisOptions, WeightMode};
use lexaudit_core::predictions::{sort_records, write_predictions, PredictionRecord, PredictionSet};
use lexaudit_core::report::{
    corpus_hash, emit_html, emit_tables, sha256_hex, ReportBundle, RunMetadata, BUNDLE_JSON,
};
use lexaudit_gateway::{run_generation, GenerationOptions, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::settings::Settings;

pub const DEFAULT_FIXTURE_SPEC: &str = include_str!("../fixtures/default_fixture.toml");
pub const FIXTURE_META_FILE: &str = "fixture_meta.json";
pub const PREDICTIONS_DIR: &str = "predictions";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// File name for a model's predictions; path separators become `_`.
pub fn predictions_file_name(model: &str) -> String {
    let safe: String = model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

fn write_model_files(out: &Path, records: Vec<PredictionRecord>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out.join(PREDICTIONS_DIR);
    create_dir(&dir)?;
    let mut by_model: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_model.entry(r.model_name.clone()).or_default().push(r);
    }
    let mut written = Vec::new();
    for (model, mut records) in by_model {
        sort_records(&mut records);
        let path = dir.join(predictions_file_name(&model));
        write_predictions(&path, &records).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StubModelSpec {
    model_name: String,
    #[serde(default)]
    seed: u64,
    doc_sd: Option<f64>,
    noise_sd: Option<f64>,
    round: Option<bool>,
    #[serde(default = "yes")]
    apply_effects: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureSpec {
    #[serde(default)]
    seed: u64,
    n_docs: usize,
    #[serde(default)]
    options: FixtureOptions,
    labels: Vec<LabelDefinition>,
    #[serde(default)]
    effects: Vec<PlantedEffect>,
    #[serde(default)]
    models: Vec<StubModelSpec>,
}

#[derive(Debug, Serialize)]
struct FixtureMetaFile<'a> {
    #[serde(flatten)]
    meta: &'a lexaudit_core::dataset::FixtureMeta,
    stub_models: Vec<StubModelMeta>,
}

#[derive(Debug, Serialize)]
struct StubModelMeta {
    #[serde(flatten)]
    config: StubPredictorConfig,
    apply_effects: bool,
}

pub fn fixture(s: &Settings) -> Result<(), CliError> {
    let out = Settings::require(&s.out, "out")?;
    let (text, origin) = match &s.spec {
        Some(path) => (
            fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
            path.display().to_string(),
        ),
        None => (DEFAULT_FIXTURE_SPEC.to_string(), "built-in spec".to_string()),
    };
    let spec: FixtureSpec =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{origin}: {e}")))?;
    let seed = s.seed.unwrap_or(spec.seed);
    let fixture = generate_fixture(seed, spec.n_docs, &spec.labels, &spec.effects, &spec.options)
        .map_err(|e| CliError::usage(format!("{origin}: {e}")))?;

    create_dir(out)?;
    write_corpus(&fixture.corpus, out)?;
    let mut records = Vec::new();
    let mut stub_models = Vec::new();
    for m in &spec.models {
        let defaults = StubPredictorConfig::default();
        let config = StubPredictorConfig {
            model_name: m.model_name.clone(),
            seed: seed.wrapping_mul(1_000_003).wrapping_add(m.seed),
            doc_sd: m.doc_sd.unwrap_or(defaults.doc_sd),
            noise_sd: m.noise_sd.unwrap_or(defaults.noise_sd),
            round: m.round.unwrap_or(defaults.round),
        };
        let effects: &[PlantedEffect] = if m.apply_effects { &spec.effects } else { &[] };
        let predictor = StubPredictor::new(config.clone(), &fixture.corpus, effects)
            .map_err(|e| CliError::usage(format!("{origin}: model '{}': {e}", m.model_name)))?;
        records.extend(predictor.predict(&fixture.corpus));
        stub_models.push(StubModelMeta {
            config,
            apply_effects: m.apply_effects,
        });
    }
    let written = write_model_files(out, records)?;
    let meta_path = out.join(FIXTURE_META_FILE);
    let meta = FixtureMetaFile {
        meta: &fixture.meta,
        stub_models,
    };
    let mut bytes = serde_json::to_vec_pretty(&meta).expect("serializable");
    bytes.push(b'\n');
    fs::write(&meta_path, bytes).map_err(|e| io_err(&meta_path, e))?;
    eprintln!(
        "fixture: {} documents, {} variants, {} stub prediction file(s) in {}",
        fixture.corpus.documents().len(),
        fixture.corpus.variants().len(),
        written.len(),
        out.display()
    );
    Ok(())
}

fn load_corpus_arg(s: &Settings) -> Result<Corpus, CliError> {
    let dir = Settings::require(&s.corpus, "corpus")?;
    Ok(load_corpus(dir)?)
}

pub fn generate(s: &Settings) -> Result<(), CliError> {
    let corpus = load_corpus_arg(s)?;
    let out = Settings::require(&s.out, "out")?;
    let models = Settings::require(&s.model, "model")?;
    let api_url = Settings::require(&s.api_url, "api-url")?;
    let template = match &s.template {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        None => lexaudit_gateway::DEFAULT_TEMPLATE.to_string(),
    };
    let mut options = GenerationOptions::new(s.cache_dir.clone().unwrap_or_else(|| out.join("cache")));
    options.template = template;
    options.labels = s.labels.clone();

    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::usage(format!("async runtime: {e}")))?;
    for model in models {
        let mut config = ModelConfig::new(api_url.clone(), model.clone());
        if let Some(t) = s.temperature {
            config.temperature = t;
        }
        config.provider_name = s.provider.clone();
        if let Some(env) = &s.api_key_env {
            config.api_key_env = env.clone();
        }
        if let Some(c) = s.max_concurrency {
            config.max_concurrency = c;
        }
        if let Some(r) = s.max_retries {
            config.max_retries = r;
        }
        config.validate()?;
        let name = model.clone();
        let step = Arc::new(move |done: usize, total: usize| {
            let every = (total / 20).max(1);
            if done % every == 0 || done == total {
                eprintln!("generate [{name}]: {done}/{total}");
            }
        });
        options.progress = Some(step);
        let output = runtime.block_on(run_generation(&corpus, &config, &options))?;
        let st = &output.stats;
        eprintln!(
            "generate [{model}]: {} records, {} parsed, {} parse failures, {} request failures, {} cached, {} requests",
            st.records, st.with_prediction, st.parse_failures, st.request_failures, st.cache_hits, st.requests_sent
        );
        write_model_files(out, output.records)?;
    }
    Ok(())
}

/// Prediction files from `--predictions`, or every `*.jsonl` under
/// `<corpus>/predictions` when none are given.
fn prediction_paths(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    if let Some(paths) = &s.predictions {
        return Ok(paths.clone());
    }
    let dir = Settings::require(&s.corpus, "corpus")?.join(PREDICTIONS_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|_| CliError::usage("no --predictions given and no <corpus>/predictions directory"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!("no prediction files in {}", dir.display())));
    }
    Ok(paths)
}

pub fn ingest(s: &Settings) -> Result<(), CliError> {
    let corpus = load_corpus_arg(s)?;
    let out = Settings::require(&s.out, "out")?;
    let paths = Settings::require(&s.predictions, "predictions")?;
    // validates schema, keys and duplicates across all files
    PredictionSet::load(paths, &corpus)?;
    let mut records = Vec::new();
    for path in paths {
        records.extend(
            lexaudit_core::jsonl::read_file::<PredictionRecord>(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?,
        );
    }
    let n = records.len();
    let written = write_model_files(out, records)?;
    eprintln!("ingest: {n} records into {} model file(s)", written.len());
    Ok(())
}

fn analysis_options(s: &Settings) -> Result<AnalysisOptions, CliError> {
    let mut o = AnalysisOptions::default();
    if let Some(t) = s.tau {
        o.tau = t;
    }
    o.log1p = s.log1p.unwrap_or(false);
    if let Some(c) = s.change_tolerance {
        o.change_tolerance = c;
    }
    o.weight_mode = match s.weight_mode.as_deref() {
        None | Some("comparisons") => WeightMode::Comparisons,
        Some("documents") => WeightMode::Documents,
        Some(other) => {
            return Err(CliError::usage(format!(
                "--weight-mode must be comparisons or documents, not '{other}'"
            )))
        }
    };
    o.labels = s.labels.clone();
    o.validate()?;
    Ok(o)
}

fn timestamp(s: &Settings) -> Option<String> {
    s.timestamp.clone().or_else(|| {
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .filter(|v| !v.is_empty())
            .map(|v| format!("@{v}"))
    })
}

fn render(bundle: &ReportBundle, out: &Path) -> Result<(), CliError> {
    let mut files = emit_tables(bundle, out)?;
    files.push(emit_html(bundle, out)?);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

pub fn analyze(s: &Settings) -> Result<(), CliError> {
    let corpus = load_corpus_arg(s)?;
    let out = Settings::require(&s.out, "out")?;
    let options = analysis_options(s)?;
    let paths = prediction_paths(s)?;
    let predictions = PredictionSet::load(&paths, &corpus)?;
    if predictions.is_empty() {
        return Err(CliError::data("nothing to analyze: no prediction records"));
    }
    let result = analyze_all(&predictions, &corpus, &options)?;

    // the hash covers settings and prediction contents, never paths
    let mut config_text = serde_json::to_string(&options).expect("serializable");
    for path in &paths {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        config_text.push('\n');
        config_text.push_str(&sha256_hex(&bytes));
    }
    let metadata = RunMetadata {
        config_hash: sha256_hex(config_text.as_bytes()),
        corpus_hash: corpus_hash(&corpus),
        generated_at: timestamp(s),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let bundle = ReportBundle::from_audit(&result, metadata);
    for m in &result.models {
        let sm = &m.summary;
        eprintln!(
            "analyze [{}]: inconsistency {}, bias {}/{} (p {:.3e}), imbalance {}/{} (p {:.3e})",
            sm.model_name,
            sm.inconsistency.map_or("n/a".to_string(), |v| format!("{v:.3}")),
            sm.bias_count,
            sm.bias_bernoulli.n_trials,
            sm.bias_bernoulli.p_value,
            sm.imbalance_count,
            sm.imbalance_bernoulli.n_trials,
            sm.imbalance_bernoulli.p_value,
        );
        for ex in m.bias.excluded.iter().chain(&m.imbalance.excluded) {
            eprintln!("analyze [{}]: label {} not tested: {}", sm.model_name, ex.label_id, ex.reason);
        }
    }
    render(&bundle, out)
}

pub fn report(s: &Settings) -> Result<(), CliError> {
    let out = Settings::require(&s.out, "out")?;
    let bundle_path = s.bundle.clone().unwrap_or_else(|| out.join(BUNDLE_JSON));
    let mut bundle = ReportBundle::load(&bundle_path)?;
    if let Some(at) = &s.timestamp {
        bundle.run_metadata.generated_at = Some(at.clone());
    }
    render(&bundle, out)
}
