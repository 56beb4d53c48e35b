//! Flat pipeline configuration: a TOML file of kebab-case keys, each of which
//! can be overridden by a `--key value` flag.

use promptner::backend::BackendConfig;
use promptner::dataset::SplitConfig;
use promptner::posttrain::{SftConfig, DPO_MIN_F1};
use promptner::promptgen::PromptConfig;
use promptner::scheduler::RetryPolicy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::CliError;

/// Environment variable holding the backend API key.
pub const API_KEY_ENV: &str = "PROMPTNER_API_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub notes: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Notes and annotations scored by `infer` and `evaluate`; the training
    /// corpus when unset.
    pub eval_notes: Option<PathBuf>,
    pub eval_annotations: Option<PathBuf>,
    pub workdir: PathBuf,
    /// Entity types to run; empty means every annotated type.
    pub entities: Vec<String>,
    pub seed: u64,

    pub endpoint_url: String,
    pub model_name: String,
    pub context_window: usize,
    pub request_timeout_secs: u64,
    pub max_concurrent_requests: usize,
    pub overflow_statuses: Vec<u16>,
    pub overflow_patterns: Vec<String>,
    pub max_new_tokens: usize,
    /// Rule table for the scripted backend; replaces the HTTP client.
    pub mock_rules: Option<PathBuf>,

    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub train_neg_multiplier: usize,
    pub val_neg_multiplier: usize,
    pub test_neg_multiplier: usize,
    pub min_positives: usize,
    pub use_re: bool,

    pub use_desc: bool,
    pub use_ex: bool,
    pub use_err: bool,
    pub n_candidates: u32,
    pub max_rounds: u32,
    pub val_f1_threshold: f64,
    pub select_threshold: f64,
    pub select_top_k: usize,
    pub n_examples: usize,
    pub max_error_examples: usize,
    pub generation_max_tokens: usize,

    pub input_ratio: f64,
    pub reduction_factor: f64,
    pub min_ratio: f64,

    pub match_threshold: f64,

    pub sft_val_ratio: f64,
    pub sft_neg_multiplier: usize,
    pub sft_model_name: String,
    pub dpo_min_f1: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let backend = BackendConfig::default();
        let split = SplitConfig::default();
        let prompt = PromptConfig::default();
        let retry = RetryPolicy::default();
        let sft = SftConfig::default();
        Self {
            notes: None,
            annotations: None,
            eval_notes: None,
            eval_annotations: None,
            workdir: PathBuf::from("work"),
            entities: Vec::new(),
            seed: 0,
            endpoint_url: backend.endpoint_url,
            model_name: backend.model_name,
            context_window: backend.context_window,
            request_timeout_secs: backend.request_timeout.as_secs(),
            max_concurrent_requests: backend.max_concurrent_requests,
            overflow_statuses: backend.overflow_statuses,
            overflow_patterns: backend.overflow_patterns,
            max_new_tokens: 512,
            mock_rules: None,
            train_ratio: split.ratios[0],
            val_ratio: split.ratios[1],
            test_ratio: split.ratios[2],
            train_neg_multiplier: split.neg_multipliers[0],
            val_neg_multiplier: split.neg_multipliers[1],
            test_neg_multiplier: split.neg_multipliers[2],
            min_positives: split.min_positives,
            use_re: true,
            use_desc: prompt.use_desc,
            use_ex: prompt.use_ex,
            use_err: prompt.use_err,
            n_candidates: prompt.n_candidates,
            max_rounds: prompt.max_rounds,
            val_f1_threshold: prompt.val_f1_threshold,
            select_threshold: prompt.select_threshold,
            select_top_k: prompt.select_top_k,
            n_examples: prompt.n_examples,
            max_error_examples: prompt.max_error_examples,
            generation_max_tokens: prompt.generation_max_tokens,
            input_ratio: retry.input_ratio,
            reduction_factor: retry.reduction_factor,
            min_ratio: retry.min_ratio,
            match_threshold: prompt.match_threshold,
            sft_val_ratio: sft.val_ratio,
            sft_neg_multiplier: sft.train_neg_multiplier,
            sft_model_name: "sft-model".into(),
            dpo_min_f1: DPO_MIN_F1,
        }
    }
}

/// Keys holding filesystem paths. Relative values in a config file resolve
/// against the file's directory; relative values on the command line resolve
/// against the working directory.
const PATH_KEYS: &[&str] = &["notes", "annotations", "eval-notes", "eval-annotations", "workdir", "mock-rules"];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// A config with every optional key present, used to learn each key's type.
fn typed_sample() -> toml::Table {
    let mut c = PipelineConfig::default();
    for p in [&mut c.notes, &mut c.annotations, &mut c.eval_notes, &mut c.eval_annotations, &mut c.mock_rules] {
        *p = Some(PathBuf::from("path"));
    }
    toml::Table::try_from(&c).expect("config serializes")
}

/// Every key the config accepts, sorted.
pub fn keys() -> Vec<String> {
    typed_sample().keys().cloned().collect()
}

fn parse_value(key: &str, raw: &str, sample: &toml::Value) -> Result<toml::Value, CliError> {
    let bad = |what: &str| usage(format!("--{key}: expected {what}, got {raw:?}"));
    Ok(match sample {
        toml::Value::String(_) => toml::Value::String(raw.to_string()),
        toml::Value::Integer(_) => toml::Value::Integer(raw.trim().parse().map_err(|_| bad("an integer"))?),
        toml::Value::Float(_) => toml::Value::Float(raw.trim().parse().map_err(|_| bad("a number"))?),
        toml::Value::Boolean(_) => toml::Value::Boolean(raw.trim().parse().map_err(|_| bad("true or false"))?),
        toml::Value::Array(_) => {
            let numeric = key == "overflow-statuses";
            let items = raw.split(',').map(str::trim).filter(|s| !s.is_empty());
            let values: Result<Vec<toml::Value>, CliError> = items
                .map(|s| {
                    if numeric {
                        s.parse().map(toml::Value::Integer).map_err(|_| bad("a comma-separated integer list"))
                    } else {
                        Ok(toml::Value::String(s.to_string()))
                    }
                })
                .collect();
            toml::Value::Array(values?)
        }
        _ => return Err(bad("a scalar")),
    })
}

/// Parses `--key value`, `--key=value` and bare boolean `--key` tokens.
pub fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, toml::Value)>, CliError> {
    let sample = typed_sample();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        let Some(flag) = tok.strip_prefix("--") else {
            return Err(usage(format!("unexpected argument {tok:?}; overrides take the form --key value")));
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        let Some(kind) = sample.get(&key) else {
            return Err(usage(format!("unknown config key --{key}")));
        };
        let raw = match inline {
            Some(v) => v,
            None => match tokens.get(i + 1) {
                Some(next) if !next.starts_with("--") => {
                    i += 1;
                    next.clone()
                }
                _ if kind.is_bool() => "true".into(),
                _ => return Err(usage(format!("--{key} needs a value"))),
            },
        };
        out.push((key.clone(), parse_value(&key, &raw, kind)?));
        i += 1;
    }
    Ok(out)
}

impl PipelineConfig {
    /// Reads `file` (if any), then applies command-line overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                let mut table: toml::Table =
                    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for key in PATH_KEYS {
                    if let Some(toml::Value::String(p)) = table.get(*key) {
                        let resolved = base.join(p);
                        table.insert(key.to_string(), toml::Value::String(resolved.to_string_lossy().into_owned()));
                    }
                }
                table
            }
            None => toml::Table::new(),
        };
        for (k, v) in parse_overrides(overrides)? {
            table.insert(k, v);
        }
        let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.split_config().validate().map_err(|e| usage(e.to_string()))?;
        self.prompt_config().validate().map_err(|e| usage(e.to_string()))?;
        self.retry_policy().validate().map_err(|e| usage(e.to_string()))?;
        self.backend_config().validate().map_err(|e| usage(e.to_string()))?;
        if !(0.0..=100.0).contains(&self.match_threshold) {
            return Err(usage("match-threshold must lie in [0, 100]"));
        }
        if !(0.0..1.0).contains(&self.sft_val_ratio) {
            return Err(usage("sft-val-ratio must lie in [0, 1)"));
        }
        if self.max_new_tokens == 0 {
            return Err(usage("max-new-tokens must be positive"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            ratios: [self.train_ratio, self.val_ratio, self.test_ratio],
            neg_multipliers: [self.train_neg_multiplier, self.val_neg_multiplier, self.test_neg_multiplier],
            min_positives: self.min_positives,
            seed: self.seed,
        }
    }

    pub fn prompt_config(&self) -> PromptConfig {
        PromptConfig {
            use_desc: self.use_desc,
            use_ex: self.use_ex,
            use_err: self.use_err,
            n_candidates: self.n_candidates,
            max_rounds: self.max_rounds,
            val_f1_threshold: self.val_f1_threshold,
            select_threshold: self.select_threshold,
            select_top_k: self.select_top_k,
            n_examples: self.n_examples,
            max_error_examples: self.max_error_examples,
            match_threshold: self.match_threshold,
            generation_max_tokens: self.generation_max_tokens,
            seed: self.seed,
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            input_ratio: self.input_ratio,
            reduction_factor: self.reduction_factor,
            min_ratio: self.min_ratio,
        }
    }

    pub fn backend_config(&self) -> BackendConfig {
        BackendConfig {
            endpoint_url: self.endpoint_url.clone(),
            model_name: self.model_name.clone(),
            context_window: self.context_window,
            request_timeout: Duration::from_secs(self.request_timeout_secs),
            max_concurrent_requests: self.max_concurrent_requests,
            overflow_statuses: self.overflow_statuses.clone(),
            overflow_patterns: self.overflow_patterns.clone(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }

    pub fn sft_config(&self) -> SftConfig {
        SftConfig { val_ratio: self.sft_val_ratio, train_neg_multiplier: self.sft_neg_multiplier, seed: self.seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn default_values() {
        let c = PipelineConfig::default();
        assert_eq!((c.val_f1_threshold, c.select_threshold), (0.8, 0.9));
        assert_eq!((c.n_candidates, c.max_rounds, c.select_top_k), (20, 5, 3));
        assert_eq!((c.train_neg_multiplier, c.val_neg_multiplier, c.test_neg_multiplier), (3, 10, 100));
        assert_eq!(c.match_threshold, 80.0);
        assert_eq!(c.dpo_min_f1, 0.6);
        c.validate().unwrap();
    }

    #[test]
    fn every_field_is_a_key() {
        let k = keys();
        assert!(k.contains(&"eval-annotations".to_string()));
        assert!(k.contains(&"mock-rules".to_string()));
        let json = serde_json::to_value(PipelineConfig::default()).unwrap();
        assert_eq!(json.as_object().unwrap().len(), k.len());
    }

    #[test]
    fn overrides_by_type() {
        let c = PipelineConfig::load(
            None,
            &s(&["--seed", "7", "--use-re=false", "--val-f1-threshold", "0.75", "--entities", "Age, Sex", "--use-err"]),
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert!(!c.use_re);
        assert!(c.use_err);
        assert_eq!(c.val_f1_threshold, 0.75);
        assert_eq!(c.entities, vec!["Age", "Sex"]);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        for args in [&["--no-such-key", "1"][..], &["--seed", "x"], &["--seed"], &["seed"], &["--val-ratio", "0.5"]] {
            let e = PipelineConfig::load(None, &s(args)).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{args:?}: {e}");
        }
    }

    #[test]
    fn file_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "notes = \"data/notes.jsonl\"\nseed = 3\nworkdir = \"w\"\n").unwrap();
        let c = PipelineConfig::load(Some(&path), &s(&["--workdir", "elsewhere"])).unwrap();
        assert_eq!(c.notes.unwrap(), dir.path().join("data/notes.jsonl"));
        assert_eq!(c.workdir, PathBuf::from("elsewhere"));
        assert_eq!(c.seed, 3);
        std::fs::write(&path, "sed = 3\n").unwrap();
        assert_eq!(PipelineConfig::load(Some(&path), &[]).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn digest_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
