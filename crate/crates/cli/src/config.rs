//! Run configuration: command-line flags over a TOML file over the
//! environment.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stylodetect::clients::{Mode, ProviderConfig, ProviderKind};

use crate::UsageError;

pub const ENV_CORPUS: &str = "STYLO_CORPUS";
pub const ENV_SEED: &str = "STYLO_SEED";
pub const ENV_OUT: &str = "STYLO_OUT";
pub const ENV_JOBS: &str = "STYLO_JOBS";
pub const ENV_CACHE_DIR: &str = "STYLO_CACHE_DIR";
pub const ENV_ANNOTATIONS: &str = "STYLO_ANNOTATIONS";
pub const ENV_LEXICONS: &str = "STYLO_LEXICONS";
pub const ENV_IMPUTE: &str = "STYLO_IMPUTE_AI_FEEDBACK";
pub const ENV_CACHED_ONLY: &str = "STYLO_CACHED_ONLY";

/// Per-provider settings in the config file, under `[providers.<kind>]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderFile {
    pub mode: Option<String>,
    pub endpoint: Option<String>,
    pub timeout_secs: Option<f64>,
    pub max_retries: Option<u32>,
    pub rate_limit: Option<f64>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub task: Option<String>,
    pub classifier: Option<String>,
    pub selection: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub impute_ai_feedback: Option<bool>,
    pub cached_only: Option<bool>,
    pub shared_split_seed: Option<bool>,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderFile>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        for key in cfg.providers.keys() {
            if !KINDS.iter().any(|k| k.as_str() == key) {
                return Err(UsageError(format!(
                    "unknown provider `{key}` in {} (grammar, chat, embedding, lm)",
                    path.display()
                ))
                .into());
            }
        }
        Ok(cfg)
    }
}

pub const KINDS: [ProviderKind; 4] = [
    ProviderKind::Grammar,
    ProviderKind::Chat,
    ProviderKind::Embedding,
    ProviderKind::Lm,
];

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|s| !s.trim().is_empty())
}

fn env_parse<T: FromStr>(name: &str) -> anyhow::Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match env(name) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| UsageError(format!("{name}={v}: {e}")).into()),
    }
}

fn env_flag(name: &str) -> anyhow::Result<Option<bool>> {
    match env(name).as_deref().map(str::trim) {
        None => Ok(None),
        Some("1" | "true" | "yes") => Ok(Some(true)),
        Some("0" | "false" | "no") => Ok(Some(false)),
        Some(v) => Err(UsageError(format!("{name}={v}: expected true or false")).into()),
    }
}

/// First of flag, config file, environment.
pub fn pick<T>(flag: Option<T>, file: Option<T>, env: Option<T>) -> Option<T> {
    flag.or(file).or(env)
}

/// Values shared by every subcommand, after precedence is applied.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub cache_dir: PathBuf,
    pub annotations: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub impute_ai_feedback: bool,
    pub cached_only: bool,
    pub providers: BTreeMap<String, ProviderConfig>,
    #[serde(skip)]
    pub file: FileConfig,
}

/// Global flags as parsed from the command line.
#[derive(Debug, Clone, Default)]
pub struct GlobalFlags {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub impute_ai_feedback: bool,
    pub cached_only: bool,
    pub modes: HashMap<ProviderKind, Mode>,
    pub embedding_dim: Option<usize>,
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

impl Settings {
    pub fn resolve(flags: &GlobalFlags) -> anyhow::Result<Settings> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let out = pick(flags.out.clone(), file.out.clone(), env(ENV_OUT).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let jobs = pick(flags.jobs, file.jobs, env_parse(ENV_JOBS)?);
        if jobs == Some(0) {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        let cache_dir = pick(
            flags.cache_dir.clone(),
            file.cache_dir.clone(),
            env(ENV_CACHE_DIR).map(PathBuf::from),
        )
        .unwrap_or_else(|| out.join("cache"));
        let annotations = pick(
            flags.annotations.clone(),
            file.annotations.clone(),
            env(ENV_ANNOTATIONS).map(PathBuf::from),
        );
        let lexicons = pick(
            flags.lexicons.clone(),
            file.lexicons.clone(),
            env(ENV_LEXICONS).map(PathBuf::from),
        );
        let impute_ai_feedback = pick(
            flag(flags.impute_ai_feedback),
            file.impute_ai_feedback,
            env_flag(ENV_IMPUTE)?,
        )
        .unwrap_or(false);
        let cached_only = pick(flag(flags.cached_only), file.cached_only, env_flag(ENV_CACHED_ONLY)?)
            .unwrap_or(false);

        let mut providers = BTreeMap::new();
        for kind in KINDS {
            let pf = file.providers.get(kind.as_str()).cloned().unwrap_or_default();
            let env_mode = format!("STYLO_{}_MODE", kind.as_str().to_uppercase());
            let file_mode = pf
                .mode
                .as_deref()
                .map(Mode::from_str)
                .transpose()
                .map_err(|e| UsageError(format!("providers.{kind}.mode: {e}")))?;
            let mut mode = pick(flags.modes.get(&kind).copied(), file_mode, env_parse(&env_mode)?)
                .unwrap_or(Mode::Fallback);
            if cached_only && mode == Mode::Live {
                mode = Mode::CachedOnly;
            }
            let mut cfg = ProviderConfig::new(kind, mode);
            cfg.endpoint = pf.endpoint;
            cfg.timeout_secs = pf.timeout_secs.unwrap_or(cfg.timeout_secs);
            cfg.max_retries = pf.max_retries.unwrap_or(cfg.max_retries);
            cfg.rate_limit = pf.rate_limit.unwrap_or(cfg.rate_limit);
            cfg.dim = if kind == ProviderKind::Embedding {
                pick(flags.embedding_dim, pf.dim, env_parse("STYLO_EMBED_DIM")?)
            } else {
                pf.dim
            };
            cfg.cache_path = Some(cache_dir.join(format!("{}.jsonl", kind.as_str())));
            providers.insert(kind.as_str().to_string(), cfg.with_env());
        }
        Ok(Settings {
            out,
            jobs,
            cache_dir,
            annotations,
            lexicons,
            impute_ai_feedback,
            cached_only,
            providers,
            file,
        })
    }

    pub fn provider(&self, kind: ProviderKind) -> &ProviderConfig {
        &self.providers[kind.as_str()]
    }

    pub fn corpus(&self, flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
        pick(flag, self.file.corpus.clone(), env(ENV_CORPUS).map(PathBuf::from)).ok_or_else(|| {
            UsageError(format!("no corpus given (pass --corpus, set `corpus` in the config, or {ENV_CORPUS})"))
                .into()
        })
    }

    pub fn seed(&self, flag: Option<u64>) -> anyhow::Result<u64> {
        pick(flag, self.file.seed, env_parse(ENV_SEED)?).ok_or_else(|| {
            UsageError(format!("a seed is required (pass --seed, set `seed` in the config, or {ENV_SEED})")).into()
        })
    }

    /// A string-valued setting from the flag or the config file, if any.
    pub fn optional<T: FromStr>(&self, flag: Option<T>, file: &Option<String>, what: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match (flag, file) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(raw)) => raw
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("{what} `{raw}`: {e}")).into()),
            (None, None) => Ok(None),
        }
    }

    /// A string-valued setting parsed with `FromStr`, or `default`.
    pub fn parsed<T: FromStr>(&self, flag: Option<T>, file: &Option<String>, what: &str, default: Option<&str>) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        let raw = file.as_deref().or(default).ok_or_else(|| UsageError(format!("--{what} is required")))?;
        raw.parse()
            .map_err(|e| UsageError(format!("{what} `{raw}`: {e}")).into())
    }
}
