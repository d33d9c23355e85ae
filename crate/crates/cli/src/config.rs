//! Config-file loading, flag overlay and seed resolution.

use std::fs;
use std::path::{Path, PathBuf};

use rtvlab_core::rng::SEED_ENV;
use rtvlab_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::GlobalArgs;

/// Settings shared by every subcommand after merging flags, config and environment.
#[derive(Debug, Clone, Serialize)]
pub struct Context {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(skip)]
    pub verbose: u8,
}

fn field_error(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &'static str) -> Result<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| field_error(key, e.to_string())),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| field_error("RTVLAB_SEED", format!("expected an unsigned integer, got {s:?}"))),
        _ => Ok(None),
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Object(inner) => {
                let slot = base.entry(k).or_insert_with(|| Value::Object(Map::new()));
                if !slot.is_object() {
                    *slot = Value::Object(Map::new());
                }
                if let Value::Object(b) = slot {
                    overlay(b, inner);
                }
            }
            v => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads the optional JSON config and lays the subcommand's flags over it.
///
/// Flags that were not given serialise as `null` (or `false` for switches)
/// and leave the config value in place. Unknown config keys are rejected by
/// the subcommand's schema.
pub fn resolve<A>(global: &GlobalArgs, flags: &A) -> Result<(Context, A)>
where
    A: Serialize + DeserializeOwned,
{
    let mut file = match &global.config {
        None => Map::new(),
        Some(path) => match serde_json::from_str::<Value>(&fs::read_to_string(path)?)? {
            Value::Object(m) => m,
            _ => return Err(field_error("config", "must be a JSON object")),
        },
    };
    let file_seed: Option<u64> = take(&mut file, "seed")?;
    let file_out: Option<PathBuf> = take(&mut file, "out")?;
    let file_jobs: Option<usize> = take(&mut file, "jobs")?;
    if let Value::Object(given) = serde_json::to_value(flags)? {
        overlay(&mut file, given);
    }
    let args: A = serde_json::from_value(Value::Object(file))?;
    let seed = match global.seed.or(file_seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let jobs = global.jobs.or(file_jobs);
    if jobs == Some(0) {
        return Err(field_error("jobs", "must be at least 1"));
    }
    if let Some(n) = jobs {
        // Library loops run on rayon's global pool; a second build is a no-op.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context { seed, out: global.out.clone().or(file_out), jobs, verbose: global.verbose };
    Ok((ctx, args))
}

impl Context {
    /// The output directory, created if missing.
    pub fn out_dir(&self) -> Result<&Path> {
        let dir = self.out.as_deref().ok_or_else(|| field_error("out", "an output directory is required (--out)"))?;
        fs::create_dir_all(dir)?;
        Ok(dir)
    }

    /// Writes the effective configuration to `<command>_config.json` in `dir`.
    pub fn echo<A: Serialize>(&self, dir: &Path, command: &str, args: &A) -> Result<()> {
        let mut map = Map::new();
        map.insert("command".into(), Value::from(command));
        if let Value::Object(m) = serde_json::to_value(self)? {
            map.extend(m);
        }
        if let Value::Object(m) = serde_json::to_value(args)? {
            map.extend(m);
        }
        fs::write(dir.join(format!("{command}_config.json")), serde_json::to_string_pretty(&Value::Object(map))? + "\n")?;
        Ok(())
    }

    pub fn info(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}
