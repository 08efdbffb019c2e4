use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::Failure;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const OUTPUT_ROOT_VAR: &str = "DECOH_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub duration_s: f64,
    pub created_unix: u64,
    pub exit_code: i32,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

/// Where outputs go: `--out` when given, else a fresh directory under the
/// output root (`DECOH_OUTPUT_ROOT`, default `runs`).
pub fn output_dir(explicit: Option<&Path>, kind: &str) -> Result<PathBuf, Failure> {
    let dir = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| "runs".into());
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs();
            let base = root.join(format!("{kind}-{stamp}"));
            let mut dir = base.clone();
            let mut n = 2;
            while dir.exists() {
                dir = PathBuf::from(format!("{}-{n}", base.display()));
                n += 1;
            }
            dir
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn write(dir: &Path, config: &RunConfig, outputs: &[String], elapsed: Duration, exit_code: i32) -> Result<(), Failure> {
    let manifest = Manifest {
        kind: config.kind().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed(),
        config: config.clone(),
        outputs: outputs.to_vec(),
        duration_s: elapsed.as_secs_f64(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs(),
        exit_code,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST_NAME), text + "\n")?;
    Ok(())
}
