//! Config files and the experiment runner behind the CLI.
//!
//! [`run_experiment`] writes the artifacts of one run into an output
//! directory together with `run-manifest.txt`: the full config echo, the
//! seed and the git blob hash of every artifact. A failing run leaves its
//! partial outputs and a `FAILED` file holding the error.

mod config;
mod runs;

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha1::{Digest, Sha1};

pub use config::{
    parse_config, BenchConfig, ClassifyConfig, ExperimentConfig, ExperimentKind, SaemConfig,
    SamplerConfig, SamplerKind, TemplateConfig, ToyConfig,
};
pub use runs::{blob_classes, ring_truth, run_chain, sampler_benchmark, BenchResult, ChainRun};

use crate::error::Result;

pub const MANIFEST: &str = "run-manifest.txt";
pub const FAILED_MARKER: &str = "FAILED";

/// Artifacts and headline numbers of a finished run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    /// `(file name, git blob hash)` in write order.
    pub files: Vec<(String, String)>,
    pub metrics: Vec<(String, f64)>,
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Hash of `blob <len>\0<content>`, as `git hash-object` prints it.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

/// Independent seed for the `stream`-th random component of a run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Files written so far by a run.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), git_blob_hash(bytes)));
        Ok(())
    }

    pub(crate) fn with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

/// Run `config` into `out` (created if needed).
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    for stale in [FAILED_MARKER, MANIFEST] {
        let p = out.join(stale);
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    let mut outputs = Outputs {
        dir: out.to_path_buf(),
        files: Vec::new(),
    };
    log::info!(
        "running {} with seed {} into {}",
        config.kind,
        config.seed,
        out.display()
    );
    match runs::dispatch(config, &mut outputs) {
        Ok(metrics) => {
            let mut manifest = format!(
                "# {} {}\nkind = {}\nseed = {}\n\n[outputs]\n",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION"),
                config.kind,
                config.seed
            );
            for (name, hash) in &outputs.files {
                manifest.push_str(&format!("{hash}  {name}\n"));
            }
            manifest.push_str("\n[config]\n");
            manifest.push_str(&config.to_ini_string());
            std::fs::write(out.join(MANIFEST), manifest)?;
            Ok(RunReport {
                output_dir: out.to_path_buf(),
                files: outputs.files,
                metrics,
            })
        }
        Err(e) => {
            log::error!("{} failed: {e}", config.kind);
            std::fs::write(out.join(FAILED_MARKER), format!("{e}\n"))?;
            Err(e)
        }
    }
}
