//! Flat INI-style experiment configuration.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = fit-toy
//! seed = 2024
//!
//! [sampler]
//! delta = 1e-4
//! ```
//!
//! Every section and key is optional except `experiment.kind`; missing keys
//! take the defaults of that kind (see [`ExperimentConfig::defaults`]).
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::saem::{MarkovKernel, StepSchedule, Sweep};
use crate::samplers::{ProposalSpec, Sampler};
use crate::toy::ToyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    BenchSampler,
    FitToy,
    CltStudy,
    FitTemplate,
    SampleSynthetic,
    Classify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::BenchSampler,
        Self::FitToy,
        Self::CltStudy,
        Self::FitTemplate,
        Self::SampleSynthetic,
        Self::Classify,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BenchSampler => "bench-sampler",
            Self::FitToy => "fit-toy",
            Self::CltStudy => "clt-study",
            Self::FitTemplate => "fit-template",
            Self::SampleSynthetic => "sample-synthetic",
            Self::Classify => "classify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Amala,
    Mala,
    HybridGibbs,
}

impl SamplerKind {
    fn as_str(&self) -> &'static str {
        match self {
            Self::Amala => "amala",
            Self::Mala => "mala",
            Self::HybridGibbs => "hybrid-gibbs",
        }
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "amala" => Ok(Self::Amala),
            "mala" => Ok(Self::Mala),
            "hybrid-gibbs" => Ok(Self::HybridGibbs),
            _ => Err(format!("unknown sampler {s:?} (amala, mala, hybrid-gibbs)")),
        }
    }
}

fn sweep_str(s: Sweep) -> &'static str {
    match s {
        Sweep::Joint => "joint",
        Sweep::PerBlock => "block",
    }
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    match s {
        "joint" => Ok(Sweep::Joint),
        "block" => Ok(Sweep::PerBlock),
        _ => Err(format!("unknown sweep {s:?} (joint, block)")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub delta: f64,
    pub b: f64,
    pub eps: f64,
    pub gibbs_std: f64,
    pub sweep: Sweep,
}

impl SamplerConfig {
    pub fn sampler(&self) -> Result<Sampler> {
        Ok(match self.kind {
            SamplerKind::Amala => Sampler::Amala(ProposalSpec::new(self.delta, self.b, self.eps)?),
            SamplerKind::Mala => Sampler::Mala(ProposalSpec::new(self.delta, self.b, self.eps)?),
            SamplerKind::HybridGibbs => Sampler::HybridGibbs {
                per_coord_std: self.gibbs_std,
            },
        })
    }

    pub fn kernel(&self) -> Result<MarkovKernel> {
        Ok(MarkovKernel {
            sampler: self.sampler()?,
            sweep: self.sweep,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaemConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    /// `None` scales the compacts to the model.
    pub radius0: Option<f64>,
    pub eps0: Option<f64>,
    pub replicates: usize,
    /// Parameter coordinate summarized by the CLT study.
    pub clt_coordinate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dim: usize,
    pub eig_min: f64,
    pub eig_max: f64,
    pub rotation_seed: u64,
    pub steps: usize,
    pub burn_in: usize,
    pub max_lag: usize,
    pub mala_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub groups: usize,
    pub reps: usize,
    pub truth: ToyParams,
    /// Observations to fit instead of simulated ones.
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateConfig {
    pub grid_side: usize,
    pub photo_side: usize,
    pub geo_side: usize,
    pub images: usize,
    pub sigma2: f64,
    /// Variances of the true horizontal and vertical control-point moves.
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub sigma_g_scale: f64,
    pub sigma0_sq: f64,
    /// Archive to sample from instead of the synthetic truth.
    pub model: Option<PathBuf>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Fitted archives; with `images` this skips the synthetic task.
    pub models: Vec<PathBuf>,
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub sampler: SamplerConfig,
    pub saem: SaemConfig,
    pub bench: BenchConfig,
    pub toy: ToyConfig,
    pub template: TemplateConfig,
    pub classify: ClassifyConfig,
}

impl ExperimentConfig {
    /// Defaults of each kind:
    ///
    /// | kind | sampler | iterations |
    /// |---|---|---|
    /// | bench-sampler | AMALA `delta = 0.16, eps = 1`; MALA `delta = 0.125` | 1e5 steps |
    /// | fit-toy, clt-study | AMALA `delta = 1e-4, eps = 100`, joint | 5000, 2000 |
    /// | fit-template, sample-synthetic, classify | AMALA `delta = 1e-6, b = 10, eps = 1`, per image | 3000, -, 1000 |
    pub fn defaults(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let sampler = match kind {
            BenchSampler => SamplerConfig {
                kind: SamplerKind::Amala,
                delta: 0.16,
                b: 1000.0,
                eps: 1.0,
                gibbs_std: 2.4,
                sweep: Sweep::Joint,
            },
            FitToy | CltStudy => SamplerConfig {
                kind: SamplerKind::Amala,
                delta: 1e-4,
                b: 1000.0,
                eps: 100.0,
                gibbs_std: 2.4,
                sweep: Sweep::Joint,
            },
            FitTemplate | SampleSynthetic | Classify => SamplerConfig {
                kind: SamplerKind::Amala,
                delta: 1e-6,
                b: 10.0,
                eps: 1.0,
                gibbs_std: 0.01,
                sweep: Sweep::PerBlock,
            },
        };
        let iterations = match kind {
            CltStudy => 2000,
            FitTemplate => 3000,
            Classify => 1000,
            _ => 5000,
        };
        Self {
            kind,
            seed: 2024,
            output: None,
            sampler,
            saem: SaemConfig {
                iterations,
                schedule: StepSchedule::default(),
                radius0: None,
                eps0: None,
                replicates: 200,
                clt_coordinate: 2,
            },
            bench: BenchConfig {
                dim: 10,
                eig_min: 1.0,
                eig_max: 10.0,
                rotation_seed: 42,
                steps: 100_000,
                burn_in: 1000,
                max_lag: 50,
                mala_delta: 0.125,
            },
            toy: ToyConfig {
                groups: 200,
                reps: 10,
                truth: ToyParams {
                    mu: 1.0,
                    tau2: 1.0,
                    sigma2: 1.0,
                },
                data: None,
            },
            template: TemplateConfig {
                grid_side: 20,
                photo_side: 5,
                geo_side: 3,
                images: 20,
                sigma2: 0.04,
                gamma_x: 0.015,
                gamma_y: 0.0075,
                sigma_g_scale: 0.01,
                sigma0_sq: 0.04,
                model: None,
                count: 40,
            },
            classify: ClassifyConfig {
                train_per_class: 20,
                test_per_class: 50,
                models: Vec::new(),
                images: Vec::new(),
            },
        }
    }

    /// Parse and validate; `base` resolves relative paths.
    pub fn from_ini_str(text: &str, base: &Path) -> Result<Self> {
        let entries = read_entries(text)?;
        let kind_entry = entries
            .iter()
            .find(|e| e.section == "experiment" && e.key == "kind")
            .ok_or(Error::Config {
                line: 0,
                msg: "missing required key experiment.kind".into(),
            })?;
        let kind = kind_entry.value.parse().map_err(|msg| Error::Config {
            line: kind_entry.line,
            msg,
        })?;
        let mut config = Self::defaults(kind);
        let mut lines = BTreeMap::new();
        for e in &entries {
            config.apply(e, base).map_err(|msg| Error::Config {
                line: e.line,
                msg: format!("{}.{}: {msg}", e.section, e.key),
            })?;
            lines.insert(format!("{}.{}", e.section, e.key), e.line);
        }
        config.validate().map_err(|(key, msg)| Error::Config {
            line: lines.get(key).copied().unwrap_or(0),
            msg: format!("{key}: {msg}"),
        })?;
        Ok(config)
    }

    fn apply(&mut self, e: &Entry, base: &Path) -> Result<(), String> {
        let v = e.value.as_str();
        let path = || {
            let p = PathBuf::from(v);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        let paths = || -> Vec<PathBuf> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    let p = PathBuf::from(s);
                    if p.is_relative() {
                        base.join(p)
                    } else {
                        p
                    }
                })
                .collect()
        };
        let optional = |v: &str| -> Result<Option<f64>, String> {
            if v == "auto" {
                Ok(None)
            } else {
                num(v).map(Some)
            }
        };
        match (e.section.as_str(), e.key.as_str()) {
            ("experiment", "kind") => {}
            ("experiment", "seed") => self.seed = num(v)?,
            ("experiment", "output") => self.output = Some(path()),
            ("sampler", "kind") => self.sampler.kind = v.parse()?,
            ("sampler", "delta") => self.sampler.delta = num(v)?,
            ("sampler", "b") => self.sampler.b = num(v)?,
            ("sampler", "eps") => self.sampler.eps = num(v)?,
            ("sampler", "gibbs_std") => self.sampler.gibbs_std = num(v)?,
            ("sampler", "sweep") => self.sampler.sweep = parse_sweep(v)?,
            ("saem", "iterations") => self.saem.iterations = num(v)?,
            ("saem", "gamma0") => self.saem.schedule.gamma0 = num(v)?,
            ("saem", "alpha_exponent") => self.saem.schedule.alpha_exponent = num(v)?,
            ("saem", "burn_in") => self.saem.schedule.burn_in = num(v)?,
            ("saem", "radius0") => self.saem.radius0 = optional(v)?,
            ("saem", "eps0") => self.saem.eps0 = optional(v)?,
            ("saem", "replicates") => self.saem.replicates = num(v)?,
            ("saem", "clt_coordinate") => self.saem.clt_coordinate = num(v)?,
            ("bench", "dim") => self.bench.dim = num(v)?,
            ("bench", "eig_min") => self.bench.eig_min = num(v)?,
            ("bench", "eig_max") => self.bench.eig_max = num(v)?,
            ("bench", "rotation_seed") => self.bench.rotation_seed = num(v)?,
            ("bench", "steps") => self.bench.steps = num(v)?,
            ("bench", "burn_in") => self.bench.burn_in = num(v)?,
            ("bench", "max_lag") => self.bench.max_lag = num(v)?,
            ("bench", "mala_delta") => self.bench.mala_delta = num(v)?,
            ("toy", "groups") => self.toy.groups = num(v)?,
            ("toy", "reps") => self.toy.reps = num(v)?,
            ("toy", "mu") => self.toy.truth.mu = num(v)?,
            ("toy", "tau2") => self.toy.truth.tau2 = num(v)?,
            ("toy", "sigma2") => self.toy.truth.sigma2 = num(v)?,
            ("toy", "data") => self.toy.data = Some(path()),
            ("template", "grid_side") => self.template.grid_side = num(v)?,
            ("template", "photo_side") => self.template.photo_side = num(v)?,
            ("template", "geo_side") => self.template.geo_side = num(v)?,
            ("template", "images") => self.template.images = num(v)?,
            ("template", "sigma2") => self.template.sigma2 = num(v)?,
            ("template", "gamma_x") => self.template.gamma_x = num(v)?,
            ("template", "gamma_y") => self.template.gamma_y = num(v)?,
            ("template", "sigma_g_scale") => self.template.sigma_g_scale = num(v)?,
            ("template", "sigma0_sq") => self.template.sigma0_sq = num(v)?,
            ("template", "model") => self.template.model = Some(path()),
            ("template", "count") => self.template.count = num(v)?,
            ("classify", "train_per_class") => self.classify.train_per_class = num(v)?,
            ("classify", "test_per_class") => self.classify.test_per_class = num(v)?,
            ("classify", "models") => self.classify.models = paths(),
            ("classify", "images") => self.classify.images = paths(),
            (s, k) => return Err(format!("unknown key {k:?} in section [{s}]")),
        }
        Ok(())
    }

    /// Range checks; the error names the offending `section.key`.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        fn check(ok: bool, key: &'static str, msg: &str) -> Result<(), (&'static str, String)> {
            if ok {
                Ok(())
            } else {
                Err((key, msg.to_string()))
            }
        }
        let s = &self.sampler;
        check(
            s.delta > 0.0 && s.delta.is_finite(),
            "sampler.delta",
            "must be > 0",
        )?;
        check(s.b > 0.0 && s.b.is_finite(), "sampler.b", "must be > 0")?;
        check(
            s.eps > 0.0 && s.eps.is_finite(),
            "sampler.eps",
            "must be > 0",
        )?;
        check(
            s.gibbs_std > 0.0 && s.gibbs_std.is_finite(),
            "sampler.gibbs_std",
            "must be > 0",
        )?;

        let a = &self.saem;
        check(a.iterations >= 1, "saem.iterations", "must be at least 1")?;
        let sch = &a.schedule;
        check(
            sch.gamma0 > 0.0 && sch.gamma0 <= 1.0,
            "saem.gamma0",
            "must lie in (0, 1]",
        )?;
        check(
            sch.alpha_exponent > 2.0 / 3.0 && sch.alpha_exponent < 1.0,
            "saem.alpha_exponent",
            "must lie in (2/3, 1)",
        )?;
        check(
            a.radius0.is_none_or(|r| r > 0.0 && r.is_finite()),
            "saem.radius0",
            "must be > 0 or auto",
        )?;
        check(
            a.eps0.is_none_or(|r| r > 0.0 && r.is_finite()),
            "saem.eps0",
            "must be > 0 or auto",
        )?;
        check(a.replicates >= 2, "saem.replicates", "must be at least 2")?;

        let b = &self.bench;
        check(b.dim >= 1, "bench.dim", "must be at least 1")?;
        check(
            b.eig_min > 0.0 && b.eig_min.is_finite(),
            "bench.eig_min",
            "must be > 0",
        )?;
        check(
            b.eig_max >= b.eig_min && b.eig_max.is_finite(),
            "bench.eig_max",
            "must be >= eig_min",
        )?;
        check(b.steps > b.max_lag, "bench.steps", "must exceed max_lag")?;
        check(
            b.mala_delta > 0.0 && b.mala_delta.is_finite(),
            "bench.mala_delta",
            "must be > 0",
        )?;

        let t = &self.toy;
        check(t.groups >= 2, "toy.groups", "must be at least 2")?;
        check(t.reps >= 2, "toy.reps", "must be at least 2")?;
        check(t.truth.tau2 > 0.0, "toy.tau2", "must be > 0")?;
        check(t.truth.sigma2 > 0.0, "toy.sigma2", "must be > 0")?;
        check(t.truth.mu.is_finite(), "toy.mu", "must be finite")?;
        check(
            t.data.as_ref().is_none_or(|p| p.is_file()),
            "toy.data",
            "file does not exist",
        )?;
        check(
            a.clt_coordinate < 3,
            "saem.clt_coordinate",
            "must be 0 (mu), 1 (tau2) or 2 (sigma2)",
        )?;

        let m = &self.template;
        check(m.grid_side >= 2, "template.grid_side", "must be at least 2")?;
        check(
            m.photo_side >= 1,
            "template.photo_side",
            "must be at least 1",
        )?;
        check(m.geo_side >= 1, "template.geo_side", "must be at least 1")?;
        check(m.images >= 1, "template.images", "must be at least 1")?;
        check(m.sigma2 > 0.0, "template.sigma2", "must be > 0")?;
        check(m.gamma_x > 0.0, "template.gamma_x", "must be > 0")?;
        check(m.gamma_y > 0.0, "template.gamma_y", "must be > 0")?;
        check(
            m.sigma_g_scale > 0.0,
            "template.sigma_g_scale",
            "must be > 0",
        )?;
        check(m.sigma0_sq > 0.0, "template.sigma0_sq", "must be > 0")?;
        check(
            m.model.as_ref().is_none_or(|p| p.is_file()),
            "template.model",
            "file does not exist",
        )?;
        check(m.count >= 1, "template.count", "must be at least 1")?;

        let c = &self.classify;
        check(
            c.train_per_class >= 1,
            "classify.train_per_class",
            "must be at least 1",
        )?;
        check(
            c.test_per_class >= 1,
            "classify.test_per_class",
            "must be at least 1",
        )?;
        check(
            c.models.iter().all(|p| p.is_file()),
            "classify.models",
            "file does not exist",
        )?;
        check(
            c.images.iter().all(|p| p.is_file()),
            "classify.images",
            "file does not exist",
        )?;
        check(
            c.images.is_empty() || !c.models.is_empty(),
            "classify.images",
            "needs classify.models",
        )?;
        check(
            c.models.is_empty() || !c.images.is_empty(),
            "classify.models",
            "needs classify.images",
        )?;
        Ok(())
    }

    /// Every key, so the text is a complete echo of the run.
    pub fn to_ini_string(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "auto".into());
        let join = |v: &[PathBuf]| {
            v.iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let s = &self.sampler;
        let a = &self.saem;
        let b = &self.bench;
        let t = &self.toy;
        let m = &self.template;
        let c = &self.classify;
        let _ = writeln!(
            out,
            "[experiment]\nkind = {}\nseed = {}",
            self.kind, self.seed
        );
        if let Some(p) = &self.output {
            let _ = writeln!(out, "output = {}", p.display());
        }
        let _ = writeln!(
            out,
            "\n[sampler]\nkind = {}\ndelta = {}\nb = {}\neps = {}\ngibbs_std = {}\nsweep = {}",
            s.kind.as_str(),
            s.delta,
            s.b,
            s.eps,
            s.gibbs_std,
            sweep_str(s.sweep)
        );
        let _ = writeln!(
            out,
            "\n[saem]\niterations = {}\ngamma0 = {}\nalpha_exponent = {}\nburn_in = {}\nradius0 = {}\neps0 = {}\nreplicates = {}\nclt_coordinate = {}",
            a.iterations,
            a.schedule.gamma0,
            a.schedule.alpha_exponent,
            a.schedule.burn_in,
            opt(a.radius0),
            opt(a.eps0),
            a.replicates,
            a.clt_coordinate
        );
        let _ = writeln!(
            out,
            "\n[bench]\ndim = {}\neig_min = {}\neig_max = {}\nrotation_seed = {}\nsteps = {}\nburn_in = {}\nmax_lag = {}\nmala_delta = {}",
            b.dim, b.eig_min, b.eig_max, b.rotation_seed, b.steps, b.burn_in, b.max_lag, b.mala_delta
        );
        let _ = writeln!(
            out,
            "\n[toy]\ngroups = {}\nreps = {}\nmu = {}\ntau2 = {}\nsigma2 = {}",
            t.groups, t.reps, t.truth.mu, t.truth.tau2, t.truth.sigma2
        );
        if let Some(p) = &t.data {
            let _ = writeln!(out, "data = {}", p.display());
        }
        let _ = writeln!(
            out,
            "\n[template]\ngrid_side = {}\nphoto_side = {}\ngeo_side = {}\nimages = {}\nsigma2 = {}\ngamma_x = {}\ngamma_y = {}\nsigma_g_scale = {}\nsigma0_sq = {}\ncount = {}",
            m.grid_side,
            m.photo_side,
            m.geo_side,
            m.images,
            m.sigma2,
            m.gamma_x,
            m.gamma_y,
            m.sigma_g_scale,
            m.sigma0_sq,
            m.count
        );
        if let Some(p) = &m.model {
            let _ = writeln!(out, "model = {}", p.display());
        }
        let _ = writeln!(
            out,
            "\n[classify]\ntrain_per_class = {}\ntest_per_class = {}",
            c.train_per_class, c.test_per_class
        );
        if !c.models.is_empty() {
            let _ = writeln!(
                out,
                "models = {}\nimages = {}",
                join(&c.models),
                join(&c.images)
            );
        }
        out
    }
}

/// Read and validate a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::from_ini_str(&text, base)
}

#[derive(Debug)]
struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

const SECTIONS: [&str; 7] = [
    "experiment",
    "sampler",
    "saem",
    "bench",
    "toy",
    "template",
    "classify",
];

fn read_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section: Option<String> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split_once(['#', ';']).map_or(raw, |(c, _)| c).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or(Error::Config {
                    line,
                    msg: format!("malformed section header {content:?}"),
                })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(Error::Config {
            line,
            msg: format!("expected `key = value`, found {content:?}"),
        })?;
        let section = section.clone().ok_or(Error::Config {
            line,
            msg: "key outside of any section".into(),
        })?;
        let key = key.trim().to_string();
        if let Some(prev) = entries
            .iter()
            .find(|e| e.section == section && e.key == key)
        {
            return Err(Error::Config {
                line,
                msg: format!(
                    "duplicate key {section}.{key} (first set on line {})",
                    prev.line
                ),
            });
        }
        entries.push(Entry {
            line,
            section,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_ini_str(text, Path::new("/tmp"))
    }

    fn line_of(e: Error) -> (usize, String) {
        match e {
            Error::Config { line, msg } => (line, msg),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn minimal_bench_config_takes_defaults() {
        let c = parse("[experiment]\nkind = bench-sampler\n").unwrap();
        assert_eq!(c, ExperimentConfig::defaults(ExperimentKind::BenchSampler));
        assert_eq!(c.bench.rotation_seed, 42);
        assert_eq!(c.bench.steps, 100_000);
        assert_eq!(c.sampler.b, 1000.0);
    }

    #[test]
    fn rejects_bad_values_with_their_line() {
        let (line, msg) = line_of(
            parse("[experiment]\nkind = fit-toy\n\n[saem]\nalpha_exponent = 0.5\n").unwrap_err(),
        );
        assert_eq!(line, 5);
        assert!(msg.contains("must lie in (2/3, 1)"), "{msg}");

        let (line, msg) =
            line_of(parse("[experiment]\nkind = fit-toy\n[sampler]\nb = 0\n").unwrap_err());
        assert_eq!(line, 4);
        assert!(msg.contains("sampler.b"), "{msg}");
    }

    #[test]
    fn rejects_unknown_keys_sections_and_missing_kind() {
        let (line, msg) =
            line_of(parse("[experiment]\nkind = fit-toy\n[saem]\niteratoins = 3\n").unwrap_err());
        assert_eq!(line, 4);
        assert!(msg.contains("iteratoins"), "{msg}");
        let (line, msg) = line_of(parse("[experiment]\nkind = fit-toy\n[sam]\n").unwrap_err());
        assert_eq!(line, 3);
        assert!(msg.contains("[sam]"));
        assert!(line_of(parse("[saem]\niterations = 3\n").unwrap_err())
            .1
            .contains("experiment.kind"));
        assert_eq!(
            line_of(parse("[experiment]\nkind = fit\n").unwrap_err()).0,
            2
        );
        assert_eq!(line_of(parse("seed = 1\n").unwrap_err()).0, 1);
        assert_eq!(
            line_of(parse("[experiment]\nkind = fit-toy\nseed = 1\nseed = 2\n").unwrap_err()).0,
            4
        );
        assert_eq!(
            line_of(
                parse("[experiment]\nkind = fit-toy\n[toy]\ndata = missing.csv\n").unwrap_err()
            )
            .0,
            4
        );
    }

    #[test]
    fn comments_and_overrides() {
        let c = parse(
            "# header\n[experiment]\nkind = clt-study ; trailing\nseed = 7\n[saem]\nradius0 = 12.5\neps0 = auto\n[sampler]\nkind = hybrid-gibbs\nsweep = block\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.saem.radius0, Some(12.5));
        assert_eq!(c.saem.eps0, None);
        assert_eq!(c.saem.iterations, 2000);
        assert_eq!(c.sampler.kind, SamplerKind::HybridGibbs);
        assert_eq!(c.sampler.sweep, Sweep::PerBlock);
    }

    #[test]
    fn round_trip_for_every_kind() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.txt");
        std::fs::write(&file, "x").unwrap();
        for kind in ExperimentKind::ALL {
            let mut c = ExperimentConfig::defaults(kind);
            c.seed = 99;
            c.saem.radius0 = Some(0.1 + 0.2);
            c.sampler.delta = 1.0 / 3.0;
            c.output = Some(dir.path().join("out"));
            c.classify.models = vec![file.clone(), file.clone()];
            c.classify.images = vec![file.clone()];
            c.template.model = Some(file.clone());
            let text = c.to_ini_string();
            assert_eq!(
                ExperimentConfig::from_ini_str(&text, dir.path()).unwrap(),
                c,
                "{text}"
            );
        }
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data.csv"), "group,rep,value\n").unwrap();
        let cfg = dir.path().join("run.ini");
        std::fs::write(
            &cfg,
            "[experiment]\nkind = fit-toy\n[toy]\ndata = data.csv\n",
        )
        .unwrap();
        let c = parse_config(&cfg).unwrap();
        assert_eq!(c.toy.data, Some(dir.path().join("data.csv")));
    }
}
