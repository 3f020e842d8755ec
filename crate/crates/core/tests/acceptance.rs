//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance` runs everything; `cargo test --test
//! acceptance -- 4 6` runs a subset by number.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use amala_saem::bme::{BmeHyperPriors, BmeModel, TemplateSpec};
use amala_saem::diagnostics::ks_distance;
use amala_saem::experiment::{
    derive_seed, run_chain, run_experiment, sampler_benchmark, ExperimentConfig, ExperimentKind,
    RunReport,
};
use amala_saem::model::{
    finite_difference_grad, relative_error, validate_model, GRADIENT_TOLERANCE,
};
use amala_saem::saem::{clt_study, run_saem, ExactPosterior, TruncationPolicy};
use amala_saem::samplers::{mala_proposal_logpdf, proposal_logpdf, ProposalSpec, Sampler};
use amala_saem::toy::{AnisoGaussianTarget, RandomEffectsModel, StandardGaussian, StudentT};
use amala_saem::LogDensity;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

fn run(config: &ExperimentConfig, dir: &Path) -> RunReport {
    run_experiment(config, dir).unwrap_or_else(|e| panic!("{} failed: {e}", config.kind))
}

fn criterion_1() -> Verdict {
    let cfg = ExperimentConfig::defaults(ExperimentKind::BenchSampler);
    let start = Instant::now();
    let spec = ProposalSpec::new(cfg.sampler.delta, cfg.sampler.b, cfg.sampler.eps).unwrap();
    let r = pool(1)
        .install(|| sampler_benchmark(&cfg.bench, spec, cfg.seed))
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (ma, mm) = (
        amala_saem::diagnostics::msejd(&r.amala.trace),
        amala_saem::diagnostics::msejd(&r.mala.trace),
    );
    let acf_ok = [5, 10, 20].iter().all(|&l| r.acf_amala[l] <= r.acf_mala[l]);
    let ratio = r.amplitude_ratio();
    let pass = ma > mm
        && (ma - 1.29).abs() <= 0.15
        && (mm - 1.25).abs() <= 0.15
        && acf_ok
        && ratio > 5.0
        && secs <= 60.0;
    verdict(
        pass,
        format!(
            "MSEJD amala {ma:.3} mala {mm:.3}; ACF lag 5/10/20 amala {:.3}/{:.3}/{:.3} mala {:.3}/{:.3}/{:.3}; amplitude max/mean {ratio:.2}; {secs:.1} s",
            r.acf_amala[5], r.acf_amala[10], r.acf_amala[20], r.acf_mala[5], r.acf_mala[10], r.acf_mala[20]
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let samplers = [
        Sampler::Amala(ProposalSpec::new(0.5, 1000.0, 1.0).unwrap()),
        Sampler::Mala(ProposalSpec::new(1.0, 1000.0, 1.0).unwrap()),
        Sampler::HybridGibbs { per_coord_std: 2.4 },
    ];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, s) in samplers.iter().enumerate() {
        let run = run_chain(
            s,
            &StandardGaussian { dim: 1 },
            vec![0.0],
            1000,
            200_000,
            derive_seed(2, i as u64),
        )
        .unwrap();
        let x = run.trace.coordinate(0);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let ks = ks_distance(&x, |v| normal.cdf(v));
        pass &= mean.abs() <= 0.02 && (var - 1.0).abs() <= 0.05 && ks <= 0.01;
        parts.push(format!(
            "{} mean {mean:+.4} var {var:.4} KS {ks:.4}",
            s.name()
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        pass && secs <= 30.0,
        format!("{}; {secs:.1} s", parts.join("; ")),
    )
}

fn dense_logpdf(x: &[f64], mean: &[f64], cov: DMatrix<f64>) -> f64 {
    let l = x.len();
    let chol = cov.cholesky().expect("SPD covariance");
    let diff = DVector::from_iterator(l, x.iter().zip(mean).map(|(a, b)| a - b));
    let sol = chol.solve(&diff);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (l as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + diff.dot(&sol))
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &l in &[1usize, 2, 5, 20] {
        for _ in 0..100 {
            let delta = 10f64.powf(rng.random_range(-3.0..0.0));
            let eps = 10f64.powf(rng.random_range(-2.0..1.0));
            let b = 10f64.powf(rng.random_range(-1.0..2.0));
            let spec = ProposalSpec::new(delta, b, eps).unwrap();
            let from: Vec<f64> = (0..l).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut drift: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale = rng.random_range(0.0..1.0) * b
                / drift.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
            drift.iter_mut().for_each(|d| *d *= scale);

            let d = DVector::from_column_slice(&drift);
            let cov = (DMatrix::identity(l, l) * eps + &d * d.transpose()) * delta;
            let mean: Vec<f64> = from
                .iter()
                .zip(&drift)
                .map(|(x, g)| x + delta * g)
                .collect();
            let chol = cov.clone().cholesky().unwrap();
            let xi = DVector::from_iterator(l, (0..l).map(|_| rng.random_range(-2.0..2.0)));
            let to: Vec<f64> = (chol.l() * xi)
                .iter()
                .zip(&mean)
                .map(|(a, m)| a + m)
                .collect();
            worst = worst.max(
                (proposal_logpdf(&from, &to, &drift, &spec) - dense_logpdf(&to, &mean, cov)).abs(),
            );

            let mala_mean: Vec<f64> = from
                .iter()
                .zip(&drift)
                .map(|(x, g)| x + 0.5 * delta * g)
                .collect();
            let dense = dense_logpdf(&to, &mala_mean, DMatrix::identity(l, l) * delta);
            worst = worst.max((mala_proposal_logpdf(&from, &to, &drift, delta) - dense).abs());
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-10 && secs <= 5.0,
        format!("{count} instances, max |difference| {worst:.2e}; {secs:.2} s"),
    )
}

fn toy_setup(cfg: &ExperimentConfig) -> (RandomEffectsModel, TruncationPolicy) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let model = RandomEffectsModel::simulate(cfg.toy.groups, cfg.toy.reps, cfg.toy.truth, &mut rng)
        .unwrap();
    let policy = TruncationPolicy::for_model(&model).unwrap();
    (model, policy)
}

fn criterion_4() -> Verdict {
    let cfg = ExperimentConfig::defaults(ExperimentKind::FitToy);
    let start = Instant::now();
    let (model, policy) = toy_setup(&cfg);
    let kernel = cfg.sampler.kernel().unwrap();
    let (schedule, iters) = (&cfg.saem.schedule, cfg.saem.iterations);
    let seed = derive_seed(cfg.seed, 2);
    let fit = run_saem(&model, &kernel, schedule, &policy, iters, seed).unwrap();
    let exact = run_saem(&model, &ExactPosterior, schedule, &policy, iters, seed).unwrap();
    let secs = start.elapsed().as_secs_f64();

    // Monte Carlo spread of the final estimate over independent seeds.
    let finals: Vec<Vec<f64>> = (0..20u64)
        .map(|r| {
            run_saem(
                &model,
                &kernel,
                schedule,
                &policy,
                iters,
                derive_seed(cfg.seed, 100 + r),
            )
            .unwrap()
            .final_theta_values()
            .to_vec()
        })
        .collect();
    let se: Vec<f64> = (0..3)
        .map(|i| {
            let m = finals.iter().map(|f| f[i]).sum::<f64>() / finals.len() as f64;
            (finals.iter().map(|f| (f[i] - m).powi(2)).sum::<f64>() / (finals.len() - 1) as f64)
                .sqrt()
        })
        .collect();
    let ml = model.ml_oracle().theta.to_vec();
    let est = fit.final_theta_values();
    let z: Vec<f64> = (0..3).map(|i| (est[i] - ml[i]).abs() / se[i]).collect();
    let gap = est
        .iter()
        .zip(exact.final_theta_values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let late = fit.truncations_after(100);
    let pass = z.iter().all(|v| *v <= 3.0) && gap <= 0.05 && late == 0 && secs <= 120.0;
    verdict(
        pass,
        format!(
            "theta {:.4?} vs ML {:.4?}: |diff|/SE {:.2?} (SE {}); gap to exact sampler {gap:.4}; truncations after 100: {late}; {secs:.1} s",
            est, ml, z, se.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_5() -> Verdict {
    let cfg = ExperimentConfig::defaults(ExperimentKind::CltStudy);
    let start = Instant::now();
    let (model, policy) = toy_setup(&cfg);
    let kernel = cfg.sampler.kernel().unwrap();
    let a = &cfg.saem;
    let summary = pool(8)
        .install(|| {
            clt_study(
                &model,
                &kernel,
                &a.schedule,
                &policy,
                a.iterations,
                a.replicates,
                derive_seed(cfg.seed, 2),
                2,
            )
        })
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let m = &summary.moments;
    let pass = summary.finals.len() == 200
        && m.skewness.abs() <= 0.5
        && m.excess_kurtosis.abs() <= 1.0
        && secs <= 20.0 * 60.0;
    verdict(
        pass,
        format!(
            "{} replicates x {} iterations: sigma2 skewness {:+.3}, excess kurtosis {:+.3}; {secs:.1} s",
            summary.finals.len(),
            a.iterations,
            m.skewness,
            m.excess_kurtosis
        ),
    )
}

fn criterion_6() -> Verdict {
    let cfg = ExperimentConfig::defaults(ExperimentKind::FitTemplate);
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let r = run(&cfg, dir.path());
    let secs = start.elapsed().as_secs_f64();
    let m = |k: &str| r.metric(k).unwrap();
    let (t, s, g) = (
        m("template_rel_error"),
        m("sigma2_ratio"),
        m("gamma_rel_error"),
    );
    let pass = cfg.template.images == 20
        && cfg.template.grid_side == 20
        && cfg.saem.iterations == 3000
        && t <= 0.15
        && (0.5..=1.1).contains(&s)
        && m("gamma_spd") == 1.0
        && g <= 0.5
        && secs <= 15.0 * 60.0;
    verdict(
        pass,
        format!(
            "template error {:.1}%, sigma2 ratio {s:.3}, Gamma SPD, Gamma error {:.1}% (true latents alone: {:.1}%); {secs:.1} s",
            100.0 * t,
            100.0 * g,
            100.0 * m("gamma_rel_error_of_true_latents")
        ),
    )
}

fn criterion_7() -> Verdict {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Classify);
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let r = run(&cfg, dir.path());
    let secs = start.elapsed().as_secs_f64();
    let (n, rate) = (
        r.metric("test_images").unwrap(),
        r.metric("error_rate").unwrap(),
    );
    verdict(
        n == 150.0 && rate <= 0.10,
        format!(
            "3 classes, {n} held-out images, error rate {:.1}%; {secs:.1} s",
            100.0 * rate
        ),
    )
}

fn target_gradient_error<T: LogDensity>(target: &T, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..probes)
        .map(|_| {
            let x: Vec<f64> = (0..target.dim())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            relative_error(
                &target.grad_log_density(&x),
                &finite_difference_grad(|v| target.log_density(v), &x),
            )
        })
        .fold(0.0, f64::max)
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut errors: Vec<(&str, f64)> = Vec::new();
    let mut pass = true;
    let mut record = |name, err| errors.push((name, err));
    record(
        "gaussian",
        target_gradient_error(&StandardGaussian { dim: 5 }, 50, 1),
    );
    record(
        "student-t",
        target_gradient_error(&StudentT { nu: 5.0 }, 50, 2),
    );
    record(
        "rotated gaussian",
        target_gradient_error(
            &AnisoGaussianTarget::linspace(10, 1.0, 10.0, 42).unwrap(),
            50,
            3,
        ),
    );

    let cfg = ExperimentConfig::defaults(ExperimentKind::FitToy);
    let (toy, _) = toy_setup(&cfg);
    let report = validate_model(&toy, 50, 4);
    pass &= report.passed;
    record("toy posterior", report.max_grad_error);

    let spec = TemplateSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let images: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            (0..spec.n_pixels())
                .map(|_| rng.random_range(0.0..2.0))
                .collect()
        })
        .collect();
    let hyper = BmeHyperPriors::for_spec(&spec, 0.04, 0.01).unwrap();
    let bme = BmeModel::new(spec.clone(), hyper, images).unwrap();
    let report = validate_model(&bme, 50, 6);
    pass &= report.passed;
    record("template posterior", report.max_grad_error);

    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let alpha: Vec<f64> = (0..spec.k_p())
            .map(|_| rng.random_range(0.0..2.0))
            .collect();
        let z: Vec<f64> = (0..spec.latent_dim())
            .map(|_| rng.random_range(-0.15..0.15))
            .collect();
        let jac = spec.deformation_jacobian(&alpha, &z);
        let mut fd = DMatrix::zeros(jac.nrows(), jac.ncols());
        for col in 0..z.len() {
            let h = 1e-5 * (1.0 + z[col].abs());
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[col] += h;
            zm[col] -= h;
            let (ip, im) = (
                spec.deformed_template(&alpha, &zp),
                spec.deformed_template(&alpha, &zm),
            );
            for (row, (a, b)) in ip.iter().zip(&im).enumerate() {
                fd[(row, col)] = (a - b) / (2.0 * h);
            }
        }
        worst = worst.max(relative_error(jac.as_slice(), fd.as_slice()));
    }
    record("deformation jacobian", worst);
    let secs = start.elapsed().as_secs_f64();
    pass &= errors.iter().all(|(_, e)| *e <= GRADIENT_TOLERANCE);
    let parts: Vec<String> = errors
        .iter()
        .map(|(name, e)| format!("{name} {e:.1e}"))
        .collect();
    verdict(
        pass,
        format!(
            "max relative error (50 probes each): {}; {secs:.1} s",
            parts.join(", ")
        ),
    )
}

/// Reduced-size configs: determinism does not depend on the run length.
fn small_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(kind);
    c.seed = 77;
    match kind {
        ExperimentKind::BenchSampler => c.bench.steps = 5000,
        ExperimentKind::FitToy => {}
        ExperimentKind::CltStudy => {
            c.saem.replicates = 16;
            c.saem.iterations = 300;
        }
        ExperimentKind::FitTemplate => {
            c.template.images = 6;
            c.saem.iterations = 60;
        }
        ExperimentKind::SampleSynthetic => c.template.count = 7,
        ExperimentKind::Classify => {
            c.classify.train_per_class = 4;
            c.classify.test_per_class = 3;
            c.saem.iterations = 30;
        }
    }
    c
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let mut mismatched = Vec::new();
    let mut files = 0;
    for kind in ExperimentKind::ALL {
        let cfg = small_config(kind);
        let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        let reports: Vec<RunReport> = [1, 8, 8]
            .iter()
            .zip(&dirs)
            .map(|(&t, d)| pool(t).install(|| run(&cfg, d.path())))
            .collect();
        let artifacts = |r: &RunReport| -> Vec<(String, String)> {
            r.files
                .iter()
                .filter(|(n, _)| n.ends_with(".csv") || n.ends_with(".pgm"))
                .cloned()
                .collect()
        };
        let first = artifacts(&reports[0]);
        files += first.len();
        // Hashes in the reports are computed from the bytes on disk; compare
        // the bytes themselves as well.
        let same_bytes = first.iter().all(|(name, _)| {
            let bytes: Vec<Vec<u8>> = dirs
                .iter()
                .map(|d| std::fs::read(d.path().join(name)).unwrap())
                .collect();
            bytes.windows(2).all(|w| w[0] == w[1])
        });
        if first.is_empty() || !same_bytes || reports.iter().any(|r| artifacts(r) != first) {
            mismatched.push(kind.as_str());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatched.is_empty(),
        format!(
            "6 experiment kinds, {files} CSV/PGM artifacts, 3 runs each (1, 8, 8 threads); mismatches: {}; {secs:.1} s",
            if mismatched.is_empty() { "none".to_string() } else { mismatched.join(", ") }
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1", "AMALA vs MALA benchmark", criterion_1),
        ("2", "sampler stationarity on N(0,1)", criterion_2),
        (
            "3",
            "rank-one proposal density vs dense oracle",
            criterion_3,
        ),
        ("4", "toy SAEM vs ML oracle and exact sampler", criterion_4),
        ("5", "CLT shape of final sigma2", criterion_5),
        ("6", "template model synthetic recovery", criterion_6),
        ("7", "3-class classification", criterion_7),
        ("8", "gradient suites", criterion_8),
        ("9", "determinism across thread counts", criterion_9),
    ];
    let selected: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    let mut ran = 0;
    for (id, title, check) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        ran += 1;
        let v = check();
        if !v.pass {
            failures += 1;
        }
        println!(
            "{} [{id}] {title}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("{}/{ran} criteria passed", ran - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
