use std::io::{BufReader, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{BenchConfig, ExperimentConfig, ExperimentKind, SaemConfig, TemplateConfig};
use super::{derive_seed, Outputs};
use crate::bme::{
    class_scores, read_pgm, sample_independent, sample_synthetic, smooth_deformation_covariance,
    template_coefficients, write_pgm, BmeHyperPriors, BmeModel, BmeParams, FittedModel,
    TemplateSpec,
};
use crate::diagnostics::{
    acceptance_rate, fmt_f64, mean_autocorrelation, msejd, write_acf_csv, write_summary_csv,
    ChainTrace,
};
use crate::error::{Error, Result};
use crate::model::{norm, LatentModel, LogDensity};
use crate::saem::{
    clt_study, run_saem, ExactPosterior, LatentSampler, Trajectory, TruncationPolicy,
};
use crate::samplers::{anisotropic_term_amplitude, ChainState, ProposalSpec, Sampler};
use crate::toy::{AnisoGaussianTarget, RandomEffectsModel};

type Metrics = Vec<(String, f64)>;

pub(super) fn dispatch(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    match config.kind {
        ExperimentKind::BenchSampler => bench_sampler(config, out),
        ExperimentKind::FitToy => fit_toy(config, out),
        ExperimentKind::CltStudy => clt(config, out),
        ExperimentKind::FitTemplate => fit_template(config, out),
        ExperimentKind::SampleSynthetic => synthetic(config, out),
        ExperimentKind::Classify => classify_run(config, out),
    }
}

/// Post-burn-in trace of one chain and the anisotropic-term amplitude
/// `|D|^2` at every recorded state.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub trace: ChainTrace,
    pub amplitudes: Vec<f64>,
}

pub fn run_chain<T: LogDensity + ?Sized>(
    sampler: &Sampler,
    target: &T,
    start: Vec<f64>,
    burn_in: usize,
    steps: usize,
    seed: u64,
) -> Result<ChainRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::new(target, start, sampler.drift_threshold())?;
    let mut trace = ChainTrace::with_capacity(steps);
    let mut amplitudes = Vec::with_capacity(steps);
    for k in 0..burn_in + steps {
        let outcome = sampler.step(target, &state, &mut rng);
        if k >= burn_in {
            trace.record(&outcome);
            amplitudes.push(anisotropic_term_amplitude(&outcome.state.drift));
        }
        state = outcome.state;
    }
    Ok(ChainRun { trace, amplitudes })
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub amala: ChainRun,
    pub mala: ChainRun,
    /// Coordinate-averaged autocorrelations up to `max_lag`.
    pub acf_amala: Vec<f64>,
    pub acf_mala: Vec<f64>,
}

impl BenchResult {
    pub fn amplitude_ratio(&self) -> f64 {
        let a = &self.amala.amplitudes;
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        a.iter().cloned().fold(0.0, f64::max) / mean
    }

    /// `(sampler, metric, value)` rows.
    pub fn summary_rows(&self) -> Vec<(String, String, f64)> {
        let mut rows = Vec::new();
        for (name, run, acf) in [
            ("amala", &self.amala, &self.acf_amala),
            ("mala", &self.mala, &self.acf_mala),
        ] {
            let mut push = |m: &str, v: f64| rows.push((name.to_string(), m.to_string(), v));
            push("msejd", msejd(&run.trace));
            push("acceptance", acceptance_rate(&run.trace));
            for lag in [1, 5, 10, 20] {
                if lag < acf.len() {
                    push(&format!("acf_lag{lag}"), acf[lag]);
                }
            }
        }
        let a = &self.amala.amplitudes;
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        rows.push(("amala".into(), "anisotropic_amplitude_mean".into(), mean));
        rows.push((
            "amala".into(),
            "anisotropic_amplitude_max".into(),
            a.iter().cloned().fold(0.0, f64::max),
        ));
        rows.push((
            "amala".into(),
            "anisotropic_amplitude_max_over_mean".into(),
            self.amplitude_ratio(),
        ));
        rows
    }
}

/// AMALA with `amala` and MALA with step `bench.mala_delta` on the rotated
/// Gaussian, both started at the origin.
pub fn sampler_benchmark(
    bench: &BenchConfig,
    amala: ProposalSpec,
    seed: u64,
) -> Result<BenchResult> {
    let target = AnisoGaussianTarget::linspace(
        bench.dim,
        bench.eig_min,
        bench.eig_max,
        bench.rotation_seed,
    )?;
    let mala = Sampler::Mala(ProposalSpec::new(bench.mala_delta, amala.b, amala.eps)?);
    let start = vec![0.0; bench.dim];
    let a = run_chain(
        &Sampler::Amala(amala),
        &target,
        start.clone(),
        bench.burn_in,
        bench.steps,
        derive_seed(seed, 1),
    )?;
    let m = run_chain(
        &mala,
        &target,
        start,
        bench.burn_in,
        bench.steps,
        derive_seed(seed, 2),
    )?;
    let acf_amala = mean_autocorrelation(&a.trace, bench.max_lag);
    let acf_mala = mean_autocorrelation(&m.trace, bench.max_lag);
    Ok(BenchResult {
        amala: a,
        mala: m,
        acf_amala,
        acf_mala,
    })
}

fn bench_sampler(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    let s = &config.sampler;
    let result = sampler_benchmark(
        &config.bench,
        ProposalSpec::new(s.delta, s.b, s.eps)?,
        config.seed,
    )?;
    out.with("acf_amala.csv", |w| write_acf_csv(w, &result.acf_amala))?;
    out.with("acf_mala.csv", |w| write_acf_csv(w, &result.acf_mala))?;
    let rows = result.summary_rows();
    out.with("summary.csv", |w| write_summary_csv(w, &rows))?;
    Ok(rows
        .into_iter()
        .map(|(s, m, v)| (format!("{s}.{m}"), v))
        .collect())
}

fn write_metrics(out: &mut Outputs, metrics: &Metrics) -> Result<()> {
    out.with("metrics.csv", |w| {
        writeln!(w, "metric,value")?;
        for (m, v) in metrics {
            writeln!(w, "{m},{}", fmt_f64(*v))?;
        }
        Ok(())
    })
}

fn truncation_policy<M: LatentModel>(model: &M, saem: &SaemConfig) -> Result<TruncationPolicy> {
    if saem.radius0.is_none() && saem.eps0.is_none() {
        return TruncationPolicy::for_model(model);
    }
    let scale = 1.0 + norm(&model.suff_stats(&model.initial_latent()));
    TruncationPolicy::with_scales(
        model,
        saem.radius0.unwrap_or(10.0 * scale),
        saem.eps0.unwrap_or(100.0 * scale),
    )
}

fn toy_model(config: &ExperimentConfig) -> Result<RandomEffectsModel> {
    match &config.toy.data {
        Some(path) => RandomEffectsModel::read_csv(BufReader::new(std::fs::File::open(path)?)),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
            RandomEffectsModel::simulate(
                config.toy.groups,
                config.toy.reps,
                config.toy.truth,
                &mut rng,
            )
        }
    }
}

fn mean_acceptance<T>(t: &Trajectory<T>) -> f64 {
    t.records.iter().map(|r| r.acceptance).sum::<f64>() / t.records.len() as f64
}

fn fit_toy(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    let model = toy_model(config)?;
    out.with("data.csv", |w| model.write_csv(w))?;
    let policy = truncation_policy(&model, &config.saem)?;
    let kernel = config.sampler.kernel()?;
    let (schedule, iterations) = (&config.saem.schedule, config.saem.iterations);
    let seed = derive_seed(config.seed, 2);
    let fit = run_saem(&model, &kernel, schedule, &policy, iterations, seed)?;
    out.with("trajectory.csv", |w| fit.write_csv(w))?;
    let exact = run_saem(&model, &ExactPosterior, schedule, &policy, iterations, seed)?;
    out.with("trajectory_exact.csv", |w| exact.write_csv(w))?;
    let ml = model.ml_oracle();
    let (a, e, o) = (
        fit.final_theta_values(),
        exact.final_theta_values(),
        ml.theta.to_vec(),
    );
    out.with("final_theta.csv", |w| {
        writeln!(w, "parameter,saem,exact,ml_oracle")?;
        for (i, name) in fit.theta_names.iter().enumerate() {
            writeln!(
                w,
                "{name},{},{},{}",
                fmt_f64(a[i]),
                fmt_f64(e[i]),
                fmt_f64(o[i])
            )?;
        }
        Ok(())
    })?;
    let mut metrics = Metrics::new();
    for (i, name) in fit.theta_names.iter().enumerate() {
        metrics.push((format!("saem.{name}"), a[i]));
        metrics.push((format!("exact.{name}"), e[i]));
        metrics.push((format!("ml.{name}"), o[i]));
    }
    let gap = a
        .iter()
        .zip(e)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    metrics.push(("max_abs_gap_to_exact".into(), gap));
    metrics.push((
        "ml_at_boundary".into(),
        if ml.at_boundary { 1.0 } else { 0.0 },
    ));
    metrics.push(("truncations".into(), fit.final_state.kappa as f64));
    metrics.push((
        "truncations_after_burn_in".into(),
        fit.truncations_after(schedule.burn_in) as f64,
    ));
    metrics.push(("mean_acceptance".into(), mean_acceptance(&fit)));
    metrics.push((
        "log_likelihood_saem".into(),
        model.observed_log_likelihood(&fit.final_state.theta),
    ));
    metrics.push((
        "log_likelihood_ml".into(),
        model.observed_log_likelihood(&ml.theta),
    ));
    write_metrics(out, &metrics)?;
    Ok(metrics)
}

fn clt(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    let model = toy_model(config)?;
    out.with("data.csv", |w| model.write_csv(w))?;
    let policy = truncation_policy(&model, &config.saem)?;
    let kernel = config.sampler.kernel()?;
    let a = &config.saem;
    let summary = clt_study(
        &model,
        &kernel,
        &a.schedule,
        &policy,
        a.iterations,
        a.replicates,
        derive_seed(config.seed, 2),
        a.clt_coordinate,
    )?;
    let names = model.theta_names();
    out.with("finals.csv", |w| {
        writeln!(w, "replicate,{}", names.join(","))?;
        for (r, theta) in summary.finals.iter().enumerate() {
            let v: Vec<String> = theta.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(w, "{r},{}", v.join(","))?;
        }
        Ok(())
    })?;
    out.with("histogram.csv", |w| {
        writeln!(w, "bin_lower,count")?;
        for (lo, c) in &summary.histogram {
            writeln!(w, "{lo},{c}")?;
        }
        Ok(())
    })?;
    let m = &summary.moments;
    let metrics: Metrics = vec![
        ("coordinate".into(), summary.coordinate as f64),
        ("mean".into(), m.mean),
        ("std_dev".into(), m.std_dev),
        ("skewness".into(), m.skewness),
        ("excess_kurtosis".into(), m.excess_kurtosis),
        ("truncations".into(), summary.truncations as f64),
    ];
    write_metrics(out, &metrics)?;
    Ok(metrics)
}

fn template_spec(t: &TemplateConfig) -> Result<TemplateSpec> {
    TemplateSpec::square(t.grid_side, t.photo_side, t.geo_side)
}

/// Ring of radius 0.5 and width 0.15 with peak gray level 1.6, seen
/// through smooth deformations with the given variances.
pub fn ring_truth(
    spec: &TemplateSpec,
    sigma2: f64,
    gamma_x: f64,
    gamma_y: f64,
) -> Result<BmeParams> {
    let alpha = template_coefficients(spec, |p| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        1.6 * (-(r - 0.5).powi(2) / (2.0 * 0.15 * 0.15)).exp()
    });
    BmeParams::new(
        alpha,
        sigma2,
        smooth_deformation_covariance(spec, gamma_x, gamma_y),
    )
}

/// Three classes of Gaussian blobs (width 0.3, peak 1.6) centred at
/// `(-0.4, -0.3)`, `(0.4, -0.3)` and `(0, 0.4)`.
pub fn blob_classes(
    spec: &TemplateSpec,
    sigma2: f64,
    gamma_x: f64,
    gamma_y: f64,
) -> Result<Vec<BmeParams>> {
    [(-0.4, -0.3), (0.4, -0.3), (0.0, 0.4)]
        .into_iter()
        .map(|(cx, cy)| {
            let alpha = template_coefficients(spec, |p| {
                1.6 * (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / (2.0 * 0.3 * 0.3)).exp()
            });
            BmeParams::new(
                alpha,
                sigma2,
                smooth_deformation_covariance(spec, gamma_x, gamma_y),
            )
        })
        .collect()
}

fn pgm(out: &mut Outputs, name: &str, spec: &TemplateSpec, values: &[f64]) -> Result<()> {
    out.with(name, |w| {
        write_pgm(w, spec.grid_side, spec.grid_side, values)
    })
}

fn fit_images<S: LatentSampler<BmeModel>>(
    config: &ExperimentConfig,
    spec: &TemplateSpec,
    images: Vec<Vec<f64>>,
    sampler: &S,
    seed: u64,
) -> Result<(BmeModel, Trajectory<BmeParams>)> {
    let t = &config.template;
    let hyper = BmeHyperPriors::for_spec(spec, t.sigma0_sq, t.sigma_g_scale)?;
    let model = BmeModel::new(spec.clone(), hyper, images)?;
    let policy = truncation_policy(&model, &config.saem)?;
    let fit = run_saem(
        &model,
        sampler,
        &config.saem.schedule,
        &policy,
        config.saem.iterations,
        seed,
    )?;
    Ok((model, fit))
}

fn relative_l2(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (num / reference.iter().map(|y| y * y).sum::<f64>()).sqrt()
}

fn fit_template(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    let t = &config.template;
    let spec = template_spec(t)?;
    let truth = ring_truth(&spec, t.sigma2, t.gamma_x, t.gamma_y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let sample = sample_independent(&truth, &spec, t.images, &mut rng)?;
    for (i, img) in sample.images.iter().enumerate() {
        pgm(out, &format!("image_{i:03}.pgm"), &spec, img)?;
    }
    let kernel = config.sampler.kernel()?;
    let (_, fit) = fit_images(
        config,
        &spec,
        sample.images.clone(),
        &kernel,
        derive_seed(config.seed, 2),
    )?;
    let theta = &fit.final_state.theta;
    let (kp, d) = (spec.k_p(), spec.latent_dim());

    out.with("trajectory.csv", |w| {
        writeln!(w, "k,sigma2,alpha_norm,gamma_trace,s_norm,event,acceptance")?;
        for r in &fit.records {
            let trace: f64 = (0..d).map(|i| r.theta[kp + 1 + i * d + i]).sum();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.theta[kp]),
                fmt_f64(norm(&r.theta[..kp])),
                fmt_f64(trace),
                fmt_f64(norm(&r.s)),
                r.event.label(),
                fmt_f64(r.acceptance)
            )?;
        }
        Ok(())
    })?;
    out.with("final_theta.csv", |w| {
        writeln!(w, "parameter,value")?;
        for (name, v) in fit.theta_names.iter().zip(fit.final_theta_values()) {
            writeln!(w, "{name},{}", fmt_f64(*v))?;
        }
        Ok(())
    })?;
    let fitted = FittedModel {
        spec: spec.clone(),
        params: theta.clone(),
    };
    out.with("model.txt", |w| fitted.write(w))?;
    let true_image = spec.eval_template(&truth.alpha, spec.pixels());
    let fit_image = spec.eval_template(&theta.alpha, spec.pixels());
    pgm(out, "truth_template.pgm", &spec, &true_image)?;
    pgm(out, "template.pgm", &spec, &fit_image)?;

    let gamma_err = (theta.gamma() - truth.gamma()).norm() / truth.gamma().norm();
    let mut s3 = DMatrix::zeros(d, d);
    for z in &sample.latents {
        let v = DVector::from_column_slice(z);
        s3 += &v * v.transpose();
    }
    let empirical_err =
        (s3 / sample.latents.len() as f64 - truth.gamma()).norm() / truth.gamma().norm();
    let metrics: Metrics = vec![
        (
            "template_rel_error".into(),
            relative_l2(&fit_image, &true_image),
        ),
        ("sigma2".into(), theta.sigma2),
        ("sigma2_ratio".into(), theta.sigma2 / truth.sigma2),
        ("gamma_rel_error".into(), gamma_err),
        ("gamma_rel_error_of_true_latents".into(), empirical_err),
        (
            "gamma_spd".into(),
            if theta.gamma().clone().cholesky().is_some() {
                1.0
            } else {
                0.0
            },
        ),
        ("truncations".into(), fit.final_state.kappa as f64),
        ("mean_acceptance".into(), mean_acceptance(&fit)),
    ];
    write_metrics(out, &metrics)?;
    Ok(metrics)
}

fn synthetic(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    let t = &config.template;
    let model = match &t.model {
        Some(path) => FittedModel::read(BufReader::new(std::fs::File::open(path)?))?,
        None => {
            let spec = template_spec(t)?;
            let params = ring_truth(&spec, t.sigma2, t.gamma_x, t.gamma_y)?;
            FittedModel { spec, params }
        }
    };
    let spec = &model.spec;
    pgm(
        out,
        "template.pgm",
        spec,
        &spec.eval_template(&model.params.alpha, spec.pixels()),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let sample = sample_synthetic(&model.params, spec, t.count, &mut rng)?;
    for (i, img) in sample.images.iter().enumerate() {
        pgm(out, &format!("sample_{i:03}.pgm"), spec, img)?;
    }
    out.with("latents.csv", |w| {
        let cols: Vec<String> = (0..spec.latent_dim()).map(|j| format!("z_{j}")).collect();
        writeln!(w, "sample,{}", cols.join(","))?;
        for (i, z) in sample.latents.iter().enumerate() {
            let v: Vec<String> = z.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(w, "{i},{}", v.join(","))?;
        }
        Ok(())
    })?;
    let metrics: Metrics = vec![("samples".into(), sample.images.len() as f64)];
    write_metrics(out, &metrics)?;
    Ok(metrics)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn score_all(images: &[Vec<f64>], models: &[FittedModel]) -> Result<Vec<Vec<f64>>> {
    images.par_iter().map(|y| class_scores(y, models)).collect()
}

fn classify_run(config: &ExperimentConfig, out: &mut Outputs) -> Result<Metrics> {
    let c = &config.classify;
    if !c.models.is_empty() {
        let models = c
            .models
            .iter()
            .map(|p| FittedModel::read(BufReader::new(std::fs::File::open(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut images = Vec::new();
        for p in &c.images {
            let img = read_pgm(std::fs::File::open(p)?)?;
            for m in &models {
                if img.width != m.spec.grid_side || img.height != m.spec.grid_side {
                    return Err(Error::Format(format!(
                        "{} is {}x{}, models expect {}x{}",
                        p.display(),
                        img.width,
                        img.height,
                        m.spec.grid_side,
                        m.spec.grid_side
                    )));
                }
            }
            images.push(img.values);
        }
        let scores = score_all(&images, &models)?;
        out.with("predictions.csv", |w| {
            let cols: Vec<String> = (0..models.len()).map(|k| format!("score_{k}")).collect();
            writeln!(w, "image,predicted,{}", cols.join(","))?;
            for (p, s) in c.images.iter().zip(&scores) {
                let v: Vec<String> = s.iter().map(|x| fmt_f64(*x)).collect();
                writeln!(w, "{},{},{}", p.display(), argmax(s), v.join(","))?;
            }
            Ok(())
        })?;
        let metrics: Metrics = vec![("images".into(), images.len() as f64)];
        write_metrics(out, &metrics)?;
        return Ok(metrics);
    }

    let t = &config.template;
    let spec = template_spec(t)?;
    let classes = blob_classes(&spec, t.sigma2, t.gamma_x, t.gamma_y)?;
    let kernel = config.sampler.kernel()?;
    let fitted = classes
        .par_iter()
        .enumerate()
        .map(|(k, truth)| {
            let k = k as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 10 + k));
            let train = sample_independent(truth, &spec, c.train_per_class, &mut rng)?;
            let (_, fit) = fit_images(
                config,
                &spec,
                train.images,
                &kernel,
                derive_seed(config.seed, 20 + k),
            )?;
            Ok(FittedModel {
                spec: spec.clone(),
                params: fit.final_state.theta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for (k, m) in fitted.iter().enumerate() {
        out.with(&format!("model_class_{k}.txt"), |w| m.write(w))?;
        pgm(
            out,
            &format!("template_class_{k}.pgm"),
            &spec,
            &spec.eval_template(&m.params.alpha, spec.pixels()),
        )?;
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (k, truth) in classes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 30 + k as u64));
        images.extend(sample_independent(truth, &spec, c.test_per_class, &mut rng)?.images);
        labels.extend(std::iter::repeat_n(k, c.test_per_class));
    }
    let scores = score_all(&images, &fitted)?;
    let predicted: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    out.with("predictions.csv", |w| {
        writeln!(w, "image,true_class,predicted,score_0,score_1,score_2")?;
        for (i, s) in scores.iter().enumerate() {
            let v: Vec<String> = s.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(w, "{i},{},{},{}", labels[i], predicted[i], v.join(","))?;
        }
        Ok(())
    })?;
    let errors = labels
        .iter()
        .zip(&predicted)
        .filter(|(a, b)| a != b)
        .count();
    let mut metrics: Metrics = vec![
        ("test_images".into(), images.len() as f64),
        ("errors".into(), errors as f64),
        ("error_rate".into(), errors as f64 / images.len() as f64),
    ];
    for k in 0..classes.len() {
        let e = (0..labels.len())
            .filter(|&i| labels[i] == k && predicted[i] != k)
            .count();
        metrics.push((format!("errors_class_{k}"), e as f64));
    }
    write_metrics(out, &metrics)?;
    Ok(metrics)
}
