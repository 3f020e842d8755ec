use amala_saem::bme::*;
use amala_saem::saem::*;
use amala_saem::samplers::*;
use amala_saem::LatentModel;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let a: Vec<String> = std::env::args().skip(1).collect();
    let gx: f64 = a[0].parse().unwrap();
    let sg: f64 = a[1].parse().unwrap();
    let d: f64 = a[2].parse().unwrap();
    let e: f64 = a[3].parse().unwrap();
    let iters: usize = a[4].parse().unwrap();
    let sweep = if a[5] == "joint" {
        Sweep::Joint
    } else {
        Sweep::PerBlock
    };
    let spec = TemplateSpec::default();
    let pts = spec.photo_points().to_vec();
    let alpha: Vec<f64> = pts
        .iter()
        .map(|p| {
            let r = ((p[0]).powi(2) + (p[1]).powi(2)).sqrt();
            1.6 * (-(r - 0.5).powi(2) / (2.0 * 0.15f64.powi(2))).exp()
        })
        .collect();
    let g = spec.geo_gram();
    let k = spec.k_g();
    let gamma = DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        if r % 2 == c % 2 {
            gx * if r % 2 == 0 {
                1.0
            } else {
                a[7].parse::<f64>().unwrap()
            } * g[(r / 2, c / 2)]
        } else {
            0.0
        }
    });
    let truth = BmeParams::new(alpha.clone(), 0.04, gamma.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(a[8].parse().unwrap());
    let sample = sample_synthetic(&truth, &spec, 20, &mut rng).unwrap();
    let hyper = BmeHyperPriors::for_spec(&spec, 0.04, sg).unwrap();
    let model = BmeModel::new(spec.clone(), hyper, sample.images.clone()).unwrap();
    let policy = TruncationPolicy::for_model(&model).unwrap();
    let kern = MarkovKernel {
        sampler: Sampler::Amala(ProposalSpec::new(d, a[6].parse().unwrap(), e).unwrap()),
        sweep,
    };
    let t0 = std::time::Instant::now();
    let tr = run_saem(&model, &kern, &StepSchedule::default(), &policy, iters, 1).unwrap();
    let th = &tr.final_state.theta;
    let acc: f64 = tr
        .records
        .iter()
        .skip(iters / 2)
        .map(|r| r.acceptance)
        .sum::<f64>()
        / (iters - iters / 2) as f64;
    let t_true = spec.eval_template(&alpha, spec.pixels());
    let t_fit = spec.eval_template(&th.alpha, spec.pixels());
    let num: f64 = t_true
        .iter()
        .zip(&t_fit)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = t_true.iter().map(|a| a * a).sum::<f64>().sqrt();
    let gerr = (th.gamma() - &gamma).norm() / gamma.norm();
    // empirical S3 of true latents
    let mut s3 = DMatrix::zeros(18, 18);
    for z in &sample.latents {
        let v = nalgebra::DVector::from_column_slice(z);
        s3 += &v * v.transpose();
    }
    let emp = (&s3 / 20.0 - &gamma).norm() / gamma.norm();
    println!(
        "tmpl {:.4} sigma2 {:.5} gamma {:.4} (empirical {:.4}) acc {:.3} trunc {} time {:?}",
        num / den,
        th.sigma2,
        gerr,
        emp,
        acc,
        tr.final_state.kappa,
        t0.elapsed()
    );
    println!(
        "diag fit {:?}",
        (0..18)
            .map(|i| format!("{:.4}", th.gamma()[(i, i)]))
            .collect::<Vec<_>>()
    );
    println!(
        "diag tru {:?}",
        (0..18)
            .map(|i| format!("{:.4}", gamma[(i, i)]))
            .collect::<Vec<_>>()
    );
    let _ = model.stat_dim();
}
