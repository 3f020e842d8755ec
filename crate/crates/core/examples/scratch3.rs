use amala_saem::saem::*;
use amala_saem::samplers::*;
use amala_saem::toy::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sweep = if args[0] == "joint" {
        Sweep::Joint
    } else {
        Sweep::PerBlock
    };
    let d: f64 = args[1].parse().unwrap();
    let e: f64 = args[2].parse().unwrap();
    let iters: usize = args[3].parse().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let m = RandomEffectsModel::simulate(
        200,
        10,
        ToyParams {
            mu: 1.0,
            tau2: 1.0,
            sigma2: 1.0,
        },
        &mut rng,
    )
    .unwrap();
    let ml = m.ml_oracle().theta.to_vec();
    println!("ml {:?}", ml);
    let policy = TruncationPolicy::for_model(&m).unwrap();
    let sch = StepSchedule::default();
    let k = MarkovKernel {
        sampler: Sampler::Amala(ProposalSpec::new(d, 1000.0, e).unwrap()),
        sweep,
    };
    let t0 = std::time::Instant::now();
    for seed in 1..6 {
        let a = run_saem(&m, &k, &sch, &policy, iters, seed).unwrap();
        let x = run_saem(&m, &ExactPosterior, &sch, &policy, iters, seed).unwrap();
        let acc: f64 = a.records.iter().map(|r| r.acceptance).sum::<f64>() / iters as f64;
        let fa = a.final_theta_values();
        let fx = x.final_theta_values();
        println!(
            "seed {seed}: amala {:.4?} exact {:.4?} acc {acc:.3} trunc {}",
            fa, fx, a.final_state.kappa
        );
    }
    println!("time {:?}", t0.elapsed());
}
