use amala_saem::diagnostics::*;
use amala_saem::samplers::*;
use amala_saem::toy::*;
use amala_saem::LogDensity;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

fn run<T: LogDensity>(s: Sampler, t: &T, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = ChainState::new(t, vec![0.0; t.dim()], s.drift_threshold()).unwrap();
    let mut out = vec![];
    for _ in 0..n {
        let o = s.step(t, &st, &mut rng);
        st = o.state;
        out.push(st.z[0]);
    }
    out
}

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let samplers = [
        Sampler::Amala(ProposalSpec::new(args[0], 1000.0, args[1]).unwrap()),
        Sampler::Mala(ProposalSpec::new(args[2], 1000.0, 1.0).unwrap()),
        Sampler::HybridGibbs {
            per_coord_std: args[3],
        },
    ];
    let n = Normal::new(0.0, 1.0).unwrap();
    let t5 = StudentsT::new(0.0, 1.0, 5.0).unwrap();
    for seed in 1..4u64 {
        for s in samplers {
            let x = run(s, &StandardGaussian { dim: 1 }, 200_000, seed);
            let m = x.iter().sum::<f64>() / x.len() as f64;
            let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64;
            let ks = ks_distance(&x, |a| n.cdf(a));
            let y = run(s, &StudentT { nu: 5.0 }, 200_000, seed);
            let kt = ks_distance(&y, |a| t5.cdf(a));
            println!(
                "{} seed {seed}: mean {m:.4} var {v:.4} ks {ks:.4} | t5 ks {kt:.4}",
                s.name()
            );
        }
    }
}
