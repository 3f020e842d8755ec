use amala_saem::diagnostics::*;
use amala_saem::samplers::*;
use amala_saem::toy::*;
use amala_saem::LogDensity;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run<T: LogDensity>(
    s: Sampler,
    t: &T,
    n: usize,
    burn: usize,
    seed: u64,
) -> (ChainTrace, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = ChainState::new(t, vec![0.0; t.dim()], s.drift_threshold()).unwrap();
    let mut tr = ChainTrace::with_capacity(n);
    let mut amp = vec![];
    for k in 0..n + burn {
        let o = s.step(t, &st, &mut rng);
        st = o.state.clone();
        if k >= burn {
            tr.record(&o);
            amp.push(anisotropic_term_amplitude(&st.drift));
        }
    }
    (tr, amp)
}

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let (da, ea, dm, seed, cs) = (args[0], args[1], args[2], args[3] as u64, args[4] as u64);
    let t = AnisoGaussianTarget::linspace(10, 1.0, 10.0, seed).unwrap();
    let (ta, amp) = run(
        Sampler::Amala(ProposalSpec::new(da, 1000.0, ea).unwrap()),
        &t,
        100_000,
        1000,
        cs,
    );
    let (tm, _) = run(
        Sampler::Mala(ProposalSpec::new(dm, 1000.0, 1.0).unwrap()),
        &t,
        100_000,
        1000,
        cs + 1000,
    );
    let aa = mean_autocorrelation(&ta, 20);
    let am = mean_autocorrelation(&tm, 20);
    let mean_amp = amp.iter().sum::<f64>() / amp.len() as f64;
    let max_amp = amp.iter().cloned().fold(0.0, f64::max);
    println!(
        "AMALA msejd {:.3} acc {:.3} | MALA msejd {:.3} acc {:.3}",
        msejd(&ta),
        acceptance_rate(&ta),
        msejd(&tm),
        acceptance_rate(&tm)
    );
    println!(
        "acf5 {:.3}/{:.3} acf10 {:.3}/{:.3} acf20 {:.3}/{:.3}",
        aa[5], am[5], aa[10], am[10], aa[20], am[20]
    );
    println!(
        "amp mean {:.3} max {:.3} ratio {:.2}",
        mean_amp,
        max_amp,
        max_amp / mean_amp
    );
}
