use super::*;
use crate::diagnostics::{acceptance_rate, ChainTrace};
use crate::toy::StandardGaussian;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Wraps a target and reports a zero gradient everywhere.
struct ZeroGrad<T>(T);

impl<T: LogDensity> LogDensity for ZeroGrad<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x)
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// Adds a constant to the log-density.
struct Offset<T>(T, f64);

impl<T: LogDensity> LogDensity for Offset<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x) + self.1
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        self.0.grad_log_density(x)
    }
}

struct Flat(usize);

impl LogDensity for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// Log-density that is -inf away from the origin half-line x > 0.
struct HalfLine;

impl LogDensity for HalfLine {
    fn dim(&self) -> usize {
        1
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        if x[0] > 0.0 {
            -x[0]
        } else {
            f64::NEG_INFINITY
        }
    }
    fn grad_log_density(&self, _: &[f64]) -> Vec<f64> {
        vec![-1.0]
    }
}

/// Reference symmetric random-walk Metropolis with covariance `scale^2 I`,
/// consuming the rng exactly like the samplers above.
fn random_walk_step<T: LogDensity, R: Rng>(
    target: &T,
    z: &[f64],
    logp: f64,
    scale: f64,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let xi = standard_normals(rng, z.len());
    let z_c: Vec<f64> = z.iter().zip(&xi).map(|(a, x)| a + scale * x).collect();
    let lp_c = target.log_density(&z_c);
    let u: f64 = rng.random();
    if u.ln() < (lp_c - logp).min(0.0) {
        (z_c, lp_c)
    } else {
        (z.to_vec(), logp)
    }
}

fn run<T: LogDensity>(
    sampler: Sampler,
    target: &T,
    start: Vec<f64>,
    steps: usize,
    seed: u64,
) -> ChainTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::new(target, start, sampler.drift_threshold()).unwrap();
    let mut trace = ChainTrace::with_capacity(steps);
    for _ in 0..steps {
        let out = sampler.step(target, &state, &mut rng);
        trace.record(&out);
        state = out.state;
    }
    trace
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}

#[test]
fn flat_target_always_accepts() {
    let spec = ProposalSpec::new(0.5, 1000.0, 0.1).unwrap();
    let trace = run(Sampler::Amala(spec), &Flat(3), vec![0.0; 3], 200, 1);
    assert_eq!(acceptance_rate(&trace), 1.0);
    assert!(trace.log_alphas.iter().all(|a| *a == 0.0));
}

#[test]
fn zero_gradient_amala_is_random_walk() {
    let spec = ProposalSpec::new(0.8, 1000.0, 0.5).unwrap();
    let target = ZeroGrad(StandardGaussian { dim: 3 });
    let trace = run(Sampler::Amala(spec), &target, vec![0.2, -0.1, 1.0], 500, 9);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut z = vec![0.2, -0.1, 1.0];
    let mut lp = target.log_density(&z);
    for draw in &trace.draws {
        (z, lp) = random_walk_step(&target, &z, lp, (spec.delta * spec.eps).sqrt(), &mut rng);
        assert_eq!(&z, draw);
    }
}

#[test]
fn mala_zero_gradient_ratio_is_target_ratio() {
    let spec = ProposalSpec::new(0.7, 1000.0, 1.0).unwrap();
    let target = ZeroGrad(StandardGaussian { dim: 2 });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = ChainState::new(&target, vec![0.5, 0.5], spec.b).unwrap();
    for _ in 0..100 {
        let before = state.clone();
        let out = mala_step(&target, &state, &spec, &mut rng);
        if out.accepted {
            let expected = (out.state.logp - before.logp).min(0.0);
            assert!((out.log_alpha - expected).abs() < 1e-12);
        }
        state = out.state;
    }
}

#[test]
fn rejection_keeps_state_bitwise() {
    let spec = ProposalSpec::new(2.0, 1000.0, 1.0).unwrap();
    for sampler in [
        Sampler::Amala(spec),
        Sampler::Mala(spec),
        Sampler::HybridGibbs { per_coord_std: 3.0 },
    ] {
        let target = StandardGaussian { dim: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut state = ChainState::new(&target, vec![0.3; 4], sampler.drift_threshold()).unwrap();
        let mut rejections = 0;
        for _ in 0..300 {
            let out = sampler.step(&target, &state, &mut rng);
            assert!(out.log_alpha <= 0.0);
            if !out.accepted {
                rejections += 1;
                assert_eq!(out.state, state);
            }
            state = out.state;
        }
        assert!(rejections > 0, "{} never rejected", sampler.name());
    }
}

#[test]
fn non_finite_candidates_are_rejected() {
    let spec = ProposalSpec::new(1.0, 1000.0, 1.0).unwrap();
    let trace = run(Sampler::Amala(spec), &HalfLine, vec![0.5], 2000, 5);
    assert!(trace.draws.iter().all(|d| d[0] > 0.0));
    assert!(trace.log_alphas.contains(&f64::NEG_INFINITY));
    trace.check_invariants().unwrap();
}

#[test]
fn log_alpha_invariant_under_constant_offset() {
    let spec = ProposalSpec::new(0.4, 1000.0, 0.3).unwrap();
    let base = crate::toy::StudentT { nu: 5.0 };
    let shifted = Offset(base, 1234.5);
    for sampler in [Sampler::Amala(spec), Sampler::Mala(spec)] {
        let a = run(sampler, &base, vec![0.1], 300, 6);
        let b = run(sampler, &shifted, vec![0.1], 300, 6);
        for (x, y) in a.log_alphas.iter().zip(&b.log_alphas) {
            assert!((x - y).abs() < 1e-9 || (x.is_infinite() && y.is_infinite()));
        }
        assert_eq!(a.accepted, b.accepted);
    }
}

#[test]
fn accepted_state_cache_is_coherent() {
    let spec = ProposalSpec::new(0.3, 2.0, 0.2).unwrap();
    let target = crate::toy::AnisoGaussianTarget::linspace(4, 1.0, 4.0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut state = ChainState::new(&target, vec![1.0, -2.0, 0.5, 3.0], spec.b).unwrap();
    for _ in 0..100 {
        state = amala_step(&target, &state, &spec, &mut rng).state;
        assert!(state.is_coherent(&target, spec.b));
    }
}

#[test]
fn gibbs_in_one_dimension_is_random_walk() {
    let target = StandardGaussian { dim: 1 };
    let trace = run(
        Sampler::HybridGibbs { per_coord_std: 2.4 },
        &target,
        vec![0.0],
        500,
        8,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut z = vec![0.0];
    let mut lp = target.log_density(&z);
    for draw in &trace.draws {
        (z, lp) = random_walk_step(&target, &z, lp, 2.4, &mut rng);
        assert_eq!(&z, draw);
    }
}

#[test]
fn gibbs_factorized_target_has_one_dimensional_rate() {
    let rate = |dim: usize| {
        let trace = run(
            Sampler::HybridGibbs { per_coord_std: 2.4 },
            &StandardGaussian { dim },
            vec![0.0; dim],
            40_000,
            10,
        );
        trace.log_alphas.iter().map(|a| a.exp()).sum::<f64>() / trace.len() as f64
    };
    let (one, two) = (rate(1), rate(2));
    // per-coordinate acceptance probability ~0.44 with Monte Carlo error ~0.005
    assert!((one - two).abs() < 0.02, "{one} vs {two}");
}

#[test]
fn one_dimensional_moments_short_run() {
    let spec_amala = ProposalSpec::new(0.5, 1000.0, 1e-4).unwrap();
    let spec_mala = ProposalSpec::new(1.0, 1000.0, 1e-4).unwrap();
    for sampler in [
        Sampler::Amala(spec_amala),
        Sampler::Mala(spec_mala),
        Sampler::HybridGibbs { per_coord_std: 2.4 },
    ] {
        let trace = run(sampler, &StandardGaussian { dim: 1 }, vec![0.0], 50_000, 11);
        let (mean, var) = moments(&trace.coordinate(0));
        assert!(mean.abs() < 0.05, "{}: mean {mean}", sampler.name());
        assert!((var - 1.0).abs() < 0.1, "{}: var {var}", sampler.name());
    }
}

#[test]
fn chain_state_rejects_wrong_dimension() {
    assert!(ChainState::new(&StandardGaussian { dim: 2 }, vec![0.0], 1.0).is_err());
    assert!(ChainState::new(&HalfLine, vec![-1.0], 1.0).is_err());
}
