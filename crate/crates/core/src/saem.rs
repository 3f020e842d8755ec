//! Stochastic-approximation EM with truncation on random boundaries.
//!
//! Each iteration draws a latent with one Markov transition at the current
//! parameter, moves the statistic towards `S(z)` by `gamma_k`, and resets to
//! a fixed pair `(z~, s~)` whenever the new statistic leaves the current
//! compact or jumps further than the current tolerance.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{fmt_f64, standardized_histogram, standardized_moments, MomentSummary};
use crate::error::{Error, Result};
use crate::model::{norm, BlockPosterior, LatentModel, Posterior};
use crate::samplers::{ChainState, Sampler};
use crate::toy::RandomEffectsModel;

/// `gamma_k = gamma0 * max(1, k - burn_in)^(-alpha_exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub gamma0: f64,
    pub alpha_exponent: f64,
    pub burn_in: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            gamma0: 1.0,
            alpha_exponent: 0.75,
            burn_in: 100,
        }
    }
}

impl StepSchedule {
    pub fn new(gamma0: f64, alpha_exponent: f64, burn_in: usize) -> Result<Self> {
        let schedule = Self {
            gamma0,
            alpha_exponent,
            burn_in,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma0 = {} must lie in (0, 1]",
                self.gamma0
            )));
        }
        if !(self.alpha_exponent > 2.0 / 3.0 && self.alpha_exponent < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_exponent = {} must lie in (2/3, 1)",
                self.alpha_exponent
            )));
        }
        Ok(())
    }

    /// Step size of iteration `k >= 1`.
    pub fn gamma(&self, k: usize) -> f64 {
        let t = k.saturating_sub(self.burn_in).max(1) as f64;
        self.gamma0 * t.powf(-self.alpha_exponent)
    }
}

/// Compacts `K_q` (balls of radius `radius0 * 2^q`), jump tolerances
/// `eps0 / max(1, q)`, the index rewind `psi(k) = -floor(k/2)`, and the
/// reinitialization pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationPolicy {
    pub radius0: f64,
    pub eps0: f64,
    pub reinit_latent: Vec<f64>,
    pub reinit_stat: Vec<f64>,
}

impl TruncationPolicy {
    /// Defaults scaled to the model: the reinit latent is the model's own
    /// starting point, `radius0 = 10 (1 + |s~|)` and `eps0 = 100 (1 + |s~|)`.
    pub fn for_model<M: LatentModel>(model: &M) -> Result<Self> {
        let z = model.initial_latent();
        let scale = 1.0 + norm(&model.suff_stats(&z));
        Self::with_scales(model, 10.0 * scale, 100.0 * scale)
    }

    /// Model starting point as reinit latent, its statistic projected into
    /// `K_0` as reinit statistic.
    pub fn with_scales<M: LatentModel>(model: &M, radius0: f64, eps0: f64) -> Result<Self> {
        let reinit_latent = model.initial_latent();
        let mut reinit_stat = model.suff_stats(&reinit_latent);
        let n = norm(&reinit_stat);
        if n > radius0 {
            let c = radius0 / n;
            reinit_stat.iter_mut().for_each(|v| *v *= c);
        }
        Self::new(model, radius0, eps0, reinit_latent, reinit_stat)
    }

    pub fn new<M: LatentModel>(
        model: &M,
        radius0: f64,
        eps0: f64,
        reinit_latent: Vec<f64>,
        reinit_stat: Vec<f64>,
    ) -> Result<Self> {
        if !(radius0 > 0.0 && radius0.is_finite()) || !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::InvalidParameter(
                "radius0 and eps0 must be positive and finite".into(),
            ));
        }
        if reinit_latent.len() != model.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.latent_dim(),
                got: reinit_latent.len(),
            });
        }
        if reinit_stat.len() != model.stat_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.stat_dim(),
                got: reinit_stat.len(),
            });
        }
        if !model.in_stat_domain(&reinit_stat) || norm(&reinit_stat) > radius0 {
            return Err(Error::Domain("reinit statistic must lie in K_0".into()));
        }
        let theta = model.m_step(&reinit_stat)?;
        if !model.theta_in_domain(&theta) {
            return Err(Error::Domain("m_step of the reinit statistic".into()));
        }
        Ok(Self {
            radius0,
            eps0,
            reinit_latent,
            reinit_stat,
        })
    }

    pub fn radius(&self, q: usize) -> f64 {
        self.radius0 * 2f64.powi(q.min(1000) as i32)
    }

    pub fn eps(&self, q: usize) -> f64 {
        self.eps0 / q.max(1) as f64
    }

    pub fn psi(k: usize) -> i64 {
        -((k / 2) as i64)
    }
}

/// Where the latent draw of an iteration comes from.
pub trait LatentSampler<M: LatentModel>: Sync {
    /// New latent and the fraction of accepted proposals.
    fn draw<R: Rng + ?Sized>(
        &self,
        model: &M,
        theta: &M::Theta,
        z: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// One transition on the whole stacked latent.
    Joint,
    /// One transition per latent block, in block order.
    PerBlock,
}

/// A Metropolis-type kernel applied at the current parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovKernel {
    pub sampler: Sampler,
    pub sweep: Sweep,
}

impl<M: LatentModel> LatentSampler<M> for MarkovKernel {
    fn draw<R: Rng + ?Sized>(
        &self,
        model: &M,
        theta: &M::Theta,
        z: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        let b = self.sampler.drift_threshold();
        match self.sweep {
            Sweep::Joint => {
                let target = Posterior::new(model, theta);
                let state = ChainState::new(&target, z.to_vec(), b)?;
                let out = self.sampler.step(&target, &state, rng);
                Ok((out.state.z, if out.accepted { 1.0 } else { 0.0 }))
            }
            Sweep::PerBlock => {
                let blocks = model.latent_blocks();
                let mut current = z.to_vec();
                let mut accepted = 0usize;
                for (i, range) in blocks.iter().enumerate() {
                    let x = current[range.clone()].to_vec();
                    let out = {
                        let target = BlockPosterior {
                            model,
                            theta,
                            z: &current,
                            block: i,
                            len: range.len(),
                        };
                        let state = ChainState::new(&target, x, b)?;
                        self.sampler.step(&target, &state, rng)
                    };
                    if out.accepted {
                        accepted += 1;
                        current[range.clone()].copy_from_slice(&out.state.z);
                    }
                }
                Ok((current, accepted as f64 / blocks.len() as f64))
            }
        }
    }

    fn name(&self) -> String {
        match self.sweep {
            Sweep::Joint => self.sampler.name().to_string(),
            Sweep::PerBlock => format!("{}-per-block", self.sampler.name()),
        }
    }
}

/// Independent draws from the exact Gaussian posterior of the toy model.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactPosterior;

impl LatentSampler<RandomEffectsModel> for ExactPosterior {
    fn draw<R: Rng + ?Sized>(
        &self,
        model: &RandomEffectsModel,
        theta: &<RandomEffectsModel as LatentModel>::Theta,
        _z: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        Ok((model.exact_posterior_sample(theta, rng), 1.0))
    }

    fn name(&self) -> String {
        "exact".into()
    }
}

#[derive(Debug, Clone)]
pub struct SaemState<T> {
    pub k: usize,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub theta: T,
    /// Number of truncations so far.
    pub kappa: usize,
    /// Iterations since the last truncation.
    pub nu: usize,
    /// Index into the jump-tolerance sequence.
    pub zeta: usize,
}

impl<T> SaemState<T> {
    pub fn initial<M: LatentModel<Theta = T>>(
        model: &M,
        policy: &TruncationPolicy,
    ) -> Result<Self> {
        Ok(Self {
            k: 0,
            z: policy.reinit_latent.clone(),
            s: policy.reinit_stat.clone(),
            theta: model.m_step(&policy.reinit_stat)?,
            kappa: 0,
            nu: 0,
            zeta: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationCause {
    SamplerFailure,
    NonFiniteStatistic,
    OutsideDomain,
    OutsideCompact,
    JumpTooLarge,
    MStepFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Accepted,
    Truncated(TruncationCause),
}

impl Event {
    pub fn label(&self) -> &'static str {
        match self {
            Event::Accepted => "accepted",
            Event::Truncated(TruncationCause::SamplerFailure) => "truncated:sampler",
            Event::Truncated(TruncationCause::NonFiniteStatistic) => "truncated:non-finite",
            Event::Truncated(TruncationCause::OutsideDomain) => "truncated:domain",
            Event::Truncated(TruncationCause::OutsideCompact) => "truncated:compact",
            Event::Truncated(TruncationCause::JumpTooLarge) => "truncated:jump",
            Event::Truncated(TruncationCause::MStepFailure) => "truncated:m-step",
        }
    }

    pub fn is_truncation(&self) -> bool {
        matches!(self, Event::Truncated(_))
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub theta: Vec<f64>,
    pub s: Vec<f64>,
    pub event: Event,
    /// Fraction of accepted proposals in the simulation step.
    pub acceptance: f64,
}

/// One iteration of the algorithm. Fails only if the reinit statistic cannot
/// be mapped to a parameter, which [`TruncationPolicy::new`] rules out.
pub fn saem_iterate<M, S, R>(
    state: SaemState<M::Theta>,
    model: &M,
    sampler: &S,
    schedule: &StepSchedule,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<(SaemState<M::Theta>, IterationRecord)>
where
    M: LatentModel,
    S: LatentSampler<M>,
    R: Rng + ?Sized,
{
    let k = state.k + 1;
    let gamma = schedule.gamma(k);
    let mut acceptance = 0.0;

    let proposal = match sampler.draw(model, &state.theta, &state.z, rng) {
        Err(e) => {
            log::debug!("iteration {k}: sampler failed: {e}");
            Err(TruncationCause::SamplerFailure)
        }
        Ok((z_bar, acc)) => {
            acceptance = acc;
            let stats = model.suff_stats(&z_bar);
            let s_bar: Vec<f64> = if gamma == 1.0 {
                stats
            } else {
                state
                    .s
                    .iter()
                    .zip(&stats)
                    .map(|(s, t)| s + gamma * (t - s))
                    .collect()
            };
            let jump = norm(
                &state
                    .s
                    .iter()
                    .zip(&s_bar)
                    .map(|(a, b)| b - a)
                    .collect::<Vec<_>>(),
            );
            if s_bar.iter().any(|v| !v.is_finite()) {
                Err(TruncationCause::NonFiniteStatistic)
            } else if !model.in_stat_domain(&s_bar) {
                Err(TruncationCause::OutsideDomain)
            } else if norm(&s_bar) > policy.radius(state.kappa) {
                Err(TruncationCause::OutsideCompact)
            } else if jump > policy.eps(state.zeta) {
                Err(TruncationCause::JumpTooLarge)
            } else {
                match model.m_step(&s_bar) {
                    Ok(theta) if model.theta_in_domain(&theta) => Ok((z_bar, s_bar, theta)),
                    _ => Err(TruncationCause::MStepFailure),
                }
            }
        }
    };

    let (next, event) = match proposal {
        Ok((z, s, theta)) => (
            SaemState {
                k,
                z,
                s,
                theta,
                kappa: state.kappa,
                nu: state.nu + 1,
                zeta: state.zeta + 1,
            },
            Event::Accepted,
        ),
        Err(cause) => {
            log::debug!(
                "iteration {k}: truncation ({cause:?}), kappa -> {}",
                state.kappa + 1
            );
            let zeta = (state.zeta as i64 + TruncationPolicy::psi(state.nu)).max(0) as usize;
            let theta = model.m_step(&policy.reinit_stat)?;
            (
                SaemState {
                    k,
                    z: policy.reinit_latent.clone(),
                    s: policy.reinit_stat.clone(),
                    theta,
                    kappa: state.kappa + 1,
                    nu: 0,
                    zeta,
                },
                Event::Truncated(cause),
            )
        }
    };
    let record = IterationRecord {
        k,
        theta: model.theta_values(&next.theta),
        s: next.s.clone(),
        event,
        acceptance,
    };
    Ok((next, record))
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub records: Vec<IterationRecord>,
    pub final_state: SaemState<T>,
    pub theta_names: Vec<String>,
}

impl<T> Trajectory<T> {
    pub fn truncations_after(&self, k: usize) -> usize {
        self.records
            .iter()
            .filter(|r| r.k > k && r.event.is_truncation())
            .count()
    }

    pub fn final_theta_values(&self) -> &[f64] {
        self.records
            .last()
            .map(|r| r.theta.as_slice())
            .unwrap_or(&[])
    }

    /// Columns `k, <theta names>, s_norm, event, acceptance`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "k,{},s_norm,event,acceptance",
            self.theta_names.join(",")
        )?;
        for r in &self.records {
            let theta: Vec<String> = r.theta.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(
                out,
                "{},{},{},{},{}",
                r.k,
                theta.join(","),
                fmt_f64(norm(&r.s)),
                r.event.label(),
                fmt_f64(r.acceptance)
            )?;
        }
        Ok(())
    }
}

/// Full run from the policy's reinit pair, seeded with `seed`.
pub fn run_saem<M, S>(
    model: &M,
    sampler: &S,
    schedule: &StepSchedule,
    policy: &TruncationPolicy,
    iterations: usize,
    seed: u64,
) -> Result<Trajectory<M::Theta>>
where
    M: LatentModel,
    S: LatentSampler<M>,
{
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "iterations must be at least 1".into(),
        ));
    }
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SaemState::initial(model, policy)?;
    let mut records = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (next, record) = saem_iterate(state, model, sampler, schedule, policy, &mut rng)?;
        if record.k % 500 == 0 {
            log::debug!("iteration {}: theta = {:?}", record.k, record.theta);
        }
        state = next;
        records.push(record);
    }
    if state.kappa > 0 {
        log::info!("{} truncation(s) in {iterations} iterations", state.kappa);
    }
    Ok(Trajectory {
        records,
        final_state: state,
        theta_names: model.theta_names(),
    })
}

#[derive(Debug, Clone)]
pub struct CltSummary {
    /// Final parameter of each replicate, in replicate order.
    pub finals: Vec<Vec<f64>>,
    pub coordinate: usize,
    pub sample: Vec<f64>,
    pub moments: MomentSummary,
    /// Unit-width bins of the standardized sample on `[-4, 4]`.
    pub histogram: Vec<(f64, usize)>,
    pub truncations: usize,
}

/// Independent replicates with seeds `base_seed + r`, run in parallel; the
/// summary looks at one coordinate of the final parameter.
#[allow(clippy::too_many_arguments)]
pub fn clt_study<M, S>(
    model: &M,
    sampler: &S,
    schedule: &StepSchedule,
    policy: &TruncationPolicy,
    iterations: usize,
    replicates: usize,
    base_seed: u64,
    coordinate: usize,
) -> Result<CltSummary>
where
    M: LatentModel,
    S: LatentSampler<M>,
{
    if replicates < 2 {
        return Err(Error::InvalidParameter(
            "need at least two replicates".into(),
        ));
    }
    let runs: Vec<(Vec<f64>, usize)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            run_saem(
                model,
                sampler,
                schedule,
                policy,
                iterations,
                base_seed.wrapping_add(r),
            )
            .map(|t| (t.final_theta_values().to_vec(), t.final_state.kappa))
        })
        .collect::<Result<_>>()?;
    if coordinate >= runs[0].0.len() {
        return Err(Error::InvalidParameter(format!(
            "no parameter coordinate {coordinate}"
        )));
    }
    let truncations = runs.iter().map(|r| r.1).sum();
    let finals: Vec<Vec<f64>> = runs.into_iter().map(|r| r.0).collect();
    let sample: Vec<f64> = finals.iter().map(|t| t[coordinate]).collect();
    Ok(CltSummary {
        moments: standardized_moments(&sample),
        histogram: standardized_histogram(&sample, 4),
        finals,
        coordinate,
        sample,
        truncations,
    })
}
