//! Thinning simulation of CARMA(p,q)-Hawkes processes.
//!
//! Candidates are drawn from a homogeneous stream whose rate is the current
//! value of the dominating intensity `λ̄`, and each candidate at `t` is kept
//! with probability `λ_t / λ̄`. For two components the bound dominates
//! `λ_1 + λ_2` and an accepted candidate is routed to component 1 or 2 by
//! where `D λ̄` falls.
//!
//! `λ̄` only jumps at accepted events (by `K_mark`) and decays between them,
//! so after a rejection the next candidate is drawn at the decayed rate.

mod bound;
mod event_log;
mod rng;

pub use bound::{bound_from_history, BoundTracker};
pub use event_log::{format_sig15, EventLog, LogError, RunMetadata};
pub use rng::{RngStream, ScriptedUniforms, UniformSource};

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    BivariateSpec, CarmaHawkes, ModelError, ModelSpec, UnivariateSpec, ValidationIssue,
    MAX_COMPONENTS,
};

/// Slack allowed when checking `λ_t ≤ λ̄_t` at each candidate.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("horizon must be finite and positive, got {0}")]
    HorizonNonPositive(f64),
    #[error("model failed validation: {0:?}")]
    NonStationarySpec(Vec<ValidationIssue>),
    #[error("dominating intensity grows (decay {0} >= 0); thinning needs a non-increasing bound")]
    NonDecayingBound(f64),
    #[error("intensity {intensity} exceeds its bound {bound} at t = {t}")]
    BoundViolation { t: f64, intensity: f64, bound: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Simulate models that fail validation (non-stationary or negative kernels).
    pub override_validation: bool,
}

/// Simulates on `[0, horizon]`, dispatching on the number of components.
pub fn simulate<R: UniformSource>(
    model: &CarmaHawkes,
    horizon: f64,
    rng: &mut R,
    opts: SimulationOptions,
) -> Result<EventLog, SimulationError> {
    let started = Instant::now();
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SimulationError::HorizonNonPositive(horizon));
    }
    if !model.is_admissible() && !opts.override_validation {
        return Err(SimulationError::NonStationarySpec(model.report().issues.clone()));
    }
    let constants = model.bound_constants();
    if constants.decay > 0.0 {
        return Err(SimulationError::NonDecayingBound(constants.decay));
    }

    let n = model.components();
    let mut log = EventLog::empty(horizon);
    log.meta.spec_hash = Some(model.spec().hash());

    // First event: before any jump the intensities are the constant baselines,
    // so each component's first arrival is exponential and the earliest wins.
    let mut first = (f64::INFINITY, 1u8);
    for c in 1..=n {
        let candidate = -rng.next_uniform().ln() / model.mu(c);
        if candidate < first.0 {
            first = (candidate, c as u8);
        }
    }
    let (mut t, mark) = first;
    if t > horizon {
        return Ok(finish(log, 0, 0, started));
    }
    let mut proposed = 1u64;
    let mut state = model.initial_state();
    model.apply_event_mut(&mut state, t, mark)?;
    let mut bound = BoundTracker::new(constants).after_event(t, mark);
    log.times.push(t);
    log.marks.push(mark);

    let admissible = model.is_admissible();
    loop {
        let rate = bound.value(t);
        t += -rng.next_uniform().ln() / rate;
        if t > horizon {
            break;
        }
        proposed += 1;
        let level = rng.next_uniform() * rate;

        let lambda = model.intensity_unchecked(&state, t);
        let mut floored = [0.0; MAX_COMPONENTS];
        for (c, (&v, f)) in lambda.as_slice().iter().zip(&mut floored).enumerate() {
            if admissible && v < model.mu(c + 1) - crate::model::INTENSITY_TOLERANCE {
                return Err(ModelError::NegativeIntensity {
                    component: c + 1,
                    value: v,
                    baseline: model.mu(c + 1),
                }
                .into());
            }
            *f = v.max(0.0);
        }
        let total: f64 = floored[..n].iter().sum();
        let envelope = bound.value(t);
        if total > envelope + BOUND_TOLERANCE {
            return Err(SimulationError::BoundViolation {
                t,
                intensity: total,
                bound: envelope,
            });
        }

        let mut cumulative = 0.0;
        let mut accepted = None;
        for (c, f) in floored[..n].iter().enumerate() {
            cumulative += f;
            if level <= cumulative {
                accepted = Some(c as u8 + 1);
                break;
            }
        }
        match accepted {
            Some(mark) if t > state.last_event_time() => {
                model.apply_event_mut(&mut state, t, mark)?;
                bound = bound.after_event(t, mark);
                log.times.push(t);
                log.marks.push(mark);
            }
            _ => bound = bound.decay_to(t),
        }
    }
    let accepted = log.len() as u64;
    Ok(finish(log, proposed, accepted, started))
}

/// Univariate entry point; builds the model from `spec`.
pub fn simulate_univariate<R: UniformSource>(
    spec: &UnivariateSpec,
    horizon: f64,
    rng: &mut R,
    opts: SimulationOptions,
) -> Result<EventLog, SimulationError> {
    let model = CarmaHawkes::new(ModelSpec::Univariate(spec.clone()))?;
    simulate(&model, horizon, rng, opts)
}

/// Bivariate entry point; builds the model from `spec`.
pub fn simulate_bivariate<R: UniformSource>(
    spec: &BivariateSpec,
    horizon: f64,
    rng: &mut R,
    opts: SimulationOptions,
) -> Result<EventLog, SimulationError> {
    let model = CarmaHawkes::new(ModelSpec::Bivariate(spec.clone()))?;
    simulate(&model, horizon, rng, opts)
}

/// Simulates with a fresh [`RngStream`] and records the seed.
pub fn simulate_seeded(
    model: &CarmaHawkes,
    horizon: f64,
    seed: u64,
    opts: SimulationOptions,
) -> Result<EventLog, SimulationError> {
    let mut rng = RngStream::new(seed);
    let mut log = simulate(model, horizon, &mut rng, opts)?;
    log.meta.seed = Some(seed);
    Ok(log)
}

/// Runs `reps` independent replications, replication `k` seeded with
/// `seed_base + k`, on a pool of `threads` workers (`0` = rayon default).
/// Output order follows `k` and does not depend on scheduling.
pub fn simulate_replications(
    model: &CarmaHawkes,
    horizon: f64,
    seed_base: u64,
    reps: usize,
    threads: usize,
    opts: SimulationOptions,
) -> Vec<Result<EventLog, SimulationError>> {
    let run = || {
        (0..reps as u64)
            .into_par_iter()
            .map(|k| {
                let seed = RngStream::for_replication(seed_base, k).seed();
                simulate_seeded(model, horizon, seed, opts)
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

fn finish(mut log: EventLog, proposed: u64, accepted: u64, started: Instant) -> EventLog {
    log.meta.proposed = proposed;
    log.meta.accepted = accepted;
    log.meta.acceptance_ratio = if proposed == 0 {
        1.0
    } else {
        accepted as f64 / proposed as f64
    };
    log.meta.wall_time_seconds = started.elapsed().as_secs_f64();
    log
}
