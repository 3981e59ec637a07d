//! Residual analysis by the random time change.
//!
//! If `Λ_i` is the compensator of component `i`, the transformed gaps
//! `τ_k = Λ_i(T_k) - Λ_i(T_{k-1})` of a correctly simulated path are i.i.d.
//! Exp(1). They are tested against Exp(1) with a one-sample
//! Kolmogorov–Smirnov test.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CarmaHawkes, ModelError};
use crate::thinning::{format_sig15, BoundTracker, EventLog};

/// Terms of the Kolmogorov series below this size are dropped.
pub const KS_SERIES_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("event log was produced by spec {log}, not {model}")]
    SpecLogMismatch { log: String, model: String },
    #[error("malformed event log: {0}")]
    BadLog(String),
    #[error("empty sample")]
    EmptySample,
    #[error("component {component} is out of range for a model with {components} component(s)")]
    InvalidComponent { component: usize, components: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Compensator-transformed inter-event times of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub component: usize,
    pub taus: Vec<f64>,
    /// `Λ_i(horizon) - Λ_i(last event)`, the incomplete final gap.
    pub censored_tail: f64,
}

impl ResidualSeries {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.taus.is_empty()).then(|| self.taus.iter().sum::<f64>() / self.taus.len() as f64)
    }

    /// Single-column CSV with header `tau`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau")?;
        for &t in &self.taus {
            writeln!(out, "{}", format_sig15(t))?;
        }
        out.flush()
    }
}

fn check_log(model: &CarmaHawkes, log: &EventLog) -> Result<(), DiagnosticsError> {
    let model_hash = model.spec().hash();
    if let Some(h) = &log.meta.spec_hash {
        if *h != model_hash {
            return Err(DiagnosticsError::SpecLogMismatch {
                log: h.clone(),
                model: model_hash,
            });
        }
    }
    log.check(model.components()).map_err(DiagnosticsError::BadLog)?;
    if let Some(&last) = log.times.last() {
        if last > log.meta.horizon {
            return Err(DiagnosticsError::BadLog(format!(
                "event at {last} is past the horizon {}",
                log.meta.horizon
            )));
        }
    }
    Ok(())
}

/// Residuals of `component` (1-based). Events of every mark drive the
/// intensity; only events of `component` close a gap. The gap from the last
/// such event to the horizon is censored.
pub fn residual_transform(
    model: &CarmaHawkes,
    log: &EventLog,
    component: usize,
) -> Result<ResidualSeries, DiagnosticsError> {
    if component == 0 || component > model.components() {
        return Err(DiagnosticsError::InvalidComponent {
            component,
            components: model.components(),
        });
    }
    check_log(model, log)?;
    let mut state = model.initial_state();
    let mut t = 0.0;
    let mut pending = 0.0;
    let mut taus = Vec::new();
    for (te, mark) in log.events() {
        pending += model.floored_compensator_increment(&state, t, te)?.get(component);
        model.apply_event_mut(&mut state, te, mark)?;
        t = te;
        if mark as usize == component {
            taus.push(pending);
            pending = 0.0;
        }
    }
    pending += model
        .floored_compensator_increment(&state, t, log.meta.horizon.max(t))?
        .get(component);
    Ok(ResidualSeries {
        component,
        taus,
        censored_tail: pending,
    })
}

/// One-sample KS test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of `sample` against Exp(1), with the asymptotic p-value.
pub fn ks_exp1(sample: &[f64]) -> Result<KsResult, DiagnosticsError> {
    if sample.is_empty() {
        return Err(DiagnosticsError::EmptySample);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let statistic = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = -(-xi.max(0.0)).exp_m1();
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        n: x.len(),
        statistic,
        p_value: kolmogorov_survival(n.sqrt() * statistic),
    })
}

/// `Q(κ) = P(K > κ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²κ²}` for the Kolmogorov
/// distribution, clamped to `[0, 1]`.
///
/// For small `κ` the alternating series converges slowly, so below `κ = 1`
/// the equivalent form `1 - √(2π)/κ Σ_{k≥1} e^{-(2k-1)²π²/(8κ²)}` is used.
pub fn kolmogorov_survival(kappa: f64) -> f64 {
    if kappa.is_nan() {
        return f64::NAN;
    }
    if kappa <= 0.0 {
        return 1.0;
    }
    let q = if kappa < 1.0 {
        1.0 - kolmogorov_cdf_theta(kappa)
    } else {
        kolmogorov_series(kappa)
    };
    q.clamp(0.0, 1.0)
}

/// The alternating series `2 Σ (-1)^{k-1} e^{-2k²κ²}`, truncated once a term
/// drops below [`KS_SERIES_CUTOFF`].
pub fn kolmogorov_series(kappa: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u32 {
        let term = (-2.0 * (k as f64 * kappa).powi(2)).exp();
        if term < KS_SERIES_CUTOFF {
            break;
        }
        sum += sign * term;
        sign = -sign;
    }
    2.0 * sum
}

fn kolmogorov_cdf_theta(kappa: f64) -> f64 {
    let c = std::f64::consts::PI.powi(2) / (8.0 * kappa * kappa);
    let mut sum = 0.0;
    for k in 1..=100_000u32 {
        let m = (2 * k - 1) as f64;
        let term = (-m * m * c).exp();
        sum += term;
        if term < KS_SERIES_CUTOFF * 1e-4 {
            break;
        }
    }
    (2.0 * std::f64::consts::PI).sqrt() / kappa * sum
}

/// Theoretical vs empirical Exp(1) quantiles, `(-ln(1 - (i - ½)/n), x₍ᵢ₎)`.
pub fn qq_pairs(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.into_iter()
        .enumerate()
        .map(|(i, xi)| (-(-(i as f64 + 0.5) / n).ln_1p(), xi))
        .collect()
}

/// Summary of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: usize,
    pub n_events: usize,
    pub empirical_rate: f64,
    /// `None` when the model is not stationary.
    pub theoretical_rate: Option<f64>,
    /// `None` when the component has no events.
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
    pub acceptance_ratio: f64,
}

/// Per-component summaries, serialized as a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagnosticsReport {
    pub components: Vec<ComponentSummary>,
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Residuals and summaries for every component of `log`.
pub fn summarize(
    model: &CarmaHawkes,
    log: &EventLog,
) -> Result<(DiagnosticsReport, Vec<ResidualSeries>), DiagnosticsError> {
    let rates = model.stationary_rates();
    let horizon = log.meta.horizon;
    let mut components = Vec::new();
    let mut residuals = Vec::new();
    for c in 1..=model.components() {
        let series = residual_transform(model, log, c)?;
        let ks = ks_exp1(&series.taus).ok();
        let n_events = log.marks.iter().filter(|&&m| m as usize == c).count();
        components.push(ComponentSummary {
            component: c,
            n_events,
            empirical_rate: if horizon > 0.0 { n_events as f64 / horizon } else { 0.0 },
            theoretical_rate: rates.as_ref().map(|r| r[c - 1]),
            ks_statistic: ks.map(|k| k.statistic),
            ks_p_value: ks.map(|k| k.p_value),
            acceptance_ratio: log.meta.acceptance_ratio,
        });
        residuals.push(series);
    }
    Ok((DiagnosticsReport { components }, residuals))
}

/// One row of an intensity trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub intensities: Vec<f64>,
    pub bound: f64,
}

/// `λ_t` and `λ̄_t` sampled every `dt` on `[0, horizon]`, replayed from `log`.
/// Values at a grid time include events at that same time.
pub fn intensity_trace(
    model: &CarmaHawkes,
    log: &EventLog,
    dt: f64,
) -> Result<Vec<TracePoint>, DiagnosticsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DiagnosticsError::BadLog(format!("trace step must be positive, got {dt}")));
    }
    check_log(model, log)?;
    let mut state = model.initial_state();
    let mut bound = BoundTracker::new(model.bound_constants());
    let mut events = log.events().peekable();
    let steps = (log.meta.horizon / dt).floor() as u64;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        while let Some(&(te, mark)) = events.peek() {
            if te > t {
                break;
            }
            model.apply_event_mut(&mut state, te, mark)?;
            bound = bound.after_event(te, mark);
            events.next();
        }
        out.push(TracePoint {
            time: t,
            intensities: model.intensity_unchecked(&state, t).as_slice().to_vec(),
            bound: bound.value(t),
        });
    }
    Ok(out)
}

/// CSV `time,lambda_1[,lambda_2],bound`.
pub fn write_trace_csv<W: Write>(points: &[TracePoint], mut out: W) -> std::io::Result<()> {
    let n = points.first().map_or(1, |p| p.intensities.len());
    let mut header = vec!["time".to_string()];
    header.extend((1..=n).map(|c| format!("lambda_{c}")));
    header.push("bound".into());
    writeln!(out, "{}", header.join(","))?;
    for p in points {
        let mut row = vec![format_sig15(p.time)];
        row.extend(p.intensities.iter().map(|&v| format_sig15(v)));
        row.push(format_sig15(p.bound));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::thinning::{simulate_seeded, SimulationOptions};
    use proptest::prelude::*;

    fn model(spec: crate::ModelSpec) -> CarmaHawkes {
        CarmaHawkes::new(spec).unwrap()
    }

    fn log_of(m: &CarmaHawkes, events: &[(f64, u8)], horizon: f64) -> EventLog {
        let mut log = EventLog::empty(horizon);
        for &(t, mark) in events {
            log.times.push(t);
            log.marks.push(mark);
        }
        log.meta.spec_hash = Some(m.spec().hash());
        log
    }

    // sup_x |F_n(x) - F(x)| evaluated on a dense grid and at both sides of
    // every jump.
    fn brute_force_d(sample: &[f64]) -> f64 {
        let n = sample.len() as f64;
        let ecdf = |x: f64, strict: bool| {
            sample.iter().filter(|&&s| if strict { s < x } else { s <= x }).count() as f64 / n
        };
        let f = |x: f64| 1.0 - (-x).exp();
        let mut d: f64 = 0.0;
        for &x in sample {
            d = d.max((ecdf(x, false) - f(x)).abs()).max((ecdf(x, true) - f(x)).abs());
        }
        for k in 0..20_000 {
            let x = k as f64 * 1e-3;
            d = d.max((ecdf(x, false) - f(x)).abs());
        }
        d
    }

    #[test]
    fn ks_hand_cases() {
        let one = ks_exp1(&[std::f64::consts::LN_2]).unwrap();
        assert!((one.statistic - 0.5).abs() < 1e-15);
        // F(x1) = 1/4, F(x2) = 3/4
        let two = ks_exp1(&[-(0.75f64).ln(), -(0.25f64).ln()]).unwrap();
        assert!((two.statistic - 0.25).abs() < 1e-15);
        assert!((kolmogorov_survival(1.0) - 0.270000).abs() < 1e-6);
        assert!(matches!(ks_exp1(&[]), Err(DiagnosticsError::EmptySample)));
    }

    #[test]
    fn kolmogorov_survival_limits_and_known_values() {
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(1e-3) > 1.0 - 1e-12);
        assert!(kolmogorov_survival(10.0) < 1e-80);
        // standard critical values
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        let mut prev = 1.0;
        for k in 1..400 {
            let q = kolmogorov_survival(k as f64 * 0.01);
            assert!(q <= prev && (0.0..=1.0).contains(&q));
            prev = q;
        }
    }

    #[test]
    fn both_series_forms_agree() {
        for k in 0..=40 {
            let kappa = 0.8 + 0.01 * k as f64;
            let a = kolmogorov_series(kappa);
            let b = 1.0 - kolmogorov_cdf_theta(kappa);
            assert!((a - b).abs() < 1e-11, "κ = {kappa}: {a} vs {b}");
        }
    }

    #[test]
    fn series_truncation_error_is_below_cutoff() {
        // alternating series: the error is bounded by twice the first dropped term
        for kappa in [1.0, 1.5, 2.0, 3.0] {
            let reference: f64 = 2.0
                * (1..2000)
                    .map(|k| {
                        let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                        s * (-2.0 * (k as f64 * kappa).powi(2)).exp()
                    })
                    .sum::<f64>();
            assert!((kolmogorov_series(kappa) - reference).abs() < 2.0 * KS_SERIES_CUTOFF);
        }
    }

    #[test]
    fn residual_examples() {
        let m = model(presets::exponential_hawkes());
        let r = residual_transform(&m, &log_of(&m, &[(1.0, 1)], 1.0), 1).unwrap();
        assert_eq!(r.taus.len(), 1);
        assert!((r.taus[0] - 0.3).abs() < 1e-15);
        assert_eq!(r.censored_tail, 0.0);

        let r = residual_transform(&m, &log_of(&m, &[(1.0, 1), (2.0, 1)], 3.0), 1).unwrap();
        assert!((r.taus[0] - 0.3).abs() < 1e-15);
        assert!((r.taus[1] - 0.616738).abs() < 1e-6);
        let tail = 0.3 + ((-3.0f64).exp() + 1.0) * (1.0 - (-3.0f64).exp()) / 3.0;
        assert!((r.censored_tail - tail).abs() < 1e-13);
    }

    #[test]
    fn residuals_sum_to_compensator() {
        let m = model(presets::bivariate_cross_21());
        let log = simulate_seeded(&m, 200.0, 11, SimulationOptions::default()).unwrap();
        for c in 1..=2 {
            let r = residual_transform(&m, &log, c).unwrap();
            assert_eq!(r.len(), log.times_of(c as u8).len());
            let oracle = crate::quad::integrate(
                |t| {
                    let events: Vec<_> = log.events().filter(|&(te, _)| te <= t).collect();
                    let mut s = m.initial_state();
                    for (te, mark) in events {
                        m.apply_event_mut(&mut s, te, mark).unwrap();
                    }
                    m.intensity_at(&s, t).unwrap().get(c)
                },
                0.0,
                30.0,
                1e-6,
            );
            let head: f64 = {
                let cut = EventLog {
                    times: log.times.iter().copied().filter(|&t| t <= 30.0).collect(),
                    marks: log.events().filter(|&(t, _)| t <= 30.0).map(|(_, m)| m).collect(),
                    meta: crate::thinning::RunMetadata { horizon: 30.0, ..log.meta.clone() },
                };
                let r = residual_transform(&m, &cut, c).unwrap();
                r.taus.iter().sum::<f64>() + r.censored_tail
            };
            assert!((head - oracle).abs() < 1e-4, "{head} vs {oracle}");
        }
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let m = model(presets::carma21());
        let other = model(presets::exponential_hawkes());
        let log = log_of(&other, &[(1.0, 1)], 2.0);
        assert!(matches!(
            residual_transform(&m, &log, 1),
            Err(DiagnosticsError::SpecLogMismatch { .. })
        ));
        assert!(matches!(
            residual_transform(&m, &log_of(&m, &[(1.0, 2)], 2.0), 1),
            Err(DiagnosticsError::BadLog(_))
        ));
        assert!(matches!(
            residual_transform(&m, &log_of(&m, &[(1.0, 1)], 2.0), 2),
            Err(DiagnosticsError::InvalidComponent { .. })
        ));
    }

    #[test]
    fn empty_log_summary() {
        let m = model(presets::bivariate_independent());
        let (report, residuals) = summarize(&m, &log_of(&m, &[], 10.0)).unwrap();
        assert_eq!(report.components.len(), 2);
        for c in &report.components {
            assert_eq!(c.n_events, 0);
            assert_eq!(c.ks_statistic, None);
            assert_eq!(c.ks_p_value, None);
        }
        assert!((residuals[0].censored_tail - 3.0).abs() < 1e-12);
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(v.as_array().unwrap()[0]["ks_p_value"].is_null());
    }

    #[test]
    fn summary_reports_theoretical_rates() {
        let m = model(presets::exponential_hawkes());
        let log = simulate_seeded(&m, 2000.0, 3, SimulationOptions::default()).unwrap();
        let (report, _) = summarize(&m, &log).unwrap();
        let c = &report.components[0];
        assert!((c.theoretical_rate.unwrap() - 0.45).abs() < 1e-12);
        assert_eq!(c.n_events, log.len());
        assert!(c.ks_p_value.unwrap() > 0.0);
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in [
            "component",
            "n_events",
            "empirical_rate",
            "theoretical_rate",
            "ks_statistic",
            "ks_p_value",
            "acceptance_ratio",
        ] {
            assert!(v[0].get(key).is_some(), "{key}");
        }
        let carma31 = model(presets::carma31());
        let rate = summarize(&carma31, &log_of(&carma31, &[], 1.0)).unwrap().0.components[0]
            .theoretical_rate
            .unwrap();
        assert!((rate - 1.1364).abs() < 1e-4);
    }

    #[test]
    fn trace_stays_under_bound() {
        let m = model(presets::carma21());
        let log = simulate_seeded(&m, 100.0, 8, SimulationOptions::default()).unwrap();
        let trace = intensity_trace(&m, &log, 0.05).unwrap();
        assert_eq!(trace.len(), 2001);
        for p in &trace {
            assert!(p.intensities[0] <= p.bound + 1e-9);
        }
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time,lambda_1,bound\n0,0.3,0.3\n"));
    }

    #[test]
    fn residual_csv_and_qq() {
        let r = ResidualSeries {
            component: 1,
            taus: vec![0.5, 1.0 / 3.0],
            censored_tail: 0.0,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "tau\n0.5\n0.333333333333333\n");
        let qq = qq_pairs(&r.taus);
        assert_eq!(qq[0].1, 1.0 / 3.0);
        assert!((qq[0].0 - (-(0.75f64).ln())).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn statistic_matches_brute_force(sample in prop::collection::vec(0.0f64..6.0, 1..40)) {
            let d = ks_exp1(&sample).unwrap().statistic;
            let brute = brute_force_d(&sample);
            prop_assert!(d >= brute - 1e-12);
            prop_assert!(d - brute < 1e-12, "{d} vs {brute}");
        }
    }
}
