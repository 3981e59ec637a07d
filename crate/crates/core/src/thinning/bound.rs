use crate::model::{BoundConstants, MAX_COMPONENTS};

/// Pathwise dominating intensity.
///
/// Holds `λ̄` at `anchor_time` and evolves it by the recursion
///
/// ```text
/// λ̄_t = base + e^{decay (t - T)} (λ̄_T - base)          (no event in (T, t])
/// λ̄_T ← λ̄_T + K_mark                                    (event of `mark` at T)
/// ```
///
/// which is the exponentially weighted sum `base + Σ K_{m_i} e^{decay (t - T_i)}`
/// written incrementally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTracker {
    lambda_bar: f64,
    anchor_time: f64,
    decay: f64,
    base: f64,
    jumps: [f64; MAX_COMPONENTS],
    components: usize,
}

impl BoundTracker {
    /// `λ̄_0 = base` at time 0.
    pub fn new(constants: BoundConstants) -> Self {
        Self {
            lambda_bar: constants.base,
            anchor_time: 0.0,
            decay: constants.decay,
            base: constants.base,
            jumps: constants.jumps,
            components: constants.components,
        }
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn anchor_time(&self) -> f64 {
        self.anchor_time
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// Jump added for an event of a 1-based `mark`.
    pub fn jump_size(&self, mark: u8) -> f64 {
        self.jumps[mark as usize - 1]
    }

    /// `λ̄_t` for `t ≥ anchor_time`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        debug_assert!(t >= self.anchor_time);
        self.base + (self.decay * (t - self.anchor_time)).exp() * (self.lambda_bar - self.base)
    }

    /// Re-anchors at `t` without adding a jump.
    #[inline]
    pub fn decay_to(&self, t: f64) -> Self {
        Self {
            lambda_bar: self.value(t),
            anchor_time: t,
            ..*self
        }
    }

    /// Decays to `event_time` and adds the jump of `mark`.
    #[inline]
    pub fn after_event(&self, event_time: f64, mark: u8) -> Self {
        assert!(
            mark >= 1 && mark as usize <= self.components,
            "mark {mark} out of range"
        );
        let mut next = self.decay_to(event_time);
        next.lambda_bar += self.jumps[mark as usize - 1];
        next
    }
}

/// Direct evaluation of `base + Σ_{T_i ≤ t} K_{m_i} e^{decay (t - T_i)}`, the
/// right limit matching [`BoundTracker::value`] after the same events.
pub fn bound_from_history(constants: &BoundConstants, events: &[(f64, u8)], t: f64) -> f64 {
    constants.base
        + events
            .iter()
            .filter(|(ti, _)| *ti <= t)
            .map(|&(ti, m)| constants.jumps[m as usize - 1] * (constants.decay * (t - ti)).exp())
            .sum::<f64>()
}
