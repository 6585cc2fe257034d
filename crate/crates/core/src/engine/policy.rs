use serde::{Deserialize, Serialize};

use crate::model::DecisionRule;
use crate::Label;

/// Why a non-silent prediction was turned into stay-silent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suppression {
    Cooldown,
    Threshold,
}

/// Post-prediction gating: optional probability thresholds, then per-class
/// cooldowns measured in stream time since the last emitted decision of the
/// same class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionPolicy {
    pub cooldown_backchannel_ms: u64,
    pub cooldown_turn_claim_ms: u64,
    pub rule: DecisionRule,
}

impl Default for EmissionPolicy {
    fn default() -> Self {
        Self {
            cooldown_backchannel_ms: 1000,
            cooldown_turn_claim_ms: 2000,
            rule: DecisionRule::default(),
        }
    }
}

impl EmissionPolicy {
    /// No thresholds and no cooldowns: plain argmax.
    pub fn passthrough() -> Self {
        Self {
            cooldown_backchannel_ms: 0,
            cooldown_turn_claim_ms: 0,
            rule: DecisionRule::default(),
        }
    }

    fn cooldown(&self, label: Label) -> u64 {
        match label {
            Label::Backchannel => self.cooldown_backchannel_ms,
            Label::TurnClaim => self.cooldown_turn_claim_ms,
            Label::StaySilent => 0,
        }
    }
}

/// Per-session state of the policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyState {
    last_emitted: [Option<u64>; 3],
}

impl PolicyState {
    pub fn apply(&mut self, policy: &EmissionPolicy, t_ms: u64, probs: [f64; 3]) -> (Label, Option<Suppression>) {
        let pred = policy.rule.decide(probs);
        if pred.suppressed.is_some() {
            return (Label::StaySilent, Some(Suppression::Threshold));
        }
        let label = pred.label;
        if label == Label::StaySilent {
            return (label, None);
        }
        let slot = &mut self.last_emitted[label.index()];
        if let Some(last) = *slot {
            if t_ms.saturating_sub(last) < policy.cooldown(label) {
                return (Label::StaySilent, Some(Suppression::Cooldown));
            }
        }
        *slot = Some(t_ms);
        (label, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BC: [f64; 3] = [0.1, 0.8, 0.1];
    const TC: [f64; 3] = [0.7, 0.2, 0.1];

    #[test]
    fn second_backchannel_inside_cooldown_is_suppressed() {
        let policy = EmissionPolicy::default();
        let mut st = PolicyState::default();
        assert_eq!(st.apply(&policy, 1000, BC), (Label::Backchannel, None));
        assert_eq!(st.apply(&policy, 1200, BC), (Label::StaySilent, Some(Suppression::Cooldown)));
        // A suppressed decision does not restart the clock.
        assert_eq!(st.apply(&policy, 2000, BC), (Label::Backchannel, None));
        // Classes have separate clocks.
        assert_eq!(st.apply(&policy, 2100, TC), (Label::TurnClaim, None));
        assert_eq!(st.apply(&policy, 4000, TC), (Label::StaySilent, Some(Suppression::Cooldown)));
        assert_eq!(st.apply(&policy, 4100, TC), (Label::TurnClaim, None));
    }

    #[test]
    fn zero_cooldown_is_identity() {
        let policy = EmissionPolicy::passthrough();
        let mut st = PolicyState::default();
        for t in 0..20 {
            let p = if t % 2 == 0 { BC } else { TC };
            let (label, why) = st.apply(&policy, t, p);
            assert_eq!(label, DecisionRule::argmax(&p));
            assert!(why.is_none());
        }
    }

    #[test]
    fn threshold_one_never_emits_turn_claim() {
        let policy = EmissionPolicy {
            rule: DecisionRule { theta_bc: None, theta_tc: Some(1.0) },
            ..EmissionPolicy::passthrough()
        };
        let mut st = PolicyState::default();
        let (label, why) = st.apply(&policy, 0, [1.0, 0.0, 0.0]);
        assert_eq!(label, Label::StaySilent);
        assert_eq!(why, Some(Suppression::Threshold));
    }
}
