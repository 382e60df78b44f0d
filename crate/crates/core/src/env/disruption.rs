use serde::{Deserialize, Serialize};

use crate::error::EnvError;

/// What a disruption does while active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisruptionKind {
    /// Linear tax on per-period emissions above `threshold`.
    EmissionTax { rate: f64, threshold: f64 },
    /// Scales the reorder and transport cost matrices.
    CostSurge { multiplier: f64 },
}

/// A scripted disruption active on periods `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disruption {
    #[serde(flatten)]
    pub kind: DisruptionKind,
    pub start: usize,
    pub duration: usize,
}

impl Disruption {
    pub fn emission_tax(rate: f64, threshold: f64, start: usize, duration: usize) -> Self {
        Self {
            kind: DisruptionKind::EmissionTax { rate, threshold },
            start,
            duration,
        }
    }

    pub fn cost_surge(multiplier: f64, start: usize, duration: usize) -> Self {
        Self {
            kind: DisruptionKind::CostSurge { multiplier },
            start,
            duration,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.duration == 0 {
            return Err(EnvError::InvalidDisruption("duration must be at least 1".into()));
        }
        match self.kind {
            DisruptionKind::EmissionTax { rate, threshold } => {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(EnvError::InvalidDisruption(
                        "tax rate must be finite and nonnegative".into(),
                    ));
                }
                if !threshold.is_finite() {
                    return Err(EnvError::InvalidDisruption("threshold must be finite".into()));
                }
            }
            DisruptionKind::CostSurge { multiplier } => {
                if !(multiplier.is_finite() && multiplier > 0.0) {
                    return Err(EnvError::InvalidDisruption(
                        "cost multiplier must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn end(&self) -> usize {
        self.start.saturating_add(self.duration)
    }

    pub fn is_active(&self, t: usize) -> bool {
        t >= self.start && t < self.end()
    }
}

/// Combined effect of all disruptions active in one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ActiveEffects {
    pub cost_multiplier: f64,
    pub taxes: usize,
    pub any: bool,
}

pub(crate) fn active_effects(disruptions: &[Disruption], t: usize) -> ActiveEffects {
    let mut fx = ActiveEffects {
        cost_multiplier: 1.0,
        taxes: 0,
        any: false,
    };
    for d in disruptions.iter().filter(|d| d.is_active(t)) {
        fx.any = true;
        match d.kind {
            DisruptionKind::CostSurge { multiplier } => fx.cost_multiplier *= multiplier,
            DisruptionKind::EmissionTax { .. } => fx.taxes += 1,
        }
    }
    fx
}

/// Total tax owed for `emissions` under the active emission taxes.
pub(crate) fn emission_tax(disruptions: &[Disruption], t: usize, emissions: f64) -> f64 {
    disruptions
        .iter()
        .filter(|d| d.is_active(t))
        .map(|d| match d.kind {
            DisruptionKind::EmissionTax { rate, threshold } => {
                rate * (emissions - threshold).max(0.0)
            }
            DisruptionKind::CostSurge { .. } => 0.0,
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn active_window_is_half_open() {
        let d = Disruption::cost_surge(1.1, 10, 5);
        assert!(!d.is_active(9));
        assert!((10..15).all(|t| d.is_active(t)));
        assert!(!d.is_active(15));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Disruption::cost_surge(0.0, 0, 1).validate().is_err());
        assert!(Disruption::cost_surge(1.1, 0, 0).validate().is_err());
        assert!(Disruption::emission_tax(-1.0, 0.0, 0, 1).validate().is_err());
        assert!(Disruption::emission_tax(2.0, 10.0, 0, 1).validate().is_ok());
    }

    #[test]
    fn tax_is_linear_above_threshold() {
        let d = [Disruption::emission_tax(2.0, 10.0, 0, 100)];
        assert_eq!(emission_tax(&d, 5, 8.0), 0.0);
        assert_eq!(emission_tax(&d, 5, 13.0), 6.0);
        assert_eq!(emission_tax(&d, 100, 13.0), 0.0);
    }

    #[test]
    fn json_shape() {
        let d = Disruption::cost_surge(1.1, 200, 50);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"kind":"cost_surge","multiplier":1.1,"start":200,"duration":50}"#);
        let back: Disruption = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
