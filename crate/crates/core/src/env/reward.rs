use serde::{Deserialize, Serialize};

/// Number of objectives tracked by the environment.
pub const N_OBJECTIVES: usize = 3;

pub const OBJECTIVE_NAMES: [&str; N_OBJECTIVES] = ["profit", "neg_emissions", "neg_lead_time"];

/// Per-period vector reward. Every component is "larger is better":
/// emissions and lead time are stored negated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardVector {
    pub profit: f64,
    pub neg_emissions: f64,
    pub neg_lead_time: f64,
}

impl RewardVector {
    pub fn new(profit: f64, neg_emissions: f64, neg_lead_time: f64) -> Self {
        Self {
            profit,
            neg_emissions,
            neg_lead_time,
        }
    }

    pub fn to_array(self) -> [f64; N_OBJECTIVES] {
        [self.profit, self.neg_emissions, self.neg_lead_time]
    }

    pub fn from_array(a: [f64; N_OBJECTIVES]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Emissions in natural (positive) units.
    pub fn emissions(&self) -> f64 {
        -self.neg_emissions
    }

    /// Lead time in natural (positive) units.
    pub fn lead_time(&self) -> f64 {
        -self.neg_lead_time
    }
}
