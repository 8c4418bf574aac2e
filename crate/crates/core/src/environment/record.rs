//! Per-step episode traces and CSV export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::action::ActionPair;
use super::observation::{Observation, OBS_NAMES};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    CriticalHypo,
    CriticalHyper,
    TimeLimit,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::CriticalHypo => "critical_hypo",
            TerminationReason::CriticalHyper => "critical_hyper",
            TerminationReason::TimeLimit => "time_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Minute at the end of the step.
    pub t: f64,
    /// Plasma-equivalent glucose at the end of the step (mg/dL).
    pub bg: f64,
    pub cgm: f64,
    /// Observation the action was chosen from.
    pub obs: Observation,
    pub action: ActionPair,
    pub reward: f64,
    pub cost: f64,
    pub r_delta: f64,
    pub shield_mode: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub patient_id: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub termination: Option<TerminationReason>,
}

impl EpisodeRecord {
    pub fn bg_trace(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.bg).collect()
    }

    pub fn cgm_trace(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.cgm).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }

    /// One row per control step. Column order is stable.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = [
            "step", "t_min", "bg", "cgm", "bolus_idx", "meal_idx", "bolus_u", "meal_g",
            "bolus_blocked", "meal_blocked", "meal_forced", "reward", "cost", "r_delta",
            "shield_mode",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(OBS_NAMES.iter().map(|n| format!("obs_{n}")));
        header.push("termination".into());
        wr.write_record(&header)?;
        let last = self.steps.len().saturating_sub(1);
        for (i, s) in self.steps.iter().enumerate() {
            let a = &s.action;
            let mut row = vec![
                s.step.to_string(),
                s.t.to_string(),
                format!("{:.4}", s.bg),
                format!("{:.4}", s.cgm),
                a.bolus_idx.to_string(),
                a.meal_idx.to_string(),
                format!("{:.4}", a.accepted_bolus),
                format!("{:.4}", a.accepted_meal),
                a.bolus_blocked.map(|r| r.as_str()).unwrap_or("").to_string(),
                a.meal_blocked.map(|r| r.as_str()).unwrap_or("").to_string(),
                (a.meal_forced as u8).to_string(),
                format!("{:.6}", s.reward),
                format!("{:.6}", s.cost),
                format!("{:.6}", s.r_delta),
                s.shield_mode.clone(),
            ];
            row.extend(s.obs.to_array().iter().map(|v| format!("{v:.6}")));
            row.push(if i == last {
                self.termination.map(|r| r.as_str()).unwrap_or("").to_string()
            } else {
                String::new()
            });
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}
