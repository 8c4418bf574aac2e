//! Single-episode control loop: observe, policy logits, shield, act.

use glucoshield::environment::{EpisodeRecord, Environment, ScenarioConfig, STEP_MIN};
use glucoshield::forecaster::{BankConfig, BasisBank, ForecastContext, OnlineConfig, OnlineForecaster};
use glucoshield::metrics::ClinicalSummary;
use glucoshield::patients::PatientParams;
use glucoshield::reward::ProxyModel;
use glucoshield::shield::{
    predictive_shield, rule_based_shield, softmax, RuleConfig, ShieldConfig, ShieldDecision, ShieldInput,
};
use glucoshield::Result;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::policy::{argmax, Policy, PolicyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShieldKind {
    None,
    RuleBased,
    Predictive,
}

impl ShieldKind {
    pub const ALL: [ShieldKind; 3] = [ShieldKind::None, ShieldKind::RuleBased, ShieldKind::Predictive];

    pub fn as_str(self) -> &'static str {
        match self {
            ShieldKind::None => "none",
            ShieldKind::RuleBased => "rule_based",
            ShieldKind::Predictive => "predictive",
        }
    }
}

impl std::str::FromStr for ShieldKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(ShieldKind::None),
            "rule_based" | "rbs" => Ok(ShieldKind::RuleBased),
            "predictive" => Ok(ShieldKind::Predictive),
            other => Err(format!("unknown shield `{other}`")),
        }
    }
}

/// Shield and forecaster settings shared by all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShieldSettings {
    pub predictive: ShieldConfig,
    pub rules: RuleConfig,
    pub online: OnlineConfig,
    pub bank: BankConfig,
    /// Sample from the shielded distribution instead of taking the argmax.
    /// The random policy always samples.
    pub sample_actions: bool,
}

impl Default for ShieldSettings {
    /// Hypoglycemia-side pruning with a forecaster held close to the bank mean.
    fn default() -> Self {
        Self {
            predictive: ShieldConfig {
                prune_hyper: false,
                ..ShieldConfig::default()
            },
            rules: RuleConfig::default(),
            online: OnlineConfig {
                lambda: 1e4,
                shrink_to_mean: true,
                ..OnlineConfig::default()
            },
            bank: BankConfig::default(),
            sample_actions: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub record: EpisodeRecord,
    pub summary: ClinicalSummary,
    /// Step of the first modified distribution, if any.
    pub first_intervention: Option<usize>,
    /// One entry per step when the predictive shield is active.
    pub decisions: Vec<ShieldDecision>,
}

/// Runs one episode. `patient` must already be adapted and `basis` is the
/// proxy model the forecaster bank is built around.
pub fn run_episode(
    patient: PatientParams,
    basis: &ProxyModel,
    policy: &Policy,
    shield: ShieldKind,
    scenario: ScenarioConfig,
    settings: &ShieldSettings,
) -> Result<EpisodeResult> {
    let grid = scenario.grid;
    let seed = scenario.seed;
    let mut env = Environment::new(patient, scenario)?;
    let bank = BasisBank::from_config(basis, &settings.bank)?;
    let history = bank.history();
    let horizon = bank.horizon();
    let mut forecaster = OnlineForecaster::new(bank, settings.online.clone())?;
    let mut select_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5e1e_c7ed);

    let mut cgm_hist: Vec<f64> = Vec::with_capacity(env.horizon() + 1);
    let mut minutes: Vec<usize> = Vec::with_capacity(env.horizon() + 1);
    let mut decisions = Vec::new();
    let mut first_intervention = None;
    let unit = env.proxy().unit_bolus_drive();

    while !env.is_terminated() {
        let step = env.steps();
        let obs = env.observation();
        let input = ShieldInput::from(&obs);
        let logits = policy.logits(&obs, &grid);
        cgm_hist.push(env.cgm());
        minutes.push(env.time());

        let (masked, mode) = match shield {
            ShieldKind::None => (logits.clone(), "none".to_string()),
            ShieldKind::RuleBased => {
                let (l, rule) = rule_based_shield(&input, &logits, &grid, &settings.rules);
                (l, rule.as_str().to_string())
            }
            ShieldKind::Predictive => {
                if step >= horizon && (step - horizon) % settings.online.stride == 0 && step - horizon + 1 >= history {
                    let o = step - horizon;
                    let (carb, ins) = env.realized_drives(minutes[o]);
                    let ctx = ForecastContext {
                        history: cgm_hist[o + 1 - history..=o].to_vec(),
                        carb_drive: carb,
                        ins_drive: ins,
                    };
                    forecaster.add_context(&ctx, &cgm_hist[o + 1..=step])?;
                }
                forecaster.tick()?;
                let hist = if cgm_hist.len() >= history {
                    cgm_hist[cgm_hist.len() - history..].to_vec()
                } else {
                    cgm_hist.clone()
                };
                let (_, base_ins) = env.baseline_drives();
                let mut carb_cache: Vec<Option<Vec<f64>>> = vec![None; grid.n_meal];
                let p = env.patient();
                let (b_max, m_max) = (p.b_max, p.m_max);
                let mut forecast = |b: usize, m: usize| -> Result<Vec<f64>> {
                    if !forecaster.ready() {
                        return forecaster.forecast(&ForecastContext {
                            history: hist.clone(),
                            carb_drive: Vec::new(),
                            ins_drive: Vec::new(),
                        });
                    }
                    let carb = carb_cache[m]
                        .get_or_insert_with(|| env.carb_drive_with_meal(grid.meal_level(m) * m_max))
                        .clone();
                    let u = grid.bolus_level(b) * b_max;
                    let ins = base_ins.iter().zip(&unit).map(|(a, k)| a + u * k).collect();
                    forecaster.forecast(&ForecastContext {
                        history: hist.clone(),
                        carb_drive: carb,
                        ins_drive: ins,
                    })
                };
                let (l, d) = predictive_shield(&input, &logits, &grid, Some(&mut forecast), &settings.predictive);
                let mode = d.mode.as_str().to_string();
                decisions.push(d);
                (l, mode)
            }
        };

        if first_intervention.is_none() && masked != logits {
            first_intervention = Some(step);
        }
        let probs = softmax(&masked);
        let k = if settings.sample_actions || policy.spec.kind == PolicyKind::Random {
            WeightedIndex::new(&probs)
                .map(|d| d.sample(&mut select_rng))
                .unwrap_or_else(|_| argmax(&probs))
        } else {
            argmax(&probs)
        };
        let (b, m) = grid.unflat(k);
        env.step(b, m)?;
        env.annotate_last(&mode);
    }
    debug_assert!(minutes.iter().all(|m| m % STEP_MIN == 0));
    let record = env.into_record();
    let summary = ClinicalSummary::from_trace(&record.bg_trace(), record.total_reward(), record.total_cost())?;
    Ok(EpisodeResult {
        record,
        summary,
        first_intervention,
        decisions,
    })
}
