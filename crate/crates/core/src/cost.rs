//! Input/output cost model and the break-even expansion bound.
//!
//! Stored USD amounts are exact decimals rounded to six fractional digits
//! (micro-dollars). The algebraic helpers (`compressed_cost`,
//! `savings_delta`, `max_expansion`) work in `f64` on the continuous model.

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fractional digits kept on stored USD values.
pub const USD_SCALE: u32 = 6;

/// Per-million-token prices. The per-token prices and their ratio are derived
/// on demand so they cannot go stale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingModel {
    #[serde(with = "rust_decimal::serde::str")]
    pub input_per_million: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub output_per_million: Decimal,
}

impl Default for PricingModel {
    /// $3 / $15 per million input / output tokens.
    fn default() -> Self {
        PricingModel {
            input_per_million: Decimal::from(3),
            output_per_million: Decimal::from(15),
        }
    }
}

impl PricingModel {
    pub fn new(input_per_million: Decimal, output_per_million: Decimal) -> Result<Self> {
        if input_per_million <= Decimal::ZERO || output_per_million <= Decimal::ZERO {
            return Err(Error::InvalidParameter("prices must be positive".into()));
        }
        Ok(PricingModel {
            input_per_million,
            output_per_million,
        })
    }

    pub fn input_per_token(&self) -> f64 {
        self.input_per_million.to_f64().unwrap_or(f64::NAN) / 1e6
    }

    pub fn output_per_token(&self) -> f64 {
        self.output_per_million.to_f64().unwrap_or(f64::NAN) / 1e6
    }

    /// Output-to-input price ratio `k`.
    pub fn ratio(&self) -> f64 {
        (self.output_per_million / self.input_per_million)
            .to_f64()
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    #[serde(with = "rust_decimal::serde::str")]
    pub input_cost: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub output_cost: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub total: Decimal,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "rust_decimal::serde::str_option"
    )]
    pub savings_vs_baseline: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_ratio: Option<f64>,
}

impl CostBreakdown {
    pub fn zero() -> Self {
        CostBreakdown {
            input_cost: Decimal::ZERO,
            output_cost: Decimal::ZERO,
            total: Decimal::ZERO,
            savings_vs_baseline: None,
            expansion_ratio: None,
        }
    }

    pub fn total_f64(&self) -> f64 {
        self.total.to_f64().unwrap_or(f64::NAN)
    }

    /// Attaches the savings against a baseline cost and the output expansion
    /// against a baseline output count.
    pub fn against_baseline(mut self, baseline: &CostBreakdown, usage: TokenUsage, baseline_usage: TokenUsage) -> Self {
        self.savings_vs_baseline = Some(baseline.total - self.total);
        self.expansion_ratio = expansion_ratio(usage.output_tokens, baseline_usage.output_tokens).ok();
        self
    }
}

fn round_usd(value: Decimal) -> Decimal {
    value.round_dp_with_strategy(USD_SCALE, RoundingStrategy::MidpointAwayFromZero)
}

/// Cost of one trial: `I * p_i + O * p_o`, each component rounded to micro-dollars.
pub fn trial_cost(usage: TokenUsage, pricing: &PricingModel) -> CostBreakdown {
    let million = Decimal::from(1_000_000u32);
    let input_cost = round_usd(Decimal::from(usage.input_tokens) * pricing.input_per_million / million);
    let output_cost = round_usd(Decimal::from(usage.output_tokens) * pricing.output_per_million / million);
    CostBreakdown {
        input_cost,
        output_cost,
        total: input_cost + output_cost,
        savings_vs_baseline: None,
        expansion_ratio: None,
    }
}

/// Fractional savings `1 - treatment / control`; positive means cheaper.
pub fn savings(control_cost: f64, treatment_cost: f64) -> Result<f64> {
    if control_cost <= 0.0 || !control_cost.is_finite() {
        return Err(Error::UndefinedBaseline(format!(
            "control cost {control_cost} must be positive"
        )));
    }
    Ok(1.0 - treatment_cost / control_cost)
}

/// Renders a savings fraction in the table convention where savings print as
/// negative cost deltas ("-27.9%") and increases as positive ("+1.8%").
pub fn display_savings_pct(savings_fraction: f64) -> String {
    let delta = -savings_fraction * 100.0;
    if delta.abs() < 0.05 {
        "0.0%".to_string()
    } else {
        format!("{delta:+.1}%")
    }
}

/// Output expansion factor `e = treatment_out / control_out`.
pub fn expansion_ratio(treatment_out: u64, control_out: u64) -> Result<f64> {
    expansion_ratio_f64(treatment_out as f64, control_out as f64)
}

pub fn expansion_ratio_f64(treatment_out: f64, control_out: f64) -> Result<f64> {
    if control_out <= 0.0 {
        return Err(Error::UndefinedBaseline("control output is zero".into()));
    }
    Ok(treatment_out / control_out)
}

/// Cost under compression ratio `r` and output expansion `e`:
/// `(r I) p_i + (e O) p_o`.
pub fn compressed_cost(r: f64, e: f64, input: f64, output: f64, p_in: f64, p_out: f64) -> f64 {
    r * input * p_in + e * output * p_out
}

pub fn baseline_cost(input: f64, output: f64, p_in: f64, p_out: f64) -> f64 {
    input * p_in + output * p_out
}

/// Savings decomposition `I p_i (1 - r) - O p_o (e - 1)`.
pub fn savings_delta(r: f64, e: f64, input: f64, output: f64, p_in: f64, p_out: f64) -> f64 {
    input * p_in * (1.0 - r) - output * p_out * (e - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenResult {
    pub r: f64,
    pub e_max: f64,
    pub margin: Option<f64>,
}

impl BreakEvenResult {
    /// Sets `margin = e_max - observed`.
    pub fn with_observed(mut self, observed_e: f64) -> Self {
        self.margin = Some(self.e_max - observed_e);
        self
    }
}

/// Largest tolerable output expansion: `1 + (1 - r) I / (k O)`.
pub fn max_expansion(r: f64, input: f64, output: f64, k: f64) -> Result<BreakEvenResult> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!("compression ratio {r} not in (0, 1]")));
    }
    if output <= 0.0 {
        return Err(Error::UndefinedBaseline(
            "baseline output tokens O must be positive; measure the uncompressed arm first".into(),
        ));
    }
    if k <= 0.0 {
        return Err(Error::InvalidParameter(format!("price ratio k = {k} must be positive")));
    }
    Ok(BreakEvenResult {
        r,
        e_max: 1.0 + (1.0 - r) * input / (k * output),
        margin: None,
    })
}

pub fn breakeven_surface(input: f64, output: f64, k: f64, r_grid: &[f64]) -> Result<Vec<BreakEvenResult>> {
    r_grid.iter().map(|&r| max_expansion(r, input, output, k)).collect()
}

/// CSV with columns `r,e_max,margin`, six decimals; missing margins are empty.
pub fn surface_csv(rows: &[BreakEvenResult]) -> String {
    let mut out = String::from("r,e_max,margin\n");
    for row in rows {
        let margin = row.margin.map(|m| format!("{m:.6}")).unwrap_or_default();
        out.push_str(&format!("{:.6},{:.6},{}\n", row.r, row.e_max, margin));
    }
    out
}

/// Converts a float USD value to the stored decimal representation.
pub fn usd(value: f64) -> Decimal {
    round_usd(Decimal::from_f64(value).unwrap_or_default())
}
