//! Deterministic stand-in for a model API, for desk-scale end-to-end runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ModelBackend, ModelRequest, ModelResponse};
use crate::corpus::estimate_tokens;
use crate::digest::sha256_parts;
use crate::{Error, Result};

const SYLLABLE: &[u8] = b"bcdfghjklmnpqrstvwxz";
const VOWEL: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub base_ms: f64,
    pub per_output_token_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulatedModelSpec {
    pub base_output_tokens: f64,
    /// (realized ratio, output multiplier) knots; linear between knots, flat outside.
    pub expansion_curve: Vec<(f64, f64)>,
    pub noise_seed: u64,
    /// Log-scale SD of the mean-one lognormal noise; 0 disables noise.
    pub noise_sigma: f64,
    /// Probability that a response word diverges from the uncompressed
    /// response, per unit of removed prompt (`1 - realized_ratio`).
    pub divergence_per_removed: f64,
    pub latency_model: LatencyModel,
}

impl Default for SimulatedModelSpec {
    /// Knots taken from the pilot arm means: 609 output tokens uncompressed,
    /// 811 / 613 / 161 at ratios 0.8 / 0.5 / 0.2.
    fn default() -> Self {
        SimulatedModelSpec {
            base_output_tokens: 609.0,
            expansion_curve: vec![
                (0.2, 161.0 / 609.0),
                (0.5, 613.0 / 609.0),
                (0.8, 811.0 / 609.0),
                (1.0, 1.0),
            ],
            noise_seed: 0,
            noise_sigma: 0.3,
            divergence_per_removed: 0.6,
            latency_model: LatencyModel {
                base_ms: 800.0,
                per_output_token_ms: 12.0,
            },
        }
    }
}

impl SimulatedModelSpec {
    pub fn identity(base_output_tokens: f64) -> Self {
        SimulatedModelSpec {
            base_output_tokens,
            expansion_curve: vec![(1.0, 1.0)],
            noise_sigma: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.expansion_curve.is_empty() {
            return Err(Error::InvalidParameter(
                "expansion_curve needs at least one knot".into(),
            ));
        }
        if self
            .expansion_curve
            .iter()
            .any(|&(x, m)| !(x > 0.0 && x <= 1.0) || m.is_nan() || m <= 0.0)
        {
            return Err(Error::InvalidParameter(
                "expansion_curve knots need ratio in (0, 1] and multiplier > 0".into(),
            ));
        }
        if self.expansion_curve.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter(
                "expansion_curve ratios must be strictly increasing".into(),
            ));
        }
        if self.base_output_tokens.is_nan() || self.base_output_tokens <= 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter(
                "base_output_tokens must be > 0 and noise_sigma >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Expected output multiplier at `ratio`.
    pub fn curve(&self, ratio: f64) -> f64 {
        let knots = &self.expansion_curve;
        if ratio <= knots[0].0 {
            return knots[0].1;
        }
        for w in knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if ratio <= x1 {
                return y0 + (ratio - x0) / (x1 - x0) * (y1 - y0);
            }
        }
        knots[knots.len() - 1].1
    }
}

pub struct SimulatedBackend {
    spec: SimulatedModelSpec,
}

impl SimulatedBackend {
    pub fn new(spec: SimulatedModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SimulatedBackend { spec })
    }

    pub fn spec(&self) -> &SimulatedModelSpec {
        &self.spec
    }

    fn rng(&self, stimulus_id: &str, stream: &[u8]) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(sha256_parts(&[
            &self.spec.noise_seed.to_le_bytes(),
            stimulus_id.as_bytes(),
            stream,
        ]))
    }

    /// Output token count for a stimulus at a realized ratio, before the
    /// `max_output_tokens` cap.
    pub fn output_tokens(&self, stimulus_id: &str, realized_ratio: f64) -> u64 {
        let sigma = self.spec.noise_sigma;
        let noise = if sigma > 0.0 {
            let z: f64 = self.rng(stimulus_id, b"length").sample(StandardNormal);
            (sigma * z - sigma * sigma / 2.0).exp()
        } else {
            1.0
        };
        let expected = self.spec.base_output_tokens * self.spec.curve(realized_ratio) * noise;
        (expected.round() as u64).max(1)
    }

    fn word(rng: &mut ChaCha8Rng) -> [u8; 3] {
        [
            SYLLABLE[rng.random_range(0..SYLLABLE.len())],
            VOWEL[rng.random_range(0..VOWEL.len())],
            SYLLABLE[rng.random_range(0..SYLLABLE.len())],
        ]
    }

    /// Response text of `tokens` three-letter words, each followed by a space,
    /// so the four-characters-per-token estimate recovers `tokens` exactly.
    /// Words follow a content stream shared by every arm of the same stimulus;
    /// each word diverges to an arm-specific stream with probability
    /// `divergence_per_removed * (1 - realized_ratio)`.
    pub fn response_text(&self, stimulus_id: &str, realized_ratio: f64, tokens: u64) -> String {
        let p_div = (self.spec.divergence_per_removed * (1.0 - realized_ratio)).clamp(0.0, 1.0);
        let mut content = self.rng(stimulus_id, b"content");
        let mut divergent = self.rng(stimulus_id, &realized_ratio.to_bits().to_le_bytes());
        let mut out = Vec::with_capacity(tokens as usize * 4);
        for _ in 0..tokens {
            let shared = Self::word(&mut content);
            let w = if p_div > 0.0 && divergent.random::<f64>() < p_div {
                Self::word(&mut divergent)
            } else {
                shared
            };
            out.extend_from_slice(&w);
            out.push(b' ');
        }
        String::from_utf8(out).expect("ascii")
    }
}

impl ModelBackend for SimulatedBackend {
    fn respond(&self, request: &ModelRequest<'_>) -> std::result::Result<ModelResponse, BackendError> {
        let tokens = self
            .output_tokens(request.stimulus_id, request.realized_ratio)
            .min(request.config.max_output_tokens as u64);
        let text = self.response_text(request.stimulus_id, request.realized_ratio, tokens);
        let latency = self.spec.latency_model.base_ms + self.spec.latency_model.per_output_token_ms * tokens as f64;
        Ok(ModelResponse {
            input_tokens: estimate_tokens(request.user_prompt.chars().count()) as u64,
            output_tokens: tokens,
            text,
            simulated_latency_ms: Some(latency.round() as u64),
        })
    }
}
