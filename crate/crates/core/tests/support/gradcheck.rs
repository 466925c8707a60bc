//! Central finite differences against the reverse pass of the toy model.

use groundlens::toymodel::{backward, forward_from_attention, AttentionOverrides, ToyModelWeights};
use std::collections::HashMap;

pub const EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-8;

#[derive(Debug, Default)]
pub struct GradCheck {
    pub attention_entries: usize,
    pub input_entries: usize,
    /// Largest `|analytic − numeric| / max(REL_TOL · scale, ABS_TOL)`;
    /// at most 1 means every entry is within tolerance.
    pub worst: f64,
    pub worst_entry: String,
    pub failures: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn record(&mut self, analytic: f64, numeric: f64, what: impl FnOnce() -> String) {
        let bound = (REL_TOL * analytic.abs().max(numeric.abs())).max(ABS_TOL);
        let ratio = (analytic - numeric).abs() / bound;
        if ratio > 1.0 {
            self.failures += 1;
        }
        if ratio > self.worst {
            self.worst = ratio;
            self.worst_entry = what();
        }
    }
}

fn target_logit(weights: &ToyModelWeights, tokens: &[f64], overrides: &AttentionOverrides, target: usize) -> f64 {
    forward_from_attention(weights, tokens, overrides).expect("forward")[target]
}

/// Checks every attention-gradient and input-gradient entry of `target`.
pub fn check_all(weights: &ToyModelWeights, tokens: &[f64], target: usize) -> GradCheck {
    let out = backward(weights, tokens, target).expect("backward");
    let mut report = GradCheck::default();

    for (captured, grads) in out.attentions.iter().zip(&out.attention_grads) {
        let id = &captured.slot.record_id;
        for i in 0..captured.values.len() {
            let mut values = captured.values.clone();
            values[i] += EPS;
            let plus = target_logit(weights, tokens, &HashMap::from([(id.clone(), values.clone())]), target);
            values[i] -= 2.0 * EPS;
            let minus = target_logit(weights, tokens, &HashMap::from([(id.clone(), values)]), target);
            report.record(grads[i], (plus - minus) / (2.0 * EPS), || format!("{id}[{i}]"));
            report.attention_entries += 1;
        }
    }

    let none = AttentionOverrides::new();
    let mut x = tokens.to_vec();
    for i in 0..x.len() {
        let original = x[i];
        x[i] = original + EPS;
        let plus = target_logit(weights, &x, &none, target);
        x[i] = original - EPS;
        let minus = target_logit(weights, &x, &none, target);
        x[i] = original;
        report.record(out.input_grad[i], (plus - minus) / (2.0 * EPS), || format!("input[{i}]"));
        report.input_entries += 1;
    }
    report
}
