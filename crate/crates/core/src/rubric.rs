//! Structured scoring rubric: weighted dimensions, penalties, calibration notes
//! and the output rule.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

const BUILTIN_TVSUM: &str = include_str!("../rubrics/tvsum.rubric");
const BUILTIN_SUMME: &str = include_str!("../rubrics/summe.rubric");
const BUILTIN_QFVS: &str = include_str!("../rubrics/qfvs.rubric");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    /// Short symbol used in the score formula (R, A, D, ...).
    pub key: String,
    pub name: String,
    pub weight: f64,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub name: String,
    pub value: i32,
    #[serde(default)]
    pub trigger: String,
}

fn default_pref_bound() -> i32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub name: String,
    #[serde(rename = "weights")]
    pub dimensions: Vec<Dimension>,
    #[serde(default)]
    pub penalties: Vec<Penalty>,
    #[serde(default = "default_pref_bound")]
    pub preference_adjustment_bound: i32,
    #[serde(default, rename = "calibration")]
    pub calibration_notes: String,
    pub output_rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Rubric {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.is_empty() {
            return Err(Error::InvalidRubric("rubric has no dimensions".into()));
        }
        for d in &self.dimensions {
            if !(d.weight > 0.0 && d.weight < 1.0) && !(self.dimensions.len() == 1 && d.weight == 1.0) {
                return Err(Error::InvalidRubric(format!(
                    "dimension `{}` weight {} outside (0,1)",
                    d.name, d.weight
                )));
            }
        }
        let sum: f64 = self.dimensions.iter().map(|d| d.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidRubric(format!("weights sum to {sum}, expected 1")));
        }
        if let Some(p) = self.penalties.iter().find(|p| p.value > 0) {
            return Err(Error::InvalidRubric(format!(
                "penalty `{}` has positive value {}",
                p.name, p.value
            )));
        }
        if self.preference_adjustment_bound < 0 {
            return Err(Error::InvalidRubric("preference adjustment bound must be >= 0".into()));
        }
        if self.output_rule.trim().is_empty() {
            return Err(Error::InvalidRubric("missing output rule".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rubric: Rubric = serde_json::from_str(text)
            .map_err(|e| Error::InvalidRubric(format!("unparseable rubric document: {e}")))?;
        rubric.validate()?;
        Ok(rubric)
    }

    /// Rubric from a model response: the first JSON object in the text.
    pub fn from_response(text: &str) -> Result<Self> {
        let object = crate::pseudo_label::first_json_object(text)
            .ok_or_else(|| Error::InvalidRubric("no JSON object in rubric response".into()))?;
        Self::from_json(&serde_json::Value::Object(object).to_string())
    }

    /// Built-in rubric for a dataset tag (`tvsum`, `summe`, `qfvs`).
    pub fn builtin(dataset: &str) -> Result<Self> {
        let text = match dataset {
            "tvsum" => BUILTIN_TVSUM,
            "summe" => BUILTIN_SUMME,
            "qfvs" => BUILTIN_QFVS,
            other => return Err(Error::InvalidRubric(format!("no built-in rubric for `{other}`"))),
        };
        Self::from_json(text)
    }

    pub fn tvsum() -> Self {
        Self::builtin("tvsum").expect("built-in TVSum rubric is valid")
    }

    pub fn penalty(&self, name: &str) -> Option<&Penalty> {
        self.penalties.iter().find(|p| p.name == name)
    }

    /// The weighted-sum formula, e.g. `round(0.35R + 0.20A + ... + PrefAdj)`.
    pub fn formula(&self) -> String {
        let terms: Vec<String> = self
            .dimensions
            .iter()
            .map(|d| format!("{:.2}{}", d.weight, d.key))
            .collect();
        format!("Final score = round({} + PrefAdj), clamp [0,100].", terms.join(" + "))
    }

    /// Plain-text rendering embedded in scoring prompts.
    pub fn to_prompt_text(&self) -> String {
        let mut out = String::new();
        for (i, d) in self.dimensions.iter().enumerate() {
            let cap = (d.weight * 100.0).round() as i64;
            let _ = writeln!(out, "{}) {} (0-{cap})", i + 1, d.name);
            if !d.description.is_empty() {
                let _ = writeln!(out, "   - {}", d.description);
            }
        }
        if !self.penalties.is_empty() {
            let list: Vec<String> = self
                .penalties
                .iter()
                .map(|p| format!("{} ({})", p.name, p.value))
                .collect();
            let _ = writeln!(out, "Penalties: {}.", list.join(", "));
        }
        if !self.calibration_notes.is_empty() {
            let _ = writeln!(out, "Calibration: {}", self.calibration_notes);
        }
        let _ = writeln!(out, "{}", self.formula());
        let _ = write!(out, "{}", self.output_rule);
        out
    }
}

/// Read and validate a rubric document from disk.
pub fn load_rubric(path: &Path) -> Result<Rubric> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Rubric::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tvsum_values() {
        let r = Rubric::tvsum();
        let weights: Vec<f64> = r.dimensions.iter().map(|d| d.weight).collect();
        assert_eq!(weights, vec![0.35, 0.20, 0.15, 0.15, 0.15]);
        let keys: Vec<&str> = r.dimensions.iter().map(|d| d.key.as_str()).collect();
        assert_eq!(keys, vec!["R", "A", "D", "U", "N"]);
        let penalties: Vec<i32> = r.penalties.iter().map(|p| p.value).collect();
        assert_eq!(penalties, vec![-15, -10, -8, -6, -6]);
        assert_eq!(r.penalty("title/logo/blank").unwrap().value, -15);
        assert_eq!(r.preference_adjustment_bound, 5);
    }

    #[test]
    fn all_builtins_load() {
        for tag in ["tvsum", "summe", "qfvs"] {
            assert_eq!(Rubric::builtin(tag).unwrap().name, tag);
        }
        assert!(Rubric::builtin("other").is_err());
    }

    fn doc(weights: &[f64], penalty: i32) -> String {
        let dims: Vec<serde_json::Value> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| serde_json::json!({"key": format!("K{i}"), "name": format!("d{i}"), "weight": w}))
            .collect();
        serde_json::json!({
            "name": "t",
            "weights": dims,
            "penalties": [{"name": "p", "value": penalty}],
            "output_rule": "Output exactly one integer in [0,100]."
        })
        .to_string()
    }

    #[test]
    fn weight_sum_enforced() {
        assert!(matches!(
            Rubric::from_json(&doc(&[0.5, 0.5, 0.2], -5)),
            Err(Error::InvalidRubric(_))
        ));
        assert!(Rubric::from_json(&doc(&[0.5, 0.5], -5)).is_ok());
    }

    #[test]
    fn positive_penalty_rejected() {
        assert!(matches!(
            Rubric::from_json(&doc(&[0.5, 0.5], 5)),
            Err(Error::InvalidRubric(_))
        ));
    }

    #[test]
    fn parses_rubric_from_chatty_response() {
        let json = serde_json::to_string(&Rubric::tvsum()).unwrap();
        let r = Rubric::from_response(&format!("Here is the rubric:\n{json}\nDone.")).unwrap();
        assert_eq!(r, Rubric::tvsum());
        assert!(Rubric::from_response("no rubric").is_err());
    }

    #[test]
    fn prompt_text_lists_caps_and_formula() {
        let text = Rubric::tvsum().to_prompt_text();
        assert!(text.contains("1) Task/Thematic Relevance (0-35)"));
        assert!(text.contains("title/logo/blank (-15)"));
        assert!(text.contains("round(0.35R + 0.20A + 0.15D + 0.15U + 0.15N + PrefAdj)"));
        assert!(text.ends_with("Output exactly one integer in [0,100]."));
    }
}
