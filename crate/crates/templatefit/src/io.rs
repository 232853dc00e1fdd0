//! JSON input and output of single fits.

use std::path::Path;

use serde::{Deserialize, Serialize};
use templatefit_core::{gof, BinnedSample, FitResult, TemplateModel, ToyDraw};

use crate::InputError;

/// Histogram as stored in the input file. `sumw2` defaults to `sumw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramJson {
    pub sumw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sumw2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateJson {
    pub name: String,
    pub sumw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sumw2: Option<Vec<f64>>,
}

/// Input of the `fit` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInput {
    pub bin_edges: Vec<f64>,
    pub data: HistogramJson,
    pub templates: Vec<TemplateJson>,
}

fn to_sample(what: &str, sumw: &[f64], sumw2: Option<&[f64]>) -> Result<BinnedSample, InputError> {
    let sumw2 = sumw2.unwrap_or(sumw).to_vec();
    BinnedSample::from_sums(sumw.to_vec(), sumw2).map_err(|source| InputError::Model {
        context: what.to_string(),
        source,
    })
}

impl FitInput {
    pub fn from_json(text: &str) -> Result<Self, InputError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_toy(toy: &ToyDraw) -> Self {
        let hist = |s: &BinnedSample| s.sumw().to_vec();
        FitInput {
            bin_edges: toy.edges.clone(),
            data: HistogramJson {
                sumw: hist(&toy.data),
                sumw2: None,
            },
            templates: ["signal", "background"]
                .iter()
                .zip(&toy.templates)
                .map(|(name, t)| TemplateJson {
                    name: name.to_string(),
                    sumw: hist(t),
                    sumw2: None,
                })
                .collect(),
        }
    }

    /// True if any histogram declares `sumw2 != sumw`.
    pub fn is_weighted(&self) -> bool {
        let differs = |w: &[f64], w2: &Option<Vec<f64>>| w2.as_deref().is_some_and(|w2| w2 != w);
        differs(&self.data.sumw, &self.data.sumw2)
            || self.templates.iter().any(|t| differs(&t.sumw, &t.sumw2))
    }

    pub fn model(&self) -> Result<TemplateModel, InputError> {
        let nbins = self.data.sumw.len();
        if self.bin_edges.len() != nbins + 1 {
            return Err(InputError::Shape(format!(
                "bin_edges has {} entries but data has {nbins} bins",
                self.bin_edges.len()
            )));
        }
        if let Some(t) = self.templates.iter().find(|t| t.sumw.len() != nbins) {
            return Err(InputError::Shape(format!(
                "template '{}' has {} bins but data has {nbins}",
                t.name,
                t.sumw.len()
            )));
        }
        let data = to_sample("data", &self.data.sumw, self.data.sumw2.as_deref())?;
        let templates = self
            .templates
            .iter()
            .map(|t| {
                let s = to_sample(
                    &format!("template '{}'", t.name),
                    &t.sumw,
                    t.sumw2.as_deref(),
                )?;
                Ok((t.name.clone(), s))
            })
            .collect::<Result<Vec<_>, InputError>>()?;
        TemplateModel::new(self.bin_edges.clone(), data, templates).map_err(|source| {
            InputError::Model {
                context: "model".into(),
                source,
            }
        })
    }
}

/// Output of the `fit` subcommand. Quantities that could not be computed
/// are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub yields: Vec<f64>,
    pub errors: Vec<Option<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub qmin: f64,
    pub ndof: i64,
    pub p_value: Option<f64>,
    pub converged: bool,
    pub n_evaluations: usize,
}

impl From<&FitResult> for FitOutput {
    fn from(r: &FitResult) -> Self {
        FitOutput {
            yields: r.yields.clone(),
            errors: r
                .yield_errors
                .iter()
                .map(|e| e.is_finite().then_some(*e))
                .collect(),
            covariance: r.covariance.as_ref().map(|c| c.to_rows()),
            qmin: r.qmin,
            ndof: r.ndof,
            p_value: gof(r).ok(),
            converged: r.converged,
            n_evaluations: r.n_evaluations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sumw2_defaults_to_sumw() {
        let input = FitInput::from_json(
            r#"{"bin_edges": [0, 1, 2], "data": {"sumw": [3, 4]},
                "templates": [{"name": "a", "sumw": [1, 2], "sumw2": [1, 2]}]}"#,
        )
        .unwrap();
        assert!(!input.is_weighted());
        let m = input.model().unwrap();
        assert_eq!(m.data().sumw2(), &[3.0, 4.0]);
    }

    #[test]
    fn weighted_flag_follows_sumw2() {
        let input = FitInput::from_json(
            r#"{"bin_edges": [0, 1], "data": {"sumw": [3], "sumw2": [5]},
                "templates": [{"name": "a", "sumw": [1]}]}"#,
        )
        .unwrap();
        assert!(input.is_weighted());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = FitInput::from_json(
            r#"{"bin_edges": [0, 1], "data": {"sumw": [1]}, "templates": [], "x": 1}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn mismatched_bins_name_the_histogram() {
        let input = FitInput::from_json(
            r#"{"bin_edges": [0, 1, 2], "data": {"sumw": [3, 4]},
                "templates": [{"name": "a", "sumw": [1, 2, 3]}]}"#,
        )
        .unwrap();
        let msg = input.model().unwrap_err().to_string();
        assert!(msg.contains("template 'a' has 3 bins"), "{msg}");
    }
}
