use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{fmt_f64, Table};
use crate::analysis::{self, NoisyCompareParams};
use crate::error::{Error, Result};

/// One closed-form evaluation, tagged by formula name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormulaCall {
    ErrorRateModel2 {
        f: usize,
        f_o: usize,
        m: usize,
        m_o: usize,
        q: f64,
        p: f64,
        c: usize,
        n: usize,
    },
    ErrorRateTraditional {
        n: usize,
        k: usize,
        t: usize,
    },
    ExpectedExtraTests {
        f: usize,
        f_o: usize,
        m: usize,
        k_f: usize,
        z: f64,
    },
    N10FromExtraTests {
        extra: f64,
        m: usize,
        z: f64,
    },
    OverlapConditionalProbs {
        f: usize,
        k_f: usize,
    },
    FnBoundsCommunity(NoisyCompareParams),
    FnComparisonF {
        gamma: f64,
        u: f64,
        w: f64,
    },
    OverlapFnMixture {
        q1: f64,
        q2: f64,
        f: usize,
        k_f: usize,
    },
}

impl FormulaCall {
    /// Named outputs, in a fixed order per formula.
    pub fn evaluate(&self) -> Result<Vec<(&'static str, f64)>> {
        Ok(match *self {
            FormulaCall::ErrorRateModel2 { f, f_o, m, m_o, q, p, c, n } => {
                vec![("error_rate", analysis::error_rate_model2(f, f_o, m, m_o, q, p, c, n)?)]
            }
            FormulaCall::ErrorRateTraditional { n, k, t } => {
                vec![("error_rate", analysis::error_rate_traditional(n, k, t)?)]
            }
            FormulaCall::ExpectedExtraTests { f, f_o, m, k_f, z } => {
                vec![("extra_tests", analysis::expected_extra_tests(f, f_o, m, k_f, z)?)]
            }
            FormulaCall::N10FromExtraTests { extra, m, z } => vec![("n10", analysis::n10_from_extra_tests(extra, m, z)?)],
            FormulaCall::OverlapConditionalProbs { f, k_f } => {
                let p = analysis::overlap_conditional_probs(f, k_f)?;
                vec![("p_one", p.p_one), ("p_both", p.p_both)]
            }
            FormulaCall::FnBoundsCommunity(ref p) => {
                let b = analysis::fn_bounds_community(p)?;
                vec![("q_c1", b.q_c1), ("q_c2", b.q_c2), ("k_c2", b.k_c2)]
            }
            FormulaCall::FnComparisonF { gamma, u, w } => {
                let f = analysis::fn_comparison_f(gamma, u, w)?;
                let regime = match analysis::classify_fn_regime(gamma, u, w)? {
                    analysis::FnRegime::Below => -1.0,
                    analysis::FnRegime::Equal => 0.0,
                    analysis::FnRegime::Above => 1.0,
                };
                vec![("f", f), ("regime", regime)]
            }
            FormulaCall::OverlapFnMixture { q1, q2, f, k_f } => {
                vec![("fn_prob", analysis::overlap_fn_mixture(q1, q2, f, k_f)?)]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<Value>,
}

/// A formula call given as a JSON object, optionally swept over one of its
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub call: Value,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

fn parse_call(v: Value) -> Result<FormulaCall> {
    serde_json::from_value(v).map_err(|e| Error::InvalidParameter(format!("formula: {e}")))
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl AnalysisSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("analysis: {e}")))?;
        if !spec.call.is_object() {
            return Err(Error::InvalidParameter("analysis: call must be a JSON object".into()));
        }
        if spec.sweep.as_ref().is_some_and(|s| s.values.is_empty()) {
            return Err(Error::InvalidParameter("analysis: sweep values must not be empty".into()));
        }
        Ok(spec)
    }

    /// One row per sweep value (a single row without a sweep).
    pub fn run(&self) -> Result<Table> {
        let points: Vec<(Option<&Value>, Value)> = match &self.sweep {
            None => vec![(None, self.call.clone())],
            Some(sw) => sw
                .values
                .iter()
                .map(|v| {
                    let mut call = self.call.clone();
                    call[sw.param.as_str()] = v.clone();
                    (Some(v), call)
                })
                .collect(),
        };
        let mut table: Option<Table> = None;
        for (x, call) in points {
            let outputs = parse_call(call)?.evaluate()?;
            let t = table.get_or_insert_with(|| {
                let mut header: Vec<&str> = self.sweep.iter().map(|s| s.param.as_str()).collect();
                header.extend(outputs.iter().map(|(name, _)| *name));
                Table::new(&header)
            });
            let mut row: Vec<String> = x.map(cell).into_iter().collect();
            row.extend(outputs.iter().map(|(_, v)| fmt_f64(*v)));
            t.rows.push(row);
        }
        Ok(table.expect("at least one point"))
    }
}
