//! Scenario documents.
//!
//! A scenario fixes the endpoint model, the hypothesis, the informative and
//! vague priors, the rule families to compare, the sampling prior and the
//! grids swept by [`crate::design`]. Scenarios are read from JSON; every
//! object rejects keys it does not know.
//!
//! ```json
//! {
//!   "name": "example",
//!   "model": { "type": "normal", "sigma": 1.0 },
//!   "hypothesis": { "theta0": 0.0, "tau": 0.025 },
//!   "priors": {
//!     "informative": { "type": "normal", "mean": 0.25, "sd": 0.1414213562373095 },
//!     "vague": { "type": "normal", "mean": 0.0, "sd": 100.0 }
//!   },
//!   "rules": [ { "rule": "fd" }, { "rule": "cd", "w": 0.5 } ]
//! }
//! ```
//!
//! Omitted sections take defaults: the sampling prior is the informative
//! prior, `n` is `[20, 100]`, `w` runs from 0 to 1 in steps of 0.05, the
//! target expected power is 0.8 and `n_max` is 250. The default sampling grid
//! spans the informative prior location ± 3 prior standard deviations in 21
//! points (normal) or moves `a_s` over `2, 4, ..., n0 - 2` with `a_s + b_s = n0`
//! for a `Beta(1 + a, 1 + b)` informative prior (binomial).

use serde::Deserialize;

use crate::decisions::{Hypothesis, RuleContext, RuleKind, RuleSpec};
use crate::distributions::{EndpointModel, Prior};
use crate::error::{Error, Result};
use crate::oc::SamplingPrior;

const PAPER_NORMAL: &str = include_str!("../scenarios/paper-normal.json");
const PAPER_BINOMIAL: &str = include_str!("../scenarios/paper-binomial.json");

/// Names accepted by [`Scenario::builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["paper-normal", "paper-binomial"];

/// Family of sampling priors swept in sensitivity analyses.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingGrid {
    /// `N(mean, sd)` for each mean.
    NormalMean { sd: f64, means: Vec<f64> },
    /// `Beta(1 + a_s, 1 + total - a_s)` for each `a_s`.
    BetaSuccesses { total: f64, successes: Vec<f64> },
}

impl SamplingGrid {
    /// Sampling priors paired with their means, in grid order.
    pub fn priors(&self) -> Result<Vec<(f64, SamplingPrior)>> {
        match self {
            Self::NormalMean { sd, means } => means
                .iter()
                .map(|&m| Ok((m, SamplingPrior::new(Prior::normal(m, *sd)?)?)))
                .collect(),
            Self::BetaSuccesses { total, successes } => successes
                .iter()
                .map(|&a| {
                    let prior = Prior::beta(1.0 + a, 1.0 + total - a)?;
                    Ok((prior.mean(), SamplingPrior::new(prior)?))
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::NormalMean { means, .. } => means.len(),
            Self::BetaSuccesses { successes, .. } => successes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub context: RuleContext,
    pub rules: Vec<RuleSpec>,
    pub sampling: SamplingPrior,
    pub n_grid: Vec<u64>,
    pub w_grid: Vec<f64>,
    pub sampling_grid: SamplingGrid,
    pub target_expected_power: f64,
    pub n_max: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.validate()
    }

    /// One of the scenarios in [`BUILTIN_NAMES`].
    pub fn builtin(name: &str) -> Option<Result<Self>> {
        match name {
            "paper-normal" => Some(Self::from_json(PAPER_NORMAL)),
            "paper-binomial" => Some(Self::from_json(PAPER_BINOMIAL)),
            _ => None,
        }
    }

    pub fn builtin_json(name: &str) -> Option<&'static str> {
        match name {
            "paper-normal" => Some(PAPER_NORMAL),
            "paper-binomial" => Some(PAPER_BINOMIAL),
            _ => None,
        }
    }

    pub fn model(&self) -> &EndpointModel {
        &self.context.model
    }

    pub fn hypothesis(&self) -> &Hypothesis {
        &self.context.hypothesis
    }

    pub fn rule(&self, label: &str) -> Option<&RuleSpec> {
        self.rules.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    model: EndpointModel,
    hypothesis: HypothesisFile,
    priors: PriorsFile,
    rules: Vec<RuleFile>,
    sampling: Option<Prior>,
    #[serde(default)]
    grids: GridsFile,
    #[serde(default)]
    targets: TargetsFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisFile {
    theta0: f64,
    kappa: Option<f64>,
    tau: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorsFile {
    informative: Prior,
    vague: Prior,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RuleName {
    Fd,
    Bd,
    Cd,
    CdAdapt,
    Rmd,
    TiRbd,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rule: RuleName,
    label: Option<String>,
    w: Option<f64>,
    robust: Option<Prior>,
    prior: Option<Prior>,
    tau_bound: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridsFile {
    n: Option<Vec<u64>>,
    w: Option<RangeFile>,
    sampling: Option<SamplingGridFile>,
}

/// Either explicit `values` or `count` equally spaced points on `[start, stop]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeFile {
    values: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SamplingGridFile {
    NormalMean { sd: f64, mean: RangeFile },
    BetaSuccesses { total: f64, successes: RangeFile },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsFile {
    expected_power: Option<f64>,
    n_max: Option<u64>,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn sorted<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|p| p[0] < p[1])
}

impl RangeFile {
    fn resolve(&self, key: &str) -> Result<Vec<f64>> {
        let values = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(k)) => {
                if k == 0 {
                    return Err(config(format!("`{key}.count` must be positive")));
                }
                if k == 1 {
                    vec![a]
                } else {
                    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
                }
            }
            _ => {
                return Err(config(format!(
                    "`{key}` needs either `values` or all of `start`, `stop`, `count`"
                )))
            }
        };
        if values.is_empty() || !values.iter().all(|v| v.is_finite()) || !sorted(&values) {
            return Err(config(format!("`{key}` must be a nonempty, finite, strictly increasing grid")));
        }
        Ok(values)
    }
}

impl RuleFile {
    fn into_spec(self, index: usize) -> Result<RuleSpec> {
        let at = |key: &str| format!("`rules[{index}].{key}`");
        let reject_key = |present: bool, key: &str| -> Result<()> {
            if present {
                Err(config(format!("{} is not used by this rule", at(key))))
            } else {
                Ok(())
            }
        };
        let need_w = |w: Option<f64>| w.ok_or_else(|| config(format!("{} is required", at("w"))));
        let kind = match self.rule {
            RuleName::Fd | RuleName::Bd | RuleName::CdAdapt => {
                reject_key(self.w.is_some(), "w")?;
                reject_key(self.robust.is_some(), "robust")?;
                match self.rule {
                    RuleName::Fd => {
                        reject_key(self.prior.is_some(), "prior")?;
                        reject_key(self.tau_bound.is_some(), "tau_bound")?;
                        RuleKind::Fd
                    }
                    RuleName::Bd => {
                        reject_key(self.tau_bound.is_some(), "tau_bound")?;
                        RuleKind::Bd { prior: self.prior }
                    }
                    _ => {
                        reject_key(self.prior.is_some(), "prior")?;
                        RuleKind::CdAdapt { tau_bound: self.tau_bound.unwrap_or(0.15) }
                    }
                }
            }
            RuleName::Cd | RuleName::TiRbd => {
                reject_key(self.robust.is_some(), "robust")?;
                reject_key(self.prior.is_some(), "prior")?;
                reject_key(self.tau_bound.is_some(), "tau_bound")?;
                let w = need_w(self.w)?;
                if matches!(self.rule, RuleName::Cd) {
                    RuleKind::Cd { w }
                } else {
                    RuleKind::TiRbd { w }
                }
            }
            RuleName::Rmd => {
                reject_key(self.prior.is_some(), "prior")?;
                reject_key(self.tau_bound.is_some(), "tau_bound")?;
                let robust = self.robust.ok_or_else(|| config(format!("{} is required", at("robust"))))?;
                RuleKind::Rmd { w: need_w(self.w)?, robust }
            }
        };
        if let Some(w) = kind.weight() {
            if !(0.0..=1.0).contains(&w) {
                return Err(config(format!("{} must lie in [0,1]", at("w"))));
            }
        }
        Ok(match self.label {
            Some(label) => RuleSpec::labelled(label, kind),
            None => RuleSpec::new(kind),
        })
    }
}

fn default_sampling_grid(informative: &Prior) -> Result<SamplingGrid> {
    match informative {
        Prior::Normal { mean, sd } => Ok(SamplingGrid::NormalMean {
            sd: *sd,
            means: (0..21).map(|i| mean - 3.0 * sd + 6.0 * sd * i as f64 / 20.0).collect(),
        }),
        Prior::Beta { a, b } => {
            let total = a + b - 2.0;
            let successes: Vec<f64> = (1..).map(|k| 2.0 * k as f64).take_while(|&s| s <= total - 2.0).collect();
            if successes.is_empty() {
                return Err(config("informative prior too weak for the default sampling grid; set `grids.sampling`"));
            }
            Ok(SamplingGrid::BetaSuccesses { total, successes })
        }
        _ => Err(config("no default sampling grid for this informative prior; set `grids.sampling`")),
    }
}

impl ScenarioFile {
    fn validate(self) -> Result<Scenario> {
        let model = match self.model {
            EndpointModel::Normal { sigma } => EndpointModel::normal(sigma).map_err(|e| config(format!("`model`: {e}")))?,
            m => m,
        };
        let h = &self.hypothesis;
        let hypothesis = match (h.kappa, h.tau) {
            (Some(k), None) => Hypothesis::new(h.theta0, k),
            (None, Some(t)) => Hypothesis::from_tau(h.theta0, t),
            _ => return Err(config("`hypothesis` needs exactly one of `kappa`, `tau`")),
        }
        .map_err(|e| config(format!("`hypothesis`: {e}")))?;
        if model == EndpointModel::Binomial && !(hypothesis.theta0() > 0.0 && hypothesis.theta0() < 1.0) {
            return Err(config("`hypothesis.theta0` must lie in (0,1) for the binomial endpoint"));
        }
        if self.rules.is_empty() {
            return Err(config("`rules` must list at least one rule"));
        }
        let rules = self
            .rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.into_spec(i))
            .collect::<Result<Vec<_>>>()?;
        for (i, r) in rules.iter().enumerate() {
            if rules[..i].iter().any(|q| q.label == r.label) {
                return Err(config(format!("duplicate rule label `{}`", r.label)));
            }
        }
        let context = RuleContext { model, hypothesis, informative: self.priors.informative, vague: self.priors.vague };
        let sampling = SamplingPrior::new(self.sampling.unwrap_or_else(|| context.informative.clone()))
            .map_err(|e| config(format!("`sampling`: {e}")))?;

        let n_grid = self.grids.n.unwrap_or_else(|| vec![20, 100]);
        if n_grid.is_empty() || n_grid[0] == 0 || !sorted(&n_grid) {
            return Err(config("`grids.n` must be a nonempty, strictly increasing list of positive integers"));
        }
        let w_grid = match &self.grids.w {
            Some(r) => r.resolve("grids.w")?,
            None => (0..=20).map(|i| i as f64 / 20.0).collect(),
        };
        if !w_grid.iter().all(|w| (0.0..=1.0).contains(w)) {
            return Err(config("`grids.w` must lie in [0,1]"));
        }
        let sampling_grid = match self.grids.sampling {
            Some(SamplingGridFile::NormalMean { sd, mean }) => {
                if !(sd > 0.0 && sd.is_finite()) {
                    return Err(config("`grids.sampling.sd` must be positive"));
                }
                SamplingGrid::NormalMean { sd, means: mean.resolve("grids.sampling.mean")? }
            }
            Some(SamplingGridFile::BetaSuccesses { total, successes }) => {
                let successes = successes.resolve("grids.sampling.successes")?;
                if !successes.iter().all(|&a| a >= 0.0 && a <= total) {
                    return Err(config("`grids.sampling.successes` must lie in [0, total]"));
                }
                SamplingGrid::BetaSuccesses { total, successes }
            }
            None => default_sampling_grid(&context.informative)?,
        };
        match (&sampling_grid, model) {
            (SamplingGrid::NormalMean { .. }, EndpointModel::Normal { .. })
            | (SamplingGrid::BetaSuccesses { .. }, EndpointModel::Binomial) => {}
            _ => return Err(config("`grids.sampling` does not match the endpoint model")),
        }

        let target_expected_power = self.targets.expected_power.unwrap_or(0.8);
        if !(target_expected_power > 0.0 && target_expected_power < 1.0) {
            return Err(config("`targets.expected_power` must lie in (0,1)"));
        }
        let n_max = self.targets.n_max.unwrap_or(250);
        if n_max == 0 {
            return Err(config("`targets.n_max` must be at least 1"));
        }

        // Instantiating every rule once surfaces prior/model mismatches here.
        for r in &rules {
            context.instantiate(r, n_grid[0]).map_err(|e| config(format!("rule `{}`: {e}", r.label)))?;
        }
        Ok(Scenario {
            name: self.name.unwrap_or_else(|| "scenario".to_string()),
            context,
            rules,
            sampling,
            n_grid,
            w_grid,
            sampling_grid,
            target_expected_power,
            n_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": { "type": "normal", "sigma": 1.0 },
        "hypothesis": { "theta0": 0.0, "tau": 0.025 },
        "priors": {
            "informative": { "type": "normal", "mean": 0.25, "sd": 0.2 },
            "vague": { "type": "normal", "mean": 0.0, "sd": 100.0 }
        },
        "rules": [ { "rule": "fd" }, { "rule": "cd", "w": 0.5 } ]
    }"#;

    fn with(find: &str, replace: &str) -> String {
        assert!(MINIMAL.contains(find));
        MINIMAL.replacen(find, replace, 1)
    }

    fn message(text: &str) -> String {
        Scenario::from_json(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_scenario_takes_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.n_grid, vec![20, 100]);
        assert_eq!(s.w_grid.len(), 21);
        assert_eq!(s.n_max, 250);
        assert_eq!(s.target_expected_power, 0.8);
        assert_eq!(s.sampling.prior(), &s.context.informative);
        assert_eq!(s.sampling_grid.len(), 21);
        assert_eq!(s.rules[1].label, "CD");
    }

    #[test]
    fn unknown_keys_are_named() {
        assert!(message(&with("\"rules\"", "\"rulez\": 1, \"rules\"")).contains("rulez"));
        assert!(message(&with("{ \"rule\": \"fd\" }", "{ \"rule\": \"fd\", \"weight\": 1 }")).contains("weight"));
        assert!(message(&with("\"sigma\": 1.0", "\"sigma\": 1.0, \"mu\": 0")).contains("mu"));
    }

    #[test]
    fn rule_fields_are_checked() {
        assert!(message(&with("{ \"rule\": \"cd\", \"w\": 0.5 }", "{ \"rule\": \"cd\" }")).contains("rules[1].w"));
        assert!(message(&with("{ \"rule\": \"fd\" }", "{ \"rule\": \"fd\", \"w\": 0.3 }")).contains("rules[0].w"));
        assert!(message(&with("{ \"rule\": \"fd\" }", "{ \"rule\": \"rmd\", \"w\": 0.3 }")).contains("robust"));
        assert!(message(&with("\"w\": 0.5", "\"w\": 1.5")).contains("rules[1].w"));
        assert!(message(&with("\"fd\"", "\"mystery\"")).contains("mystery"));
    }

    #[test]
    fn hypothesis_needs_one_scale() {
        assert!(message(&with("\"tau\": 0.025", "\"tau\": 0.025, \"kappa\": 0.1")).contains("exactly one"));
    }

    #[test]
    fn incompatible_priors_are_rejected() {
        let text = with("\"type\": \"normal\", \"mean\": 0.25, \"sd\": 0.2", "\"type\": \"beta\", \"a\": 2, \"b\": 2");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn grids_must_be_sorted() {
        let text = with("\"rules\"", "\"grids\": { \"n\": [100, 20] }, \"rules\"");
        assert!(message(&text).contains("grids.n"));
        let text = with("\"rules\"", "\"grids\": { \"w\": { \"values\": [0.5, 0.2] } }, \"rules\"");
        assert!(message(&text).contains("grids.w"));
        let text = with("\"rules\"", "\"grids\": { \"w\": { \"start\": 0, \"count\": 3 } }, \"rules\"");
        assert!(message(&text).contains("grids.w"));
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let text = with("{ \"rule\": \"fd\" }", "{ \"rule\": \"cd\", \"w\": 0.1 }");
        assert!(message(&text).contains("duplicate"));
    }

    #[test]
    fn builtins_parse() {
        for name in BUILTIN_NAMES {
            let s = Scenario::builtin(name).unwrap().unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.rules.len(), 7);
            assert!((s.hypothesis().tau() - 0.025).abs() < 1e-15);
            assert!((s.hypothesis().kappa() - 0.025 / 0.975).abs() < 1e-15);
        }
        assert!(Scenario::builtin("nope").is_none());
        let b = Scenario::builtin("paper-binomial").unwrap().unwrap();
        match &b.sampling_grid {
            SamplingGrid::BetaSuccesses { total, successes } => {
                assert_eq!(*total, 40.0);
                assert_eq!(successes.first(), Some(&2.0));
                assert_eq!(successes.last(), Some(&38.0));
                assert_eq!(successes.len(), 19);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_beta_grid() {
        let grid = default_sampling_grid(&Prior::beta(21.0, 21.0).unwrap()).unwrap();
        let priors = grid.priors().unwrap();
        assert_eq!(priors.len(), 19);
        assert_eq!(priors[9].1.prior(), &Prior::beta(21.0, 21.0).unwrap());
    }
}
