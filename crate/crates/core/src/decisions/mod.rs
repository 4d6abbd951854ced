//! Test decisions under the 0-κ loss.
//!
//! Every rule rejects `H0: θ <= θ0` when a posterior probability of the null
//! falls strictly below a threshold. The rules differ in the analysis prior
//! and in how the threshold is chosen:
//!
//! | rule     | analysis prior                 | threshold                               |
//! |----------|--------------------------------|-----------------------------------------|
//! | FD       | vague `π0`                     | `τ`                                     |
//! | BD       | informative `π`                | `τ`                                     |
//! | CD       | vague `π0`                     | `(1-w)τ + wτ^π`                         |
//! | CD-Adapt | vague `π0`                     | `min[(1-ŵ)τ + ŵτ^π, τ_bound]`           |
//! | RMD      | `(1-w)·robust + w·π`           | `τ`                                     |
//! | TI-RBD   | `(1-w)·δ(θ0) + w·π`            | `τ`                                     |
//!
//! A [`DecisionRule`] is bound to one sample size because `τ^π` depends on `n`.

mod region;

pub use region::{CriticalValue, RejectionRegion};

use crate::distributions::{EndpointModel, Observation, Prior};
use crate::error::{domain, Error, Result};
use crate::numerics::{beta_sf, binomial_tail, std_normal_quantile, std_normal_sf};

/// One-sided hypothesis `H0: θ <= θ0` with type II / type I cost ratio `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    theta0: f64,
    kappa: f64,
    tau: f64,
}

impl Hypothesis {
    pub fn new(theta0: f64, kappa: f64) -> Result<Self> {
        if !theta0.is_finite() {
            return Err(domain("theta0 must be finite"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(domain(format!("cost ratio kappa must be positive, got {kappa}")));
        }
        Ok(Self { theta0, kappa, tau: kappa / (1.0 + kappa) })
    }

    /// Builds the hypothesis from the posterior threshold `τ = κ/(1+κ)`.
    pub fn from_tau(theta0: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(domain(format!("tau must lie in (0,1), got {tau}")));
        }
        let mut h = Self::new(theta0, tau / (1.0 - tau))?;
        h.tau = tau;
        Ok(h)
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Rule family, independent of the sample size.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    Fd,
    /// Bayes decision; `None` analyses under the scenario's informative prior.
    Bd { prior: Option<Prior> },
    Cd { w: f64 },
    CdAdapt { tau_bound: f64 },
    Rmd { w: f64, robust: Prior },
    TiRbd { w: f64 },
}

impl RuleKind {
    pub fn weight(&self) -> Option<f64> {
        match self {
            Self::Cd { w } | Self::Rmd { w, .. } | Self::TiRbd { w } => Some(*w),
            _ => None,
        }
    }

    /// Same family with the borrowing weight replaced; rules without a weight are unchanged.
    pub fn with_weight(&self, w: f64) -> Self {
        match self {
            Self::Cd { .. } => Self::Cd { w },
            Self::Rmd { robust, .. } => Self::Rmd { w, robust: robust.clone() },
            Self::TiRbd { .. } => Self::TiRbd { w },
            other => other.clone(),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Self::CdAdapt { .. })
    }

    pub fn default_label(&self) -> &'static str {
        match self {
            Self::Fd => "FD",
            Self::Bd { .. } => "BD",
            Self::Cd { .. } => "CD",
            Self::CdAdapt { .. } => "CD-Adapt",
            Self::Rmd { .. } => "RMD",
            Self::TiRbd { .. } => "TI-RBD",
        }
    }
}

/// A labelled rule family as it appears in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub label: String,
    pub kind: RuleKind,
}

impl RuleSpec {
    pub fn new(kind: RuleKind) -> Self {
        Self { label: kind.default_label().to_string(), kind }
    }

    pub fn labelled(label: impl Into<String>, kind: RuleKind) -> Self {
        Self { label: label.into(), kind }
    }

    pub fn with_weight(&self, w: f64) -> Self {
        Self { label: self.label.clone(), kind: self.kind.with_weight(w) }
    }
}

/// Everything a rule needs besides its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleContext {
    pub model: EndpointModel,
    pub hypothesis: Hypothesis,
    pub informative: Prior,
    pub vague: Prior,
}

impl RuleContext {
    pub fn instantiate(&self, spec: &RuleSpec, n: u64) -> Result<DecisionRule> {
        DecisionRule::new(spec, self, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Analysis {
    Fixed { prior: Prior, threshold: f64, weight: f64 },
    Adaptive { vague: Prior, informative: Prior, tau_pi: f64, tau_bound: f64 },
}

/// A rule instantiated at a sample size, with `τ^π` resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    label: String,
    kind: RuleKind,
    model: EndpointModel,
    hypothesis: Hypothesis,
    n: u64,
    tau_pi: Option<f64>,
    analysis: Analysis,
}

/// Outcome of applying a rule to one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub reject: bool,
    pub threshold_used: f64,
    pub posterior_prob_null: f64,
    /// Fixed borrowing weight, or the realised `ŵ` for CD-Adapt.
    pub weight_used: f64,
}

fn check_weight(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(domain(format!("borrowing weight must lie in [0,1], got {w}")));
    }
    Ok(())
}

impl DecisionRule {
    pub fn new(spec: &RuleSpec, ctx: &RuleContext, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("sample size must be at least 1"));
        }
        let hyp = ctx.hypothesis;
        let tau = hyp.tau();
        let mut tau_pi_cached = None;
        let analysis = match &spec.kind {
            RuleKind::Fd => Analysis::Fixed { prior: ctx.vague.clone(), threshold: tau, weight: 0.0 },
            RuleKind::Bd { prior } => Analysis::Fixed {
                prior: prior.clone().unwrap_or_else(|| ctx.informative.clone()),
                threshold: tau,
                weight: 1.0,
            },
            RuleKind::Cd { w } => {
                check_weight(*w)?;
                let tp = tau_pi(&ctx.informative, &ctx.model, n, &hyp)?;
                tau_pi_cached = Some(tp);
                Analysis::Fixed { prior: ctx.vague.clone(), threshold: cd_threshold(*w, tau, tp), weight: *w }
            }
            RuleKind::CdAdapt { tau_bound } => {
                if !(*tau_bound > 0.0 && *tau_bound < 1.0) {
                    return Err(domain(format!("tau_bound must lie in (0,1), got {tau_bound}")));
                }
                let tp = tau_pi(&ctx.informative, &ctx.model, n, &hyp)?;
                tau_pi_cached = Some(tp);
                Analysis::Adaptive {
                    vague: ctx.vague.clone(),
                    informative: ctx.informative.clone(),
                    tau_pi: tp,
                    tau_bound: *tau_bound,
                }
            }
            RuleKind::Rmd { w, robust } => {
                check_weight(*w)?;
                let prior = Prior::mixture(vec![robust.clone(), ctx.informative.clone()], vec![1.0 - w, *w])?;
                Analysis::Fixed { prior, threshold: tau, weight: *w }
            }
            RuleKind::TiRbd { w } => {
                check_weight(*w)?;
                let prior = Prior::mixture(
                    vec![Prior::point_mass(hyp.theta0())?, ctx.informative.clone()],
                    vec![1.0 - w, *w],
                )?;
                Analysis::Fixed { prior, threshold: tau, weight: *w }
            }
        };
        let rule = Self {
            label: spec.label.clone(),
            kind: spec.kind.clone(),
            model: ctx.model,
            hypothesis: hyp,
            n,
            tau_pi: tau_pi_cached,
            analysis,
        };
        // Surfaces prior/model mismatches at construction rather than on first use.
        rule.probe()?;
        Ok(rule)
    }

    fn probe(&self) -> Result<()> {
        let obs = match self.model {
            EndpointModel::Normal { .. } => Observation::SampleMean(self.hypothesis.theta0()),
            EndpointModel::Binomial => Observation::Successes(0),
        };
        self.decide(&obs).map(|_| ())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn model(&self) -> &EndpointModel {
        &self.model
    }

    pub fn hypothesis(&self) -> &Hypothesis {
        &self.hypothesis
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Cached `τ^π` for CD and CD-Adapt.
    pub fn tau_pi(&self) -> Option<f64> {
        self.tau_pi
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.analysis, Analysis::Adaptive { .. })
    }

    /// Analysis prior of a fixed-prior rule (the vague prior for CD-Adapt).
    pub fn analysis_prior(&self) -> &Prior {
        match &self.analysis {
            Analysis::Fixed { prior, .. } => prior,
            Analysis::Adaptive { vague, .. } => vague,
        }
    }

    /// Threshold of a fixed-threshold rule; `None` for CD-Adapt.
    pub fn threshold(&self) -> Option<f64> {
        match &self.analysis {
            Analysis::Fixed { threshold, .. } => Some(*threshold),
            Analysis::Adaptive { .. } => None,
        }
    }

    /// Applies the rule to `obs`. Rejection is strict: `P(θ <= θ0 | obs) < threshold`.
    pub fn decide(&self, obs: &Observation) -> Result<Decision> {
        let theta0 = self.hypothesis.theta0();
        match &self.analysis {
            Analysis::Fixed { prior, threshold, weight } => {
                let p = prior.posterior_prob_le(&self.model, obs, self.n, theta0)?;
                Ok(Decision { reject: p < *threshold, threshold_used: *threshold, posterior_prob_null: p, weight_used: *weight })
            }
            Analysis::Adaptive { vague, informative, tau_pi, tau_bound } => {
                let w_hat = adaptive_weight(informative, &self.model, obs, self.n, theta0)?;
                let threshold = cd_threshold(w_hat, self.hypothesis.tau(), *tau_pi).min(*tau_bound);
                let p = vague.posterior_prob_le(&self.model, obs, self.n, theta0)?;
                Ok(Decision { reject: p < threshold, threshold_used: threshold, posterior_prob_null: p, weight_used: w_hat })
            }
        }
    }

    pub fn rejects(&self, obs: &Observation) -> Result<bool> {
        Ok(self.decide(obs)?.reject)
    }
}

/// CD threshold `(1-w)τ + wτ^π`.
pub fn cd_threshold(w: f64, tau: f64, tau_pi: f64) -> f64 {
    (1.0 - w) * tau + w * tau_pi
}

/// Type I error rate `τ^π` of the Bayes decision under the informative prior.
///
/// Normal prior with normal endpoint: `1 - Φ(z^π)` with
/// `z^π = σ(θ0 - μπ)/(√n σπ²) + z_{1-τ} √(1 + σ²/(n σπ²))`.
/// Binomial endpoint: exact level `P(Y >= y* | θ0)` of the BD, where `y*` is the
/// smallest count with `P^π(θ <= θ0 | y*) < τ` (zero if no count rejects).
/// Other non-degenerate priors on the normal endpoint go through the BD's
/// critical value.
pub fn tau_pi(informative: &Prior, model: &EndpointModel, n: u64, hyp: &Hypothesis) -> Result<f64> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    if matches!(informative, Prior::PointMass { .. }) {
        return Err(domain("tau_pi needs a non-degenerate informative prior"));
    }
    let theta0 = hyp.theta0();
    let tau = hyp.tau();
    match (informative, model) {
        (Prior::Normal { mean, sd }, EndpointModel::Normal { sigma }) => {
            let nf = n as f64;
            let var = sd * sd;
            let z = sigma * (theta0 - mean) / (nf.sqrt() * var)
                + std_normal_quantile(1.0 - tau)? * (1.0 + sigma * sigma / (nf * var)).sqrt();
            Ok(std_normal_sf(z))
        }
        (Prior::Mixture(_), EndpointModel::Normal { sigma }) => {
            let bd = bayes_rule(informative, model, n, hyp)?;
            let se = sigma / (n as f64).sqrt();
            Ok(match bd.critical_value()? {
                CriticalValue::Mean(c) => std_normal_sf((c - theta0) / se),
                _ => 0.0,
            })
        }
        (_, EndpointModel::Binomial) => {
            for y in 0..=n {
                let p = informative.posterior_prob_le(model, &Observation::Successes(y), n, theta0)?;
                if p < tau {
                    return Ok(binomial_tail(y, n, theta0));
                }
            }
            Ok(0.0)
        }
        _ => Err(Error::Incompatible { prior: informative.family(), model: model.name() }),
    }
}

fn bayes_rule(prior: &Prior, model: &EndpointModel, n: u64, hyp: &Hypothesis) -> Result<DecisionRule> {
    let ctx = RuleContext { model: *model, hypothesis: *hyp, informative: prior.clone(), vague: prior.clone() };
    DecisionRule::new(&RuleSpec::new(RuleKind::Bd { prior: None }), &ctx, n)
}

/// Data-dependent borrowing weight `ŵ = 1 - |P^π(θ > θ0 | y) - P^{π*}(θ > θ0 | y)|`.
///
/// Normal: `π*` is `N(ȳ, σπ)`, the informative prior recentred on the data.
/// Binomial: the recentred posterior is
/// `Beta(1 + y(1 + n0/n), 1 + n + n0 - y(1 + n0/n))` with `n0 = a + b - 2` the
/// historical pseudo-count behind `π = Beta(a, b)`.
pub fn adaptive_weight(informative: &Prior, model: &EndpointModel, obs: &Observation, n: u64, theta0: f64) -> Result<f64> {
    model.check(obs, n)?;
    let p_inf = informative.posterior_prob_gt(model, obs, n, theta0)?;
    let p_star = match (informative, model, obs) {
        (Prior::Normal { sd, .. }, EndpointModel::Normal { .. }, Observation::SampleMean(y)) => {
            Prior::normal(*y, *sd)?.posterior_prob_gt(model, obs, n, theta0)?
        }
        (Prior::Beta { a, b }, EndpointModel::Binomial, Observation::Successes(y)) => {
            let n0 = a + b - 2.0;
            if n0 < 0.0 {
                return Err(domain(format!("Beta({a}, {b}) does not encode a historical sample (a + b < 2)")));
            }
            let nf = n as f64;
            let s = *y as f64 * (1.0 + n0 / nf);
            let (pa, pb) = (1.0 + s, 1.0 + nf + n0 - s);
            if theta0 <= 0.0 {
                1.0
            } else if theta0 >= 1.0 {
                0.0
            } else {
                beta_sf(theta0, pa, pb)?
            }
        }
        (Prior::PointMass { .. }, _, _) => return Err(domain("adaptive weight needs a non-degenerate informative prior")),
        _ => return Err(Error::Incompatible { prior: informative.family(), model: model.name() }),
    };
    Ok((1.0 - (p_inf - p_star).abs()).clamp(0.0, 1.0))
}
