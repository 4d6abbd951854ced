//! Priors, conjugate posteriors and marginal likelihoods for the two endpoint
//! models (normal mean with known sigma, binomial proportion).
//!
//! A [`Prior`] is a tagged union over normal, beta, point-mass and finite
//! mixture distributions. Mixtures are flattened when built, so a mixture
//! component is never itself a mixture, and zero-weight components are
//! dropped. Posterior mixture weights are computed from log marginal
//! likelihoods, so very dispersed components do not underflow.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    beta_cdf, beta_sf, binomial_ln_pmf, ln_beta, ln_choose, log_sum_exp, std_normal_cdf,
    std_normal_sf,
};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Likelihood of the current trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointModel {
    /// `ȳ | θ ~ N(θ, σ/√n)`.
    Normal { sigma: f64 },
    /// `y | θ ~ Bin(n, θ)`.
    Binomial,
}

impl EndpointModel {
    pub fn normal(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self::Normal { sigma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::Binomial => "binomial",
        }
    }

    /// Standard error of the sufficient statistic; `None` for the binomial model.
    pub fn standard_error(&self, n: u64) -> Option<f64> {
        match self {
            Self::Normal { sigma } => Some(sigma / (n as f64).sqrt()),
            Self::Binomial => None,
        }
    }

    /// Validates `obs` as a possible outcome of this model at sample size `n`.
    pub fn check(&self, obs: &Observation, n: u64) -> Result<()> {
        if n == 0 {
            return Err(domain("sample size must be at least 1"));
        }
        match (self, obs) {
            (Self::Normal { .. }, Observation::SampleMean(y)) if y.is_finite() => Ok(()),
            (Self::Binomial, Observation::Successes(y)) if *y <= n => Ok(()),
            _ => Err(domain(format!(
                "observation {obs:?} is not valid for the {} endpoint with n = {n}",
                self.name()
            ))),
        }
    }

    /// Log sampling density (normal) or log pmf (binomial) of `obs` at `theta`.
    pub fn ln_likelihood(&self, obs: &Observation, n: u64, theta: f64) -> Result<f64> {
        self.check(obs, n)?;
        match (self, obs) {
            (Self::Normal { sigma }, Observation::SampleMean(y)) => {
                Ok(normal_ln_pdf(*y, theta, sigma / (n as f64).sqrt()))
            }
            (Self::Binomial, Observation::Successes(y)) => {
                if !(0.0..=1.0).contains(&theta) {
                    return Err(domain(format!("binomial theta must lie in [0,1], got {theta}")));
                }
                Ok(binomial_ln_pmf(*y, n, theta))
            }
            _ => unreachable!("checked above"),
        }
    }
}

/// Observed sufficient statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    SampleMean(f64),
    Successes(u64),
}

/// Prior (or posterior) distribution for θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorRepr", into = "PriorRepr")]
pub enum Prior {
    Normal { mean: f64, sd: f64 },
    Beta { a: f64, b: f64 },
    PointMass { location: f64 },
    Mixture(Mixture),
}

/// Finite mixture of non-mixture priors with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    components: Vec<Prior>,
    weights: Vec<f64>,
}

impl Mixture {
    pub fn components(&self) -> &[Prior] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Prior {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
            return Err(domain(format!("invalid normal prior N({mean}, {sd})")));
        }
        Ok(Self::Normal { mean, sd })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(domain(format!("invalid beta prior Beta({a}, {b})")));
        }
        Ok(Self::Beta { a, b })
    }

    pub fn point_mass(location: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(domain("point mass location must be finite"));
        }
        Ok(Self::PointMass { location })
    }

    /// Builds a mixture, flattening nested mixtures and dropping zero-weight
    /// components. A single surviving component is returned unwrapped.
    pub fn mixture(components: Vec<Prior>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(domain("mixture needs one weight per component and at least one component"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(domain(format!("mixture weights must lie in [0,1], got {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("mixture weights sum to {total}, not 1")));
        }
        let mut flat_c = Vec::new();
        let mut flat_w = Vec::new();
        for (c, w) in components.into_iter().zip(weights) {
            match c {
                Prior::Mixture(inner) => {
                    for (ic, iw) in inner.components.into_iter().zip(inner.weights) {
                        flat_c.push(ic);
                        flat_w.push(w * iw);
                    }
                }
                other => {
                    flat_c.push(other);
                    flat_w.push(w);
                }
            }
        }
        Ok(Self::from_flat(flat_c, flat_w))
    }

    fn from_flat(components: Vec<Prior>, weights: Vec<f64>) -> Self {
        let (mut comps, mut ws): (Vec<_>, Vec<_>) = components
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        if comps.len() == 1 {
            return comps.pop().expect("one component");
        }
        Self::Mixture(Mixture { components: comps, weights: ws })
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::Beta { .. } => "beta",
            Self::PointMass { .. } => "pointmass",
            Self::Mixture(_) => "mixture",
        }
    }

    fn check_compatible(&self, model: &EndpointModel) -> Result<()> {
        match (self, model) {
            (Self::Normal { .. }, EndpointModel::Normal { .. })
            | (Self::Beta { .. }, EndpointModel::Binomial)
            | (Self::PointMass { .. }, _) => Ok(()),
            (Self::Mixture(m), _) => m.components.iter().try_for_each(|c| c.check_compatible(model)),
            _ => Err(Error::Incompatible { prior: self.family(), model: model.name() }),
        }
    }

    /// Conjugate update given `obs` from `n` units.
    pub fn posterior(&self, model: &EndpointModel, obs: &Observation, n: u64) -> Result<Prior> {
        self.check_compatible(model)?;
        model.check(obs, n)?;
        self.posterior_unchecked(model, obs, n)
    }

    fn posterior_unchecked(&self, model: &EndpointModel, obs: &Observation, n: u64) -> Result<Prior> {
        Ok(match (self, model, obs) {
            (Self::Normal { mean, sd }, EndpointModel::Normal { sigma }, Observation::SampleMean(y)) => {
                let prior_prec = 1.0 / (sd * sd);
                let data_prec = n as f64 / (sigma * sigma);
                let prec = prior_prec + data_prec;
                Self::Normal {
                    mean: (mean * prior_prec + y * data_prec) / prec,
                    sd: prec.sqrt().recip(),
                }
            }
            (Self::Beta { a, b }, EndpointModel::Binomial, Observation::Successes(y)) => Self::Beta {
                a: a + *y as f64,
                b: b + (n - y) as f64,
            },
            (Self::PointMass { .. }, _, _) => self.clone(),
            (Self::Mixture(m), _, _) => {
                let log_w: Vec<f64> = m
                    .components
                    .iter()
                    .zip(&m.weights)
                    .map(|(c, w)| Ok(w.ln() + c.ln_marginal_unchecked(model, obs, n)?))
                    .collect::<Result<_>>()?;
                let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max == f64::NEG_INFINITY {
                    return Err(domain("observation has zero marginal likelihood under every component"));
                }
                let mut ws: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = ws.iter().sum();
                ws.iter_mut().for_each(|w| *w /= total);
                let comps = m
                    .components
                    .iter()
                    .map(|c| c.posterior_unchecked(model, obs, n))
                    .collect::<Result<Vec<_>>>()?;
                Self::from_flat(comps, ws)
            }
            _ => return Err(Error::Incompatible { prior: self.family(), model: model.name() }),
        })
    }

    /// Prior predictive density (normal) or pmf (binomial) of `obs`.
    pub fn marginal_likelihood(&self, model: &EndpointModel, obs: &Observation, n: u64) -> Result<f64> {
        Ok(self.ln_marginal_likelihood(model, obs, n)?.exp())
    }

    pub fn ln_marginal_likelihood(&self, model: &EndpointModel, obs: &Observation, n: u64) -> Result<f64> {
        self.check_compatible(model)?;
        model.check(obs, n)?;
        self.ln_marginal_unchecked(model, obs, n)
    }

    fn ln_marginal_unchecked(&self, model: &EndpointModel, obs: &Observation, n: u64) -> Result<f64> {
        Ok(match (self, model, obs) {
            (Self::Normal { mean, sd }, EndpointModel::Normal { sigma }, Observation::SampleMean(y)) => {
                let scale = (sd * sd + sigma * sigma / n as f64).sqrt();
                normal_ln_pdf(*y, *mean, scale)
            }
            (Self::Beta { a, b }, EndpointModel::Binomial, Observation::Successes(y)) => {
                let y = *y;
                ln_choose(n, y) + ln_beta(a + y as f64, b + (n - y) as f64) - ln_beta(*a, *b)
            }
            (Self::PointMass { location }, _, _) => model.ln_likelihood(obs, n, *location)?,
            (Self::Mixture(m), _, _) => {
                let terms: Vec<f64> = m
                    .components
                    .iter()
                    .zip(&m.weights)
                    .map(|(c, w)| Ok(w.ln() + c.ln_marginal_unchecked(model, obs, n)?))
                    .collect::<Result<_>>()?;
                log_sum_exp(&terms)
            }
            _ => return Err(Error::Incompatible { prior: self.family(), model: model.name() }),
        })
    }

    /// `P(θ > θ0)` under this distribution.
    pub fn prob_gt(&self, theta0: f64) -> f64 {
        match self {
            Self::Normal { mean, sd } => std_normal_sf((theta0 - mean) / sd),
            Self::Beta { a, b } => {
                if theta0 < 0.0 {
                    1.0
                } else if theta0 >= 1.0 {
                    0.0
                } else {
                    beta_sf(theta0, *a, *b).expect("validated beta parameters")
                }
            }
            Self::PointMass { location } => f64::from(u8::from(*location > theta0)),
            Self::Mixture(m) => m
                .components
                .iter()
                .zip(&m.weights)
                .map(|(c, w)| w * c.prob_gt(theta0))
                .sum(),
        }
    }

    /// `P(θ <= θ0)` under this distribution, evaluated directly rather than as `1 - prob_gt`.
    pub fn prob_le(&self, theta0: f64) -> f64 {
        match self {
            Self::Normal { mean, sd } => std_normal_cdf((theta0 - mean) / sd),
            Self::Beta { a, b } => {
                if theta0 < 0.0 {
                    0.0
                } else if theta0 >= 1.0 {
                    1.0
                } else {
                    beta_cdf(theta0, *a, *b).expect("validated beta parameters")
                }
            }
            Self::PointMass { location } => f64::from(u8::from(*location <= theta0)),
            Self::Mixture(m) => m
                .components
                .iter()
                .zip(&m.weights)
                .map(|(c, w)| w * c.prob_le(theta0))
                .sum(),
        }
    }

    /// Posterior probability of the alternative, `P(θ > θ0 | obs)`.
    pub fn posterior_prob_gt(&self, model: &EndpointModel, obs: &Observation, n: u64, theta0: f64) -> Result<f64> {
        Ok(self.posterior(model, obs, n)?.prob_gt(theta0))
    }

    /// Posterior probability of the null, `P(θ <= θ0 | obs)`.
    pub fn posterior_prob_le(&self, model: &EndpointModel, obs: &Observation, n: u64, theta0: f64) -> Result<f64> {
        Ok(self.posterior(model, obs, n)?.prob_le(theta0))
    }

    /// Lebesgue density; `None` if the distribution has an atom.
    pub fn density(&self, theta: f64) -> Option<f64> {
        match self {
            Self::Normal { mean, sd } => Some(normal_ln_pdf(theta, *mean, *sd).exp()),
            Self::Beta { a, b } => {
                if !(0.0..=1.0).contains(&theta) {
                    return Some(0.0);
                }
                let ln = (a - 1.0) * theta.ln() + (b - 1.0) * (-theta).ln_1p() - ln_beta(*a, *b);
                Some(ln.exp())
            }
            Self::PointMass { .. } => None,
            Self::Mixture(m) => m
                .components
                .iter()
                .zip(&m.weights)
                .map(|(c, w)| c.density(theta).map(|d| w * d))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Normal { mean, .. } => *mean,
            Self::Beta { a, b } => a / (a + b),
            Self::PointMass { location } => *location,
            Self::Mixture(m) => m.components.iter().zip(&m.weights).map(|(c, w)| w * c.mean()).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Normal { sd, .. } => sd * sd,
            Self::Beta { a, b } => a * b / ((a + b) * (a + b) * (a + b + 1.0)),
            Self::PointMass { .. } => 0.0,
            Self::Mixture(m) => {
                let mu = self.mean();
                m.components
                    .iter()
                    .zip(&m.weights)
                    .map(|(c, w)| w * (c.variance() + (c.mean() - mu).powi(2)))
                    .sum()
            }
        }
    }
}

fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum PriorRepr {
    Normal { mean: f64, sd: f64 },
    Beta { a: f64, b: f64 },
    Pointmass { location: f64 },
    Mixture { components: Vec<PriorRepr>, weights: Vec<f64> },
}

impl TryFrom<PriorRepr> for Prior {
    type Error = Error;

    fn try_from(r: PriorRepr) -> Result<Self> {
        match r {
            PriorRepr::Normal { mean, sd } => Prior::normal(mean, sd),
            PriorRepr::Beta { a, b } => Prior::beta(a, b),
            PriorRepr::Pointmass { location } => Prior::point_mass(location),
            PriorRepr::Mixture { components, weights } => {
                let comps = components.into_iter().map(Prior::try_from).collect::<Result<Vec<_>>>()?;
                Prior::mixture(comps, weights)
            }
        }
    }
}

impl From<Prior> for PriorRepr {
    fn from(p: Prior) -> Self {
        match p {
            Prior::Normal { mean, sd } => PriorRepr::Normal { mean, sd },
            Prior::Beta { a, b } => PriorRepr::Beta { a, b },
            Prior::PointMass { location } => PriorRepr::Pointmass { location },
            Prior::Mixture(m) => PriorRepr::Mixture {
                components: m.components.into_iter().map(PriorRepr::from).collect(),
                weights: m.weights,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::std_normal_quantile;
    use proptest::prelude::*;

    const NORMAL: EndpointModel = EndpointModel::Normal { sigma: 1.0 };

    fn informative() -> Prior {
        Prior::normal(0.25, 1.0 / 50f64.sqrt()).unwrap()
    }

    #[test]
    fn vague_normal_posterior() {
        let p = Prior::normal(0.0, 1e6).unwrap();
        let post = p.posterior(&NORMAL, &Observation::SampleMean(0.3), 100).unwrap();
        match post {
            Prior::Normal { mean, sd } => {
                assert!((mean - 0.3).abs() < 1e-9);
                assert!((sd - 0.1).abs() < 1e-9);
            }
            other => panic!("unexpected posterior {other:?}"),
        }
    }

    #[test]
    fn beta_conjugate_counting() {
        let post = Prior::beta(21.0, 21.0)
            .unwrap()
            .posterior(&EndpointModel::Binomial, &Observation::Successes(12), 20)
            .unwrap();
        assert_eq!(post, Prior::Beta { a: 33.0, b: 29.0 });
    }

    #[test]
    fn mixture_posterior_weights_match_closed_form_marginals() {
        let inf = informative();
        let robust = Prior::normal(0.25, 1.0).unwrap();
        let mix = Prior::mixture(vec![inf.clone(), robust.clone()], vec![0.5, 0.5]).unwrap();
        let obs = Observation::SampleMean(0.25);
        // Gaussian marginals of ȳ: N(0.25, sqrt(0.02 + 0.01)) and N(0.25, sqrt(1 + 0.01)).
        let m1 = 1.0 / ((0.03f64).sqrt() * (2.0 * std::f64::consts::PI).sqrt());
        let m2 = 1.0 / ((1.01f64).sqrt() * (2.0 * std::f64::consts::PI).sqrt());
        let expected = m1 / (m1 + m2);
        match mix.posterior(&NORMAL, &obs, 100).unwrap() {
            Prior::Mixture(m) => {
                assert!((m.weights()[0] - expected).abs() < 1e-12);
                assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected posterior {other:?}"),
        }
    }

    #[test]
    fn marginal_likelihood_examples() {
        let pm = Prior::point_mass(0.0).unwrap();
        let m = pm.marginal_likelihood(&NORMAL, &Observation::SampleMean(0.0), 100).unwrap();
        assert!((m - 1.0 / (0.1 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-12);
        assert!((m - 3.98942).abs() < 1e-5);

        let unif = Prior::beta(1.0, 1.0).unwrap();
        let m = unif.marginal_likelihood(&EndpointModel::Binomial, &Observation::Successes(0), 1).unwrap();
        assert!((m - 0.5).abs() < 1e-14);

        let m = informative().marginal_likelihood(&NORMAL, &Observation::SampleMean(0.25), 100).unwrap();
        let expected = 1.0 / ((0.03f64).sqrt() * (2.0 * std::f64::consts::PI).sqrt());
        assert!((m - expected).abs() < 1e-12);
    }

    #[test]
    fn posterior_tail_examples() {
        let pm = Prior::point_mass(0.0).unwrap();
        assert_eq!(pm.posterior_prob_gt(&NORMAL, &Observation::SampleMean(3.0), 10, 0.0).unwrap(), 0.0);

        let got = informative().posterior_prob_gt(&NORMAL, &Observation::SampleMean(0.25), 100, 0.0).unwrap();
        assert!((got - std_normal_cdf(0.25 * 150f64.sqrt())).abs() < 1e-14);

        let pm0 = Prior::beta(0.001, 1.0).unwrap();
        let got = pm0
            .posterior_prob_gt(&EndpointModel::Binomial, &Observation::Successes(10), 20, 0.3)
            .unwrap();
        let expected = 1.0 - beta_cdf(0.3, 10.001, 11.0).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn incompatible_pairs_are_type_errors() {
        let b = Prior::beta(2.0, 2.0).unwrap();
        assert!(matches!(
            b.posterior(&NORMAL, &Observation::SampleMean(0.0), 5),
            Err(Error::Incompatible { .. })
        ));
        let n = informative();
        assert!(matches!(
            n.marginal_likelihood(&EndpointModel::Binomial, &Observation::Successes(1), 5),
            Err(Error::Incompatible { .. })
        ));
        assert!(b.posterior(&EndpointModel::Binomial, &Observation::Successes(6), 5).is_err());
    }

    #[test]
    fn mixtures_flatten_and_drop_empty_components() {
        let inner = Prior::mixture(vec![informative(), Prior::normal(0.0, 1.0).unwrap()], vec![0.25, 0.75]).unwrap();
        let outer = Prior::mixture(vec![inner, Prior::point_mass(0.0).unwrap()], vec![0.5, 0.5]).unwrap();
        let Prior::Mixture(m) = &outer else { panic!("expected mixture") };
        assert_eq!(m.components().len(), 3);
        assert!(m.components().iter().all(|c| !matches!(c, Prior::Mixture(_))));
        assert!((m.weights()[0] - 0.125).abs() < 1e-15);

        let single = Prior::mixture(vec![informative(), Prior::point_mass(0.0).unwrap()], vec![1.0, 0.0]).unwrap();
        assert_eq!(single, informative());
        assert!(Prior::mixture(vec![informative()], vec![0.9]).is_err());
    }

    #[test]
    fn vague_component_does_not_underflow() {
        // A tiny marginal under the vague component must give a finite, tiny weight.
        let mix = Prior::mixture(
            vec![Prior::normal(0.25, 100.0).unwrap(), informative()],
            vec![0.5, 0.5],
        )
        .unwrap();
        let post = mix.posterior(&NORMAL, &Observation::SampleMean(0.25), 250).unwrap();
        let Prior::Mixture(m) = post else { panic!("expected mixture") };
        assert!(m.weights()[0] > 0.0 && m.weights()[0] < 0.01);
    }

    #[test]
    fn serde_schema_round_trip_and_rejects_unknown_keys() {
        let json = r#"{"type":"mixture","components":[{"type":"normal","mean":0.25,"sd":1.0},{"type":"pointmass","location":0.0}],"weights":[0.5,0.5]}"#;
        let p: Prior = serde_json::from_str(json).unwrap();
        let back: Prior = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(p, back);
        assert!(serde_json::from_str::<Prior>(r#"{"type":"beta","a":1,"b":1,"c":2}"#).is_err());
        assert!(serde_json::from_str::<Prior>(r#"{"type":"normal","mean":0,"sd":-1}"#).is_err());
    }

    /// Brute-force grid posterior: prior density × likelihood on `points` nodes, normalized.
    fn grid_posterior(prior: &Prior, model: &EndpointModel, obs: &Observation, n: u64, lo: f64, hi: f64, points: usize) -> Vec<f64> {
        let h = (hi - lo) / points as f64;
        let mut w: Vec<f64> = (0..points)
            .map(|i| {
                let t = lo + (i as f64 + 0.5) * h;
                prior.density(t).unwrap() * model.ln_likelihood(obs, n, t).unwrap().exp()
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    fn discretize(dist: &Prior, lo: f64, hi: f64, points: usize) -> Vec<f64> {
        let h = (hi - lo) / points as f64;
        let mut w: Vec<f64> = (0..points).map(|i| dist.density(lo + (i as f64 + 0.5) * h).unwrap()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    fn total_variation(p: &[f64], q: &[f64]) -> f64 {
        0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    #[test]
    fn mixture_posterior_matches_grid_brute_force_normal() {
        let mix = Prior::mixture(vec![Prior::normal(0.25, 1.0).unwrap(), informative()], vec![0.4, 0.6]).unwrap();
        for (ybar, n) in [(0.25, 20u64), (-0.1, 100), (0.6, 50)] {
            let obs = Observation::SampleMean(ybar);
            let post = mix.posterior(&NORMAL, &obs, n).unwrap();
            let grid = grid_posterior(&mix, &NORMAL, &obs, n, -2.0, 2.5, 10_000);
            let analytic = discretize(&post, -2.0, 2.5, 10_000);
            assert!(total_variation(&grid, &analytic) < 1e-4);
        }
    }

    #[test]
    fn mixture_posterior_matches_grid_brute_force_binomial() {
        let model = EndpointModel::Binomial;
        let mix = Prior::mixture(vec![Prior::beta(1.0, 1.0).unwrap(), Prior::beta(21.0, 21.0).unwrap()], vec![0.5, 0.5]).unwrap();
        for (y, n) in [(3u64, 20u64), (10, 20), (40, 100)] {
            let obs = Observation::Successes(y);
            let post = mix.posterior(&model, &obs, n).unwrap();
            let grid = grid_posterior(&mix, &model, &obs, n, 0.0, 1.0, 10_000);
            let analytic = discretize(&post, 0.0, 1.0, 10_000);
            assert!(total_variation(&grid, &analytic) < 1e-4);
        }
    }

    #[test]
    fn vague_prior_tracks_the_p_value() {
        let vague = Prior::normal(0.0, 100.0).unwrap();
        for n in [10u64, 25, 60, 100, 180, 250] {
            for i in 0..=40 {
                let ybar = -1.0 + i as f64 * 0.05;
                let post = vague.posterior_prob_gt(&NORMAL, &Observation::SampleMean(ybar), n, 0.0).unwrap();
                let p_alt = 1.0 - std_normal_cdf((n as f64).sqrt() * (0.0 - ybar));
                assert!((post - p_alt).abs() <= 1e-3, "n={n}, ybar={ybar}");
            }
        }
        // sanity: the frequentist critical mean at level 0.025 is z/√n
        let z = std_normal_quantile(0.975).unwrap();
        let p = vague.posterior_prob_le(&NORMAL, &Observation::SampleMean(z / 10.0), 100, 0.0).unwrap();
        assert!((p - 0.025).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn normal_posterior_tail_is_monotone_in_ybar(y in -1.0..1.0f64, dy in 0.0..0.2f64, n in 1u64..250, w in 0.0..1.0f64) {
            let mix = Prior::mixture(vec![Prior::normal(0.25, 1.0).unwrap(), informative()], vec![1.0 - w, w]).unwrap();
            let a = mix.posterior_prob_gt(&NORMAL, &Observation::SampleMean(y), n, 0.0).unwrap();
            let b = mix.posterior_prob_gt(&NORMAL, &Observation::SampleMean(y + dy), n, 0.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-12);
        }

        #[test]
        fn binomial_posterior_tail_is_monotone_in_y(n in 1u64..120, frac in 0.0..1.0f64, w in 0.0..1.0f64) {
            let model = EndpointModel::Binomial;
            let mix = Prior::mixture(vec![Prior::beta(0.001, 1.0).unwrap(), Prior::beta(21.0, 21.0).unwrap()], vec![1.0 - w, w]).unwrap();
            let y = ((n as f64) * frac).floor() as u64;
            let y = y.min(n - 1);
            let a = mix.posterior_prob_gt(&model, &Observation::Successes(y), n, 0.3).unwrap();
            let b = mix.posterior_prob_gt(&model, &Observation::Successes(y + 1), n, 0.3).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-12);
        }

        #[test]
        fn mixture_posterior_weights_sum_to_one(y in -2.0..2.0f64, n in 1u64..250, w in 0.01..0.99f64) {
            let mix = Prior::mixture(vec![Prior::normal(0.25, 100.0).unwrap(), informative(), Prior::point_mass(0.0).unwrap()], vec![(1.0 - w) / 2.0, w, (1.0 - w) / 2.0]).unwrap();
            if let Prior::Mixture(m) = mix.posterior(&NORMAL, &Observation::SampleMean(y), n).unwrap() {
                prop_assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
