//! Frequentist operating characteristics of a decision rule.
//!
//! [`PowerFunction`] resolves a rule's rejection region once and then answers
//! every power query from it. Integrals against a sampling prior `π^s` use
//! Gauss–Legendre quadrature, with normal supports truncated at ±8 sampling
//! standard deviations.
//!
//! For the normal endpoint the power of a rule rejecting on `ȳ > c` is
//! `1 - Φ(√n (c - θ)/σ)`; for the binomial endpoint it is the pmf mass of the
//! rejected counts.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::decisions::{DecisionRule, Hypothesis, RejectionRegion, RuleContext, RuleKind, RuleSpec};
use crate::distributions::{EndpointModel, Observation, Prior};
use crate::error::{domain, Error, Result};
use crate::numerics::{integrate, GridSpec, QuadratureSpec, DEFAULT_NODES};

/// Half-width, in sampling standard deviations, of the normal quadrature range.
const SAMPLING_SPAN: f64 = 8.0;
/// Half-width, in standard errors, of the normal type I error search.
const TYPE_ONE_SPAN: f64 = 6.0;
/// Points in the type I error search grid for data-dependent rules.
const TYPE_ONE_POINTS: usize = 101;

/// Distribution `π^s` of the true parameter used to average power and risk.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPrior {
    prior: Prior,
}

impl SamplingPrior {
    pub fn new(prior: Prior) -> Result<Self> {
        match prior {
            Prior::Normal { .. } | Prior::Beta { .. } | Prior::PointMass { .. } => Ok(Self { prior }),
            Prior::Mixture(_) => Err(domain("sampling prior must be normal, beta or a point mass")),
        }
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    /// Truncated support used for quadrature.
    fn range(&self) -> (f64, f64) {
        match self.prior {
            Prior::Normal { mean, sd } => (mean - SAMPLING_SPAN * sd, mean + SAMPLING_SPAN * sd),
            Prior::Beta { .. } => (0.0, 1.0),
            Prior::PointMass { location } => (location, location),
            Prior::Mixture(_) => unreachable!("rejected at construction"),
        }
    }

    fn check_model(&self, model: &EndpointModel) -> Result<()> {
        match (&self.prior, model) {
            (Prior::Beta { .. }, EndpointModel::Normal { .. }) | (Prior::Normal { .. }, EndpointModel::Binomial) => {
                Err(Error::Incompatible { prior: self.prior.family(), model: model.name() })
            }
            (Prior::PointMass { location }, EndpointModel::Binomial) if !(0.0..=1.0).contains(location) => {
                Err(domain(format!("binomial sampling point {location} lies outside [0,1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Numerical settings shared by all operating-characteristic integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcOptions {
    pub nodes: usize,
    pub grid: GridSpec,
}

impl Default for OcOptions {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, grid: GridSpec::default() }
    }
}

/// Power function `β(θ)` of one rule at one sample size.
#[derive(Debug, Clone)]
pub struct PowerFunction {
    region: RejectionRegion,
    model: EndpointModel,
    hypothesis: Hypothesis,
    n: u64,
    adaptive: bool,
    options: OcOptions,
}

impl PowerFunction {
    /// Power function accurate around `θ0`.
    pub fn new(rule: &DecisionRule) -> Result<Self> {
        Self::build(rule, &[], OcOptions::default())
    }

    /// Power function accurate around `θ0` and over the support of each sampling prior.
    pub fn for_sampling(rule: &DecisionRule, sampling: &[&SamplingPrior], options: OcOptions) -> Result<Self> {
        Self::build(rule, sampling, options)
    }

    fn build(rule: &DecisionRule, sampling: &[&SamplingPrior], options: OcOptions) -> Result<Self> {
        let theta0 = rule.hypothesis().theta0();
        let (mut lo, mut hi) = (theta0, theta0);
        if let Some(se) = rule.model().standard_error(rule.n()) {
            lo -= TYPE_ONE_SPAN * se;
            hi += TYPE_ONE_SPAN * se;
        }
        for s in sampling {
            s.check_model(rule.model())?;
            let (a, b) = s.range();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok(Self {
            region: rule.rejection_region_over(lo, hi, options.grid)?,
            model: *rule.model(),
            hypothesis: *rule.hypothesis(),
            n: rule.n(),
            adaptive: rule.is_adaptive(),
            options,
        })
    }

    pub fn region(&self) -> &RejectionRegion {
        &self.region
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn power(&self, theta: f64) -> Result<f64> {
        match self.model {
            EndpointModel::Binomial if !(0.0..=1.0).contains(&theta) => {
                Err(domain(format!("binomial parameter {theta} lies outside [0,1]")))
            }
            _ if !theta.is_finite() => Err(domain("parameter must be finite")),
            _ => Ok(self.region.power(theta)),
        }
    }

    /// Points `(θ, β(θ))` on `count` equally spaced values over `[lo, hi]`.
    pub fn curve(&self, lo: f64, hi: f64, count: usize) -> Result<Vec<(f64, f64)>> {
        if count < 2 {
            return Err(domain("a power curve needs at least two points"));
        }
        (0..count)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                Ok((t, self.power(t)?))
            })
            .collect()
    }

    /// Grid over which the type I error is maximised for data-dependent rules.
    fn null_grid(&self) -> Vec<f64> {
        let theta0 = self.hypothesis.theta0();
        let lower = match self.model.standard_error(self.n) {
            Some(se) => theta0 - TYPE_ONE_SPAN * se,
            None => 0.0,
        };
        let last = (TYPE_ONE_POINTS - 1) as f64;
        (0..TYPE_ONE_POINTS).map(|i| lower + (theta0 - lower) * i as f64 / last).collect()
    }

    /// `β(θ0)` for rules with monotone power; the maximum over a null grid for CD-Adapt.
    pub fn type_one_error(&self) -> Result<f64> {
        if !self.adaptive {
            return self.power(self.hypothesis.theta0());
        }
        self.null_grid().into_iter().try_fold(0.0f64, |m, t| Ok(m.max(self.power(t)?)))
    }

    /// `∫ g(θ) π^s(θ) dθ` over `[a, b]` clipped to the sampling support.
    fn against(&self, sampling: &SamplingPrior, a: f64, b: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        let (lo, hi) = sampling.range();
        let (a, b) = (a.max(lo), b.min(hi));
        if !(b > a) {
            return Ok(0.0);
        }
        let prior = sampling.prior();
        let spec = QuadratureSpec::new(self.options.nodes, a, b)?;
        integrate(|t| g(t) * prior.density(t).unwrap_or(0.0), &spec)
    }

    /// Power averaged over `π^s` truncated to `θ > θ0`.
    pub fn expected_power(&self, sampling: &SamplingPrior) -> Result<f64> {
        sampling.check_model(&self.model)?;
        let theta0 = self.hypothesis.theta0();
        if let Prior::PointMass { location } = sampling.prior() {
            if *location <= theta0 {
                return Err(domain("sampling point mass lies in the null region"));
            }
            return self.power(*location);
        }
        let mass = sampling.prior().prob_gt(theta0);
        let (_, hi) = sampling.range();
        if !(mass > 0.0) || theta0 >= hi {
            return Err(domain("sampling prior puts no mass above theta0"));
        }
        let num = self.against(sampling, theta0, f64::INFINITY, |t| self.region.power(t))?;
        Ok((num / mass).clamp(0.0, 1.0))
    }

    /// `I(θ <= θ0) β(θ) + κ I(θ > θ0) (1 - β(θ))`.
    pub fn frequentist_risk(&self, theta: f64) -> Result<f64> {
        let b = self.power(theta)?;
        Ok(if theta <= self.hypothesis.theta0() { b } else { self.hypothesis.kappa() * (1.0 - b) })
    }

    /// Bayes risk of the rule under `π^s`.
    pub fn integrated_risk(&self, sampling: &SamplingPrior) -> Result<f64> {
        sampling.check_model(&self.model)?;
        if let Prior::PointMass { location } = sampling.prior() {
            return self.frequentist_risk(*location);
        }
        let theta0 = self.hypothesis.theta0();
        let kappa = self.hypothesis.kappa();
        let null = self.against(sampling, f64::NEG_INFINITY, theta0, |t| self.region.power(t))?;
        let alt = self.against(sampling, theta0, f64::INFINITY, |t| 1.0 - self.region.power(t))?;
        Ok((null + kappa * alt).max(0.0))
    }
}

pub fn power(rule: &DecisionRule, theta: f64) -> Result<f64> {
    let sampling = match rule.model() {
        EndpointModel::Normal { .. } => Some(SamplingPrior::new(Prior::point_mass(theta)?)?),
        EndpointModel::Binomial => None,
    };
    PowerFunction::for_sampling(rule, &sampling.iter().collect::<Vec<_>>(), OcOptions::default())?.power(theta)
}

pub fn type_one_error(rule: &DecisionRule) -> Result<f64> {
    PowerFunction::new(rule)?.type_one_error()
}

pub fn expected_power(rule: &DecisionRule, sampling: &SamplingPrior) -> Result<f64> {
    PowerFunction::for_sampling(rule, &[sampling], OcOptions::default())?.expected_power(sampling)
}

pub fn integrated_risk(rule: &DecisionRule, sampling: &SamplingPrior) -> Result<f64> {
    PowerFunction::for_sampling(rule, &[sampling], OcOptions::default())?.integrated_risk(sampling)
}

pub fn frequentist_risk(rule: &DecisionRule, theta: f64) -> Result<f64> {
    let sampling = SamplingPrior::new(Prior::point_mass(theta)?)?;
    PowerFunction::for_sampling(rule, &[&sampling], OcOptions::default())?.frequentist_risk(theta)
}

/// `(r - r_BD) / (r_FD - r_BD)`, not clamped.
pub fn rsl_from_risks(risk: f64, risk_fd: f64, risk_bd: f64) -> Result<f64> {
    let den = risk_fd - risk_bd;
    if !(den.abs() > f64::EPSILON * risk_fd.abs().max(risk_bd.abs())) {
        return Err(Error::Degenerate(format!(
            "FD and BD have the same integrated risk ({risk_fd}), relative saving loss is undefined"
        )));
    }
    Ok((risk - risk_bd) / den)
}

/// Integrated risks of FD and BD under the informative prior at sample size `n`.
pub fn reference_risks(ctx: &RuleContext, n: u64, options: OcOptions) -> Result<(f64, f64)> {
    let sampling = SamplingPrior::new(ctx.informative.clone())?;
    let risk = |kind: RuleKind| -> Result<f64> {
        let rule = ctx.instantiate(&RuleSpec::new(kind), n)?;
        PowerFunction::for_sampling(&rule, &[&sampling], options)?.integrated_risk(&sampling)
    };
    Ok((risk(RuleKind::Fd)?, risk(RuleKind::Bd { prior: None })?))
}

/// Relative saving loss of `rule` with every risk taken under `π^s = π`.
pub fn rsl(rule: &DecisionRule, ctx: &RuleContext) -> Result<f64> {
    let sampling = SamplingPrior::new(ctx.informative.clone())?;
    let options = OcOptions::default();
    let risk = PowerFunction::for_sampling(rule, &[&sampling], options)?.integrated_risk(&sampling)?;
    let (fd, bd) = reference_risks(ctx, rule.n(), options)?;
    rsl_from_risks(risk, fd, bd)
}

/// Operating characteristics of one rule at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct OcReport {
    pub rule: String,
    pub n: u64,
    pub type_one_error: f64,
    pub expected_power: f64,
    pub integrated_risk: f64,
    /// `None` when FD and BD have equal risk.
    pub rsl: Option<f64>,
    pub power_curve: Vec<(f64, f64)>,
}

/// Full report: type I error, expected power and integrated risk under
/// `sampling`, RSL under the informative prior, and a power curve of
/// `curve_points` values across the sampling support.
pub fn evaluate(rule: &DecisionRule, ctx: &RuleContext, sampling: &SamplingPrior, curve_points: usize) -> Result<OcReport> {
    let options = OcOptions::default();
    let informative = SamplingPrior::new(ctx.informative.clone())?;
    let pf = PowerFunction::for_sampling(rule, &[sampling, &informative], options)?;
    let rsl = {
        let (fd, bd) = reference_risks(ctx, rule.n(), options)?;
        match rsl_from_risks(pf.integrated_risk(&informative)?, fd, bd) {
            Ok(v) => Some(v),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        }
    };
    let theta0 = rule.hypothesis().theta0();
    let (lo, hi) = match (rule.model(), sampling.range()) {
        (EndpointModel::Binomial, _) => (0.0, 1.0),
        (_, (a, b)) if a < b => (a.min(theta0), b.max(theta0)),
        (m, _) => {
            let se = m.standard_error(rule.n()).unwrap_or(1.0);
            (theta0 - TYPE_ONE_SPAN * se, theta0 + TYPE_ONE_SPAN * se)
        }
    };
    Ok(OcReport {
        rule: rule.label().to_string(),
        n: rule.n(),
        type_one_error: pf.type_one_error()?,
        expected_power: pf.expected_power(sampling)?,
        integrated_risk: pf.integrated_risk(sampling)?,
        rsl,
        power_curve: if curve_points >= 2 { pf.curve(lo, hi, curve_points)? } else { Vec::new() },
    })
}

/// Simulated rejection rate at `theta` and its binomial standard error.
pub fn monte_carlo_power<R: Rng + ?Sized>(rule: &DecisionRule, theta: f64, reps: u64, rng: &mut R) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(domain("need at least one replicate"));
    }
    let n = rule.n();
    let mut hits = 0u64;
    match rule.model() {
        EndpointModel::Normal { sigma } => {
            let dist = Normal::new(theta, sigma / (n as f64).sqrt()).map_err(|e| domain(e.to_string()))?;
            for _ in 0..reps {
                hits += rule.rejects(&Observation::SampleMean(dist.sample(rng)))? as u64;
            }
        }
        EndpointModel::Binomial => {
            let dist = Binomial::new(n, theta).map_err(|e| domain(e.to_string()))?;
            // Decisions are cached per count; the rule is a function of y only.
            let table: Vec<bool> = (0..=n).map(|y| rule.rejects(&Observation::Successes(y))).collect::<Result<_>>()?;
            for _ in 0..reps {
                hits += table[dist.sample(rng) as usize] as u64;
            }
        }
    }
    let p = hits as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{BigInt, BigRational, One, ToPrimitive, Zero};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{Beta as BetaOracle, ContinuousCDF};

    fn normal_ctx() -> RuleContext {
        RuleContext {
            model: EndpointModel::Normal { sigma: 1.0 },
            hypothesis: Hypothesis::from_tau(0.0, 0.025).unwrap(),
            informative: Prior::normal(0.25, 1.0 / 50f64.sqrt()).unwrap(),
            vague: Prior::normal(0.0, 100.0).unwrap(),
        }
    }

    fn binomial_ctx() -> RuleContext {
        RuleContext {
            model: EndpointModel::Binomial,
            hypothesis: Hypothesis::from_tau(0.3, 0.025).unwrap(),
            informative: Prior::beta(21.0, 21.0).unwrap(),
            vague: Prior::beta(0.001, 1.0).unwrap(),
        }
    }

    fn rule(ctx: &RuleContext, kind: RuleKind, n: u64) -> DecisionRule {
        ctx.instantiate(&RuleSpec::new(kind), n).unwrap()
    }

    fn informative(ctx: &RuleContext) -> SamplingPrior {
        SamplingPrior::new(ctx.informative.clone()).unwrap()
    }

    /// A rule whose analysis prior is so concentrated that it always or never rejects.
    fn constant_rule(always: bool) -> DecisionRule {
        let mut ctx = normal_ctx();
        ctx.informative = Prior::normal(if always { 50.0 } else { -50.0 }, 1e-3).unwrap();
        rule(&ctx, RuleKind::Bd { prior: None }, 10)
    }

    #[test]
    fn fd_level_is_tau() {
        let fd = rule(&normal_ctx(), RuleKind::Fd, 100);
        assert!((type_one_error(&fd).unwrap() - 0.025).abs() < 1e-3);
        assert!((power(&fd, 0.0).unwrap() - 0.025).abs() < 1e-3);
    }

    #[test]
    fn ti_rbd_without_borrowing_has_no_power() {
        let r = rule(&normal_ctx(), RuleKind::TiRbd { w: 0.0 }, 50);
        for t in [-1.0, 0.0, 0.3, 2.0] {
            assert_eq!(power(&r, t).unwrap(), 0.0);
        }
        let r = rule(&binomial_ctx(), RuleKind::TiRbd { w: 0.0 }, 50);
        assert_eq!(expected_power(&r, &informative(&binomial_ctx())).unwrap(), 0.0);
    }

    #[test]
    fn binomial_cd_adapt_power_is_enumerated() {
        let ctx = binomial_ctx();
        let r = rule(&ctx, RuleKind::CdAdapt { tau_bound: 0.15 }, 20);
        let expected: f64 = (0..=20u64)
            .filter(|&y| r.rejects(&Observation::Successes(y)).unwrap())
            .map(|y| statrs::distribution::Discrete::pmf(&statrs::distribution::Binomial::new(0.3, 20).unwrap(), y))
            .sum();
        assert!((power(&r, 0.3).unwrap() - expected).abs() < 1e-12);
        assert!(power(&r, 1.5).is_err());
    }

    #[test]
    fn cd_level_is_affine_in_w() {
        let ctx = normal_ctx();
        let tp = crate::decisions::tau_pi(&ctx.informative, &ctx.model, 100, &ctx.hypothesis).unwrap();
        for i in 0..=20 {
            let w = i as f64 / 20.0;
            let got = type_one_error(&rule(&ctx, RuleKind::Cd { w }, 100)).unwrap();
            assert!((got - ((1.0 - w) * 0.025 + w * tp)).abs() < 1e-3, "w = {w}");
        }
    }

    #[test]
    fn binomial_bd_with_one_patient_has_level_one() {
        let r = rule(&binomial_ctx(), RuleKind::Bd { prior: None }, 1);
        assert_eq!(type_one_error(&r).unwrap(), 1.0);
    }

    #[test]
    fn cd_adapt_level_respects_bound() {
        for ctx in [normal_ctx(), binomial_ctx()] {
            for n in [20, 60, 100] {
                let r = rule(&ctx, RuleKind::CdAdapt { tau_bound: 0.15 }, n);
                assert!(type_one_error(&r).unwrap() <= 0.15 + 1e-12);
            }
        }
    }

    #[test]
    fn expected_power_of_constant_rules() {
        let s = SamplingPrior::new(Prior::normal(0.25, 0.2).unwrap()).unwrap();
        assert!((expected_power(&constant_rule(true), &s).unwrap() - 1.0).abs() < 1e-9);
        assert!(expected_power(&constant_rule(false), &s).unwrap() < 1e-12);
    }

    #[test]
    fn sample_sizes_reach_target_power() {
        let ctx = normal_ctx();
        let s = informative(&ctx);
        let fd = expected_power(&rule(&ctx, RuleKind::Fd, 214), &s).unwrap();
        let bd = expected_power(&rule(&ctx, RuleKind::Bd { prior: None }, 91), &s).unwrap();
        assert!(fd >= 0.8, "{fd}");
        assert!(bd >= 0.8, "{bd}");
    }

    #[test]
    fn expected_power_needs_alternative_mass() {
        let r = rule(&normal_ctx(), RuleKind::Fd, 50);
        let below = SamplingPrior::new(Prior::normal(-5.0, 0.1).unwrap()).unwrap();
        assert!(expected_power(&r, &below).is_err());
        let point = SamplingPrior::new(Prior::point_mass(-0.1).unwrap()).unwrap();
        assert!(expected_power(&r, &point).is_err());
        let point = SamplingPrior::new(Prior::point_mass(0.3).unwrap()).unwrap();
        assert!((expected_power(&r, &point).unwrap() - power(&r, 0.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn integrated_risk_of_never_rejecting() {
        let never = constant_rule(false);
        let kappa = never.hypothesis().kappa();
        let above = SamplingPrior::new(Prior::normal(5.0, 0.1).unwrap()).unwrap();
        let below = SamplingPrior::new(Prior::normal(-5.0, 0.1).unwrap()).unwrap();
        assert!((integrated_risk(&never, &above).unwrap() - kappa).abs() < 1e-9);
        assert!(integrated_risk(&never, &below).unwrap() < 1e-12);
    }

    #[test]
    fn bd_minimises_integrated_risk_under_its_prior() {
        for ctx in [normal_ctx(), binomial_ctx()] {
            let s = informative(&ctx);
            let robust = match ctx.model {
                EndpointModel::Normal { .. } => Prior::normal(0.25, 1.0).unwrap(),
                EndpointModel::Binomial => Prior::beta(1.0, 1.0).unwrap(),
            };
            for n in [20, 100] {
                let bd = integrated_risk(&rule(&ctx, RuleKind::Bd { prior: None }, n), &s).unwrap();
                for i in 0..=10 {
                    let w = i as f64 / 10.0;
                    for kind in [
                        RuleKind::Fd,
                        RuleKind::Cd { w },
                        RuleKind::Rmd { w, robust: robust.clone() },
                        RuleKind::TiRbd { w },
                        RuleKind::CdAdapt { tau_bound: 0.15 },
                    ] {
                        let r = integrated_risk(&rule(&ctx, kind.clone(), n), &s).unwrap();
                        assert!(bd <= r + 1e-12, "{kind:?} n = {n}: {r} < {bd}");
                    }
                }
            }
        }
    }

    #[test]
    fn frequentist_risk_jumps_at_theta0() {
        let mut ctx = normal_ctx();
        ctx.informative = Prior::normal(0.5, (1.0f64 / 50.0).sqrt()).unwrap();
        let bd = rule(&ctx, RuleKind::Bd { prior: None }, 100);
        let pf = PowerFunction::new(&bd).unwrap();
        let kappa = bd.hypothesis().kappa();
        let b0 = pf.power(0.0).unwrap();
        let eps = 1e-9;
        assert!((pf.frequentist_risk(0.0).unwrap() - b0).abs() < 1e-15);
        let jump = pf.frequentist_risk(eps).unwrap() - pf.frequentist_risk(0.0).unwrap();
        assert!((jump - (kappa * (1.0 - b0) - b0)).abs() < 1e-6);
        assert!(pf.frequentist_risk(3.0).unwrap() < 1e-12);
        let fd = rule(&ctx, RuleKind::Fd, 100);
        assert!((frequentist_risk(&fd, 0.0).unwrap() - 0.025).abs() < 1e-3);
    }

    #[test]
    fn rsl_endpoints() {
        for ctx in [normal_ctx(), binomial_ctx()] {
            for n in [20, 100] {
                let fd = rsl(&rule(&ctx, RuleKind::Fd, n), &ctx).unwrap();
                let bd = rsl(&rule(&ctx, RuleKind::Bd { prior: None }, n), &ctx).unwrap();
                assert!((fd - 1.0).abs() < 1e-12);
                assert!(bd.abs() < 1e-12);
            }
        }
        let cd = rsl(&rule(&normal_ctx(), RuleKind::Cd { w: 0.5 }, 100), &normal_ctx()).unwrap();
        assert!(cd > 0.0 && cd < 1.0);
    }

    #[test]
    fn rsl_with_equal_reference_risks_is_degenerate() {
        assert!(matches!(rsl_from_risks(0.1, 0.2, 0.2), Err(Error::Degenerate(_))));
        assert!((rsl_from_risks(1.5, 2.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rmd_unit_level_between_fd_and_bd() {
        let ctx = normal_ctx();
        for n in [20, 100] {
            let lo = type_one_error(&rule(&ctx, RuleKind::Fd, n)).unwrap();
            let hi = type_one_error(&rule(&ctx, RuleKind::Bd { prior: None }, n)).unwrap();
            for i in 0..=20 {
                let w = i as f64 / 20.0;
                let r = rule(&ctx, RuleKind::Rmd { w, robust: Prior::normal(0.25, 1.0).unwrap() }, n);
                let t = type_one_error(&r).unwrap();
                assert!(t >= lo.min(0.025) - 1e-3 && t <= hi + 1e-9, "n = {n}, w = {w}: {t}");
            }
        }
    }

    #[test]
    fn quadrature_is_converged() {
        for ctx in [normal_ctx(), binomial_ctx()] {
            let s = informative(&ctx);
            for kind in [RuleKind::Fd, RuleKind::Cd { w: 0.5 }, RuleKind::CdAdapt { tau_bound: 0.15 }] {
                let r = rule(&ctx, kind, 60);
                let coarse = PowerFunction::for_sampling(&r, &[&s], OcOptions::default()).unwrap();
                let fine = PowerFunction::for_sampling(&r, &[&s], OcOptions { nodes: 402, ..OcOptions::default() }).unwrap();
                assert!((coarse.expected_power(&s).unwrap() - fine.expected_power(&s).unwrap()).abs() < 1e-6);
                assert!((coarse.integrated_risk(&s).unwrap() - fine.integrated_risk(&s).unwrap()).abs() < 1e-6);
            }
        }
    }

    fn ratio(p: f64) -> BigRational {
        BigRational::from_float(p).unwrap()
    }

    /// Power by exact rational enumeration of the binomial pmf.
    fn exact_power(reject: &[bool], theta: f64) -> f64 {
        let n = reject.len() - 1;
        let t = ratio(theta);
        let one_minus = BigRational::one() - &t;
        let mut total = BigRational::zero();
        for (y, &r) in reject.iter().enumerate() {
            if !r {
                continue;
            }
            let mut c = BigInt::one();
            for i in 0..y {
                c = c * BigInt::from(n - i) / BigInt::from(i + 1);
            }
            let mut term = BigRational::from_integer(c);
            for _ in 0..y {
                term *= &t;
            }
            for _ in 0..n - y {
                term *= &one_minus;
            }
            total += term;
        }
        total.to_f64().unwrap()
    }

    #[test]
    fn binomial_power_matches_exact_arithmetic() {
        let ctx = binomial_ctx();
        for n in [1u64, 5, 12, 25] {
            for kind in [RuleKind::Fd, RuleKind::Bd { prior: None }, RuleKind::Cd { w: 0.5 }, RuleKind::CdAdapt { tau_bound: 0.15 }] {
                let r = rule(&ctx, kind, n);
                let pf = PowerFunction::new(&r).unwrap();
                let reject = pf.region().rejected_counts().unwrap().to_vec();
                for theta in [0.05, 0.3, 0.5, 0.77] {
                    assert!((pf.power(theta).unwrap() - exact_power(&reject, theta)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn beta_sampling_normaliser() {
        let ctx = binomial_ctx();
        let s = SamplingPrior::new(Prior::beta(13.0, 29.0).unwrap()).unwrap();
        let always = PowerFunction::new(&rule(&ctx, RuleKind::Bd { prior: None }, 1)).unwrap();
        assert!((always.expected_power(&s).unwrap() - 1.0).abs() < 1e-9);
        let mass = 1.0 - BetaOracle::new(13.0, 29.0).unwrap().cdf(0.3);
        assert!((always.integrated_risk(&s).unwrap() - (1.0 - mass)).abs() < 1e-9);
    }

    #[test]
    fn sampling_family_must_match_model() {
        let r = rule(&normal_ctx(), RuleKind::Fd, 10);
        let s = SamplingPrior::new(Prior::beta(2.0, 2.0).unwrap()).unwrap();
        assert!(expected_power(&r, &s).is_err());
        assert!(SamplingPrior::new(Prior::mixture(vec![Prior::normal(0.0, 1.0).unwrap(), Prior::normal(1.0, 1.0).unwrap()], vec![0.5, 0.5]).unwrap()).is_err());
    }

    #[test]
    fn simulation_agrees_with_exact_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for ctx in [normal_ctx(), binomial_ctx()] {
            let r = rule(&ctx, RuleKind::CdAdapt { tau_bound: 0.15 }, 40);
            let theta = ctx.hypothesis.theta0();
            let exact = power(&r, theta).unwrap();
            let (p, se) = monte_carlo_power(&r, theta, 100_000, &mut rng).unwrap();
            assert!((p - exact).abs() < 4.0 * se.max(1e-4), "{p} vs {exact}");
        }
    }

    #[test]
    fn report_is_consistent() {
        let ctx = normal_ctx();
        let r = rule(&ctx, RuleKind::Cd { w: 0.5 }, 100);
        let s = informative(&ctx);
        let rep = evaluate(&r, &ctx, &s, 11).unwrap();
        assert_eq!(rep.power_curve.len(), 11);
        assert!((rep.type_one_error - type_one_error(&r).unwrap()).abs() < 1e-15);
        assert!((rep.rsl.unwrap() - rsl(&r, &ctx).unwrap()).abs() < 1e-12);
        assert!((rep.integrated_risk - integrated_risk(&r, &s).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fixed_rule_power_is_nondecreasing(n in 1u64..200, w in 0.0f64..=1.0, k in 0usize..4) {
            let ctx = normal_ctx();
            let kind = [RuleKind::Fd, RuleKind::Bd { prior: None }, RuleKind::Cd { w }, RuleKind::TiRbd { w }][k].clone();
            let pf = PowerFunction::new(&rule(&ctx, kind, n)).unwrap();
            let curve = pf.curve(-1.0, 1.0, 101).unwrap();
            for pair in curve.windows(2) {
                prop_assert!(pair[1].1 >= pair[0].1 - 1e-10);
            }
        }

        #[test]
        fn binomial_power_is_nondecreasing(n in 1u64..150, w in 0.0f64..=1.0, k in 0usize..4) {
            let ctx = binomial_ctx();
            let kind = [RuleKind::Fd, RuleKind::Bd { prior: None }, RuleKind::Cd { w }, RuleKind::Rmd { w, robust: Prior::beta(1.0, 1.0).unwrap() }][k].clone();
            let pf = PowerFunction::new(&rule(&ctx, kind, n)).unwrap();
            let curve = pf.curve(0.0, 1.0, 101).unwrap();
            for pair in curve.windows(2) {
                prop_assert!(pair[1].1 >= pair[0].1 - 1e-10);
            }
        }

        #[test]
        fn risk_is_nonnegative(n in 1u64..150, mean in -0.5f64..0.8, sd in 0.05f64..1.0) {
            let r = rule(&normal_ctx(), RuleKind::CdAdapt { tau_bound: 0.15 }, n);
            let s = SamplingPrior::new(Prior::normal(mean, sd).unwrap()).unwrap();
            prop_assert!(integrated_risk(&r, &s).unwrap() >= 0.0);
        }
    }
}
