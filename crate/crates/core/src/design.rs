//! Sample-size search and the sweeps behind every reported table.
//!
//! Sweeps fan grid points out over a rayon pool and collect in grid order, so
//! results are identical whatever the thread count.

use rayon::prelude::*;

use crate::decisions::{tau_pi, DecisionRule, RuleContext, RuleKind, RuleSpec};
use crate::error::{domain, Error, Result};
use crate::oc::{reference_risks, rsl_from_risks, OcOptions, PowerFunction, SamplingPrior};
use crate::scenario::Scenario;

/// Outcome of a sample-size search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSize {
    /// `None` when expected power at `n_max` is below target.
    pub n: Option<u64>,
    /// Expected power at `n`, or at `n_max` when not found.
    pub expected_power: f64,
}

/// Smallest `n` such that expected power reaches `target` at `n` and at every
/// larger sample size up to `n_max`.
///
/// The scan runs down from `n_max` and stops at the first shortfall. For rules
/// whose expected power increases with `n` this is the first crossing; for
/// binomial rules, whose power oscillates with the lattice, it excludes sample
/// sizes that qualify only through a favourable discreteness spike.
pub fn min_sample_size(ctx: &RuleContext, spec: &RuleSpec, sampling: &SamplingPrior, target: f64, n_max: u64) -> Result<SampleSize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain(format!("target expected power must lie in (0,1), got {target}")));
    }
    if n_max == 0 {
        return Err(domain("n_max must be at least 1"));
    }
    let ep = |n: u64| -> Result<f64> {
        let rule = ctx.instantiate(spec, n)?;
        PowerFunction::for_sampling(&rule, &[sampling], OcOptions::default())?.expected_power(sampling)
    };
    let top = ep(n_max)?;
    if top < target {
        return Ok(SampleSize { n: None, expected_power: top });
    }
    let mut found = SampleSize { n: Some(n_max), expected_power: top };
    for n in (1..n_max).rev() {
        let e = ep(n)?;
        if e < target {
            break;
        }
        found = SampleSize { n: Some(n), expected_power: e };
    }
    Ok(found)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rule: String,
    /// Borrowing weight of the rule, or the sweep coordinate for rules without one.
    pub w: Option<f64>,
    pub n: u64,
    pub sampling_mean: f64,
    pub type_one_error: f64,
    pub expected_power: f64,
    pub integrated_risk: f64,
    /// `None` when FD and BD have equal integrated risk.
    pub rsl: Option<f64>,
    /// Sample-size search result; `None` outside sample-size sweeps.
    pub min_n: Option<SampleSize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Operating characteristics at each fixed `n`, one row per rule.
    Fixed,
    /// OCs against the borrowing weight at each fixed `n`.
    Weight,
    /// Minimum sample size against the borrowing weight.
    SampleSizeWeight,
    /// OCs against the sampling-prior mean at each fixed `n`.
    Sampling,
    /// Minimum sample size against the sampling-prior mean.
    SampleSizeSampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

/// Fixed-`n` and minimum-sample-size views of a sampling-prior sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSweep {
    pub fixed_n: SweepResult,
    pub at_min_n: SweepResult,
}

fn rsl_or_none(risk: f64, refs: (f64, f64)) -> Result<Option<f64>> {
    match rsl_from_risks(risk, refs.0, refs.1) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

struct RowInput<'a> {
    spec: RuleSpec,
    w: Option<f64>,
    n: u64,
    sampling_mean: f64,
    sampling: &'a SamplingPrior,
}

fn evaluate_row(scenario: &Scenario, informative: &SamplingPrior, refs: (f64, f64), input: &RowInput<'_>) -> Result<SweepRow> {
    let rule = scenario.context.instantiate(&input.spec, input.n)?;
    oc_row(&rule, informative, refs, input)
}

fn oc_row(rule: &DecisionRule, informative: &SamplingPrior, refs: (f64, f64), input: &RowInput<'_>) -> Result<SweepRow> {
    let pf = PowerFunction::for_sampling(rule, &[input.sampling, informative], OcOptions::default())?;
    Ok(SweepRow {
        rule: input.spec.label.clone(),
        w: input.w,
        n: input.n,
        sampling_mean: input.sampling_mean,
        type_one_error: pf.type_one_error()?,
        expected_power: pf.expected_power(input.sampling)?,
        integrated_risk: pf.integrated_risk(input.sampling)?,
        rsl: rsl_or_none(pf.integrated_risk(informative)?, refs)?,
        min_n: None,
    })
}

fn size_row(scenario: &Scenario, informative: &SamplingPrior, input: &RowInput<'_>) -> Result<SweepRow> {
    let ctx = &scenario.context;
    let size = min_sample_size(ctx, &input.spec, input.sampling, scenario.target_expected_power, scenario.n_max)?;
    let n = size.n.unwrap_or(scenario.n_max);
    let refs = reference_risks(ctx, n, OcOptions::default())?;
    let at_n = RowInput { spec: input.spec.clone(), n, ..*input };
    let mut row = evaluate_row(scenario, informative, refs, &at_n)?;
    row.min_n = Some(size);
    Ok(row)
}

fn weight_of(spec: &RuleSpec, w: f64) -> (RuleSpec, Option<f64>) {
    let spec = spec.with_weight(w);
    let w = spec.kind.weight().or(Some(w));
    (spec, w)
}

fn references(scenario: &Scenario) -> Result<Vec<(f64, f64)>> {
    scenario
        .n_grid
        .par_iter()
        .map(|&n| reference_risks(&scenario.context, n, OcOptions::default()))
        .collect()
}

fn sampling_mean(s: &SamplingPrior) -> f64 {
    s.prior().mean()
}

/// Every rule at every `n`, with the rule's own weight, under the scenario's sampling prior.
pub fn evaluate_fixed(scenario: &Scenario) -> Result<SweepResult> {
    let informative = SamplingPrior::new(scenario.context.informative.clone())?;
    let refs = references(scenario)?;
    let mean = sampling_mean(&scenario.sampling);
    let inputs: Vec<(usize, RowInput<'_>)> = scenario
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| {
            scenario.rules.iter().map(move |spec| {
                (i, RowInput { spec: spec.clone(), w: spec.kind.weight(), n, sampling_mean: mean, sampling: &scenario.sampling })
            })
        })
        .collect();
    let rows = inputs
        .par_iter()
        .map(|(i, input)| evaluate_row(scenario, &informative, refs[*i], input))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { kind: SweepKind::Fixed, rows })
}

/// OCs over the weight grid at each `n`. Rules without a weight are
/// evaluated once per `n` and repeated as a horizontal reference.
pub fn sweep_weight(scenario: &Scenario) -> Result<SweepResult> {
    let informative = SamplingPrior::new(scenario.context.informative.clone())?;
    let refs = references(scenario)?;
    let mean = sampling_mean(&scenario.sampling);
    let mut inputs = Vec::new();
    for (i, &n) in scenario.n_grid.iter().enumerate() {
        for &w in &scenario.w_grid {
            for spec in &scenario.rules {
                let (spec, w) = weight_of(spec, w);
                inputs.push((i, RowInput { spec, w, n, sampling_mean: mean, sampling: &scenario.sampling }));
            }
        }
    }
    let rows = cached_rows(&inputs, |i, input| evaluate_row(scenario, &informative, refs[i], input))?;
    Ok(SweepResult { kind: SweepKind::Weight, rows })
}

/// Evaluates `inputs` in parallel, computing rows of weight-free rules only
/// once per `(n, sampling)` point and copying them with the row's `w`.
fn cached_rows<F>(inputs: &[(usize, RowInput<'_>)], eval: F) -> Result<Vec<SweepRow>>
where
    F: Fn(usize, &RowInput<'_>) -> Result<SweepRow> + Sync,
{
    let key = |input: &RowInput<'_>| (input.spec.label.clone(), input.n, input.sampling_mean.to_bits());
    let mut unique: Vec<usize> = Vec::new();
    let mut index = Vec::with_capacity(inputs.len());
    for (j, (_, input)) in inputs.iter().enumerate() {
        let shared = input.spec.kind.weight().is_none();
        let hit = shared
            .then(|| unique.iter().position(|&u| inputs[u].1.spec.kind.weight().is_none() && key(&inputs[u].1) == key(input)))
            .flatten();
        match hit {
            Some(p) => index.push(p),
            None => {
                unique.push(j);
                index.push(unique.len() - 1);
            }
        }
    }
    let computed = unique
        .par_iter()
        .map(|&u| eval(inputs[u].0, &inputs[u].1))
        .collect::<Result<Vec<_>>>()?;
    Ok(inputs
        .iter()
        .zip(index)
        .map(|((_, input), p)| SweepRow { w: input.w, ..computed[p].clone() })
        .collect())
}

/// Minimum sample size over the weight grid under the scenario's sampling prior.
pub fn sweep_sample_size_weight(scenario: &Scenario) -> Result<SweepResult> {
    let informative = SamplingPrior::new(scenario.context.informative.clone())?;
    let mean = sampling_mean(&scenario.sampling);
    let mut inputs = Vec::new();
    for &w in &scenario.w_grid {
        for spec in &scenario.rules {
            let (spec, w) = weight_of(spec, w);
            inputs.push((0, RowInput { spec, w, n: scenario.n_max, sampling_mean: mean, sampling: &scenario.sampling }));
        }
    }
    let rows = cached_rows(&inputs, |_, input| size_row(scenario, &informative, input))?;
    Ok(SweepResult { kind: SweepKind::SampleSizeWeight, rows })
}

/// OCs at each fixed `n` and at the minimum sample size, for every sampling
/// prior on the scenario's sampling grid, with each rule at its own weight.
pub fn sweep_sampling_prior(scenario: &Scenario) -> Result<SamplingSweep> {
    let informative = SamplingPrior::new(scenario.context.informative.clone())?;
    let refs = references(scenario)?;
    let priors = scenario.sampling_grid.priors()?;
    let mut fixed = Vec::new();
    for (i, &n) in scenario.n_grid.iter().enumerate() {
        for (mean, s) in &priors {
            for spec in &scenario.rules {
                fixed.push((i, RowInput { spec: spec.clone(), w: spec.kind.weight(), n, sampling_mean: *mean, sampling: s }));
            }
        }
    }
    let mut sized = Vec::new();
    for (mean, s) in &priors {
        for spec in &scenario.rules {
            sized.push(RowInput { spec: spec.clone(), w: spec.kind.weight(), n: scenario.n_max, sampling_mean: *mean, sampling: s });
        }
    }
    let fixed_rows = fixed
        .par_iter()
        .map(|(i, input)| evaluate_row(scenario, &informative, refs[*i], input))
        .collect::<Result<Vec<_>>>()?;
    let sized_rows = sized
        .par_iter()
        .map(|input| size_row(scenario, &informative, input))
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplingSweep {
        fixed_n: SweepResult { kind: SweepKind::Sampling, rows: fixed_rows },
        at_min_n: SweepResult { kind: SweepKind::SampleSizeSampling, rows: sized_rows },
    })
}

/// TI-RBD weight matched to a type I error level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaMatch {
    pub eta: f64,
    /// Exact type I error of TI-RBD at `eta`.
    pub level: f64,
}

/// Slack for levels computed from bisected critical values.
const LEVEL_TOL: f64 = 1e-9;

fn ti_rbd_level(ctx: &RuleContext, n: u64, eta: f64) -> Result<f64> {
    let rule = ctx.instantiate(&RuleSpec::new(RuleKind::TiRbd { w: eta }), n)?;
    PowerFunction::new(&rule)?.type_one_error()
}

/// Smallest TI-RBD weight `η` whose type I error reaches `target`.
///
/// For `target = 0` this is the smallest `η` with a nonempty rejection region.
/// On the binomial endpoint the level is a step function of `η`, so the
/// achieved level can exceed the target.
pub fn match_eta_to_w(ctx: &RuleContext, n: u64, target: f64) -> Result<EtaMatch> {
    let top = ti_rbd_level(ctx, n, 1.0)?;
    if !(0.0..=top + LEVEL_TOL).contains(&target) {
        return Err(domain(format!("target level {target} is outside the attainable range [0, {top}]")));
    }
    let grid: Vec<f64> = (0..=20)
        .map(|i| ti_rbd_level(ctx, n, i as f64 / 20.0))
        .collect::<Result<_>>()?;
    if grid.windows(2).any(|p| p[1] < p[0] - 1e-12) {
        return Err(Error::NonMonotone(format!("TI-RBD type I error is not monotone in the weight at n = {n}")));
    }
    let reaches = |level: f64| if target == 0.0 { level > 0.0 } else { level >= target - LEVEL_TOL };
    if !reaches(top) {
        return Err(domain("no weight in [0,1] gives a nonempty rejection region"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if reaches(ti_rbd_level(ctx, n, 0.0)?) {
        hi = 0.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if reaches(ti_rbd_level(ctx, n, mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EtaMatch { eta: hi, level: ti_rbd_level(ctx, n, hi)? })
}

/// CD weight implied by the CD-Adapt type I error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentWeight {
    /// `(level - τ)/(τ^π - τ)` clamped to `[0,1]`.
    pub w: f64,
    /// Type I error of CD-Adapt.
    pub level: f64,
    pub tau_pi: f64,
    /// Binomial only: weights for which CD has the same rejection region, and
    /// hence the same level, as CD-Adapt at `θ0`.
    pub plateau: Option<(f64, f64)>,
}

/// Inverts the CD level map `w ↦ (1-w)τ + wτ^π` at the CD-Adapt type I error.
pub fn cd_adapt_equivalent_w(scenario: &Scenario, n: u64) -> Result<EquivalentWeight> {
    let ctx = &scenario.context;
    let tau_bound = scenario
        .rules
        .iter()
        .find_map(|r| match r.kind {
            RuleKind::CdAdapt { tau_bound } => Some(tau_bound),
            _ => None,
        })
        .unwrap_or(0.15);
    let adapt = ctx.instantiate(&RuleSpec::new(RuleKind::CdAdapt { tau_bound }), n)?;
    let level = PowerFunction::new(&adapt)?.type_one_error()?;
    let tau = ctx.hypothesis.tau();
    let tp = tau_pi(&ctx.informative, &ctx.model, n, &ctx.hypothesis)?;
    if (tp - tau).abs() < 1e-12 {
        return Err(Error::Degenerate(format!("tau_pi equals tau at n = {n}; CD does not depend on w")));
    }
    let w = ((level - tau) / (tp - tau)).clamp(0.0, 1.0);
    let plateau = match ctx.model {
        crate::distributions::EndpointModel::Binomial => plateau(ctx, n, &adapt)?,
        _ => None,
    };
    Ok(EquivalentWeight { w, level, tau_pi: tp, plateau })
}

fn cd_counts(ctx: &RuleContext, n: u64, w: f64) -> Result<Vec<bool>> {
    let rule = ctx.instantiate(&RuleSpec::new(RuleKind::Cd { w }), n)?;
    Ok(rule.rejection_region()?.rejected_counts().unwrap_or_default().to_vec())
}

fn plateau(ctx: &RuleContext, n: u64, adapt: &DecisionRule) -> Result<Option<(f64, f64)>> {
    let target = adapt.rejection_region()?.rejected_counts().unwrap_or_default().to_vec();
    let rejected = |r: &[bool]| r.iter().filter(|&&x| x).count();
    let size = rejected(&target);
    // CD regions grow with w; bracket the weights whose region has the target size.
    let first_at_least = |k: usize| -> Result<Option<f64>> {
        if rejected(&cd_counts(ctx, n, 1.0)?) < k {
            return Ok(None);
        }
        if rejected(&cd_counts(ctx, n, 0.0)?) >= k {
            return Ok(Some(0.0));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if rejected(&cd_counts(ctx, n, mid)?) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    };
    let Some(start) = first_at_least(size)? else { return Ok(None) };
    if cd_counts(ctx, n, start)? != target {
        return Ok(None);
    }
    let end = first_at_least(size + 1)?.unwrap_or(1.0);
    Ok(Some((start, end)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal() -> Scenario {
        Scenario::builtin("paper-normal").unwrap().unwrap()
    }

    fn binomial() -> Scenario {
        Scenario::builtin("paper-binomial").unwrap().unwrap()
    }

    fn small(mut s: Scenario) -> Scenario {
        s.w_grid = vec![0.0, 0.5, 1.0];
        s
    }

    fn row<'a>(rows: &'a [SweepRow], rule: &str, w: f64, n: u64) -> &'a SweepRow {
        rows.iter().find(|r| r.rule == rule && r.w == Some(w) && r.n == n).unwrap()
    }

    #[test]
    fn sample_sizes_without_and_with_borrowing() {
        let s = normal();
        let fd = min_sample_size(&s.context, s.rule("FD").unwrap(), &s.sampling, 0.8, 250).unwrap();
        let bd = min_sample_size(&s.context, s.rule("BD").unwrap(), &s.sampling, 0.8, 250).unwrap();
        assert_eq!(fd.n, Some(214));
        assert_eq!(bd.n, Some(91));
        assert!(fd.expected_power >= 0.8);
    }

    #[test]
    fn sample_size_is_a_crossing_for_monotone_rules() {
        let s = normal();
        for w in [0.0, 0.3, 0.7] {
            let spec = s.rule("CD").unwrap().with_weight(w);
            let size = min_sample_size(&s.context, &spec, &s.sampling, 0.8, 250).unwrap();
            let n = size.n.unwrap();
            let rule = s.context.instantiate(&spec, n - 1).unwrap();
            let before = PowerFunction::for_sampling(&rule, &[&s.sampling], OcOptions::default()).unwrap();
            assert!(before.expected_power(&s.sampling).unwrap() < 0.8);
        }
    }

    #[test]
    fn unreachable_target_is_not_found() {
        let s = normal();
        let size = min_sample_size(&s.context, s.rule("FD").unwrap(), &s.sampling, 0.8, 50).unwrap();
        assert_eq!(size.n, None);
        assert!(size.expected_power < 0.8);
        assert!(min_sample_size(&s.context, s.rule("FD").unwrap(), &s.sampling, 1.0, 50).is_err());
    }

    #[test]
    fn weight_sweep_endpoints() {
        let s = small(normal());
        let rows = sweep_weight(&s).unwrap().rows;
        assert_eq!(rows.len(), 2 * 3 * 7);
        for n in [20, 100] {
            let fd = row(&rows, "FD", 0.0, n);
            let cd0 = row(&rows, "CD", 0.0, n);
            assert!((fd.type_one_error - cd0.type_one_error).abs() < 1e-6);
            assert!((fd.expected_power - cd0.expected_power).abs() < 1e-6);
            assert!((fd.integrated_risk - cd0.integrated_risk).abs() < 1e-6);
            let bd = row(&rows, "BD", 1.0, n);
            for rule in ["CD", "RMD-Unit", "RMD-Vague", "TI-RBD"] {
                assert!((row(&rows, rule, 1.0, n).type_one_error - bd.type_one_error).abs() < 1e-3, "{rule}");
            }
            // Weight-free rules repeat unchanged across the grid.
            assert_eq!(row(&rows, "CD-Adapt", 0.0, n).type_one_error, row(&rows, "CD-Adapt", 1.0, n).type_one_error);
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let s = small(binomial());
        assert_eq!(sweep_weight(&s).unwrap(), sweep_weight(&s).unwrap());
    }

    #[test]
    fn cd_sample_size_decreases_with_weight() {
        let mut s = normal();
        s.rules.retain(|r| r.label == "CD");
        let rows = sweep_sample_size_weight(&s).unwrap().rows;
        let sizes: Vec<u64> = rows.iter().map(|r| r.min_n.unwrap().n.unwrap()).collect();
        assert_eq!(sizes.first(), Some(&214));
        assert!(sizes.windows(2).all(|p| p[1] <= p[0]), "{sizes:?}");
    }

    #[test]
    fn bd_risk_is_minimal_at_the_prior_mean() {
        let mut s = normal();
        s.n_grid = vec![100];
        let sweep = sweep_sampling_prior(&s).unwrap();
        let rows = &sweep.fixed_n.rows;
        let at_prior = rows.iter().filter(|r| (r.sampling_mean - 0.25).abs() < 1e-12).collect::<Vec<_>>();
        let bd_at_prior = at_prior.iter().find(|r| r.rule == "BD").unwrap();
        for r in &at_prior {
            assert!(bd_at_prior.integrated_risk <= r.integrated_risk + 1e-12, "{}", r.rule);
        }
        let worst = |rule: &str| rows.iter().filter(|r| r.rule == rule).map(|r| r.integrated_risk).fold(0.0, f64::max);
        for rule in ["BD", "CD", "CD-Adapt", "RMD-Unit", "RMD-Vague", "TI-RBD"] {
            assert!(worst("FD") <= worst(rule) + 1e-12, "{rule}");
        }
        assert_eq!(sweep.at_min_n.rows.len(), 21 * 7);
    }

    #[test]
    fn eta_matching() {
        let s = normal();
        let tp = tau_pi(&s.context.informative, &s.context.model, 100, &s.context.hypothesis).unwrap();
        let full = match_eta_to_w(&s.context, 100, tp).unwrap();
        assert!((full.eta - 1.0).abs() < 1e-6);
        let m = match_eta_to_w(&s.context, 100, 0.075).unwrap();
        assert!(m.eta > 0.5);
        assert!((m.level - 0.075).abs() < 1e-4);
        assert!(match_eta_to_w(&s.context, 100, 0.5).is_err());
    }

    #[test]
    fn eta_matching_on_the_lattice() {
        let s = binomial();
        let m = match_eta_to_w(&s.context, 10, 0.0).unwrap();
        assert!(m.level > 0.0);
        let below = ti_rbd_level(&s.context, 10, m.eta - 1e-6).unwrap();
        assert_eq!(below, 0.0);
    }

    #[test]
    fn equivalent_weight_normal() {
        let s = normal();
        let e20 = cd_adapt_equivalent_w(&s, 20).unwrap();
        let e100 = cd_adapt_equivalent_w(&s, 100).unwrap();
        assert!(e20.level <= 0.15 && e100.level <= 0.15);
        assert!(e20.plateau.is_none());
        assert!((0.0..=1.0).contains(&e20.w) && (0.0..=1.0).contains(&e100.w));
    }

    #[test]
    fn equivalent_weight_binomial_plateau_contains_affine_inverse_region() {
        let s = binomial();
        let e = cd_adapt_equivalent_w(&s, 20).unwrap();
        let (a, b) = e.plateau.unwrap();
        assert!(a < b);
        let mid = 0.5 * (a + b);
        let cd = s.context.instantiate(&RuleSpec::new(RuleKind::Cd { w: mid }), 20).unwrap();
        assert!((PowerFunction::new(&cd).unwrap().type_one_error().unwrap() - e.level).abs() < 1e-12);
    }
}
