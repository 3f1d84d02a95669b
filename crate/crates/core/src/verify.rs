//! Property suites for every inequality the solver rests on: the moment
//! sandwich at `eps*`, the per-scale upper and lower bounds, the norm-vs-
//! moment bounds in both directions, the exponential tail bound behind the
//! subset rows, and Monte-Carlo calibration.
//!
//! These run as part of the test suite and behind the `verify-bounds` CLI
//! subcommand; each suite reports check and violation counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{DiscreteDist, PNorm};
use crate::error::{Error, Result};
use crate::moment::{
    expected_lp_norm_exact, expected_lp_norm_mc, latala_bounds, load_dist, sum_moment_exact,
    MachineLoads, DEFAULT_SUPPORT_CAP,
};

const REL_SLACK: f64 = 1e-9;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub checks: usize,
    pub violations: usize,
    pub notes: Vec<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checks > 0
    }
}

impl std::fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} ({} checks, {} violations)",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.checks,
            self.violations
        )?;
        for note in &self.notes {
            write!(f, "\n  {note}")?;
        }
        Ok(())
    }
}

/// A random family of small independent variables (at least one non-zero).
pub fn random_family(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    max_support: usize,
    max_value: f64,
) -> Vec<DiscreteDist> {
    loop {
        let n = rng.random_range(1..=max_n);
        let family: Vec<DiscreteDist> = (0..n)
            .map(|_| {
                let k = rng.random_range(1..=max_support);
                let values: Vec<f64> = (0..k)
                    .map(|_| {
                        if rng.random_bool(0.25) {
                            0.0
                        } else {
                            rng.random_range(0.0..max_value)
                        }
                    })
                    .collect();
                let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                DiscreteDist::new(values.into_iter().zip(weights)).expect("valid atoms")
            })
            .collect();
        if family.iter().any(|d| !d.is_zero()) {
            return family;
        }
    }
}

/// Moment sandwich at `eps*`: exact `E S^p` within
/// `[(eps*/10)^p, (e eps*)^p]` with relative slack `1e-9`.
pub fn latala_sandwich_suite(families: usize, seed: u64, ps: &[f64]) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut violations = 0;
    let mut notes = Vec::new();
    for _ in 0..families {
        let family = random_family(&mut rng, 6, 4, 10.0);
        for &p in ps {
            let p = PNorm::new(p)?;
            let exact = sum_moment_exact(&family, p)?;
            let (lo, hi) = latala_bounds(&family, p)?;
            checks += 1;
            if exact < lo * (1.0 - REL_SLACK) || exact > hi * (1.0 + REL_SLACK) {
                violations += 1;
                if notes.len() < 5 {
                    notes.push(format!(
                        "E S^p = {exact} outside [{lo}, {hi}] at p = {}",
                        p.value()
                    ));
                }
            }
        }
    }
    Ok(SuiteOutcome {
        name: "latala-sandwich",
        checks,
        violations,
        notes,
    })
}

/// Per-scale bounds: `E S^p <= eps^p e^{p sum nu}` always, and
/// `E S^p >= (eps/10)^p` whenever the nu-mass is at least one.
pub fn moment_bounds_suite(
    families: usize,
    eps_per_family: usize,
    seed: u64,
    ps: &[f64],
) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut violations = 0;
    let mut notes = Vec::new();
    let mut lower_side = 0usize;
    for _ in 0..families {
        let family = random_family(&mut rng, 6, 4, 10.0);
        let vmax = family.iter().map(|d| d.max_value()).fold(1e-3, f64::max);
        for &p in ps {
            let pn = PNorm::new(p)?;
            let exact = sum_moment_exact(&family, pn)?;
            for _ in 0..eps_per_family {
                let eps = vmax * 10f64.powf(rng.random_range(-3.0..3.0));
                let mass: f64 = family
                    .iter()
                    .try_fold(0.0, |acc, d| Ok::<_, Error>(acc + d.l_function(eps, pn)?))?;
                checks += 1;
                let upper = eps.powf(p) * (p * mass).exp();
                if exact > upper * (1.0 + REL_SLACK) {
                    violations += 1;
                    if notes.len() < 5 {
                        notes.push(format!("upper bound: {exact} > {upper} at eps {eps}"));
                    }
                }
                if mass >= 1.0 {
                    lower_side += 1;
                    let lower = (eps / 10.0).powf(p);
                    if exact < lower * (1.0 - REL_SLACK) {
                        violations += 1;
                        if notes.len() < 5 {
                            notes.push(format!("lower bound: {exact} < {lower} at eps {eps}"));
                        }
                    }
                }
            }
        }
    }
    notes.push(format!("lower-bound branch exercised {lower_side} times"));
    Ok(SuiteOutcome {
        name: "scalewise-moment-bounds",
        checks,
        violations,
        notes,
    })
}

/// Norm-moment direction: `E ||S||_p <= (sum_i E S_i^p)^{1/p}` on random
/// enumerable machine loads.
pub fn jensen_suite(cases: usize, seed: u64, ps: &[f64]) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut violations = 0;
    let mut notes = Vec::new();
    for _ in 0..cases {
        let m = rng.random_range(1..=4);
        let loads: Vec<Vec<DiscreteDist>> = (0..m)
            .map(|_| {
                let jobs = rng.random_range(0..=3);
                (0..jobs)
                    .map(|_| random_family(&mut rng, 1, 3, 6.0).pop().unwrap())
                    .collect()
            })
            .collect();
        let loads = MachineLoads::new(loads)?;
        for &p in ps {
            let pn = PNorm::new(p)?;
            let norm = expected_lp_norm_exact(&loads, pn)?;
            let total: f64 = loads.machines().iter().try_fold(0.0, |acc, jobs| {
                Ok::<_, Error>(acc + sum_moment_exact(jobs, pn)?)
            })?;
            let bound = total.powf(1.0 / p);
            checks += 1;
            if norm > bound * (1.0 + REL_SLACK) + 1e-12 {
                violations += 1;
                if notes.len() < 5 {
                    notes.push(format!("norm {norm} > bound {bound} at p = {p}"));
                }
            }
        }
    }
    Ok(SuiteOutcome {
        name: "jensen-norm-bound",
        checks,
        violations,
        notes,
    })
}

/// `E[Bin(m, q)^r]` for `r in (0, 1]`, by windowed summation around the
/// mode with the multiplicative pmf recurrence. The neglected tail mass is
/// below 1e-30 of the mode weight, far under the needs of any check here.
pub fn binomial_power_mean(m: u64, q: f64, r: f64) -> f64 {
    assert!(m >= 1 && (0.0..=1.0).contains(&q) && r > 0.0 && r <= 1.0);
    if q == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        return (m as f64).powf(r);
    }
    let mf = m as f64;
    let mode = ((mf + 1.0) * q).floor().clamp(0.0, mf);
    let cutoff = 1e-30;
    let ratio_up = |k: f64| (mf - k) / (k + 1.0) * q / (1.0 - q);
    let ratio_down = |k: f64| k / (mf - k + 1.0) * (1.0 - q) / q;
    let mut weight_sum = 1.0;
    let mut moment_sum = mode.powf(r);
    let mut w = 1.0;
    let mut k = mode;
    while k < mf {
        w *= ratio_up(k);
        k += 1.0;
        weight_sum += w;
        moment_sum += w * k.powf(r);
        if w < cutoff {
            break;
        }
    }
    w = 1.0;
    k = mode;
    while k > 0.0 {
        w *= ratio_down(k);
        k -= 1.0;
        weight_sum += w;
        moment_sum += w * k.powf(r);
        if w < cutoff {
            break;
        }
    }
    moment_sum / weight_sum
}

/// One converse-direction family: `m` machines, each carrying a single
/// Bernoulli(q) unit coordinate, so `sum_i S_i^p ~ Bin(m, q)` exactly.
#[derive(Debug, Clone, Copy)]
pub struct ConverseFamily {
    pub machines: u64,
    pub q: f64,
    pub p: f64,
}

impl ConverseFamily {
    /// Checks the preconditions for a given `alpha0` and evaluates both
    /// sides of the converse bound; returns `(lhs, rhs)` with the claim
    /// `lhs > rhs`.
    pub fn evaluate(&self) -> (f64, f64) {
        let r = 1.0 / self.p;
        let lhs = binomial_power_mean(self.machines, self.q, r);
        let rhs = 0.25 * (self.machines as f64 * self.q).powf(r);
        (lhs, rhs)
    }

    pub fn meets_preconditions(&self, alpha0: f64) -> bool {
        let sum_moments = self.machines as f64 * self.q;
        self.q <= 1.0 && sum_moments.powf(1.0 / self.p) >= 1.0 / alpha0
    }
}

/// Constructs qualifying families for the converse norm bound at `alpha0`:
/// unit Bernoulli coordinates, one per machine, with `m q` large enough that
/// `(sum_i E S_i^p)^{1/p} >= 1/alpha0`.
pub fn converse_jensen_families(
    count: usize,
    alpha0: f64,
    ps: &[f64],
    seed: u64,
) -> Vec<ConverseFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|idx| {
            let p = ps[idx % ps.len()];
            let q = rng.random_range(0.3..0.9);
            let margin = rng.random_range(1.0..2.0);
            let need = (1.0 / alpha0).powf(p) * margin;
            let machines = (need / q).ceil() as u64;
            ConverseFamily { machines, q, p }
        })
        .collect()
}

/// Converse norm bound on constructed qualifying families:
/// `E ||S||_p > (1/4) (sum_i E S_i^p)^{1/p}`.
pub fn converse_jensen_suite(
    families: usize,
    alpha0: f64,
    ps: &[f64],
    seed: u64,
) -> Result<SuiteOutcome> {
    let mut checks = 0;
    let mut violations = 0;
    let mut notes = Vec::new();
    let mut skipped = 0;
    for fam in converse_jensen_families(families, alpha0, ps, seed) {
        if !fam.meets_preconditions(alpha0) {
            skipped += 1;
            continue;
        }
        let (lhs, rhs) = fam.evaluate();
        checks += 1;
        if lhs <= rhs {
            violations += 1;
            if notes.len() < 5 {
                notes.push(format!(
                    "m = {}, q = {}, p = {}: {lhs} <= {rhs}",
                    fam.machines, fam.q, fam.p
                ));
            }
        }
    }
    if skipped > 0 {
        notes.push(format!("{skipped} families skipped (preconditions)"));
    }
    Ok(SuiteOutcome {
        name: "converse-jensen",
        checks,
        violations,
        notes,
    })
}

/// Scans `alpha0 = 2^-1 .. 2^-12` and reports the smallest value at which
/// the converse bound held on every constructed family.
pub fn smallest_passing_alpha0(seed: u64) -> Result<Option<f64>> {
    let mut smallest = None;
    for exp in 1..=12 {
        let alpha0 = 2f64.powi(-exp);
        let outcome = converse_jensen_suite(6, alpha0, &[1.5, 2.0], seed + exp as u64)?;
        if outcome.passed() {
            smallest = Some(alpha0);
        }
    }
    Ok(smallest)
}

/// Exponential tail bound: `Pr(sum Y >= sum beta_ell(Y) + t) <= ell^{-t}`,
/// checked by exact tail computation on enumerable families.
pub fn chernoff_tail_suite(families: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut violations = 0;
    let mut notes = Vec::new();
    for _ in 0..families {
        let family = random_family(&mut rng, 5, 3, 3.0);
        let sum = load_dist(&family, DEFAULT_SUPPORT_CAP)?;
        for ell in [2.0, 3.0, 5.0] {
            let beta_mass: f64 = family
                .iter()
                .try_fold(0.0, |acc, d| Ok::<_, Error>(acc + d.effective_size(ell)?))?;
            for t in [0.0, 0.5, 1.0, 2.0] {
                // a hair below the threshold makes the computed tail
                // conservatively large
                let threshold = beta_mass + t - 1e-12;
                let tail: f64 = sum
                    .atoms()
                    .iter()
                    .filter(|&&(v, _)| v >= threshold)
                    .map(|&(_, p)| p)
                    .sum();
                let bound = ell.powf(-t);
                checks += 1;
                if tail > bound * (1.0 + REL_SLACK) + 1e-15 {
                    violations += 1;
                    if notes.len() < 5 {
                        notes.push(format!("tail {tail} > {bound} at ell = {ell}, t = {t}"));
                    }
                }
            }
        }
    }
    Ok(SuiteOutcome {
        name: "exponential-tail",
        checks,
        violations,
        notes,
    })
}

/// Monte-Carlo calibration: on an enumerable instance, the estimate lands
/// within four standard errors of the exact value in at least `required`
/// of `trials` seeded runs.
pub fn mc_calibration_suite(
    trials: usize,
    samples: usize,
    required: usize,
    seed: u64,
) -> Result<SuiteOutcome> {
    let b = DiscreteDist::bernoulli(0.5, 1.0)?;
    let skewed = DiscreteDist::new([(0.0, 0.8), (3.0, 0.2)])?;
    let loads = MachineLoads::new(vec![vec![b.clone(), skewed.clone()], vec![b, skewed]])?;
    let p = PNorm::new(2.0)?;
    let exact = expected_lp_norm_exact(&loads, p)?;
    let mut hits = 0;
    for t in 0..trials {
        let est = expected_lp_norm_mc(&loads, p, samples, seed.wrapping_add(t as u64))?;
        let ok = if est.stderr == 0.0 {
            (est.mean - exact).abs() <= 1e-12
        } else {
            (est.mean - exact).abs() <= 4.0 * est.stderr
        };
        if ok {
            hits += 1;
        }
    }
    let violations = usize::from(hits < required);
    Ok(SuiteOutcome {
        name: "mc-calibration",
        checks: trials,
        violations,
        notes: vec![format!("{hits}/{trials} within four standard errors")],
    })
}

/// Runs the full bound-verification battery with one seed. `alpha0` tunes
/// the converse-bound precondition (the constant the converse direction
/// leaves unspecified); families are constructed to satisfy it.
pub fn run_all(families: usize, seed: u64, ps: &[f64], alpha0: f64) -> Result<Vec<SuiteOutcome>> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha0 must lie in (0, 1), got {alpha0}"
        )));
    }
    let mut outcomes = vec![
        latala_sandwich_suite(families, seed, ps)?,
        moment_bounds_suite(families, 5, seed ^ 0x9e37_79b9, ps)?,
        jensen_suite(families.min(200), seed ^ 0x51f1, ps)?,
        converse_jensen_suite(families.min(100), alpha0, &[1.5, 2.0, 3.0], seed ^ 0xabcd)?,
        chernoff_tail_suite(families.min(100), seed ^ 0x7777)?,
        mc_calibration_suite(100, 2000, 95, seed ^ 0x1234)?,
    ];
    if let Some(alpha0) = smallest_passing_alpha0(seed ^ 0xbeef)? {
        if let Some(cj) = outcomes.iter_mut().find(|o| o.name == "converse-jensen") {
            cj.notes.push(format!(
                "smallest passing alpha0 on the scanned grid: {alpha0:e}"
            ));
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binomial_power_mean_small_exact() {
        // n = 2, q = 0.5: E[Bin^r] = 0.25*0 + 0.5*1 + 0.25*2^r
        for r in [0.4, 0.7, 1.0] {
            let expect = 0.5 + 0.25 * 2f64.powf(r);
            assert_relative_eq!(binomial_power_mean(2, 0.5, r), expect, max_relative = 1e-12);
        }
        // r = 1 gives the mean for any size
        assert_relative_eq!(
            binomial_power_mean(10_000, 0.3, 1.0),
            3000.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn binomial_power_mean_large_concentrates() {
        let m = 1u64 << 22;
        let q = 0.5;
        let r = 0.5;
        let v = binomial_power_mean(m, q, r);
        let center = (m as f64 * q).powf(r);
        assert!((v - center).abs() / center < 1e-3);
    }

    #[test]
    fn suites_pass_smoke() {
        for s in run_all(40, 7, &[1.5, 2.0, 3.0], 2f64.powi(-10)).unwrap() {
            assert!(s.passed(), "{s}");
        }
    }

    #[test]
    fn converse_families_qualify() {
        let alpha0 = 2f64.powi(-10);
        for fam in converse_jensen_families(20, alpha0, &[1.5, 2.0], 3) {
            assert!(fam.meets_preconditions(alpha0));
        }
    }
}
