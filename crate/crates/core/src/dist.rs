//! Finite-support discrete distributions and their scalar functionals.
//!
//! [`DiscreteDist`] is the atom of every computation in this crate: job
//! sizes, item values, machine loads. The functionals defined here are the
//! L-function `nu`, its capped variant, and the exponential effective size
//! `beta`, together with truncation and scaling.

use crate::error::{Error, Result};

/// Values closer than this are merged into a single atom.
pub const VALUE_MERGE_TOL: f64 = 1e-12;
/// Probabilities must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// The norm exponent `p`, a real in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PNorm(f64);

impl PNorm {
    pub const ONE: PNorm = PNorm(1.0);
    pub const INFINITY: PNorm = PNorm(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        Ok(PNorm(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    fn require_finite(self) -> Result<f64> {
        if self.is_finite() {
            Ok(self.0)
        } else {
            Err(Error::InvalidParameter("p must be finite here".into()))
        }
    }
}

/// Neumaier-compensated summation; keeps long sums accurate to a few ulps.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// log(sum(exp(t))) with the usual max-shift stabilization.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m.is_infinite() {
        return f64::INFINITY;
    }
    let s: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
    m + s.ln()
}

/// A non-negative random variable with finite support, stored as strictly
/// increasing `(value, probability)` atoms whose probabilities sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDist {
    /// Builds a distribution from `(value, prob)` pairs. Values equal within
    /// [`VALUE_MERGE_TOL`] are merged with probabilities summed; zero-probability
    /// atoms are dropped.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (v, p) in atoms {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "value must be finite and non-negative, got {v}"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability must be finite and non-negative, got {p}"
                )));
            }
            if p > 0.0 {
                pairs.push((v, p));
            }
        }
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution(
                "support must contain at least one atom".into(),
            ));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match merged.last_mut() {
                Some(last) if v - last.0 <= VALUE_MERGE_TOL => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let total = compensated_sum(merged.iter().map(|a| a.1));
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteDist { atoms: merged })
    }

    /// The deterministic variable equal to `value`.
    pub fn point_mass(value: f64) -> Self {
        assert!(
            value.is_finite() && value >= 0.0,
            "point mass needs a finite non-negative value"
        );
        DiscreteDist {
            atoms: vec![(value, 1.0)],
        }
    }

    /// `value` with probability `q`, zero otherwise.
    pub fn bernoulli(q: f64, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "bernoulli probability must lie in [0,1], got {q}"
            )));
        }
        DiscreteDist::new([(0.0, 1.0 - q), (value, q)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn support_len(&self) -> usize {
        self.atoms.len()
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.last().map(|a| a.0).unwrap_or(0.0)
    }

    /// True iff the distribution is a point mass at zero.
    pub fn is_zero(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0].0 == 0.0
    }

    /// E X.
    pub fn expectation(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|&(v, p)| v * p))
    }

    /// E X^p for finite p >= 1. Errors if any value^p overflows.
    pub fn raw_moment(&self, p: PNorm) -> Result<f64> {
        let p = p.require_finite()?;
        let mut terms = Vec::with_capacity(self.atoms.len());
        for &(v, prob) in &self.atoms {
            let vp = v.powf(p);
            if !vp.is_finite() {
                return Err(Error::Overflow(format!("{v}^{p} is not representable")));
            }
            terms.push(vp * prob);
        }
        Ok(compensated_sum(terms))
    }

    /// The L-function `nu_{eps,p}(X) = (1/p) ln E (1 + X/eps)^p`.
    ///
    /// Evaluated in log space so large `p` or tiny `eps` cannot overflow.
    /// Always non-negative; zero exactly for the point mass at zero.
    pub fn l_function(&self, eps: f64, p: PNorm) -> Result<f64> {
        let p = p.require_finite()?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .map(|&(v, prob)| prob.ln() + p * (v / eps).ln_1p())
            .collect();
        Ok((log_sum_exp(&terms) / p).max(0.0))
    }

    /// `min(1, nu_{eps,p}(X))`; bounded coefficients for the rounding stage.
    pub fn capped_l_function(&self, eps: f64, p: PNorm) -> Result<f64> {
        Ok(self.l_function(eps, p)?.min(1.0))
    }

    /// Effective size `beta_ell(X) = (1/ln ell) ln E e^{X ln ell}` for
    /// `ell > 1`, and `E X` at `ell = 1`.
    ///
    /// `ell` within 1e-9 of 1 falls back to the expectation: the formula has
    /// a removable singularity there.
    pub fn effective_size(&self, ell: f64) -> Result<f64> {
        if !(ell >= 1.0) || !ell.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "effective size scale must be finite and >= 1, got {ell}"
            )));
        }
        if ell < 1.0 + 1e-9 {
            return Ok(self.expectation());
        }
        let ln_ell = ell.ln();
        let mut terms = Vec::with_capacity(self.atoms.len());
        for &(v, prob) in &self.atoms {
            let t = prob.ln() + v * ln_ell;
            if !t.is_finite() && t > 0.0 {
                return Err(Error::Overflow(format!(
                    "exp({v} * ln {ell}) is not representable"
                )));
            }
            terms.push(t);
        }
        // non-negative support forces E e^{X ln ell} >= 1; clamp float dust
        Ok((log_sum_exp(&terms) / ln_ell).max(0.0))
    }

    /// Splits `X` at threshold `theta` into the truncated part
    /// `X * 1(X <= theta)` and the exceptional part `X * 1(X > theta)`,
    /// each as its own marginal distribution.
    pub fn truncate_split(&self, theta: f64) -> Result<(DiscreteDist, DiscreteDist)> {
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation threshold must be positive, got {theta}"
            )));
        }
        let truncated =
            DiscreteDist::new(
                self.atoms
                    .iter()
                    .map(|&(v, p)| if v <= theta { (v, p) } else { (0.0, p) }),
            )?;
        let exceptional =
            DiscreteDist::new(
                self.atoms
                    .iter()
                    .map(|&(v, p)| if v > theta { (v, p) } else { (0.0, p) }),
            )?;
        Ok((truncated, exceptional))
    }

    /// The distribution of `c * X` for `c > 0`.
    pub fn scale(&self, c: f64) -> Result<DiscreteDist> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive and finite, got {c}"
            )));
        }
        DiscreteDist::new(self.atoms.iter().map(|&(v, p)| (v * c, p)))
    }

    /// Deterministic inverse-CDF lookup: the value at quantile `u in [0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.atoms.last().expect("non-empty support").0
    }

    /// Draws one sample using a uniform variate from `rng`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}
