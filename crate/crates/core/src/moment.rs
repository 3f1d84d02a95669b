//! Exact and Monte-Carlo moments of sums of independent distributions.
//!
//! This module is the ground-truth engine for the rest of the crate: exact
//! convolution, exact expected lp-norms over enumerable joint supports,
//! seeded Monte-Carlo estimation, and the scale `eps*` at which the
//! L-function masses of a family sum to one, together with the moment
//! sandwich it induces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{compensated_sum, DiscreteDist, PNorm};
use crate::error::{Error, Result};

/// Default cap on exact supports (convolution atoms, joint outcomes).
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// Residual tolerance for the `eps*` bisection.
pub const EPS_STAR_TOL: f64 = 1e-10;
const EPS_STAR_MAX_ITERS: usize = 200;

/// Jobs grouped per machine: machine `i` carries the independent summands
/// of its load `S_i`.
#[derive(Debug, Clone)]
pub struct MachineLoads {
    per_machine: Vec<Vec<DiscreteDist>>,
}

impl MachineLoads {
    pub fn new(per_machine: Vec<Vec<DiscreteDist>>) -> Result<Self> {
        if per_machine.is_empty() {
            return Err(Error::InvalidParameter(
                "machine loads need at least one machine".into(),
            ));
        }
        Ok(MachineLoads { per_machine })
    }

    pub fn machines(&self) -> &[Vec<DiscreteDist>] {
        &self.per_machine
    }

    pub fn machine_count(&self) -> usize {
        self.per_machine.len()
    }
}

/// A seeded Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Distribution of `a + b` for independent `a`, `b`, with the default
/// support cap.
pub fn convolve(a: &DiscreteDist, b: &DiscreteDist) -> Result<DiscreteDist> {
    convolve_capped(a, b, DEFAULT_SUPPORT_CAP)
}

/// Distribution of `a + b`; errors if the pre-merge support would exceed `cap`.
pub fn convolve_capped(a: &DiscreteDist, b: &DiscreteDist, cap: usize) -> Result<DiscreteDist> {
    let needed = a
        .support_len()
        .checked_mul(b.support_len())
        .ok_or(Error::SupportCapExceeded {
            needed: usize::MAX,
            cap,
        })?;
    if needed > cap {
        return Err(Error::SupportCapExceeded { needed, cap });
    }
    let mut pairs = Vec::with_capacity(needed);
    for &(va, pa) in a.atoms() {
        for &(vb, pb) in b.atoms() {
            pairs.push((va + vb, pa * pb));
        }
    }
    DiscreteDist::new(pairs)
}

/// Distribution of the sum of all `jobs` (point mass at zero when empty).
pub fn load_dist(jobs: &[DiscreteDist], cap: usize) -> Result<DiscreteDist> {
    let mut acc = DiscreteDist::point_mass(0.0);
    for job in jobs {
        acc = convolve_capped(&acc, job, cap)?;
    }
    Ok(acc)
}

/// Exact `E S^p` for `S` the sum of the independent `ds`.
pub fn sum_moment_exact(ds: &[DiscreteDist], p: PNorm) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    load_dist(ds, DEFAULT_SUPPORT_CAP)?.raw_moment(p)
}

/// lp-norm of a non-negative vector.
pub fn lp_norm(values: &[f64], p: PNorm) -> f64 {
    if p.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let p = p.value();
    if p == 1.0 {
        return values.iter().sum();
    }
    values.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Exact `E || (S_1, ..., S_m) ||_p` by enumerating the joint outcome space
/// of the per-machine load distributions.
///
/// Errors with [`Error::SupportCapExceeded`] when the joint support exceeds
/// the cap; callers should fall back to [`expected_lp_norm_mc`].
pub fn expected_lp_norm_exact(loads: &MachineLoads, p: PNorm) -> Result<f64> {
    let machine_dists: Vec<DiscreteDist> = loads
        .machines()
        .iter()
        .map(|jobs| load_dist(jobs, DEFAULT_SUPPORT_CAP))
        .collect::<Result<_>>()?;
    let mut joint: usize = 1;
    for d in &machine_dists {
        joint = joint
            .checked_mul(d.support_len())
            .ok_or(Error::SupportCapExceeded {
                needed: usize::MAX,
                cap: DEFAULT_SUPPORT_CAP,
            })?;
        if joint > DEFAULT_SUPPORT_CAP {
            return Err(Error::SupportCapExceeded {
                needed: joint,
                cap: DEFAULT_SUPPORT_CAP,
            });
        }
    }
    let m = machine_dists.len();
    let mut values = vec![0.0; m];
    let mut terms = Vec::with_capacity(joint);
    enumerate_joint(&machine_dists, 0, 1.0, &mut values, p, &mut terms);
    Ok(compensated_sum(terms))
}

fn enumerate_joint(
    dists: &[DiscreteDist],
    idx: usize,
    prob: f64,
    values: &mut [f64],
    p: PNorm,
    terms: &mut Vec<f64>,
) {
    if idx == dists.len() {
        terms.push(prob * lp_norm(values, p));
        return;
    }
    for &(v, q) in dists[idx].atoms() {
        values[idx] = v;
        enumerate_joint(dists, idx + 1, prob * q, values, p, terms);
    }
}

/// Seeded Monte-Carlo estimate of `E || (S_1, ..., S_m) ||_p`.
///
/// Same seed, same stream: the estimate is a pure function of
/// `(loads, p, samples, seed)`.
pub fn expected_lp_norm_mc(
    loads: &MachineLoads,
    p: PNorm,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "monte carlo needs at least 2 samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = loads.machine_count();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut machine_values = vec![0.0; m];
    for s in 0..samples {
        for (i, jobs) in loads.machines().iter().enumerate() {
            machine_values[i] = jobs.iter().map(|d| d.sample(&mut rng)).sum();
        }
        let x = lp_norm(&machine_values, p);
        let delta = x - mean;
        mean += delta / (s + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(McEstimate {
        mean,
        stderr: (var.max(0.0) / samples as f64).sqrt(),
        samples,
        seed,
    })
}

fn nu_mass(ds: &[DiscreteDist], eps: f64, p: PNorm) -> Result<f64> {
    let mut total = 0.0;
    for d in ds {
        total += d.l_function(eps, p)?;
    }
    Ok(total)
}

/// Solves `sum_j nu_{eps}(X_j) = 1` for `eps` by bisection.
///
/// The mass is continuous and strictly decreasing in `eps`, growing without
/// bound as `eps -> 0` and vanishing as `eps -> inf`, so the root exists and
/// is unique unless every variable is a point mass at zero.
pub fn solve_epsilon_star(ds: &[DiscreteDist], p: PNorm) -> Result<f64> {
    if ds.iter().all(|d| d.is_zero()) {
        return Err(Error::NoRoot(
            "every variable is a point mass at zero; the nu mass is identically zero".into(),
        ));
    }
    let vmax = ds.iter().map(|d| d.max_value()).fold(0.0, f64::max);
    let mut lo = 1e-12 * vmax;
    let mut hi = 1e12 * vmax;
    // grow the bracket geometrically if the initial guess does not straddle
    for _ in 0..64 {
        if nu_mass(ds, lo, p)? - 1.0 > 0.0 {
            break;
        }
        lo /= 16.0;
    }
    for _ in 0..64 {
        if nu_mass(ds, hi, p)? - 1.0 < 0.0 {
            break;
        }
        hi *= 16.0;
    }
    if nu_mass(ds, lo, p)? < 1.0 || nu_mass(ds, hi, p)? > 1.0 {
        return Err(Error::NoRoot("could not bracket the nu-mass root".into()));
    }
    for _ in 0..EPS_STAR_MAX_ITERS {
        let mid = (lo * hi).sqrt();
        let residual = nu_mass(ds, mid, p)? - 1.0;
        if residual.abs() <= EPS_STAR_TOL {
            return Ok(mid);
        }
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(format!(
        "epsilon-star bisection: residual above {EPS_STAR_TOL} after {EPS_STAR_MAX_ITERS} iterations"
    )))
}

/// The moment sandwich `[(eps*/10)^p, (e eps*)^p]` that contains `E S^p`.
pub fn latala_bounds(ds: &[DiscreteDist], p: PNorm) -> Result<(f64, f64)> {
    let eps_star = solve_epsilon_star(ds, p)?;
    let pv = p.value();
    Ok((
        (eps_star / 10.0).powf(pv),
        (std::f64::consts::E * eps_star).powf(pv),
    ))
}
