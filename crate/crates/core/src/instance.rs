//! Instance, assignment, and region file formats, plus the random-instance
//! generator. All files are JSON; distributions are arrays of
//! `[value, probability]` pairs.
//!
//! Load-balancing instance:
//! `{ "m": 2, "n": 3, "p": 2.0 | "inf", "jobs": [ [dist per machine]; n ] }`
//! (`jobs[j][i]` is the distribution of job `j` on machine `i`).

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::balance::{IntegralAssignment, LbInstance};
use crate::dist::{DiscreteDist, PNorm};
use crate::error::{Error, Result};
use crate::select::{FeasibleRegion, RankFn, SelectionInstance};

/// File-level tolerance on each distribution's probability mass.
pub const FILE_PROB_TOL: f64 = 1e-9;

fn schema_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn as_object<'v>(v: &'v Value, path: &str) -> Result<&'v serde_json::Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| schema_err(path, "expected an object"))
}

fn get<'v>(obj: &'v serde_json::Map<String, Value>, key: &str, path: &str) -> Result<&'v Value> {
    obj.get(key)
        .ok_or_else(|| schema_err(format!("{path}.{key}"), "missing field"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| schema_err(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| schema_err(path, "expected a number"))
}

fn parse_p(v: &Value, path: &str) -> Result<PNorm> {
    match v {
        Value::String(s) if s == "inf" => Ok(PNorm::INFINITY),
        Value::Number(_) => {
            let p = as_f64(v, path)?;
            PNorm::new(p).map_err(|e| schema_err(path, e.to_string()))
        }
        _ => Err(schema_err(path, "expected a number or \"inf\"")),
    }
}

fn p_to_value(p: PNorm) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p.value())
    }
}

/// Parses one `[[value, prob], ...]` distribution, renormalizing mass within
/// the file tolerance.
pub fn parse_dist(v: &Value, path: &str) -> Result<DiscreteDist> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema_err(path, "expected an array of [value, prob] pairs"))?;
    if arr.is_empty() {
        return Err(schema_err(path, "distribution must have at least one atom"));
    }
    let mut pairs = Vec::with_capacity(arr.len());
    for (k, pair) in arr.iter().enumerate() {
        let pp = format!("{path}[{k}]");
        let pair = pair
            .as_array()
            .ok_or_else(|| schema_err(&pp, "expected a [value, prob] pair"))?;
        if pair.len() != 2 {
            return Err(schema_err(&pp, "expected exactly two entries"));
        }
        let value = as_f64(&pair[0], &format!("{pp}[0]"))?;
        let prob = as_f64(&pair[1], &format!("{pp}[1]"))?;
        if !value.is_finite() || value < 0.0 {
            return Err(schema_err(
                format!("{pp}[0]"),
                "values must be finite and non-negative",
            ));
        }
        if !prob.is_finite() || prob < 0.0 {
            return Err(schema_err(
                format!("{pp}[1]"),
                "probabilities must be finite and non-negative",
            ));
        }
        pairs.push((value, prob));
    }
    let mass = crate::dist::compensated_sum(pairs.iter().map(|p| p.1));
    if (mass - 1.0).abs() > FILE_PROB_TOL {
        return Err(schema_err(
            path,
            format!("probabilities sum to {mass}, expected 1 within {FILE_PROB_TOL}"),
        ));
    }
    // renormalize only when the mass actually misses the strict tolerance,
    // so files that are already exact round-trip bit for bit
    let scale = if (mass - 1.0).abs() <= crate::dist::PROB_SUM_TOL {
        1.0
    } else {
        mass
    };
    DiscreteDist::new(pairs.into_iter().map(|(v, p)| (v, p / scale)))
        .map_err(|e| schema_err(path, e.to_string()))
}

fn dist_to_value(d: &DiscreteDist) -> Value {
    Value::Array(d.atoms().iter().map(|&(v, p)| json!([v, p])).collect())
}

/// Parses a load-balancing instance document.
pub fn parse_instance(text: &str) -> Result<(LbInstance, PNorm)> {
    let root: Value = serde_json::from_str(text)?;
    let obj = as_object(&root, "$")?;
    let m = as_usize(get(obj, "m", "$")?, "$.m")?;
    let n = as_usize(get(obj, "n", "$")?, "$.n")?;
    if m == 0 || n == 0 {
        return Err(schema_err("$", "m and n must be positive"));
    }
    let p = parse_p(get(obj, "p", "$")?, "$.p")?;
    let jobs = get(obj, "jobs", "$")?
        .as_array()
        .ok_or_else(|| schema_err("$.jobs", "expected an array"))?;
    if jobs.len() != n {
        return Err(schema_err(
            "$.jobs",
            format!("expected {n} jobs, found {}", jobs.len()),
        ));
    }
    let mut dists: Vec<Vec<DiscreteDist>> = vec![Vec::with_capacity(n); m];
    for (j, job) in jobs.iter().enumerate() {
        let jp = format!("$.jobs[{j}]");
        let per_machine = job
            .as_array()
            .ok_or_else(|| schema_err(&jp, "expected an array of distributions"))?;
        if per_machine.len() != m {
            return Err(schema_err(
                &jp,
                format!("expected {m} machine entries, found {}", per_machine.len()),
            ));
        }
        for (i, dv) in per_machine.iter().enumerate() {
            dists[i].push(parse_dist(dv, &format!("{jp}[{i}]"))?);
        }
    }
    Ok((LbInstance::new(dists)?, p))
}

/// Serializes an instance document (pretty-printed).
pub fn write_instance(inst: &LbInstance, p: PNorm) -> String {
    let jobs: Vec<Value> = (0..inst.jobs())
        .map(|j| {
            Value::Array(
                (0..inst.machines())
                    .map(|i| dist_to_value(inst.dist(i, j)))
                    .collect(),
            )
        })
        .collect();
    let doc = json!({
        "m": inst.machines(),
        "n": inst.jobs(),
        "p": p_to_value(p),
        "jobs": jobs,
    });
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

/// Parses `{"machine_of": [i_0, ..., i_{n-1}]}` (0-based machine indices).
pub fn parse_assignment(text: &str, machines: usize) -> Result<IntegralAssignment> {
    let root: Value = serde_json::from_str(text)?;
    let obj = as_object(&root, "$")?;
    let arr = get(obj, "machine_of", "$")?
        .as_array()
        .ok_or_else(|| schema_err("$.machine_of", "expected an array"))?;
    let machine_of: Vec<usize> = arr
        .iter()
        .enumerate()
        .map(|(j, v)| as_usize(v, &format!("$.machine_of[{j}]")))
        .collect::<Result<_>>()?;
    IntegralAssignment::new(machine_of, machines)
}

pub fn write_assignment(asg: &IntegralAssignment) -> String {
    serde_json::to_string_pretty(&json!({ "machine_of": asg.machine_of() }))
        .expect("assignment serializes")
}

/// Parses a subset-selection instance: `{ "p": ..., "items": [dist, ...] }`.
pub fn parse_selection_items(text: &str) -> Result<(Vec<DiscreteDist>, PNorm)> {
    let root: Value = serde_json::from_str(text)?;
    let obj = as_object(&root, "$")?;
    let p = parse_p(get(obj, "p", "$")?, "$.p")?;
    let items = get(obj, "items", "$")?
        .as_array()
        .ok_or_else(|| schema_err("$.items", "expected an array"))?;
    if items.is_empty() {
        return Err(schema_err("$.items", "need at least one item"));
    }
    let dists: Vec<DiscreteDist> = items
        .iter()
        .enumerate()
        .map(|(j, v)| parse_dist(v, &format!("$.items[{j}]")))
        .collect::<Result<_>>()?;
    Ok((dists, p))
}

struct PartitionRank {
    categories: Vec<usize>,
    caps: Vec<usize>,
}

impl RankFn for PartitionRank {
    fn rank(&self, subset: &[usize]) -> usize {
        let mut count = vec![0usize; self.caps.len()];
        let mut r = 0;
        for &j in subset {
            let c = self.categories[j];
            if count[c] < self.caps[c] {
                count[c] += 1;
                r += 1;
            }
        }
        r
    }
}

/// Parses a region descriptor:
/// `{"type": "cardinality", "k": 2}`,
/// `{"type": "explicit", "vectors": [[0,1,0], ...]}`, or
/// `{"type": "partition", "categories": [0,0,1], "caps": [1,2]}`.
pub fn parse_region(text: &str, n: usize) -> Result<FeasibleRegion> {
    let root: Value = serde_json::from_str(text)?;
    let obj = as_object(&root, "$")?;
    let kind = get(obj, "type", "$")?
        .as_str()
        .ok_or_else(|| schema_err("$.type", "expected a string"))?;
    match kind {
        "cardinality" => {
            let k = as_usize(get(obj, "k", "$")?, "$.k")?;
            if k > n {
                return Err(schema_err("$.k", format!("k = {k} exceeds n = {n}")));
            }
            Ok(FeasibleRegion::Cardinality(k))
        }
        "explicit" => {
            let vectors = get(obj, "vectors", "$")?
                .as_array()
                .ok_or_else(|| schema_err("$.vectors", "expected an array"))?;
            if vectors.is_empty() {
                return Err(schema_err("$.vectors", "need at least one vector"));
            }
            let parsed: Vec<Vec<bool>> = vectors
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let vp = format!("$.vectors[{k}]");
                    let arr = v
                        .as_array()
                        .ok_or_else(|| schema_err(&vp, "expected a 0/1 array"))?;
                    if arr.len() != n {
                        return Err(schema_err(&vp, format!("expected length {n}")));
                    }
                    arr.iter()
                        .enumerate()
                        .map(|(j, b)| match b.as_u64() {
                            Some(0) => Ok(false),
                            Some(1) => Ok(true),
                            _ => Err(schema_err(format!("{vp}[{j}]"), "expected 0 or 1")),
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            Ok(FeasibleRegion::Explicit(parsed))
        }
        "partition" => {
            let categories: Vec<usize> = get(obj, "categories", "$")?
                .as_array()
                .ok_or_else(|| schema_err("$.categories", "expected an array"))?
                .iter()
                .enumerate()
                .map(|(j, v)| as_usize(v, &format!("$.categories[{j}]")))
                .collect::<Result<_>>()?;
            let caps: Vec<usize> = get(obj, "caps", "$")?
                .as_array()
                .ok_or_else(|| schema_err("$.caps", "expected an array"))?
                .iter()
                .enumerate()
                .map(|(j, v)| as_usize(v, &format!("$.caps[{j}]")))
                .collect::<Result<_>>()?;
            if categories.len() != n {
                return Err(schema_err("$.categories", format!("expected length {n}")));
            }
            if let Some(&bad) = categories.iter().find(|&&c| c >= caps.len()) {
                return Err(schema_err(
                    "$.categories",
                    format!("category {bad} has no cap"),
                ));
            }
            Ok(FeasibleRegion::Matroid(Arc::new(PartitionRank {
                categories,
                caps,
            })))
        }
        other => Err(schema_err(
            "$.type",
            format!("unknown region type {other:?}"),
        )),
    }
}

/// Builds a selection instance from its two documents.
pub fn parse_selection(items_text: &str, region_text: &str) -> Result<(SelectionInstance, PNorm)> {
    let (items, p) = parse_selection_items(items_text)?;
    let region = parse_region(region_text, items.len())?;
    Ok((SelectionInstance::new(items, region)?, p))
}

fn random_dist(rng: &mut ChaCha8Rng, max_support: usize, max_value: f64) -> DiscreteDist {
    let k = rng.random_range(1..=max_support);
    let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..max_value)).collect();
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DiscreteDist::new(values.into_iter().zip(weights)).expect("generated atoms are valid")
}

/// Deterministic random instance: `m x n` jobs with supports of at most
/// `support` atoms and values in `[0, 10)`.
pub fn gen_random(m: usize, n: usize, p: PNorm, support: usize, seed: u64) -> LbInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let _ = p;
    let dists: Vec<Vec<DiscreteDist>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| random_dist(&mut rng, support.max(1), 10.0))
                .collect()
        })
        .collect();
    LbInstance::new(dists).expect("generated instance is valid")
}
