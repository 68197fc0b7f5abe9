use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gp::{Gp, KernelParams};
use super::space::HyperparamSpace;
use crate::cnn::CnnConfig;
use crate::error::{Error, Result};
use crate::rng;

/// Result of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Value {
        objective: f64,
        accuracy: Option<f64>,
        epochs: Option<usize>,
    },
    Diverged,
}

impl Outcome {
    pub fn value(objective: f64) -> Self {
        Outcome::Value {
            objective,
            accuracy: None,
            epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub iteration: usize,
    pub depth: usize,
    /// Point in the unit cube, after rounding.
    pub unit: Vec<f64>,
    /// Decoded hyperparameters by name.
    pub params: BTreeMap<String, f64>,
    pub objective: f64,
    pub best_so_far: f64,
    pub diverged: bool,
    pub accuracy: Option<f64>,
    pub epochs: Option<usize>,
    /// Zero in deterministic mode so traces compare byte for byte.
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub observations: Vec<Observation>,
}

impl SearchTrace {
    pub fn best(&self) -> Option<&Observation> {
        self.observations
            .iter()
            .filter(|o| !o.diverged)
            .max_by(|a, b| {
                a.objective
                    .total_cmp(&b.objective)
                    .then(b.iteration.cmp(&a.iteration))
            })
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.best_so_far).collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        for o in &self.observations {
            serde_json::to_writer(&mut f, o)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut observations = Vec::new();
        for line in f.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                observations.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { observations })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhsConfig {
    pub iterations: usize,
    /// Quasi-random points evaluated before the surrogate takes over.
    pub initial: usize,
    /// Random starting points for acquisition ascent.
    pub starts: usize,
    pub ascent_steps: usize,
    /// Adam steps for the kernel hyperparameters per refit.
    pub kernel_steps: usize,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for BhsConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            initial: 10,
            starts: 512,
            ascent_steps: 20,
            kernel_steps: 60,
            seed: 0,
            deterministic: true,
        }
    }
}

// Trust region: initial and largest side, the side below which it resets,
// and the streak lengths that double or halve it.
const TR_INIT: f64 = 0.5;
const TR_MAX: f64 = 1.6;
const TR_MIN: f64 = 0.01;
const TR_GROW_AFTER: usize = 3;
const TR_SHRINK_AFTER: usize = 5;
// Acquisition candidates that get gradient ascent.
const ASCENDED: usize = 16;
const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    let b = b as u64;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Halton point `index` (from 1) with a Cranley-Patterson shift.
pub fn halton(index: u64, shift: &[f64]) -> Vec<f64> {
    assert!(
        shift.len() <= PRIMES.len(),
        "Halton design supports at most 16 dimensions"
    );
    shift
        .iter()
        .zip(PRIMES)
        .map(|(s, p)| (radical_inverse(index, p) + s).fract())
        .collect()
}

/// Best of many projected-gradient ascents of expected improvement.
/// Axis-aligned box around the incumbent that grows after consecutive
/// improvements and shrinks after consecutive misses; plain EI over the
/// whole 11-cube explores too much for the evaluation budgets used here.
#[derive(Debug, Clone)]
struct TrustRegion {
    side: f64,
    successes: usize,
    failures: usize,
}

impl TrustRegion {
    fn new() -> Self {
        Self {
            side: TR_INIT,
            successes: 0,
            failures: 0,
        }
    }

    fn update(&mut self, improved: bool) {
        if improved {
            self.successes += 1;
            self.failures = 0;
        } else {
            self.failures += 1;
            self.successes = 0;
        }
        if self.successes >= TR_GROW_AFTER {
            self.side = (self.side * 2.0).min(TR_MAX);
            self.successes = 0;
        }
        if self.failures >= TR_SHRINK_AFTER {
            self.side /= 2.0;
            self.failures = 0;
        }
        if self.side < TR_MIN {
            *self = Self::new();
        }
    }

    fn bounds(&self, centre: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.side / 2.0;
        (
            centre.iter().map(|c| (c - h).max(0.0)).collect(),
            centre.iter().map(|c| (c + h).min(1.0)).collect(),
        )
    }
}

/// EI maximization inside the trust region: score `starts` uniform points in
/// the box plus Gaussian perturbations of the incumbent, then run projected
/// normalized-gradient ascent from the highest-scoring few.
fn maximize_ei(
    gp: &Gp,
    best: f64,
    incumbent: &[f64],
    tr: &TrustRegion,
    cfg: &BhsConfig,
    r: &mut impl Rng,
) -> Vec<f64> {
    let (lo, hi) = tr.bounds(incumbent);
    let project = |x: Vec<f64>| -> Vec<f64> {
        x.iter()
            .zip(lo.iter().zip(&hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    };
    let starts = cfg.starts.max(1);
    let mut cands: Vec<Vec<f64>> = (0..starts)
        .map(|_| {
            lo.iter()
                .zip(&hi)
                .map(|(l, h)| l + (h - l) * r.random::<f64>())
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, tr.side / 4.0).expect("positive sd");
    for _ in 0..starts / 4 {
        cands.push(project(
            incumbent.iter().map(|v| v + noise.sample(r)).collect(),
        ));
    }
    let mut scored: Vec<(f64, Vec<f64>)> = cands
        .into_iter()
        .map(|x| (gp.ei_with_grad(&x, best).0, x))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut top = (f64::NEG_INFINITY, incumbent.to_vec());
    let step0 = 0.1 * tr.side;
    for (_, mut x) in scored.into_iter().take(ASCENDED) {
        let (mut ei, mut g) = gp.ei_with_grad(&x, best);
        let mut step = step0;
        for _ in 0..cfg.ascent_steps {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || step < 1e-6 * step0 {
                break;
            }
            let cand = project(
                x.iter()
                    .zip(&g)
                    .map(|(xi, gi)| xi + step * gi / norm)
                    .collect(),
            );
            let (e2, g2) = gp.ei_with_grad(&cand, best);
            if e2 > ei {
                (x, ei, g) = (cand, e2, g2);
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        if ei > top.0 {
            top = (ei, x);
        }
    }
    top.1
}

fn is_duplicate(p: &[f64], seen: &[Vec<f64>]) -> bool {
    seen.iter()
        .any(|s| s.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12))
}

/// Sequential surrogate-guided maximization over the unit cube.
/// `snap` maps a raw proposal to the point actually evaluated (e.g. rounded
/// integers); `objective` receives the iteration and the snapped point.
pub fn maximize(
    dim: usize,
    cfg: &BhsConfig,
    snap: impl Fn(&[f64]) -> Vec<f64>,
    mut objective: impl FnMut(usize, &[f64]) -> Result<Outcome>,
) -> Result<Vec<(Vec<f64>, Outcome, f64, u64)>> {
    if dim == 0 {
        return Err(Error::invalid("search space has no dimensions"));
    }
    let mut r = rng::rng_for(cfg.seed, "bhs");
    let shift: Vec<f64> = (0..dim).map(|_| r.random()).collect();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(cfg.iterations);
    let mut kernel = KernelParams::new(dim);
    let mut tr = TrustRegion::new();
    for it in 0..cfg.iterations {
        let finite: Vec<f64> = out
            .iter()
            .filter_map(|(_, o, _, _): &(Vec<f64>, Outcome, f64, u64)| match o {
                Outcome::Value { objective, .. } => Some(*objective),
                Outcome::Diverged => None,
            })
            .collect();
        let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - finite.iter().copied().fold(f64::INFINITY, f64::min);
        let raw = if it < cfg.initial {
            halton(it as u64 + 1, &shift)
        } else if xs.len() < 2 || !(spread > 0.0) {
            // An uninformative surrogate: sample uniformly instead.
            (0..dim).map(|_| r.random()).collect()
        } else {
            let gp = Gp::fit(&xs, &ys, kernel.clone(), cfg.kernel_steps)?;
            kernel = gp.params.clone();
            let bi = (0..ys.len()).fold(0, |a, i| if ys[i] > ys[a] { i } else { a });
            maximize_ei(&gp, ys[bi], &xs[bi], &tr, cfg, &mut r)
        };
        let mut x = snap(&raw);
        if is_duplicate(&x, &xs) {
            x = snap(&(0..dim).map(|_| r.random()).collect::<Vec<f64>>());
        }
        let t0 = Instant::now();
        let outcome = objective(it, &x)?;
        let wall = if cfg.deterministic {
            0
        } else {
            t0.elapsed().as_millis() as u64
        };
        let y = match outcome {
            Outcome::Value { objective, .. } if objective.is_finite() => objective,
            _ => ys.iter().copied().fold(-1.0, f64::min),
        };
        let outcome = match outcome {
            Outcome::Value { objective, .. } if !objective.is_finite() => Outcome::Diverged,
            o => o,
        };
        if it >= cfg.initial {
            let prev = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            tr.update(!matches!(outcome, Outcome::Diverged) && y > prev);
        }
        xs.push(x.clone());
        ys.push(y);
        out.push((x, outcome, y, wall));
    }
    Ok(out)
}

/// Search the hyperparameter space at one depth. `objective` trains and
/// scores a configuration.
pub fn bhs_run(
    space: &HyperparamSpace,
    depth: usize,
    cfg: &BhsConfig,
    mut objective: impl FnMut(&CnnConfig) -> Result<Outcome>,
) -> Result<SearchTrace> {
    let raw = maximize(
        space.len(),
        cfg,
        |u| space.snap(u),
        |_, u| objective(&space.config(depth, u)?),
    )?;
    let mut best = f64::NEG_INFINITY;
    let observations = raw
        .into_iter()
        .enumerate()
        .map(|(iteration, (unit, outcome, y, wall_ms))| {
            let (diverged, accuracy, epochs) = match outcome {
                Outcome::Value {
                    accuracy, epochs, ..
                } => (false, accuracy, epochs),
                Outcome::Diverged => (true, None, None),
            };
            if !diverged {
                best = best.max(y);
            }
            let params = space
                .dims
                .iter()
                .zip(space.values(&unit))
                .map(|(d, v)| (d.name.clone(), v))
                .collect();
            Observation {
                iteration,
                depth,
                unit,
                params,
                objective: y,
                best_so_far: if best.is_finite() { best } else { y },
                diverged,
                accuracy,
                epochs,
                wall_ms,
            }
        })
        .collect();
    Ok(SearchTrace { observations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: usize,
    pub best_objective: f64,
    pub best_config: Option<CnnConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSweep {
    pub rows: Vec<SweepRow>,
    pub traces: Vec<SearchTrace>,
}

impl DepthSweep {
    pub fn best_depth(&self) -> Option<usize> {
        self.rows
            .iter()
            .max_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
            .map(|r| r.depth)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("depth,best_objective\n");
        for r in &self.rows {
            s.push_str(&format!("{},{}\n", r.depth, r.best_objective));
        }
        s
    }
}

/// One independent search per depth, each seeded from `cfg.seed` and the depth.
pub fn depth_sweep(
    space: &HyperparamSpace,
    depths: &[usize],
    cfg: &BhsConfig,
    mut objective: impl FnMut(&CnnConfig) -> Result<Outcome>,
) -> Result<DepthSweep> {
    let mut ds: Vec<usize> = depths.to_vec();
    ds.sort_unstable();
    ds.dedup();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for d in ds {
        let c = BhsConfig {
            seed: rng::derive(cfg.seed, d as u64),
            ..*cfg
        };
        let trace = bhs_run(space, d, &c, &mut objective)?;
        let best = trace.best();
        rows.push(SweepRow {
            depth: d,
            best_objective: best.map_or(f64::NEG_INFINITY, |o| o.objective),
            best_config: best.map(|o| space.config(d, &o.unit)).transpose()?,
        });
        traces.push(trace);
    }
    Ok(DepthSweep { rows, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub best_instance: usize,
}

/// Re-train `instances` fresh networks; `run(instance, seed)` returns the
/// instance's correlation with the reference judgments.
pub fn validate_config(
    instances: usize,
    seed: u64,
    mut run: impl FnMut(usize, u64) -> Result<f64>,
) -> Result<Validation> {
    if instances == 0 {
        return Err(Error::invalid("validation needs at least one instance"));
    }
    let values = (0..instances)
        .map(|i| run(i, rng::derive(rng::derive_str(seed, "validate"), i as u64)))
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 && values.iter().any(|v| *v != values[0]) {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let best_instance = (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    Ok(Validation {
        values,
        mean,
        sd,
        best_instance,
    })
}

/// Error unless the benchmark images are absent from the training manifest.
pub fn check_exclusion<'a>(
    diagnostic: impl IntoIterator<Item = &'a str>,
    training: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let train: std::collections::HashSet<&str> = training.into_iter().collect();
    let leaked: Vec<&str> = diagnostic
        .into_iter()
        .filter(|id| train.contains(id))
        .collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{} benchmark images appear in training data, e.g. {}",
            leaked.len(),
            leaked[0]
        )))
    }
}
