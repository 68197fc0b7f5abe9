//! Simulated raters standing in for human observers, and a driver that
//! produces the record store of every round.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::*;
use super::records::{Judgment, RatingRecord, Response, Task, YesNo};
use super::rounds::{round_a1_select, round_a2_select, round_b_select, Catalog};
use super::score::{bin_assign, summarize};
use crate::error::{Error, Result};
use crate::rng;
use crate::synthgen::Material;

pub const CATCH_MIRROR: &str = "catch-mirror";
pub const CATCH_GLASS: &str = "catch-glass";

/// Rate5 response of a rater whose percept is the latent score blurred by
/// Gaussian noise of standard deviation `sigma`.
pub fn simulated_rater(latent: f64, sigma: f64, seed: u64) -> u8 {
    let noise: f64 = if sigma > 0.0 {
        StandardNormal.sample(&mut rng::rng(seed))
    } else {
        0.0
    };
    bin_assign((latent + sigma * noise).clamp(0.0, 1.0)).expect("clamped")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentImage {
    pub image_id: String,
    pub material: Material,
    /// Perceived mirror-likeness in `[0, 1]`.
    pub latent: f64,
    /// Probability a rater calls the image recognizable.
    pub recognizability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub renders: Vec<LatentImage>,
    pub externals: Vec<LatentImage>,
}

impl Population {
    pub fn catalog(&self) -> Catalog {
        self.renders
            .iter()
            .chain(&self.externals)
            .map(|i| (i.image_id.clone(), i.material))
            .collect()
    }
}

/// Alternating mirror/glass renders and unlabeled externals, every latent
/// and recognizability uniform on `[0, 1]`.
pub fn synthetic_population(renders: usize, externals: usize, seed: u64) -> Population {
    let mut r = rng::rng_for(seed, "population");
    let renders = (0..renders)
        .map(|i| LatentImage {
            image_id: format!("r{i:06}"),
            material: if i % 2 == 0 {
                Material::Mirror
            } else {
                Material::Glass
            },
            latent: r.random(),
            recognizability: 1.0,
        })
        .collect();
    let externals = (0..externals)
        .map(|i| LatentImage {
            image_id: format!("x{i:05}"),
            material: Material::Unknown,
            latent: r.random(),
            recognizability: r.random(),
        })
        .collect();
    Population { renders, externals }
}

/// Round sizes and rater noise of a simulated campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Noise of lab observers.
    pub sigma_lab: f64,
    /// Noise of crowd workers.
    pub sigma_crowd: f64,
    /// Per-response chance of a "hard to recognize" vote in A1.
    pub p_hard: f64,
    /// Renders shown once each in A1, split evenly across raters.
    pub a1_images: usize,
    pub a1_raters: usize,
    pub a2_workers: usize,
    pub a2_per_worker: usize,
    /// Fraction of crowd workers answering at random.
    pub inattentive: f64,
    pub a3_raters: usize,
    pub a3_trials: usize,
    pub veridical_images: usize,
    pub veridical_raters: usize,
    pub b1_images: usize,
    pub b1_raters: usize,
    pub b2_raters: usize,
    pub b2_trials: usize,
    /// Labeled renders mixed into B2, half of each class.
    pub b2_anchors: usize,
}

impl SimConfig {
    pub fn paper() -> Self {
        Self {
            sigma_lab: 0.015,
            sigma_crowd: 0.25,
            p_hard: 0.029,
            a1_images: 30_000,
            a1_raters: 20,
            a2_workers: 247,
            a2_per_worker: 98,
            inattentive: 0.0,
            a3_raters: 10,
            a3_trials: 3,
            veridical_images: 1000,
            veridical_raters: 10,
            b1_images: 1400,
            b1_raters: 10,
            b2_raters: 10,
            b2_trials: 3,
            b2_anchors: 60,
        }
    }

    /// Sized for 1,000 renders and 200 external images.
    pub fn desk() -> Self {
        Self {
            a1_images: 800,
            a1_raters: 8,
            a2_workers: 40,
            a2_per_worker: 60,
            a3_trials: 1,
            veridical_images: 200,
            b1_images: 200,
            b2_trials: 1,
            b2_anchors: 10,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            _ => Err(Error::invalid(format!(
                "unknown simulation preset `{name}`"
            ))),
        }
    }
}

struct Recorder {
    records: Vec<RatingRecord>,
    seed: u64,
}

impl Recorder {
    /// One session: the rater sees `trials` in a seeded random order.
    fn session(
        &mut self,
        round: &str,
        rater: &str,
        task: Task,
        mut trials: Vec<&LatentImage>,
        mut respond: impl FnMut(&LatentImage, u64) -> Response,
    ) {
        let base = rng::derive_str(self.seed, &format!("{round}/{rater}"));
        trials.shuffle(&mut rng::rng(base));
        let mut rt = rng::rng(rng::derive(base, u64::MAX));
        for (k, img) in trials.into_iter().enumerate() {
            let timestamp = self.records.len() as u64;
            self.records.push(RatingRecord {
                session_id: format!("{round}-{rater}"),
                rater_id: rater.to_owned(),
                image_id: img.image_id.clone(),
                round_id: round.to_owned(),
                trial_index: k,
                task,
                response: respond(img, rng::derive(base, k as u64)),
                rt_ms: rt.random_range(300..2000),
                timestamp,
            });
        }
    }

    fn rate5(&mut self, round: &str, rater: &str, trials: Vec<&LatentImage>, sigma: f64) {
        self.session(round, rater, Task::Rate5, trials, |img, s| {
            Response::Rate5(simulated_rater(img.latent, sigma, s))
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<RatingRecord>,
    pub catalog: Catalog,
    /// Crowd workers who answered at random.
    pub inattentive: BTreeSet<String>,
}

fn by_id<'a>(pool: &'a [LatentImage], ids: &[String]) -> Vec<&'a LatentImage> {
    let want: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    pool.iter()
        .filter(|i| want.contains(i.image_id.as_str()))
        .collect()
}

/// Run every round with simulated raters. Each round's stimuli are the
/// previous round's selection, computed with the same per-round seeds as
/// `run_funnel`, so replaying the records reproduces the campaign.
pub fn simulate(
    pop: &Population,
    cfg: &FunnelConfig,
    sim: &SimConfig,
    seed: u64,
) -> Result<Simulation> {
    let need = sim.a1_images + sim.veridical_images;
    if pop.renders.len() < need || pop.externals.len() < sim.b1_images {
        return Err(Error::invalid(format!(
            "population has {} renders and {} externals; {need} and {} needed",
            pop.renders.len(),
            pop.externals.len(),
            sim.b1_images
        )));
    }
    let catalog = pop.catalog();
    let s = |tag: &str| rng::derive_str(seed, tag);
    let mut rec = Recorder {
        records: Vec::new(),
        seed: s("sim"),
    };
    let mut order: Vec<&LatentImage> = pop.renders.iter().collect();
    order.shuffle(&mut rng::rng_for(seed, "sim-split"));
    let a1_pool = &order[..sim.a1_images];
    let v_pool = &order[sim.a1_images..need];

    // A1: each render once, three-way judgment.
    let per = sim.a1_images.div_ceil(sim.a1_raters.max(1));
    for (k, chunk) in a1_pool.chunks(per.max(1)).enumerate() {
        rec.session(
            ROUND_A1,
            &format!("lab-a1-{k:02}"),
            Task::Rate3way,
            chunk.to_vec(),
            |img, s| {
                let mut r = rng::rng(s);
                if r.random::<f64>() < sim.p_hard {
                    return Response::ThreeWay(Judgment::Hard);
                }
                let noise: f64 = StandardNormal.sample(&mut r);
                let x = img.latent + sim.sigma_lab * noise;
                Response::ThreeWay(if x >= 0.5 {
                    Judgment::Mirror
                } else {
                    Judgment::Glass
                })
            },
        );
    }
    let a1 = round_a1_select(&rec.records, &catalog, cfg.a1_quota, s("a1"));

    // A2: crowd workers, each a random subset plus both catch images.
    let a2_pool = by_id(&pop.renders, &a1.selected);
    let catch = [
        LatentImage {
            image_id: CATCH_MIRROR.into(),
            material: Material::Mirror,
            latent: 1.0,
            recognizability: 1.0,
        },
        LatentImage {
            image_id: CATCH_GLASS.into(),
            material: Material::Glass,
            latent: 0.0,
            recognizability: 1.0,
        },
    ];
    let mut pick = rng::rng_for(seed, "sim-a2");
    let mut inattentive = BTreeSet::new();
    let start = rec.records.len();
    for k in 0..sim.a2_workers {
        let rater = format!("crowd-{k:03}");
        let mut trials: Vec<&LatentImage> = a2_pool
            .choose_multiple(&mut pick, sim.a2_per_worker.min(a2_pool.len()))
            .copied()
            .collect();
        trials.extend(catch.iter());
        if pick.random::<f64>() < sim.inattentive {
            inattentive.insert(rater.clone());
            rec.session(ROUND_A2, &rater, Task::Rate5, trials, |_, s| {
                Response::Rate5(rng::rng(s).random_range(1..=5))
            });
        } else {
            rec.rate5(ROUND_A2, &rater, trials, sim.sigma_crowd);
        }
    }
    let a2_records: Vec<RatingRecord> = rec.records[start..].to_vec();
    let a2 = round_a2_select(
        &a2_records,
        &catalog,
        cfg.a2_min_raters,
        cfg.a2_per_side,
        s("a2"),
    );

    // A3: lab raters see every A2 image `a3_trials` times.
    let a3_pool = by_id(&pop.renders, &a2.selected);
    for k in 0..sim.a3_raters {
        let trials: Vec<&LatentImage> = a3_pool
            .iter()
            .flat_map(|i| std::iter::repeat_n(*i, sim.a3_trials))
            .collect();
        rec.rate5(ROUND_A3, &format!("lab-a3-{k:02}"), trials, sim.sigma_lab);
    }

    // Veridical fill-in on fresh renders.
    for k in 0..sim.veridical_raters {
        rec.rate5(
            ROUND_VERIDICAL,
            &format!("lab-v-{k:02}"),
            v_pool.to_vec(),
            sim.sigma_lab,
        );
    }

    // B1: recognizability screen of external images.
    let b1_pool: Vec<&LatentImage> = pop.externals[..sim.b1_images].iter().collect();
    let start = rec.records.len();
    for k in 0..sim.b1_raters {
        rec.session(
            ROUND_B1,
            &format!("lab-b1-{k:02}"),
            Task::BinaryRecognizable,
            b1_pool.clone(),
            |img, s| {
                Response::Binary(if rng::rng(s).random::<f64>() < img.recognizability {
                    YesNo::Yes
                } else {
                    YesNo::No
                })
            },
        );
    }
    let screened = round_b_select(
        &rec.records[start..],
        &[],
        &catalog,
        cfg.b1_min_yes,
        cfg.b1_quota,
        0,
        1,
        s("b"),
    )?
    .screened;

    // B2: screened externals plus anchors rated clearly and correctly in A2.
    let summary = summarize(&a2_records);
    let mut anchors: Vec<&LatentImage> = Vec::new();
    for (material, bin) in [(Material::Mirror, 5), (Material::Glass, 1)] {
        let mut ids: Vec<&str> = summary
            .values()
            .filter(|v| {
                v.raters >= cfg.a2_min_raters
                    && v.bin() == bin
                    && catalog.get(&v.image_id) == Some(&material)
            })
            .map(|v| v.image_id.as_str())
            .collect();
        ids.shuffle(&mut rng::rng_for(seed, &format!("sim-anchors-{bin}")));
        ids.truncate(sim.b2_anchors / 2);
        anchors.extend(by_id(
            &pop.renders,
            &ids.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        ));
    }
    let mut b2_pool = by_id(&pop.externals, &screened);
    b2_pool.extend(anchors);
    for k in 0..sim.b2_raters {
        let trials: Vec<&LatentImage> = b2_pool
            .iter()
            .flat_map(|i| std::iter::repeat_n(*i, sim.b2_trials))
            .collect();
        rec.rate5(ROUND_B2, &format!("lab-b2-{k:02}"), trials, sim.sigma_lab);
    }
    Ok(Simulation {
        records: rec.records,
        catalog,
        inattentive,
    })
}
