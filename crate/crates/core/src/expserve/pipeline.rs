//! One-command reproduction: every stage from rendering to RSA, with a
//! manifest hashing each artifact against the config that produced it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::quality::flagged_raters;
use super::round::{CatchTrial, RoundConfig};
use crate::cnn::{score_set, train_on_split, CnnConfig, ImageSet, TrainConfig};
use crate::cv::accuracy;
use crate::error::{Error, Result};
use crate::features::{zscore_fit, FeatureKind, FeatureTable, PsConfig};
use crate::funnel::score::BINS;
use crate::funnel::sim::{CATCH_GLASS, CATCH_MIRROR};
use crate::funnel::{
    bin_assign, run_funnel, simulate, write_records, DiagnosticSet, FunnelConfig, LatentImage,
    Population, SimConfig, StageCounts, Task, TrueClass,
};
use crate::image::Image;
use crate::rng;
use crate::rsa::{
    ccm, classical_mds, correlate_rdms, noise_robustness, rdm_from_scores, MdsResult, NoiseCurve,
    Rdm, DEFAULT_SIGMAS,
};
use crate::search::{
    check_exclusion, depth_sweep, BhsConfig, CnnObjective, HyperparamSpace, SweepRow,
};
use crate::shallow::{crossval_scores, logreg_train, write_scores, LogRegConfig, ShallowConfig};
use crate::synthgen::dataset::{check_pairing, write_dataset};
use crate::synthgen::{
    generate, generate_external, DatasetConfig, Material, RenderConfig, Stimulus,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preset: String,
    pub dataset: DatasetConfig,
    pub externals: usize,
    pub ps: PsConfig,
    pub shallow: ShallowConfig,
    pub cnn: CnnConfig,
    pub train: TrainConfig,
    pub funnel: FunnelConfig,
    pub sim: SimConfig,
    pub search: BhsConfig,
    pub depths: Vec<usize>,
    /// Renders the search objective trains on, benchmark images excluded.
    pub search_images: usize,
    pub search_train: TrainConfig,
    pub ccm_controls: usize,
    pub sigmas: Vec<f64>,
}

impl PipelineConfig {
    /// Minutes on one core.
    pub fn desk() -> Self {
        let sim = SimConfig::desk();
        Self {
            preset: "desk".into(),
            dataset: DatasetConfig {
                pairs: (sim.a1_images + sim.veridical_images).div_ceil(2),
                render: RenderConfig {
                    size: 128,
                    ..RenderConfig::default()
                },
                ..DatasetConfig::default()
            },
            externals: sim.b1_images,
            ps: PsConfig::default(),
            shallow: ShallowConfig::default(),
            cnn: CnnConfig {
                batch_size: 32,
                ..CnnConfig::default()
            },
            train: TrainConfig {
                max_epochs: 10,
                ..TrainConfig::default()
            },
            funnel: FunnelConfig::desk(),
            sim,
            search: BhsConfig {
                iterations: 3,
                initial: 2,
                starts: 64,
                ascent_steps: 10,
                kernel_steps: 30,
                ..BhsConfig::default()
            },
            depths: vec![1, 2],
            search_images: 400,
            search_train: TrainConfig {
                max_epochs: 2,
                patience: 1,
                ..TrainConfig::default()
            },
            ccm_controls: 5,
            sigmas: DEFAULT_SIGMAS.to_vec(),
        }
    }

    /// Full-size rounds and search budgets; days of compute.
    pub fn paper() -> Self {
        let sim = SimConfig::paper();
        Self {
            preset: "paper".into(),
            dataset: DatasetConfig {
                pairs: (sim.a1_images + sim.veridical_images).div_ceil(2),
                ..DatasetConfig::default()
            },
            externals: sim.b1_images,
            cnn: CnnConfig::default(),
            train: TrainConfig::default(),
            funnel: FunnelConfig::paper(),
            sim,
            search: BhsConfig::default(),
            depths: (1..=12).collect(),
            search_images: 20_000,
            search_train: TrainConfig::default(),
            ccm_controls: 100,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            _ => Err(Error::invalid(format!("unknown pipeline preset `{name}`"))),
        }
    }

    /// Copy with every stage seed derived from `seed`.
    pub fn seeded(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.dataset.seed = rng::derive_str(seed, "synthgen");
        c.shallow.cv.seed = rng::derive_str(seed, "shallow");
        c.search.seed = rng::derive_str(seed, "search");
        c.search.deterministic = true;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub stage: String,
    pub sha256: String,
    pub bytes: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub preset: String,
    pub seed: u64,
    pub config_hash: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Digest over every artifact digest, in path order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.path.as_bytes());
            h.update([0]);
            h.update(e.sha256.as_bytes());
            h.update(*b"\n");
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub colorhist_accuracy: f64,
    pub ps_accuracy: f64,
    pub cnn_accuracy: f64,
    pub funnel: StageCounts,
    pub decorrelation: f64,
    pub flagged_raters: usize,
    pub sweep: Vec<SweepRow>,
    pub best_depth: Option<usize>,
    /// Correlation of each model RDM with the human RDM.
    pub rdm_correlations: BTreeMap<String, f64>,
    pub mds: MdsResult,
    pub noise: NoiseCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub manifest: Manifest,
    pub summary: PipelineSummary,
    pub set: DiagnosticSet,
}

fn hash_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(v)?)))
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("pipeline stage {name}");
    f().map_err(|e| e.at_stage(name))
}

struct Artifacts {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    fn add(&mut self, stage: &str, rel: &str, config_hash: &str) -> Result<()> {
        let bytes = fs::read(self.root.join(rel))?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            stage: stage.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
            config_hash: config_hash.to_string(),
        });
        Ok(())
    }

    fn write(&mut self, stage: &str, rel: &str, data: &[u8], config_hash: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, data)?;
        self.add(stage, rel, config_hash)
    }

    fn json<T: Serialize>(&mut self, stage: &str, rel: &str, v: &T, h: &str) -> Result<()> {
        let mut data = serde_json::to_vec_pretty(v)?;
        data.push(b'\n');
        self.write(stage, rel, &data, h)
    }

    fn dir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        fs::create_dir_all(&p)?;
        Ok(p)
    }
}

/// Empirical quantile of each value, `(rank + 0.5) / n`, ties by position.
fn quantiles(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        q[i] = (rank as f64 + 0.5) / v.len() as f64;
    }
    q
}

/// Logistic regression on z-scored rows of `train`, applied to `apply`.
fn fit_predict(
    table: &FeatureTable,
    labels: &HashMap<String, u8>,
    train: &HashSet<&str>,
    apply: &[&str],
    cfg: &LogRegConfig,
) -> Result<Vec<f64>> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (id, row) in table.image_ids.iter().zip(&table.rows) {
        if let (true, Some(&y)) = (train.contains(id.as_str()), labels.get(id)) {
            xs.push(row.clone());
            ys.push(y);
        }
    }
    let z = zscore_fit(&xs)?;
    let model = logreg_train(&z.apply_all(&xs)?, &ys, cfg)?;
    apply
        .iter()
        .map(|id| {
            let row = table
                .row(id)
                .ok_or_else(|| Error::NotFound(format!("features of {id}")))?;
            model.predict(&z.apply(row)?)
        })
        .collect()
}

/// Simulated observers perceive the held-out color-histogram cue. A
/// render's latent is the quantile of its cross-validated score among
/// renders of its own class, so both classes span the whole scale as the
/// illusory and veridical pools need. An external's latent is the quantile
/// of a model fit on all renders; its recognizability rises with
/// luminance contrast among externals of its bin.
fn cue_population(
    renders: &[Stimulus],
    externals: &[Stimulus],
    colorhist: &FeatureTable,
    cv_scores: &HashMap<String, f64>,
    labels: &HashMap<String, u8>,
    logreg: &LogRegConfig,
) -> Result<Population> {
    let raw: Vec<f64> = renders
        .iter()
        .map(|s| {
            cv_scores
                .get(&s.entry.image_id)
                .copied()
                .ok_or_else(|| Error::NotFound(format!("score of {}", s.entry.image_id)))
        })
        .collect::<Result<_>>()?;
    let train: HashSet<&str> = renders.iter().map(|s| s.entry.image_id.as_str()).collect();
    let ext_ids: Vec<&str> = externals
        .iter()
        .map(|s| s.entry.image_id.as_str())
        .collect();
    let ext_scores = fit_predict(colorhist, labels, &train, &ext_ids, logreg)?;
    let contrast: Vec<f64> = ext_ids
        .iter()
        .map(|id| colorhist.row(id).map_or(0.0, |r| r[1]))
        .collect();
    let mut latent = vec![0.0; renders.len()];
    for m in [Material::Mirror, Material::Glass] {
        let idx: Vec<usize> = (0..renders.len())
            .filter(|&i| renders[i].entry.material == m)
            .collect();
        let q = quantiles(&idx.iter().map(|&i| raw[i]).collect::<Vec<_>>());
        for (&i, q) in idx.iter().zip(q) {
            latent[i] = q;
        }
    }
    let renders = renders
        .iter()
        .zip(latent)
        .map(|(s, q)| LatentImage {
            image_id: s.entry.image_id.clone(),
            material: s.entry.material,
            latent: q,
            recognizability: 1.0,
        })
        .collect();
    // Contrast ranks are taken within each latent bin so that screening
    // thins every bin alike.
    let ext_latent = quantiles(&ext_scores);
    let mut recog = vec![0.0; ext_ids.len()];
    for b in 1..=BINS as u8 {
        let idx: Vec<usize> = (0..ext_ids.len())
            .filter(|&i| bin_assign(ext_latent[i]).ok() == Some(b))
            .collect();
        let q = quantiles(&idx.iter().map(|&i| contrast[i]).collect::<Vec<_>>());
        for (&i, q) in idx.iter().zip(q) {
            recog[i] = 0.2 + 0.8 * q;
        }
    }
    let externals = ext_ids
        .iter()
        .zip(ext_latent.into_iter().zip(recog))
        .map(|(id, (q, c))| LatentImage {
            image_id: id.to_string(),
            material: Material::Unknown,
            latent: q,
            recognizability: c,
        })
        .collect();
    Ok(Population { renders, externals })
}

/// Run every stage under `out` and write `out/manifest.json`.
pub fn pipeline(config: &PipelineConfig, seed: u64, out: &Path) -> Result<PipelineRun> {
    let cfg = config.seeded(seed);
    fs::create_dir_all(out)?;
    let mut art = Artifacts {
        root: out.to_path_buf(),
        entries: Vec::new(),
    };

    // synthgen
    let h_syn = hash_json(&(&cfg.dataset, cfg.externals))?;
    let (renders, externals) = stage("synthgen", || {
        let renders = generate(&cfg.dataset)?;
        let externals = generate_external(&cfg.dataset, cfg.externals)?;
        let entries: Vec<_> = renders.iter().map(|s| s.entry.clone()).collect();
        check_pairing(&entries)?;
        let all: Vec<Stimulus> = renders.iter().chain(&externals).cloned().collect();
        write_dataset(&art.dir("dataset")?, &all)?;
        for s in &all {
            art.add("synthgen", &format!("dataset/{}", s.entry.path), &h_syn)?;
        }
        art.add("synthgen", "dataset/manifest.jsonl", &h_syn)?;
        Ok((renders, externals))
    })?;
    let labels: HashMap<String, u8> = renders
        .iter()
        .filter_map(|s| {
            s.entry
                .material
                .label()
                .map(|l| (s.entry.image_id.clone(), l))
        })
        .collect();
    let by_id: HashMap<&str, &Image> = renders
        .iter()
        .chain(&externals)
        .map(|s| (s.entry.image_id.as_str(), &s.image))
        .collect();

    // features
    let h_feat = hash_json(&cfg.ps)?;
    let (colorhist, ps) = stage("features", || {
        let images = || {
            renders
                .iter()
                .chain(&externals)
                .map(|s| (s.entry.image_id.as_str(), &s.image))
        };
        let colorhist = FeatureKind::ColorHist.extract_all(images())?;
        let ps = FeatureKind::Ps(cfg.ps).extract_all(images())?;
        art.dir("features")?;
        for (name, t) in [("colorhist", &colorhist), ("ps", &ps)] {
            let rel = format!("features/{name}.mgft");
            t.write(&out.join(&rel))?;
            art.add("features", &rel, &h_feat)?;
            art.add("features", &format!("{rel}.json"), &h_feat)?;
        }
        Ok((colorhist, ps))
    })?;

    // shallow
    let h_sh = hash_json(&cfg.shallow)?;
    let (ch_eval, ps_eval) = stage("shallow", || {
        let none = HashSet::new();
        let ch = crossval_scores(&colorhist, &labels, &none, "colorhist", &cfg.shallow)?;
        let ps = crossval_scores(&ps, &labels, &none, "ps", &cfg.shallow)?;
        art.dir("shallow")?;
        for e in [&ch, &ps] {
            let rel = format!("shallow/{}_scores.jsonl", e.scores[0].classifier_id);
            write_scores(&out.join(&rel), &e.scores)?;
            art.add("shallow", &rel, &h_sh)?;
        }
        Ok((ch, ps))
    })?;

    // cnn
    let h_cnn = hash_json(&(&cfg.cnn, &cfg.train))?;
    let render_set = ImageSet::new(
        &renders.iter().map(|s| &s.image).collect::<Vec<_>>(),
        renders
            .iter()
            .map(|s| s.entry.material.label().unwrap_or(0))
            .collect(),
    )?;
    let cnn_accuracy = stage("cnn", || {
        let s = rng::derive_str(seed, "cnn");
        let (mut model, test) = train_on_split(&cfg.cnn, &cfg.train, &render_set, s)?;
        let test_set = render_set.subset(&test);
        let acc = accuracy(&score_set(&mut model, &test_set)?, &test_set.labels);
        art.dir("cnn")?;
        model.save(&out.join("cnn/model.bin"))?;
        art.add("cnn", "cnn/model.bin", &h_cnn)?;
        art.json(
            "cnn",
            "cnn/training.json",
            &serde_json::json!({
                "test_accuracy": acc,
                "test_ids": test.iter().map(|&i| &renders[i].entry.image_id).collect::<Vec<_>>(),
                "history": model.history,
            }),
            &h_cnn,
        )?;
        Ok(acc)
    })?;

    // funnel
    let h_fun = hash_json(&(&cfg.funnel, &cfg.sim))?;
    let (run, flagged) = stage("funnel", || {
        let cv: HashMap<String, f64> = ch_eval
            .scores
            .iter()
            .map(|p| (p.image_id.clone(), p.score))
            .collect();
        let pop = cue_population(
            &renders,
            &externals,
            &colorhist,
            &cv,
            &labels,
            &cfg.shallow.logreg,
        )?;
        let s = rng::derive_str(seed, "funnel");
        let sim = simulate(&pop, &cfg.funnel, &cfg.sim, s)?;
        let catch_round = RoundConfig {
            round_id: crate::funnel::config::ROUND_A2.into(),
            task: Task::Rate5,
            images: Vec::new(),
            duration_ms: 1000,
            trials_per_image: 1,
            catch: vec![
                CatchTrial {
                    image_id: CATCH_MIRROR.into(),
                    expected: Material::Mirror,
                },
                CatchTrial {
                    image_id: CATCH_GLASS.into(),
                    expected: Material::Glass,
                },
            ],
            raters_required: cfg.sim.a2_workers,
            seed: 0,
        };
        let flagged = flagged_raters(&sim.records, [&catch_round]);
        let run = run_funnel(&sim.records, &sim.catalog, &cfg.funnel, &flagged, s)?;
        art.dir("funnel/images")?;
        write_records(&out.join("funnel/records.jsonl"), &sim.records)?;
        art.add("funnel", "funnel/records.jsonl", &h_fun)?;
        art.json("funnel", "funnel/diagnostic_set.json", &run.set, &h_fun)?;
        art.json("funnel", "funnel/counts.json", &run.counts, &h_fun)?;
        for e in &run.set.entries {
            let rel = format!("funnel/images/{}.png", e.image_id);
            by_id[e.image_id.as_str()].write_png(&out.join(&rel))?;
            art.add("funnel", &rel, &h_fun)?;
        }
        // A live rating round over the benchmark, served by `serve`.
        let live = RoundConfig {
            round_id: "benchmark".into(),
            task: Task::Rate5,
            images: run.set.entries.iter().map(|e| e.image_id.clone()).collect(),
            duration_ms: 1000,
            trials_per_image: 1,
            catch: Vec::new(),
            raters_required: cfg.funnel.n_required,
            seed: rng::derive_str(seed, "live"),
        };
        art.json("funnel", "funnel/rounds.json", &[live], &h_fun)?;
        Ok((run, flagged))
    })?;
    let set_ids: Vec<&str> = run
        .set
        .entries
        .iter()
        .map(|e| e.image_id.as_str())
        .collect();
    let human: Vec<f64> = run.set.entries.iter().map(|e| e.mean_score).collect();
    let benchmark = ImageSet::new(
        &set_ids.iter().map(|id| by_id[id]).collect::<Vec<_>>(),
        // Labels of benchmark images are never read.
        run.set
            .entries
            .iter()
            .map(|e| u8::from(e.true_class == TrueClass::Mirror))
            .collect(),
    )?;

    // search
    let h_search = hash_json(&(
        &cfg.search,
        &cfg.depths,
        cfg.search_images,
        &cfg.search_train,
    ))?;
    let (sweep, objective) = stage("search", || {
        let in_set: HashSet<&str> = set_ids.iter().copied().collect();
        let train_idx: Vec<usize> = renders
            .iter()
            .enumerate()
            .filter(|(_, s)| !in_set.contains(s.entry.image_id.as_str()))
            .map(|(i, _)| i)
            .take(cfg.search_images)
            .collect();
        check_exclusion(
            set_ids.iter().copied(),
            train_idx
                .iter()
                .map(|&i| renders[i].entry.image_id.as_str()),
        )?;
        let objective = CnnObjective::new(
            render_set.subset(&train_idx),
            benchmark.clone(),
            human.clone(),
            cfg.search_train,
            rng::derive_str(seed, "objective"),
        )?;
        let sweep = depth_sweep(&HyperparamSpace::default(), &cfg.depths, &cfg.search, |c| {
            objective.evaluate(c)
        })?;
        art.write(
            "search",
            "search/depth_sweep.csv",
            sweep.to_csv().as_bytes(),
            &h_search,
        )?;
        let mut lines = Vec::new();
        for t in &sweep.traces {
            for o in &t.observations {
                lines.extend(serde_json::to_vec(o)?);
                lines.push(b'\n');
            }
        }
        art.write("search", "search/traces.jsonl", &lines, &h_search)?;
        Ok((sweep, objective))
    })?;

    // rsa
    let h_rsa = hash_json(&(cfg.ccm_controls, &cfg.sigmas))?;
    let (rdm_correlations, mds, noise) = stage("rsa", || {
        let train: HashSet<&str> = renders
            .iter()
            .map(|s| s.entry.image_id.as_str())
            .filter(|id| !set_ids.contains(id))
            .collect();
        let best = sweep
            .rows
            .iter()
            .filter(|r| r.best_config.is_some())
            .max_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
            .and_then(|r| r.best_config)
            .unwrap_or(cfg.cnn);
        let (mut model, _, _) = objective.fit(&best, objective.seed)?;
        let cnn_scores = score_set(&mut model, &benchmark)?;
        let names: Vec<String> = set_ids.iter().map(|s| s.to_string()).collect();
        let mut rdms: Vec<(String, Rdm)> =
            vec![("human".into(), rdm_from_scores(names.clone(), &human)?)];
        for (name, table) in [("colorhist", &colorhist), ("ps", &ps)] {
            let s = fit_predict(table, &labels, &train, &set_ids, &cfg.shallow.logreg)?;
            rdms.push((name.into(), rdm_from_scores(names.clone(), &s)?));
        }
        rdms.push(("cnn".into(), rdm_from_scores(names.clone(), &cnn_scores)?));
        let mut corr = BTreeMap::new();
        art.dir("rsa")?;
        for (name, r) in &rdms {
            if name != "human" {
                // A constant model output has no defined correlation.
                corr.insert(name.clone(), correlate_rdms(&rdms[0].1, r).unwrap_or(0.0));
            }
            let rel = format!("rsa/rdm_{name}.bin");
            r.write(&out.join(&rel), &serde_json::json!({ "model": name }))?;
            art.add("rsa", &rel, &h_rsa)?;
            art.add("rsa", &format!("{rel}.json"), &h_rsa)?;
        }
        let second = ccm(&rdms, cfg.ccm_controls, rng::derive_str(seed, "ccm"))?;
        second.write(&out.join("rsa/ccm.bin"), &serde_json::json!({}))?;
        art.add("rsa", "rsa/ccm.bin", &h_rsa)?;
        art.add("rsa", "rsa/ccm.bin.json", &h_rsa)?;
        let mds = classical_mds(&second.data, second.n, 2)?;
        art.json("rsa", "rsa/mds.json", &mds, &h_rsa)?;
        let images: Vec<Image> = set_ids.iter().map(|id| by_id[id].clone()).collect();
        let noise = noise_robustness(
            |imgs| {
                let set = ImageSet::new(&imgs.iter().collect::<Vec<_>>(), vec![0; imgs.len()])?;
                score_set(&mut model, &set)
            },
            &images,
            &cfg.sigmas,
            &human,
            rng::derive_str(seed, "noise"),
        )?;
        art.write("rsa", "rsa/noise.csv", noise.to_csv().as_bytes(), &h_rsa)?;
        Ok((corr, mds, noise))
    })?;

    let summary = PipelineSummary {
        colorhist_accuracy: ch_eval.cv.mean_accuracy(),
        ps_accuracy: ps_eval.cv.mean_accuracy(),
        cnn_accuracy,
        funnel: run.counts,
        decorrelation: run.set.decorrelation,
        flagged_raters: flagged.len(),
        best_depth: sweep.best_depth(),
        sweep: sweep.rows.clone(),
        rdm_correlations,
        mds,
        noise,
    };
    art.json("pipeline", "summary.json", &summary, &hash_json(&cfg)?)?;
    let mut entries = art.entries;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        preset: cfg.preset.clone(),
        seed,
        config_hash: hash_json(&cfg)?,
        entries,
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(PipelineRun {
        manifest,
        summary,
        set: run.set,
    })
}
