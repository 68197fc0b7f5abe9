use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mirrorglass::cnn::{CnnModel, ImageSet};
use mirrorglass::expserve::{self, flagged_raters, load_rounds, PipelineConfig, ServeConfig};
use mirrorglass::features::{FeatureKind, FeatureTable, PsConfig};
use mirrorglass::funnel::{
    read_records, run_funnel, simulate, synthetic_population, write_records, Catalog, FunnelConfig,
    SimConfig,
};
use mirrorglass::rng;
use mirrorglass::rsa::{
    ccm, classical_mds, noise_robustness, rdm_from_scores, ttest, Rdm, TTestMode, DEFAULT_SIGMAS,
};
use mirrorglass::search::{maximize, toy_objective, validate_config, BhsConfig, Outcome};
use mirrorglass::shallow::{crossval_scores, read_scores, write_scores, ShallowConfig};
use mirrorglass::synthgen::dataset::{load_stimuli, read_manifest, write_dataset};
use mirrorglass::synthgen::{generate, generate_external, DatasetConfig, RenderConfig};

#[derive(Parser)]
#[command(
    name = "mirrorglass",
    version,
    about = "Mirror/glass perception workbench"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a paired mirror/glass dataset plus unlabeled externals.
    Synthgen {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        externals: usize,
        /// Render side before the 64 px resize.
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract a feature table for every image of a dataset manifest.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated logistic regression on a feature table.
    Shallow {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pca: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Rsa(RsaCmd),
    #[command(subcommand)]
    Search(SearchCmd),
    #[command(subcommand)]
    Funnel(FunnelCmd),
    /// Serve rounds to live raters.
    Serve {
        #[arg(long)]
        rounds: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Run every stage and write an artifact manifest.
    Pipeline {
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Colorhist,
    Ps,
}

#[derive(Subcommand)]
enum RsaCmd {
    /// RDM from prediction scores (one classifier).
    Rdm {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Second-order matrix over several RDMs.
    Ccm {
        #[arg(long, required = true, num_args = 2..)]
        rdms: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        controls: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classical scaling of a dissimilarity matrix.
    Mds {
        #[arg(long)]
        rdm: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
    /// Correlation of a saved CNN with reference scores under pixel noise.
    Noise {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Prediction-score file holding the reference per image.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// t-test between two comma-separated samples.
    Ttest {
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        b: Vec<f64>,
        #[arg(long)]
        paired: bool,
    },
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 60)]
    iterations: usize,
    #[arg(long, default_value_t = 11)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum SearchCmd {
    /// Search the analytic toy objective and print the trace.
    Run(ToyArgs),
    /// Independent toy searches over several seeds.
    Sweep {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Repeat a toy search from fresh seeds and report mean and sd.
    Validate {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long, default_value_t = 5)]
        instances: usize,
    },
}

#[derive(Subcommand)]
enum FunnelCmd {
    /// Replay the selection rounds over a record store.
    Run {
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long)]
        records: PathBuf,
        /// JSON map of image id to material.
        #[arg(long)]
        catalog: PathBuf,
        /// Rounds file whose catch trials flag raters to leave out.
        #[arg(long)]
        exclude_flagged: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulated raters over a synthetic population.
    Simulate {
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Lab raters per image in A3, veridical and B rounds.
        #[arg(long)]
        raters: Option<usize>,
        /// Lab rater noise.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for records.jsonl and catalog.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Fails early with the path named, since io errors from the core omit it.
fn input(p: &Path) -> Result<&Path> {
    if !p.exists() {
        bail!("{}: no such file or directory", p.display());
    }
    Ok(p)
}

fn labels_of(manifest: &Path) -> Result<HashMap<String, u8>> {
    Ok(read_manifest(input(manifest)?)?
        .into_iter()
        .filter_map(|e| e.material.label().map(|l| (e.image_id, l)))
        .collect())
}

fn toy(args: &ToyArgs, seed: u64) -> mirrorglass::Result<(Vec<f64>, f64)> {
    let mut r = rng::rng_for(seed, "toy-centre");
    let centre: Vec<f64> = (0..args.dims)
        .map(|_| rand::Rng::random::<f64>(&mut r))
        .collect();
    let cfg = BhsConfig {
        iterations: args.iterations,
        seed,
        ..BhsConfig::default()
    };
    let trace = maximize(
        args.dims,
        &cfg,
        |u| u.to_vec(),
        |_, u| Ok(Outcome::value(toy_objective(u, &centre))),
    )?;
    let mut best = f64::NEG_INFINITY;
    let curve = trace
        .iter()
        .map(|(_, _, y, _)| {
            best = best.max(*y);
            best
        })
        .collect();
    Ok((curve, best))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synthgen {
            pairs,
            externals,
            size,
            seed,
            out,
        } => {
            let cfg = DatasetConfig {
                pairs,
                render: RenderConfig {
                    size,
                    ..RenderConfig::default()
                },
                seed,
                ..DatasetConfig::default()
            };
            let mut all = generate(&cfg)?;
            all.extend(generate_external(&cfg, externals)?);
            let m = write_dataset(&out, &all)?;
            println!("{} images, manifest {}", all.len(), m.display());
        }
        Cmd::Features {
            manifest,
            kind,
            out,
        } => {
            let stimuli = load_stimuli(input(&manifest)?)?;
            let kind = match kind {
                Kind::Colorhist => FeatureKind::ColorHist,
                Kind::Ps => FeatureKind::Ps(PsConfig::default()),
            };
            let t = kind.extract_all(
                stimuli
                    .iter()
                    .map(|s| (s.entry.image_id.as_str(), &s.image)),
            )?;
            t.write(&out)?;
            println!("{} rows x {} dims", t.rows.len(), t.n_dims());
        }
        Cmd::Shallow {
            features,
            manifest,
            pca,
            seed,
            out,
        } => {
            let table = FeatureTable::read(input(&features)?)?;
            let mut cfg = ShallowConfig {
                pca_threshold: pca,
                ..ShallowConfig::default()
            };
            cfg.cv.seed = seed;
            let ev = crossval_scores(
                &table,
                &labels_of(&manifest)?,
                &HashSet::new(),
                &table.schema_id,
                &cfg,
            )?;
            write_scores(&out, &ev.scores)?;
            println!(
                "accuracy {:.4} over {} images ({} dims)",
                ev.cv.mean_accuracy(),
                ev.image_ids.len(),
                ev.dims_used
            );
        }
        Cmd::Rsa(c) => rsa(c)?,
        Cmd::Search(c) => match c {
            SearchCmd::Run(a) => {
                let (curve, best) = toy(&a, a.seed)?;
                for (i, b) in curve.iter().enumerate() {
                    println!("{i}\t{b}");
                }
                println!("best {best}");
            }
            SearchCmd::Sweep { toy: a, runs } => {
                for k in 0..runs as u64 {
                    let (_, best) = toy(&a, rng::derive(a.seed, k))?;
                    println!("run {k}\tbest {best}");
                }
            }
            SearchCmd::Validate { toy: a, instances } => {
                let v = validate_config(instances, a.seed, |_, s| toy(&a, s).map(|t| t.1))?;
                print_json(&v)?;
            }
        },
        Cmd::Funnel(c) => funnel(c)?,
        Cmd::Serve {
            rounds,
            records,
            images,
            port,
        } => {
            let mut cfg = ServeConfig::from_env()?;
            cfg.rounds = rounds.unwrap_or(cfg.rounds);
            cfg.records = records.unwrap_or(cfg.records);
            cfg.images = images.unwrap_or(cfg.images);
            cfg.port = port.unwrap_or(cfg.port);
            tokio::runtime::Runtime::new()?.block_on(expserve::serve(&cfg, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
        }
        Cmd::Pipeline { preset, seed, out } => {
            let run = expserve::pipeline(&PipelineConfig::preset(&preset)?, seed, &out)?;
            print_json(&run.summary)?;
            println!(
                "{} artifacts, digest {}",
                run.manifest.entries.len(),
                run.manifest.digest()
            );
        }
    }
    Ok(())
}

fn rsa(c: RsaCmd) -> Result<()> {
    match c {
        RsaCmd::Rdm { scores, out } => {
            let s = read_scores(input(&scores)?)?;
            let names = s.iter().map(|p| p.image_id.clone()).collect();
            let v: Vec<f64> = s.iter().map(|p| p.score).collect();
            let id = s.first().map_or("", |p| p.classifier_id.as_str());
            rdm_from_scores(names, &v)?.write(&out, &serde_json::json!({ "model": id }))?;
        }
        RsaCmd::Ccm {
            rdms,
            controls,
            seed,
            out,
        } => {
            let named = rdms
                .iter()
                .map(|p| {
                    let stem = p.file_stem().unwrap_or_default().to_string_lossy();
                    Ok((stem.into_owned(), Rdm::read(input(p)?)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let m = ccm(&named, controls, seed)?;
            m.write(&out, &serde_json::json!({ "controls": controls }))?;
            print!("{}", m.to_csv());
        }
        RsaCmd::Mds { rdm, dims } => {
            let r = Rdm::read(input(&rdm)?)?;
            print_json(&classical_mds(&r.data, r.n, dims)?)?;
        }
        RsaCmd::Noise {
            model,
            manifest,
            reference,
            seed,
        } => {
            let mut m = CnnModel::load(input(&model)?)?;
            let refs: BTreeMap<String, f64> = read_scores(input(&reference)?)?
                .into_iter()
                .map(|p| (p.image_id, p.score))
                .collect();
            let (images, reference): (Vec<_>, Vec<f64>) = load_stimuli(input(&manifest)?)?
                .into_iter()
                .filter_map(|s| refs.get(&s.entry.image_id).map(|&r| (s.image, r)))
                .unzip();
            if images.is_empty() {
                bail!("no manifest image has a reference score");
            }
            let curve = noise_robustness(
                |imgs| {
                    let set = ImageSet::new(&imgs.iter().collect::<Vec<_>>(), vec![0; imgs.len()])?;
                    mirrorglass::cnn::score_set(&mut m, &set)
                },
                &images,
                &DEFAULT_SIGMAS,
                &reference,
                seed,
            )?;
            print!("{}", curve.to_csv());
        }
        RsaCmd::Ttest { a, b, paired } => {
            let mode = if paired {
                TTestMode::Paired
            } else {
                TTestMode::TwoSample
            };
            print_json(&ttest(&a, &b, mode)?)?;
        }
    }
    Ok(())
}

fn funnel(c: FunnelCmd) -> Result<()> {
    match c {
        FunnelCmd::Run {
            preset,
            records,
            catalog,
            exclude_flagged,
            out,
            seed,
        } => {
            let cfg = FunnelConfig::preset(&preset)?;
            let recs = read_records(input(&records)?)?;
            let cat: Catalog = serde_json::from_slice(&std::fs::read(input(&catalog)?)?)?;
            let excluded = match exclude_flagged {
                Some(p) => flagged_raters(&recs, &load_rounds(input(&p)?)?),
                None => BTreeSet::new(),
            };
            let run = run_funnel(&recs, &cat, &cfg, &excluded, seed)?;
            std::fs::write(&out, serde_json::to_vec_pretty(&run.set)?)?;
            print_json(&run.counts)?;
            println!(
                "per bin {:?}, point-biserial r {:.4}, {} raters excluded",
                run.set.per_bin,
                run.set.decorrelation,
                excluded.len()
            );
        }
        FunnelCmd::Simulate {
            preset,
            raters,
            sigma,
            seed,
            out,
        } => {
            let cfg = FunnelConfig::preset(&preset)?;
            let mut sim = match preset.as_str() {
                "paper" => SimConfig::paper(),
                _ => SimConfig::desk(),
            };
            if let Some(n) = raters {
                sim.a3_raters = n;
                sim.veridical_raters = n;
                sim.b1_raters = n;
                sim.b2_raters = n;
            }
            if let Some(s) = sigma {
                sim.sigma_lab = s;
            }
            let pop =
                synthetic_population(sim.a1_images + sim.veridical_images, sim.b1_images, seed);
            let s = simulate(&pop, &cfg, &sim, seed)?;
            std::fs::create_dir_all(&out)?;
            write_records(&out.join("records.jsonl"), &s.records)?;
            std::fs::write(
                out.join("catalog.json"),
                serde_json::to_vec_pretty(&s.catalog)?,
            )?;
            println!("{} records in {}", s.records.len(), out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or(expserve::server::ENV_LOG, "info"),
    )
    .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
