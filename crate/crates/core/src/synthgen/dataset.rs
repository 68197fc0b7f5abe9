//! Paired mirror/glass stimulus sets and their JSON Lines manifest.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::camera::{sample_camera_with_fov, DEFAULT_FOV_DEG};
use super::env::EnvironmentMap;
use super::render::{render, tonemap_resize, MaterialClass, MaterialSpec, RenderConfig};
use super::shape::{SceneShape, ShapeKind};
use crate::error::{Error, Result};
use crate::image::{Image, ImageStage};
use crate::rng;

pub const STIMULUS_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Render,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Mirror,
    Glass,
    Unknown,
}

impl Material {
    /// Classification label: glass 0, mirror 1.
    pub fn label(self) -> Option<u8> {
        match self {
            Material::Mirror => Some(1),
            Material::Glass => Some(0),
            Material::Unknown => None,
        }
    }
}

impl From<MaterialClass> for Material {
    fn from(c: MaterialClass) -> Self {
        match c {
            MaterialClass::Mirror => Material::Mirror,
            MaterialClass::Glass => Material::Glass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifestEntry {
    pub image_id: String,
    pub path: String,
    pub source: Source,
    pub material: Material,
    pub pair_id: Option<String>,
    pub shape_id: Option<String>,
    pub env_id: Option<String>,
    pub camera_seed: Option<u64>,
}

/// One manifest entry with its 64x64 display image.
#[derive(Debug, Clone)]
pub struct Stimulus {
    pub entry: DatasetManifestEntry,
    pub image: Image,
}

/// Build the manifest entries of a mirror/glass pair sharing shape and
/// illumination but seen from two different camera seeds.
pub fn make_pair(
    shape_id: &str,
    env_id: &str,
    seed: u64,
) -> (DatasetManifestEntry, DatasetManifestEntry) {
    let pair_id = format!("pair-{seed:016x}");
    let mirror_seed = rng::derive(seed, 0);
    let mut glass_seed = rng::derive(seed, 1);
    if glass_seed == mirror_seed {
        glass_seed = glass_seed.wrapping_add(1);
    }
    let entry = |material: Material, camera_seed: u64, tag: &str| {
        let image_id = format!("{pair_id}-{tag}");
        DatasetManifestEntry {
            path: format!("images/{image_id}.png"),
            image_id,
            source: Source::Render,
            material,
            pair_id: Some(pair_id.clone()),
            shape_id: Some(shape_id.to_owned()),
            env_id: Some(env_id.to_owned()),
            camera_seed: Some(camera_seed),
        }
    };
    (
        entry(Material::Mirror, mirror_seed, "m"),
        entry(Material::Glass, glass_seed, "g"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvSource {
    /// This many procedural skies.
    Procedural(usize),
    /// Loaded from `.pfm` / `.png` files.
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub pairs: usize,
    pub shape_kinds: Vec<ShapeKind>,
    pub shape_count: usize,
    pub envs: EnvSource,
    pub env_height: usize,
    pub render: RenderConfig,
    pub fov_deg: f64,
    pub seed: u64,
    /// Image ids screened out by hand; the whole pair is dropped.
    pub exclude: Vec<String>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            pairs: 100,
            shape_kinds: vec![
                ShapeKind::Sphere,
                ShapeKind::Superellipsoid,
                ShapeKind::Union,
            ],
            shape_count: 24,
            envs: EnvSource::Procedural(12),
            env_height: 128,
            render: RenderConfig::default(),
            fov_deg: DEFAULT_FOV_DEG,
            seed: 0,
            exclude: Vec::new(),
        }
    }
}

/// Shapes and illuminations addressable by id.
pub struct SceneLibrary {
    pub shapes: Vec<(String, SceneShape)>,
    pub envs: Vec<(String, EnvironmentMap)>,
}

impl SceneLibrary {
    pub fn build(config: &DatasetConfig) -> Result<Self> {
        if config.shape_kinds.is_empty() || config.shape_count == 0 {
            return Err(Error::invalid("at least one shape is required"));
        }
        let shapes = (0..config.shape_count)
            .map(|i| {
                let kind = config.shape_kinds[i % config.shape_kinds.len()];
                let seed = rng::derive(rng::derive_str(config.seed, "shapes"), i as u64);
                (format!("shape-{i:04}"), SceneShape::random(kind, seed))
            })
            .collect();
        let envs = match &config.envs {
            EnvSource::Procedural(0) => {
                return Err(Error::invalid("at least one environment is required"))
            }
            EnvSource::Procedural(n) => (0..*n)
                .map(|i| {
                    let seed = rng::derive(rng::derive_str(config.seed, "envs"), i as u64);
                    (
                        format!("env-{i:04}"),
                        EnvironmentMap::procedural(seed, config.env_height),
                    )
                })
                .collect(),
            EnvSource::Files(paths) => {
                if paths.is_empty() {
                    return Err(Error::invalid("at least one environment is required"));
                }
                paths
                    .iter()
                    .map(|p| {
                        let id = p
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_else(|| p.display().to_string());
                        Ok((id, EnvironmentMap::load(p)?))
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(Self { shapes, envs })
    }

    fn shape(&self, id: &str) -> Result<&SceneShape> {
        self.shapes
            .iter()
            .find(|(s, _)| s == id)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::NotFound(format!("shape {id}")))
    }

    fn env(&self, id: &str) -> Result<&EnvironmentMap> {
        self.envs
            .iter()
            .find(|(s, _)| s == id)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::NotFound(format!("environment {id}")))
    }
}

/// Render the HDR image for a render-sourced manifest entry.
pub fn render_entry(
    lib: &SceneLibrary,
    entry: &DatasetManifestEntry,
    config: &DatasetConfig,
) -> Result<Image> {
    let (Some(shape_id), Some(env_id), Some(cam_seed)) =
        (&entry.shape_id, &entry.env_id, entry.camera_seed)
    else {
        return Err(Error::invalid(format!(
            "{} is not a render entry",
            entry.image_id
        )));
    };
    let class = match entry.material {
        Material::Mirror => MaterialClass::Mirror,
        Material::Glass => MaterialClass::Glass,
        Material::Unknown => return Err(Error::invalid("render entries need a material")),
    };
    let camera = sample_camera_with_fov(cam_seed, config.fov_deg);
    render(
        lib.shape(shape_id)?,
        lib.env(env_id)?,
        &MaterialSpec::for_class(class),
        &camera,
        &config.render,
    )
}

/// Plan the manifest for `config.pairs` pairs without rendering anything.
pub fn plan_pairs(config: &DatasetConfig, lib: &SceneLibrary) -> Vec<DatasetManifestEntry> {
    let excluded: HashSet<&str> = config.exclude.iter().map(String::as_str).collect();
    let mut r = rng::rng_for(config.seed, "pairs");
    let mut entries = Vec::with_capacity(config.pairs * 2);
    for i in 0..config.pairs {
        let shape_idx = r.random_range(0..lib.shapes.len());
        let env_idx = r.random_range(0..lib.envs.len());
        let seed = rng::derive(rng::derive_str(config.seed, "pair-seeds"), i as u64);
        let (m, g) = make_pair(&lib.shapes[shape_idx].0, &lib.envs[env_idx].0, seed);
        if excluded.contains(m.image_id.as_str()) || excluded.contains(g.image_id.as_str()) {
            continue;
        }
        entries.push(m);
        entries.push(g);
    }
    entries
}

/// Render a full paired dataset in memory.
pub fn generate(config: &DatasetConfig) -> Result<Vec<Stimulus>> {
    let lib = SceneLibrary::build(config)?;
    plan_pairs(config, &lib)
        .into_iter()
        .map(|entry| {
            let hdr = render_entry(&lib, &entry, config)?;
            let image = tonemap_resize(&hdr, STIMULUS_SIZE)?;
            Ok(Stimulus { entry, image })
        })
        .collect()
}

/// Unlabeled, deliberately ambiguous images standing in for an external
/// generator: an HDR blend of the mirror and glass renderings of one scene
/// from one viewpoint.
pub fn generate_external(config: &DatasetConfig, count: usize) -> Result<Vec<Stimulus>> {
    let lib = SceneLibrary::build(config)?;
    let mut r = rng::rng_for(config.seed, "external");
    (0..count)
        .map(|i| {
            let shape = &lib.shapes[r.random_range(0..lib.shapes.len())].1;
            let env = &lib.envs[r.random_range(0..lib.envs.len())].1;
            let alpha: f32 = r.random_range(0.0..1.0);
            let cam = sample_camera_with_fov(r.random(), config.fov_deg);
            let m = render(shape, env, &MaterialSpec::mirror(), &cam, &config.render)?;
            let g = render(shape, env, &MaterialSpec::glass(), &cam, &config.render)?;
            let data = m
                .data
                .iter()
                .zip(&g.data)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect();
            let hdr = Image::from_data(m.width, m.height, ImageStage::Linear, data)?;
            let image_id = format!("ext-{:016x}-{i:05}", config.seed);
            Ok(Stimulus {
                entry: DatasetManifestEntry {
                    path: format!("images/{image_id}.png"),
                    image_id,
                    source: Source::External,
                    material: Material::Unknown,
                    pair_id: None,
                    shape_id: None,
                    env_id: None,
                    camera_seed: None,
                },
                image: tonemap_resize(&hdr, STIMULUS_SIZE)?,
            })
        })
        .collect()
}

pub fn write_manifest(path: &Path, entries: &[DatasetManifestEntry]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<DatasetManifestEntry>> {
    let f = BufReader::new(File::open(path)?);
    let mut out: Vec<DatasetManifestEntry> = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    let mut seen = HashSet::new();
    for e in &out {
        if !seen.insert(e.image_id.as_str()) {
            return Err(Error::format(
                path,
                format!("duplicate image_id {}", e.image_id),
            ));
        }
    }
    Ok(out)
}

/// Write PNGs under `out/images/` and `out/manifest.jsonl`.
pub fn write_dataset(out: &Path, stimuli: &[Stimulus]) -> Result<PathBuf> {
    fs::create_dir_all(out.join("images"))?;
    for s in stimuli {
        s.image.write_png(&out.join(&s.entry.path))?;
    }
    let manifest = out.join("manifest.jsonl");
    let entries: Vec<_> = stimuli.iter().map(|s| s.entry.clone()).collect();
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

/// Load the display images listed in a manifest, relative to its directory.
pub fn load_stimuli(manifest: &Path) -> Result<Vec<Stimulus>> {
    let root = manifest.parent().unwrap_or_else(|| Path::new("."));
    read_manifest(manifest)?
        .into_iter()
        .map(|entry| {
            let image = Image::read_png(&root.join(&entry.path))?;
            Ok(Stimulus { entry, image })
        })
        .collect()
}

/// Check the pairing contract: each render mirror shares pair, shape and
/// environment with exactly one glass entry seen from a different camera.
pub fn check_pairing(entries: &[DatasetManifestEntry]) -> Result<()> {
    use std::collections::HashMap;
    let mut by_pair: HashMap<&str, Vec<&DatasetManifestEntry>> = HashMap::new();
    for e in entries.iter().filter(|e| e.source == Source::Render) {
        let pid = e
            .pair_id
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("{} has no pair_id", e.image_id)))?;
        by_pair.entry(pid).or_default().push(e);
    }
    for (pid, members) in by_pair {
        let m: Vec<_> = members
            .iter()
            .filter(|e| e.material == Material::Mirror)
            .collect();
        let g: Vec<_> = members
            .iter()
            .filter(|e| e.material == Material::Glass)
            .collect();
        if members.len() != 2 || m.len() != 1 || g.len() != 1 {
            return Err(Error::invalid(format!(
                "pair {pid} is not one mirror + one glass"
            )));
        }
        let (m, g) = (m[0], g[0]);
        if m.shape_id != g.shape_id || m.env_id != g.env_id || m.camera_seed == g.camera_seed {
            return Err(Error::invalid(format!(
                "pair {pid} violates the pairing contract"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_differs_in_material_and_camera_only() {
        let (m, g) = make_pair("shape-0001", "env-0002", 42);
        assert_eq!(m.pair_id, g.pair_id);
        assert_eq!(m.shape_id, g.shape_id);
        assert_eq!(m.env_id, g.env_id);
        assert_eq!(m.source, g.source);
        assert_ne!(m.material, g.material);
        assert_ne!(m.camera_seed, g.camera_seed);
        assert_ne!(m.image_id, g.image_id);
    }

    #[test]
    fn thousand_pairs_are_unique() {
        let cfg = DatasetConfig {
            pairs: 1000,
            ..Default::default()
        };
        let lib = SceneLibrary::build(&cfg).unwrap();
        let entries = plan_pairs(&cfg, &lib);
        let pairs: HashSet<_> = entries.iter().map(|e| e.pair_id.clone()).collect();
        let ids: HashSet<_> = entries.iter().map(|e| e.image_id.clone()).collect();
        assert_eq!(pairs.len(), 1000);
        assert_eq!(ids.len(), 2000);
        check_pairing(&entries).unwrap();
    }

    #[test]
    fn small_dataset_is_balanced_and_pairs_differ() {
        let cfg = DatasetConfig {
            pairs: 6,
            shape_count: 3,
            envs: EnvSource::Procedural(2),
            env_height: 32,
            render: RenderConfig {
                size: 64,
                ..Default::default()
            },
            ..Default::default()
        };
        let stimuli = generate(&cfg).unwrap();
        assert_eq!(stimuli.len(), 12);
        let mirrors = stimuli
            .iter()
            .filter(|s| s.entry.material == Material::Mirror)
            .count();
        assert_eq!(mirrors, 6);
        for pair in stimuli.chunks(2) {
            assert_ne!(pair[0].image.data, pair[1].image.data);
            assert!(pair.iter().all(|s| s.image.validate().is_ok()));
        }

        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(dir.path(), &stimuli).unwrap();
        let loaded = load_stimuli(&manifest).unwrap();
        assert_eq!(loaded.len(), 12);
        assert_eq!(loaded[3].entry, stimuli[3].entry);
    }

    #[test]
    fn exclusion_drops_whole_pair() {
        let mut cfg = DatasetConfig {
            pairs: 10,
            ..Default::default()
        };
        let lib = SceneLibrary::build(&cfg).unwrap();
        let first = plan_pairs(&cfg, &lib)[0].image_id.clone();
        cfg.exclude = vec![first];
        let entries = plan_pairs(&cfg, &lib);
        assert_eq!(entries.len(), 18);
        check_pairing(&entries).unwrap();
    }
}
