//! Paired mirror/glass stimulus synthesis by analytic ray tracing of
//! procedural shapes under environment illumination.

pub mod camera;
pub mod dataset;
pub mod env;
pub mod optics;
pub mod render;
pub mod shape;
pub mod vec3;

pub use camera::{sample_camera, CameraPose};
pub use dataset::{
    generate, generate_external, make_pair, DatasetConfig, DatasetManifestEntry, EnvSource,
    Material, Source, Stimulus,
};
pub use env::EnvironmentMap;
pub use optics::{fresnel_split, reflect, refract};
pub use render::{render, tonemap_resize, MaterialClass, MaterialSpec, RenderConfig};
pub use shape::{SceneShape, ShapeKind};
pub use vec3::Vec3;
