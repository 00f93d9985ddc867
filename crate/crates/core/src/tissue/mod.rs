//! Geometric and optical description of phantoms and abdominal tissue.

mod builders;
mod config;
mod media;
mod scene;
mod voxel;

pub use builders::{
    build_abdomen_scene, build_absorber_scene, build_phantom_scene, build_porcine_scene,
    AbdomenConfig, BladderSpec, LiquidSide, PhantomConfig, PorcineConfig,
};
pub use config::{SceneConfig, ScenePreset};
pub use media::{
    water_mu_a, AbsorptionSpectrum, ChromophoreTable, MediaLibrary, MediumSpec, OpticalMedium,
    DEFAULTS_ENV,
};
pub use scene::{
    Crossing, Fill, Inclusion, Layer, MediumId, SceneOffset, Shape, Surface, TissueScene, MAX_MEDIA,
};
pub use voxel::VoxelGrid;
