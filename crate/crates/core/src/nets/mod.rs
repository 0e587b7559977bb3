//! Network components: shared encoder, segmentation decoder with skips,
//! skip-free reconstruction decoder, and two patch discriminators.

pub mod bundle;
pub mod checkpoint;
pub mod disc;
pub mod generator;
pub mod layers;

pub use bundle::{build_bundle, ArchConfig, FullOutputs, GeOutputs, Group, NetworkBundle};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, LoadedCheckpoint};
pub use disc::PatchDiscriminator;
pub use generator::{Encoder, EncoderOut, RecDecoder, SegDecoder};
pub use layers::{Conv2d, ConvBlock, InstanceNorm, LeakyRelu, MaxPool2, Param, Sigmoid, Upsample2};
