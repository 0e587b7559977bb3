//! Data pipeline: image stacks, normalization, splitting, patch sampling,
//! and the synthetic domain-shift benchmark.

pub mod dihedral;
pub mod io;
pub mod sample;
pub mod stack;
pub mod synth;

pub use io::{load_stack, save_stack, save_stack_tiff};
pub use sample::{sample_batch, TrainBatch};
pub use stack::{normalize, split_target_x, ImageStack, UnlabeledStack};
pub use synth::{synth_domains, SynthConfig, TargetShift, TextureSpec};
