//! Building blocks for studying how small learning machines generalize
//! across large unknown regions of a 2D input space.
//!
//! The crate provides:
//!
//! - synthetic image-regression benchmarks (dashed lines and circles on a
//!   64x64 brightness grid) with a training mask that withholds a large
//!   contiguous region ([`builtin`], [`scene`], [`grid`]);
//! - a from-scratch tanh feedforward network trained by seeded online
//!   backpropagation with weight decay ([`mlp`]);
//! - introspection of the trained network: generalization surfaces on
//!   pixel grids and the zero-output lines of first-hidden-layer neurons
//!   ([`introspect`]);
//! - a from-scratch nu-SVC with an RBF kernel as a comparison baseline
//!   ([`svm`]);
//! - region-wise MSE metrics and comparison tables ([`metrics`]);
//! - bit-exact binary PGM I/O for every rendered figure ([`pgm`]).
//!
//! Everything is deterministic: all randomness flows through the seeded
//! [`rng::Rng`], and equal inputs produce byte-identical outputs.

pub mod builtin;
pub mod grid;
pub mod introspect;
pub mod metrics;
pub mod mlp;
pub mod pgm;
pub mod rng;
pub mod scene;
pub mod svm;

pub use builtin::{builtin_dataset, builtin_mask, theta_c_scene, theta_l_scene, BuiltinData};
pub use grid::{
    brightness_to_byte, byte_to_brightness, pixel_to_coords, split_by_mask, ImageGrid, Mask,
    Sample, SampleSet,
};
pub use introspect::{
    distance_to_training_map, eval_grid, first_layer_zero_lines, render_zero_lines, Line2D,
    Viewport,
};
pub use metrics::{compare_report, masked_mse, nu_property_report, RegionReport};
pub use mlp::{
    backprop_step, forward, init_network, init_network_uniform, load_network, loss_gradient,
    save_network, train, NetworkParams, NetworkSpec, TrainConfig,
};
pub use pgm::{load_pgm, save_pgm};
pub use rng::Rng;
pub use scene::{render_scene, SceneSpec};
pub use svm::{binarize, decision_grid, load_model, rbf_kernel, save_model, solve_nu_svc, NuSvcConfig, SvmModel};
