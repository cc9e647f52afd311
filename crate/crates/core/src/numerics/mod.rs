//! Dense matrix math with hand-derived gradients, a parameter store, Adam, and
//! a central-difference gradient checker.

pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod ops;
pub mod optim;
pub mod params;
pub mod rng;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckOptions, GradCheckReport};
pub use layers::{Dense, Mlp, MlpTrace};
pub use matrix::Matrix;
pub use ops::{affine, relu, scaled_dot_attention, softmax_rows};
pub use optim::{Adam, Optimizer, OptimizerKind};
pub use params::{GradBuffer, Param, ParamId, ParamStore};
pub use rng::SeededRng;
