//! Dense-tensor kernels with exact reverse-mode gradients, the Adam
//! optimizer, feed-forward and message-passing encoders, and
//! finite-difference gradient verification. Everything is 64-bit and
//! deterministic under fixed seeds on a single thread.

mod adam;
mod checkpoint;
mod fd;
mod mlp;
mod mpnn;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, load_model, save_checkpoint, save_model, Checkpoint};
pub use fd::{finite_diff_check, FdReport};
pub use mlp::{mlp_apply, mlp_forward, mlp_leaves, mlp_to_tape, MlpParams, MlpVars};
pub use mpnn::{message_passing_encode, mpnn_to_tape, GraphInput, MpnnParams, MpnnVars};
pub use tape::{Tape, Var};
pub use tensor::DenseTensor;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Glorot-uniform draw in (-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> DenseTensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
    DenseTensor { shape: (rows, cols), values }
}

/// Scalar loss plus exact gradients for an arbitrary tape program. The
/// closure builds the loss from leaves registered on the tape.
pub fn loss_and_grad<F>(
    params: &[DenseTensor],
    build: F,
) -> Result<(f64, Vec<DenseTensor>), NumError>
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Var, NumError>,
{
    let mut tape = Tape::new();
    let leaves: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = build(&mut tape, &leaves)?;
    let value = tape.value(loss).item();
    let grads = tape.backward(loss, &leaves)?;
    Ok((value, grads))
}
