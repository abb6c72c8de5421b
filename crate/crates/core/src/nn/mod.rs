//! Small dense-network toolkit: ReLU MLPs with analytic reverse-mode
//! gradients, Xavier initialization, Adam and Polyak averaging.

mod adam;
pub mod gradcheck;
mod matrix;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use matrix::Matrix;
pub use mlp::{Dense, ForwardCache, Gradients, Mlp};

use crate::error::{Error, Result};

/// `target <- decay * target + (1 - decay) * online`, elementwise.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, decay: f64) -> Result<()> {
    if target.sizes() != online.sizes() {
        return Err(Error::config("polyak update between networks of different shapes"));
    }
    let keep = 1.0 - decay;
    for (t, o) in target.param_slices_mut().into_iter().zip(online.param_slices()) {
        for (tv, &ov) in t.iter_mut().zip(o) {
            *tv = decay * *tv + keep * ov;
        }
    }
    Ok(())
}
