//! Modal EM: mode finding on a Gaussian mixture density and clustering of
//! points by the mode their ascent converges to.
//!
//! Each point `z` is moved by alternating
//!
//! - an E-step, `zeta_k = tau_k phi(z; eta_k, Gamma_k) / f(z)`, and
//! - a closed-form M-step proposal
//!   `z* = (sum_k zeta_k Gamma_k^{-1})^{-1} sum_k zeta_k Gamma_k^{-1} eta_k`,
//!
//! then taking the damped step `z <- (1 - w_t) z + w_t z*` with
//! `w_t = 1 - exp(-c t)`. The density never decreases along the iterates;
//! [`mem_ascend`] checks that at every step and reports a fault otherwise.

mod ascent;
mod merge;

pub use ascent::{
    m_step_gradient, m_step_objective, mem_ascend, mem_proposal, step_size, Ascent, MemConfig,
};
pub use merge::{map_assign, merge_modes, modal_cluster, ModalDocument, ModalResult};
