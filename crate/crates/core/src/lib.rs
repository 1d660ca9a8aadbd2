//! Prototype-based classification head for multi-view embeddings.
//!
//! The library covers the full desk-scale loop: entropic optimal-transport
//! assignment of view embeddings to class prototypes (Sinkhorn-Knopp or
//! APDAGD, selected at runtime), online EMA prototype updates, prototype
//! cross-entropy and view-prototype contrastive losses with analytic
//! gradients, a minimal trainable encoder, synthetic multi-view data
//! generation, and nearest-prototype inference with AIA/ACA evaluation.
//!
//! Entry points:
//! - [`transport`]: the assignment solvers and their registry
//! - [`pool`]: the shared prototype pool (init, EMA, snap, persistence)
//! - [`criterion`]: losses and gradients w.r.t. embeddings
//! - [`encoder`]: linear embedding map with hand-derived backprop and SGD
//! - [`data`]: synthetic datasets and the binary/CSV container formats
//! - [`pipeline`]: training, evaluation, baseline comparison, inspection
//! - [`config`]: `key=value` training configuration

pub(crate) mod linalg;
pub mod transport;
