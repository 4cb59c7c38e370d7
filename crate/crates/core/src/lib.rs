//! Secure multibiometric template protection at desk scale.
//!
//! The protected pipeline never stores a biometric or a key: enrollment
//! selects template bits with a user-held key, quantizes them through a
//! shortened Reed-Solomon code into a secure sketch, and persists only the
//! sketch's SHA-256 digest. Authentication repeats the derivation and
//! grants on digest equality. Revocation reissues the key.
//!
//! Alongside the pipeline live the evaluation layers: a synthetic feature
//! model, verification/linkability/leakage analyses, and a small two-stage
//! hashing-network trainer used to produce binary codes end to end.

pub mod analysis;
pub mod bits;
pub mod deephash;
pub mod feature;
pub mod gf256;
pub mod pipeline;
pub mod rs;

pub use feature::{BitChannelModel, FeatureVector, SubjectPopulation};
pub use gf256::Gf256;
pub use pipeline::{
    CancelableTemplate, Decision, SecureSketch, SecureTemplate, TemplateStore, UserKey,
};
pub use rs::{RsCode, RsCodeParams, RsError};
