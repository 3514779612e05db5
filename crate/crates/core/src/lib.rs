//! Video-to-humanoid motion pipeline.
//!
//! A task instruction and a third-person scene image go in; a stream of
//! fixed-layout robot command frames comes out. The stages are:
//!
//! * [`planner`] builds the structured prompt documents and parses the
//!   model's action-chain paragraphs,
//! * [`gateway`] talks to the generative services, caches their artifacts
//!   in a content-addressed store and keeps the latency ledger,
//! * [`estimation`] turns a generated clip into body, hand and grasp-state
//!   streams (or synthesizes them analytically in oracle mode),
//! * [`motion`] holds those streams and the temporal operations on them,
//! * [`bridge`] converts the assembled motion into executor frames,
//! * [`sim`] kinematically replays a frame stream and classifies failures,
//! * [`pipeline`] runs everything as a resumable staged job.
//!
//! Data-parallel inner loops go through [`exec`]; with the `parallel`
//! feature disabled they run sequentially.

pub mod bridge;
pub mod estimation;
pub mod exec;
pub mod gateway;
pub mod kv;
pub mod motion;
pub mod pipeline;
pub mod planner;
pub mod sim;
pub mod validation;

pub use exec::Exec;
pub use validation::{ValidationIssue, ValidationReport};
