//! Logo recognition from scratch: selective-search style region proposals, a
//! small CNN classifying each proposal as one of the logo classes or
//! background, and an image-level decision by max-pooling over proposals with
//! a calibrated confidence threshold. Also: dataset layout, training presets
//! and ablations, evaluation metrics, duplicate screening and a synthetic
//! benchmark generator.
//!
//! Numeric code is generic over [`nncore::Scalar`] (`f32` or `f64`); the
//! aliases below name the two instantiations.

pub mod cli;
pub mod datamodel;
pub mod dedup;
pub mod evalkit;
pub mod inference;
pub mod logonet;
pub mod nncore;
pub mod proposals;
pub mod synthbench;
pub mod trainer;

pub type Tensor32 = nncore::Tensor<f32>;
pub type Tensor64 = nncore::Tensor<f64>;
pub type LogoNet32 = logonet::LogoNet<f32>;
pub type LogoNet64 = logonet::LogoNet<f64>;
pub type Model32 = logonet::Model<f32>;
pub type Model64 = logonet::Model<f64>;
pub type TrainingSet32 = trainer::TrainingSet<f32>;
pub type TrainingSet64 = trainer::TrainingSet<f64>;
