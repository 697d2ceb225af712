//! Desk-scale training substrate: synthetic imbalanced multi-label data,
//! feature-space weak/strong augmentations, a small sigmoid classifier and
//! Adam.

pub mod adam;
pub mod augment;
pub mod data;
pub mod model;

pub use adam::{Adam, AdamConfig};
pub use augment::{augment, AugmentationPolicy, Strength};
pub use data::{generate_dataset, DatasetSpec, Split, SyntheticDataset};
pub use model::ToyClassifier;
