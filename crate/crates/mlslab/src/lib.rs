pub mod disk;
pub mod error;
pub mod experiments;
pub mod homotopy;
pub mod linalg;
pub mod models;
pub mod tensors;
pub mod solver;
pub mod xray;

pub use disk::Mobius;
