pub mod cli;
pub mod datagen;
pub mod diffcore;
pub mod eval;
pub mod featio;
pub mod geometry;
pub mod matrix;
pub mod models;
pub mod pipeline;

pub use matrix::Matrix;
