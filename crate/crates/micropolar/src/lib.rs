//! Core library (under construction).

pub mod diagnostics;
pub mod dynamics;
pub mod fft;
pub mod galerkin;
pub mod field;
pub mod grid;
pub mod la;
pub mod params;
pub mod product;
pub mod rigidity;
pub mod snapshot;
pub mod spectrum;
pub mod state;
