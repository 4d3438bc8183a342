//! Desk-scale numerical workbench for twin-beam quantum imaging with a
//! single-pixel camera.
//!
//! The crate models a squeezed-light source as a grid of quantum-correlated
//! coherence areas, predicts intensity-difference noise under arbitrary
//! binary masks, simulates rastered and compressive single-pixel
//! acquisition with sub-shot-noise measurement noise, and reconstructs
//! images by total-variation minimization with equality or l2-ball
//! constraints.
//!
//! Start with the runnable examples (`cargo run --example ...`), one per
//! capability:
//!
//! - `mask_sweep`: squeezing versus seed-beam structure
//! - `spinning_cross`: noise reduction versus mask rotation angle
//! - `line_raster`: rastered-line noise figures across the beam
//! - `squeezing_spectrum`: synthetic spectrum-analyzer traces
//! - `sensing_matrices`: scrambled block Hadamard construction and masks
//! - `compressive_imaging`: end-to-end single-pixel acquisition + recovery
//! - `quantum_advantage`: measured noise variance, quantum vs classical
//! - `monte_carlo_check`: sampling oracle against the analytic model

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod image;
pub mod noise;
pub mod pgm;
pub mod reconstruct;
pub mod sampling;
pub mod source;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::{mask_transmission, CoherenceGrid, GridCell};
pub use image::{phantoms, BeamImage, BinaryMask, DEFAULT_PITCH_UM};
pub use noise::{
    compose_loss, monte_carlo_nrf, predicted_squeezing_single_mode, NoiseFigure, NoiseModel,
    NrfVariant,
};
pub use source::{build_twin_pair, lowpass_fourier, SourceConfig, TwinBeamPair};
pub use spectrum::{simulate_spectrum, Spectrum, SpectrumConfig};
