//! Synthetic spectrum-analyzer traces.
//!
//! Reproduces the look of a swept-sideband noise measurement: flat at the
//! configured noise figure across the squeezing band, technical noise rising
//! below the band, and per-point measurement jitter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::NoiseFigure;

#[derive(Debug, Clone)]
pub struct SpectrumConfig {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    /// Analyzer resolution bandwidth, recorded as metadata.
    pub resolution_bandwidth_hz: f64,
    /// Analyzer video bandwidth, recorded as metadata.
    pub video_bandwidth_hz: f64,
    /// Lower edge of the squeezing band; technical noise rolls up below it.
    pub band_low_hz: f64,
    /// Upper edge of the squeezing band.
    pub band_high_hz: f64,
    /// Technical-noise slope below the band, dB per decade.
    pub rollup_db_per_decade: f64,
    /// Per-point measurement jitter, dB standard deviation; 0 disables it.
    pub jitter_sigma_db: f64,
    pub rng_seed: u64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            start_hz: 50e3,
            stop_hz: 5e6,
            points: 401,
            resolution_bandwidth_hz: 20e3,
            video_bandwidth_hz: 3e3,
            band_low_hz: 50e3,
            band_high_hz: 5e6,
            rollup_db_per_decade: 20.0,
            jitter_sigma_db: 0.1,
            rng_seed: 0,
        }
    }
}

impl SpectrumConfig {
    pub fn without_jitter(mut self) -> Self {
        self.jitter_sigma_db = 0.0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub frequency_hz: f64,
    /// Noise power in dB relative to the shot-noise limit.
    pub noise_db: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
}

impl Spectrum {
    pub fn mean_db(&self) -> f64 {
        self.points.iter().map(|p| p.noise_db).sum::<f64>() / self.points.len() as f64
    }
}

/// Synthesizes a swept noise trace for a given noise figure.
///
/// In-band points sit at the figure's dB value; below `band_low_hz` the
/// trace rises by `rollup_db_per_decade`. Jitter adds independent Gaussian
/// deviations per point, deterministic for a fixed seed.
pub fn simulate_spectrum(nf: &NoiseFigure, cfg: &SpectrumConfig) -> Result<Spectrum> {
    if !(cfg.start_hz > 0.0) || cfg.stop_hz <= cfg.start_hz {
        return Err(Error::invalid("frequency range must be positive"));
    }
    if cfg.points < 2 {
        return Err(Error::invalid("a spectrum needs at least 2 points"));
    }
    let base_db = nf.value_db();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let step = (cfg.stop_hz - cfg.start_hz) / (cfg.points - 1) as f64;
    let mut points = Vec::with_capacity(cfg.points);
    for i in 0..cfg.points {
        let f = cfg.start_hz + step * i as f64;
        let mut db = base_db;
        if f < cfg.band_low_hz {
            db += cfg.rollup_db_per_decade * (cfg.band_low_hz / f).log10();
        }
        if cfg.jitter_sigma_db > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            db += cfg.jitter_sigma_db * z;
        }
        points.push(SpectrumPoint {
            frequency_hz: f,
            noise_db: db,
        });
    }
    Ok(Spectrum { points })
}
