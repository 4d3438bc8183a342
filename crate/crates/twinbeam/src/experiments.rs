//! Prebuilt bench experiments shared by the command-line tool and the
//! runnable examples: mask sweeps, the rotating-cross sweep, and line
//! rasters, all driven by a [`RunConfig`].

use crate::acquisition::{raster_scan, ConjugateMaskPolicy, Orientation, RasterResult, RasterShape};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::image::{phantoms, BeamImage, BinaryMask};
use crate::noise::{predicted_squeezing_single_mode, NoiseModel};
use crate::source::{build_twin_pair, lowpass_power_fraction, TwinBeamPair};

/// Where a sweep mask sits in the beam path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepStage {
    /// Mask imprinted on the seed before amplification; squeezing degrades
    /// through the pump-overlap filter. No micromirror loss applies: the
    /// twin beams go straight to the balanced detector.
    #[default]
    Seed,
    /// Mask displayed on the probe micromirror device after amplification,
    /// with the conjugate read as an attenuation-balanced bucket; both
    /// arms pay the micromirror diffraction loss.
    Probe,
}

impl SweepStage {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "seed" => Ok(SweepStage::Seed),
            "probe" => Ok(SweepStage::Probe),
            other => Err(Error::invalid(format!(
                "unknown sweep stage '{other}' (expected 'seed' or 'probe')"
            ))),
        }
    }
}

/// One mask's sweep outcome.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    /// Total system transmission of the probe path.
    pub eta: f64,
    /// Single-spatial-mode prediction at that transmission, dB.
    pub predicted_db: f64,
    /// Full coherence-area model, dB.
    pub model_db: f64,
}

/// The default Gaussian beam of a run.
pub fn gaussian_seed(cfg: &RunConfig) -> Result<BeamImage> {
    phantoms::gaussian_beam(
        cfg.image_width,
        cfg.image_height,
        cfg.pitch_um,
        cfg.beam_radius_px(),
    )
}

/// Noise model with the source ceiling folded into the base transmission,
/// plus the micromirror loss when the detection path includes the devices.
pub fn noise_model(cfg: &RunConfig, include_dmd_loss: bool) -> Result<NoiseModel> {
    let model = NoiseModel::new(cfg.source.gain, cfg.variant)?;
    let mut base = model.ceiling_transmission(cfg.source.max_squeezing_db)?;
    if include_dmd_loss {
        base *= cfg.dmd_transmission;
    }
    model.with_base_transmission(base)
}

/// Evaluates one mask at the configured calibration.
pub fn sweep_mask(cfg: &RunConfig, mask: &BinaryMask, stage: SweepStage) -> Result<SweepRow> {
    let beam = gaussian_seed(cfg)?;
    match stage {
        SweepStage::Seed => {
            let seed = mask.apply(&beam)?;
            if seed.total_flux() <= 0.0 {
                return Err(Error::NoLight);
            }
            let fraction = lowpass_power_fraction(&seed, &cfg.source)?;
            let pair = build_twin_pair(&seed, &cfg.source, cfg.cells_per_diameter)?;
            let model = noise_model(cfg, false)?;
            let eta = model.base_transmission() * fraction;
            let cells = pair.cell_fluxes();
            let t = vec![fraction; cells.len()];
            let fig = model.nrf(&cells, &t, &t)?;
            Ok(SweepRow {
                eta,
                predicted_db: predicted_squeezing_single_mode(eta, cfg.source.gain, cfg.variant)?,
                model_db: fig.value_db(),
            })
        }
        SweepStage::Probe => {
            let pair = build_twin_pair(&beam, &cfg.source, cfg.cells_per_diameter)?;
            let (t_probe, eta_mask) = pair.grid.transmissions(&pair.probe, mask)?;
            if eta_mask <= 0.0 {
                return Err(Error::NoLight);
            }
            let model = noise_model(cfg, true)?;
            let cells = pair.cell_fluxes();
            let t_conj = vec![eta_mask; cells.len()];
            let fig = model.nrf(&cells, &t_probe, &t_conj)?;
            let eta = model.base_transmission() * eta_mask;
            Ok(SweepRow {
                eta,
                predicted_db: predicted_squeezing_single_mode(eta, cfg.source.gain, cfg.variant)?,
                model_db: fig.value_db(),
            })
        }
    }
}

/// The rotating-cross mask at a given angle, sized to the run's beam.
pub fn cross_at_angle(cfg: &RunConfig, angle_deg: f64) -> BinaryMask {
    let radius = cfg.beam_radius_px();
    phantoms::cross_mask(
        cfg.image_width,
        cfg.image_height,
        4.0 * radius,
        (radius / 2.0).max(2.0),
        angle_deg,
    )
}

/// Sweeps the cross rotation: one static mask per angle.
pub fn cross_angle_sweep(cfg: &RunConfig, angles: &[f64]) -> Result<Vec<(f64, SweepRow)>> {
    angles
        .iter()
        .map(|&a| Ok((a, sweep_mask(cfg, &cross_at_angle(cfg, a), SweepStage::Seed)?)))
        .collect()
}

/// Default raster line width: half the 1/e^2 beam radius.
pub fn default_line_width_px(cfg: &RunConfig) -> usize {
    ((cfg.beam_radius_px() / 2.0).round() as usize).max(1)
}

/// Default raster positions: the centered line plus three line-width steps
/// to each side.
pub fn default_line_positions(cfg: &RunConfig, width_px: usize, orientation: Orientation) -> Vec<(i64, i64)> {
    let extent = match orientation {
        Orientation::Vertical => cfg.image_width,
        Orientation::Horizontal => cfg.image_height,
    };
    let center = (extent as i64 - width_px as i64) / 2;
    (-3..=3)
        .map(|k| {
            let edge = center + k * width_px as i64;
            match orientation {
                Orientation::Vertical => (edge, 0),
                Orientation::Horizontal => (0, edge),
            }
        })
        .collect()
}

/// Runs the configured line raster over the default Gaussian twin beams.
pub fn line_raster(
    cfg: &RunConfig,
    width_px: usize,
    orientation: Orientation,
    positions: &[(i64, i64)],
    policy: ConjugateMaskPolicy,
) -> Result<(TwinBeamPair, RasterResult)> {
    let beam = gaussian_seed(cfg)?;
    let pair = build_twin_pair(&beam, &cfg.source, cfg.cells_per_diameter)?;
    let model = noise_model(cfg, true)?;
    let shape = RasterShape::Line {
        width_px,
        orientation,
    };
    let result = raster_scan(&pair, &model, shape, positions, policy)?;
    Ok((pair, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_mask_hits_the_source_ceiling() {
        let cfg = RunConfig::default();
        let mask = BinaryMask::ones(cfg.image_width, cfg.image_height);
        let row = sweep_mask(&cfg, &mask, SweepStage::Seed).unwrap();
        assert!(
            (row.model_db - (-4.5)).abs() < 0.01,
            "model {} dB",
            row.model_db
        );
        assert!((row.predicted_db - row.model_db).abs() < 1e-9);
    }

    #[test]
    fn happy_face_squeezes_less_than_uniform() {
        let cfg = RunConfig::default();
        let ones = BinaryMask::ones(cfg.image_width, cfg.image_height);
        let face = phantoms::happy_face_mask(
            cfg.image_width,
            cfg.image_height,
            2.0 * cfg.beam_radius_px(),
        );
        let u = sweep_mask(&cfg, &ones, SweepStage::Seed).unwrap();
        let f = sweep_mask(&cfg, &face, SweepStage::Seed).unwrap();
        assert!(
            f.model_db > u.model_db,
            "face {} vs uniform {}",
            f.model_db,
            u.model_db
        );
        assert!(f.model_db < 0.0);
    }

    #[test]
    fn empty_mask_reports_no_light() {
        let cfg = RunConfig::default();
        let empty = BinaryMask::zeros(cfg.image_width, cfg.image_height);
        assert!(matches!(
            sweep_mask(&cfg, &empty, SweepStage::Seed),
            Err(Error::NoLight)
        ));
    }

    #[test]
    fn probe_stage_mismatch_costs_squeezing() {
        let cfg = RunConfig::default();
        let face = phantoms::happy_face_mask(
            cfg.image_width,
            cfg.image_height,
            2.0 * cfg.beam_radius_px(),
        );
        let row = sweep_mask(&cfg, &face, SweepStage::Probe).unwrap();
        // the multimode model never squeezes more than the single-mode
        // prediction at the same transmission
        assert!(row.model_db >= row.predicted_db - 1e-9);
    }

    #[test]
    fn cross_squeezing_is_angle_stable() {
        let cfg = RunConfig::default();
        let angles: Vec<f64> = (0..=6).map(|k| k as f64 * 15.0).collect();
        let rows = cross_angle_sweep(&cfg, &angles).unwrap();
        let dbs: Vec<f64> = rows.iter().map(|(_, r)| r.model_db).collect();
        let min = dbs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = dbs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max - min < 0.3, "angle spread {} dB", max - min);
        assert!(dbs.iter().all(|&d| d < -2.0), "cross still squeezes: {dbs:?}");
    }
}
