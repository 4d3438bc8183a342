//! Run configuration: layered `key = value` text files with strict
//! unknown-key rejection, so a typo cannot silently miscalibrate a run.

use std::fs;
use std::path::Path;

use crate::acquisition::{AcquisitionConfig, AcquisitionMode};
use crate::error::{Error, Result};
use crate::image::DEFAULT_PITCH_UM;
use crate::noise::NrfVariant;
use crate::source::SourceConfig;

/// Environment variable naming a default config file.
pub const CONFIG_ENV_VAR: &str = "TWINBEAM_CONFIG";

#[derive(Debug, Clone)]
pub struct SamplingConfig {
    pub n: usize,
    pub block_size: usize,
    pub m: usize,
    pub seed: u64,
    pub window: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            block_size: 32,
            m: 300,
            seed: 1,
            window: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// l2 residual budget; `None` derives it from the acquisition noise
    /// budget.
    pub epsilon: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            tolerance: 1e-5,
            max_iterations: 5000,
        }
    }
}

/// Full calibration of a run. The defaults reproduce the documented
/// bench calibration: gain 4, 4.5 dB source ceiling, 3 cells per beam
/// diameter, 0.6 micromirror transmission in the detection path, block
/// size 32, solver tolerance 1e-5 with a 5000-iteration cap.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub variant: NrfVariant,
    pub cells_per_diameter: usize,
    /// Zero-order diffraction transmission of each detection-path
    /// micromirror device; applies to raster and probe-stage sweeps.
    pub dmd_transmission: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub pitch_um: f64,
    /// 1/e^2 beam radius in pixels; `None` derives it from the probe waist
    /// and the pitch.
    pub beam_radius_px: Option<f64>,
    pub acquisition: AcquisitionConfig,
    pub sampling: SamplingConfig,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            variant: NrfVariant::Standard,
            cells_per_diameter: 3,
            dmd_transmission: 0.6,
            image_width: 128,
            image_height: 128,
            pitch_um: DEFAULT_PITCH_UM,
            beam_radius_px: None,
            acquisition: AcquisitionConfig::default(),
            sampling: SamplingConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn beam_radius_px(&self) -> f64 {
        self.beam_radius_px
            .unwrap_or(self.source.probe_waist_um / self.pitch_um)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.acquisition.validate()?;
        if self.cells_per_diameter == 0 {
            return Err(Error::invalid("grid.cells_per_diameter must be >= 1"));
        }
        if !(self.dmd_transmission > 0.0 && self.dmd_transmission <= 1.0) {
            return Err(Error::invalid("detection.dmd_transmission must be in (0, 1]"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::invalid("geometry dimensions must be positive"));
        }
        if !(self.pitch_um > 0.0) {
            return Err(Error::invalid("geometry.pitch_um must be positive"));
        }
        if !(self.beam_radius_px() > 0.0) {
            return Err(Error::invalid("geometry.beam_radius_px must be positive"));
        }
        if self.sampling.n == 0 || self.sampling.m == 0 || self.sampling.block_size == 0 {
            return Err(Error::invalid("sampling parameters must be positive"));
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            return Err(Error::invalid("solver parameters out of range"));
        }
        if let Some(eps) = self.solver.epsilon {
            if !(eps >= 0.0) {
                return Err(Error::invalid("solver.epsilon must be >= 0"));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::invalid(format!("bad value '{value}' for {what}"));
        let f = || value.parse::<f64>().map_err(|_| bad(key));
        let u = || value.parse::<usize>().map_err(|_| bad(key));
        let u64v = || value.parse::<u64>().map_err(|_| bad(key));
        match key {
            "source.gain" => self.source.gain = f()?,
            "source.probe_waist_um" => self.source.probe_waist_um = f()?,
            "source.pump_waist_um" => self.source.pump_waist_um = f()?,
            "source.max_squeezing_db" => self.source.max_squeezing_db = f()?,
            "source.angular_beam_diameter_mrad" => {
                self.source.angular_beam_diameter_mrad = f()?
            }
            "source.coherence_area_angle_mrad" => self.source.coherence_area_angle_mrad = f()?,
            "source.mode_count" => self.source.mode_count = u()? as u32,
            "source.pump_cutoff_scale" => self.source.pump_cutoff_scale = f()?,
            "noise.variant" => self.variant = NrfVariant::parse(value)?,
            "grid.cells_per_diameter" => self.cells_per_diameter = u()?,
            "detection.dmd_transmission" => self.dmd_transmission = f()?,
            "geometry.width" => self.image_width = u()?,
            "geometry.height" => self.image_height = u()?,
            "geometry.pitch_um" => self.pitch_um = f()?,
            "geometry.beam_radius_px" => self.beam_radius_px = Some(f()?),
            "acquisition.mode" => self.acquisition.mode = AcquisitionMode::parse(value)?,
            "acquisition.photons_per_exposure" => {
                self.acquisition.photons_per_exposure =
                    if value == "inf" { f64::INFINITY } else { f()? }
            }
            "acquisition.dark_noise_variance" => self.acquisition.dark_noise_variance = f()?,
            "acquisition.rng_seed" => self.acquisition.rng_seed = u64v()?,
            "acquisition.exposures_per_row" => {
                self.acquisition.exposures_per_row = u()? as u32
            }
            "acquisition.nrf_db" => {
                self.acquisition.nrf_override = Some(10f64.powf(f()? / 10.0))
            }
            "sampling.n" => self.sampling.n = u()?,
            "sampling.block_size" => self.sampling.block_size = u()?,
            "sampling.m" => self.sampling.m = u()?,
            "sampling.seed" => self.sampling.seed = u64v()?,
            "sampling.window" => self.sampling.window = u()?,
            "solver.epsilon" => self.solver.epsilon = Some(f()?),
            "solver.tolerance" => self.solver.tolerance = f()?,
            "solver.max_iterations" => self.solver.max_iterations = u()?,
            other => {
                return Err(Error::invalid(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parses config text on top of the current values. Lines are
    /// `key = value`; `#` starts a comment; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_calibration() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.source.gain, 4.0);
        assert_eq!(cfg.source.max_squeezing_db, 4.5);
        assert_eq!(cfg.cells_per_diameter, 3);
        assert_eq!(cfg.sampling.block_size, 32);
        assert_eq!(cfg.solver.tolerance, 1e-5);
        assert_eq!(cfg.solver.max_iterations, 5000);
        assert_eq!(cfg.variant, NrfVariant::Standard);
        assert!((cfg.beam_radius_px() - 450.0 / DEFAULT_PITCH_UM).abs() < 1e-12);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_layered_text() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\n\
             source.gain = 5.5\n\
             noise.variant = paper-corrected  # trailing comment\n\
             sampling.m = 200\n",
        )
        .unwrap();
        assert_eq!(cfg.source.gain, 5.5);
        assert_eq!(cfg.variant, NrfVariant::PaperCorrected);
        assert_eq!(cfg.sampling.m, 200);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("source.gian = 4\n").unwrap_err();
        assert!(err.to_string().contains("unknown config key"), "{err}");
    }

    #[test]
    fn bad_value_is_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("source.gain = fast\n").is_err());
        assert!(cfg.apply_text("just a line\n").is_err());
    }

    #[test]
    fn nrf_db_override_converts_to_linear() {
        let mut cfg = RunConfig::default();
        cfg.set("acquisition.nrf_db", "-3.1").unwrap();
        let nrf = cfg.acquisition.nrf_override.unwrap();
        assert!((nrf - 10f64.powf(-0.31)).abs() < 1e-12);
    }
}
