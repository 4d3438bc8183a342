//! Single-pixel camera simulation.
//!
//! A mask on the beam plus one photodiode gives one scalar per exposure.
//! Rastering a shape across the beam maps noise figures position by
//! position; driving the mask with sensing-matrix rows gives compressive
//! measurements y = A x + noise. In quantum mode the differential readout
//! of the twin beams suppresses the measurement noise below the shot-noise
//! limit by the model's noise reduction factor; in classical mode a single
//! beam is read out at the shot-noise limit.
//!
//! Measurement noise is Gaussian, valid at macroscopic photon numbers; the
//! absolute scale is set by `photons_per_exposure` for the full beam flux.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{phantoms, BeamImage, BinaryMask};
use crate::noise::{NoiseFigure, NoiseModel};
use crate::sampling::SensingMatrix;
use crate::source::TwinBeamPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcquisitionMode {
    /// Probe arm only, shot-noise-limited.
    Classical,
    /// Balanced twin-beam differential readout, sub-shot-noise.
    #[default]
    Quantum,
}

impl AcquisitionMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(AcquisitionMode::Classical),
            "quantum" => Ok(AcquisitionMode::Quantum),
            other => Err(Error::invalid(format!(
                "unknown acquisition mode '{other}' (expected 'classical' or 'quantum')"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AcquisitionMode::Classical => "classical",
            AcquisitionMode::Quantum => "quantum",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcquisitionConfig {
    pub mode: AcquisitionMode,
    /// Photon count corresponding to the full beam flux in one exposure;
    /// sets the absolute shot-noise scale. `f64::INFINITY` disables shot
    /// noise.
    pub photons_per_exposure: f64,
    pub dark_noise_variance: f64,
    pub rng_seed: u64,
    /// Exposures averaged per measurement; noise variance divides by this.
    pub exposures_per_row: u32,
    /// When set, quantum-mode noise uses this linear noise reduction factor
    /// for every row instead of evaluating the coherence-area model.
    pub nrf_override: Option<f64>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            mode: AcquisitionMode::Quantum,
            photons_per_exposure: 1e6,
            dark_noise_variance: 0.0,
            rng_seed: 7,
            exposures_per_row: 1,
            nrf_override: None,
        }
    }
}

impl AcquisitionConfig {
    /// Noise-free configuration.
    pub fn noiseless() -> Self {
        Self {
            photons_per_exposure: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.photons_per_exposure > 0.0) {
            return Err(Error::invalid("photons_per_exposure must be positive"));
        }
        if !(self.dark_noise_variance >= 0.0) {
            return Err(Error::invalid("dark_noise_variance must be >= 0"));
        }
        if self.exposures_per_row == 0 {
            return Err(Error::invalid("exposures_per_row must be at least 1"));
        }
        if let Some(nrf) = self.nrf_override {
            if !(nrf > 0.0) {
                return Err(Error::invalid("nrf override must be positive"));
            }
        }
        Ok(())
    }

    /// Shot-noise variance per unit detected flux, given the full-beam flux.
    fn shot_scale(&self, full_flux: f64) -> f64 {
        if self.photons_per_exposure.is_finite() {
            full_flux / self.photons_per_exposure
        } else {
            0.0
        }
    }
}

/// One masked photodiode measurement of a single arm.
///
/// Returns the masked flux plus zero-mean Gaussian noise with variance
/// `shot_scale * detected_flux + dark_noise_variance`, averaged over the
/// configured exposures. Deterministic per (seed, measurement index):
/// measurement `index` draws from its own counter-derived stream.
pub fn single_pixel_measure(
    arm: &BeamImage,
    mask: &BinaryMask,
    cfg: &AcquisitionConfig,
    index: u64,
) -> Result<f64> {
    cfg.validate()?;
    let detected = mask.apply(arm)?.total_flux();
    let variance = cfg.shot_scale(arm.total_flux()) * detected + cfg.dark_noise_variance;
    if variance == 0.0 {
        return Ok(detected);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index.wrapping_add(1));
    let sigma = variance.sqrt();
    let mut acc = 0.0;
    for _ in 0..cfg.exposures_per_row {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += detected + sigma * z;
    }
    Ok(acc / cfg.exposures_per_row as f64)
}

/// Identity of the sensing matrix a measurement vector was taken with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixRef {
    pub n: usize,
    pub block_size: usize,
    pub m: usize,
    pub scramble_seed: u64,
    pub window: usize,
}

impl MatrixRef {
    pub fn of(a: &SensingMatrix) -> Self {
        Self {
            n: a.n(),
            block_size: a.block_size(),
            m: a.m(),
            scramble_seed: a.scramble_seed(),
            window: a.window(),
        }
    }

    pub fn header_line(&self) -> String {
        format!(
            "SBH {} {} {} {} {}",
            self.n, self.block_size, self.m, self.scramble_seed, self.window
        )
    }
}

/// Differential photocurrents for each sensing-matrix row, with the noise
/// budget that produced them.
#[derive(Debug, Clone)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    /// Per-entry noise variance actually applied.
    pub noise_budget: Vec<f64>,
    pub rng_seed: u64,
    pub mode: AcquisitionMode,
    pub matrix_ref: Option<MatrixRef>,
}

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// l2 noise budget: sqrt of the summed per-entry variances.
    pub fn noise_budget_l2(&self) -> f64 {
        self.noise_budget.iter().sum::<f64>().sqrt()
    }

    /// Plain-text export: header `MEAS M seed mode`, then M lines
    /// `index value variance`.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "MEAS {} {} {}", self.len(), self.rng_seed, self.mode.name())?;
        for (i, (v, var)) in self.values.iter().zip(&self.noise_budget).enumerate() {
            writeln!(w, "{} {:.9e} {:.9e}", i, v, var)?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                offset: 0,
                message: "missing MEAS header".into(),
            })?
            .map_err(|e| Error::Parse {
                offset: 0,
                message: e.to_string(),
            })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "MEAS" {
            return Err(Error::Parse {
                offset: 0,
                message: format!("bad header '{header}', expected 'MEAS M seed mode'"),
            });
        }
        let m: usize = fields[1].parse().map_err(|_| Error::Parse {
            offset: 0,
            message: format!("bad measurement count '{}'", fields[1]),
        })?;
        let seed: u64 = fields[2].parse().map_err(|_| Error::Parse {
            offset: 0,
            message: format!("bad seed '{}'", fields[2]),
        })?;
        let mode = AcquisitionMode::parse(fields[3]).map_err(|e| Error::Parse {
            offset: 0,
            message: e.to_string(),
        })?;
        let mut values = Vec::with_capacity(m);
        let mut budget = Vec::with_capacity(m);
        for i in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse {
                    offset: 0,
                    message: format!("expected {m} measurements, file ends after {i}"),
                })?
                .map_err(|e| Error::Parse {
                    offset: 0,
                    message: e.to_string(),
                })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("line {i}: expected 'index value variance'"),
                });
            }
            let idx: usize = parts[0].parse().map_err(|_| Error::Parse {
                offset: 0,
                message: format!("line {i}: bad index '{}'", parts[0]),
            })?;
            if idx != i {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("line {i}: index {idx} out of order"),
                });
            }
            let v: f64 = parts[1].parse().map_err(|_| Error::Parse {
                offset: 0,
                message: format!("line {i}: bad value '{}'", parts[1]),
            })?;
            let var: f64 = parts[2].parse().map_err(|_| Error::Parse {
                offset: 0,
                message: format!("line {i}: bad variance '{}'", parts[2]),
            })?;
            values.push(v);
            budget.push(var);
        }
        Ok(Self {
            values,
            noise_budget: budget,
            rng_seed: seed,
            mode,
            matrix_ref: None,
        })
    }
}

/// Compressive acquisition of the twin-beam probe through a sensing matrix.
///
/// Each row is read out differentially through its complementary mask pair;
/// the noiseless signal is exactly `A x` with x the probe image flattened
/// row-major. Additive noise per entry has variance
/// `SNL_variance * NRF_effective` in quantum mode and `SNL_variance` in
/// classical mode, where the SNL variance corresponds to the full beam flux
/// over the pair of exposures. NRF_effective comes from the override when
/// configured, otherwise from the coherence-area model with the row's mask
/// pair applied to both arms at balanced transmissions.
pub fn compressive_acquire(
    pair: &TwinBeamPair,
    a: &SensingMatrix,
    model: &NoiseModel,
    cfg: &AcquisitionConfig,
) -> Result<MeasurementVector> {
    cfg.validate()?;
    let n_pixels = pair.probe.pixel_count();
    if a.n() != n_pixels {
        return Err(Error::dims(
            format!("sensing matrix over {} pixels", n_pixels),
            format!("{}", a.n()),
        ));
    }
    let x = pair.probe.as_slice();
    let signal = a.apply(x);
    let full_flux = pair.probe.total_flux();
    let snl_variance = cfg.shot_scale(full_flux) * full_flux;
    let cells = pair.cell_fluxes();

    let mut values = Vec::with_capacity(a.m());
    let mut budget = Vec::with_capacity(a.m());
    for (row_index, &clean) in signal.iter().enumerate() {
        let nrf_eff = match cfg.mode {
            AcquisitionMode::Classical => 1.0,
            AcquisitionMode::Quantum => match cfg.nrf_override {
                Some(nrf) => nrf,
                None => row_nrf(pair, a, model, &cells, row_index)?,
            },
        };
        let variance =
            (snl_variance * nrf_eff + cfg.dark_noise_variance) / cfg.exposures_per_row as f64;
        let mut value = clean;
        if variance > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(row_index as u64 + 1);
            let sigma = (variance * cfg.exposures_per_row as f64).sqrt();
            let mut acc = 0.0;
            for _ in 0..cfg.exposures_per_row {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += clean + sigma * z;
            }
            value = acc / cfg.exposures_per_row as f64;
        }
        values.push(value);
        budget.push(variance);
    }
    Ok(MeasurementVector {
        values,
        noise_budget: budget,
        rng_seed: cfg.rng_seed,
        mode: cfg.mode,
        matrix_ref: Some(MatrixRef::of(a)),
    })
}

/// Flux-weighted noise reduction factor of one row's differential readout:
/// both exposures detect the probe and conjugate through the same mask with
/// balanced transmissions, and their variances add.
fn row_nrf(
    pair: &TwinBeamPair,
    a: &SensingMatrix,
    model: &NoiseModel,
    cells: &[(f64, f64)],
    row_index: usize,
) -> Result<f64> {
    let row = a.row(row_index);
    let w = pair.probe.width();
    let h = pair.probe.height();
    let positive = BinaryMask::from_fn(w, h, |x, y| row[y * w + x] > 0);
    let negative = BinaryMask::from_fn(w, h, |x, y| row[y * w + x] < 0);
    let mut variance = 0.0;
    let mut snl = 0.0;
    for mask in [&positive, &negative] {
        if mask.count_on() == 0 {
            continue;
        }
        let (t, _) = pair.grid.transmissions(&pair.probe, mask)?;
        match model.nrf(cells, &t, &t) {
            Ok(fig) => {
                variance += fig.nrf_linear() * fig.shot_noise_reference();
                snl += fig.shot_noise_reference();
            }
            Err(Error::NoLight) => {}
            Err(e) => return Err(e),
        }
    }
    if snl <= 0.0 {
        return Err(Error::NoLight);
    }
    Ok(variance / snl)
}

/// Shape rastered across the beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterShape {
    Line {
        width_px: usize,
        orientation: Orientation,
    },
    Pixel {
        size_px: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Vertical,
    Horizontal,
}

/// Where the conjugate mask sits while the probe mask rasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConjugateMaskPolicy {
    /// Conjugate mask stays centered on its beam.
    #[default]
    FixedCentered,
    /// Conjugate mask follows the probe position reflected through the
    /// image center.
    Mirrored,
}

#[derive(Debug, Clone)]
pub struct RasterResult {
    pub positions: Vec<(i64, i64)>,
    pub figures: Vec<NoiseFigure>,
    /// Accumulated intensity image, filled for pixel rasters.
    pub image: Option<BeamImage>,
}

fn shape_mask(shape: &RasterShape, w: usize, h: usize, pos: (i64, i64)) -> BinaryMask {
    match *shape {
        RasterShape::Line {
            width_px,
            orientation: Orientation::Vertical,
        } => phantoms::vertical_bar_mask(w, h, pos.0, width_px),
        RasterShape::Line {
            width_px,
            orientation: Orientation::Horizontal,
        } => phantoms::horizontal_bar_mask(w, h, pos.1, width_px),
        RasterShape::Pixel { size_px } => BinaryMask::from_fn(w, h, |x, y| {
            let xi = x as i64;
            let yi = y as i64;
            xi >= pos.0 && xi < pos.0 + size_px as i64 && yi >= pos.1 && yi < pos.1 + size_px as i64
        }),
    }
}

fn centered_position(shape: &RasterShape, w: usize, h: usize) -> (i64, i64) {
    match *shape {
        RasterShape::Line { width_px, .. } => (
            (w as i64 - width_px as i64) / 2,
            (h as i64 - width_px as i64) / 2,
        ),
        RasterShape::Pixel { size_px } => (
            (w as i64 - size_px as i64) / 2,
            (h as i64 - size_px as i64) / 2,
        ),
    }
}

fn mirrored_position(shape: &RasterShape, w: usize, h: usize, pos: (i64, i64)) -> (i64, i64) {
    let extent = match *shape {
        RasterShape::Line { width_px, .. } => width_px as i64,
        RasterShape::Pixel { size_px } => size_px as i64,
    };
    (w as i64 - pos.0 - extent, h as i64 - pos.1 - extent)
}

/// Rasters a shape across the probe beam and reports the noise figure at
/// each position.
///
/// The conjugate is masked per the policy with the model's balanced base
/// transmission on both arms. Pixel rasters also accumulate the noiseless
/// masked flux into an intensity image (per-pixel mean over each block).
pub fn raster_scan(
    pair: &TwinBeamPair,
    model: &NoiseModel,
    shape: RasterShape,
    positions: &[(i64, i64)],
    policy: ConjugateMaskPolicy,
) -> Result<RasterResult> {
    if positions.is_empty() {
        return Err(Error::invalid("no raster positions given"));
    }
    match shape {
        RasterShape::Line { width_px, .. } if width_px == 0 => {
            return Err(Error::invalid("line width must be at least 1"))
        }
        RasterShape::Pixel { size_px } if size_px == 0 => {
            return Err(Error::invalid("pixel size must be at least 1"))
        }
        _ => {}
    }
    let w = pair.probe.width();
    let h = pair.probe.height();
    let cells = pair.cell_fluxes();
    let mut figures = Vec::with_capacity(positions.len());
    let mut image = match shape {
        RasterShape::Pixel { .. } => Some(BeamImage::zeros(w, h, pair.probe.pitch_um())?),
        RasterShape::Line { .. } => None,
    };
    for &pos in positions {
        let probe_mask = shape_mask(&shape, w, h, pos);
        let conj_pos = match policy {
            ConjugateMaskPolicy::FixedCentered => centered_position(&shape, w, h),
            ConjugateMaskPolicy::Mirrored => mirrored_position(&shape, w, h, pos),
        };
        let conj_mask = shape_mask(&shape, w, h, conj_pos);
        let flux = probe_mask.apply(&pair.probe)?.total_flux();
        if flux <= 0.0 {
            return Err(Error::NoLight);
        }
        let (t_p, _) = pair.grid.transmissions(&pair.probe, &probe_mask)?;
        let (t_c, _) = pair.grid.transmissions(&pair.conjugate, &conj_mask)?;
        figures.push(model.nrf(&cells, &t_p, &t_c)?);
        if let (Some(img), RasterShape::Pixel { size_px }) = (&mut image, shape) {
            let area = (size_px * size_px) as f64;
            for y in pos.1.max(0)..(pos.1 + size_px as i64).min(h as i64) {
                for x in pos.0.max(0)..(pos.0 + size_px as i64).min(w as i64) {
                    img.set(x as usize, y as usize, flux / area);
                }
            }
        }
    }
    Ok(RasterResult {
        positions: positions.to_vec(),
        figures,
        image,
    })
}

/// Measures an arm block by block with a square raster cell of
/// `pixel_size` pixels; the output is the block-downsampled image (each
/// value is the measured block flux). Noisy measurements clamp at zero.
pub fn rastered_image(
    arm: &BeamImage,
    pixel_size: usize,
    cfg: &AcquisitionConfig,
) -> Result<BeamImage> {
    cfg.validate()?;
    if pixel_size == 0 {
        return Err(Error::invalid("pixel size must be at least 1"));
    }
    if pixel_size > arm.width() || pixel_size > arm.height() {
        return Err(Error::invalid(format!(
            "pixel size {} exceeds image dimensions {}x{}",
            pixel_size,
            arm.width(),
            arm.height()
        )));
    }
    let out_w = arm.width().div_ceil(pixel_size);
    let out_h = arm.height().div_ceil(pixel_size);
    let mut out = BeamImage::zeros(out_w, out_h, arm.pitch_um() * pixel_size as f64)?;
    let shot_scale = cfg.shot_scale(arm.total_flux());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for by in 0..out_h {
        for bx in 0..out_w {
            let mut flux = 0.0;
            for y in (by * pixel_size)..((by + 1) * pixel_size).min(arm.height()) {
                for x in (bx * pixel_size)..((bx + 1) * pixel_size).min(arm.width()) {
                    flux += arm.get(x, y);
                }
            }
            let variance =
                (shot_scale * flux + cfg.dark_noise_variance) / cfg.exposures_per_row as f64;
            let value = if variance > 0.0 {
                rng.set_stream((by * out_w + bx) as u64 + 1);
                let z: f64 = StandardNormal.sample(&mut rng);
                (flux + variance.sqrt() * z).max(0.0)
            } else {
                flux
            };
            out.set(bx, by, value);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::DEFAULT_PITCH_UM;
    use crate::noise::NrfVariant;
    use crate::sampling::{scrambled_block_hadamard, select_rows};
    use crate::source::{build_twin_pair, SourceConfig};

    fn test_pair(size: usize, radius: f64) -> TwinBeamPair {
        let seed = phantoms::gaussian_beam(size, size, DEFAULT_PITCH_UM, radius).unwrap();
        build_twin_pair(&seed, &SourceConfig::default(), 3).unwrap()
    }

    #[test]
    fn noiseless_measure_is_exact_flux() {
        let beam = phantoms::gaussian_beam(32, 32, 1.0, 8.0).unwrap();
        let cfg = AcquisitionConfig::noiseless();
        let all = single_pixel_measure(&beam, &BinaryMask::ones(32, 32), &cfg, 0).unwrap();
        assert_eq!(all, beam.total_flux());
        let mask = phantoms::half_plane_mask(32, 32);
        let half = single_pixel_measure(&beam, &mask, &cfg, 0).unwrap();
        assert_eq!(half, mask.apply(&beam).unwrap().total_flux());
    }

    #[test]
    fn shot_noise_variance_tracks_detected_flux() {
        let beam = phantoms::gaussian_beam(32, 32, 1.0, 8.0).unwrap();
        let mask = phantoms::half_plane_mask(32, 32);
        let cfg = AcquisitionConfig {
            photons_per_exposure: 1e4,
            rng_seed: 3,
            ..AcquisitionConfig::default()
        };
        let detected = mask.apply(&beam).unwrap().total_flux();
        let expect_var = beam.total_flux() / 1e4 * detected;
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let v = single_pixel_measure(&beam, &mask, &cfg, i).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(
            (var - expect_var).abs() / expect_var < 0.05,
            "var {var} vs {expect_var}"
        );
    }

    #[test]
    fn noiseless_compressive_acquire_is_exact_projection() {
        let pair = test_pair(32, 8.0);
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 50, 2).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let cfg = AcquisitionConfig::noiseless();
        let meas = compressive_acquire(&pair, &a, &model, &cfg).unwrap();
        let direct = a.apply(pair.probe.as_slice());
        for (m, d) in meas.values.iter().zip(&direct) {
            assert_eq!(*m, *d);
        }
        assert!(meas.noise_budget.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn acquisition_is_deterministic() {
        let pair = test_pair(32, 8.0);
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 20, 2).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let cfg = AcquisitionConfig {
            rng_seed: 99,
            nrf_override: Some(0.5),
            ..AcquisitionConfig::default()
        };
        let m1 = compressive_acquire(&pair, &a, &model, &cfg).unwrap();
        let m2 = compressive_acquire(&pair, &a, &model, &cfg).unwrap();
        for (a, b) in m1.values.iter().zip(&m2.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn quantum_to_classical_variance_ratio_matches_nrf() {
        let pair = test_pair(32, 8.0);
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 16, 2).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let nrf = 0.49;
        let trials = 10_000u64;
        let mut var_q = vec![0.0; a.m()];
        let mut var_c = vec![0.0; a.m()];
        let clean = a.apply(pair.probe.as_slice());
        for mode_is_quantum in [true, false] {
            let acc = if mode_is_quantum {
                &mut var_q
            } else {
                &mut var_c
            };
            for trial in 0..trials {
                let cfg = AcquisitionConfig {
                    mode: if mode_is_quantum {
                        AcquisitionMode::Quantum
                    } else {
                        AcquisitionMode::Classical
                    },
                    photons_per_exposure: 1e5,
                    rng_seed: 1000 + trial,
                    nrf_override: Some(nrf),
                    ..AcquisitionConfig::default()
                };
                let meas = compressive_acquire(&pair, &a, &model, &cfg).unwrap();
                for (i, v) in meas.values.iter().enumerate() {
                    let d = v - clean[i];
                    acc[i] += d * d;
                }
            }
        }
        let mean_q: f64 = var_q.iter().sum::<f64>() / var_q.len() as f64;
        let mean_c: f64 = var_c.iter().sum::<f64>() / var_c.len() as f64;
        let ratio = mean_q / mean_c;
        assert!((ratio - nrf).abs() < 0.03, "ratio {ratio} vs {nrf}");
    }

    #[test]
    fn acquire_rejects_mismatched_pixel_count() {
        let pair = test_pair(32, 8.0);
        let w = scrambled_block_hadamard(256, 16, 1, 16).unwrap();
        let a = select_rows(&w, 10, 2).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        assert!(
            compressive_acquire(&pair, &a, &model, &AcquisitionConfig::noiseless()).is_err()
        );
    }

    #[test]
    fn linearity_with_noise_disabled() {
        let source = SourceConfig::default();
        let seed1 = phantoms::gaussian_beam(32, 32, DEFAULT_PITCH_UM, 8.0).unwrap();
        let seed2 = phantoms::letter_e_mask(32, 32).apply(&seed1).unwrap();
        let p1 = build_twin_pair(&seed1, &source, 3).unwrap();
        let p2 = build_twin_pair(&seed2, &source, 3).unwrap();
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 30, 5).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let cfg = AcquisitionConfig::noiseless();
        let y1 = compressive_acquire(&p1, &a, &model, &cfg).unwrap();
        let y2 = compressive_acquire(&p2, &a, &model, &cfg).unwrap();
        // combined profile: 2*x1 + 3*x2 measured directly
        let combo_data: Vec<f64> = p1
            .probe
            .as_slice()
            .iter()
            .zip(p2.probe.as_slice())
            .map(|(a, b)| 2.0 * a + 3.0 * b)
            .collect();
        let combo = a.apply(&combo_data);
        for i in 0..a.m() {
            let lin = 2.0 * y1.values[i] + 3.0 * y2.values[i];
            assert!((combo[i] - lin).abs() < 1e-9 * (1.0 + combo[i].abs()));
        }
    }

    #[test]
    fn raster_line_centered_is_quietest() {
        let pair = test_pair(64, 16.0);
        let model = NoiseModel::new(4.0, NrfVariant::Standard)
            .unwrap()
            .with_base_transmission(0.6)
            .unwrap();
        let width = 8usize;
        let shape = RasterShape::Line {
            width_px: width,
            orientation: Orientation::Vertical,
        };
        let center = centered_position(&shape, 64, 64).0;
        let positions: Vec<(i64, i64)> = (-2..=2)
            .map(|k| (center + k * width as i64, 0))
            .collect();
        let result =
            raster_scan(&pair, &model, shape, &positions, ConjugateMaskPolicy::FixedCentered)
                .unwrap();
        let center_db = result.figures[2].value_db();
        for (i, fig) in result.figures.iter().enumerate() {
            if i != 2 {
                assert!(fig.value_db() > center_db, "position {i} louder than center");
            }
        }
        assert!(center_db < 0.0, "centered line should squeeze");
    }

    #[test]
    fn raster_off_beam_errors() {
        let pair = test_pair(64, 16.0);
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let shape = RasterShape::Line {
            width_px: 8,
            orientation: Orientation::Vertical,
        };
        let err = raster_scan(
            &pair,
            &model,
            shape,
            &[(-20, 0)],
            ConjugateMaskPolicy::FixedCentered,
        );
        assert!(matches!(err, Err(Error::NoLight)));
    }

    #[test]
    fn raster_rejects_empty_positions() {
        let pair = test_pair(64, 16.0);
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let shape = RasterShape::Line {
            width_px: 8,
            orientation: Orientation::Vertical,
        };
        assert!(raster_scan(&pair, &model, shape, &[], ConjugateMaskPolicy::FixedCentered)
            .is_err());
    }

    #[test]
    fn rastered_image_identity_at_size_one() {
        let beam = phantoms::gaussian_beam(16, 16, 1.0, 4.0).unwrap();
        let out = rastered_image(&beam, 1, &AcquisitionConfig::noiseless()).unwrap();
        assert_eq!(out.as_slice(), beam.as_slice());
    }

    #[test]
    fn rastered_image_uniform_blocks() {
        let uniform = BeamImage::new(16, 16, 1.0, vec![2.0; 256]).unwrap();
        let out = rastered_image(&uniform, 4, &AcquisitionConfig::noiseless()).unwrap();
        assert_eq!(out.width(), 4);
        assert!(out.as_slice().iter().all(|&v| (v - 32.0).abs() < 1e-12));
    }

    #[test]
    fn rastered_image_matches_block_sum_oracle() {
        let beam = phantoms::gaussian_beam(32, 32, 1.0, 8.0).unwrap();
        let out = rastered_image(&beam, 4, &AcquisitionConfig::noiseless()).unwrap();
        for by in 0..8 {
            for bx in 0..8 {
                let mut s = 0.0;
                for y in by * 4..(by + 1) * 4 {
                    for x in bx * 4..(bx + 1) * 4 {
                        s += beam.get(x, y);
                    }
                }
                assert!((out.get(bx, by) - s).abs() < 1e-12);
            }
        }
        // flux conservation
        assert!((out.total_flux() - beam.total_flux()).abs() < 1e-9);
    }

    #[test]
    fn rastered_image_rejects_oversized_pixel() {
        let beam = phantoms::gaussian_beam(16, 16, 1.0, 4.0).unwrap();
        assert!(rastered_image(&beam, 17, &AcquisitionConfig::noiseless()).is_err());
    }

    #[test]
    fn measurement_text_round_trip_is_byte_exact() {
        let pair = test_pair(32, 8.0);
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 25, 2).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let cfg = AcquisitionConfig {
            nrf_override: Some(0.49),
            ..AcquisitionConfig::default()
        };
        let meas = compressive_acquire(&pair, &a, &model, &cfg).unwrap();
        let mut buf = Vec::new();
        meas.write_text(&mut buf).unwrap();
        let parsed = MeasurementVector::read_text(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        parsed.write_text(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn noise_budget_matches_empirical_variance() {
        let pair = test_pair(32, 8.0);
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 4, 2).unwrap();
        let model = NoiseModel::new(4.0, NrfVariant::Standard).unwrap();
        let clean = a.apply(pair.probe.as_slice());
        let budget = {
            let cfg = AcquisitionConfig {
                photons_per_exposure: 1e5,
                rng_seed: 0,
                ..AcquisitionConfig::default()
            };
            compressive_acquire(&pair, &a, &model, &cfg).unwrap().noise_budget
        };
        let trials = 10_000u64;
        let mut acc = vec![0.0; a.m()];
        for trial in 0..trials {
            let cfg = AcquisitionConfig {
                photons_per_exposure: 1e5,
                rng_seed: 5000 + trial,
                ..AcquisitionConfig::default()
            };
            let meas = compressive_acquire(&pair, &a, &model, &cfg).unwrap();
            for (i, v) in meas.values.iter().enumerate() {
                let d = v - clean[i];
                acc[i] += d * d;
            }
        }
        for i in 0..a.m() {
            let emp = acc[i] / trials as f64;
            assert!(
                (emp - budget[i]).abs() / budget[i] < 0.05,
                "row {i}: empirical {emp} vs budget {}",
                budget[i]
            );
        }
    }
}
