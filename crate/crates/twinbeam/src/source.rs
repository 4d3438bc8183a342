//! Twin-beam source model.
//!
//! A seeded phase-insensitive amplifier of gain G emits a probe beam
//! (power proportional to G) and a conjugate beam (proportional to G-1)
//! with correlated intensity fluctuations. Before amplification the seed
//! profile is low-pass filtered: gain exists only where the seed's spatial
//! frequencies overlap the pump mode, so structure finer than the pump
//! acceptance is stripped from the amplified beam. The filter is a single
//! radially symmetric Gaussian in the spatial-frequency domain acting on
//! the field amplitude; no atomic dispersion is modeled.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::CoherenceGrid;
use crate::image::BeamImage;

/// Source and geometry parameters of the four-wave-mixing twin-beam source.
#[derive(Debug, Clone)]
pub struct SourceConfig {
    /// Amplifier gain G, dimensionless, > 1.
    pub gain: f64,
    /// Probe seed 1/e^2 waist in micrometers.
    pub probe_waist_um: f64,
    /// Pump 1/e^2 waist in micrometers; sets the spatial low-pass cutoff.
    pub pump_waist_um: f64,
    /// Best squeezing the source demonstrates on an unstructured beam, in
    /// positive dB below the shot-noise limit.
    pub max_squeezing_db: f64,
    /// Angular 1/e^2 beam diameter in milliradians.
    pub angular_beam_diameter_mrad: f64,
    /// Angular size of one coherence area in milliradians.
    pub coherence_area_angle_mrad: f64,
    /// Total number of spatial modes the source supports.
    pub mode_count: u32,
    /// Dimensionless scale relating the pump waist to the filter cutoff:
    /// cutoff = pump_cutoff_scale / pump_waist_um, in cycles per micrometer.
    pub pump_cutoff_scale: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            gain: 4.0,
            probe_waist_um: 450.0,
            pump_waist_um: 1000.0,
            max_squeezing_db: 4.5,
            angular_beam_diameter_mrad: 2.4,
            coherence_area_angle_mrad: 1.4,
            mode_count: 70,
            pump_cutoff_scale: 60.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 1.0) {
            return Err(Error::invalid("gain must be > 1"));
        }
        if !(self.probe_waist_um > 0.0) || !(self.pump_waist_um > 0.0) {
            return Err(Error::invalid("beam waists must be positive"));
        }
        if !(self.max_squeezing_db > 0.0) {
            return Err(Error::invalid("max_squeezing_db must be positive"));
        }
        if self.angular_beam_diameter_mrad < self.coherence_area_angle_mrad {
            return Err(Error::invalid(
                "angular beam diameter must be at least one coherence area",
            ));
        }
        if !(self.pump_cutoff_scale > 0.0) {
            return Err(Error::invalid("pump_cutoff_scale must be positive"));
        }
        Ok(())
    }

    /// Spatial-frequency 1/e^2 cutoff of the pump-overlap filter, in cycles
    /// per micrometer.
    pub fn cutoff_cycles_per_um(&self) -> f64 {
        self.pump_cutoff_scale / self.pump_waist_um
    }

    /// Number of coherence areas inside the 1/e^2 beam disk, estimated from
    /// the angular sizes.
    pub fn coherence_areas_in_beam(&self) -> f64 {
        let ratio = self.angular_beam_diameter_mrad / self.coherence_area_angle_mrad;
        ratio * ratio
    }

    /// Average power per illuminated coherence area for a given total beam
    /// power.
    pub fn power_per_coherence_area(&self, total_power_mw: f64) -> f64 {
        total_power_mw / self.coherence_areas_in_beam()
    }
}

fn fft_2d(data: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft_row = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    let fft_col = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    for row in data.chunks_exact_mut(width) {
        fft_row.process(row);
    }
    let mut col = vec![Complex::default(); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = data[y * width + x];
        }
        fft_col.process(&mut col);
        for y in 0..height {
            data[y * width + x] = col[y];
        }
    }
}

/// DFT bin frequency in cycles per micrometer.
fn bin_frequency(index: usize, len: usize, pitch_um: f64) -> f64 {
    let i = index as i64;
    let n = len as i64;
    let signed = if i <= n / 2 { i } else { i - n };
    signed as f64 / (len as f64 * pitch_um)
}

/// Low-pass filters a beam profile through the pump-overlap transfer
/// function.
///
/// The intensity map is converted to a field amplitude (square root), its
/// spectrum is multiplied by `exp(-2 (nu / nu_c)^2)` with `nu_c` from
/// [`SourceConfig::cutoff_cycles_per_um`], negative excursions of the
/// filtered field are clamped to zero, and the result is squared back into
/// an intensity map. Output power never exceeds input power.
pub fn lowpass_fourier(image: &BeamImage, source: &SourceConfig) -> Result<BeamImage> {
    source.validate()?;
    if image.total_flux() <= 0.0 {
        return Err(Error::EmptySourceProfile);
    }
    let w = image.width();
    let h = image.height();
    let mut field: Vec<Complex<f64>> = image
        .as_slice()
        .iter()
        .map(|v| Complex::new(v.sqrt(), 0.0))
        .collect();
    fft_2d(&mut field, w, h, false);
    let cutoff = source.cutoff_cycles_per_um();
    for y in 0..h {
        let fy = bin_frequency(y, h, image.pitch_um());
        for x in 0..w {
            let fx = bin_frequency(x, w, image.pitch_um());
            let nu2 = fx * fx + fy * fy;
            let transfer = (-2.0 * nu2 / (cutoff * cutoff)).exp();
            field[y * w + x] *= transfer;
        }
    }
    fft_2d(&mut field, w, h, true);
    let norm = 1.0 / (w * h) as f64;
    let data: Vec<f64> = field
        .iter()
        .map(|c| {
            let amp = (c.re * norm).max(0.0);
            amp * amp
        })
        .collect();
    let mut out = BeamImage::new(w, h, image.pitch_um(), data)?;
    if let Some(p) = image.total_power_mw {
        let frac = out.total_flux() / image.total_flux();
        out.total_power_mw = Some(p * frac);
    }
    Ok(out)
}

/// Fraction of beam power an image retains through the low-pass filter.
pub fn lowpass_power_fraction(image: &BeamImage, source: &SourceConfig) -> Result<f64> {
    let filtered = lowpass_fourier(image, source)?;
    Ok(filtered.total_flux() / image.total_flux())
}

/// Probe and conjugate beams with a shared coherence-area layout.
#[derive(Debug, Clone)]
pub struct TwinBeamPair {
    pub probe: BeamImage,
    pub conjugate: BeamImage,
    pub grid: CoherenceGrid,
    pub source: SourceConfig,
}

impl TwinBeamPair {
    /// Per-cell (probe, conjugate) fluxes, ordered by cell id. The grid is
    /// laid over the probe, so probe flux is the cell flux itself.
    pub fn cell_fluxes(&self) -> Vec<(f64, f64)> {
        let g = self.source.gain;
        self.grid
            .cells()
            .iter()
            .map(|c| (c.flux, c.flux * (g - 1.0) / g))
            .collect()
    }

    /// Builds a pair directly from an already-amplified probe profile,
    /// skipping the seed filter: the conjugate is the same profile at
    /// (G-1)/G power and the grid is laid over the probe.
    pub fn from_probe(
        probe: BeamImage,
        source: &SourceConfig,
        cells_per_diameter: usize,
    ) -> Result<Self> {
        source.validate()?;
        let grid = CoherenceGrid::build(&probe, cells_per_diameter)?;
        let conjugate = probe.scaled((source.gain - 1.0) / source.gain)?;
        Ok(TwinBeamPair {
            probe,
            conjugate,
            grid,
            source: source.clone(),
        })
    }
}

/// Seeds the amplifier with a beam profile and builds the twin-beam pair.
///
/// The seed is low-pass filtered, the coherence grid is laid over the
/// filtered profile, and the probe and conjugate inherit that profile
/// scaled by G and G-1 respectively.
pub fn build_twin_pair(
    seed: &BeamImage,
    source: &SourceConfig,
    cells_per_diameter: usize,
) -> Result<TwinBeamPair> {
    let filtered = lowpass_fourier(seed, source)?;
    let probe = filtered.scaled(source.gain)?;
    let conjugate = filtered.scaled(source.gain - 1.0)?;
    let grid = CoherenceGrid::build(&probe, cells_per_diameter)?;
    Ok(TwinBeamPair {
        probe,
        conjugate,
        grid,
        source: source.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{phantoms, DEFAULT_PITCH_UM};

    /// Brute-force O(n^2) DFT filter with the same conventions as
    /// `lowpass_fourier`, kept independent of the FFT path.
    fn naive_lowpass(image: &BeamImage, source: &SourceConfig) -> BeamImage {
        let w = image.width();
        let h = image.height();
        let field: Vec<f64> = image.as_slice().iter().map(|v| v.sqrt()).collect();
        let cutoff = source.cutoff_cycles_per_um();
        let mut spectrum = vec![Complex::new(0.0, 0.0); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (kx as f64 * x as f64 / w as f64
                                + ky as f64 * y as f64 / h as f64);
                        acc += Complex::new(phase.cos(), phase.sin()) * field[y * w + x];
                    }
                }
                let fx = bin_frequency(kx, w, image.pitch_um());
                let fy = bin_frequency(ky, h, image.pitch_um());
                let t = (-2.0 * (fx * fx + fy * fy) / (cutoff * cutoff)).exp();
                spectrum[ky * w + kx] = acc * t;
            }
        }
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for ky in 0..h {
                    for kx in 0..w {
                        let phase = 2.0
                            * std::f64::consts::PI
                            * (kx as f64 * x as f64 / w as f64
                                + ky as f64 * y as f64 / h as f64);
                        acc += Complex::new(phase.cos(), phase.sin()) * spectrum[ky * w + kx];
                    }
                }
                let amp = (acc.re / (w * h) as f64).max(0.0);
                data[y * w + x] = amp * amp;
            }
        }
        BeamImage::new(w, h, image.pitch_um(), data).unwrap()
    }

    #[test]
    fn uniform_image_passes_unchanged() {
        let img = BeamImage::new(16, 16, DEFAULT_PITCH_UM, vec![2.0; 256]).unwrap();
        let out = lowpass_fourier(&img, &SourceConfig::default()).unwrap();
        let frac = out.total_flux() / img.total_flux();
        assert!((frac - 1.0).abs() < 1e-9, "fraction {frac}");
        for (a, b) in img.as_slice().iter().zip(out.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn checkerboard_fraction_matches_dft_oracle() {
        let mask = phantoms::checkerboard_mask(32, 32, 1);
        let img = mask.to_image(DEFAULT_PITCH_UM).unwrap();
        let source = SourceConfig::default();
        let out = lowpass_fourier(&img, &source).unwrap();
        let frac = out.total_flux() / img.total_flux();
        let oracle = naive_lowpass(&img, &source);
        let oracle_frac = oracle.total_flux() / img.total_flux();
        assert!(
            (frac - oracle_frac).abs() < 1e-9,
            "fft {frac} vs oracle {oracle_frac}"
        );
        // frozen from the DFT oracle at default waists and pitch: the
        // alternating half of the pattern's power is nearly removed while
        // the mean level survives
        assert!((frac - 0.5257).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn happy_face_fraction_sits_between_checkerboard_and_uniform() {
        let source = SourceConfig::default();
        let uniform = BeamImage::new(64, 64, DEFAULT_PITCH_UM, vec![1.0; 64 * 64]).unwrap();
        let face = phantoms::happy_face_mask(64, 64, 48.0)
            .to_image(DEFAULT_PITCH_UM)
            .unwrap();
        let checker = phantoms::checkerboard_mask(64, 64, 1)
            .to_image(DEFAULT_PITCH_UM)
            .unwrap();
        let f_u = lowpass_power_fraction(&uniform, &source).unwrap();
        let f_f = lowpass_power_fraction(&face, &source).unwrap();
        let f_c = lowpass_power_fraction(&checker, &source).unwrap();
        assert!(f_u > f_f && f_f > f_c, "ordering: {f_u} {f_f} {f_c}");
    }

    #[test]
    fn output_power_never_exceeds_input() {
        let source = SourceConfig::default();
        let beam = phantoms::gaussian_beam(64, 64, DEFAULT_PITCH_UM, 16.0).unwrap();
        for mask in [
            phantoms::checkerboard_mask(64, 64, 1),
            phantoms::happy_face_mask(64, 64, 40.0),
            phantoms::letter_e_mask(64, 64),
        ] {
            let seed = mask.apply(&beam).unwrap();
            let out = lowpass_fourier(&seed, &source).unwrap();
            assert!(out.total_flux() <= seed.total_flux() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn all_zero_image_errors() {
        let img = BeamImage::zeros(8, 8, 1.0).unwrap();
        assert!(matches!(
            lowpass_fourier(&img, &SourceConfig::default()),
            Err(Error::EmptySourceProfile)
        ));
    }

    #[test]
    fn twin_pair_power_ratio_is_gain_ratio() {
        let seed = phantoms::gaussian_beam(64, 64, DEFAULT_PITCH_UM, 16.0).unwrap();
        let source = SourceConfig::default();
        let pair = build_twin_pair(&seed, &source, 3).unwrap();
        let ratio = pair.conjugate.total_flux() / pair.probe.total_flux();
        assert!((ratio - 0.75).abs() < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn twin_pair_grid_flux_matches_probe_profile() {
        let seed = phantoms::gaussian_beam(64, 64, DEFAULT_PITCH_UM, 16.0).unwrap();
        let pair = build_twin_pair(&seed, &SourceConfig::default(), 3).unwrap();
        let grid_total: f64 = pair.cell_fluxes().iter().map(|(p, _)| p).sum();
        let rel = (grid_total - pair.probe.total_flux()).abs() / pair.probe.total_flux();
        assert!(rel < 1e-9, "relative error {rel}");
    }

    #[test]
    fn power_per_coherence_area_near_point_four_milliwatts() {
        let source = SourceConfig::default();
        let per_area = source.power_per_coherence_area(1.2);
        assert!((per_area - 0.408).abs() < 0.01, "power {per_area}");
    }

    #[test]
    fn central_cell_flux_fraction_frozen() {
        // frozen from the pixel-sum oracle: central 3x3-grid cell of a
        // Gaussian holds about a quarter of the power
        let seed = phantoms::gaussian_beam(128, 128, DEFAULT_PITCH_UM, 32.9)
            .unwrap()
            .with_total_power_mw(1.2);
        let pair = build_twin_pair(&seed, &SourceConfig::default(), 3).unwrap();
        let central = pair.grid.central_cell().expect("central cell");
        let frac = central.flux / pair.grid.total_flux();
        let power = frac * 1.2;
        assert!((0.15..=0.45).contains(&power), "central cell power {power}");
    }

    #[test]
    fn cells_per_diameter_three_gives_three_to_nine_disk_cells() {
        let seed = phantoms::gaussian_beam(128, 128, DEFAULT_PITCH_UM, 32.9).unwrap();
        let pair = build_twin_pair(&seed, &SourceConfig::default(), 3).unwrap();
        let n = pair.grid.cells_within_beam_disk();
        assert!((3..=9).contains(&n), "disk cells {n}");
    }
}
