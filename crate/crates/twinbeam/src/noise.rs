//! Intensity-difference noise of masked twin beams.
//!
//! All noise figures are variances of the probe-minus-conjugate photocurrent
//! normalized to the shot-noise limit (SNL) of the detected power: 1.0 (0 dB)
//! is coherent light, below is squeezing, above is excess noise.
//!
//! The model closes with two assumptions. Each arm individually carries
//! amplified thermal-like noise with Fano factor F = 2G-1, and the per-cell
//! cross-covariance between the arms is fixed by requiring the symmetric-loss
//! law NRF(eta) = 1 - eta + eta * r, where r is the no-loss noise floor. Two
//! variants of the floor are provided: `Standard` uses r = 1/(2G-1), the
//! phase-insensitive-amplifier result, and `PaperCorrected` uses r = 1/G.
//! Detection through a mask is binomial thinning of each cell's photon
//! number; cells are mutually independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::BinaryMask;
use crate::source::TwinBeamPair;

/// Choice of the no-loss noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NrfVariant {
    /// r = 1/(2G-1).
    #[default]
    Standard,
    /// r = 1/G.
    PaperCorrected,
}

impl NrfVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(NrfVariant::Standard),
            "paper-corrected" | "paper_corrected" => Ok(NrfVariant::PaperCorrected),
            other => Err(Error::invalid(format!(
                "unknown noise variant '{other}' (expected 'standard' or 'paper-corrected')"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NrfVariant::Standard => "standard",
            NrfVariant::PaperCorrected => "paper-corrected",
        }
    }
}

/// Noise figure: intensity-difference variance relative to the SNL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFigure {
    nrf_linear: f64,
    shot_noise_reference: f64,
}

impl NoiseFigure {
    pub fn from_linear(nrf_linear: f64, shot_noise_reference: f64) -> Result<Self> {
        if !(nrf_linear > 0.0) || !nrf_linear.is_finite() {
            return Err(Error::invalid("linear noise figure must be positive"));
        }
        Ok(Self {
            nrf_linear,
            shot_noise_reference,
        })
    }

    pub fn from_db(value_db: f64, shot_noise_reference: f64) -> Result<Self> {
        Self::from_linear(10f64.powf(value_db / 10.0), shot_noise_reference)
    }

    /// Variance relative to the SNL; < 1 is squeezing.
    pub fn nrf_linear(&self) -> f64 {
        self.nrf_linear
    }

    /// Noise figure in dB relative to the SNL; negative is squeezing.
    pub fn value_db(&self) -> f64 {
        10.0 * self.nrf_linear.log10()
    }

    /// Detected-power-proportional variance the figure is normalized to.
    pub fn shot_noise_reference(&self) -> f64 {
        self.shot_noise_reference
    }

    pub fn is_squeezed(&self) -> bool {
        self.nrf_linear < 1.0
    }
}

/// Gain, variant, and detection-path loss shared by both arms.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    gain: f64,
    variant: NrfVariant,
    /// Transmission applied to both arms on top of any mask, in (0, 1];
    /// models fixed losses such as the source ceiling or micromirror
    /// diffraction efficiency.
    base_transmission: f64,
}

impl NoiseModel {
    pub fn new(gain: f64, variant: NrfVariant) -> Result<Self> {
        if !(gain > 1.0) {
            return Err(Error::invalid("gain must be > 1"));
        }
        Ok(Self {
            gain,
            variant,
            base_transmission: 1.0,
        })
    }

    pub fn with_base_transmission(mut self, transmission: f64) -> Result<Self> {
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::invalid("base transmission must be in (0, 1]"));
        }
        self.base_transmission = transmission;
        Ok(self)
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn variant(&self) -> NrfVariant {
        self.variant
    }

    pub fn base_transmission(&self) -> f64 {
        self.base_transmission
    }

    /// Per-arm photon-number Fano factor, F = 2G-1.
    pub fn fano_factor(&self) -> f64 {
        2.0 * self.gain - 1.0
    }

    /// No-loss noise floor r of the chosen variant.
    pub fn ideal_nrf(&self) -> f64 {
        match self.variant {
            NrfVariant::Standard => 1.0 / (2.0 * self.gain - 1.0),
            NrfVariant::PaperCorrected => 1.0 / self.gain,
        }
    }

    /// Symmetric transmission that degrades the ideal floor to a measured
    /// squeezing ceiling of `max_squeezing_db` (positive dB below the SNL).
    pub fn ceiling_transmission(&self, max_squeezing_db: f64) -> Result<f64> {
        if !(max_squeezing_db > 0.0) {
            return Err(Error::invalid("squeezing ceiling must be positive dB"));
        }
        let target = 10f64.powf(-max_squeezing_db / 10.0);
        let r = self.ideal_nrf();
        if target < r {
            return Err(Error::invalid(format!(
                "squeezing ceiling of {max_squeezing_db} dB is below the ideal floor \
                 of {:.2} dB for gain {}",
                10.0 * r.log10().abs(),
                self.gain
            )));
        }
        Ok((1.0 - target) / (1.0 - r))
    }

    /// Per-cell cross-covariance fixed by the symmetric-loss law.
    fn cell_covariance(&self, probe_flux: f64, conj_flux: f64) -> f64 {
        (probe_flux + conj_flux) * (self.fano_factor() - self.ideal_nrf()) / 2.0
    }

    /// Noise figure of the intensity difference when cell `i` of the probe
    /// is detected with transmission `t_probe[i]` and the conjugate with
    /// `t_conj[i]`.
    ///
    /// `cells` holds (probe, conjugate) mean fluxes per cell. Detected
    /// counts follow binomial thinning of the twin-beam counts; the SNL
    /// reference is the total detected flux.
    pub fn nrf(
        &self,
        cells: &[(f64, f64)],
        t_probe: &[f64],
        t_conj: &[f64],
    ) -> Result<NoiseFigure> {
        if cells.len() != t_probe.len() || cells.len() != t_conj.len() {
            return Err(Error::dims(
                format!("{} transmissions", cells.len()),
                format!("{} / {}", t_probe.len(), t_conj.len()),
            ));
        }
        let f = self.fano_factor();
        let mut variance = 0.0;
        let mut snl = 0.0;
        for (i, &(np, nc)) in cells.iter().enumerate() {
            if !(0.0..=1.0).contains(&t_probe[i]) || !(0.0..=1.0).contains(&t_conj[i]) {
                return Err(Error::invalid("transmissions must be in [0, 1]"));
            }
            let tp = t_probe[i] * self.base_transmission;
            let tc = t_conj[i] * self.base_transmission;
            let cov = self.cell_covariance(np, nc);
            variance += tp * (1.0 - tp) * np + tp * tp * f * np;
            variance += tc * (1.0 - tc) * nc + tc * tc * f * nc;
            variance -= 2.0 * tp * tc * cov;
            snl += tp * np + tc * nc;
        }
        if snl <= 0.0 {
            return Err(Error::NoLight);
        }
        NoiseFigure::from_linear(variance / snl, snl)
    }

    /// Noise figure for uniform symmetric transmission `eta` over any cell
    /// layout; equals the single-mode law.
    pub fn nrf_symmetric(&self, cells: &[(f64, f64)], eta: f64) -> Result<NoiseFigure> {
        let t = vec![eta; cells.len()];
        self.nrf(cells, &t, &t)
    }
}

/// Squeezing in dB predicted for a single spatial mode detected through a
/// total transmission `eta`: 10 log10(1 - eta + eta * r).
///
/// `eta = 0` returns exactly 0 dB (full loss reaches the shot-noise limit).
pub fn predicted_squeezing_single_mode(eta: f64, gain: f64, variant: NrfVariant) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta must be in [0, 1]"));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let model = NoiseModel::new(gain, variant)?;
    let r = model.ideal_nrf();
    Ok(10.0 * (1.0 - eta + eta * r).log10())
}

/// Propagates a noise figure through an extra symmetric loss: the
/// beam-splitter composition law NRF' = 1 - eta' (1 - NRF).
pub fn compose_loss(base: &NoiseFigure, extra_transmission: f64) -> Result<NoiseFigure> {
    if !(extra_transmission > 0.0 && extra_transmission <= 1.0) {
        return Err(Error::invalid("extra transmission must be in (0, 1]"));
    }
    NoiseFigure::from_linear(
        1.0 - extra_transmission * (1.0 - base.nrf_linear()),
        base.shot_noise_reference() * extra_transmission,
    )
}

/// Monte Carlo estimate of the masked-detection noise figure.
///
/// Per shot, correlated per-cell photon numbers are drawn from a bivariate
/// Gaussian with the model's means, variances, and covariances, then thinned
/// through the mask transmissions with Gaussian-approximated binomial
/// statistics. Returns the estimate and its standard error. Deterministic
/// for a fixed seed; each shot consumes an independent counter-derived
/// stream so evaluation order cannot matter.
pub fn monte_carlo_nrf(
    pair: &TwinBeamPair,
    mask_probe: &BinaryMask,
    mask_conj: &BinaryMask,
    model: &NoiseModel,
    shots: u64,
    rng_seed: u64,
) -> Result<(NoiseFigure, f64)> {
    if shots < 1000 {
        return Err(Error::invalid("at least 1000 shots required"));
    }
    let (t_probe, _) = pair.grid.transmissions(&pair.probe, mask_probe)?;
    let (t_conj, _) = pair.grid.transmissions(&pair.conjugate, mask_conj)?;
    let cells = pair.cell_fluxes();
    let f = model.fano_factor();

    // per-cell Cholesky factors of the twin-beam covariance and the
    // thinning noise scales
    struct CellDraw {
        np: f64,
        nc: f64,
        l11: f64,
        l21: f64,
        l22: f64,
        tp: f64,
        tc: f64,
        thin_p: f64,
        thin_c: f64,
    }
    let mut draws = Vec::with_capacity(cells.len());
    let mut snl = 0.0;
    for (i, &(np, nc)) in cells.iter().enumerate() {
        let tp = t_probe[i] * model.base_transmission();
        let tc = t_conj[i] * model.base_transmission();
        let var_p = f * np;
        let var_c = f * nc;
        let cov = (np + nc) * (f - model.ideal_nrf()) / 2.0;
        let l11 = var_p.sqrt();
        let (l21, l22) = if l11 > 0.0 {
            let l21 = cov / l11;
            let rem = var_c - l21 * l21;
            if rem < -1e-9 * var_c.max(1.0) {
                return Err(Error::invalid(
                    "cell covariance is not positive semidefinite",
                ));
            }
            (l21, rem.max(0.0).sqrt())
        } else {
            (0.0, var_c.sqrt())
        };
        snl += tp * np + tc * nc;
        draws.push(CellDraw {
            np,
            nc,
            l11,
            l21,
            l22,
            tp,
            tc,
            thin_p: (tp * (1.0 - tp) * np).sqrt(),
            thin_c: (tc * (1.0 - tc) * nc).sqrt(),
        });
    }
    if snl <= 0.0 {
        return Err(Error::NoLight);
    }

    let mut mean = 0.0;
    let mut m2 = 0.0;
    for shot in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(shot + 1);
        let mut diff = 0.0;
        for cell in &draws {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let xi_p: f64 = StandardNormal.sample(&mut rng);
            let xi_c: f64 = StandardNormal.sample(&mut rng);
            let n_probe = cell.np + cell.l11 * z1;
            let n_conj = cell.nc + cell.l21 * z1 + cell.l22 * z2;
            let m_probe = cell.tp * n_probe + cell.thin_p * xi_p;
            let m_conj = cell.tc * n_conj + cell.thin_c * xi_c;
            diff += m_probe - m_conj;
        }
        // Welford running variance
        let k = (shot + 1) as f64;
        let delta = diff - mean;
        mean += delta / k;
        m2 += delta * (diff - mean);
    }
    let sample_var = m2 / (shots as f64 - 1.0);
    let estimate = NoiseFigure::from_linear(sample_var / snl, snl)?;
    let std_error = estimate.nrf_linear() * (2.0 / (shots as f64 - 1.0)).sqrt();
    Ok((estimate, std_error))
}
