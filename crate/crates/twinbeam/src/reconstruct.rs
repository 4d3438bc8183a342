//! Image recovery from compressive measurements.
//!
//! The workhorse is total-variation minimization with an l2 residual
//! budget:
//!
//!   minimize TV(x)  subject to  ||A x - y||_2 <= epsilon
//!
//! solved by a first-order primal-dual splitting (Chambolle-Pock) over the
//! stacked operator K = [D; A], where D is the forward-difference gradient.
//! TV is anisotropic: the l1 norm of horizontal and vertical differences,
//! no wraparound. epsilon = 0 gives equality-constrained recovery; noisy
//! data defaults to epsilon equal to the acquisition noise budget. Step
//! sizes come from operator-norm bounds (||D||^2 <= 8, ||A|| from the
//! sensing matrix), iterates start at zero, and the whole solve is
//! deterministic. Nonnegativity of the estimate is NOT enforced.
//!
//! A minimum-norm least-squares baseline is included for comparison.

use crate::acquisition::MeasurementVector;
use crate::error::{Error, Result};
use crate::image::BeamImage;
use crate::sampling::SensingMatrix;

/// Cap applied by [`psnr`] so exact recovery never reports infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Linear measurement operator abstraction so the solvers run on sensing
/// matrices and plain dense matrices alike.
pub trait SensingOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64>;
    /// Upper bound on the squared spectral norm.
    fn operator_norm_sq(&self) -> f64;
}

impl SensingOperator for SensingMatrix {
    fn rows(&self) -> usize {
        self.m()
    }

    fn cols(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        SensingMatrix::apply(self, x)
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        SensingMatrix::apply_transpose(self, y)
    }

    fn operator_norm_sq(&self) -> f64 {
        SensingMatrix::operator_norm_sq(self)
    }
}

/// Dense row-major matrix operator.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("{} entries", rows * cols),
                format!("{}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }
}

impl SensingOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            for (j, a) in self.data[i * self.cols..(i + 1) * self.cols].iter().enumerate() {
                out[j] += a * yi;
            }
        }
        out
    }

    fn operator_norm_sq(&self) -> f64 {
        // deterministic power iteration with a small safety factor
        let mut v = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut lambda: f64 = 1.0;
        for _ in 0..60 {
            let w = self.apply_transpose(&self.apply(&v));
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            lambda = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        lambda * 1.05
    }
}

/// A reconstruction task: measurements, their matrix, target dimensions,
/// and solver controls.
pub struct ReconstructionProblem<'a> {
    pub matrix: &'a dyn SensingOperator,
    pub y: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
    /// l2 residual budget; 0 means equality constraints.
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl<'a> ReconstructionProblem<'a> {
    pub fn new(
        matrix: &'a dyn SensingOperator,
        y: Vec<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if matrix.cols() != width * height {
            return Err(Error::dims(
                format!("{}x{} = {} pixels", width, height, width * height),
                format!("operator over {} columns", matrix.cols()),
            ));
        }
        if matrix.rows() != y.len() {
            return Err(Error::dims(
                format!("{} measurements", matrix.rows()),
                format!("{}", y.len()),
            ));
        }
        Ok(Self {
            matrix,
            y,
            width,
            height,
            pitch_um: crate::image::DEFAULT_PITCH_UM,
            epsilon: 0.0,
            tolerance: 1e-5,
            max_iterations: 5000,
        })
    }

    /// Builds the problem from an acquisition, defaulting epsilon to the
    /// recorded noise budget.
    pub fn from_measurements(
        matrix: &'a dyn SensingOperator,
        meas: &MeasurementVector,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let mut p = Self::new(matrix, meas.values.clone(), width, height)?;
        p.epsilon = meas.noise_budget_l2();
        Ok(p)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be finite and >= 0"));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::invalid("tolerance must be finite and positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Solver output. The raw estimate may carry small negative excursions;
/// [`ReconstructionResult::image`] clamps them for display.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub estimate: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
    pub tv_value: f64,
    /// ||A x - y||_2 recomputed from the final estimate.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ReconstructionResult {
    pub fn image(&self) -> BeamImage {
        let data: Vec<f64> = self.estimate.iter().map(|v| v.max(0.0)).collect();
        BeamImage::new(self.width, self.height, self.pitch_um, data)
            .expect("clamped estimate is a valid image")
    }
}

/// Anisotropic total variation of an intensity image: the sum of absolute
/// forward differences along x and y, no wraparound.
pub fn tv_norm(image: &BeamImage) -> f64 {
    tv_norm_raw(image.as_slice(), image.width(), image.height())
}

pub fn tv_norm_raw(data: &[f64], width: usize, height: usize) -> f64 {
    let mut tv = 0.0;
    for y in 0..height {
        for x in 0..width {
            let v = data[y * width + x];
            if x + 1 < width {
                tv += (data[y * width + x + 1] - v).abs();
            }
            if y + 1 < height {
                tv += (data[(y + 1) * width + x] - v).abs();
            }
        }
    }
    tv
}

/// Forward-difference gradient, stacked [gx; gy], zero on the last
/// column/row so the output length is fixed at 2 * width * height.
fn gradient(data: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = width * height;
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            out[p] = if x + 1 < width {
                data[p + 1] - data[p]
            } else {
                0.0
            };
            out[n + p] = if y + 1 < height {
                data[p + width] - data[p]
            } else {
                0.0
            };
        }
    }
}

/// Negative divergence: the transpose of `gradient`.
fn gradient_transpose(g: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = width * height;
    out.fill(0.0);
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            if x + 1 < width {
                let v = g[p];
                out[p] -= v;
                out[p + 1] += v;
            }
            if y + 1 < height {
                let v = g[n + p];
                out[p] -= v;
                out[p + width] += v;
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Total-variation reconstruction with equality or l2-ball constraints.
///
/// Runs the primal-dual iteration from zero-initialized variables with
/// fixed steps 1/L, L^2 = ||A||^2 + 8, until the normalized primal-dual
/// residuals drop below the tolerance and the estimate is feasible within
/// `epsilon + tolerance`, or the iteration cap is reached. An infeasible
/// epsilon shows up as a non-converged result, not an error.
pub fn reconstruct_tv(problem: &ReconstructionProblem) -> Result<ReconstructionResult> {
    problem.validate()?;
    let w = problem.width;
    let h = problem.height;
    let n = w * h;
    let m = problem.matrix.rows();
    let l_sq = problem.matrix.operator_norm_sq() + 8.0;
    let step = 1.0 / l_sq.sqrt();
    let (tau, sigma) = (step, step);

    let mut x = vec![0.0; n];
    let mut xbar = vec![0.0; n];
    let mut p = vec![0.0; 2 * n]; // gradient dual
    let mut lam = vec![0.0; m]; // measurement dual
    let mut g_prev = vec![0.0; n]; // K^T q from the previous iterate
    let mut grad_buf = vec![0.0; 2 * n];
    let mut div_buf = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    const CHECK_EVERY: usize = 25;

    for iter in 1..=problem.max_iterations {
        iterations = iter;

        // dual ascent on the gradient variable: project onto the l-inf ball
        gradient(&xbar, w, h, &mut grad_buf);
        let mut p_delta_sq = 0.0;
        for (pi, gi) in p.iter_mut().zip(&grad_buf) {
            let new = (*pi + sigma * gi).clamp(-1.0, 1.0);
            p_delta_sq += (new - *pi) * (new - *pi);
            *pi = new;
        }

        // dual ascent on the residual variable: shift by y, shrink by the
        // epsilon ball's support function
        let ax = problem.matrix.apply(&xbar);
        let mut lam_delta_sq = 0.0;
        {
            let mut u: Vec<f64> = lam
                .iter()
                .zip(&ax)
                .zip(&problem.y)
                .map(|((l, a), yi)| l + sigma * a - sigma * yi)
                .collect();
            if problem.epsilon > 0.0 {
                let un = norm2(&u);
                let scale = if un > 0.0 {
                    (1.0 - sigma * problem.epsilon / un).max(0.0)
                } else {
                    0.0
                };
                for ui in &mut u {
                    *ui *= scale;
                }
            }
            for (li, ui) in lam.iter_mut().zip(&u) {
                lam_delta_sq += (ui - *li) * (ui - *li);
                *li = *ui;
            }
        }

        // primal descent
        gradient_transpose(&p, w, h, &mut div_buf);
        let atl = problem.matrix.apply_transpose(&lam);
        let mut x_delta_sq = 0.0;
        for i in 0..n {
            let g = div_buf[i] + atl[i];
            let new = x[i] - tau * g;
            x_delta_sq += (new - x[i]) * (new - x[i]);
            xbar[i] = 2.0 * new - x[i];
            x[i] = new;
            g_prev[i] = g;
        }

        if iter % CHECK_EVERY == 0 || iter == problem.max_iterations {
            // normalized fixed-point residuals of the primal-dual update
            let x_norm = norm2(&x);
            let q_norm = (norm2(&p).powi(2) + norm2(&lam).powi(2)).sqrt();
            let primal_res = x_delta_sq.sqrt() / tau / (1.0 + x_norm);
            let dual_res = (p_delta_sq + lam_delta_sq).sqrt() / sigma / (1.0 + q_norm);
            if primal_res < problem.tolerance && dual_res < problem.tolerance {
                let residual = residual_norm(problem, &x);
                if residual <= problem.epsilon + problem.tolerance {
                    converged = true;
                    break;
                }
            }
        }
    }

    let residual = residual_norm(problem, &x);
    Ok(ReconstructionResult {
        tv_value: tv_norm_raw(&x, w, h),
        residual_norm: residual,
        estimate: x,
        width: w,
        height: h,
        pitch_um: problem.pitch_um,
        iterations,
        converged,
    })
}

fn residual_norm(problem: &ReconstructionProblem, x: &[f64]) -> f64 {
    let ax = problem.matrix.apply(x);
    ax.iter()
        .zip(&problem.y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Minimum-l2-norm least-squares baseline: solves A A^T z = y by conjugate
/// gradients and returns x = A^T z. Rank deficiency resolves to the
/// minimum-norm convention by starting from zero.
pub fn reconstruct_ls(problem: &ReconstructionProblem) -> Result<ReconstructionResult> {
    problem.validate()?;
    let m = problem.matrix.rows();
    let mut z = vec![0.0; m];
    let mut r = problem.y.clone();
    let mut d = r.clone();
    let mut rs_old: f64 = r.iter().map(|v| v * v).sum();
    let y_norm_sq = rs_old.max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let max_cg = (4 * m).max(100);
    for _ in 0..max_cg {
        if rs_old.sqrt() <= 1e-12 * y_norm_sq.sqrt() {
            break;
        }
        iterations += 1;
        let ad = problem.matrix.apply(&problem.matrix.apply_transpose(&d));
        let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        if dad <= 0.0 {
            break;
        }
        let alpha = rs_old / dad;
        for i in 0..m {
            z[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs_old;
        for i in 0..m {
            d[i] = r[i] + beta * d[i];
        }
        rs_old = rs_new;
    }
    let x = problem.matrix.apply_transpose(&z);
    let residual = residual_norm(problem, &x);
    let converged = residual <= (problem.epsilon + problem.tolerance).max(1e-9 * y_norm_sq.sqrt());
    Ok(ReconstructionResult {
        tv_value: tv_norm_raw(&x, problem.width, problem.height),
        residual_norm: residual,
        estimate: x,
        width: problem.width,
        height: problem.height,
        pitch_um: problem.pitch_um,
        iterations,
        converged,
    })
}

/// Peak signal-to-noise ratio in dB of an estimate against a reference,
/// with the peak taken from the reference. Capped at [`PSNR_CAP_DB`].
pub fn psnr(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::dims(
            format!("{} pixels", truth.len()),
            format!("{}", estimate.len()),
        ));
    }
    let peak = truth.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::invalid("reference image is identically zero"));
    }
    let mse = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// PSNR of two images.
pub fn psnr_images(estimate: &BeamImage, truth: &BeamImage) -> Result<f64> {
    psnr(estimate.as_slice(), truth.as_slice())
}
