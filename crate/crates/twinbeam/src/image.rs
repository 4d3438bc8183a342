//! Intensity maps and binary masks on the detector plane.
//!
//! A [`BeamImage`] is a nonnegative 2-D intensity map with a physical pixel
//! pitch; it represents optical beam profiles and reconstruction targets.
//! A [`BinaryMask`] is an on/off pixel pattern of the kind a micromirror
//! array displays.

use crate::error::{Error, Result};

/// Micromirror pitch in micrometers used for default geometry.
pub const DEFAULT_PITCH_UM: f64 = 13.68;

/// Nonnegative 2-D intensity map with physical pixel pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamImage {
    width: usize,
    height: usize,
    pitch_um: f64,
    data: Vec<f64>,
    /// Optional physical tag giving the total beam power in milliwatts.
    pub total_power_mw: Option<f64>,
}

impl BeamImage {
    /// Builds an image from row-major intensity data.
    pub fn new(width: usize, height: usize, pitch_um: f64, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if !(pitch_um > 0.0) {
            return Err(Error::invalid("pixel pitch must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::dims(
                format!("{} intensity values", width * height),
                format!("{}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("intensity values must be finite and >= 0"));
        }
        Ok(Self {
            width,
            height,
            pitch_um,
            data,
            total_power_mw: None,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        pitch_um: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, pitch_um, data)
    }

    pub fn zeros(width: usize, height: usize, pitch_um: f64) -> Result<Self> {
        Self::new(width, height, pitch_um, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Row-major intensity values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sum of all intensity values.
    pub fn total_flux(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// Returns a copy with every intensity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(Error::invalid("scale factor must be >= 0"));
        }
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= factor;
        }
        if let Some(p) = out.total_power_mw {
            out.total_power_mw = Some(p * factor);
        }
        Ok(out)
    }

    /// Tags the image with a physical power and returns it.
    pub fn with_total_power_mw(mut self, power_mw: f64) -> Self {
        self.total_power_mw = Some(power_mw);
        self
    }

    /// Intensity-weighted centroid in pixel coordinates.
    pub fn centroid(&self) -> (f64, f64) {
        let total = self.total_flux();
        if total <= 0.0 {
            return ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0);
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(x, y);
                cx += v * x as f64;
                cy += v * y as f64;
            }
        }
        (cx / total, cy / total)
    }

    /// 1/e^2 intensity diameter in pixels, estimated from second moments.
    ///
    /// For a Gaussian profile the 1/e^2 radius equals twice the intensity
    /// standard deviation; the geometric mean of the x and y estimates is
    /// returned so elongated profiles get a single representative scale.
    pub fn e2_diameter_px(&self) -> f64 {
        let total = self.total_flux();
        if total <= 0.0 {
            return 0.0;
        }
        let (cx, cy) = self.centroid();
        let mut vx = 0.0;
        let mut vy = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(x, y);
                vx += v * (x as f64 - cx).powi(2);
                vy += v * (y as f64 - cy).powi(2);
            }
        }
        let sx = (vx / total).sqrt();
        let sy = (vy / total).sqrt();
        4.0 * (sx * sy).sqrt()
    }
}

/// Binary on/off pixel pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be at least 1x1"));
        }
        if data.len() != width * height {
            return Err(Error::dims(
                format!("{} mask entries", width * height),
                format!("{}", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| true)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = on;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count_on(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Complement mask: on where this one is off.
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// Masks an intensity image, zeroing every off pixel.
    pub fn apply(&self, image: &BeamImage) -> Result<BeamImage> {
        if self.width != image.width() || self.height != image.height() {
            return Err(Error::dims(
                format!("{}x{}", image.width(), image.height()),
                format!("{}x{}", self.width, self.height),
            ));
        }
        let data = image
            .as_slice()
            .iter()
            .zip(&self.data)
            .map(|(v, &on)| if on { *v } else { 0.0 })
            .collect();
        BeamImage::new(image.width(), image.height(), image.pitch_um(), data)
    }

    /// Converts to a 0/1 intensity image.
    pub fn to_image(&self, pitch_um: f64) -> Result<BeamImage> {
        BeamImage::new(
            self.width,
            self.height,
            pitch_um,
            self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }
}

/// Built-in beam profiles and test patterns.
pub mod phantoms {
    use super::{BeamImage, BinaryMask};
    use crate::error::Result;

    /// Gaussian beam with the given 1/e^2 intensity radius, centered on the
    /// image (center at ((w-1)/2, (h-1)/2) so even-sized images stay
    /// mirror-symmetric).
    pub fn gaussian_beam(
        width: usize,
        height: usize,
        pitch_um: f64,
        e2_radius_px: f64,
    ) -> Result<BeamImage> {
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        let r2 = e2_radius_px * e2_radius_px;
        BeamImage::from_fn(width, height, pitch_um, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            (-2.0 * (dx * dx + dy * dy) / r2).exp()
        })
    }

    /// Checkerboard with cells of `cell_px` pixels, alternating every cell.
    pub fn checkerboard_mask(width: usize, height: usize, cell_px: usize) -> BinaryMask {
        let c = cell_px.max(1);
        BinaryMask::from_fn(width, height, |x, y| (x / c + y / c) % 2 == 0)
    }

    /// Smiley-face bitmap: a filled disk with two eyes and a mouth cut out.
    ///
    /// The face diameter is `diameter_px`; feature sizes scale with it.
    pub fn happy_face_mask(width: usize, height: usize, diameter_px: f64) -> BinaryMask {
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        let r = diameter_px / 2.0;
        let eye_r = (r / 8.0).max(1.0);
        let eye_dx = r * 0.38;
        let eye_dy = r * 0.35;
        let mouth_r_outer = r * 0.62;
        let mouth_r_inner = r * 0.45;
        BinaryMask::from_fn(width, height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let rr = (dx * dx + dy * dy).sqrt();
            if rr > r {
                return false;
            }
            // eyes
            for sx in [-1.0, 1.0] {
                let ex = dx - sx * eye_dx;
                let ey = dy + eye_dy;
                if (ex * ex + ey * ey).sqrt() <= eye_r {
                    return false;
                }
            }
            // mouth: lower arc band
            if dy > 0.0 && rr >= mouth_r_inner && rr <= mouth_r_outer && dy > dx.abs() * 0.55 {
                return false;
            }
            true
        })
    }

    /// Cross (plus sign) of two bars through the image center, rotated by
    /// `angle_deg`.
    pub fn cross_mask(
        width: usize,
        height: usize,
        arm_length_px: f64,
        arm_width_px: f64,
        angle_deg: f64,
    ) -> BinaryMask {
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        let theta = angle_deg.to_radians();
        let (s, c) = theta.sin_cos();
        let half_len = arm_length_px / 2.0;
        let half_wid = arm_width_px / 2.0;
        BinaryMask::from_fn(width, height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // rotate into the cross frame
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            (u.abs() <= half_len && v.abs() <= half_wid)
                || (v.abs() <= half_len && u.abs() <= half_wid)
        })
    }

    /// Vertical bar covering pixel columns `[x0, x0 + width_px)`, full height.
    /// Columns outside the image are clipped.
    pub fn vertical_bar_mask(width: usize, height: usize, x0: i64, width_px: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, _| {
            let xi = x as i64;
            xi >= x0 && xi < x0 + width_px as i64
        })
    }

    /// Horizontal bar covering pixel rows `[y0, y0 + height_px)`, full width.
    pub fn horizontal_bar_mask(
        width: usize,
        height: usize,
        y0: i64,
        height_px: usize,
    ) -> BinaryMask {
        BinaryMask::from_fn(width, height, |_, y| {
            let yi = y as i64;
            yi >= y0 && yi < y0 + height_px as i64
        })
    }

    /// Left half-plane mask: on for pixel columns `x < width / 2`.
    pub fn half_plane_mask(width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, _| x < width / 2)
    }

    /// Block letter 'E' mask occupying roughly the central two thirds of the
    /// image, strokes one sixth of the letter height.
    pub fn letter_e_mask(width: usize, height: usize) -> BinaryMask {
        let lh = (height as f64 * 0.7).round() as usize;
        let lw = (width as f64 * 0.55).round() as usize;
        let stroke = (lh / 6).max(1);
        let top = (height - lh) / 2;
        let left = (width - lw) / 2;
        BinaryMask::from_fn(width, height, |x, y| {
            if x < left || x >= left + lw || y < top || y >= top + lh {
                return false;
            }
            let yy = y - top;
            let xx = x - left;
            let spine = xx < stroke;
            let top_arm = yy < stroke;
            let mid_arm = yy >= (lh - stroke) / 2 && yy < (lh - stroke) / 2 + stroke;
            let bot_arm = yy >= lh - stroke;
            spine || top_arm || mid_arm || bot_arm
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_intensity() {
        let err = BeamImage::new(2, 2, 1.0, vec![0.0, 1.0, -0.5, 2.0]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_zero_dims_and_pitch() {
        assert!(BeamImage::new(0, 2, 1.0, vec![]).is_err());
        assert!(BeamImage::new(2, 2, 0.0, vec![0.0; 4]).is_err());
    }

    #[test]
    fn gaussian_diameter_estimate_matches_construction() {
        let img = phantoms::gaussian_beam(128, 128, 1.0, 20.0).unwrap();
        let d = img.e2_diameter_px();
        assert!((d - 40.0).abs() < 0.5, "estimated diameter {d}");
    }

    #[test]
    fn mask_apply_zeroes_off_pixels() {
        let img = BeamImage::new(2, 1, 1.0, vec![3.0, 5.0]).unwrap();
        let mask = BinaryMask::new(2, 1, vec![true, false]).unwrap();
        let out = mask.apply(&img).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 0.0]);
    }

    #[test]
    fn mask_apply_dimension_mismatch() {
        let img = BeamImage::new(2, 1, 1.0, vec![3.0, 5.0]).unwrap();
        let mask = BinaryMask::ones(3, 1);
        assert!(mask.apply(&img).is_err());
    }

    #[test]
    fn complement_covers_everything() {
        let m = phantoms::checkerboard_mask(8, 8, 1);
        let c = m.complement();
        assert_eq!(m.count_on() + c.count_on(), 64);
    }

    #[test]
    fn half_plane_splits_symmetric_gaussian_evenly() {
        let img = phantoms::gaussian_beam(128, 128, 1.0, 20.0).unwrap();
        let mask = phantoms::half_plane_mask(128, 128);
        let masked = mask.apply(&img).unwrap();
        let ratio = masked.total_flux() / img.total_flux();
        assert!((ratio - 0.5).abs() < 1e-9, "ratio {ratio}");
    }
}
