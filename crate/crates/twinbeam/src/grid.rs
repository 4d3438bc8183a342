//! Coherence-area decomposition of a beam profile.
//!
//! Twin beams carry intensity correlations cell by cell rather than pixel by
//! pixel: the smallest transverse region that behaves as one correlated mode
//! is a coherence area. The grid models these areas as a square tiling whose
//! cell edge is set so a configurable number of cells spans the 1/e^2 beam
//! diameter. The true mode shapes are not striped or square; the tiling is a
//! deliberate, testable stand-in parameterized by a single knob.

use crate::error::{Error, Result};
use crate::image::{BeamImage, BinaryMask};

/// One square tile of the coherence grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub id: usize,
    /// Tile bounds in pixels, `x0..x1` by `y0..y1` (exclusive upper).
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    /// Total flux of the build profile inside this tile.
    pub flux: f64,
}

impl GridCell {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1) as f64 / 2.0 - 0.5,
            (self.y0 + self.y1) as f64 / 2.0 - 0.5,
        )
    }
}

/// Square tiling of the beam plane into quantum-correlated macro-cells.
///
/// Cells partition the beam support: every pixel with nonzero intensity in
/// the build profile belongs to exactly one cell, and tiles with no flux are
/// dropped.
#[derive(Debug, Clone)]
pub struct CoherenceGrid {
    width: usize,
    height: usize,
    cell_edge_px: usize,
    beam_diameter_px: f64,
    beam_center: (f64, f64),
    cells: Vec<GridCell>,
}

impl CoherenceGrid {
    /// Builds the grid from a beam profile; `cells_per_diameter` cells span
    /// the 1/e^2 intensity diameter.
    pub fn build(profile: &BeamImage, cells_per_diameter: usize) -> Result<Self> {
        if cells_per_diameter == 0 {
            return Err(Error::invalid("cells_per_diameter must be at least 1"));
        }
        if profile.total_flux() <= 0.0 {
            return Err(Error::EmptySourceProfile);
        }
        let diameter = profile.e2_diameter_px();
        if (cells_per_diameter as f64) > diameter {
            return Err(Error::invalid(format!(
                "cells_per_diameter {} exceeds the beam diameter of {:.1} px",
                cells_per_diameter, diameter
            )));
        }
        let edge = ((diameter / cells_per_diameter as f64).round() as usize).max(1);
        let mut cells = Vec::new();
        let mut id = 0;
        let mut y0 = 0;
        while y0 < profile.height() {
            let y1 = (y0 + edge).min(profile.height());
            let mut x0 = 0;
            while x0 < profile.width() {
                let x1 = (x0 + edge).min(profile.width());
                let mut flux = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        flux += profile.get(x, y);
                    }
                }
                if flux > 0.0 {
                    cells.push(GridCell {
                        id,
                        x0,
                        y0,
                        x1,
                        y1,
                        flux,
                    });
                    id += 1;
                }
                x0 += edge;
            }
            y0 += edge;
        }
        Ok(Self {
            width: profile.width(),
            height: profile.height(),
            cell_edge_px: edge,
            beam_diameter_px: diameter,
            beam_center: profile.centroid(),
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_edge_px(&self) -> usize {
        self.cell_edge_px
    }

    pub fn beam_diameter_px(&self) -> f64 {
        self.beam_diameter_px
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Sum of all cell fluxes.
    pub fn total_flux(&self) -> f64 {
        self.cells.iter().map(|c| c.flux).sum()
    }

    /// Number of cells whose centers fall inside the 1/e^2 disk.
    pub fn cells_within_beam_disk(&self) -> usize {
        let r = self.beam_diameter_px / 2.0;
        self.cells
            .iter()
            .filter(|c| {
                let (cx, cy) = c.center();
                let dx = cx - self.beam_center.0;
                let dy = cy - self.beam_center.1;
                (dx * dx + dy * dy).sqrt() <= r
            })
            .count()
    }

    /// Cell containing the beam centroid.
    pub fn central_cell(&self) -> Option<&GridCell> {
        let (bx, by) = self.beam_center;
        self.cells.iter().find(|c| {
            (c.x0 as f64) <= bx && bx < c.x1 as f64 && (c.y0 as f64) <= by && by < c.y1 as f64
        })
    }

    /// Per-cell mask transmissions and the total transmitted fraction of an
    /// arm image with this grid's layout.
    ///
    /// `t[i]` is masked flux over total flux within cell `i`, in `[0, 1]`;
    /// cells with no arm flux report 0.
    pub fn transmissions(
        &self,
        arm: &BeamImage,
        mask: &BinaryMask,
    ) -> Result<(Vec<f64>, f64)> {
        if arm.width() != self.width || arm.height() != self.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", arm.width(), arm.height()),
            ));
        }
        if mask.width() != self.width || mask.height() != self.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", mask.width(), mask.height()),
            ));
        }
        let mut t = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let mut den = 0.0;
            let mut num = 0.0;
            for y in cell.y0..cell.y1 {
                for x in cell.x0..cell.x1 {
                    let v = arm.get(x, y);
                    den += v;
                    if mask.get(x, y) {
                        num += v;
                    }
                }
            }
            t.push(if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 });
        }
        let total = arm.total_flux();
        let masked = mask.apply(arm)?.total_flux();
        let eta_total = if total > 0.0 { masked / total } else { 0.0 };
        Ok((t, eta_total))
    }
}

/// Per-cell transmission vector and total transmission of a binary mask over
/// one arm of a twin-beam pair.
pub fn mask_transmission(
    arm: &BeamImage,
    grid: &CoherenceGrid,
    mask: &BinaryMask,
) -> Result<(Vec<f64>, f64)> {
    grid.transmissions(arm, mask)
}
