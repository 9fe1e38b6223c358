//! Rendering of learned functions on pixel grids and extraction of the
//! zero-output lines of first-hidden-layer neurons.
//!
//! A 2-input neuron with weights (w1, w2) and bias b outputs zero exactly
//! on the line w1*x1 + w2*x2 + b = 0. Overlaying those lines for all
//! first-layer neurons shows where the network's piecewise structure
//! sits relative to the training features.

use thiserror::Error;

use crate::grid::{lerp_axis, GridError, ImageGrid, Mask, BRIGHTNESS_MAX, BRIGHTNESS_MIN};
use crate::mlp::NetworkParams;

#[derive(Debug, Error)]
pub enum IntrospectError {
    #[error("predictor returned non-finite value at pixel ({col}, {row})")]
    NonFinite { col: usize, row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Implicit 2D line a*x1 + b*x2 + c = 0, normalized so a^2 + b^2 = 1 and
/// the first nonzero of (a, b) is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line2D {
    /// Normalizes general coefficients; returns `None` when (a, b) = (0, 0).
    pub fn from_coefficients(a: f64, b: f64, c: f64) -> Option<Self> {
        let norm = (a * a + b * b).sqrt();
        if norm == 0.0 {
            return None;
        }
        let (mut a, mut b, mut c) = (a / norm, b / norm, c / norm);
        let flip = if a != 0.0 { a < 0.0 } else { b < 0.0 };
        if flip {
            a = -a;
            b = -b;
            c = -c;
        }
        Some(Self { a, b, c })
    }

    /// Signed distance from a point to the line.
    #[inline]
    pub fn signed_distance(&self, x1: f64, x2: f64) -> f64 {
        self.a * x1 + self.b * x2 + self.c
    }
}

/// Axis-aligned rendering window plus the data rectangle drawn dotted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    /// (x1_min, x1_max, x2_min, x2_max) of the dotted data rectangle.
    pub data_rect: (f64, f64, f64, f64),
}

impl Viewport {
    pub const DATA_RECT: (f64, f64, f64, f64) = (-0.5, 0.5, -0.5, 0.5);

    /// The data window itself: `[-0.5, 0.5]^2`.
    pub fn data() -> Self {
        Self {
            x1_min: -0.5,
            x1_max: 0.5,
            x2_min: -0.5,
            x2_max: 0.5,
            data_rect: Self::DATA_RECT,
        }
    }

    /// The diagram window `[-1, 1]^2`: twice the data rectangle, so line
    /// behavior outside the data region stays visible.
    pub fn diagram() -> Self {
        Self {
            x1_min: -1.0,
            x1_max: 1.0,
            x2_min: -1.0,
            x2_max: 1.0,
            data_rect: Self::DATA_RECT,
        }
    }

    pub fn validate(&self) -> Result<(), IntrospectError> {
        if !(self.x1_min < self.x1_max && self.x2_min < self.x2_max) {
            return Err(IntrospectError::Dimension(format!(
                "viewport bounds must satisfy min < max, got x1 [{}, {}], x2 [{}, {}]",
                self.x1_min, self.x1_max, self.x2_min, self.x2_max
            )));
        }
        Ok(())
    }

    /// Pixel-center coordinates under the same corner convention as the
    /// dataset mapping: column 0 at x1_min, top row at x2_max.
    #[inline]
    pub fn pixel_center(&self, col: usize, row: usize, width: usize, height: usize) -> (f64, f64) {
        let x1 = lerp_axis(self.x1_min, self.x1_max, col, width);
        let x2 = lerp_axis(self.x2_min, self.x2_max, height - 1 - row, height);
        (x1, x2)
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), IntrospectError> {
    if width < 2 || height < 2 {
        return Err(IntrospectError::Grid(GridError::DegenerateGrid {
            width,
            height,
        }));
    }
    Ok(())
}

/// Evaluates a predictor at every pixel center of the viewport, clamping
/// the result into the brightness range.
pub fn eval_grid(
    predictor: impl Fn(f64, f64) -> f64,
    width: usize,
    height: usize,
    viewport: &Viewport,
) -> Result<ImageGrid, IntrospectError> {
    viewport.validate()?;
    check_dims(width, height)?;
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (x1, x2) = viewport.pixel_center(col, row, width, height);
            let v = predictor(x1, x2);
            if !v.is_finite() {
                return Err(IntrospectError::NonFinite { col, row });
            }
            values.push(v.clamp(BRIGHTNESS_MIN, BRIGHTNESS_MAX));
        }
    }
    Ok(ImageGrid::from_values(width, height, values)?)
}

/// Zero lines of the first hidden layer, plus the indices of neurons whose
/// input weights are both zero (those have no zero set).
#[derive(Debug, Clone)]
pub struct ZeroLines {
    pub lines: Vec<Line2D>,
    pub degenerate: Vec<usize>,
}

/// Extracts the zero-output line of every first-hidden-layer neuron of a
/// 2-input network.
pub fn first_layer_zero_lines(params: &NetworkParams) -> Result<ZeroLines, IntrospectError> {
    if params.input_size() != 2 {
        return Err(IntrospectError::Dimension(format!(
            "zero-line extraction needs a 2-input network, got {} inputs",
            params.input_size()
        )));
    }
    let first = &params.layers()[0];
    let mut lines = Vec::new();
    let mut degenerate = Vec::new();
    for neuron in 0..first.fan_out {
        let w1 = first.weight(neuron, 0);
        let w2 = first.weight(neuron, 1);
        let b = first.biases[neuron];
        match Line2D::from_coefficients(w1, w2, b) {
            Some(line) => lines.push(line),
            None => degenerate.push(neuron),
        }
    }
    Ok(ZeroLines { lines, degenerate })
}

/// Renders lines as translucent dark strokes on a white canvas and
/// overdraws the data rectangle as a dotted black border.
///
/// Compositing is multiplicative on the lightness above true black
/// (`value + 0.5`), so overlapping strokes darken each other and the
/// result is independent of line order.
pub fn render_zero_lines(
    lines: &[Line2D],
    width: usize,
    height: usize,
    viewport: &Viewport,
    opacity: f64,
) -> Result<ImageGrid, IntrospectError> {
    viewport.validate()?;
    check_dims(width, height)?;
    if !(opacity > 0.0 && opacity <= 1.0) {
        return Err(IntrospectError::Dimension(format!(
            "opacity must be in (0, 1], got {opacity}"
        )));
    }
    let step_x = (viewport.x1_max - viewport.x1_min) / (width - 1) as f64;
    let step_y = (viewport.x2_max - viewport.x2_min) / (height - 1) as f64;
    let hit_radius = 0.5 * (step_x * step_x + step_y * step_y).sqrt();
    let keep = 1.0 - opacity;

    let mut light = vec![1.0f64; width * height];
    for row in 0..height {
        for col in 0..width {
            let (x1, x2) = viewport.pixel_center(col, row, width, height);
            let l = &mut light[row * width + col];
            for line in lines {
                if line.signed_distance(x1, x2).abs() <= hit_radius {
                    *l *= keep;
                }
            }
        }
    }

    let mut img = ImageGrid::from_values(
        width,
        height,
        light
            .into_iter()
            .map(|l| (l - 0.5).clamp(BRIGHTNESS_MIN, BRIGHTNESS_MAX))
            .collect(),
    )
    .map_err(IntrospectError::Grid)?;

    draw_dotted_rect(&mut img, viewport);
    Ok(img)
}

/// Nearest pixel column/row for a coordinate; clamped into the grid.
fn nearest_index(min: f64, max: f64, v: f64, n: usize) -> usize {
    let t = (v - min) / (max - min) * (n - 1) as f64;
    (t.round().max(0.0) as usize).min(n - 1)
}

/// Dotted border (2 px on, 2 px off, pure black) of the viewport's data
/// rectangle.
fn draw_dotted_rect(img: &mut ImageGrid, viewport: &Viewport) {
    let (width, height) = (img.width(), img.height());
    let (rx_min, rx_max, ry_min, ry_max) = viewport.data_rect;
    let col_min = nearest_index(viewport.x1_min, viewport.x1_max, rx_min, width);
    let col_max = nearest_index(viewport.x1_min, viewport.x1_max, rx_max, width);
    // Row 0 is the top: larger x2 maps to a smaller row index.
    let row_top = height - 1 - nearest_index(viewport.x2_min, viewport.x2_max, ry_max, height);
    let row_bottom = height - 1 - nearest_index(viewport.x2_min, viewport.x2_max, ry_min, height);

    let mut dot = |k: usize, col: usize, row: usize| {
        if k % 4 < 2 {
            img.set(col, row, BRIGHTNESS_MIN);
        }
    };
    for (k, col) in (col_min..=col_max).enumerate() {
        dot(k, col, row_top);
    }
    for (k, col) in (col_min..=col_max).enumerate() {
        dot(k, col, row_bottom);
    }
    for (k, row) in (row_top..=row_bottom).enumerate() {
        dot(k, col_min, row);
    }
    for (k, row) in (row_top..=row_bottom).enumerate() {
        dot(k, col_max, row);
    }
}

/// Euclidean distance from every pixel to the nearest training pixel,
/// both raw and affinely normalized into the brightness range.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    pub normalized: ImageGrid,
    /// Row-major raw distances in coordinate units.
    pub raw: Vec<f64>,
}

/// Distance-to-training-set map over the mask's pixel lattice.
/// Brute force over all training pixels; grids here are small.
pub fn distance_to_training_map(mask: &Mask) -> Result<DistanceMap, IntrospectError> {
    let (width, height) = (mask.width(), mask.height());
    check_dims(width, height)?;
    let mut training = Vec::new();
    for row in 0..height {
        for col in 0..width {
            if mask.is_training(col, row) {
                let (x1, x2) = crate::grid::pixel_to_coords(col, row, width, height)?;
                training.push((x1, x2));
            }
        }
    }
    if training.is_empty() {
        return Err(IntrospectError::Grid(GridError::EmptyTraining));
    }

    let mut raw = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (x1, x2) = crate::grid::pixel_to_coords(col, row, width, height)?;
            let mut best = f64::INFINITY;
            for &(tx, ty) in &training {
                let d2 = (x1 - tx) * (x1 - tx) + (x2 - ty) * (x2 - ty);
                if d2 < best {
                    best = d2;
                }
            }
            raw.push(best.sqrt());
        }
    }

    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f64> = if max > min {
        raw.iter()
            .map(|&d| (-0.5 + (d - min) / (max - min)).clamp(BRIGHTNESS_MIN, BRIGHTNESS_MAX))
            .collect()
    } else {
        vec![BRIGHTNESS_MIN; raw.len()]
    };
    let normalized = ImageGrid::from_values(width, height, values).map_err(IntrospectError::Grid)?;
    Ok(DistanceMap { normalized, raw })
}
