//! Declarative 2D scenes (dashed lines, circles) rasterized onto pixel
//! grids. Coverage is binary per pixel center; the last shape covering a
//! pixel wins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{pixel_to_coords, GridError, ImageGrid, BRIGHTNESS_MAX, BRIGHTNESS_MIN};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("shape thickness must be > 0, got {0}")]
    NonPositiveThickness(f64),
    #[error("circle radius must be > 0, got {0}")]
    NonPositiveRadius(f64),
    #[error("dash_on must be > 0 when dash_off > 0 (got on={on}, off={off})")]
    BadDashPattern { on: f64, off: f64 },
    #[error("brightness {0} outside [-0.5, 0.5]")]
    BrightnessRange(f64),
    #[error("non-finite field value {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A straight segment with a periodic dash pattern. `dash_off = 0` means
/// solid. The pattern starts on-phase at `endpoint_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DashedLine {
    pub endpoint_a: [f64; 2],
    pub endpoint_b: [f64; 2],
    pub thickness: f64,
    pub dash_on: f64,
    pub dash_off: f64,
    pub value: f64,
}

/// A circle, rendered either as a ring of the given thickness or filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
    pub thickness: f64,
    pub filled: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    DashedLine(DashedLine),
    Circle(Circle),
}

/// Ordered list of shapes over a uniform background brightness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub background: f64,
    pub shapes: Vec<Shape>,
}

fn check_brightness(v: f64) -> Result<(), SceneError> {
    if !v.is_finite() {
        return Err(SceneError::NonFinite(v));
    }
    if !(BRIGHTNESS_MIN..=BRIGHTNESS_MAX).contains(&v) {
        return Err(SceneError::BrightnessRange(v));
    }
    Ok(())
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        check_brightness(self.background)?;
        for shape in &self.shapes {
            match shape {
                Shape::DashedLine(l) => {
                    for &v in l.endpoint_a.iter().chain(l.endpoint_b.iter()) {
                        if !v.is_finite() {
                            return Err(SceneError::NonFinite(v));
                        }
                    }
                    if l.thickness <= 0.0 || l.thickness.is_nan() {
                        return Err(SceneError::NonPositiveThickness(l.thickness));
                    }
                    if l.dash_off > 0.0 && (l.dash_on <= 0.0 || l.dash_on.is_nan()) {
                        return Err(SceneError::BadDashPattern {
                            on: l.dash_on,
                            off: l.dash_off,
                        });
                    }
                    check_brightness(l.value)?;
                }
                Shape::Circle(c) => {
                    for &v in &c.center {
                        if !v.is_finite() {
                            return Err(SceneError::NonFinite(v));
                        }
                    }
                    if c.radius <= 0.0 || c.radius.is_nan() {
                        return Err(SceneError::NonPositiveRadius(c.radius));
                    }
                    if c.thickness <= 0.0 || c.thickness.is_nan() {
                        return Err(SceneError::NonPositiveThickness(c.thickness));
                    }
                    check_brightness(c.value)?;
                }
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, SceneError> {
        let spec: SceneSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spec serializes")
    }
}

impl Shape {
    /// Whether this shape covers the point `(x1, x2)`.
    fn covers(&self, x1: f64, x2: f64) -> bool {
        match self {
            Shape::DashedLine(l) => {
                let ax = l.endpoint_a[0];
                let ay = l.endpoint_a[1];
                let dx = l.endpoint_b[0] - ax;
                let dy = l.endpoint_b[1] - ay;
                let len_sq = dx * dx + dy * dy;
                let px = x1 - ax;
                let py = x2 - ay;
                // Arc-length position of the projection, clamped to the segment.
                let (s, dist_sq) = if len_sq == 0.0 {
                    (0.0, px * px + py * py)
                } else {
                    let len = len_sq.sqrt();
                    let t = ((px * dx + py * dy) / len_sq).clamp(0.0, 1.0);
                    let cx = px - t * dx;
                    let cy = py - t * dy;
                    (t * len, cx * cx + cy * cy)
                };
                let half = l.thickness / 2.0;
                if dist_sq > half * half {
                    return false;
                }
                if l.dash_off <= 0.0 {
                    return true;
                }
                let period = l.dash_on + l.dash_off;
                s.rem_euclid(period) < l.dash_on
            }
            Shape::Circle(c) => {
                let dx = x1 - c.center[0];
                let dy = x2 - c.center[1];
                let dist = (dx * dx + dy * dy).sqrt();
                if c.filled {
                    dist <= c.radius
                } else {
                    (dist - c.radius).abs() <= c.thickness / 2.0
                }
            }
        }
    }
}

/// Rasterizes a scene on a `width x height` grid. Each pixel takes the
/// value of the last shape covering its center, else the background.
pub fn render_scene(
    spec: &SceneSpec,
    width: usize,
    height: usize,
) -> Result<ImageGrid, SceneError> {
    spec.validate()?;
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (x1, x2) = pixel_to_coords(col, row, width, height)?;
            let mut v = spec.background;
            for shape in &spec.shapes {
                if shape.covers(x1, x2) {
                    v = match shape {
                        Shape::DashedLine(l) => l.value,
                        Shape::Circle(c) => c.value,
                    };
                }
            }
            values.push(v);
        }
    }
    Ok(ImageGrid::from_values(width, height, values)?)
}
