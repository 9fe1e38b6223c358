//! Built-in benchmark scenes and the default training mask.
//!
//! `theta_l` holds three dashed horizontal lines; `theta_c` adds four
//! rings between them. The default mask withholds a centered vertical
//! band, so completing the dashed lines requires carrying structure
//! across a region with no nearby training pixels.

use thiserror::Error;

use crate::grid::{ImageGrid, Mask};
use crate::scene::{render_scene, Circle, DashedLine, SceneError, SceneSpec, Shape};

pub const DEFAULT_SIZE: usize = 64;

/// Fraction of image width withheld by the default mask band (26 of 64
/// columns).
const MASK_BAND_NUM: usize = 26;
const MASK_BAND_DEN: usize = 64;

#[derive(Debug, Error)]
pub enum BuiltinError {
    #[error("unknown builtin dataset {0:?} (expected theta_l, theta_c, or mask)")]
    UnknownName(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Scene with three dashed horizontal lines at x2 = -0.25, 0, 0.25.
pub fn theta_l_scene() -> SceneSpec {
    let line = |x2: f64| {
        Shape::DashedLine(DashedLine {
            endpoint_a: [-0.5, x2],
            endpoint_b: [0.5, x2],
            thickness: 3.0 / 63.0,
            dash_on: 6.0 / 63.0,
            dash_off: 6.0 / 63.0,
            value: 0.5,
        })
    };
    SceneSpec {
        background: -0.5,
        shapes: vec![line(-0.25), line(0.0), line(0.25)],
    }
}

/// The `theta_l` scene plus four rings centered at (±0.28, ±0.28).
pub fn theta_c_scene() -> SceneSpec {
    let mut spec = theta_l_scene();
    for &cx in &[-0.28, 0.28] {
        for &cy in &[-0.28, 0.28] {
            spec.shapes.push(Shape::Circle(Circle {
                center: [cx, cy],
                radius: 8.0 / 63.0,
                thickness: 3.0 / 63.0,
                filled: false,
                value: 0.5,
            }));
        }
    }
    spec
}

/// Default mask: training everywhere except a centered vertical band
/// (26 columns at width 64, scaled proportionally at other widths).
pub fn builtin_mask(width: usize, height: usize) -> Mask {
    let band = ((width * MASK_BAND_NUM) as f64 / MASK_BAND_DEN as f64).round() as usize;
    let band = band.clamp(1, width.saturating_sub(1));
    let start = (width - band) / 2;
    let mut flags = vec![true; width * height];
    for row in 0..height {
        for col in start..start + band {
            flags[row * width + col] = false;
        }
    }
    Mask::from_flags(width, height, flags).expect("mask dims are valid")
}

/// A named builtin: either a dataset image or the training mask.
#[derive(Debug, Clone)]
pub enum BuiltinData {
    Image(ImageGrid),
    Mask(Mask),
}

pub fn is_builtin_name(name: &str) -> bool {
    matches!(name, "theta_l" | "theta_c" | "mask")
}

/// Returns the default 64x64 rendering of a named builtin. Deterministic:
/// the same name always yields the same grid.
pub fn builtin_dataset(name: &str) -> Result<BuiltinData, BuiltinError> {
    match name {
        "theta_l" => Ok(BuiltinData::Image(render_scene(
            &theta_l_scene(),
            DEFAULT_SIZE,
            DEFAULT_SIZE,
        )?)),
        "theta_c" => Ok(BuiltinData::Image(render_scene(
            &theta_c_scene(),
            DEFAULT_SIZE,
            DEFAULT_SIZE,
        )?)),
        "mask" => Ok(BuiltinData::Mask(builtin_mask(DEFAULT_SIZE, DEFAULT_SIZE))),
        other => Err(BuiltinError::UnknownName(other.to_string())),
    }
}
