//! Pixel grids, the coordinate/brightness mapping, and mask-based splits.
//!
//! Images are rectangular grids of signed brightness values in
//! `[-0.5, 0.5]` (black to white). Pixel centers map onto the unit square
//! `[-0.5, 0.5]^2` with the lower-left pixel at `(-0.5, -0.5)` and the
//! upper-right pixel at `(0.5, 0.5)`; row 0 is the top image row.

use thiserror::Error;

pub const BRIGHTNESS_MIN: f64 = -0.5;
pub const BRIGHTNESS_MAX: f64 = 0.5;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("pixel index ({col}, {row}) out of range for {width}x{height} grid")]
    IndexOutOfRange {
        col: usize,
        row: usize,
        width: usize,
        height: usize,
    },
    #[error("grid {width}x{height} is degenerate; coordinate mapping needs at least 2x2")]
    DegenerateGrid { width: usize, height: usize },
    #[error("byte value {0} outside 0..=255")]
    ByteRange(i64),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("brightness {0} outside [-0.5, 0.5]")]
    BrightnessRange(f64),
    #[error("value buffer has {got} entries, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("dimension mismatch: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("mask selects no training pixels")]
    EmptyTraining,
    #[error("grid dimensions must be at least 1x1")]
    EmptyGrid,
}

/// Rectangular grid of brightness values in `[-0.5, 0.5]`, row-major,
/// row 0 at the top. Doubles as dataset, rendered figure, and mask source.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    /// Builds a grid from row-major values, validating size and range.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyGrid);
        }
        if values.len() != width * height {
            return Err(GridError::BufferSize {
                got: values.len(),
                expected: width * height,
            });
        }
        for &v in &values {
            if !v.is_finite() {
                return Err(GridError::NonFinite(v));
            }
            if !(BRIGHTNESS_MIN..=BRIGHTNESS_MAX).contains(&v) {
                return Err(GridError::BrightnessRange(v));
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Uniform grid filled with one brightness value.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, GridError> {
        Self::from_values(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        debug_assert!(col < self.width && row < self.height);
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        debug_assert!(col < self.width && row < self.height);
        debug_assert!(
            (BRIGHTNESS_MIN..=BRIGHTNESS_MAX).contains(&value),
            "brightness {value} out of range"
        );
        self.values[row * self.width + col] = value;
    }

    pub fn same_dims(&self, other_width: usize, other_height: usize) -> bool {
        self.width == other_width && self.height == other_height
    }
}

/// Boolean training-membership grid; `true` marks a training pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl Mask {
    pub fn from_flags(width: usize, height: usize, flags: Vec<bool>) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyGrid);
        }
        if flags.len() != width * height {
            return Err(GridError::BufferSize {
                got: flags.len(),
                expected: width * height,
            });
        }
        Ok(Self {
            width,
            height,
            flags,
        })
    }

    /// Mask with every pixel marked as training.
    pub fn all_training(width: usize, height: usize) -> Result<Self, GridError> {
        Self::from_flags(width, height, vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    #[inline]
    pub fn is_training(&self, col: usize, row: usize) -> bool {
        debug_assert!(col < self.width && row < self.height);
        self.flags[row * self.width + col]
    }

    pub fn training_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Renders the mask as an image: training pixels black, the rest white.
    pub fn to_image(&self) -> ImageGrid {
        let values = self
            .flags
            .iter()
            .map(|&f| if f { BRIGHTNESS_MIN } else { BRIGHTNESS_MAX })
            .collect();
        ImageGrid::from_values(self.width, self.height, values).expect("mask image is valid")
    }

    /// Interprets an image as a mask: pixels darker than mid-gray are
    /// training pixels.
    pub fn from_image(img: &ImageGrid) -> Self {
        let flags = img.values().iter().map(|&v| v < 0.0).collect();
        Self {
            width: img.width(),
            height: img.height(),
            flags,
        }
    }
}

/// One labelled point: input coordinates and target brightness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x1: f64,
    pub x2: f64,
    pub y: f64,
}

/// Ordered list of samples, row-major with respect to the source image.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Linear interpolation along one grid axis: index 0 maps to `min`,
/// index `n - 1` maps to `max`. Shared by the pixel mapping and viewport
/// evaluation so the two agree bit-for-bit.
#[inline]
pub(crate) fn lerp_axis(min: f64, max: f64, index: usize, n: usize) -> f64 {
    min + (index as f64 / (n - 1) as f64) * (max - min)
}

/// Maps a pixel index to input coordinates. Row 0 is the top image row,
/// so `row = height - 1` maps to `x2 = -0.5`.
pub fn pixel_to_coords(
    col: usize,
    row: usize,
    width: usize,
    height: usize,
) -> Result<(f64, f64), GridError> {
    if width < 2 || height < 2 {
        return Err(GridError::DegenerateGrid { width, height });
    }
    if col >= width || row >= height {
        return Err(GridError::IndexOutOfRange {
            col,
            row,
            width,
            height,
        });
    }
    let x1 = lerp_axis(BRIGHTNESS_MIN, BRIGHTNESS_MAX, col, width);
    let x2 = lerp_axis(BRIGHTNESS_MIN, BRIGHTNESS_MAX, height - 1 - row, height);
    Ok((x1, x2))
}

/// Maps a stored byte to brightness: 0 is black (-0.5), 255 white (0.5).
pub fn byte_to_brightness(v: i64) -> Result<f64, GridError> {
    if !(0..=255).contains(&v) {
        return Err(GridError::ByteRange(v));
    }
    Ok(v as f64 / 255.0 - 0.5)
}

/// Inverse of [`byte_to_brightness`]. Values outside `[-0.5, 0.5]` are
/// clamped first; rounding is half-away-from-zero.
pub fn brightness_to_byte(y: f64) -> Result<u8, GridError> {
    if !y.is_finite() {
        return Err(GridError::NonFinite(y));
    }
    let clamped = y.clamp(BRIGHTNESS_MIN, BRIGHTNESS_MAX);
    // f64::round rounds half away from zero.
    Ok(((clamped + 0.5) * 255.0).round() as u8)
}

/// Splits an image into training and test sample sets according to a mask.
/// Both sets keep row-major order; every pixel lands in exactly one set.
pub fn split_by_mask(data: &ImageGrid, mask: &Mask) -> Result<(SampleSet, SampleSet), GridError> {
    if data.width() != mask.width() || data.height() != mask.height() {
        return Err(GridError::DimensionMismatch {
            a_width: data.width(),
            a_height: data.height(),
            b_width: mask.width(),
            b_height: mask.height(),
        });
    }
    let mut train = SampleSet::default();
    let mut test = SampleSet::default();
    for row in 0..data.height() {
        for col in 0..data.width() {
            let (x1, x2) = pixel_to_coords(col, row, data.width(), data.height())?;
            let sample = Sample {
                x1,
                x2,
                y: data.get(col, row),
            };
            if mask.is_training(col, row) {
                train.samples.push(sample);
            } else {
                test.samples.push(sample);
            }
        }
    }
    if train.is_empty() {
        return Err(GridError::EmptyTraining);
    }
    Ok((train, test))
}
