//! Binary nu-SVC with an RBF kernel, solved from scratch by a same-class
//! working-set dual optimizer (see [`solver`]).
//!
//! The dual minimizes `1/2 * sum_ij alpha_i alpha_j y_i y_j K(x_i, x_j)`
//! subject to `0 <= alpha_i <= cost / l`, `sum alpha_i y_i = 0`, and
//! `sum alpha_i = nu`. With `cost = 1` this is the textbook formulation;
//! `cost` rescales the box so a cost-like parameter can be swept.

mod solver;

pub use solver::solve_nu_svc;

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::grid::{pixel_to_coords, GridError, ImageGrid, Mask, BRIGHTNESS_MAX, BRIGHTNESS_MIN};
use crate::introspect::Viewport;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("labelled set must contain both classes")]
    SingleClass,
    #[error("labelled set needs at least 2 points, got {0}")]
    TooSmall(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(
        "infeasible nu: nu*l/2 = {required:.6} exceeds min(pos, neg)*cost = {available:.6}"
    )]
    Infeasible { required: f64, available: f64 },
    #[error("solver hit the iteration cap with KKT gap {gap:.3e} > epsilon {epsilon:.3e}")]
    NonConvergence { gap: f64, epsilon: f64 },
    #[error("model has no support vectors")]
    EmptyModel,
    #[error("model was loaded from a file and carries no box bound")]
    MissingBoxBound,
    #[error("model file format: {0}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary-labelled 2D points. Both classes are always present.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    points: Vec<(f64, f64)>,
    labels: Vec<i8>,
}

impl LabeledSet {
    pub fn new(points: Vec<(f64, f64)>, labels: Vec<i8>) -> Result<Self, SvmError> {
        if points.len() != labels.len() {
            return Err(SvmError::InvalidConfig(format!(
                "{} points vs {} labels",
                points.len(),
                labels.len()
            )));
        }
        if points.len() < 2 {
            return Err(SvmError::TooSmall(points.len()));
        }
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(SvmError::InvalidConfig("labels must be +1 or -1".into()));
        }
        if points.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(SvmError::InvalidConfig("non-finite coordinate".into()));
        }
        if !labels.contains(&1) || !labels.contains(&-1) {
            return Err(SvmError::SingleClass);
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.len() - pos)
    }
}

/// nu-SVC hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NuSvcConfig {
    /// Lower bound on the support-vector fraction, upper bound on the
    /// margin-error fraction.
    pub nu: f64,
    /// RBF width: `K(x, z) = exp(-gamma * |x - z|^2)`.
    pub gamma: f64,
    /// Rescales the box bound to `cost / l`; 1 recovers the plain
    /// formulation.
    pub cost: f64,
    /// KKT stopping tolerance.
    pub epsilon: f64,
    /// Safety cap on working-set iterations.
    pub max_iterations: u64,
}

impl NuSvcConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            nu: 0.2,
            gamma,
            cost: 1.0,
            epsilon: 0.001,
            max_iterations: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(SvmError::InvalidConfig(format!(
                "nu must be in (0, 1), got {}",
                self.nu
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvmError::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.cost > 0.0 && self.cost.is_finite()) {
            return Err(SvmError::InvalidConfig(format!(
                "cost must be positive, got {}",
                self.cost
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SvmError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(SvmError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trained classifier: support vectors with signed dual coefficients
/// `alpha_i * y_i`, the bias, and the kernel width.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_points: Vec<(f64, f64)>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Box bound `cost / l` of the training problem. Present on solved
    /// models; `None` after loading from a file (the format does not
    /// carry it).
    pub box_bound: Option<f64>,
}

impl SvmModel {
    /// Decision value `f(x) = sum_i coeff_i K(sv_i, x) + bias`.
    pub fn decision(&self, x1: f64, x2: f64) -> f64 {
        let mut sum = self.bias;
        for (&(sx, sy), &coeff) in self.support_points.iter().zip(&self.coefficients) {
            sum += coeff * rbf_kernel((sx, sy), (x1, x2), self.gamma);
        }
        sum
    }

    pub fn support_count(&self) -> usize {
        self.support_points.len()
    }
}

/// RBF kernel `exp(-gamma * |x - z|^2)`; always in (0, 1], symmetric.
#[inline]
pub fn rbf_kernel(x: (f64, f64), z: (f64, f64), gamma: f64) -> f64 {
    let dx = x.0 - z.0;
    let dy = x.1 - z.1;
    (-gamma * (dx * dx + dy * dy)).exp()
}

/// Thresholds an image into +1/-1 labels at `threshold_raw` on the [0, 1]
/// lightness scale (brightness + 0.5), keeping only training-mask pixels
/// when a mask is given. Ties go to +1.
pub fn binarize(
    data: &ImageGrid,
    threshold_raw: f64,
    mask: Option<&Mask>,
) -> Result<LabeledSet, SvmError> {
    if !(0.0..=1.0).contains(&threshold_raw) {
        return Err(SvmError::InvalidConfig(format!(
            "threshold must be in [0, 1], got {threshold_raw}"
        )));
    }
    if let Some(m) = mask {
        if m.width() != data.width() || m.height() != data.height() {
            return Err(SvmError::Grid(GridError::DimensionMismatch {
                a_width: data.width(),
                a_height: data.height(),
                b_width: m.width(),
                b_height: m.height(),
            }));
        }
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for row in 0..data.height() {
        for col in 0..data.width() {
            if let Some(m) = mask {
                if !m.is_training(col, row) {
                    continue;
                }
            }
            let (x1, x2) = pixel_to_coords(col, row, data.width(), data.height())?;
            points.push((x1, x2));
            let lightness = data.get(col, row) + 0.5;
            labels.push(if lightness >= threshold_raw { 1 } else { -1 });
        }
    }
    LabeledSet::new(points, labels)
}

/// Continuous and binary decision images over a viewport. The continuous
/// image is `clamp(f(x)/2)` so the natural ±1 range of the decision value
/// maps onto the brightness range; the binary image is `sign(f) * 0.5`
/// with ties to +.
pub fn decision_grid(
    model: &SvmModel,
    width: usize,
    height: usize,
    viewport: &Viewport,
) -> Result<(ImageGrid, ImageGrid), SvmError> {
    if width < 2 || height < 2 {
        return Err(SvmError::Grid(GridError::DegenerateGrid { width, height }));
    }
    let mut continuous = Vec::with_capacity(width * height);
    let mut binary = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (x1, x2) = viewport.pixel_center(col, row, width, height);
            let f = model.decision(x1, x2);
            continuous.push((f / 2.0).clamp(BRIGHTNESS_MIN, BRIGHTNESS_MAX));
            binary.push(if f >= 0.0 { BRIGHTNESS_MAX } else { BRIGHTNESS_MIN });
        }
    }
    Ok((
        ImageGrid::from_values(width, height, continuous)?,
        ImageGrid::from_values(width, height, binary)?,
    ))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a model as UTF-8 text: magic line, gamma and bias, then one
/// line per support vector (`x1 x2 coeff`).
pub fn save_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<(), SvmError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn encode_model(model: &SvmModel) -> String {
    let mut out = String::new();
    out.push_str("NUSVC 1\n");
    out.push_str(&format!(
        "gamma {} bias {}\n",
        fmt_f64(model.gamma),
        fmt_f64(model.bias)
    ));
    for (&(x1, x2), &coeff) in model.support_points.iter().zip(&model.coefficients) {
        out.push_str(&format!(
            "{} {} {}\n",
            fmt_f64(x1),
            fmt_f64(x2),
            fmt_f64(coeff)
        ));
    }
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, SvmError> {
    let text = fs::read_to_string(path)?;
    decode_model(&text)
}

pub fn decode_model(text: &str) -> Result<SvmModel, SvmError> {
    let mut lines = text.lines();
    match lines.next() {
        Some("NUSVC 1") => {}
        other => {
            return Err(SvmError::Format(format!(
                "expected magic line \"NUSVC 1\", got {other:?}"
            )))
        }
    }
    let header = lines
        .next()
        .ok_or_else(|| SvmError::Format("missing gamma/bias line".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let [_, gamma, _, bias] = tokens.as_slice() else {
        return Err(SvmError::Format(format!("bad header line {header:?}")));
    };
    if tokens[0] != "gamma" || tokens[2] != "bias" {
        return Err(SvmError::Format(format!("bad header line {header:?}")));
    }
    let parse = |t: &str| -> Result<f64, SvmError> {
        t.parse()
            .map_err(|_| SvmError::Format(format!("bad number {t:?}")))
    };
    let gamma = parse(gamma)?;
    let bias = parse(bias)?;

    let mut support_points = Vec::new();
    let mut coefficients = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [x1, x2, coeff] = fields.as_slice() else {
            return Err(SvmError::Format(format!(
                "support vector line has {} fields, expected 3",
                fields.len()
            )));
        };
        support_points.push((parse(x1)?, parse(x2)?));
        coefficients.push(parse(coeff)?);
    }
    Ok(SvmModel {
        support_points,
        coefficients,
        bias,
        gamma,
        box_bound: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_one_at_zero_distance() {
        assert_eq!(rbf_kernel((0.3, -0.2), (0.3, -0.2), 5.0), 1.0);
    }

    #[test]
    fn kernel_matches_closed_form() {
        // gamma = 10, |x - z|^2 = 0.1.
        let v = rbf_kernel((0.0, 0.0), (0.1f64.sqrt(), 0.0), 10.0);
        assert!((v - 0.36787944117144233).abs() < 1e-12);
        // gamma = 3, |x - z|^2 = 1.
        let v = rbf_kernel((0.0, 0.0), (1.0, 0.0), 3.0);
        assert!((v - 0.049787068367863944).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_bounded() {
        let pairs = [((0.1, 0.2), (-0.3, 0.4)), ((0.5, -0.5), (0.5, 0.5))];
        for &(x, z) in &pairs {
            let a = rbf_kernel(x, z, 7.0);
            let b = rbf_kernel(z, x, 7.0);
            assert_eq!(a, b);
            assert!(a > 0.0 && a <= 1.0);
        }
    }

    #[test]
    fn binarize_thresholds_at_half() {
        let img = ImageGrid::from_values(2, 2, vec![0.5, -0.5, 0.0, -0.1]).unwrap();
        let set = binarize(&img, 0.5, None).unwrap();
        // white -> +1, black -> -1, exact boundary 0.0 -> +1 (>= rule).
        assert_eq!(set.labels(), &[1, -1, 1, -1]);
    }

    #[test]
    fn binarize_respects_mask() {
        let img = ImageGrid::from_values(2, 2, vec![0.5, -0.5, 0.5, -0.5]).unwrap();
        let mask = Mask::from_flags(2, 2, vec![true, true, false, false]).unwrap();
        let set = binarize(&img, 0.5, Some(&mask)).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.labels(), &[1, -1]);
    }

    #[test]
    fn binarize_rejects_single_class() {
        let img = ImageGrid::filled(2, 2, 0.5).unwrap();
        assert!(matches!(binarize(&img, 0.5, None), Err(SvmError::SingleClass)));
    }

    #[test]
    fn null_model_gives_uniform_zero_surface() {
        let model = SvmModel {
            support_points: vec![],
            coefficients: vec![],
            bias: 0.0,
            gamma: 1.0,
            box_bound: None,
        };
        let (cont, binary) = decision_grid(&model, 8, 8, &Viewport::data()).unwrap();
        assert!(cont.values().iter().all(|&v| v == 0.0));
        // sign(0) maps to +.
        assert!(binary.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn symmetric_model_gives_an_antisymmetric_surface() {
        // Mirrored support vectors with opposite coefficients: f is odd
        // under x1 -> -x1, so the continuous image is antisymmetric
        // about the vertical center axis.
        let data = LabeledSet::new(vec![(-0.25, 0.0), (0.25, 0.0)], vec![1, -1]).unwrap();
        let mut config = NuSvcConfig::new(1.0);
        config.nu = 0.5;
        let model = solve_nu_svc(&data, &config).unwrap();
        let (cont, _) = decision_grid(&model, 16, 16, &Viewport::data()).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                let mirrored = cont.get(15 - col, row);
                assert!(
                    (cont.get(col, row) + mirrored).abs() < 1e-12,
                    "pixel ({col}, {row})"
                );
            }
        }
    }

    #[test]
    fn binary_image_is_thresholded_continuous_image() {
        let model = SvmModel {
            support_points: vec![(-0.2, 0.0), (0.2, 0.0)],
            coefficients: vec![0.8, -0.8],
            bias: 0.1,
            gamma: 12.0,
            box_bound: None,
        };
        let (cont, binary) = decision_grid(&model, 16, 16, &Viewport::data()).unwrap();
        for (c, b) in cont.values().iter().zip(binary.values()) {
            if *c > 0.0 {
                assert_eq!(*b, 0.5);
            }
            if *c < 0.0 {
                assert_eq!(*b, -0.5);
            }
        }
    }

    #[test]
    fn model_file_roundtrip_is_exact() {
        let model = SvmModel {
            support_points: vec![(-0.25, 0.125), (0.3, -0.4)],
            coefficients: vec![0.07421875, -0.07421875],
            bias: -0.012345678901234568,
            gamma: 31.5,
            box_bound: Some(0.5),
        };
        let text = encode_model(&model);
        let back = decode_model(&text).unwrap();
        assert_eq!(back.support_points, model.support_points);
        assert_eq!(back.coefficients, model.coefficients);
        assert_eq!(back.bias, model.bias);
        assert_eq!(back.gamma, model.gamma);
        assert_eq!(back.box_bound, None);
    }

    #[test]
    fn malformed_model_file_is_rejected() {
        assert!(matches!(
            decode_model("SVC 1\ngamma 1 bias 0\n"),
            Err(SvmError::Format(_))
        ));
        assert!(matches!(
            decode_model("NUSVC 1\ngamma 1\n"),
            Err(SvmError::Format(_))
        ));
        assert!(matches!(
            decode_model("NUSVC 1\ngamma 1 bias 0\n0.1 0.2\n"),
            Err(SvmError::Format(_))
        ));
    }

    #[test]
    fn labeled_set_validation() {
        assert!(matches!(
            LabeledSet::new(vec![(0.0, 0.0)], vec![1]),
            Err(SvmError::TooSmall(1))
        ));
        assert!(matches!(
            LabeledSet::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![1, 1]),
            Err(SvmError::SingleClass)
        ));
        assert!(matches!(
            LabeledSet::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![1, 0]),
            Err(SvmError::InvalidConfig(_))
        ));
    }
}
