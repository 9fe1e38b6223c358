//! Region-wise error metrics and comparative reporting.

use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::{GridError, ImageGrid, Mask};
use crate::svm::{LabeledSet, SvmModel};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("model has no support vectors")]
    EmptyModel,
    #[error("model carries no box bound (loaded from file?)")]
    MissingBoxBound,
}

/// Mean squared error split into the masked (training) and unmasked
/// (test) pixel regions. An empty region reports MSE 0 with count 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionReport {
    pub train_mse: f64,
    pub test_mse: f64,
    pub train_count: usize,
    pub test_count: usize,
}

impl RegionReport {
    pub fn train_is_empty(&self) -> bool {
        self.train_count == 0
    }

    pub fn test_is_empty(&self) -> bool {
        self.test_count == 0
    }
}

/// Region-wise MSE of a prediction against the ground truth, on
/// brightness values (not quantized bytes).
pub fn masked_mse(
    pred: &ImageGrid,
    truth: &ImageGrid,
    mask: &Mask,
) -> Result<RegionReport, MetricsError> {
    let dims_match = pred.same_dims(truth.width(), truth.height())
        && pred.same_dims(mask.width(), mask.height());
    if !dims_match {
        return Err(MetricsError::Grid(GridError::DimensionMismatch {
            a_width: pred.width(),
            a_height: pred.height(),
            b_width: truth.width().max(mask.width()),
            b_height: truth.height().max(mask.height()),
        }));
    }
    let mut train_sse = 0.0;
    let mut test_sse = 0.0;
    let mut train_count = 0usize;
    let mut test_count = 0usize;
    for ((p, t), &is_train) in pred
        .values()
        .iter()
        .zip(truth.values())
        .zip(mask.flags())
    {
        let err = (p - t) * (p - t);
        if is_train {
            train_sse += err;
            train_count += 1;
        } else {
            test_sse += err;
            test_count += 1;
        }
    }
    Ok(RegionReport {
        train_mse: if train_count > 0 {
            train_sse / train_count as f64
        } else {
            0.0
        },
        test_mse: if test_count > 0 {
            test_sse / test_count as f64
        } else {
            0.0
        },
        train_count,
        test_count,
    })
}

/// Checks the defining nu bounds on a solved model: the fraction of
/// box-bounded alphas is at most nu + 1/l and the support-vector fraction
/// at least nu - 1/l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuPropertyReport {
    /// Fraction of training points with `y * f(x) < 0` (sign errors).
    pub margin_error_fraction: f64,
    /// Fraction of alphas at the box bound (the exact bound's quantity).
    pub bounded_fraction: f64,
    /// Support vectors as a fraction of the training set.
    pub sv_fraction: f64,
    pub holds: bool,
}

pub fn nu_property_report(
    model: &SvmModel,
    data: &LabeledSet,
    nu: f64,
) -> Result<NuPropertyReport, MetricsError> {
    if model.support_count() == 0 {
        return Err(MetricsError::EmptyModel);
    }
    let box_bound = model.box_bound.ok_or(MetricsError::MissingBoxBound)?;
    let len = data.len() as f64;

    let bounded = model
        .coefficients
        .iter()
        .filter(|c| c.abs() >= box_bound)
        .count();
    let sign_errors = data
        .points()
        .iter()
        .zip(data.labels())
        .filter(|(&(x1, x2), &label)| model.decision(x1, x2) * f64::from(label) < 0.0)
        .count();

    let bounded_fraction = bounded as f64 / len;
    let sv_fraction = model.support_count() as f64 / len;
    let slack = 1.0 / len;
    Ok(NuPropertyReport {
        margin_error_fraction: sign_errors as f64 / len,
        bounded_fraction,
        sv_fraction,
        holds: bounded_fraction <= nu + slack && sv_fraction >= nu - slack,
    })
}

/// Disambiguates duplicate report names by suffixing `#2`, `#3`, ...
fn disambiguate(names: &[&str]) -> Vec<String> {
    let mut seen = std::collections::HashMap::new();
    names
        .iter()
        .map(|&name| {
            let n = seen.entry(name.to_string()).or_insert(0usize);
            *n += 1;
            if *n == 1 {
                name.to_string()
            } else {
                format!("{name}#{n}")
            }
        })
        .collect()
}

/// Fixed-width comparison table, one row per named report, sorted by name.
/// Empty regions are marked.
pub fn compare_report(reports: &[(String, RegionReport)]) -> String {
    let mut rows: Vec<(String, RegionReport)> = {
        let names: Vec<&str> = reports.iter().map(|(n, _)| n.as_str()).collect();
        disambiguate(&names)
            .into_iter()
            .zip(reports.iter().map(|(_, r)| *r))
            .collect()
    };
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let name_width = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(std::iter::once("name".len()))
        .max()
        .unwrap_or(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>12}  {:>12}  {:>8}  {:>8}",
        "name", "train_mse", "test_mse", "train_n", "test_n"
    );
    for (name, report) in &rows {
        let mark = |empty: bool| if empty { " (empty)" } else { "" };
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>12.6}  {:>12.6}  {:>8}  {:>8}{}{}",
            name,
            report.train_mse,
            report.test_mse,
            report.train_count,
            report.test_count,
            mark(report.train_is_empty()),
            mark(report.test_is_empty()),
        );
    }
    out
}

/// CSV form of the same table: `name,train_mse,test_mse,train_count,test_count`.
pub fn reports_to_csv(reports: &[(String, RegionReport)]) -> String {
    let mut out = String::from("name,train_mse,test_mse,train_count,test_count\n");
    for (name, r) in reports {
        let _ = writeln!(
            out,
            "{name},{},{},{},{}",
            r.train_mse, r.test_mse, r.train_count, r.test_count
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mask;

    fn grid_of(values: Vec<f64>) -> ImageGrid {
        ImageGrid::from_values(2, 2, values).unwrap()
    }

    #[test]
    fn identical_images_have_zero_mse() {
        let img = grid_of(vec![0.1, -0.2, 0.3, -0.4]);
        let mask = Mask::from_flags(2, 2, vec![true, false, true, false]).unwrap();
        let report = masked_mse(&img, &img, &mask).unwrap();
        assert_eq!(report.train_mse, 0.0);
        assert_eq!(report.test_mse, 0.0);
        assert_eq!(report.train_count + report.test_count, 4);
    }

    #[test]
    fn constant_offset_gives_squared_offset() {
        let truth = grid_of(vec![0.0, 0.1, -0.1, 0.2]);
        let pred = grid_of(vec![0.1, 0.2, 0.0, 0.3]);
        let mask = Mask::from_flags(2, 2, vec![true, true, false, false]).unwrap();
        let report = masked_mse(&pred, &truth, &mask).unwrap();
        assert!((report.train_mse - 0.01).abs() < 1e-15);
        assert!((report.test_mse - 0.01).abs() < 1e-15);
    }

    #[test]
    fn all_training_mask_flags_empty_test_region() {
        let img = grid_of(vec![0.0; 4]);
        let mask = Mask::all_training(2, 2).unwrap();
        let report = masked_mse(&img, &img, &mask).unwrap();
        assert_eq!(report.test_count, 0);
        assert_eq!(report.test_mse, 0.0);
        assert!(report.test_is_empty());
        assert!(!report.train_is_empty());
    }

    #[test]
    fn mse_is_symmetric_in_pred_and_truth() {
        let a = grid_of(vec![0.1, -0.3, 0.2, 0.4]);
        let b = grid_of(vec![-0.2, 0.3, 0.0, -0.1]);
        let mask = Mask::from_flags(2, 2, vec![true, false, true, false]).unwrap();
        let ab = masked_mse(&a, &b, &mask).unwrap();
        let ba = masked_mse(&b, &a, &mask).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let img = grid_of(vec![0.0; 4]);
        let other = ImageGrid::filled(3, 2, 0.0).unwrap();
        let mask = Mask::all_training(2, 2).unwrap();
        assert!(matches!(
            masked_mse(&img, &other, &mask),
            Err(MetricsError::Grid(GridError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn nu_property_on_symmetric_two_point_model() {
        let data = LabeledSet::new(vec![(-0.25, 0.0), (0.25, 0.0)], vec![1, -1]).unwrap();
        let mut config = crate::svm::NuSvcConfig::new(1.0);
        config.nu = 0.5;
        let model = crate::svm::solve_nu_svc(&data, &config).unwrap();
        let report = nu_property_report(&model, &data, 0.5).unwrap();
        assert_eq!(report.sv_fraction, 1.0);
        assert!(report.holds);
        assert_eq!(report.margin_error_fraction, 0.0);
    }

    #[test]
    fn empty_model_is_rejected() {
        let data = LabeledSet::new(vec![(-0.25, 0.0), (0.25, 0.0)], vec![1, -1]).unwrap();
        let model = SvmModel {
            support_points: vec![],
            coefficients: vec![],
            bias: 0.0,
            gamma: 1.0,
            box_bound: Some(0.5),
        };
        assert!(matches!(
            nu_property_report(&model, &data, 0.5),
            Err(MetricsError::EmptyModel)
        ));
    }

    #[test]
    fn loaded_model_without_box_bound_is_rejected() {
        let data = LabeledSet::new(vec![(-0.25, 0.0), (0.25, 0.0)], vec![1, -1]).unwrap();
        let model = SvmModel {
            support_points: vec![(-0.25, 0.0)],
            coefficients: vec![0.25],
            bias: 0.0,
            gamma: 1.0,
            box_bound: None,
        };
        assert!(matches!(
            nu_property_report(&model, &data, 0.5),
            Err(MetricsError::MissingBoxBound)
        ));
    }

    #[test]
    fn single_report_renders_one_row() {
        let report = RegionReport {
            train_mse: 0.0123,
            test_mse: 0.456,
            train_count: 10,
            test_count: 6,
        };
        let table = compare_report(&[("fnn".into(), report)]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("fnn"));
    }

    #[test]
    fn duplicate_names_get_suffixes() {
        let r = RegionReport {
            train_mse: 0.0,
            test_mse: 0.0,
            train_count: 1,
            test_count: 1,
        };
        let table = compare_report(&[("m".into(), r), ("m".into(), r), ("m".into(), r)]);
        assert!(table.contains("m#2"));
        assert!(table.contains("m#3"));
    }

    #[test]
    fn columns_align_across_magnitudes() {
        let small = RegionReport {
            train_mse: 1e-9,
            test_mse: 2e-9,
            train_count: 1,
            test_count: 1,
        };
        let large = RegionReport {
            train_mse: 0.999999,
            test_mse: 0.875,
            train_count: 99999999,
            test_count: 1,
        };
        let table = compare_report(&[("a".into(), small), ("b".into(), large)]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[1].len(), lines[2].len());
    }

    #[test]
    fn csv_has_stable_schema() {
        let r = RegionReport {
            train_mse: 0.25,
            test_mse: 0.5,
            train_count: 3,
            test_count: 1,
        };
        let csv = reports_to_csv(&[("fnn-r0-i100".into(), r)]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("name,train_mse,test_mse,train_count,test_count")
        );
        assert_eq!(lines.next(), Some("fnn-r0-i100,0.25,0.5,3,1"));
    }
}
