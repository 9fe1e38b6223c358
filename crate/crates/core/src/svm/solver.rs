//! Working-set dual solver for nu-SVC.
//!
//! Both equality constraints (`sum alpha_i y_i = 0`, `sum alpha_i = nu`)
//! are preserved by only ever moving mass between two variables of the
//! same class, so the working set is the maximal violating pair within
//! each label class. The stopping rule is the largest within-class KKT
//! violation dropping below epsilon.
//!
//! Internally the solver works on the l-scaled variables `a_i = l *
//! alpha_i` (box `[0, cost]`, class sums `nu*l/2`), where epsilon = 0.001
//! has its usual meaning regardless of training-set size; on the
//! unscaled problem the same threshold would loosen with l. The returned
//! model is unscaled.

use super::{LabeledSet, NuSvcConfig, SvmError, SvmModel};

/// Snap tolerance: alphas this close to a box edge are set onto the edge
/// before support-vector extraction.
const SNAP: f64 = 1e-12;

/// Curvature floor for degenerate (duplicate-point) pairs.
const MIN_CURVATURE: f64 = 1e-12;

struct Problem {
    /// Q[i, j] = y_i y_j K(x_i, x_j), row-major.
    q: Vec<f64>,
    len: usize,
}

impl Problem {
    fn new(data: &LabeledSet, config: &NuSvcConfig) -> Self {
        let len = data.len();
        let points = data.points();
        let labels = data.labels();
        let mut q = vec![0.0; len * len];
        for i in 0..len {
            for j in 0..=i {
                let k = super::rbf_kernel(points[i], points[j], config.gamma);
                let v = f64::from(labels[i]) * f64::from(labels[j]) * k;
                q[i * len + j] = v;
                q[j * len + i] = v;
            }
        }
        Self { q, len }
    }

    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.len + j]
    }
}

/// Greedy feasible start in scaled units: fill each class in index order
/// until it carries its half of the dual mass.
fn initial_alphas(data: &LabeledSet, class_target: f64, box_bound: f64) -> Vec<f64> {
    let mut alphas = vec![0.0; data.len()];
    for class in [1i8, -1] {
        let mut remaining = class_target;
        for (i, &label) in data.labels().iter().enumerate() {
            if label != class || remaining <= 0.0 {
                continue;
            }
            let take = box_bound.min(remaining);
            alphas[i] = take;
            remaining -= take;
        }
    }
    alphas
}

/// Maximal violating pair within one class: the gradient spread between
/// the best decreasable and best increasable alpha. Lowest index wins
/// ties.
fn class_violating_pair(
    labels: &[i8],
    alphas: &[f64],
    gradient: &[f64],
    class: i8,
    box_bound: f64,
) -> Option<(usize, usize, f64)> {
    let mut dec: Option<(usize, f64)> = None;
    let mut inc: Option<(usize, f64)> = None;
    for i in 0..labels.len() {
        if labels[i] != class {
            continue;
        }
        let g = gradient[i];
        if alphas[i] > 0.0 && dec.is_none_or(|(_, best)| g > best) {
            dec = Some((i, g));
        }
        if alphas[i] < box_bound && inc.is_none_or(|(_, best)| g < best) {
            inc = Some((i, g));
        }
    }
    match (dec, inc) {
        (Some((i_dec, g_dec)), Some((i_inc, g_inc))) => Some((i_dec, i_inc, g_dec - g_inc)),
        _ => None,
    }
}

/// Moves per-class alpha sums back onto exactly nu/2, spreading any
/// residue (from bound snapping and floating-point drift) over the alphas
/// with the most headroom.
fn restore_class_sums(labels: &[i8], alphas: &mut [f64], nu: f64, box_bound: f64) {
    for class in [1i8, -1] {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let sum: f64 = idx.iter().map(|&i| alphas[i]).sum();
        let mut drift = nu / 2.0 - sum;
        if drift == 0.0 {
            continue;
        }
        let mut order = idx.clone();
        // Most headroom in the drift direction first; index breaks ties.
        order.sort_by(|&a, &b| {
            let head = |i: usize| {
                if drift > 0.0 {
                    box_bound - alphas[i]
                } else {
                    alphas[i]
                }
            };
            head(b).partial_cmp(&head(a)).unwrap().then(a.cmp(&b))
        });
        for &i in &order {
            if drift == 0.0 {
                break;
            }
            let lo = -alphas[i];
            let hi = box_bound - alphas[i];
            let take = drift.clamp(lo, hi);
            alphas[i] += take;
            drift -= take;
        }
    }
}

/// Per-class optimality threshold (the constant gradient value on
/// unbounded support vectors of that class). Averages interior points;
/// falls back to the midpoint of the feasible interval.
fn class_rho(labels: &[i8], alphas: &[f64], gradient: &[f64], class: i8, box_bound: f64) -> f64 {
    let mut interior_sum = 0.0;
    let mut interior_count = 0usize;
    let mut lower = f64::NEG_INFINITY; // max over alphas at the box
    let mut upper = f64::INFINITY; // min over alphas at zero
    for i in 0..labels.len() {
        if labels[i] != class {
            continue;
        }
        let g = gradient[i];
        if alphas[i] == 0.0 {
            upper = upper.min(g);
        } else if alphas[i] == box_bound {
            lower = lower.max(g);
        } else {
            interior_sum += g;
            interior_count += 1;
        }
    }
    if interior_count > 0 {
        return interior_sum / interior_count as f64;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Solves the nu-SVC dual to KKT tolerance `config.epsilon`.
#[allow(clippy::needless_range_loop)]
pub fn solve_nu_svc(data: &LabeledSet, config: &NuSvcConfig) -> Result<SvmModel, SvmError> {
    config.validate()?;
    let len = data.len();
    let (pos, neg) = data.class_counts();
    let required = config.nu * len as f64 / 2.0;
    let available = pos.min(neg) as f64 * config.cost;
    if required > available + 1e-12 {
        return Err(SvmError::Infeasible {
            required,
            available,
        });
    }

    let problem = Problem::new(data, config);
    // Scaled variables a_i = l * alpha_i: box [0, cost], each class
    // carrying nu*l/2.
    let box_scaled = config.cost;
    let class_target = config.nu * len as f64 / 2.0;
    let labels = data.labels();
    let mut alphas = initial_alphas(data, class_target, box_scaled);

    // G_i = sum_j Q_ij a_j.
    let mut gradient = vec![0.0; len];
    for i in 0..len {
        let row = &problem.q[i * len..(i + 1) * len];
        gradient[i] = row
            .iter()
            .zip(alphas.iter())
            .map(|(q, a)| q * a)
            .sum();
    }

    let mut converged = false;
    let mut gap = f64::INFINITY;
    for _ in 0..config.max_iterations {
        let pair_pos = class_violating_pair(labels, &alphas, &gradient, 1, box_scaled);
        let pair_neg = class_violating_pair(labels, &alphas, &gradient, -1, box_scaled);
        let viol = |p: &Option<(usize, usize, f64)>| p.map_or(f64::NEG_INFINITY, |(_, _, v)| v);
        gap = viol(&pair_pos).max(viol(&pair_neg));
        if gap <= config.epsilon {
            converged = true;
            break;
        }
        let (i_dec, i_inc, violation) = if viol(&pair_pos) >= viol(&pair_neg) {
            pair_pos.unwrap()
        } else {
            pair_neg.unwrap()
        };

        let curvature =
            (problem.q(i_inc, i_inc) + problem.q(i_dec, i_dec) - 2.0 * problem.q(i_inc, i_dec))
                .max(MIN_CURVATURE);
        let t_star = violation / curvature;
        let t_max_inc = box_scaled - alphas[i_inc];
        let t_max_dec = alphas[i_dec];
        let pair_sum = alphas[i_inc] + alphas[i_dec];

        let (new_inc, new_dec) = if t_star >= t_max_inc && t_max_inc <= t_max_dec {
            (box_scaled, (pair_sum - box_scaled).max(0.0))
        } else if t_star >= t_max_dec {
            (pair_sum.min(box_scaled), 0.0)
        } else {
            (alphas[i_inc] + t_star, alphas[i_dec] - t_star)
        };
        let d_inc = new_inc - alphas[i_inc];
        let d_dec = new_dec - alphas[i_dec];
        alphas[i_inc] = new_inc;
        alphas[i_dec] = new_dec;
        for k in 0..len {
            gradient[k] += problem.q(k, i_inc) * d_inc + problem.q(k, i_dec) * d_dec;
        }
    }
    if !converged {
        return Err(SvmError::NonConvergence {
            gap,
            epsilon: config.epsilon,
        });
    }

    // Back to unscaled alphas and gradients.
    let box_bound = config.cost / len as f64;
    let scale = len as f64;
    let mut alphas: Vec<f64> = alphas.iter().map(|a| a / scale).collect();
    let gradient: Vec<f64> = gradient.iter().map(|g| g / scale).collect();

    // Snap onto the box edges, then repair the class sums the snapping
    // (and accumulated rounding) disturbed.
    for a in alphas.iter_mut() {
        if *a <= SNAP {
            *a = 0.0;
        } else if (box_bound - *a).abs() <= SNAP {
            *a = box_bound;
        }
    }
    restore_class_sums(labels, &mut alphas, config.nu, box_bound);

    let rho_pos = class_rho(labels, &alphas, &gradient, 1, box_bound);
    let rho_neg = class_rho(labels, &alphas, &gradient, -1, box_bound);
    let bias = 0.5 * (rho_neg - rho_pos);

    let mut support_points = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..len {
        if alphas[i] > 0.0 {
            support_points.push(data.points()[i]);
            coefficients.push(alphas[i] * f64::from(labels[i]));
        }
    }
    Ok(SvmModel {
        support_points,
        coefficients,
        bias,
        gamma: config.gamma,
        box_bound: Some(box_bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feasibility_sums(model: &SvmModel) -> (f64, f64) {
        let total: f64 = model.coefficients.iter().map(|c| c.abs()).sum();
        let signed: f64 = model.coefficients.iter().sum();
        (total, signed)
    }

    #[test]
    fn two_symmetric_points_split_nu_evenly() {
        let data = LabeledSet::new(vec![(-0.25, 0.0), (0.25, 0.0)], vec![1, -1]).unwrap();
        let mut config = NuSvcConfig::new(1.0);
        config.nu = 0.5;
        let model = solve_nu_svc(&data, &config).unwrap();

        // Both constraints force alpha_1 = alpha_2 = nu/2 = 0.25.
        assert_eq!(model.support_count(), 2);
        assert!((model.coefficients[0] - 0.25).abs() < 1e-12);
        assert!((model.coefficients[1] + 0.25).abs() < 1e-12);
        assert!(model.bias.abs() < 1e-12);
        // Decision value at the midpoint vanishes by symmetry.
        assert!(model.decision(0.0, 0.0).abs() < 1e-12);
        // Signs are correct on the training points.
        assert!(model.decision(-0.25, 0.0) > 0.0);
        assert!(model.decision(0.25, 0.0) < 0.0);
    }

    #[test]
    fn xor_points_classify_correctly() {
        let data = LabeledSet::new(
            vec![(-0.25, -0.25), (0.25, 0.25), (-0.25, 0.25), (0.25, -0.25)],
            vec![1, 1, -1, -1],
        )
        .unwrap();
        let mut config = NuSvcConfig::new(10.0);
        config.nu = 0.2;
        let model = solve_nu_svc(&data, &config).unwrap();
        for (&(x1, x2), &label) in data.points().iter().zip(data.labels()) {
            let f = model.decision(x1, x2);
            assert!(
                f * f64::from(label) > 0.0,
                "point ({x1}, {x2}) label {label} decision {f}"
            );
        }
    }

    #[test]
    fn equality_constraints_hold_to_tight_tolerance() {
        let data = LabeledSet::new(
            vec![
                (-0.4, -0.1),
                (-0.2, 0.3),
                (0.1, -0.3),
                (0.2, 0.4),
                (0.4, 0.0),
                (-0.1, -0.45),
            ],
            vec![1, 1, 1, -1, -1, -1],
        )
        .unwrap();
        let mut config = NuSvcConfig::new(15.0);
        config.nu = 0.5;
        let model = solve_nu_svc(&data, &config).unwrap();
        let (total, signed) = feasibility_sums(&model);
        assert!((total - 0.5).abs() < 1e-12, "sum alpha = {total}");
        assert!(signed.abs() < 1e-12, "sum alpha*y = {signed}");
        let box_bound = model.box_bound.unwrap();
        assert!(model
            .coefficients
            .iter()
            .all(|c| c.abs() <= box_bound + 1e-15));
    }

    #[test]
    fn solver_is_deterministic() {
        let data = LabeledSet::new(
            vec![(-0.3, 0.2), (0.1, 0.1), (0.3, -0.2), (-0.1, -0.4)],
            vec![1, -1, 1, -1],
        )
        .unwrap();
        let config = NuSvcConfig::new(25.0);
        let a = solve_nu_svc(&data, &config).unwrap();
        let b = solve_nu_svc(&data, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_nu_is_rejected() {
        // One positive among 10 points: nu*l/2 = 0.9*5 = 4.5 > 1.
        let mut points = vec![(0.0, 0.0)];
        let mut labels = vec![1i8];
        for i in 0..9 {
            points.push((0.1 * i as f64, -0.3));
            labels.push(-1);
        }
        let data = LabeledSet::new(points, labels).unwrap();
        let mut config = NuSvcConfig::new(1.0);
        config.nu = 0.9;
        assert!(matches!(
            solve_nu_svc(&data, &config),
            Err(SvmError::Infeasible { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_gap() {
        let data = LabeledSet::new(
            vec![(-0.25, -0.25), (0.25, 0.25), (-0.25, 0.25), (0.25, -0.25)],
            vec![1, 1, -1, -1],
        )
        .unwrap();
        let mut config = NuSvcConfig::new(10.0);
        config.nu = 0.5;
        config.max_iterations = 1;
        config.epsilon = 1e-9;
        match solve_nu_svc(&data, &config) {
            Err(SvmError::NonConvergence { gap, epsilon }) => {
                assert!(gap > epsilon);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn cost_scales_the_box_bound() {
        let data = LabeledSet::new(
            vec![(-0.3, 0.0), (-0.2, 0.1), (0.2, -0.1), (0.3, 0.0)],
            vec![1, 1, -1, -1],
        )
        .unwrap();
        let mut config = NuSvcConfig::new(5.0);
        config.cost = 3.0;
        let model = solve_nu_svc(&data, &config).unwrap();
        assert_eq!(model.box_bound, Some(3.0 / 4.0));
    }
}
