//! Compares the working-set dual solver against an independent
//! projected-gradient oracle on small problems, and spot-checks kernel
//! positive semidefiniteness.
//!
//! The oracle shares nothing with the solver: its own kernel evaluation,
//! its own objective, and a completely different optimization scheme
//! (accelerated projected gradient with a capped-simplex projection).

#![allow(clippy::needless_range_loop)]

use genlab_core::metrics::nu_property_report;
use genlab_core::rng::Rng;
use genlab_core::svm::{solve_nu_svc, LabeledSet, NuSvcConfig, SvmModel};

/// Oracle-side kernel (deliberately written out again).
fn oracle_kernel(a: (f64, f64), b: (f64, f64), gamma: f64) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (-(dx * dx + dy * dy) * gamma).exp()
}

fn oracle_q(points: &[(f64, f64)], labels: &[i8], gamma: f64) -> Vec<Vec<f64>> {
    let l = points.len();
    let mut q = vec![vec![0.0; l]; l];
    for i in 0..l {
        for j in 0..l {
            q[i][j] = f64::from(labels[i]) * f64::from(labels[j])
                * oracle_kernel(points[i], points[j], gamma);
        }
    }
    q
}

fn oracle_objective(q: &[Vec<f64>], alphas: &[f64]) -> f64 {
    let mut obj = 0.0;
    for (i, row) in q.iter().enumerate() {
        for (j, &qij) in row.iter().enumerate() {
            obj += alphas[i] * alphas[j] * qij;
        }
    }
    0.5 * obj
}

/// Projects `v` onto `{x : 0 <= x_i <= cap, sum x_i = target}` by
/// bisecting the shift in `x_i = clamp(v_i - tau, 0, cap)`.
fn project_capped_simplex(v: &[f64], cap: f64, target: f64) -> Vec<f64> {
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let tau = 0.5 * (lo + hi);
        let sum: f64 = v.iter().map(|&vi| (vi - tau).clamp(0.0, cap)).sum();
        if sum > target {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&vi| (vi - tau).clamp(0.0, cap)).collect()
}

/// Projection onto the full feasible set: each class is an independent
/// capped simplex carrying nu/2 of mass.
fn project_feasible(v: &[f64], labels: &[i8], cap: f64, nu: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for class in [1i8, -1] {
        let idx: Vec<usize> = (0..v.len()).filter(|&i| labels[i] == class).collect();
        let sub: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
        let projected = project_capped_simplex(&sub, cap, nu / 2.0);
        for (&i, &p) in idx.iter().zip(&projected) {
            out[i] = p;
        }
    }
    out
}

/// Accelerated projected gradient (FISTA) on the dual. Convex problem,
/// fixed step 1/L with L = l bounding the top eigenvalue of Q.
fn oracle_solve(
    points: &[(f64, f64)],
    labels: &[i8],
    gamma: f64,
    nu: f64,
    cap: f64,
    iterations: usize,
) -> Vec<f64> {
    let l = points.len();
    let q = oracle_q(points, labels, gamma);
    let step = 1.0 / l as f64;
    let mut x = project_feasible(&vec![0.0; l], labels, cap, nu);
    let mut momentum = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..l)
            .map(|i| (0..l).map(|j| q[i][j] * momentum[j]).sum::<f64>())
            .collect();
        let proposal: Vec<f64> = (0..l).map(|i| momentum[i] - step * grad[i]).collect();
        let x_next = project_feasible(&proposal, labels, cap, nu);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = (0..l)
            .map(|i| x_next[i] + (t - 1.0) / t_next * (x_next[i] - x[i]))
            .collect();
        x = x_next;
        t = t_next;
    }
    x
}

/// Reconstructs the full alpha vector of a model over the training set
/// (support vectors carry |coeff|, everything else zero).
fn model_alphas(model: &SvmModel, points: &[(f64, f64)]) -> Vec<f64> {
    let mut alphas = vec![0.0; points.len()];
    for (sv, coeff) in model.support_points.iter().zip(&model.coefficients) {
        // Duplicate points: assign to the first index still unset.
        let idx = (0..points.len())
            .find(|&i| points[i] == *sv && alphas[i] == 0.0)
            .expect("support vector must come from the training points");
        alphas[idx] = coeff.abs();
    }
    alphas
}

fn random_feasible_problem(rng: &mut Rng, max_len: usize) -> (Vec<(f64, f64)>, Vec<i8>, f64) {
    loop {
        let l = 4 + rng.index(max_len - 3);
        let points: Vec<(f64, f64)> = (0..l)
            .map(|_| (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)))
            .collect();
        let labels: Vec<i8> = (0..l)
            .map(|_| if rng.next_f64() < 0.5 { 1 } else { -1 })
            .collect();
        let nu = if rng.next_f64() < 0.5 { 0.2 } else { 0.5 };
        let pos = labels.iter().filter(|&&y| y == 1).count();
        let min_class = pos.min(l - pos);
        if min_class >= 1 && nu * l as f64 / 2.0 <= min_class as f64 {
            return (points, labels, nu);
        }
    }
}

#[test]
fn solver_matches_oracle_on_random_small_problems() {
    let mut rng = Rng::new(0x5EED);
    for case in 0..20 {
        let (points, labels, nu) = random_feasible_problem(&mut rng, 8);
        let gamma = rng.uniform(1.0, 100.0);
        let data = LabeledSet::new(points.clone(), labels.clone()).unwrap();
        let mut config = NuSvcConfig::new(gamma);
        config.nu = nu;
        config.epsilon = 1e-9;
        let model = solve_nu_svc(&data, &config).unwrap();

        let cap = 1.0 / points.len() as f64;
        let oracle = oracle_solve(&points, &labels, gamma, nu, cap, 60_000);
        let q = oracle_q(&points, &labels, gamma);
        let solver_obj = oracle_objective(&q, &model_alphas(&model, &points));
        let oracle_obj = oracle_objective(&q, &oracle);
        assert!(
            solver_obj <= oracle_obj + 1e-6,
            "case {case}: solver {solver_obj:.9} vs oracle {oracle_obj:.9} (gamma {gamma:.2}, nu {nu})"
        );
        // The oracle is itself near-optimal, so the solver cannot be far below.
        assert!(
            (solver_obj - oracle_obj).abs() < 1e-6,
            "case {case}: |{solver_obj:.9} - {oracle_obj:.9}| too large"
        );

        let alphas = model_alphas(&model, &points);
        let signed: f64 = alphas
            .iter()
            .zip(&labels)
            .map(|(a, &y)| a * f64::from(y))
            .sum();
        let total: f64 = alphas.iter().sum();
        assert!(signed.abs() < 1e-12, "case {case}: sum alpha y = {signed:e}");
        assert!((total - nu).abs() < 1e-12, "case {case}: sum alpha = {total}");
    }
}

#[test]
fn two_point_solution_matches_constraint_forced_optimum() {
    // With one point per class both constraints pin alpha exactly; the
    // oracle and the closed form agree.
    let points = vec![(-0.25, 0.0), (0.25, 0.0)];
    let labels = vec![1i8, -1];
    let oracle = oracle_solve(&points, &labels, 1.0, 0.5, 0.5, 10_000);
    assert!((oracle[0] - 0.25).abs() < 1e-9);
    assert!((oracle[1] - 0.25).abs() < 1e-9);

    let data = LabeledSet::new(points, labels).unwrap();
    let mut config = NuSvcConfig::new(1.0);
    config.nu = 0.5;
    let model = solve_nu_svc(&data, &config).unwrap();
    assert!((model.coefficients[0] - 0.25).abs() < 1e-12);
    assert!((model.coefficients[1] + 0.25).abs() < 1e-12);
}

#[test]
fn xor_objective_matches_oracle() {
    let points = vec![(-0.25, -0.25), (0.25, 0.25), (-0.25, 0.25), (0.25, -0.25)];
    let labels = vec![1i8, 1, -1, -1];
    let data = LabeledSet::new(points.clone(), labels.clone()).unwrap();
    let mut config = NuSvcConfig::new(10.0);
    config.nu = 0.2;
    config.epsilon = 1e-9;
    let model = solve_nu_svc(&data, &config).unwrap();

    let oracle = oracle_solve(&points, &labels, 10.0, 0.2, 0.25, 60_000);
    let q = oracle_q(&points, &labels, 10.0);
    let diff = oracle_objective(&q, &model_alphas(&model, &points))
        - oracle_objective(&q, &oracle);
    assert!(diff.abs() < 1e-6, "objective difference {diff:e}");
}

/// Cholesky of K + ridge*I succeeds iff the minimum eigenvalue of K
/// exceeds -ridge (up to rounding).
fn cholesky_succeeds(matrix: &[Vec<f64>]) -> bool {
    let n = matrix.len();
    let mut m = matrix.to_vec();
    for j in 0..n {
        let mut diag = m[j][j];
        for k in 0..j {
            diag -= m[j][k] * m[j][k];
        }
        if diag <= 0.0 {
            return false;
        }
        let root = diag.sqrt();
        m[j][j] = root;
        for i in j + 1..n {
            let mut v = m[i][j];
            for k in 0..j {
                v -= m[i][k] * m[j][k];
            }
            m[i][j] = v / root;
        }
    }
    true
}

#[test]
fn random_gram_matrices_are_positive_semidefinite() {
    let mut rng = Rng::new(0x6A11);
    for _ in 0..30 {
        let n = 2 + rng.index(9);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)))
            .collect();
        let gamma = rng.uniform(0.5, 100.0);
        let mut gram = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                gram[i][j] = oracle_kernel(points[i], points[j], gamma);
            }
        }
        for i in 0..n {
            gram[i][i] += 1e-9;
        }
        assert!(cholesky_succeeds(&gram), "gram + 1e-9 I must be PD");
    }
}

#[test]
fn nu_property_holds_on_moderate_problems() {
    let mut rng = Rng::new(0xA1FA);
    for case in 0..5 {
        let l = 60;
        let points: Vec<(f64, f64)> = (0..l)
            .map(|_| (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)))
            .collect();
        let labels: Vec<i8> = points
            .iter()
            .map(|&(x, y)| if x + y + rng.uniform(-0.2, 0.2) > 0.0 { 1 } else { -1 })
            .collect();
        let pos = labels.iter().filter(|&&y| y == 1).count();
        if pos.min(l - pos) * 2 < (0.2 * l as f64) as usize {
            continue;
        }
        let data = LabeledSet::new(points, labels).unwrap();
        let mut config = NuSvcConfig::new(20.0);
        config.nu = 0.2;
        let model = solve_nu_svc(&data, &config).unwrap();
        let report = nu_property_report(&model, &data, 0.2).unwrap();
        assert!(report.holds, "case {case}: {report:?}");
    }
}

#[test]
fn duplicate_points_do_not_break_the_solver() {
    let points = vec![(0.1, 0.1), (0.1, 0.1), (-0.1, -0.1), (-0.1, -0.1)];
    let labels = vec![1i8, 1, -1, -1];
    let data = LabeledSet::new(points, labels).unwrap();
    let mut config = NuSvcConfig::new(10.0);
    config.nu = 0.5;
    let model = solve_nu_svc(&data, &config).unwrap();
    let total: f64 = model.coefficients.iter().map(|c| c.abs()).sum();
    assert!((total - 0.5).abs() < 1e-12);
}
