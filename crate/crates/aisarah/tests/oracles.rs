//! Independent numerical oracles: finite differences, dense eigensolvers,
//! exhaustive enumeration and brute-force grids, cross-checking the
//! closed-form implementations.

// Index-based loops are kept where they mirror the textbook formulas
// (Jacobi rotations, enumeration sums).
#![allow(clippy::needless_range_loop)]

use aisarah::data;
use aisarah::harness;
use aisarah::leastsq::LeastSquares;
use aisarah::model::{norm_sq, sigmoid, LogisticModel};
use aisarah::optim::{
    self, one_step_newton, AiSarahOptions, InnerSize, SarahOptions, StepSizeController,
};
use aisarah::synth;
use aisarah::theory::{logistic_segment_smoothness, theoretical_run, SamplingMode};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn random_vec(rng: &mut ChaCha20Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * (rng.random::<f64>() - 0.5)).collect()
}

/// Mean single-sample loss over a batch, plus the regularizer — evaluated
/// from scratch so the gradient code has an independent reference.
fn batch_loss(model: &LogisticModel, w: &[f64], batch: &[usize]) -> f64 {
    let ds = model.data();
    let mut acc = 0.0;
    for &i in batch {
        let z = ds.label(i) * ds.dot_row(i, w);
        // ln(1 + e^{-z}) computed stably
        acc += if z > 0.0 {
            (-z).exp().ln_1p()
        } else {
            -z + z.exp().ln_1p()
        };
    }
    acc / batch.len() as f64 + 0.5 * model.lambda() * norm_sq(w)
}

/// `xi(alpha)` evaluated directly from its definition.
fn xi_value(model: &LogisticModel, w: &[f64], v: &[f64], batch: &[usize], alpha: f64) -> f64 {
    let ws: Vec<f64> = w.iter().zip(v).map(|(a, b)| a - alpha * b).collect();
    let g_s = model.minibatch_gradient(&ws, batch).unwrap();
    let g_0 = model.minibatch_gradient(w, batch).unwrap();
    let r: Vec<f64> = g_s
        .iter()
        .zip(&g_0)
        .zip(v)
        .map(|((a, b), c)| a - b + c)
        .collect();
    norm_sq(&r)
}

#[test]
fn gradients_match_central_finite_differences() {
    let ds = synth::gaussian_logistic(60, 5, 17).unwrap();
    let model = LogisticModel::regularized(&ds);
    let d = ds.d();
    let mut r = rng(99);
    let h = 1e-5;
    for _ in 0..20 {
        let w = random_vec(&mut r, d, 2.0);
        let batch: Vec<usize> = (0..8).map(|_| r.random_range(0..ds.n())).collect();

        let g_full = model.full_gradient(&w);
        let g_batch = model.minibatch_gradient(&w, &batch).unwrap();
        for j in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let fd_full = (model.loss(&wp) - model.loss(&wm)) / (2.0 * h);
            assert!(
                (g_full[j] - fd_full).abs() <= 1e-6 * (1.0 + g_full[j].abs()),
                "full gradient coord {j}: {} vs FD {}",
                g_full[j],
                fd_full
            );
            let fd_batch =
                (batch_loss(&model, &wp, &batch) - batch_loss(&model, &wm, &batch)) / (2.0 * h);
            assert!(
                (g_batch[j] - fd_batch).abs() <= 1e-6 * (1.0 + g_batch[j].abs()),
                "batch gradient coord {j}: {} vs FD {}",
                g_batch[j],
                fd_batch
            );
        }
    }
}

#[test]
fn xi_derivatives_match_finite_differences_of_xi() {
    let ds = synth::gaussian_logistic(50, 4, 23).unwrap();
    let model = LogisticModel::regularized(&ds);
    let mut r = rng(7);
    let h = 1e-4;
    for _ in 0..30 {
        let w = random_vec(&mut r, ds.d(), 1.0);
        let v = random_vec(&mut r, ds.d(), 1.0);
        let batch: Vec<usize> = (0..6).map(|_| r.random_range(0..ds.n())).collect();
        let probe = model.xi_derivatives(&w, &v, &batch).unwrap();
        let f = |a: f64| xi_value(&model, &w, &v, &batch, a);
        let (fp, f0, fm) = (f(h), f(0.0), f(-h));
        let fd1 = (fp - fm) / (2.0 * h);
        let fd2 = (fp - 2.0 * f0 + fm) / (h * h);
        assert!(
            (probe.xi_prime0 - fd1).abs() <= 1e-4 * (1.0 + fd1.abs()),
            "xi'(0) = {} vs FD {}",
            probe.xi_prime0,
            fd1
        );
        assert!(
            (probe.xi_double_prime0 - fd2).abs() <= 1e-4 * (1.0 + fd2.abs()),
            "xi''(0) = {} vs FD {}",
            probe.xi_double_prime0,
            fd2
        );
    }
}

/// Cyclic Jacobi rotations: an eigensolver sharing no code with the power
/// iteration it checks.
fn max_eigenvalue_jacobi(mut a: Vec<Vec<f64>>) -> f64 {
    let d = a.len();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p][q] * a[p][q];
                if a[p][q].abs() < 1e-15 {
                    continue;
                }
                let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
                let (s, c) = theta.sin_cos();
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
        if off < 1e-28 {
            break;
        }
    }
    (0..d).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn global_smoothness_matches_dense_eigensolver() {
    let ds = synth::gaussian_logistic(40, 5, 31).unwrap();
    for lambda in [0.0, 0.025] {
        let model = LogisticModel::new(&ds, lambda);
        let d = ds.d();
        let n = ds.n();
        let mut gram = vec![vec![0.0; d]; d];
        for i in 0..n {
            let (idx, vals) = ds.row(i);
            for (a, &ja) in idx.iter().enumerate() {
                for (b, &jb) in idx.iter().enumerate() {
                    gram[ja as usize][jb as usize] += vals[a] * vals[b] / n as f64;
                }
            }
        }
        let expect = 0.25 * max_eigenvalue_jacobi(gram) + lambda;
        let got = model.global_lipschitz();
        assert!(
            (got - expect).abs() <= 1e-8 * expect,
            "power iteration {got} vs Jacobi {expect}"
        );
    }
}

#[test]
fn least_squares_newton_is_exact_and_xi_is_quadratic() {
    let mut r = rng(55);
    let rows: Vec<Vec<f64>> = (0..10).map(|_| random_vec(&mut r, 4, 2.0)).collect();
    let targets = random_vec(&mut r, 10, 1.0);
    let ls = LeastSquares::new(rows, targets, 0.3);
    let w = random_vec(&mut r, 4, 1.0);
    let v = random_vec(&mut r, 4, 1.0);
    let batch = [0usize, 3, 7];
    let alpha = one_step_newton(&ls.xi_derivatives(&w, &v, &batch).unwrap()).unwrap();
    let exact = ls.exact_xi_minimizer(&v, &batch);
    assert!((alpha - exact).abs() <= 1e-12 * exact.abs());
    // xi is exactly quadratic, so its one-step-Newton point is its minimum
    let at_min = ls.xi_value(&w, &v, &batch, alpha);
    for k in -4i32..=4 {
        let a = alpha + 0.05 * k as f64;
        assert!(ls.xi_value(&w, &v, &batch, a) >= at_min - 1e-12);
    }
}

#[test]
fn pinned_adaptive_run_reproduces_independent_sarah() {
    // The adaptive engine with a pinned constant step, disabled shrinkage
    // guard and fixed inner count must retrace the separately-implemented
    // constant-step method exactly.
    let ds = synth::gaussian_logistic(60, 4, 77).unwrap();
    let model = LogisticModel::regularized(&ds);
    let l = model.global_lipschitz();
    let alpha = 0.5 / l;
    let b = 8;
    let m = ds.n() / b; // one pass per inner loop
    for seed in [1u64, 2] {
        let w0 = harness::initial_iterate(seed, ds.d());
        let mut ai_opts = AiSarahOptions::new(seed, 3.0);
        ai_opts.batch_size = b;
        ai_opts.gamma = 0.0;
        ai_opts.pinned_alpha = Some(alpha);
        ai_opts.inner_cap = Some(m);
        let mut ctrl = StepSizeController::default();
        let ai = optim::run_ai_sarah(&model, None, &ai_opts, &mut ctrl, &w0).unwrap();

        let sarah = optim::run_sarah(
            &model,
            None,
            &SarahOptions {
                batch_size: b,
                seed,
                budget_passes: 3.0,
                alpha,
                inner: InnerSize::Iterations(m),
            },
            &w0,
        )
        .unwrap();

        assert_eq!(ai.outer_loops, sarah.outer_loops);
        assert_eq!(ai.inner_steps, sarah.inner_steps);
        let dev = ai
            .w
            .iter()
            .zip(&sarah.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-12, "seed {seed}: max coordinate deviation {dev}");
    }
}

#[test]
fn svrg_estimator_is_unbiased_by_enumeration() {
    let ds = synth::gaussian_logistic(25, 3, 13).unwrap();
    let model = LogisticModel::regularized(&ds);
    let mut r = rng(3);
    let w = random_vec(&mut r, ds.d(), 1.0);
    let anchor = random_vec(&mut r, ds.d(), 1.0);
    let g0 = model.full_gradient(&anchor);
    let n = ds.n();
    let mut mean = vec![0.0; ds.d()];
    for i in 0..n {
        let gi_w = model.minibatch_gradient(&w, &[i]).unwrap();
        let gi_a = model.minibatch_gradient(&anchor, &[i]).unwrap();
        for j in 0..mean.len() {
            mean[j] += (gi_w[j] - gi_a[j] + g0[j]) / n as f64;
        }
    }
    let expect = model.full_gradient(&w);
    for (m_j, e_j) in mean.iter().zip(&expect) {
        assert!((m_j - e_j).abs() <= 1e-12 * (1.0 + e_j.abs()));
    }
}

#[test]
fn importance_correction_keeps_estimator_mean_by_enumeration() {
    let ds = synth::gaussian_logistic(20, 3, 41).unwrap();
    let model = LogisticModel::regularized(&ds);
    let n = ds.n();
    let mut r = rng(4);
    let w_prev = random_vec(&mut r, ds.d(), 1.0);
    let w = random_vec(&mut r, ds.d(), 1.0);
    // weights proportional to current segment smoothness, as in the schedule
    let v_dir = model.full_gradient(&w_prev);
    let ls: Vec<f64> = (0..n)
        .map(|i| logistic_segment_smoothness(&model, &w_prev, &v_dir, i).value)
        .collect();
    let total: f64 = ls.iter().sum();
    let mut mean = vec![0.0; ds.d()];
    for i in 0..n {
        let p = ls[i] / total;
        let corr = 1.0 / (n as f64 * p);
        let gi_w = model.minibatch_gradient(&w, &[i]).unwrap();
        let gi_p = model.minibatch_gradient(&w_prev, &[i]).unwrap();
        for (m_j, (a, b)) in mean.iter_mut().zip(gi_w.iter().zip(&gi_p)) {
            *m_j += p * corr * (a - b);
        }
    }
    let gw = model.full_gradient(&w);
    let gp = model.full_gradient(&w_prev);
    for (m_j, (a, b)) in mean.iter().zip(gw.iter().zip(&gp)) {
        let e = a - b;
        assert!((m_j - e).abs() <= 1e-12 * (1.0 + e.abs()));
    }
}

#[test]
fn segment_smoothness_matches_million_point_grid() {
    let ds = synth::gaussian_logistic(10, 3, 59).unwrap();
    let model = LogisticModel::regularized(&ds);
    let mut r = rng(6);
    let w = random_vec(&mut r, ds.d(), 2.0);
    let v = model.full_gradient(&w);
    for i in [0usize, 4, 9] {
        let l = logistic_segment_smoothness(&model, &w, &v, i);
        assert!(l.converged);
        let h = 1.0 / l.value;
        let mut grid_max = f64::NEG_INFINITY;
        let mut ws = w.clone();
        for j in 0..=1_000_000u32 {
            let eta = h * j as f64 / 1e6;
            for (x, (a, b)) in ws.iter_mut().zip(w.iter().zip(&v)) {
                *x = a - eta * b;
            }
            grid_max = grid_max.max(model.pointwise_smoothness(&ws, i));
        }
        assert!(
            (grid_max - l.value).abs() <= 1e-6 * l.value,
            "sample {i}: grid {grid_max} vs fixed point {}",
            l.value
        );
    }
}

#[test]
fn theoretical_importance_run_obeys_probability_invariants() {
    let ds = synth::gaussian_logistic(20, 3, 10).unwrap();
    let model = LogisticModel::regularized(&ds);
    let run = theoretical_run(
        &model,
        10,
        3,
        SamplingMode::Importance,
        8,
        &vec![0.0; ds.d()],
    )
    .unwrap();
    for lp in &run.loops {
        assert!((lp.qs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(lp.qs.iter().all(|&q| q > 0.0));
        for (q, step) in lp.qs.iter().zip(&lp.steps) {
            assert!((q - step.eta / lp.h).abs() <= 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn libsvm_round_trip(rows in proptest::collection::vec(
        proptest::collection::vec(0.1f64..1.0, 3), 1..20)
    ) {
        let labels: Vec<f64> = rows.iter().enumerate()
            .map(|(i, _)| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let ds = data::from_dense_rows(&rows, &labels);
        let text = ds.to_libsvm_string();
        let back = data::parse_libsvm(text.as_bytes()).unwrap();
        prop_assert_eq!(back.n(), ds.n());
        prop_assert_eq!(back.d(), ds.d());
        prop_assert_eq!(back.to_libsvm_string(), text);
    }

    #[test]
    fn curvature_weight_stays_in_range(z in -700.0f64..700.0) {
        let s = sigmoid(z) * (1.0 - sigmoid(z));
        prop_assert!((0.0..=0.25).contains(&s));
    }

    #[test]
    fn xi_slope_at_zero_is_never_positive(
        w in proptest::collection::vec(-3.0f64..3.0, 4),
        v in proptest::collection::vec(-3.0f64..3.0, 4),
    ) {
        let ds = synth::gaussian_logistic(12, 3, 1).unwrap();
        let model = LogisticModel::regularized(&ds);
        let probe = model.xi_derivatives(&w, &v, &[0, 5, 11]).unwrap();
        prop_assert!(probe.xi_prime0 <= 0.0);
    }

    #[test]
    fn controller_never_exceeds_estimate_or_bound(
        stream in proptest::collection::vec(1e-6f64..1e3, 1..50),
    ) {
        let mut ctrl = StepSizeController::default();
        for &a in &stream {
            let step = ctrl.update(a).unwrap();
            prop_assert!(step <= a);
            prop_assert!(step <= ctrl.alpha_max() * (1.0 + 1e-15));
            prop_assert!(ctrl.delta().unwrap() > 0.0);
        }
    }

    #[test]
    fn split_partitions_every_row(n in 4usize..60, seed in 0u64..1000) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0 + i as f64, 0.5]).collect();
        let labels: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ds = data::from_dense_rows(&rows, &labels);
        let split = data::split(&ds, 0.75, seed).unwrap();
        prop_assert_eq!(split.train.n() + split.test.n(), n);
        prop_assert_eq!(split.train.n(), (0.75 * n as f64).ceil() as usize);
        // every original row appears exactly once across the two halves
        let mut firsts: Vec<u64> = (0..split.train.n())
            .map(|i| split.train.dot_row(i, &[1.0, 0.0]).to_bits())
            .chain((0..split.test.n()).map(|i| split.test.dot_row(i, &[1.0, 0.0]).to_bits()))
            .collect();
        firsts.sort_unstable();
        firsts.dedup();
        prop_assert_eq!(firsts.len(), n);
    }
}

#[test]
fn parser_rejects_malformed_lines_with_line_numbers() {
    for bad in [
        "1 0:0.5\n",        // zero index
        "1 2:1 2:2\n",      // duplicate index
        "1 3:1 2:1\n",      // decreasing index
        "1 a:1\n",          // non-numeric index
        "banana 1:1\n",     // non-numeric label
    ] {
        let err = data::parse_libsvm(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{bad:?} gave {err}");
    }
}

#[test]
fn split_is_deterministic_per_seed() {
    let ds = synth::gaussian_logistic(40, 3, 2).unwrap();
    let a = data::split(&ds, 0.75, 9).unwrap();
    let b = data::split(&ds, 0.75, 9).unwrap();
    assert_eq!(a.train.to_libsvm_string(), b.train.to_libsvm_string());
    let c = data::split(&ds, 0.75, 10).unwrap();
    assert_ne!(a.train.to_libsvm_string(), c.train.to_libsvm_string());
}

/// A run must never wander outside the ball the step sizes allow; the
/// engine audits this every inner step and reports the violation count.
#[test]
fn adaptive_run_respects_iterate_containment_and_guard() {
    let ds = synth::gaussian_logistic(80, 5, 19).unwrap();
    let model = LogisticModel::regularized(&ds);
    let mut ctrl = StepSizeController::default();
    let mut opts = AiSarahOptions::new(5, 6.0);
    opts.batch_size = 8;
    let w0 = harness::initial_iterate(5, ds.d());
    let run = optim::run_ai_sarah(&model, None, &opts, &mut ctrl, &w0).unwrap();
    assert_eq!(run.containment_violations, 0);
    assert!(run.outer_loops >= 1);
    // the adaptive method should make progress on a well-posed problem
    let first = run.rows.first().unwrap();
    let last = run.final_row();
    assert!(last.loss < first.loss);
    assert!(last.grad_norm_sq < first.grad_norm_sq);
}
