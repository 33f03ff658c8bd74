mod common;

use cmamae::es::{FullCma, OpenAiEs, SepCma};
use cmamae::rng;
use cmamae::{EsKind, EsParams, EsState, RankedBatch};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const KINDS: [EsKind; 4] = [EsKind::FullCma, EsKind::LmMa, EsKind::SepCma, EsKind::OpenAi];

fn sample_moments(xs: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = xs[0].len();
    let m = xs.len() as f64;
    let mut mean = DVector::zeros(n);
    for x in xs {
        mean += DVector::from_column_slice(x);
    }
    mean /= m;
    let mut cov = DMatrix::zeros(n, n);
    for x in xs {
        let d = DVector::from_column_slice(x) - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    (mean, cov / (m - 1.0))
}

fn sphere_batch(xs: Vec<Vec<f64>>) -> RankedBatch {
    let f: Vec<f64> = xs.iter().map(|x| -x.iter().map(|v| v * v).sum::<f64>()).collect();
    RankedBatch::new(xs, &f, &f).unwrap()
}

#[test]
fn openai_samples_are_isotropic() {
    let es = EsState::OpenAi(OpenAiEs::new(&[0.0; 3], 0.02, 10_000, 0.01, 0.005));
    let xs = es.ask(&mut rng::emitter_stream(1, 0)).unwrap();
    let (mean, cov) = sample_moments(&xs);
    for j in 0..3 {
        assert!(mean[j].abs() < 3.0 * 0.02 / 100.0, "mean[{j}] = {}", mean[j]);
        assert!((cov[(j, j)] / 4e-4 - 1.0).abs() < 0.05, "var[{j}] = {}", cov[(j, j)]);
    }
}

#[test]
fn sep_cma_samples_match_diagonal() {
    let es = EsState::SepCma(SepCma::with_variances(&[0.0, 0.0], 1.0, 50_000, &[1.0, 4.0]).unwrap());
    let xs = es.ask(&mut rng::emitter_stream(2, 0)).unwrap();
    let (_, cov) = sample_moments(&xs);
    assert!((cov[(0, 0)] - 1.0).abs() < 0.05);
    assert!((cov[(1, 1)] / 4.0 - 1.0).abs() < 0.05);
    assert!(cov[(0, 1)].abs() < 0.05);
}

#[test]
fn full_cma_samples_match_covariance() {
    let target = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let es = EsState::FullCma(FullCma::with_covariance(&[0.0, 0.0], 1.0, 50_000, target.clone()).unwrap());
    let xs = es.ask(&mut rng::emitter_stream(3, 0)).unwrap();
    let (_, cov) = sample_moments(&xs);
    for i in 0..2 {
        for j in 0..2 {
            assert!((cov[(i, j)] / target[(i, j)] - 1.0).abs() < 0.05, "cov = {cov}");
        }
    }
}

#[test]
fn ask_does_not_touch_the_distribution() {
    for kind in KINDS {
        let es = EsState::new(&EsParams::new(kind).batch_size(8).sigma0(0.3), &[0.5; 6]).unwrap();
        let before = es.clone();
        es.ask(&mut rng::emitter_stream(4, 0)).unwrap();
        assert_eq!(es, before);
    }
}

#[test]
fn identical_tells_are_bit_identical() {
    for kind in KINDS {
        let mut a = EsState::new(&EsParams::new(kind).batch_size(12).sigma0(0.3), &[1.0; 8]).unwrap();
        let mut rng = rng::emitter_stream(5, 0);
        for _ in 0..5 {
            let batch = sphere_batch(a.ask(&mut rng).unwrap());
            a.tell(&batch).unwrap();
        }
        let mut b = a.clone();
        let batch = sphere_batch(a.ask(&mut rng).unwrap());
        a.tell(&batch).unwrap();
        b.tell(&batch).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn full_cma_minimizes_sphere_to_1e_10() {
    let params = EsParams::new(EsKind::FullCma).batch_size(20).sigma0(0.5);
    let mut es = EsState::new(&params, &[1.0; 10]).unwrap();
    let mut rng = rng::emitter_stream(6, 0);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let xs = es.ask(&mut rng).unwrap();
        let batch = sphere_batch(xs);
        let top = &batch.solutions()[batch.ranking()[0]];
        best = best.max(-top.iter().map(|v| v * v).sum::<f64>());
        es.tell(&batch).unwrap();
        if best > -1e-10 {
            break;
        }
    }
    assert!(best > -1e-10, "best = {best}");
}

#[test]
fn openai_mean_norm_shrinks_over_every_window() {
    let params = EsParams::new(EsKind::OpenAi).batch_size(40).sigma0(0.02).learning_rate(0.01);
    let mut es = EsState::new(&params, &[1.0; 10]).unwrap();
    let mut rng = rng::emitter_stream(7, 0);
    let norm = |es: &EsState| es.mean().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut norms = vec![norm(&es)];
    while *norms.last().unwrap() >= 0.1 {
        assert!(norms.len() < 5000, "did not reach 0.1");
        let batch = sphere_batch(es.ask(&mut rng).unwrap());
        es.tell(&batch).unwrap();
        norms.push(norm(&es));
    }
    for w in 50..norms.len() {
        assert!(norms[w] < norms[w - 50], "window ending at {w}: {} -> {}", norms[w - 50], norms[w]);
    }
}

#[test]
fn fresh_state_never_restarts() {
    for kind in KINDS {
        let es = EsState::new(&EsParams::new(kind).batch_size(4), &[0.0; 3]).unwrap();
        let flat = RankedBatch::new(vec![vec![0.0; 3]; 4], &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(!es.needs_restart(&flat));
    }
}

#[test]
fn collapsed_step_size_restarts() {
    let mut es = EsState::FullCma(FullCma::with_covariance(&[0.0; 2], 1e-13, 6, DMatrix::identity(2, 2)).unwrap());
    let batch = sphere_batch(es.ask(&mut rng::emitter_stream(8, 0)).unwrap());
    es.tell(&batch).unwrap();
    assert!(es.step_size() < 1e-12);
    assert!(es.needs_restart(&batch));
}

#[test]
fn flat_batches_restart_after_patience() {
    for kind in KINDS {
        let mut es = EsState::new(&EsParams::new(kind).batch_size(6).sigma0(0.1), &[0.0; 4]).unwrap();
        let mut rng = rng::emitter_stream(9, 0);
        let mut fired_at = None;
        for generation in 1..=100 {
            let xs = es.ask(&mut rng).unwrap();
            let batch = RankedBatch::new(xs, &[-1.0; 6], &[3.0; 6]).unwrap();
            assert_eq!(batch.num_improved(), 0);
            es.tell(&batch).unwrap();
            if es.needs_restart(&batch) {
                fired_at = Some(generation);
                break;
            }
        }
        assert_eq!(fired_at, Some(cmamae::es::NO_IMPROVEMENT_PATIENCE), "{kind}");
    }
}

#[test]
fn reset_forgets_history() {
    for kind in KINDS {
        let params = EsParams::new(kind).batch_size(10).sigma0(0.2);
        let mut a = EsState::new(&params, &[0.0; 5]).unwrap();
        let mut b = EsState::new(&params, &[3.0; 5]).unwrap();
        let mut rng = rng::emitter_stream(10, 0);
        for _ in 0..7 {
            let batch = sphere_batch(a.ask(&mut rng).unwrap());
            a.tell(&batch).unwrap();
        }
        a.reset(&[0.5; 5], 0.7).unwrap();
        b.reset(&[0.5; 5], 0.7).unwrap();
        assert_eq!(a, b, "{kind}");
        let batch = sphere_batch(a.ask(&mut rng).unwrap());
        a.tell(&batch).unwrap();
        assert!(!a.needs_restart(&batch));
    }
}

#[test]
fn reset_samples_have_sigma0_spread() {
    for kind in KINDS {
        let params = EsParams::new(kind).batch_size(50_000).sigma0(1.0);
        let mut es = EsState::new(&params, &[0.0; 3]).unwrap();
        let mut rng = rng::emitter_stream(11, 0);
        let batch = sphere_batch(es.ask(&mut rng).unwrap());
        es.tell(&batch).unwrap();
        es.reset(&[1.0, -1.0, 2.0], 0.3).unwrap();
        let (mean, cov) = sample_moments(&es.ask(&mut rng).unwrap());
        for j in 0..3 {
            assert!((cov[(j, j)].sqrt() / 0.3 - 1.0).abs() < 0.05, "{kind}: sd = {}", cov[(j, j)].sqrt());
        }
        assert!((mean[2] - 2.0).abs() < 0.01);
    }
}

#[test]
fn sampling_matches_represented_covariance() {
    for kind in KINDS {
        let params = EsParams::new(kind).batch_size(16).sigma0(0.5).directions(3);
        let mut es = EsState::new(&params, &[0.5; 4]).unwrap();
        let mut rng = rng::emitter_stream(12, 0);
        // Adapt away from isotropy on an ill-conditioned quadratic.
        for _ in 0..30 {
            let xs = es.ask(&mut rng).unwrap();
            let f: Vec<f64> = xs
                .iter()
                .map(|x| -x.iter().enumerate().map(|(i, v)| 10f64.powi(i as i32) * v * v).sum::<f64>())
                .collect();
            es.tell(&RankedBatch::new(xs, &f, &f).unwrap()).unwrap();
        }
        let target = es.represented_covariance();
        let xs: Vec<Vec<f64>> = (0..50_000 / 16).flat_map(|_| es.ask(&mut rng).unwrap()).collect();
        let (_, cov) = sample_moments(&xs);
        for i in 0..4 {
            assert!((cov[(i, i)] / target[(i, i)] - 1.0).abs() < 0.05, "{kind} diag {i}");
            for j in 0..4 {
                if i != j {
                    let tol = 0.05 * (target[(i, i)] * target[(j, j)]).sqrt();
                    assert!((cov[(i, j)] - target[(i, j)]).abs() < tol, "{kind} ({i},{j}): {} vs {}", cov[(i, j)], target[(i, j)]);
                }
            }
        }
    }
}

#[test]
fn lm_ma_direction_count_is_fixed() {
    let params = EsParams::new(EsKind::LmMa).batch_size(10).directions(4);
    let mut es = EsState::new(&params, &[0.0; 12]).unwrap();
    let mut rng = rng::emitter_stream(13, 0);
    for _ in 0..20 {
        let batch = sphere_batch(es.ask(&mut rng).unwrap());
        es.tell(&batch).unwrap();
        let EsState::LmMa(s) = &es else { unreachable!() };
        assert_eq!(s.directions().len(), 4);
        assert!(s.directions().iter().all(|d| d.len() == 12));
    }
}

#[test]
fn stored_reals_scale_with_dimension() {
    let count = |kind, n: usize| {
        EsState::new(&EsParams::new(kind).batch_size(10).directions(5), &vec![0.0; n])
            .unwrap()
            .stored_reals()
    };
    for kind in KINDS {
        let (a, b) = (count(kind, 100) as f64, count(kind, 200) as f64);
        let ratio = b / a;
        match kind {
            EsKind::FullCma => assert!(ratio > 3.5, "{kind}: {ratio}"),
            _ => assert!((1.8..2.2).contains(&ratio), "{kind}: {ratio}"),
        }
    }
    assert!(count(EsKind::LmMa, 100) >= 5 * 100);
    assert!(count(EsKind::FullCma, 100) >= 100 * 100);
}

#[test]
fn convergence_on_shifted_quadratic() {
    let c = common::shifted_center(20);
    assert!(c.iter().map(|v| v * v).sum::<f64>() <= 4.0);
    for kind in KINDS {
        let params = match kind {
            EsKind::OpenAi => EsParams::new(kind).batch_size(40).sigma0(1e-4).learning_rate(1e-3).l2_coeff(0.0),
            _ => EsParams::new(kind).batch_size(40).sigma0(0.5),
        };
        let (gap, evals) = common::minimize_shifted(&params, &c, 1e-6, 500_000, 0);
        assert!(gap <= 1e-6, "{kind}: gap {gap} after {evals} evaluations");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tell_only_sees_the_ranking(
        kind_idx in 0usize..4,
        seed in 0u64..1000,
        power in 0.2f64..5.0,
        scale in 0.01f64..100.0,
    ) {
        let kind = KINDS[kind_idx];
        let params = EsParams::new(kind).batch_size(8).sigma0(0.3).directions(3);
        let mut a = EsState::new(&params, &[0.2; 5]).unwrap();
        let mut b = a.clone();
        let mut rng = rng::emitter_stream(seed, 0);
        for _ in 0..4 {
            let xs = a.ask(&mut rng).unwrap();
            let f: Vec<f64> = xs.iter().map(|x| -x.iter().map(|v| v * v).sum::<f64>()).collect();
            // Sign-preserving so that the count of improving candidates is unchanged.
            let g: Vec<f64> = f.iter().map(|v| scale * v.signum() * v.abs().powf(power)).collect();
            let fb = RankedBatch::new(xs.clone(), &f, &f).unwrap();
            let gb = RankedBatch::new(xs, &g, &g).unwrap();
            prop_assume!(fb.ranking() == gb.ranking());
            a.tell(&fb).unwrap();
            b.tell(&gb).unwrap();
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn step_size_stays_positive(kind_idx in 0usize..4, seed in 0u64..1000) {
        let kind = KINDS[kind_idx];
        let mut es = EsState::new(&EsParams::new(kind).batch_size(6).sigma0(0.5), &[1.0; 4]).unwrap();
        let mut rng = rng::emitter_stream(seed, 0);
        for _ in 0..40 {
            let batch = sphere_batch(es.ask(&mut rng).unwrap());
            es.tell(&batch).unwrap();
            prop_assert!(es.step_size() > 0.0);
            if let EsState::SepCma(s) = &es {
                prop_assert!(s.diag_variance().iter().all(|&v| v > 0.0));
            }
            if let EsState::FullCma(s) = &es {
                let c = s.covariance();
                prop_assert!(c.clone().cholesky().is_some());
                prop_assert!((c - c.transpose()).amax() <= 1e-12 * c.amax());
            }
        }
    }
}
