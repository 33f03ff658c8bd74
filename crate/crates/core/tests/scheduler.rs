use cmamae::scheduler::{run, run_observed, StepObserver};
use cmamae::{
    ArmDomain, Domain, EsKind, EsParams, InsertResult, RankedBatch, SchedulerConfig, SoftArchive, SolutionRecord, SphereDomain,
};

/// Constant objective and measures: one cell, nothing to improve after it
/// fills at α = 1.
struct Flat;

impl Domain for Flat {
    fn dim(&self) -> usize {
        4
    }

    fn evaluate(&self, _: &[f64]) -> (f64, Vec<f64>) {
        (1.0, vec![0.5, 0.5])
    }

    fn measure_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; 2], vec![1.0; 2])
    }
}

#[derive(Default)]
struct Recorder {
    iteration: usize,
    elites: Vec<Vec<f64>>,
    restarts: Vec<(usize, Vec<f64>)>,
    improvements: Vec<f64>,
    orders_ok: bool,
    batches: usize,
}

impl StepObserver for Recorder {
    fn inserted(&mut self, _: usize, s: &SolutionRecord, r: &InsertResult, _: &SoftArchive) {
        self.improvements.push(r.improvement);
        if r.accepted {
            self.elites.push(s.params.clone());
        }
    }

    fn ranked(&mut self, _: usize, batch: &RankedBatch, objectives: &[f64]) {
        // Improvements of this batch are the last λ inserted.
        let deltas = &self.improvements[self.improvements.len() - batch.len()..];
        let ok = batch.ranking().windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            deltas[a] > deltas[b]
                || (deltas[a] == deltas[b] && objectives[a] > objectives[b])
                || (deltas[a] == deltas[b] && objectives[a] == objectives[b] && a < b)
        });
        self.orders_ok = (self.batches == 0 || self.orders_ok) && ok;
        self.batches += 1;
        self.iteration = self.batches;
    }

    fn restarted(&mut self, _: usize, mean: &[f64]) {
        self.restarts.push((self.iteration, mean.to_vec()));
    }
}

fn config(kind: EsKind, psi: usize, iterations: usize, n: usize) -> SchedulerConfig {
    let es = EsParams::new(kind).batch_size(8).sigma0(0.1);
    SchedulerConfig::new(psi, iterations, es, vec![0.0; n])
}

#[test]
fn stalled_emitter_restarts_from_a_soft_archive_elite() {
    for kind in [EsKind::SepCma, EsKind::FullCma, EsKind::LmMa, EsKind::OpenAi] {
        let mut rec = Recorder::default();
        let out = run_observed(&config(kind, 1, 120, 4), &Flat, &[10, 10], 1.0, 0.0, 2, &mut rec).unwrap();
        assert_eq!(rec.elites.len(), 1, "{kind:?}");
        let (first, mean) = &rec.restarts[0];
        assert!((50..=52).contains(first), "{kind:?} first restart at batch {first}");
        assert_eq!(mean, &rec.elites[0]);
        assert_eq!(out.log.iter().map(|s| s.restarts_this_iter).sum::<usize>(), rec.restarts.len());
    }
}

#[test]
fn batches_are_ranked_by_improvement_then_objective() {
    let domain = SphereDomain::new(20);
    let mut rec = Recorder::default();
    run_observed(&config(EsKind::SepCma, 3, 40, 20), &domain, &[20, 20], 0.01, 0.0, 5, &mut rec).unwrap();
    assert_eq!(rec.batches, 120);
    assert!(rec.orders_ok);
}

#[test]
fn logged_metrics_are_monotone() {
    let domain = ArmDomain::new(20);
    for kind in [EsKind::SepCma, EsKind::OpenAi] {
        let out = run(&config(kind, 2, 60, 20), &domain, &[30, 30], 0.01, 0.0, 9).unwrap();
        for w in out.log.windows(2) {
            assert!(w[1].qd_score >= w[0].qd_score);
            assert!(w[1].coverage >= w[0].coverage);
            assert!(w[1].best >= w[0].best);
            assert!(w[1].wall_time_ms >= w[0].wall_time_ms);
        }
    }
}

#[test]
fn different_seeds_diverge() {
    let domain = SphereDomain::new(20);
    let a = run(&config(EsKind::SepCma, 1, 20, 20), &domain, &[20, 20], 0.01, 0.0, 1).unwrap();
    let b = run(&config(EsKind::SepCma, 1, 20, 20), &domain, &[20, 20], 0.01, 0.0, 2).unwrap();
    assert_ne!(a.result, b.result);
}
