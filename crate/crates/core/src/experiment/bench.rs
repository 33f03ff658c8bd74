use std::io::{self, Write};
use std::time::Instant;

use crate::es::{EsKind, EsParams, EsState, RankedBatch};
use crate::rng;

const BLOCKS: usize = 5;

/// Per-solution ask+tell cost of one strategy at one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: EsKind,
    pub n: usize,
    pub us_per_solution: f64,
}

fn run_generation(es: &mut EsState, rng: &mut rand_chacha::ChaCha8Rng) {
    let xs = es.ask(rng).expect("benchmark state stays finite");
    let f: Vec<f64> = xs.iter().map(|x| -x.iter().map(|v| v * v).sum::<f64>()).collect();
    let batch = RankedBatch::new(xs, &f, &f).expect("finite objective");
    es.tell(&batch).expect("matching batch");
}

/// Times ask + evaluate + tell on `f(x) = -‖x‖²` for each variant and
/// dimension, with λ = 40 and the default hyperparameters.
///
/// At least `samples` solutions are timed per cell, split into blocks of
/// whole full-CMA eigendecomposition periods so that its amortized cost is
/// included. Blocks of the different variants are interleaved so that
/// background load affects all of them alike, and the fastest block of each
/// is reported. LM-MA-ES is warmed up until all `k` direction vectors are
/// active. Rows come out grouped by variant, in the order given.
pub fn bench_complexity(dims: &[usize], variants: &[EsKind], samples: usize) -> Vec<BenchRow> {
    let lambda = 40;
    let mut fastest = vec![vec![f64::INFINITY; dims.len()]; variants.len()];
    let mut generations = vec![0; dims.len()];
    for (d, &n) in dims.iter().enumerate() {
        let mut states: Vec<_> = variants
            .iter()
            .map(|&variant| {
                let params = EsParams::new(variant).batch_size(lambda).sigma0(0.5);
                let mut es = EsState::new(&params, &vec![1.0; n]).expect("valid benchmark params");
                let mut rng = rng::stream(0xBE4C, n as u64);
                let warmup = match variant {
                    EsKind::LmMa => params.directions + 1,
                    _ => 2,
                };
                for _ in 0..warmup {
                    run_generation(&mut es, &mut rng);
                }
                (es, rng)
            })
            .collect();
        let period = (n / lambda).max(1);
        let wanted = samples.div_ceil(lambda * BLOCKS).max(1);
        generations[d] = wanted.div_ceil(period) * period;
        for block in 0..BLOCKS {
            for i in 0..states.len() {
                // Rotate the starting variant between blocks.
                let v = (i + block) % states.len();
                let (es, rng) = &mut states[v];
                let start = Instant::now();
                for _ in 0..generations[d] {
                    run_generation(es, rng);
                }
                fastest[v][d] = fastest[v][d].min(start.elapsed().as_secs_f64());
            }
        }
    }
    let mut rows = Vec::with_capacity(variants.len() * dims.len());
    for (v, &variant) in variants.iter().enumerate() {
        for (d, &n) in dims.iter().enumerate() {
            rows.push(BenchRow {
                variant,
                n,
                us_per_solution: fastest[v][d] * 1e6 / (generations[d] * lambda) as f64,
            });
        }
    }
    rows
}

/// `variant,n,us_per_solution`
pub fn write_complexity_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> io::Result<()> {
    writeln!(out, "variant,n,us_per_solution")?;
    for r in rows {
        writeln!(out, "{},{},{:.4}", r.variant.variant_name(), r.n, r.us_per_solution)?;
    }
    Ok(())
}
