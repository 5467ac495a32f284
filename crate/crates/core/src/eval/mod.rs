//! Experiment drivers behind the `twm` command line: timed replay, sketch
//! vs oracle comparison, dimension sweeps and throughput benchmarks.
//!
//! Every report keeps wall-clock measurements under a `timing` field; all
//! other fields are a deterministic function of the inputs and seeds.

pub mod synth;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{batch_by_timestamp, node_count, InteractionEvent};
use crate::matrix::DenseMatrix;
use crate::oracle::{Horizon, OracleError, WalkMatrixSet, WalkOracle};
use crate::scalar::{dot, Real};
use crate::scheme::ScoreScheme;
use crate::sketch::{SketchConfig, SketchError, SketchState};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPLAY_WINDOW: u64 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowTiming {
    pub first_event: u64,
    pub events: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayTiming {
    pub total_seconds: f64,
    pub windows: Vec<WindowTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub schema_version: u32,
    pub scheme: ScoreScheme,
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub events: u64,
    pub batches: u64,
    pub capacity: usize,
    pub t_now: f64,
    pub memory_bytes: usize,
    pub model_bytes: usize,
    pub timing: ReplayTiming,
}

/// Feeds `events` into `state`, timing every window of `window` events.
pub fn replay_timed<T: Real>(
    state: &mut SketchState<T>,
    events: &[InteractionEvent],
    window: u64,
) -> Result<ReplayReport, SketchError> {
    let batches = batch_by_timestamp(events);
    let start = Instant::now();
    let mut windows = Vec::new();
    let (mut applied, mut window_first, mut window_start) = (0u64, 0u64, Instant::now());
    for batch in &batches {
        if batch.len() == 1 {
            state.apply_event(&batch.events()[0])?;
        } else {
            state.apply_batch(batch)?;
        }
        applied += batch.len() as u64;
        if applied - window_first >= window {
            windows.push(WindowTiming {
                first_event: window_first,
                events: applied - window_first,
                seconds: window_start.elapsed().as_secs_f64(),
            });
            window_first = applied;
            window_start = Instant::now();
        }
    }
    if applied > window_first {
        windows.push(WindowTiming {
            first_event: window_first,
            events: applied - window_first,
            seconds: window_start.elapsed().as_secs_f64(),
        });
    }
    let total_seconds = start.elapsed().as_secs_f64();
    Ok(ReplayReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scheme: state.scheme(),
        k: state.k(),
        dim: state.dim(),
        seed: state.seed(),
        events: applied,
        batches: batches.len() as u64,
        capacity: state.capacity(),
        t_now: state.t_now(),
        memory_bytes: state.memory_bytes(),
        model_bytes: SketchState::<T>::model_bytes(state.k(), state.capacity(), state.dim()),
        timing: ReplayTiming { total_seconds, windows },
    })
}

/// Statistics of `|<H̄_u^(l1), H̄_v^(l2)> - <A_u^(l1), A_v^(l2)>| / c` with
/// `c = (|A_u^(l1)|^2 + |A_v^(l2)|^2) / 2`, over all node pairs and seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopPairStats {
    pub l1: usize,
    pub l2: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub violation_rate: f64,
    /// Largest violation rate of a single `(u, v)` across the seeds.
    pub max_pair_violation_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareTiming {
    pub oracle_seconds: f64,
    pub sketch_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub scheme: ScoreScheme,
    pub k: usize,
    pub dim: usize,
    pub n: usize,
    pub events: usize,
    pub seed: u64,
    pub seeds: usize,
    pub epsilon: f64,
    /// Max relative entry error of the rescaled sketch against `A^(l) P`,
    /// one entry per hop (first seed only).
    pub exactness_by_hop: Vec<f64>,
    pub exactness_max: f64,
    pub hop_pairs: Vec<HopPairStats>,
    pub violation_rate: f64,
    pub max_quadruple_violation_rate: f64,
    pub violation_bound: f64,
    pub memory_bytes: usize,
    pub timing: CompareTiming,
}

/// Relative error with a magnitude-aware floor: `|a - b| / max(|b|, scale)`
/// where `scale` is the same entry of `|A| |P|`. Entries that cancel to
/// near zero are measured against the size of the terms being summed.
pub fn relative_error(actual: f64, expected: f64, scale: f64) -> f64 {
    let denom = expected.abs().max(scale);
    if denom == 0.0 {
        (actual - expected).abs()
    } else {
        (actual - expected).abs() / denom
    }
}

/// Max relative error per hop between the rescaled sketch rows of nodes
/// `0..n` and `A^(l) P`.
pub fn exactness_errors<T: Real>(state: &SketchState<T>, exact: &WalkMatrixSet<f64>) -> Vec<f64> {
    let n = exact.n();
    let p: DenseMatrix<f64> = state.features().matrix(n, state.dim());
    (0..=exact.k())
        .map(|l| {
            let a = exact.matrix(l);
            let expected = a.matmul(&p);
            let scale = a.abs_matmul(&p);
            let mut worst = 0.0f64;
            for u in 0..n {
                let row = state.rescaled_row(u as u64, l).expect("hop within 0..=k").values;
                for (j, x) in row.iter().enumerate() {
                    let err = relative_error(x.as_f64(), *expected.get(u, j), *scale.get(u, j));
                    worst = worst.max(err);
                }
            }
            worst
        })
        .collect()
}

/// Rows `A_u^(l)` stacked as `[(l, u)]`, hop-major.
fn stacked_rows(exact: &WalkMatrixSet<f64>) -> Vec<&[f64]> {
    (0..=exact.k()).flat_map(|l| (0..exact.n()).map(move |u| exact.matrix(l).row(u))).collect()
}

fn sketch_rows<T: Real>(state: &SketchState<T>, k: usize, n: usize) -> Vec<Vec<f64>> {
    (0..=k)
        .flat_map(|l| {
            (0..n).map(move |u| {
                state.rescaled_row(u as u64, l).expect("hop within 0..=k").values.iter().map(|x| x.as_f64()).collect()
            })
        })
        .collect()
}

pub fn sketch_config(scheme: ScoreScheme, k: usize, dim: usize, seed: u64, n: usize) -> SketchConfig {
    SketchConfig::new(k, dim, scheme, seed).with_n_hint(n)
}

pub fn build_sketch<T: Real>(config: SketchConfig, events: &[InteractionEvent]) -> Result<SketchState<T>, SketchError> {
    let mut state = SketchState::init(config)?;
    state.replay(events)?;
    Ok(state)
}

/// Ratios of one seed, plus its exactness errors when tracked.
type SeedOutcome = (Vec<f64>, Option<(Vec<f64>, usize)>);

/// Runs the sketch under `seeds` consecutive seeds starting at `config.seed`
/// and compares every rescaled inner product against the oracle.
pub fn compare<T: Real>(
    events: &[InteractionEvent],
    config: SketchConfig,
    epsilon: f64,
    seeds: usize,
) -> Result<ErrorReport, EvalError> {
    if seeds == 0 {
        return Err(EvalError::Config("at least one seed is required".into()));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(EvalError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let total = Instant::now();
    let n = node_count(events).max(config.n_hint);
    let k = config.k;
    let oracle_start = Instant::now();
    let oracle = WalkOracle::new(events, n)?;
    let exact: WalkMatrixSet<f64> = oracle.exact_matrices(config.scheme, k, Horizon::after_last(events))?;
    let oracle_seconds = oracle_start.elapsed().as_secs_f64();

    let rows_a = stacked_rows(&exact);
    let m = rows_a.len();
    let truth: Vec<f64> = (0..m * m).map(|ij| dot(rows_a[ij / m], rows_a[ij % m])).collect();
    let norms: Vec<f64> = (0..m).map(|i| truth[i * m + i]).collect();

    let sketch_start = Instant::now();
    // per seed: ratio for every (row i, row j)
    let per_seed: Vec<Result<SeedOutcome, SketchError>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let cfg = SketchConfig { seed: config.seed.wrapping_add(s as u64), n_hint: n, ..config };
            let state = build_sketch::<T>(cfg, events)?;
            let rows = sketch_rows(&state, k, n);
            let ratios = (0..m * m)
                .map(|ij| {
                    let (i, j) = (ij / m, ij % m);
                    let c = 0.5 * (norms[i] + norms[j]);
                    let dev = (dot(&rows[i], &rows[j]) - truth[ij]).abs();
                    if c == 0.0 {
                        if dev == 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        dev / c
                    }
                })
                .collect();
            let first = (s == 0).then(|| (exactness_errors(&state, &exact), state.memory_bytes()));
            Ok((ratios, first))
        })
        .collect();
    let sketch_seconds = sketch_start.elapsed().as_secs_f64();

    let mut ratios = Vec::with_capacity(seeds);
    let mut exactness_by_hop = Vec::new();
    let mut memory_bytes = 0;
    for result in per_seed {
        let (r, first) = result?;
        if let Some((e, mem)) = first {
            exactness_by_hop = e;
            memory_bytes = mem;
        }
        ratios.push(r);
    }

    let mut hop_pairs = Vec::new();
    let (mut violations, mut samples, mut max_quad) = (0u64, 0u64, 0.0f64);
    for l1 in 0..=k {
        for l2 in 0..=k {
            let (mut max_ratio, mut sum, mut count, mut viol, mut max_pair) = (0.0f64, 0.0, 0u64, 0u64, 0.0f64);
            for u in 0..n {
                for v in 0..n {
                    let ij = (l1 * n + u) * m + l2 * n + v;
                    let mut pair_viol = 0u64;
                    for r in &ratios {
                        let x = r[ij];
                        max_ratio = max_ratio.max(x);
                        sum += x;
                        count += 1;
                        if x > epsilon {
                            pair_viol += 1;
                        }
                    }
                    viol += pair_viol;
                    max_pair = max_pair.max(pair_viol as f64 / seeds as f64);
                }
            }
            violations += viol;
            samples += count;
            max_quad = max_quad.max(max_pair);
            hop_pairs.push(HopPairStats {
                l1,
                l2,
                max_ratio,
                mean_ratio: sum / count as f64,
                violation_rate: viol as f64 / count as f64,
                max_pair_violation_rate: max_pair,
            });
        }
    }

    let exactness_max = exactness_by_hop.iter().copied().fold(0.0, f64::max);
    Ok(ErrorReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scheme: config.scheme,
        k,
        dim: config.dim,
        n,
        events: events.len(),
        seed: config.seed,
        seeds,
        epsilon,
        exactness_by_hop,
        exactness_max,
        hop_pairs,
        violation_rate: violations as f64 / samples as f64,
        max_quadruple_violation_rate: max_quad,
        violation_bound: 2.0 / ((k + 1) * n) as f64,
        memory_bytes,
        timing: CompareTiming { oracle_seconds, sketch_seconds, total_seconds: total.elapsed().as_secs_f64() },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: usize,
    /// Mean over seeds of the per-seed mean `|estimate - A^(l)_{u,w}|`.
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub per_seed_mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub scheme: ScoreScheme,
    pub k: usize,
    pub n: usize,
    pub events: usize,
    pub seed: u64,
    pub seeds: usize,
    pub rows: Vec<SweepRow>,
    /// Whether the ensemble mean error decreases strictly with `dim`.
    pub strictly_decreasing: bool,
    pub timing: CompareTiming,
}

/// Estimation error of `estimate_similarity` against the oracle for every
/// `(u, w)` pair, per sketch dimension.
pub fn sweep<T: Real>(
    events: &[InteractionEvent],
    scheme: ScoreScheme,
    k: usize,
    dims: &[usize],
    seed: u64,
    seeds: usize,
    n_hint: usize,
) -> Result<SweepReport, EvalError> {
    if seeds == 0 || dims.is_empty() {
        return Err(EvalError::Config("sweep needs at least one seed and one dimension".into()));
    }
    let total = Instant::now();
    let n = node_count(events).max(n_hint);
    let oracle_start = Instant::now();
    let exact: WalkMatrixSet<f64> =
        WalkOracle::new(events, n)?.exact_matrices(scheme, k, Horizon::after_last(events))?;
    let oracle_seconds = oracle_start.elapsed().as_secs_f64();

    let sketch_start = Instant::now();
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let per_seed: Vec<Result<(f64, f64), SketchError>> = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let cfg = sketch_config(scheme, k, dim, seed.wrapping_add(s as u64), n);
                let state = build_sketch::<T>(cfg, events)?;
                let (mut sum, mut worst) = (0.0, 0.0f64);
                for u in 0..n {
                    for w in 0..n {
                        let est = state.estimate_similarity(u as u64, w as u64);
                        for (l, e) in est.iter().enumerate() {
                            let err = (e.as_f64() - exact.entry(l, u as u64, w as u64)).abs();
                            sum += err;
                            worst = worst.max(err);
                        }
                    }
                }
                Ok((sum / (n * n * (k + 1)) as f64, worst))
            })
            .collect();
        let mut per_seed_mean = Vec::with_capacity(seeds);
        let mut max_abs_error = 0.0f64;
        for r in per_seed {
            let (mean, worst) = r?;
            per_seed_mean.push(mean);
            max_abs_error = max_abs_error.max(worst);
        }
        let mean_abs_error = per_seed_mean.iter().sum::<f64>() / seeds as f64;
        rows.push(SweepRow { dim, mean_abs_error, max_abs_error, per_seed_mean });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].mean_abs_error < w[0].mean_abs_error);
    Ok(SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scheme,
        k,
        n,
        events: events.len(),
        seed,
        seeds,
        rows,
        strictly_decreasing,
        timing: CompareTiming {
            oracle_seconds,
            sketch_seconds: sketch_start.elapsed().as_secs_f64(),
            total_seconds: total.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    /// Fastest of the repeats.
    pub seconds: f64,
    pub events_per_second: f64,
    pub repeats: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub edges: usize,
    pub nodes: usize,
    pub memory_bytes: usize,
    pub model_bytes: usize,
    pub timing: BenchTiming,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub from_edges: usize,
    pub to_edges: usize,
    pub edge_ratio: f64,
    pub timing: GrowthTiming,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTiming {
    pub runtime_ratio: f64,
    /// `runtime_ratio / edge_ratio`; 1 is exactly linear.
    pub linearity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub scheme: ScoreScheme,
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    pub growth: Vec<GrowthStep>,
}

/// Replays a synthetic stream of each size, keeping the fastest of
/// `repeats` runs. Stream generation is not timed.
pub fn bench<T: Real>(
    edge_counts: &[usize],
    scheme: ScoreScheme,
    k: usize,
    dim: usize,
    seed: u64,
    repeats: usize,
) -> Result<BenchReport, EvalError> {
    if edge_counts.is_empty() || repeats == 0 {
        return Err(EvalError::Config("bench needs at least one edge count and one repeat".into()));
    }
    let mut rows = Vec::with_capacity(edge_counts.len());
    for &edges in edge_counts {
        let events = synth::synthetic_stream(edges, seed);
        let nodes = synth::bench_nodes(edges);
        let mut times = Vec::with_capacity(repeats);
        let mut memory_bytes = 0;
        for _ in 0..repeats {
            let mut state = SketchState::<T>::init(sketch_config(scheme, k, dim, seed, nodes))?;
            let start = Instant::now();
            state.replay(&events)?;
            times.push(start.elapsed().as_secs_f64());
            memory_bytes = state.memory_bytes();
            std::hint::black_box(&state);
        }
        let seconds = times.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(BenchRow {
            edges,
            nodes,
            memory_bytes,
            model_bytes: SketchState::<T>::model_bytes(k, nodes, dim),
            timing: BenchTiming { seconds, events_per_second: edges as f64 / seconds, repeats: times },
        });
    }
    let growth = rows
        .windows(2)
        .map(|w| {
            let edge_ratio = w[1].edges as f64 / w[0].edges as f64;
            let runtime_ratio = w[1].timing.seconds / w[0].timing.seconds;
            GrowthStep {
                from_edges: w[0].edges,
                to_edges: w[1].edges,
                edge_ratio,
                timing: GrowthTiming { runtime_ratio, linearity: runtime_ratio / edge_ratio },
            }
        })
        .collect();
    Ok(BenchReport { schema_version: REPORT_SCHEMA_VERSION, scheme, k, dim, seed, rows, growth })
}
