//! Incremental random-feature propagation.
//!
//! The engine keeps `(k+1)` matrices `H^(0..k)` of shape `n x dim`.
//! `H^(0)` is a seeded Gaussian matrix `P` and never changes; each
//! interaction pushes lower-hop rows of one endpoint into the next hop of
//! the other, so that the (rescaled) `H^(l)` stays equal to `A^(l) P` for
//! the walk matrix `A^(l)` of the configured score scheme.
//!
//! Rows are stored node-major (`[node][hop][dim]`): an event touches two
//! contiguous blocks.

mod snapshot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventBatch, InteractionEvent, NodeId};
use crate::rng::GaussianFeatures;
use crate::scalar::{dot, Real};
use crate::scheme::{SchemeError, ScoreScheme};

pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

/// How many events ahead `replay` prefetches rows.
const PREFETCH_DISTANCE: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("event at t={t} precedes the sketch clock t={t_now}")]
    TimestampRegression { t: f64, t_now: f64 },
    #[error("events at t={t} were already applied; same-timestamp events must arrive as one batch")]
    SharedTimestamp { t: f64 },
    #[error("node {node} exceeds the configured capacity limit of {limit} nodes")]
    CapacityOverflow { node: NodeId, limit: usize },
    #[error("hop {hop} is outside 0..={k}")]
    HopOutOfRange { hop: usize, k: usize },
    #[error("exp(lambda * k * t) overflows at t={t} (lambda={lambda}, k={k}); normalize timestamps")]
    NumericRange { t: f64, lambda: f64, k: usize },
    #[error("invalid sketch configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("snapshot version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("snapshot stores {found}-bit scalars, expected {expected}-bit")]
    ScalarMismatch { found: u8, expected: u8 },
}

impl From<SchemeError> for SketchError {
    fn from(e: SchemeError) -> Self {
        SketchError::InvalidConfig(e.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub k: usize,
    pub dim: usize,
    pub scheme: ScoreScheme,
    pub seed: u64,
    /// Initial node capacity.
    pub n_hint: usize,
    /// Hard cap on node ids; `None` grows without bound.
    pub max_nodes: Option<usize>,
}

impl SketchConfig {
    pub fn new(k: usize, dim: usize, scheme: ScoreScheme, seed: u64) -> Self {
        Self { k, dim, scheme, seed, n_hint: 0, max_nodes: None }
    }

    pub fn with_n_hint(mut self, n: usize) -> Self {
        self.n_hint = n;
        self
    }

    pub fn with_max_nodes(mut self, limit: usize) -> Self {
        self.max_nodes = Some(limit);
        self
    }
}

/// `dim = ceil(10 * ln(2E))` for `E` interactions (at least 1).
pub fn auto_dim(events: usize) -> usize {
    if events == 0 {
        return 1;
    }
    ((10.0 * (2.0 * events as f64).ln()).ceil() as usize).max(1)
}

/// Smallest `dim` covering the inner-product preservation bound
/// `24 / eps^2 * ln(4^(1/3) (k+1) n)`.
pub fn jl_dim(epsilon: f64, k: usize, n: usize) -> usize {
    let vectors = ((k + 1) * n) as f64;
    (24.0 / (epsilon * epsilon) * (4f64.powf(1.0 / 3.0) * vectors).ln()).ceil() as usize
}

/// One rescaled row `e^{-lambda l t} H^(l)_node` (time decay) or the raw row.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledRow<T> {
    pub node: NodeId,
    pub hop: usize,
    pub values: Vec<T>,
}

/// Asks the kernel to back a large buffer with transparent huge pages.
/// Random row access over states beyond the TLB reach otherwise pays a page
/// walk on most events.
#[cfg(target_os = "linux")]
pub(crate) fn advise_huge_pages<T>(buf: &mut Vec<T>) {
    const HUGE_PAGE: usize = 2 << 20;
    const PAGE: usize = 4096;
    let bytes = buf.capacity() * std::mem::size_of::<T>();
    if bytes < 2 * HUGE_PAGE {
        return;
    }
    let start = buf.as_mut_ptr() as usize;
    let aligned = (start + PAGE - 1) & !(PAGE - 1);
    let len = (bytes - (aligned - start)) & !(PAGE - 1);
    // SAFETY: the range lies inside the vector's allocation and madvise
    // only changes paging hints; failure is harmless and ignored.
    unsafe {
        libc::madvise(aligned as *mut libc::c_void, len, libc::MADV_HUGEPAGE);
    }
}

#[cfg(not(target_os = "linux"))]
pub(crate) fn advise_huge_pages<T>(_buf: &mut Vec<T>) {}

#[derive(Clone, Debug)]
pub struct SketchState<T: Real> {
    k: usize,
    dim: usize,
    scheme: ScoreScheme,
    features: GaussianFeatures,
    capacity: usize,
    max_nodes: Option<usize>,
    data: Vec<T>,
    t_now: f64,
    t_prev: f64,
    events_applied: u64,
    // CAWN only: decayed degree as of `degree_stamp`
    degree: Vec<T>,
    degree_stamp: Vec<f64>,
}

/// `y += a x`, in fixed-width chunks so the loop vectorizes.
#[inline]
fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    const W: usize = 8;
    let n = y.len().min(x.len());
    let (y, x) = (&mut y[..n], &x[..n]);
    let mut yc = y.chunks_exact_mut(W);
    let mut xc = x.chunks_exact(W);
    for (yb, xb) in (&mut yc).zip(&mut xc) {
        for i in 0..W {
            yb[i] += a * xb[i];
        }
    }
    for (yi, &xi) in yc.into_remainder().iter_mut().zip(xc.remainder()) {
        *yi += a * xi;
    }
}

impl<T: Real> SketchState<T> {
    pub fn init(config: SketchConfig) -> Result<Self, SketchError> {
        if config.k < 1 {
            return Err(SketchError::InvalidConfig("k must be at least 1".into()));
        }
        if config.dim < 1 {
            return Err(SketchError::InvalidConfig("dim must be at least 1".into()));
        }
        config.scheme.validate()?;
        let n = match config.max_nodes {
            Some(limit) => config.n_hint.min(limit),
            None => config.n_hint,
        };
        let mut state = Self {
            k: config.k,
            dim: config.dim,
            scheme: config.scheme,
            features: GaussianFeatures::new(config.seed),
            capacity: 0,
            max_nodes: config.max_nodes,
            data: Vec::new(),
            t_now: 0.0,
            t_prev: 0.0,
            events_applied: 0,
            degree: Vec::new(),
            degree_stamp: Vec::new(),
        };
        state.grow_to(n);
        Ok(state)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> ScoreScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.features.seed()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn t_now(&self) -> f64 {
        self.t_now
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn events_applied(&self) -> u64 {
        self.events_applied
    }

    pub fn features(&self) -> GaussianFeatures {
        self.features
    }

    #[inline]
    fn block_len(&self) -> usize {
        (self.k + 1) * self.dim
    }

    /// Raw `H^(hop)` row of a materialized node.
    pub fn row(&self, node: NodeId, hop: usize) -> Option<&[T]> {
        if hop > self.k || node as usize >= self.capacity {
            return None;
        }
        let start = node as usize * self.block_len() + hop * self.dim;
        Some(&self.data[start..start + self.dim])
    }

    /// CAWN time-decayed degree of `node` at the sketch clock.
    pub fn cawn_degree(&self, node: NodeId) -> Option<f64> {
        let ScoreScheme::CawnDecay { alpha } = self.scheme else {
            return None;
        };
        let i = node as usize;
        if i >= self.capacity {
            return Some(0.0);
        }
        Some(self.degree[i].as_f64() * (-alpha * (self.t_now - self.degree_stamp[i])).exp())
    }

    fn grow_to(&mut self, n: usize) {
        if n <= self.capacity {
            return;
        }
        let block = self.block_len();
        self.data.reserve_exact(n * block - self.data.len());
        advise_huge_pages(&mut self.data);
        self.data.resize(n * block, T::zero());
        for node in self.capacity..n {
            let start = node * block;
            self.features.fill_row(node as NodeId, &mut self.data[start..start + self.dim]);
        }
        if self.scheme.is_cawn() {
            self.degree.reserve_exact(n - self.degree.len());
            self.degree.resize(n, T::zero());
            self.degree_stamp.reserve_exact(n - self.degree_stamp.len());
            self.degree_stamp.resize(n, 0.0);
        }
        self.capacity = n;
    }

    /// Materializes rows up to `node`, doubling capacity when possible.
    pub fn ensure_node(&mut self, node: NodeId) -> Result<(), SketchError> {
        let needed = node as usize + 1;
        if needed <= self.capacity {
            return Ok(());
        }
        let mut target = needed.max(self.capacity * 2);
        if let Some(limit) = self.max_nodes {
            if needed > limit {
                return Err(SketchError::CapacityOverflow { node, limit });
            }
            target = target.min(limit);
        }
        self.grow_to(target);
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<(), SketchError> {
        if t < self.t_now {
            return Err(SketchError::TimestampRegression { t, t_now: self.t_now });
        }
        if self.events_applied > 0 && t == self.t_now {
            return Err(SketchError::SharedTimestamp { t });
        }
        if let ScoreScheme::TimeDecay { lambda } = self.scheme {
            if lambda * t * self.k as f64 > T::max_exp_arg() {
                return Err(SketchError::NumericRange { t, lambda, k: self.k });
            }
        }
        Ok(())
    }

    fn decayed_degree(&self, node: usize, t: f64, alpha: f64) -> f64 {
        self.degree[node].as_f64() * (-alpha * (t - self.degree_stamp[node])).exp()
    }

    /// Mutable blocks of two distinct nodes.
    fn two_blocks(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        debug_assert_ne!(a, b);
        let block = self.block_len();
        if a < b {
            let (lo, hi) = self.data.split_at_mut(b * block);
            (&mut lo[a * block..(a + 1) * block], &mut hi[..block])
        } else {
            let (lo, hi) = self.data.split_at_mut(a * block);
            (&mut hi[..block], &mut lo[b * block..(b + 1) * block])
        }
    }

    /// Applies one interaction whose timestamp is strictly later than every
    /// event applied so far. Only rows `u` and `v` of `H^(1..k)` change.
    pub fn apply_event(&mut self, event: &InteractionEvent) -> Result<(), SketchError> {
        self.check_time(event.t)?;
        if event.u == event.v {
            return Err(SketchError::InvalidConfig(format!("self-loop on node {}", event.u)));
        }
        self.ensure_node(event.u.max(event.v))?;
        let (u, v, t, d, k) = (event.u as usize, event.v as usize, event.t, self.dim, self.k);

        match self.scheme {
            ScoreScheme::TimeDecay { .. } | ScoreScheme::UniformCount => {
                let s = self.propagation_scale(t);
                let (bu, bv) = self.two_blocks(u, v);
                for l in (1..=k).rev() {
                    axpy(&mut bu[l * d..(l + 1) * d], s, &bv[(l - 1) * d..l * d]);
                    axpy(&mut bv[l * d..(l + 1) * d], s, &bu[(l - 1) * d..l * d]);
                }
            }
            ScoreScheme::CawnDecay { alpha } => {
                let du = self.decayed_degree(u, t, alpha);
                let dv = self.decayed_degree(v, t, alpha);
                let (keep_u, push_u) = (T::lit(du / (du + 1.0)), T::lit(1.0 / (du + 1.0)));
                let (keep_v, push_v) = (T::lit(dv / (dv + 1.0)), T::lit(1.0 / (dv + 1.0)));
                let (bu, bv) = self.two_blocks(u, v);
                for l in (1..=k).rev() {
                    for j in 0..d {
                        bu[l * d + j] = keep_u * bu[l * d + j] + push_u * bv[(l - 1) * d + j];
                    }
                    for j in 0..d {
                        bv[l * d + j] = keep_v * bv[l * d + j] + push_v * bu[(l - 1) * d + j];
                    }
                }
                self.degree[u] = T::lit(du + 1.0);
                self.degree[v] = T::lit(dv + 1.0);
                self.degree_stamp[u] = t;
                self.degree_stamp[v] = t;
            }
        }
        self.t_prev = t;
        self.t_now = t;
        self.events_applied += 1;
        Ok(())
    }

    fn propagation_scale(&self, t: f64) -> T {
        match self.scheme {
            ScoreScheme::TimeDecay { lambda } => T::lit((lambda * t).exp()),
            _ => T::one(),
        }
    }

    /// Applies all events sharing one timestamp. Every event's contribution
    /// is computed from the pre-batch rows and the contributions are summed,
    /// so same-timestamp events never chain. Contributions are accumulated
    /// in `(min(u,v), max(u,v))` order, which makes the result independent
    /// of the order of events inside the batch.
    pub fn apply_batch(&mut self, batch: &EventBatch) -> Result<(), SketchError> {
        self.apply_run(batch.t(), batch.events())
    }

    /// [`apply_batch`](Self::apply_batch) over a run of events stamped `t`.
    fn apply_run(&mut self, t: f64, events: &[InteractionEvent]) -> Result<(), SketchError> {
        self.check_time(t)?;
        let mut pairs: Vec<(NodeId, NodeId)> = events.iter().map(|e| e.canonical()).collect();
        if let Some(&(a, _)) = pairs.iter().find(|(a, b)| a == b) {
            return Err(SketchError::InvalidConfig(format!("self-loop on node {a}")));
        }
        pairs.sort_unstable();
        let max_node = pairs.iter().map(|&(_, b)| b).max().expect("batches are non-empty");
        self.ensure_node(max_node)?;

        let mut nodes: Vec<NodeId> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let slot = |x: NodeId| nodes.binary_search(&x).expect("endpoint is an affected node");

        let (d, k) = (self.dim, self.k);
        // per affected node: (keep factor, push coefficient)
        let coefficients: Vec<(T, T)> = match self.scheme {
            ScoreScheme::CawnDecay { alpha } => {
                let mut multiplicity = vec![0.0f64; nodes.len()];
                for &(a, b) in &pairs {
                    multiplicity[slot(a)] += 1.0;
                    multiplicity[slot(b)] += 1.0;
                }
                nodes
                    .iter()
                    .zip(&multiplicity)
                    .map(|(&x, &m)| {
                        let dx = self.decayed_degree(x as usize, t, alpha);
                        (T::lit(dx / (dx + m)), T::lit(1.0 / (dx + m)))
                    })
                    .collect()
            }
            _ => vec![(T::one(), self.propagation_scale(t)); nodes.len()],
        };

        let stride = k * d;
        let mut delta = vec![T::zero(); nodes.len() * stride];
        let block = self.block_len();
        for &(a, b) in &pairs {
            let (sa, sb) = (slot(a), slot(b));
            for l in (1..=k).rev() {
                let src_b = &self.data[b as usize * block + (l - 1) * d..][..d];
                axpy(&mut delta[sa * stride + (l - 1) * d..][..d], coefficients[sa].1, src_b);
                let src_a = &self.data[a as usize * block + (l - 1) * d..][..d];
                axpy(&mut delta[sb * stride + (l - 1) * d..][..d], coefficients[sb].1, src_a);
            }
        }

        let cawn = self.scheme.is_cawn();
        for (i, &x) in nodes.iter().enumerate() {
            let keep = coefficients[i].0;
            for l in 1..=k {
                let row = &mut self.data[x as usize * block + l * d..][..d];
                let add = &delta[i * stride + (l - 1) * d..][..d];
                if cawn {
                    for (r, &a) in row.iter_mut().zip(add) {
                        *r = keep * *r + a;
                    }
                } else {
                    for (r, &a) in row.iter_mut().zip(add) {
                        *r += a;
                    }
                }
            }
        }
        if let ScoreScheme::CawnDecay { alpha } = self.scheme {
            for &(a, b) in &pairs {
                for x in [a as usize, b as usize] {
                    let dx = self.decayed_degree(x, t, alpha);
                    self.degree[x] = T::lit(dx + 1.0);
                    self.degree_stamp[x] = t;
                }
            }
        }
        self.t_prev = t;
        self.t_now = t;
        self.events_applied += events.len() as u64;
        Ok(())
    }

    /// Feeds a chronological stream: single-event stamps go through
    /// [`apply_event`](Self::apply_event), shared stamps through
    /// [`apply_batch`](Self::apply_batch).
    ///
    /// Rows of events a few positions ahead are prefetched while the current
    /// one is applied, hiding memory latency on large states.
    pub fn replay(&mut self, events: &[InteractionEvent]) -> Result<(), SketchError> {
        let mut next = 0;
        for run in events.chunk_by(|a, b| a.t.to_bits() == b.t.to_bits()) {
            for e in events.iter().skip(next + PREFETCH_DISTANCE).take(run.len()) {
                self.prefetch(e.u);
                self.prefetch(e.v);
            }
            next += run.len();
            if run.len() == 1 {
                self.apply_event(&run[0])?;
            } else {
                self.apply_run(run[0].t, run)?;
            }
        }
        Ok(())
    }

    #[inline]
    fn prefetch(&self, node: NodeId) {
        #[cfg(target_arch = "x86_64")]
        if (node as usize) < self.capacity {
            use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T1};
            let block = &self.data[node as usize * self.block_len()..][..self.block_len()];
            let line = 64 / std::mem::size_of::<T>();
            for chunk in block.chunks(line) {
                // SAFETY: prefetching is a hint and never faults; the pointer is in bounds
                unsafe { _mm_prefetch::<_MM_HINT_T1>(chunk.as_ptr() as *const i8) };
            }
        }
        #[cfg(not(target_arch = "x86_64"))]
        let _ = node;
    }

    /// Rescaling factor `e^{-lambda * hop * t_now}` (1 for other schemes).
    pub fn rescale_factor(&self, hop: usize) -> f64 {
        match self.scheme {
            ScoreScheme::TimeDecay { lambda } if hop > 0 => (-lambda * hop as f64 * self.t_now).exp(),
            _ => 1.0,
        }
    }

    /// The row whose inner products estimate walk-matrix inner products.
    /// Nodes beyond the materialized capacity have no walks: hop 0 is their
    /// seeded feature row and higher hops are zero.
    pub fn rescaled_row(&self, node: NodeId, hop: usize) -> Result<RescaledRow<T>, SketchError> {
        if hop > self.k {
            return Err(SketchError::HopOutOfRange { hop, k: self.k });
        }
        let values = match self.row(node, hop) {
            Some(raw) if hop == 0 => raw.to_vec(),
            Some(raw) => {
                let f = T::lit(self.rescale_factor(hop));
                raw.iter().map(|&x| x * f).collect()
            }
            None if hop == 0 => self.features.row(node, self.dim),
            None => vec![T::zero(); self.dim],
        };
        Ok(RescaledRow { node, hop, values })
    }

    /// `[<H̄_u^(l), H̄_w^(0)>]` for `l = 0..=k`, estimating `A^(l)_{u,w}`.
    pub fn estimate_similarity(&self, u: NodeId, w: NodeId) -> Vec<T> {
        let target = self.rescaled_row(w, 0).expect("hop 0 is always in range").values;
        (0..=self.k).map(|l| dot(&self.rescaled_row(u, l).expect("hop within 0..=k").values, &target)).collect()
    }

    /// Bytes currently reserved by the state.
    pub fn memory_bytes(&self) -> usize {
        let scalar = std::mem::size_of::<T>();
        self.data.capacity() * scalar
            + self.degree.capacity() * scalar
            + self.degree_stamp.capacity() * std::mem::size_of::<f64>()
    }

    /// Analytic size of `(k+1)` matrices of `n x dim` scalars.
    pub fn model_bytes(k: usize, n: usize, dim: usize) -> usize {
        (k + 1) * n * dim * std::mem::size_of::<T>()
    }
}
