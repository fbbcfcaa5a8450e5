//! Spectral flow of operator paths.
//!
//! Two independent routes are provided. [`sfl_crossings`] samples the path,
//! compares window Morse indices at bracketing points and bisects until each
//! change is isolated; [`sfl_endpoint`] evaluates the relative Morse index of
//! the endpoints of a path in `J + K` normal form. Sign convention: an
//! eigenvalue moving from negative to positive contributes `+1`, so for a
//! finite-dimensional path `sfl = morse(L_0) - morse(L_1)`.

use crate::prelude::*;
use alloc::sync::Arc;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::operator::{inertia, relative_morse_index_sc, SignCompactOperator, DEFAULT_GAP};

/// Refinement is triggered below `GUARD_FACTOR * gap`.
pub const GUARD_FACTOR: f64 = 10.0;
/// Maximum number of bisections of an initial grid interval.
pub const MAX_DEPTH: usize = 40;

/// A point on an operator path.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Dense(SymmetricMatrix),
    SignCompact(SignCompactOperator),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathKind {
    Dense,
    SignCompact,
}

impl Operator {
    pub fn kind(&self) -> PathKind {
        match self {
            Operator::Dense(_) => PathKind::Dense,
            Operator::SignCompact(_) => PathKind::SignCompact,
        }
    }

    /// The finite block carrying all spectral information near zero.
    pub fn window(&self) -> SymmetricMatrix {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::SignCompact(s) => s.window(),
        }
    }

    /// Morse index of the window and `min |eigenvalue|`.
    pub fn inertia(&self) -> Result<(usize, f64)> {
        let (m, margin) = inertia(&self.window())?;
        match self {
            Operator::Dense(_) => Ok((m, margin)),
            Operator::SignCompact(_) => Ok((m, margin.min(1.0))),
        }
    }

    pub fn margin(&self) -> Result<f64> {
        Ok(self.inertia()?.1)
    }

    /// Whether `other` has the same kind and, for sign-compact operators, the same `J`.
    pub fn compatible(&self, other: &Operator) -> bool {
        match (self, other) {
            (Operator::Dense(a), Operator::Dense(b)) => a.dim() == b.dim(),
            (Operator::SignCompact(a), Operator::SignCompact(b)) => a.same_sign(b),
            _ => false,
        }
    }

    /// Largest entry difference of the windows (infinite if incompatible).
    pub fn distance(&self, other: &Operator) -> f64 {
        if !self.compatible(other) {
            return f64::INFINITY;
        }
        self.window().max_abs_diff(&other.window())
    }

    /// Cogredient transform by a window-local invertible `M` (row-major).
    pub fn congruence(&self, m: &[f64]) -> Result<Operator> {
        Ok(match self {
            Operator::Dense(a) => Operator::Dense(a.congruence(m)?),
            Operator::SignCompact(s) => Operator::SignCompact(s.congruence(m)?),
        })
    }

    /// Entrywise `(1 - t) a + t b` of compatible operators.
    pub fn lerp(a: &Operator, b: &Operator, t: f64) -> Result<Operator> {
        match (a, b) {
            (Operator::Dense(x), Operator::Dense(y)) => Ok(Operator::Dense(SymmetricMatrix::lerp(x, y, t)?)),
            (Operator::SignCompact(x), Operator::SignCompact(y)) if x.same_sign(y) => {
                let k = SymmetricMatrix::lerp(x.k_window(), y.k_window(), t)?;
                Ok(Operator::SignCompact(x.with_k(k)?))
            }
            (Operator::SignCompact(_), Operator::SignCompact(_)) => Err(Error::MismatchedJ),
            _ => Err(Error::KindMismatch),
        }
    }
}

pub type Sampler = Arc<dyn Fn(f64) -> Result<Operator> + Send + Sync>;

/// How a sampled path is filled in between knots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Interpolation {
    Linear,
    /// Natural cubic spline through each matrix entry.
    CubicSpline,
}

/// A continuous family `t ↦ L_t`, `t ∈ [0, 1]`, with invertible endpoints.
#[derive(Clone)]
pub struct OperatorPath {
    kind: PathKind,
    sampler: Sampler,
    endpoint_gap: f64,
    reference: Operator,
}

impl fmt::Debug for OperatorPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorPath")
            .field("kind", &self.kind)
            .field("endpoint_gap", &self.endpoint_gap)
            .finish_non_exhaustive()
    }
}

impl OperatorPath {
    /// Wraps a sampler, checking that both endpoints have the declared kind
    /// and an invertibility margin of at least `endpoint_gap`.
    pub fn new(
        kind: PathKind,
        sampler: impl Fn(f64) -> Result<Operator> + Send + Sync + 'static,
        endpoint_gap: f64,
    ) -> Result<Self> {
        Self::from_sampler(kind, Arc::new(sampler), endpoint_gap)
    }

    pub fn from_sampler(kind: PathKind, sampler: Sampler, endpoint_gap: f64) -> Result<Self> {
        if !(endpoint_gap > 0.0) {
            return Err(Error::Invalid("endpoint gap must be positive".into()));
        }
        let start = sampler(0.0)?;
        if start.kind() != kind {
            return Err(Error::KindMismatch);
        }
        let path = Self { kind, sampler, endpoint_gap, reference: start };
        for t in [0.0, 1.0] {
            let margin = path.sample(t)?.margin()?;
            if margin < endpoint_gap {
                return Err(Error::DegenerateEndpoint { t, margin });
            }
        }
        Ok(path)
    }

    pub fn constant(op: Operator, endpoint_gap: f64) -> Result<Self> {
        let kind = op.kind();
        Self::new(kind, move |_| Ok(op.clone()), endpoint_gap)
    }

    /// Path through `(t_k, L_k)` knots (strictly increasing, spanning `[0, 1]`).
    pub fn from_samples(samples: Vec<(f64, Operator)>, interpolation: Interpolation, endpoint_gap: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Invalid("a sampled path needs at least two samples".into()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Invalid("sample times must be strictly increasing".into()));
        }
        let (t0, t1) = (samples[0].0, samples[samples.len() - 1].0);
        if (t0 - 0.0).abs() > 1e-12 || (t1 - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("sample times must span [0, 1]".into()));
        }
        let first = &samples[0].1;
        if samples.iter().any(|(_, op)| !first.compatible(op)) {
            return Err(Error::KindMismatch);
        }
        let kind = first.kind();
        let sampler: Sampler = match interpolation {
            Interpolation::Linear => {
                let samples = Arc::new(samples);
                Arc::new(move |t| {
                    let t = t.clamp(0.0, 1.0);
                    let k = knot_interval(samples.iter().map(|s| s.0), samples.len(), t);
                    let (ta, a) = &samples[k];
                    let (tb, b) = &samples[k + 1];
                    Operator::lerp(a, b, (t - ta) / (tb - ta))
                })
            }
            Interpolation::CubicSpline => {
                let spline = Arc::new(MatrixSpline::new(&samples));
                let template = first.clone();
                Arc::new(move |t| {
                    let w = spline.eval(t.clamp(0.0, 1.0))?;
                    Ok(match &template {
                        Operator::Dense(_) => Operator::Dense(w),
                        Operator::SignCompact(s) => Operator::SignCompact(s.with_k(w)?),
                    })
                })
            }
        };
        Self::from_sampler(kind, sampler, endpoint_gap)
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn endpoint_gap(&self) -> f64 {
        self.endpoint_gap
    }

    /// `L_t`, checked for kind (and `J`) consistency with `L_0`.
    pub fn sample(&self, t: f64) -> Result<Operator> {
        let op = (self.sampler)(t)?;
        if op.kind() != self.kind {
            return Err(Error::KindMismatch);
        }
        if !self.reference.compatible(&op) {
            return Err(match self.kind {
                PathKind::SignCompact => Error::MismatchedJ,
                PathKind::Dense => Error::DimensionMismatch {
                    expected: self.reference.window().dim(),
                    found: op.window().dim(),
                },
            });
        }
        Ok(op)
    }

    pub fn sampler(&self) -> Sampler {
        self.sampler.clone()
    }

    /// `t ↦ L_{1-t}`.
    pub fn reversed(&self) -> Self {
        let s = self.sampler.clone();
        Self {
            kind: self.kind,
            sampler: Arc::new(move |t| s(1.0 - t)),
            endpoint_gap: self.endpoint_gap,
            reference: self.sample(1.0).unwrap_or_else(|_| self.reference.clone()),
        }
    }

    /// `t ↦ L_{phi(t)}` for a continuous `phi` with `phi(0) = 0`, `phi(1) = 1`.
    pub fn reparameterized(&self, phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let s = self.sampler.clone();
        Self {
            kind: self.kind,
            sampler: Arc::new(move |t| s(phi(t))),
            endpoint_gap: self.endpoint_gap,
            reference: self.reference.clone(),
        }
    }

    /// `t ↦ M_t^T L_t M_t` for window-local invertible `M_t` (row-major).
    pub fn congruent(&self, m: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Result<Self> {
        let s = self.sampler.clone();
        Self::new(self.kind, move |t| s(t)?.congruence(&m(t)), self.endpoint_gap)
    }

    /// Concatenation `self * other`, traversed at double speed.
    pub fn concatenate(&self, other: &Self, tol: f64) -> Result<Self> {
        let end = self.sample(1.0)?;
        let start = other.sample(0.0)?;
        let distance = end.distance(&start);
        if !(distance <= tol) {
            return Err(Error::EndpointMismatch { distance });
        }
        let (a, b) = (self.sampler.clone(), other.sampler.clone());
        Self::new(
            self.kind,
            move |t| if t <= 0.5 { a(2.0 * t) } else { b(2.0 * t - 1.0) },
            self.endpoint_gap.min(other.endpoint_gap),
        )
    }

    fn probe(&self, t: f64) -> Result<(usize, f64)> {
        self.sample(t)?.inertia()
    }
}

fn knot_interval(times: impl Iterator<Item = f64>, len: usize, t: f64) -> usize {
    let mut k = 0;
    for (i, ti) in times.enumerate() {
        if ti <= t {
            k = i;
        }
    }
    k.min(len - 2)
}

/// Entrywise natural cubic spline of window matrices.
struct MatrixSpline {
    times: Vec<f64>,
    values: Vec<SymmetricMatrix>,
    second: Vec<Vec<f64>>,
}

impl MatrixSpline {
    fn new(samples: &[(f64, Operator)]) -> Self {
        let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let values: Vec<SymmetricMatrix> = samples
            .iter()
            .map(|(_, op)| match op {
                Operator::Dense(m) => m.clone(),
                Operator::SignCompact(s) => s.k_window().clone(),
            })
            .collect();
        let n = values[0].dim();
        let k = times.len();
        let mut second = vec![vec![0.0; n * n]; k];
        // tridiagonal system for the natural spline, solved for all entries at once
        if k > 2 {
            let mut diag = vec![0.0; k];
            let mut rhs = vec![vec![0.0; n * n]; k];
            let mut upper = vec![0.0; k];
            for i in 1..k - 1 {
                let h0 = times[i] - times[i - 1];
                let h1 = times[i + 1] - times[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                for e in 0..n * n {
                    let y0 = values[i - 1].entries()[e];
                    let y1 = values[i].entries()[e];
                    let y2 = values[i + 1].entries()[e];
                    rhs[i][e] = 6.0 * ((y2 - y1) / h1 - (y1 - y0) / h0);
                }
            }
            // forward elimination on rows 1..k-1 (lower coefficient of row i is h_{i-1})
            for i in 2..k - 1 {
                let lower = times[i] - times[i - 1];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                let (prev, cur) = rhs.split_at_mut(i);
                for e in 0..n * n {
                    cur[0][e] -= f * prev[i - 1][e];
                }
            }
            for i in (1..k - 1).rev() {
                for e in 0..n * n {
                    let next = if i + 1 < k - 1 { second[i + 1][e] } else { 0.0 };
                    second[i][e] = (rhs[i][e] - upper[i] * next) / diag[i];
                }
            }
        }
        Self { times, values, second }
    }

    fn eval(&self, t: f64) -> Result<SymmetricMatrix> {
        let k = knot_interval(self.times.iter().copied(), self.times.len(), t);
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let h = tb - ta;
        let a = (tb - t) / h;
        let b = (t - ta) / h;
        let n = self.values[0].dim();
        let ya = self.values[k].entries();
        let yb = self.values[k + 1].entries();
        let (ma, mb) = (&self.second[k], &self.second[k + 1]);
        let entries = (0..n * n)
            .map(|e| a * ya[e] + b * yb[e] + ((a * a * a - a) * ma[e] + (b * b * b - b) * mb[e]) * h * h / 6.0)
            .collect();
        SymmetricMatrix::new(n, entries)
    }
}

/// Which route produced an [`SflResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SflMethod {
    Crossings,
    Endpoint,
}

/// A located change of the window Morse index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub t: f64,
    /// `+1` when eigenvalues move from negative to positive.
    pub direction: i32,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SflResult {
    pub value: i64,
    pub crossings: Vec<Crossing>,
    pub refinement_depth: usize,
    pub method: SflMethod,
}

/// Spectral flow by isolating eigenvalue crossings.
///
/// `n_init` grid points are probed; any interval whose endpoint Morse indices
/// differ is bisected until it is shorter than `tol` or its midpoint falls in
/// the guard band `|eigenvalue| < 10 * gap`. Grid points inside the guard
/// band are moved to a nearby regular point; if none exists within the depth
/// cap the path is degenerate on an arc and [`Error::UnresolvedCrossing`] is
/// returned.
pub fn sfl_crossings(path: &OperatorPath, n_init: usize, tol: f64) -> Result<SflResult> {
    if n_init < 2 {
        return Err(Error::Invalid("n_init must be at least 2".into()));
    }
    let guard = GUARD_FACTOR * path.endpoint_gap;
    let h = 1.0 / (n_init - 1) as f64;
    let mut grid: Vec<(f64, usize)> = Vec::with_capacity(n_init);
    for i in 0..n_init {
        let t = if i + 1 == n_init { 1.0 } else { i as f64 * h };
        let (m, margin) = path.probe(t)?;
        if margin >= guard || ((i == 0 || i + 1 == n_init) && margin >= path.endpoint_gap) {
            grid.push((t, m));
            continue;
        }
        if i == 0 || i + 1 == n_init {
            return Err(Error::DegenerateEndpoint { t, margin });
        }
        let (lo, hi) = (t - 0.5 * h, t + 0.5 * h);
        match regular_point_near(path, t, lo, hi, guard)? {
            Some(p) => grid.push(p),
            None => return Err(Error::UnresolvedCrossing { lo, hi }),
        }
    }

    let mut out = SflResult { value: 0, crossings: Vec::new(), refinement_depth: 0, method: SflMethod::Crossings };
    for w in grid.windows(2) {
        let ((a, ma), (b, mb)) = (w[0], w[1]);
        resolve(path, (a, ma), (b, mb), 0, tol, guard, &mut out)?;
    }
    out.value = out.crossings.iter().map(|c| c.direction as i64 * c.multiplicity as i64).sum();
    Ok(out)
}

/// Searches `t ± w 2^-k` inside `(lo, hi)` for a point outside the guard band.
fn regular_point_near(path: &OperatorPath, t: f64, lo: f64, hi: f64, guard: f64) -> Result<Option<(f64, usize)>> {
    let mut delta = 0.25 * (hi - lo);
    for _ in 0..MAX_DEPTH {
        for cand in [t + delta, t - delta] {
            if cand > lo && cand < hi {
                let (m, margin) = path.probe(cand)?;
                if margin >= guard {
                    return Ok(Some((cand, m)));
                }
            }
        }
        delta *= 0.5;
    }
    Ok(None)
}

fn resolve(
    path: &OperatorPath,
    (a, ma): (f64, usize),
    (b, mb): (f64, usize),
    depth: usize,
    tol: f64,
    guard: f64,
    out: &mut SflResult,
) -> Result<()> {
    if ma == mb {
        return Ok(());
    }
    out.refinement_depth = out.refinement_depth.max(depth);
    let mid = 0.5 * (a + b);
    let record = |out: &mut SflResult, t: f64| {
        out.crossings.push(Crossing {
            t,
            direction: if ma > mb { 1 } else { -1 },
            multiplicity: ma.abs_diff(mb),
        });
    };
    if b - a <= tol || depth >= MAX_DEPTH {
        record(out, mid);
        return Ok(());
    }
    let (mm, margin) = path.probe(mid)?;
    if margin >= guard {
        resolve(path, (a, ma), (mid, mm), depth + 1, tol, guard, out)?;
        return resolve(path, (mid, mm), (b, mb), depth + 1, tol, guard, out);
    }
    // the midpoint sits in the guard band: try to split elsewhere, otherwise
    // the crossing is isolated to (a, b)
    let mut delta = 0.25 * (b - a);
    for _ in 0..4 {
        for cand in [mid - delta, mid + delta] {
            let (mc, mcargin) = path.probe(cand)?;
            if mcargin >= guard {
                resolve(path, (a, ma), (cand, mc), depth + 1, tol, guard, out)?;
                return resolve(path, (cand, mc), (b, mb), depth + 1, tol, guard, out);
            }
        }
        delta *= 0.5;
    }
    record(out, mid);
    Ok(())
}

/// Spectral flow as `mu_rel(J + K_0, J + K_1)` for a path in normal form.
pub fn sfl_endpoint(path: &OperatorPath) -> Result<SflResult> {
    if path.kind != PathKind::SignCompact {
        return Err(Error::Invalid("endpoint spectral flow needs a sign-compact path".into()));
    }
    let (s, t) = match (path.sample(0.0)?, path.sample(1.0)?) {
        (Operator::SignCompact(s), Operator::SignCompact(t)) => (s, t),
        _ => return Err(Error::KindMismatch),
    };
    let value = relative_morse_index_sc(&s, &t, path.endpoint_gap)?;
    Ok(SflResult { value, crossings: Vec::new(), refinement_depth: 0, method: SflMethod::Endpoint })
}

/// Outcome of [`homotopy_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyReport {
    /// Spectral flow of each slice `t ↦ h(s_i, t)`.
    pub values: Vec<i64>,
    pub consistent: bool,
    /// The shared value when `consistent`.
    pub common: Option<i64>,
    pub min_endpoint_margin: f64,
    pub max_endpoint_margin: f64,
}

/// Spectral flow of `n_s` slices of a homotopy with invertible ends.
pub fn homotopy_check<H>(h: H, kind: PathKind, n_s: usize, n_init: usize, tol: f64, gap: f64) -> Result<HomotopyReport>
where
    H: Fn(f64, f64) -> Result<Operator> + Send + Sync + 'static,
{
    if n_s < 2 {
        return Err(Error::Invalid("need at least two homotopy slices".into()));
    }
    let h = Arc::new(h);
    let mut values = Vec::with_capacity(n_s);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n_s {
        let s = i as f64 / (n_s - 1) as f64;
        for t in [0.0, 1.0] {
            let margin = h(s, t)?.margin()?;
            if margin < gap {
                return Err(Error::EndpointDegenerateInHomotopy { s, margin });
            }
            lo = lo.min(margin);
            hi = hi.max(margin);
        }
        let hs = h.clone();
        let path = OperatorPath::new(kind, move |t| hs(s, t), gap)?;
        values.push(sfl_crossings(&path, n_init, tol)?.value);
    }
    let consistent = values.windows(2).all(|w| w[0] == w[1]);
    Ok(HomotopyReport {
        common: consistent.then(|| values[0]),
        values,
        consistent,
        min_endpoint_margin: lo,
        max_endpoint_margin: hi,
    })
}

/// Default arguments used by the drivers.
pub const DEFAULT_N_INIT: usize = 17;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Convenience: sfl by crossings with the default grid and tolerance.
pub fn sfl(path: &OperatorPath) -> Result<SflResult> {
    sfl_crossings(path, DEFAULT_N_INIT, DEFAULT_TOL)
}

/// `id + t K_n` on a window of `window >= n` directions with only the `+1`
/// tail: the compact-perturbation path with `K_n = -2 P_n`.
pub fn compact_projection_path(n: usize, window: usize) -> Result<OperatorPath> {
    let w = window.max(n).max(1);
    let j = SignCompactOperator::sign(vec![1; w], true, false)?;
    OperatorPath::new(
        PathKind::SignCompact,
        move |t| {
            let d: Vec<f64> = (0..w).map(|i| if i < n { -2.0 * t } else { 0.0 }).collect();
            Ok(Operator::SignCompact(j.with_k(SymmetricMatrix::diagonal(&d)?)?))
        },
        DEFAULT_GAP,
    )
}
