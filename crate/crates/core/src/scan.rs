//! Gridded parameter charts: degeneracy maps, edge spectral flow, bifurcation
//! masks and the components of the unmasked set.
//!
//! The pipeline is split so that drivers can evaluate nodes and edges in
//! parallel: [`ParameterChart::points`] gives the nodes, [`edge_jobs`] the
//! segments whose spectral flow is needed once node data is known, and
//! [`assemble`] performs the sequential reduction. [`scan`] runs all three.

use crate::prelude::*;
use alloc::collections::VecDeque;

use crate::error::{Error, Result};
use crate::family::{find_bifurcation_on_path, hessian_operator, segment, DetectOptions, FunctionalFamily};
use crate::flow::{sfl_crossings, Operator, OperatorPath};
use crate::operator::DEFAULT_GAP;

pub const MIN_RESOLUTION: usize = 8;
/// Tolerance of the seam check.
pub const SEAM_TOL: f64 = 1e-8;

/// Identification of the upper face of a wrapped axis with the lower one.
///
/// The window at the upper face is enlarged by `tail_exchange` directions of
/// the `+1` tail, conjugated by the signed permutation `(perm, signs)`, and
/// compared with the lower window enlarged by as many `-1` tail directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeamWitness {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
    pub tail_exchange: usize,
}

impl SeamWitness {
    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect(), signs: vec![1; n], tail_exchange: 0 }
    }

    fn matrix(&self) -> Result<Vec<f64>> {
        let n = self.perm.len();
        if self.signs.len() != n || self.signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Invalid("seam witness signs must be ±1, one per entry".into()));
        }
        let mut seen = vec![false; n];
        for &p in &self.perm {
            if p >= n || core::mem::replace(&mut seen[p], true) {
                return Err(Error::Invalid("seam witness is not a permutation".into()));
            }
        }
        // column j of M is signs[j] e_{perm[j]}
        let mut m = vec![0.0; n * n];
        for j in 0..n {
            m[self.perm[j] * n + j] = f64::from(self.signs[j]);
        }
        Ok(m)
    }

    /// Largest entry error between the transported upper operator and the lower one.
    pub fn mismatch(&self, hi: &Operator, lo: &Operator) -> Result<f64> {
        let k = self.tail_exchange;
        let (a, b) = match (hi, lo) {
            (Operator::Dense(a), Operator::Dense(b)) if k == 0 => (a.clone(), b.clone()),
            (Operator::SignCompact(a), Operator::SignCompact(b)) if a.same_sign(b) => {
                if k > 0 && !(a.tail_plus() && a.tail_minus()) {
                    return Err(Error::Invalid("tail exchange needs both tails".into()));
                }
                (a.enlarged(k, 0)?.window(), b.enlarged(0, k)?.window())
            }
            (Operator::Dense(_), Operator::Dense(_)) => {
                return Err(Error::Invalid("dense operators have no tails to exchange".into()))
            }
            (Operator::SignCompact(_), Operator::SignCompact(_)) => return Err(Error::MismatchedJ),
            _ => return Err(Error::KindMismatch),
        };
        if a.dim() != self.perm.len() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: self.perm.len() });
        }
        Ok(a.congruence(&self.matrix()?)?.max_abs_diff(&b))
    }
}

/// A box in parameter space sampled on a regular grid.
///
/// Along a wrapped axis the nodes are `lo + i (hi - lo) / n`, `i < n`, and
/// the upper face is identified with the lower one; otherwise both faces are
/// nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterChart {
    bounds: Vec<(f64, f64)>,
    resolution: Vec<usize>,
    identify: Vec<bool>,
    seams: Vec<Option<SeamWitness>>,
}

impl ParameterChart {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: Vec<usize>, identify: Vec<bool>) -> Result<Self> {
        let d = bounds.len();
        if d == 0 || d > 3 {
            return Err(Error::Invalid("charts have one to three axes".into()));
        }
        if resolution.len() != d || identify.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: resolution.len().min(identify.len()) });
        }
        if resolution.iter().any(|&n| n < MIN_RESOLUTION) {
            return Err(Error::Invalid("resolution must be at least 8 per axis".into()));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
            return Err(Error::Invalid("bounds must be finite with lo < hi".into()));
        }
        Ok(Self { bounds, resolution, identify, seams: vec![None; d] })
    }

    pub fn with_seam(mut self, axis: usize, witness: SeamWitness) -> Result<Self> {
        if axis >= self.dim() || !self.identify[axis] {
            return Err(Error::Invalid("seam witnesses belong to wrapped axes".into()));
        }
        self.seams[axis] = Some(witness);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn identify(&self) -> &[bool] {
        &self.identify
    }

    pub fn seam(&self, axis: usize) -> Option<&SeamWitness> {
        self.seams[axis].as_ref()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid spacing along `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        let n = self.resolution[axis];
        if self.identify[axis] {
            (hi - lo) / n as f64
        } else {
            (hi - lo) / (n - 1) as f64
        }
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.bounds[axis].0 + i as f64 * self.step(axis)
    }

    /// Row-major multi-index (axis 0 slowest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.resolution[a];
            k /= self.resolution[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.resolution).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k).iter().enumerate().map(|(a, &i)| self.coordinate(a, i)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Neighbour `steps` (±1 or ±2) along `axis`, with the wrap count.
    fn shift(&self, k: usize, axis: usize, steps: isize) -> Option<(usize, isize)> {
        let mut idx = self.multi_index(k);
        let n = self.resolution[axis] as isize;
        let j = idx[axis] as isize + steps;
        let (j, wraps) = if (0..n).contains(&j) {
            (j, 0)
        } else if self.identify[axis] {
            (j.rem_euclid(n), j.div_euclid(n))
        } else {
            return None;
        };
        idx[axis] = j as usize;
        Some((self.flat_index(&idx), wraps))
    }

    /// Node `k` moved by `steps` grid cells along `axis` without wrapping,
    /// possibly beyond the chart bounds.
    fn unrolled(&self, k: usize, axis: usize, steps: isize) -> Vec<f64> {
        let mut p = self.point(k);
        p[axis] += steps as f64 * self.step(axis);
        p
    }

    /// Sorted neighbour list of node `k` (4-neighbourhood in 2-D).
    pub fn neighbours(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for a in 0..self.dim() {
            for s in [-1, 1] {
                if let Some((j, _)) = self.shift(k, a, s) {
                    if j != k {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Per-node data of a scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeInfo {
    /// Smallest `|eigenvalue|` of the window.
    pub margin: f64,
    pub kernel_dim: usize,
    /// Morse index for functional families, spectral index for geodesics.
    pub index: i64,
    pub degenerate: bool,
    /// The model could not evaluate the node; treated as degenerate and masked.
    pub failed: bool,
}

impl NodeInfo {
    pub fn failed() -> Self {
        Self { margin: 0.0, kernel_dim: 0, index: 0, degenerate: true, failed: true }
    }
}

/// What a scan needs from a parameterized family.
pub trait ScanModel: Sync {
    fn node(&self, x: &[f64]) -> Result<NodeInfo>;
    /// Spectral flow along the straight segment from `a` to `b`; `b` may lie
    /// outside the chart when the segment crosses a seam. `na` and `nb` are
    /// the data of the grid nodes at the two ends.
    fn edge_sfl(&self, a: &[f64], b: &[f64], na: &NodeInfo, nb: &NodeInfo) -> Result<i64>;
    /// Labels accumulate `label_sign * sfl` along edges.
    fn label_sign(&self) -> i64 {
        1
    }
    /// Checks the seam witnesses of wrapped axes against the model.
    fn check_seams(&self, _chart: &ParameterChart) -> Result<()> {
        Ok(())
    }
}

/// Hessians of a [`FunctionalFamily`] at the trivial branch.
#[derive(Clone, Debug)]
pub struct FamilyModel {
    pub family: FunctionalFamily,
    pub gap: f64,
    pub n_init: usize,
    pub tol: f64,
}

impl FamilyModel {
    pub fn new(family: FunctionalFamily) -> Self {
        Self { family, gap: DEFAULT_GAP, n_init: 5, tol: 1e-9 }
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = gap;
        self
    }
}

impl ScanModel for FamilyModel {
    fn node(&self, x: &[f64]) -> Result<NodeInfo> {
        let op = hessian_operator(&self.family, x)?;
        let eig = op.window().eigenvalues()?;
        let (index, margin) = op.inertia()?;
        let kernel_dim = eig.iter().filter(|e| e.abs() < self.gap).count();
        Ok(NodeInfo { margin, kernel_dim, index: index as i64, degenerate: margin < self.gap, failed: false })
    }

    fn edge_sfl(&self, a: &[f64], b: &[f64], _: &NodeInfo, _: &NodeInfo) -> Result<i64> {
        let f = self.family.clone();
        let (a, b) = (a.to_vec(), b.to_vec());
        let probe = hessian_operator(&f, &a)?;
        let path = OperatorPath::new(
            probe.kind(),
            move |t| {
                let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (1.0 - t) * p + t * q).collect();
                hessian_operator(&f, &x)
            },
            self.gap,
        )?;
        Ok(sfl_crossings(&path, self.n_init, self.tol)?.value)
    }

    fn check_seams(&self, chart: &ParameterChart) -> Result<()> {
        for axis in 0..chart.dim() {
            if !chart.identify()[axis] {
                continue;
            }
            let (lo, hi) = chart.bounds()[axis];
            let stride = (chart.len() / 64).max(1);
            for k in (0..chart.len()).step_by(stride) {
                let mut p = chart.point(k);
                p[axis] = hi;
                let top = hessian_operator(&self.family, &p)?;
                p[axis] = lo;
                let bottom = hessian_operator(&self.family, &p)?;
                let n = top.window().dim()
                    + chart.seam(axis).map_or(0, |w| w.tail_exchange);
                let w = chart.seam(axis).cloned().unwrap_or_else(|| SeamWitness::identity(n));
                let error = w.mismatch(&top, &bottom)?;
                if error > SEAM_TOL {
                    return Err(Error::SeamMismatch { axis, error });
                }
            }
        }
        Ok(())
    }
}

/// A segment whose spectral flow [`assemble`] needs.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeJob {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    /// Degenerate node the segment passes through, for two-cell hops.
    pub via: Option<usize>,
    pub a: Vec<f64>,
    /// Unrolled end point.
    pub b: Vec<f64>,
}

/// Edges between nondegenerate neighbours, and for every degenerate node
/// the hop between its two neighbours along each axis.
pub fn edge_jobs(chart: &ParameterChart, nodes: &[NodeInfo]) -> Vec<EdgeJob> {
    let mut jobs = Vec::new();
    for k in 0..chart.len() {
        for axis in 0..chart.dim() {
            if let Some((j, _)) = chart.shift(k, axis, 1) {
                if j != k && !nodes[k].degenerate && !nodes[j].degenerate {
                    jobs.push(EdgeJob { from: k, to: j, axis, via: None, a: chart.point(k), b: chart.unrolled(k, axis, 1) });
                }
            }
            if nodes[k].degenerate {
                if let (Some((p, _)), Some((q, _))) = (chart.shift(k, axis, -1), chart.shift(k, axis, 1)) {
                    if p != q && !nodes[p].degenerate && !nodes[q].degenerate {
                        jobs.push(EdgeJob { from: p, to: q, axis, via: Some(k), a: chart.point(p), b: chart.unrolled(p, axis, 2) });
                    }
                }
            }
        }
    }
    jobs
}

/// Spectral flow of one grid segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSfl {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    pub via: Option<usize>,
    pub value: i64,
}

/// Mismatch between node labels and the spectral flow of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelDefect {
    pub from: usize,
    pub to: usize,
    /// `label(to) - label(from) - sign * sfl`.
    pub defect: i64,
}

/// Half-open box of node indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subwindow {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub components: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub resolution: Vec<usize>,
    pub component_count: usize,
    /// Sorted distinct component labels.
    pub labels: Vec<i64>,
    pub label_defects: Vec<LabelDefect>,
    /// Largest `|defect|`, the spectral flow around a non-contractible loop.
    pub loop_defect: i64,
    /// A solid `2^d` block of masked nodes exists.
    pub has_interior: bool,
    /// Masked nodes with no masked node among their `3^d - 1` neighbours.
    pub isolated_cells: usize,
    /// Fraction of masked nodes with unmasked nodes on both sides along some axis.
    pub interface_fraction: f64,
    pub disconnected_subwindows: Vec<Subwindow>,
    pub skipped_edges: Vec<(usize, usize)>,
    pub failed_nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<EdgeSfl>,
    pub mask: Vec<bool>,
    /// Component id per unmasked node.
    pub components: Vec<Option<usize>>,
    /// Label of every node reached from the basepoint.
    pub labels: Vec<Option<i64>>,
    /// Label of each component, indexed by component id.
    pub component_labels: Vec<Option<i64>>,
    pub basepoint: usize,
    pub report: ScanReport,
}

impl ScanResult {
    pub fn degeneracy(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.margin).collect()
    }

    pub fn kernel_dims(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.kernel_dim).collect()
    }

    /// Label of the component containing node `k`.
    pub fn node_label(&self, k: usize) -> Option<i64> {
        self.components[k].and_then(|c| self.component_labels[c])
    }
}

/// Node nearest to `x` (coordinates outside the chart are clamped).
pub fn nearest_node(chart: &ParameterChart, x: &[f64]) -> Result<usize> {
    if x.len() != chart.dim() {
        return Err(Error::DimensionMismatch { expected: chart.dim(), found: x.len() });
    }
    let idx: Vec<usize> = (0..chart.dim())
        .map(|a| {
            let n = chart.resolution[a];
            let r = ((x[a] - chart.bounds[a].0) / chart.step(a)).round();
            if chart.identify[a] {
                (r as i64).rem_euclid(n as i64) as usize
            } else {
                r.clamp(0.0, (n - 1) as f64) as usize
            }
        })
        .collect();
    Ok(chart.flat_index(&idx))
}

/// Sequential reduction of node data and segment spectral flows into masks,
/// components, labels and the report.
///
/// Mask rule: for a nonzero edge the endpoint with the smaller margin is
/// masked; a degenerate node is masked when a hop through it has nonzero
/// flow or when it has no neighbour on some side.
pub fn assemble(
    chart: &ParameterChart,
    nodes: Vec<NodeInfo>,
    jobs: &[EdgeJob],
    values: Vec<Result<i64>>,
    basepoint: usize,
    label_sign: i64,
) -> Result<ScanResult> {
    let n = chart.len();
    if nodes.len() != n || values.len() != jobs.len() {
        return Err(Error::DimensionMismatch { expected: n, found: nodes.len() });
    }
    let mut edges = Vec::with_capacity(jobs.len());
    let mut skipped = Vec::new();
    for (job, v) in jobs.iter().zip(values) {
        match v {
            Ok(value) => edges.push(EdgeSfl { from: job.from, to: job.to, axis: job.axis, via: job.via, value }),
            Err(_) => skipped.push((job.from, job.to)),
        }
    }

    let mut mask = vec![false; n];
    for e in &edges {
        if e.value == 0 {
            continue;
        }
        match e.via {
            Some(k) => mask[k] = true,
            None => {
                let k = if nodes[e.to].margin < nodes[e.from].margin { e.to } else { e.from };
                mask[k] = true;
            }
        }
    }
    for k in 0..n {
        if nodes[k].failed {
            mask[k] = true;
        }
        if !nodes[k].degenerate {
            continue;
        }
        let boundary = (0..chart.dim()).any(|a| chart.shift(k, a, -1).is_none() || chart.shift(k, a, 1).is_none());
        if boundary {
            mask[k] = true;
        }
    }
    for &(from, to) in &skipped {
        // an unresolved segment cannot be certified either way
        let k = if nodes[to].margin < nodes[from].margin { to } else { from };
        mask[k] = true;
    }
    components_and_labels(chart, nodes, edges, mask, basepoint, label_sign, skipped)
}

/// Components of the unmasked nodes and spanning-tree labels from `basepoint`.
pub fn components_and_labels(
    chart: &ParameterChart,
    nodes: Vec<NodeInfo>,
    edges: Vec<EdgeSfl>,
    mask: Vec<bool>,
    basepoint: usize,
    label_sign: i64,
    skipped_edges: Vec<(usize, usize)>,
) -> Result<ScanResult> {
    let n = chart.len();
    if basepoint >= n {
        return Err(Error::Invalid("basepoint outside the chart".into()));
    }
    if mask[basepoint] || nodes[basepoint].degenerate {
        return Err(Error::MaskedBasepoint);
    }

    let mut uf = UnionFind::new(n);
    for k in 0..n {
        if mask[k] {
            continue;
        }
        for j in chart.neighbours(k) {
            if !mask[j] {
                uf.union(k, j);
            }
        }
    }
    let mut components = vec![None; n];
    let mut ids: Vec<usize> = Vec::new();
    for k in 0..n {
        if mask[k] {
            continue;
        }
        let root = uf.find(k);
        let id = match ids.iter().position(|&r| r == root) {
            Some(i) => i,
            None => {
                ids.push(root);
                ids.len() - 1
            }
        };
        components[k] = Some(id);
    }

    // adjacency of the labelling graph, both directions
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for e in &edges {
        adj[e.from].push((e.to, label_sign * e.value));
        adj[e.to].push((e.from, -label_sign * e.value));
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    let mut labels: Vec<Option<i64>> = vec![None; n];
    labels[basepoint] = Some(0);
    let mut queue = VecDeque::from([basepoint]);
    while let Some(k) = queue.pop_front() {
        let lk = labels[k].unwrap_or(0);
        for &(j, d) in &adj[k] {
            if labels[j].is_none() {
                labels[j] = Some(lk + d);
                queue.push_back(j);
            }
        }
    }
    // unmasked degenerate nodes take the label of their first labelled neighbour
    for k in 0..n {
        if labels[k].is_none() && nodes[k].degenerate && !mask[k] {
            labels[k] = chart.neighbours(k).into_iter().find_map(|j| if nodes[j].degenerate { None } else { labels[j] });
        }
    }
    let mut label_defects = Vec::new();
    for e in &edges {
        if let (Some(a), Some(b)) = (labels[e.from], labels[e.to]) {
            let defect = b - a - label_sign * e.value;
            if defect != 0 {
                label_defects.push(LabelDefect { from: e.from, to: e.to, defect });
            }
        }
    }
    let loop_defect = label_defects.iter().map(|d| d.defect.abs()).max().unwrap_or(0);

    let mut component_labels = vec![None; ids.len()];
    for k in 0..n {
        if let Some(c) = components[k] {
            if component_labels[c].is_none() {
                component_labels[c] = labels[k];
            }
        }
    }
    let mut distinct: Vec<i64> = component_labels.iter().flatten().copied().collect();
    distinct.sort_unstable();
    distinct.dedup();

    let (has_interior, isolated_cells, interface_fraction) = mask_geometry(chart, &mask);
    let disconnected_subwindows = subwindow_sweep(chart, &mask);
    let report = ScanReport {
        resolution: chart.resolution.clone(),
        component_count: ids.len(),
        labels: distinct,
        label_defects,
        loop_defect,
        has_interior,
        isolated_cells,
        interface_fraction,
        disconnected_subwindows,
        skipped_edges,
        failed_nodes: (0..n).filter(|&k| nodes[k].failed).collect(),
    };
    Ok(ScanResult { nodes, edges, mask, components, labels, component_labels, basepoint, report })
}

fn mask_geometry(chart: &ParameterChart, mask: &[bool]) -> (bool, usize, f64) {
    let d = chart.dim();
    let mut interior = false;
    let mut isolated = 0;
    let mut interface = 0;
    let mut total = 0;
    for k in 0..chart.len() {
        if !mask[k] {
            continue;
        }
        total += 1;
        // solid block spanned by +1 steps on every axis subset
        if !interior {
            interior = (0..(1usize << d)).all(|bits| {
                let mut j = Some(k);
                for a in 0..d {
                    if bits >> a & 1 == 1 {
                        j = j.and_then(|j| chart.shift(j, a, 1).map(|s| s.0));
                    }
                }
                j.is_some_and(|j| mask[j])
            });
        }
        let near = moore_neighbourhood(chart, k);
        if !near.iter().any(|&j| j != k && mask[j]) {
            isolated += 1;
        }
        let separates = (0..d).any(|a| {
            let side = |s| chart.shift(k, a, s).is_some_and(|(j, _)| !mask[j]);
            side(-1) && side(1)
        });
        if separates {
            interface += 1;
        }
    }
    let fraction = if total == 0 { 0.0 } else { interface as f64 / total as f64 };
    (interior, isolated, fraction)
}

fn moore_neighbourhood(chart: &ParameterChart, k: usize) -> Vec<usize> {
    let mut out = vec![k];
    for a in 0..chart.dim() {
        let mut next = Vec::with_capacity(out.len() * 3);
        for &j in &out {
            next.push(j);
            for s in [-1, 1] {
                if let Some((m, _)) = chart.shift(j, a, s) {
                    next.push(m);
                }
            }
        }
        out = next;
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Components of the unmasked nodes inside each of the `2^d` half-boxes,
/// without wrapping; boxes split into several pieces are returned.
fn subwindow_sweep(chart: &ParameterChart, mask: &[bool]) -> Vec<Subwindow> {
    let d = chart.dim();
    let mut out = Vec::new();
    for bits in 0..(1usize << d) {
        let lo: Vec<usize> = (0..d).map(|a| if bits >> a & 1 == 1 { chart.resolution[a] / 2 } else { 0 }).collect();
        let hi: Vec<usize> = (0..d)
            .map(|a| if bits >> a & 1 == 1 { chart.resolution[a] } else { chart.resolution[a] / 2 })
            .collect();
        let inside = |idx: &[usize]| idx.iter().zip(lo.iter().zip(&hi)).all(|(i, (l, h))| i >= l && i < h);
        let mut uf = UnionFind::new(chart.len());
        let mut members = Vec::new();
        for k in 0..chart.len() {
            let idx = chart.multi_index(k);
            if mask[k] || !inside(&idx) {
                continue;
            }
            members.push(k);
            for a in 0..d {
                if idx[a] + 1 < hi[a] {
                    let mut j = idx.clone();
                    j[a] += 1;
                    let j = chart.flat_index(&j);
                    if !mask[j] {
                        uf.union(k, j);
                    }
                }
            }
        }
        let mut roots: Vec<usize> = members.iter().map(|&k| uf.find(k)).collect();
        roots.sort_unstable();
        roots.dedup();
        if roots.len() > 1 {
            out.push(Subwindow { lo, hi, components: roots.len() });
        }
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut k: usize) -> usize {
        while self.parent[k] != k {
            self.parent[k] = self.parent[self.parent[k]];
            k = self.parent[k];
        }
        k
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, for reproducible representatives
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Degeneracy map, edge spectral flow, mask, components and labels.
pub fn scan<M: ScanModel + ?Sized>(model: &M, chart: &ParameterChart, basepoint: &[f64]) -> Result<ScanResult> {
    model.check_seams(chart)?;
    let nodes: Vec<NodeInfo> = chart.points().iter().map(|p| model.node(p).unwrap_or_else(|_| NodeInfo::failed())).collect();
    let jobs = edge_jobs(chart, &nodes);
    let values = jobs.iter().map(|j| model.edge_sfl(&j.a, &j.b, &nodes[j.from], &nodes[j.to])).collect();
    let base = nearest_node(chart, basepoint)?;
    assemble(chart, nodes, &jobs, values, base, model.label_sign())
}

/// Masked nodes whose segments carry a certified bifurcation; the others are
/// released and components recomputed.
pub fn confirm_mask(f: &FunctionalFamily, chart: &ParameterChart, result: &ScanResult, opts: &DetectOptions) -> Result<ScanResult> {
    let mut mask = vec![false; result.mask.len()];
    for e in &result.edges {
        if e.value == 0 {
            continue;
        }
        let steps = if e.via.is_some() { 2 } else { 1 };
        let a = chart.point(e.from);
        let b = chart.unrolled(e.from, e.axis, steps);
        let found = find_bifurcation_on_path(f, segment(a, b), opts)?;
        if found.records.is_empty() {
            continue;
        }
        let k = match e.via {
            Some(k) => k,
            None if result.nodes[e.to].margin < result.nodes[e.from].margin => e.to,
            None => e.from,
        };
        mask[k] = result.mask[k];
    }
    components_and_labels(
        chart,
        result.nodes.clone(),
        result.edges.clone(),
        mask,
        result.basepoint,
        1,
        result.report.skipped_edges.clone(),
    )
}

/// Chart of the `torus_demo` family: `[0, 1]²` wrapped on both axes. The
/// `θ₁` seam exchanges the window direction with one `-1` tail direction.
pub fn torus_chart(resolution: usize) -> Result<ParameterChart> {
    ParameterChart::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![resolution; 2], vec![true, true])?
        .with_seam(0, SeamWitness { perm: vec![1, 0], signs: vec![1, 1], tail_exchange: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::registry;

    #[test]
    fn krasnoselskii_line() {
        let model = FamilyModel::new(registry("krasnoselskii").unwrap());
        let chart = ParameterChart::new(vec![(0.5, 4.5)], vec![401], vec![false]).unwrap();
        let res = scan(&model, &chart, &[0.5]).unwrap();
        let masked: Vec<f64> = (0..chart.len()).filter(|&k| res.mask[k]).map(|k| chart.point(k)[0]).collect();
        assert_eq!(masked.len(), 4);
        for (m, want) in masked.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((m - want).abs() <= chart.step(0) + 1e-12);
        }
        assert_eq!(res.report.component_count, 5);
        assert_eq!(res.report.labels, vec![-4, -3, -2, -1, 0]);
        assert_eq!(res.report.loop_defect, 0);
    }

    #[test]
    fn torus_does_not_disconnect() {
        let model = FamilyModel::new(registry("torus_demo").unwrap());
        let chart = torus_chart(16).unwrap();
        let res = scan(&model, &chart, &[0.0, 0.0]).unwrap();
        assert_eq!(res.report.component_count, 1);
        assert_eq!(res.report.loop_defect, 1);
        for k in 0..chart.len() {
            let th = chart.point(k)[0];
            assert_eq!(res.mask[k], (th - 0.5).abs() < 1e-12, "node {k} at {th}");
        }
        let crossing = res.edges.iter().find(|e| e.value != 0).unwrap();
        assert_eq!(crossing.value, -1);
    }

    #[test]
    fn seam_check_rejects_wrong_witness() {
        let model = FamilyModel::new(registry("torus_demo").unwrap());
        let chart = ParameterChart::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![8, 8], vec![true, true]).unwrap();
        assert!(matches!(scan(&model, &chart, &[0.0, 0.0]), Err(Error::SeamMismatch { axis: 0, .. })));
    }

    #[test]
    fn empty_mask_single_component() {
        let model = FamilyModel::new(registry("positive_definite").unwrap());
        let chart = ParameterChart::new(vec![(-1.0, 1.0)], vec![16], vec![false]).unwrap();
        let res = scan(&model, &chart, &[0.0]).unwrap();
        assert!(res.mask.iter().all(|m| !m));
        assert_eq!(res.report.component_count, 1);
        assert_eq!(res.report.labels, vec![0]);
    }

    #[test]
    fn masked_basepoint() {
        let model = FamilyModel::new(registry("krasnoselskii").unwrap());
        let chart = ParameterChart::new(vec![(1.0, 2.0)], vec![11], vec![false]).unwrap();
        assert!(matches!(scan(&model, &chart, &[1.0]), Err(Error::MaskedBasepoint)));
    }

    #[test]
    fn confirm_mode_keeps_certified_cells() {
        let f = registry("krasnoselskii").unwrap();
        let model = FamilyModel::new(f.clone());
        let chart = ParameterChart::new(vec![(0.5, 4.5)], vec![81], vec![false]).unwrap();
        let res = scan(&model, &chart, &[0.5]).unwrap();
        let opts = DetectOptions { n_scan: 16, ..DetectOptions::default() };
        let confirmed = confirm_mask(&f, &chart, &res, &opts).unwrap();
        assert_eq!(confirmed.mask, res.mask);
    }

    #[test]
    fn grid_indexing() {
        let chart = ParameterChart::new(vec![(0.0, 1.0), (0.0, 2.0)], vec![8, 10], vec![true, false]).unwrap();
        for k in 0..chart.len() {
            assert_eq!(chart.flat_index(&chart.multi_index(k)), k);
        }
        assert_eq!(chart.neighbours(0), vec![1, 10, 70]);
        assert!((chart.step(0) - 0.125).abs() < 1e-15);
        assert!((chart.step(1) - 2.0 / 9.0).abs() < 1e-15);
    }
}
