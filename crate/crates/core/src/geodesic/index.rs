use crate::prelude::*;
use alloc::sync::Arc;
use core::fmt;

use super::{geodesic_shoot, inner, riemann_curvature, GeodesicRecord, MetricFamily, CURVATURE_STEP, MAX_DIM};
use crate::error::{Error, Result};
use crate::flow::{sfl_crossings, Crossing, Operator, OperatorPath, PathKind};
use crate::linalg::{singular_values, SymmetricMatrix};
use crate::operator::{inertia, DEFAULT_GAP};
use crate::scan::{NodeInfo, ScanModel};

const K: usize = MAX_DIM - 1;
type Block = [[f64; K]; K];

/// Steps of the Jacobi integration on `[0, 1]`.
const JACOBI_STEPS: usize = 4096;
/// Relative singular-value threshold for rank drops of the Jacobi matrix.
const RANK_TOL: f64 = 1e-7;
const MAX_S0: f64 = 0.05;

/// Samples of `S_ab(t) = g(R(E_a, γ')γ', E_b)` on the transverse frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureProfile {
    /// Transverse dimension.
    pub k: usize,
    pub signs: Vec<i8>,
    pub times: Vec<f64>,
    pub samples: Vec<Block>,
}

impl CurvatureProfile {
    pub fn new(rec: &GeodesicRecord, metric: &MetricFamily) -> Result<Self> {
        let m = rec.dim;
        if !rec.zero_velocity && rec.signs[0] != 1 {
            return Err(Error::TangentialDegeneracy("the tangent direction is not spacelike".into()));
        }
        let k = m - 1;
        let signs = rec.transverse(0).1.to_vec();
        let mut samples = Vec::with_capacity(rec.samples());
        for i in 0..rec.samples() {
            let mut s = [[0.0; K]; K];
            if !rec.zero_velocity && k > 0 {
                let x = &rec.positions[i][..m];
                let w = &rec.velocities[i][..m];
                let curv = riemann_curvature(metric, &rec.lambda, x, CURVATURE_STEP)?;
                let (frame, _) = rec.transverse(i);
                for a in 0..k {
                    let ra = curv.apply(&frame[a][..m], w, w);
                    for b in 0..k {
                        s[a][b] = inner(&curv.metric, m, &ra[..m], &frame[b][..m]);
                    }
                }
                for a in 0..k {
                    for b in 0..a {
                        let avg = 0.5 * (s[a][b] + s[b][a]);
                        s[a][b] = avg;
                        s[b][a] = avg;
                    }
                }
            }
            samples.push(s);
        }
        Ok(Self { k, signs, times: rec.times.clone(), samples })
    }

    /// Catmull-Rom interpolation on the uniform sample grid.
    pub fn eval(&self, t: f64) -> Block {
        let n = self.samples.len() - 1;
        let u = t.clamp(0.0, 1.0) * n as f64;
        let i = (u.floor() as usize).min(n - 1);
        let f = u - i as f64;
        let at = |j: isize| -> Block {
            if j < 0 {
                lin(&self.samples[0], &self.samples[1], -1.0)
            } else if j as usize > n {
                lin(&self.samples[n], &self.samples[n - 1], -1.0)
            } else {
                self.samples[j as usize]
            }
        };
        let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
        let mut out = [[0.0; K]; K];
        for a in 0..self.k {
            for b in 0..self.k {
                let (y0, y1, y2, y3) = (p0[a][b], p1[a][b], p2[a][b], p3[a][b]);
                out[a][b] = y1
                    + 0.5 * f * (y2 - y0 + f * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + f * (3.0 * (y1 - y2) + y3 - y0)));
            }
        }
        out
    }

    fn negative_signs(&self) -> usize {
        self.signs.iter().filter(|&&s| s < 0).count()
    }
}

/// `a + s (b - a)` entrywise; `s = -1` reflects `b` through `a`.
fn lin(a: &Block, b: &Block, s: f64) -> Block {
    let mut o = *a;
    for i in 0..K {
        for j in 0..K {
            o[i][j] = a[i][j] + s * (b[i][j] - a[i][j]);
        }
    }
    o
}

/// The second variation `∫ ξ'ᵀ E ξ' - s² ξᵀ S(s t) ξ` of the sub-geodesic
/// `t ↦ γ(s t)` on piecewise-linear fields vanishing at both ends, in the
/// parallel frame. Unknowns are ordered node-major, so the matrix is banded.
#[derive(Clone, Debug)]
pub struct SecondVariation {
    pub profile: Arc<CurvatureProfile>,
    pub mesh: usize,
}

impl SecondVariation {
    pub fn new(profile: Arc<CurvatureProfile>, mesh: usize) -> Result<Self> {
        if mesh < 16 {
            return Err(Error::Invalid("finite-element mesh must have at least 16 cells".into()));
        }
        Ok(Self { profile, mesh })
    }

    pub fn unknowns(&self) -> usize {
        self.profile.k * (self.mesh - 1)
    }

    pub fn matrix(&self, s: f64) -> Result<SymmetricMatrix> {
        let k = self.profile.k;
        let n = self.unknowns();
        let h = 1.0 / self.mesh as f64;
        let mut a = vec![0.0; n * n];
        let g = 0.5 / 3.0f64.sqrt();
        let dof = |node: usize, c: usize| -> Option<usize> {
            (node >= 1 && node < self.mesh).then(|| (node - 1) * k + c)
        };
        for e in 0..self.mesh {
            let t0 = e as f64 * h;
            for c in 0..k {
                let eps = f64::from(self.profile.signs[c]);
                for (na, da) in [(e, -1.0 / h), (e + 1, 1.0 / h)] {
                    for (nb, db) in [(e, -1.0 / h), (e + 1, 1.0 / h)] {
                        if let (Some(i), Some(j)) = (dof(na, c), dof(nb, c)) {
                            a[i * n + j] += eps * da * db * h;
                        }
                    }
                }
            }
            for q in [0.5 - g, 0.5 + g] {
                let tau = t0 + q * h;
                let sm = self.profile.eval(s * tau);
                let phi = [(e, 1.0 - q), (e + 1, q)];
                for &(na, pa) in &phi {
                    for &(nb, pb) in &phi {
                        for c in 0..k {
                            for d in 0..k {
                                if let (Some(i), Some(j)) = (dof(na, c), dof(nb, d)) {
                                    a[i * n + j] -= 0.5 * h * s * s * pa * pb * sm[c][d];
                                }
                            }
                        }
                    }
                }
            }
        }
        SymmetricMatrix::new(n, a)
    }

    /// Morse index at `s` minus the negative block size: the spectral index
    /// of `γ|[0, s]` by the finite-dimensional reduction.
    pub fn endpoint_index(&self, s: f64) -> Result<(i64, f64)> {
        let (m, margin) = inertia(&self.matrix(s)?)?;
        Ok((m as i64 - (self.profile.negative_signs() * (self.mesh - 1)) as i64, margin))
    }
}

/// Convenience wrapper assembling the second variation of `rec` at `s`.
pub fn second_variation_fem(rec: &GeodesicRecord, metric: &MetricFamily, s: f64, mesh: usize) -> Result<SymmetricMatrix> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Invalid("s must lie in (0, 1]".into()));
    }
    SecondVariation::new(Arc::new(CurvatureProfile::new(rec, metric)?), mesh)?.matrix(s)
}

/// A zero of `det J` for the Jacobi matrix with `J(0) = 0`, `J'(0) = I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugateInstant {
    pub t: f64,
    pub multiplicity: usize,
    /// Contribution to the spectral index; for indefinite metrics it is read
    /// off the finite-element spectral flow, and `None` until then.
    pub sign_contribution: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexRecord {
    pub conjugate_instants: Vec<ConjugateInstant>,
    /// Sum of conjugate multiplicities in `(0, 1)`; Riemannian metrics only.
    pub morse_index: Option<i64>,
    pub spectral_index: Option<i64>,
    pub fem_mesh: usize,
    pub degenerate: bool,
    pub s0: f64,
    pub crossings: Vec<Crossing>,
    /// Whether the index survives doubling the mesh.
    pub mesh_stable: Option<bool>,
}

struct Jacobi<'a> {
    profile: &'a CurvatureProfile,
}

type JState = ([[f64; K]; K], [[f64; K]; K]);

impl Jacobi<'_> {
    /// `J'' = -E S J` as a first-order system.
    fn deriv(&self, t: f64, (j, dj): &JState) -> JState {
        let k = self.profile.k;
        let s = self.profile.eval(t);
        let mut ddj = [[0.0; K]; K];
        for a in 0..k {
            let eps = f64::from(self.profile.signs[a]);
            for c in 0..k {
                let mut acc = 0.0;
                for b in 0..k {
                    acc += s[a][b] * j[b][c];
                }
                ddj[a][c] = -eps * acc;
            }
        }
        (*dj, ddj)
    }

    fn step(&self, t: f64, y: &JState, h: f64) -> JState {
        let add = |y: &JState, d: &JState, s: f64| {
            let mut o = *y;
            for a in 0..K {
                for c in 0..K {
                    o.0[a][c] += s * d.0[a][c];
                    o.1[a][c] += s * d.1[a][c];
                }
            }
            o
        };
        let k1 = self.deriv(t, y);
        let k2 = self.deriv(t + 0.5 * h, &add(y, &k1, 0.5 * h));
        let k3 = self.deriv(t + 0.5 * h, &add(y, &k2, 0.5 * h));
        let k4 = self.deriv(t + h, &add(y, &k3, h));
        let mut o = *y;
        for a in 0..K {
            for c in 0..K {
                o.0[a][c] += h / 6.0 * (k1.0[a][c] + 2.0 * k2.0[a][c] + 2.0 * k3.0[a][c] + k4.0[a][c]);
                o.1[a][c] += h / 6.0 * (k1.1[a][c] + 2.0 * k2.1[a][c] + 2.0 * k3.1[a][c] + k4.1[a][c]);
            }
        }
        o
    }

    fn det(&self, j: &[[f64; K]; K]) -> f64 {
        match self.profile.k {
            0 => 1.0,
            1 => j[0][0],
            2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
            _ => {
                j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                    + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
            }
        }
    }

    fn singular(&self, j: &[[f64; K]; K]) -> Vec<f64> {
        let k = self.profile.k;
        let mut cols = Vec::with_capacity(k * k);
        for c in 0..k {
            for row in j.iter().take(k) {
                cols.push(row[c]);
            }
        }
        singular_values(k, k, cols)
    }

    /// Rank drop of `J` relative to the scale of `(J, J')`.
    fn kernel(&self, y: &JState) -> usize {
        let sj = self.singular(&y.0);
        let sd = self.singular(&y.1);
        let scale = sj.first().copied().unwrap_or(0.0) + sd.first().copied().unwrap_or(0.0);
        sj.iter().filter(|&&v| v <= RANK_TOL * scale).count()
    }

    fn sigma_ratio(&self, y: &JState) -> f64 {
        let sj = self.singular(&y.0);
        let sd = self.singular(&y.1);
        let scale = sj.first().copied().unwrap_or(0.0) + sd.first().copied().unwrap_or(0.0);
        sj.last().copied().unwrap_or(0.0) / scale.max(1e-300)
    }
}

/// Output of [`conjugate_points`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateData {
    pub instants: Vec<ConjugateInstant>,
    /// `t = 1` is conjugate to `t = 0`.
    pub degenerate: bool,
}

fn conjugate_from_profile(profile: &CurvatureProfile, riemannian: bool) -> ConjugateData {
    let k = profile.k;
    let jac = Jacobi { profile };
    let mut y: JState = ([[0.0; K]; K], [[0.0; K]; K]);
    for a in 0..k {
        y.1[a][a] = 1.0;
    }
    let h = 1.0 / JACOBI_STEPS as f64;
    let mut states = Vec::with_capacity(JACOBI_STEPS + 1);
    states.push(y);
    for i in 0..JACOBI_STEPS {
        y = jac.step(i as f64 * h, &y, h);
        states.push(y);
    }
    let sign = |n: usize| -> Option<i64> { riemannian.then_some(n as i64) };
    let mut instants: Vec<ConjugateInstant> = Vec::new();
    let mut flagged = vec![false; JACOBI_STEPS + 1];
    // odd multiplicities: det changes sign
    for i in 1..JACOBI_STEPS {
        let (da, db) = (jac.det(&states[i].0), jac.det(&states[i + 1].0));
        if da == 0.0 || da.signum() == db.signum() {
            continue;
        }
        let t0 = i as f64 * h;
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let dm = jac.det(&jac.step(t0, &states[i], mid).0);
            if dm.signum() == da.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        let at = jac.step(t0, &states[i], tau);
        let multiplicity = jac.kernel(&at).max(1);
        instants.push(ConjugateInstant { t: t0 + tau, multiplicity, sign_contribution: sign(multiplicity) });
        flagged[i] = true;
        flagged[i + 1] = true;
    }
    // even multiplicities: interior minima of σ_min that reach zero
    let ratio: Vec<f64> = states.iter().map(|s| jac.sigma_ratio(s)).collect();
    for i in 2..JACOBI_STEPS {
        if flagged[i - 1] || flagged[i] || flagged[i + 1] {
            continue;
        }
        if !(ratio[i] < 1e-3 && ratio[i] <= ratio[i - 1] && ratio[i] <= ratio[i + 1]) {
            continue;
        }
        let t0 = (i - 1) as f64 * h;
        let base = states[i - 1];
        let f = |tau: f64| jac.sigma_ratio(&jac.step(t0, &base, tau));
        let (mut a, mut b) = (0.0, 2.0 * h);
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let tau = 0.5 * (a + b);
        let at = jac.step(t0, &base, tau);
        let multiplicity = jac.kernel(&at);
        if multiplicity > 0 && multiplicity.is_multiple_of(2) {
            instants.push(ConjugateInstant { t: t0 + tau, multiplicity, sign_contribution: sign(multiplicity) });
        }
    }
    instants.sort_by(|a, b| a.t.total_cmp(&b.t));
    let last = &states[JACOBI_STEPS];
    let degenerate = jac.kernel(last) > 0 || instants.iter().any(|c| (1.0 - c.t) < 1e-6);
    instants.retain(|c| c.t < 1.0 - 1e-6);
    ConjugateData { instants, degenerate }
}

/// Conjugate instants of `γ(0)` along `rec`.
pub fn conjugate_points(rec: &GeodesicRecord, metric: &MetricFamily) -> Result<ConjugateData> {
    let profile = CurvatureProfile::new(rec, metric)?;
    Ok(conjugate_from_profile(&profile, metric.signature() == 0))
}

/// Spectral index `-sfl(s ↦ h_{γ|[0,s]})` on `[s0, 1]`, with the conjugate
/// data and, for Riemannian metrics, the Morse index.
pub fn spectral_index(rec: &GeodesicRecord, metric: &MetricFamily, mesh: usize) -> Result<IndexRecord> {
    let profile = Arc::new(CurvatureProfile::new(rec, metric)?);
    let riemannian = metric.signature() == 0;
    let conj = conjugate_from_profile(&profile, riemannian);
    let morse_index = riemannian.then(|| conj.instants.iter().map(|c| c.multiplicity as i64).sum());
    let first = conj.instants.first().map_or(1.0, |c| c.t);
    let s0 = MAX_S0.min(0.5 * first);
    let mut out = IndexRecord {
        conjugate_instants: conj.instants,
        morse_index,
        spectral_index: None,
        fem_mesh: mesh,
        degenerate: conj.degenerate,
        s0,
        crossings: Vec::new(),
        mesh_stable: None,
    };
    if out.degenerate {
        return Ok(out);
    }
    let sv = SecondVariation::new(profile.clone(), mesh)?;
    let (start, margin) = sv.endpoint_index(s0)?;
    if start != 0 || margin < DEFAULT_GAP {
        return Err(Error::Invalid("second variation is not block definite at s0".into()));
    }
    let sv_path = sv.clone();
    let path = OperatorPath::new(
        PathKind::Dense,
        move |tau| Ok(Operator::Dense(sv_path.matrix(s0 + tau * (1.0 - s0))?)),
        DEFAULT_GAP,
    )?;
    let flow = sfl_crossings(&path, 17, 1e-9)?;
    let index = -flow.value;
    out.crossings = flow
        .crossings
        .iter()
        .map(|c| Crossing { t: s0 + c.t * (1.0 - s0), ..*c })
        .collect();
    if !riemannian {
        for c in &out.crossings {
            let contribution = -(c.direction as i64) * c.multiplicity as i64;
            if let Some(inst) = out
                .conjugate_instants
                .iter_mut()
                .filter(|i| i.sign_contribution.is_none())
                .min_by(|a, b| (a.t - c.t).abs().total_cmp(&(b.t - c.t).abs()))
            {
                inst.sign_contribution = Some(contribution);
            }
        }
    }
    let fine = SecondVariation::new(profile, 2 * mesh)?;
    out.mesh_stable = Some(fine.endpoint_index(1.0)?.0 == index);
    out.spectral_index = Some(index);
    Ok(out)
}

/// Maps a chart point to `(λ, p, v)` of the trivial branch geodesic.
pub type SigmaFn = Arc<dyn Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> + Send + Sync>;

/// Per-node spectral indices of a family of geodesics, for
/// [`crate::scan::scan`]. Node indices use the finite-dimensional reduction
/// `μ(h_1) - ν (mesh - 1)`; edge flows are index differences.
#[derive(Clone)]
pub struct GeodesicModel {
    pub metric: MetricFamily,
    pub sigma: SigmaFn,
    pub mesh: usize,
    pub samples: usize,
    pub gap: f64,
}

impl fmt::Debug for GeodesicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicModel")
            .field("metric", &self.metric)
            .field("mesh", &self.mesh)
            .field("samples", &self.samples)
            .field("gap", &self.gap)
            .finish_non_exhaustive()
    }
}

impl GeodesicModel {
    pub fn new(metric: MetricFamily, sigma: SigmaFn) -> Self {
        Self { metric, sigma, mesh: 64, samples: 128, gap: DEFAULT_GAP }
    }

    pub fn index(&self, x: &[f64]) -> Result<(i64, f64)> {
        let (lambda, p, v) = (self.sigma)(x)?;
        let rec = geodesic_shoot(&self.metric, &lambda, &p, &v, self.samples)?;
        let sv = SecondVariation::new(Arc::new(CurvatureProfile::new(&rec, &self.metric)?), self.mesh)?;
        sv.endpoint_index(1.0)
    }
}

impl ScanModel for GeodesicModel {
    fn node(&self, x: &[f64]) -> Result<NodeInfo> {
        let (index, margin) = self.index(x)?;
        Ok(NodeInfo { margin, kernel_dim: usize::from(margin < self.gap), index, degenerate: margin < self.gap, failed: false })
    }

    fn edge_sfl(&self, _: &[f64], _: &[f64], na: &NodeInfo, nb: &NodeInfo) -> Result<i64> {
        if na.failed || nb.failed {
            return Err(Error::Invalid("edge touches a failed node".into()));
        }
        Ok(na.index - nb.index)
    }

    fn label_sign(&self) -> i64 {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::super::registry;
    use super::*;
    use core::f64::consts::PI;

    fn equator(name: &str, len: f64) -> (MetricFamily, GeodesicRecord) {
        let m = registry(name).unwrap();
        let v: Vec<f64> = m.direction().iter().map(|d| len * d).collect();
        let rec = geodesic_shoot(&m, &[], m.base_point(), &v, 512).unwrap();
        (m, rec)
    }

    #[test]
    fn sphere_conjugate_instants() {
        let (m, rec) = equator("round_sphere(1)", 2.0);
        assert!(conjugate_points(&rec, &m).unwrap().instants.is_empty());
        let (m, rec) = equator("round_sphere(1)", 4.0);
        let c = conjugate_points(&rec, &m).unwrap();
        assert_eq!(c.instants.len(), 1);
        assert!((c.instants[0].t - PI / 4.0).abs() < 1e-6);
        assert_eq!(c.instants[0].multiplicity, 1);
        let e = registry("euclidean").unwrap();
        let rec = geodesic_shoot(&e, &[], &[0.0, 0.0], &[1.0, 2.0], 64).unwrap();
        assert!(conjugate_points(&rec, &e).unwrap().instants.is_empty());
    }

    #[test]
    fn fem_definiteness() {
        let e = registry("euclidean").unwrap();
        let rec = geodesic_shoot(&e, &[], &[0.0, 0.0], &[1.0, 2.0], 64).unwrap();
        let a = second_variation_fem(&rec, &e, 1.0, 32).unwrap();
        assert!(a.eigenvalues().unwrap()[0] > 0.0);

        let (m, rec) = equator("round_sphere(1)", 3.0 * PI / 2.0);
        let a = second_variation_fem(&rec, &m, 1.0 / 3.0, 200).unwrap();
        assert!(a.eigenvalues().unwrap()[0] > 0.0);
        let a = second_variation_fem(&rec, &m, 1.0, 200).unwrap();
        assert_eq!(a.eigenvalues().unwrap().iter().filter(|&&v| v < 0.0).count(), 1);
    }

    #[test]
    fn split_blocks() {
        let (m, rec) = equator("split_spheres(1, 1, 1, 0.7)", 2.0);
        let prof = CurvatureProfile::new(&rec, &m).unwrap();
        assert_eq!(prof.signs, vec![1, -1, -1]);
        let a = second_variation_fem(&rec, &m, 1.0, 16).unwrap();
        // stiffness diagonal carries E = diag(+1, -1, -1) on the first node
        assert!(a.get(0, 0) > 0.0 && a.get(1, 1) < 0.0 && a.get(2, 2) < 0.0);
    }

    #[test]
    fn sphere_spectral_index() {
        for (len, want) in [(2.0, 0), (4.0, 1), (7.0, 2)] {
            let (m, rec) = equator("round_sphere(1)", len);
            let r = spectral_index(&rec, &m, 200).unwrap();
            assert_eq!(r.spectral_index, Some(want), "L = {len}");
            assert_eq!(r.morse_index, Some(want));
            assert_eq!(r.mesh_stable, Some(true));
            assert!(!r.degenerate);
        }
    }

    #[test]
    fn zero_velocity_branch() {
        let m = registry("round_sphere(1)").unwrap();
        let rec = geodesic_shoot(&m, &[], &[1.0, 0.0], &[0.0, 0.0], 16).unwrap();
        let r = spectral_index(&rec, &m, 32).unwrap();
        assert_eq!(r.spectral_index, Some(0));
        assert!(!r.degenerate);
    }

    #[test]
    fn split_spheres_cancellation() {
        for (len, want) in [(2.0, 0), (4.0, 1), (6.0, 0)] {
            let (m, rec) = equator("split_spheres(1, 1, 1, 0.7)", len);
            let r = spectral_index(&rec, &m, 100).unwrap();
            assert_eq!(r.spectral_index, Some(want), "L = {len}");
            assert!(r.conjugate_instants.iter().all(|c| c.sign_contribution.is_some()));
        }
    }

    #[test]
    fn sphere_instants_in_arc_length() {
        let (m, rec) = equator("round_sphere(1)", 7.0);
        let r = spectral_index(&rec, &m, 400).unwrap();
        assert_eq!(r.spectral_index, Some(2));
        for (k, c) in r.conjugate_instants.iter().enumerate() {
            assert!((c.t * 7.0 - (k + 1) as f64 * PI).abs() < 1e-3);
        }
        // FEM crossings sit next to the Jacobi zeros
        for (c, j) in r.crossings.iter().zip(&r.conjugate_instants) {
            assert!((c.t - j.t).abs() < 1e-2);
        }
    }

    #[test]
    fn ellipsoid_scan_masks_the_conjugate_curves() {
        use crate::scan::{scan, ParameterChart};
        let metric = registry("ellipsoid_revolution").unwrap();
        let sigma: SigmaFn = Arc::new(|x: &[f64]| Ok((vec![x[0]], vec![PI / 2.0, 0.0], vec![0.0, x[1]])));
        let model = GeodesicModel::new(metric, sigma);
        let chart = ParameterChart::new(vec![(0.5, 2.0), (0.5, 7.0)], vec![16, 24], vec![false, false]).unwrap();
        let res = scan(&model, &chart, &[2.0, 0.5]).unwrap();
        let (dc, dl) = (chart.step(0), chart.step(1));
        for k in 0..chart.len() {
            let x = chart.point(k);
            let want = (x[1] / (PI * x[0])).floor() as i64;
            if res.mask[k] {
                let near = (1..=4).any(|j| {
                    let lc = j as f64 * PI * x[0];
                    (x[1] - lc).abs() <= dl + PI * dc * j as f64
                });
                assert!(near, "stray mask at {x:?}");
            } else {
                assert_eq!(res.labels[k], Some(want), "{x:?}");
            }
        }
        assert_eq!(res.report.labels, vec![0, 1, 2, 3, 4]);
        assert_eq!(res.report.loop_defect, 0);
    }
}
