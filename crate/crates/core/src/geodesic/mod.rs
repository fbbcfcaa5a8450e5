//! Semi-Riemannian geodesics on single-chart geometries: shooting, parallel
//! frames, Jacobi fields, the finite-element second variation and the
//! spectral index.
//!
//! Curvature convention: `R(X, Y)Z = ∇_X ∇_Y Z - ∇_Y ∇_X Z - ∇_[X,Y] Z`, so
//! round spheres have `g(R(X, Y)Y, X) > 0`.

mod index;
mod shoot;

pub use index::{
    conjugate_points, second_variation_fem, spectral_index, ConjugateData, ConjugateInstant, CurvatureProfile, GeodesicModel,
    IndexRecord, SecondVariation, SigmaFn,
};
pub use shoot::{geodesic_shoot, GeodesicRecord, ODE_TOL};

use crate::prelude::*;
use alloc::sync::Arc;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Largest supported manifold dimension.
pub const MAX_DIM: usize = 4;
/// Default finite-difference step for Christoffel symbols.
pub const CHRISTOFFEL_STEP: f64 = 1e-3;
/// Default outer step for curvature; the inner Christoffel step is half of it.
pub const CURVATURE_STEP: f64 = 2e-3;

pub type Mat = [[f64; MAX_DIM]; MAX_DIM];
/// `gamma[k][i][j] = Γᵏᵢⱼ`.
pub type Christoffel = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];
pub type MetricFn = Arc<dyn Fn(&[f64], &[f64]) -> Mat + Send + Sync>;

/// A family `λ ↦ g_λ` of metrics of constant index on one chart.
#[derive(Clone)]
pub struct MetricFamily {
    name: String,
    dim: usize,
    param_dim: usize,
    signature: usize,
    metric: MetricFn,
    bounds: Vec<(f64, f64)>,
    base_point: Vec<f64>,
    direction: Vec<f64>,
}

impl fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("param_dim", &self.param_dim)
            .field("signature", &self.signature)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl MetricFamily {
    /// `metric` fills the leading `dim x dim` block; chart `bounds` may be infinite.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        param_dim: usize,
        signature: usize,
        bounds: Vec<(f64, f64)>,
        metric: impl Fn(&[f64], &[f64]) -> Mat + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Invalid("manifold dimension must be between 1 and 4".into()));
        }
        if signature > dim || bounds.len() != dim {
            return Err(Error::Invalid("signature or chart bounds do not fit the dimension".into()));
        }
        let mut base_point: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            })
            .collect();
        base_point.truncate(dim);
        let mut direction = vec![0.0; dim];
        direction[0] = 1.0;
        Ok(Self {
            name: name.into(),
            dim,
            param_dim,
            signature,
            metric: Arc::new(metric),
            bounds,
            base_point,
            direction,
        })
    }

    /// The reference geodesic used by demos starts at `point` with velocity
    /// `L * direction` for arc length `L` when `g(direction, direction) = 1`.
    pub fn with_reference(mut self, point: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        if point.len() != self.dim || direction.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: point.len() });
        }
        self.base_point = point;
        self.direction = direction;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    /// Number of negative directions of the metric.
    pub fn signature(&self) -> usize {
        self.signature
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn metric(&self, lambda: &[f64], x: &[f64]) -> Result<Mat> {
        if lambda.len() != self.param_dim {
            return Err(Error::DimensionMismatch { expected: self.param_dim, found: lambda.len() });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let g = (self.metric)(lambda, x);
        if g.iter().take(self.dim).any(|r| r.iter().take(self.dim).any(|v| !v.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(g)
    }

    /// `g(u, w)` at `x`.
    pub fn inner(&self, lambda: &[f64], x: &[f64], u: &[f64], w: &[f64]) -> Result<f64> {
        Ok(inner(&self.metric(lambda, x)?, self.dim, u, w))
    }

    /// Number of negative eigenvalues of `g_λ(x)`; errors when singular.
    pub fn index_at(&self, lambda: &[f64], x: &[f64]) -> Result<usize> {
        let g = self.metric(lambda, x)?;
        let m = SymmetricMatrix::from_fn(self.dim, |i, j| g[i][j])?;
        let eig = m.eigenvalues()?;
        let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if eig.iter().any(|v| v.abs() <= 1e-12 * scale.max(1e-300)) {
            return Err(Error::SingularMetric);
        }
        Ok(eig.iter().filter(|&&v| v < 0.0).count())
    }
}

pub(crate) fn inner(g: &Mat, m: usize, u: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += g[i][j] * u[i] * w[j];
        }
    }
    s
}

/// Inverse of the leading `m x m` block by Gauss-Jordan elimination.
pub(crate) fn invert(g: &Mat, m: usize) -> Result<Mat> {
    let mut a = *g;
    let mut inv = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in inv.iter_mut().enumerate().take(m) {
        row[i] = 1.0;
    }
    let scale = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).fold(0.0f64, |s, (i, j)| s.max(g[i][j].abs()));
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap_or(c);
        if a[p][c].abs() <= 1e-13 * scale {
            return Err(Error::SingularMetric);
        }
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..m {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..m {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for j in 0..m {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Fourth-order central difference of `f` along coordinate `k`.
fn central<T, F>(x: &[f64], k: usize, h: f64, mut f: F) -> Result<[T; 4]>
where
    F: FnMut(&[f64]) -> Result<T>,
{
    let mut y = [0.0; MAX_DIM];
    y[..x.len()].copy_from_slice(x);
    let y = &mut y[..x.len()];
    let mut at = |d: f64| -> Result<T> {
        y[k] = x[k] + d;
        f(y)
    };
    Ok([at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?])
}

/// Christoffel symbols of the second kind from central differences of `g`.
pub fn christoffel(m: &MetricFamily, lambda: &[f64], x: &[f64], h: f64) -> Result<Christoffel> {
    let n = m.dim;
    let ginv = invert(&m.metric(lambda, x)?, n)?;
    // dg[k][i][j] = ∂_k g_ij
    let mut dg = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for k in 0..n {
        let [p2, p1, m1, m2] = central(x, k, h, |y| m.metric(lambda, y))?;
        for i in 0..n {
            for j in 0..n {
                dg[k][i][j] = (-p2[i][j] + 8.0 * p1[i][j] - 8.0 * m1[i][j] + m2[i][j]) / (12.0 * h);
            }
        }
    }
    let mut gamma = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * s;
                gamma[k][j][i] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// `Γ(u, w)^k = Γᵏᵢⱼ uⁱ wʲ`.
pub(crate) fn contract(gamma: &Christoffel, n: usize, u: &[f64], w: &[f64]) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gamma[k][i][j] * u[i] * w[j];
            }
        }
        *o = s;
    }
    out
}

/// Riemann tensor samples at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature {
    pub dim: usize,
    /// `r[l][i][j][k] = Rˡᵢⱼₖ` with `R(∂_i, ∂_j)∂_k = Rˡᵢⱼₖ ∂_l`.
    pub r: [[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM],
    pub metric: Mat,
    /// Largest violation of antisymmetry in `(i, j)` and of the first Bianchi identity.
    pub bianchi_error: f64,
}

impl Curvature {
    /// `R(u, v)w`.
    pub fn apply(&self, u: &[f64], v: &[f64], w: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim;
        let mut out = [0.0; MAX_DIM];
        for (l, o) in out.iter_mut().enumerate().take(n) {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        s += self.r[l][i][j][k] * u[i] * v[j] * w[k];
                    }
                }
            }
            *o = s;
        }
        out
    }

    /// Sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dim;
        let num = inner(&self.metric, n, &self.apply(u, v, v), u);
        let den = inner(&self.metric, n, u, u) * inner(&self.metric, n, v, v) - inner(&self.metric, n, u, v).powi(2);
        num / den
    }
}

/// Curvature from nested central differences: Christoffel symbols with step
/// `h / 2`, differentiated with step `h`.
pub fn riemann_curvature(m: &MetricFamily, lambda: &[f64], x: &[f64], h: f64) -> Result<Curvature> {
    let n = m.dim;
    let g0 = christoffel(m, lambda, x, 0.5 * h)?;
    let mut dgam = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM]; // [i][l][j][k] = ∂_i Γˡⱼₖ
    for i in 0..n {
        let [p2, p1, m1, m2] = central(x, i, h, |y| christoffel(m, lambda, y, 0.5 * h))?;
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    dgam[i][l][j][k] = (-p2[l][j][k] + 8.0 * p1[l][j][k] - 8.0 * m1[l][j][k] + m2[l][j][k]) / (12.0 * h);
                }
            }
        }
    }
    let mut r = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = dgam[i][l][j][k] - dgam[j][l][i][k];
                    for p in 0..n {
                        s += g0[l][i][p] * g0[p][j][k] - g0[l][j][p] * g0[p][i][k];
                    }
                    r[l][i][j][k] = s;
                }
            }
        }
    }
    let mut err = 0.0f64;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    err = err.max((r[l][i][j][k] + r[l][j][i][k]).abs());
                    err = err.max((r[l][i][j][k] + r[l][j][k][i] + r[l][k][i][j]).abs());
                }
            }
        }
    }
    Ok(Curvature { dim: n, r, metric: m.metric(lambda, x)?, bianchi_error: err })
}

/// Distance from the chart boundary kept by the sphere charts.
pub const POLE_MARGIN: f64 = 0.01;

fn sphere_block(g: &mut Mat, at: usize, r: f64, theta: f64, sign: f64) {
    g[at][at] = sign * r * r;
    g[at + 1][at + 1] = sign * r * r * theta.sin().powi(2);
}

fn parse_args(name: &str) -> Result<(&str, Vec<f64>)> {
    let Some(open) = name.find('(') else {
        return Ok((name.trim(), Vec::new()));
    };
    let inner = name[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::UnknownFamily(name.into()))?;
    let args = inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::UnknownFamily(name.into())))
        .collect::<Result<Vec<_>>>()?;
    Ok((name[..open].trim(), args))
}

/// Built-in geometries.
///
/// * `euclidean` (`euclidean(m)`): flat `R^m`, default `m = 2`.
/// * `round_sphere(r)`: colatitude/longitude chart, `θ ∈ [0.01, π - 0.01]`.
/// * `ellipsoid_revolution(c)`: `g = diag(cos²θ + c² sin²θ, sin²θ)`; without
///   an argument `c` is the family parameter.
/// * `flat_torus`: `R²/Z²` with the flat metric, periodic coordinates.
/// * `split_spheres(a, b, p, q)`: `S²_a × S²_b` with `g_a ⊕ (-g_b)`; the
///   reference geodesic runs along both equators with arc-length speeds `p`, `q`.
pub fn registry(name: &str) -> Result<MetricFamily> {
    let (base, args) = parse_args(name)?;
    let unknown = || Error::UnknownFamily(name.into());
    let lat = (POLE_MARGIN, PI - POLE_MARGIN);
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    match (base, args.as_slice()) {
        ("euclidean", []) | ("euclidean", [_]) => {
            let m = args.first().map_or(2, |&v| v as usize);
            if !(1..=MAX_DIM).contains(&m) || args.first().is_some_and(|&v| v.fract() != 0.0) {
                return Err(unknown());
            }
            MetricFamily::new(name, m, 0, 0, vec![free; m], move |_, _| {
                let mut g = [[0.0; MAX_DIM]; MAX_DIM];
                for (i, row) in g.iter_mut().enumerate().take(m) {
                    row[i] = 1.0;
                }
                g
            })
        }
        ("round_sphere", []) | ("round_sphere", [_]) => {
            let r = args.first().copied().unwrap_or(1.0);
            if !(r > 0.0) {
                return Err(unknown());
            }
            MetricFamily::new(name, 2, 0, 0, vec![lat, free], move |_, x| {
                let mut g = [[0.0; MAX_DIM]; MAX_DIM];
                sphere_block(&mut g, 0, r, x[0], 1.0);
                g
            })?
            .with_reference(vec![PI / 2.0, 0.0], vec![0.0, 1.0 / r])
        }
        ("ellipsoid_revolution", []) => MetricFamily::new(name, 2, 1, 0, vec![lat, free], |l, x| ellipsoid(l[0], x[0]))?
            .with_reference(vec![PI / 2.0, 0.0], vec![0.0, 1.0]),
        ("ellipsoid_revolution", [c]) => {
            let c = *c;
            if !(c > 0.0) {
                return Err(unknown());
            }
            MetricFamily::new(name, 2, 0, 0, vec![lat, free], move |_, x| ellipsoid(c, x[0]))?
                .with_reference(vec![PI / 2.0, 0.0], vec![0.0, 1.0])
        }
        ("flat_torus", []) => MetricFamily::new(name, 2, 0, 0, vec![free; 2], |_, _| {
            let mut g = [[0.0; MAX_DIM]; MAX_DIM];
            g[0][0] = 1.0;
            g[1][1] = 1.0;
            g
        }),
        ("split_spheres", []) | ("split_spheres", [_, _, _, _]) => {
            let [a, b, p, q] = match args.as_slice() {
                [a, b, p, q] => [*a, *b, *p, *q],
                _ => [1.0, 1.0, 1.0, 0.7],
            };
            if !(a > 0.0 && b > 0.0) || !(p * p - q * q > 0.0) {
                return Err(unknown());
            }
            MetricFamily::new(name, 4, 0, 2, vec![lat, free, lat, free], move |_, x| {
                let mut g = [[0.0; MAX_DIM]; MAX_DIM];
                sphere_block(&mut g, 0, a, x[0], 1.0);
                sphere_block(&mut g, 2, b, x[2], -1.0);
                g
            })?
            .with_reference(vec![PI / 2.0, 0.0, PI / 2.0, 0.0], vec![0.0, p / a, 0.0, q / b])
        }
        _ => Err(unknown()),
    }
}

fn ellipsoid(c: f64, theta: f64) -> Mat {
    let mut g = [[0.0; MAX_DIM]; MAX_DIM];
    let (s, co) = theta.sin_cos();
    g[0][0] = co * co + c * c * s * s;
    g[1][1] = s * s;
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_christoffels_vanish() {
        let m = registry("euclidean(3)").unwrap();
        let g = christoffel(&m, &[], &[0.3, -1.0, 2.0], CHRISTOFFEL_STEP).unwrap();
        assert!(g.iter().flatten().flatten().all(|v| v.abs() < 1e-14));
        let r = riemann_curvature(&m, &[], &[0.3, -1.0, 2.0], CURVATURE_STEP).unwrap();
        assert!(r.r.iter().flatten().flatten().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sphere_christoffels_at_equator() {
        let m = registry("round_sphere(1)").unwrap();
        let x = [PI / 2.0, 0.4];
        let g = christoffel(&m, &[], &x, CHRISTOFFEL_STEP).unwrap();
        assert!(g[0][1][1].abs() < 1e-12);
        assert!(g[1][0][1].abs() < 1e-12);
        let y = [1.0, 0.4];
        let a = christoffel(&m, &[], &y, CHRISTOFFEL_STEP).unwrap();
        let b = christoffel(&m, &[], &y, 0.5 * CHRISTOFFEL_STEP).unwrap();
        assert!((a[0][1][1] - (-(1.0f64).sin() * (1.0f64).cos())).abs() < 1e-10);
        assert!((a[1][0][1] - 1.0 / (1.0f64).tan()).abs() < 1e-10);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[k][i][j] - b[k][i][j]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn sectional_curvatures() {
        let s = registry("round_sphere(1)").unwrap();
        let c = riemann_curvature(&s, &[], &[1.1, 0.2], CURVATURE_STEP).unwrap();
        assert!((c.sectional(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-4);
        assert!(c.bianchi_error < 1e-4);
        let s2 = registry("round_sphere(2)").unwrap();
        let c = riemann_curvature(&s2, &[], &[1.1, 0.2], CURVATURE_STEP).unwrap();
        assert!((c.sectional(&[1.0, 0.0], &[0.0, 1.0]) - 0.25).abs() < 1e-4);
        let e = registry("ellipsoid_revolution").unwrap();
        for cc in [0.5, 1.3, 2.0] {
            let k = riemann_curvature(&e, &[cc], &[PI / 2.0, 0.0], CURVATURE_STEP).unwrap();
            assert!((k.sectional(&[1.0, 0.0], &[0.0, 1.0]) - 1.0 / (cc * cc)).abs() < 1e-3);
        }
    }

    #[test]
    fn registry_names() {
        for name in ["euclidean", "round_sphere(1.5)", "ellipsoid_revolution(0.7)", "flat_torus", "split_spheres(1, 1, 1, 0.7)"] {
            let m = registry(name).unwrap();
            let l = vec![0.5; m.param_dim()];
            assert_eq!(m.index_at(&l, m.base_point()).unwrap(), m.signature(), "{name}");
        }
        assert!(registry("hyperbolic").is_err());
        assert!(registry("round_sphere(-1)").is_err());
    }
}
