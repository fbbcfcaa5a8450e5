//! Parameterized functionals with the trivial branch `u = 0`, their Hessian
//! paths, a damped Newton solver, and detection of bifurcation from zero.

use crate::prelude::*;
use alloc::sync::Arc;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{Operator, OperatorPath, PathKind};
use crate::linalg::{eigendecompose, lu_solve, SymmetricMatrix};
use crate::operator::{inertia, SignCompactOperator, DEFAULT_GAP};

pub type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&[f64], &[f64]) -> SymmetricMatrix + Send + Sync>;

/// Largest admissible `‖∇f_λ(0)‖`.
pub const TRIVIAL_BRANCH_TOL: f64 = 1e-10;
/// Largest admissible asymmetry of a finite-difference Hessian.
pub const SYMMETRY_TOL: f64 = 1e-6;
/// Relative size of the last Newton step at an accepted critical point.
pub const NEWTON_STEP_TOL: f64 = 1e-8;

/// Layout of a Galerkin space whose leading `j_window.len()` coordinates form
/// the window of a `J + K` operator; the remaining coordinates are truncated
/// tail directions and are not part of the Hessian operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignLayout {
    pub j_window: Vec<i8>,
    pub tail_plus: bool,
    pub tail_minus: bool,
}

/// A family `λ ↦ f_λ` of `C²` functionals on `R^galerkin_dim`.
///
/// Callbacks must be pure: detection and scans call them from several
/// threads and rely on repeatable values.
#[derive(Clone)]
pub struct FunctionalFamily {
    name: String,
    galerkin_dim: usize,
    param_dim: usize,
    eval: EvalFn,
    grad: Option<GradFn>,
    hess: Option<HessFn>,
    layout: Option<SignLayout>,
}

impl fmt::Debug for FunctionalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalFamily")
            .field("name", &self.name)
            .field("galerkin_dim", &self.galerkin_dim)
            .field("param_dim", &self.param_dim)
            .field("analytic_grad", &self.grad.is_some())
            .field("analytic_hess", &self.hess.is_some())
            .field("layout", &self.layout)
            .finish()
    }
}

impl FunctionalFamily {
    pub fn new(
        name: impl Into<String>,
        galerkin_dim: usize,
        param_dim: usize,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if galerkin_dim == 0 || param_dim == 0 {
            return Err(Error::Invalid("dimensions must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            galerkin_dim,
            param_dim,
            eval: Arc::new(eval),
            grad: None,
            hess: None,
            layout: None,
        })
    }

    pub fn with_grad(mut self, grad: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_hess(mut self, hess: impl Fn(&[f64], &[f64]) -> SymmetricMatrix + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    /// Declares the Hessians sign-compact with the given window layout.
    pub fn with_layout(mut self, layout: SignLayout) -> Result<Self> {
        let w = layout.j_window.len();
        if w == 0 || w > self.galerkin_dim {
            return Err(Error::Invalid("sign window must fit in the Galerkin space".into()));
        }
        // validates signs and tails
        SignCompactOperator::sign(layout.j_window.clone(), layout.tail_plus, layout.tail_minus)?;
        self.layout = Some(layout);
        Ok(self)
    }

    /// Drops analytic derivatives, so everything goes through finite differences.
    pub fn without_derivatives(mut self) -> Self {
        self.grad = None;
        self.hess = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn galerkin_dim(&self) -> usize {
        self.galerkin_dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn layout(&self) -> Option<&SignLayout> {
        self.layout.as_ref()
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_analytic_hess(&self) -> bool {
        self.hess.is_some()
    }

    fn check(&self, lambda: &[f64], u: &[f64]) -> Result<()> {
        if lambda.len() != self.param_dim {
            return Err(Error::DimensionMismatch { expected: self.param_dim, found: lambda.len() });
        }
        if u.len() != self.galerkin_dim {
            return Err(Error::DimensionMismatch { expected: self.galerkin_dim, found: u.len() });
        }
        if lambda.iter().chain(u).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn eval(&self, lambda: &[f64], u: &[f64]) -> Result<f64> {
        self.check(lambda, u)?;
        Ok((self.eval)(lambda, u))
    }

    /// Analytic gradient, or central differences of `eval`.
    pub fn grad(&self, lambda: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda, u)?;
        if let Some(g) = &self.grad {
            return Ok(g(lambda, u));
        }
        let h = fd_step(u);
        let mut x = u.to_vec();
        let mut g = vec![0.0; u.len()];
        for i in 0..u.len() {
            x[i] = u[i] + h;
            let fp = (self.eval)(lambda, &x);
            x[i] = u[i] - h;
            let fm = (self.eval)(lambda, &x);
            x[i] = u[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }

    /// Analytic Hessian, or central differences of the gradient checked for
    /// symmetry before symmetrizing.
    pub fn hess(&self, lambda: &[f64], u: &[f64]) -> Result<SymmetricMatrix> {
        self.check(lambda, u)?;
        if let Some(h) = &self.hess {
            return Ok(h(lambda, u));
        }
        let n = u.len();
        let h = fd_step(u);
        let mut cols = vec![0.0; n * n];
        let mut x = u.to_vec();
        for j in 0..n {
            x[j] = u[j] + h;
            let gp = self.grad(lambda, &x)?;
            x[j] = u[j] - h;
            let gm = self.grad(lambda, &x)?;
            x[j] = u[j];
            for i in 0..n {
                cols[i * n + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((cols[i * n + j] - cols[j * n + i]).abs());
            }
        }
        if asym > SYMMETRY_TOL {
            return Err(Error::NonSymmetricHessian { asymmetry: asym });
        }
        SymmetricMatrix::new(n, cols)
    }

    /// `‖∇f_λ(0)‖`, which must vanish along the trivial branch.
    pub fn trivial_branch_residual(&self, lambda: &[f64]) -> Result<f64> {
        Ok(norm(&self.grad(lambda, &vec![0.0; self.galerkin_dim])?))
    }
}

fn fd_step(u: &[f64]) -> f64 {
    f64::EPSILON.cbrt() * norm(u).max(1.0)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The Hessian `L_λ` of `f_λ` at the trivial branch, on the Galerkin space.
pub fn hessian_at_zero(f: &FunctionalFamily, lambda: &[f64]) -> Result<SymmetricMatrix> {
    f.hess(lambda, &vec![0.0; f.galerkin_dim])
}

/// `L_λ` as a path operator: dense, or `J + K` on the declared window.
pub fn hessian_operator(f: &FunctionalFamily, lambda: &[f64]) -> Result<Operator> {
    let h = hessian_at_zero(f, lambda)?;
    Ok(match &f.layout {
        None => Operator::Dense(h),
        Some(l) => Operator::SignCompact(SignCompactOperator::from_window(
            l.j_window.clone(),
            &h.leading(l.j_window.len()),
            l.tail_plus,
            l.tail_minus,
        )?),
    })
}

pub type ParamPath = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Straight segment `t ↦ (1 - t) a + t b` in parameter space.
pub fn segment(a: Vec<f64>, b: Vec<f64>) -> ParamPath {
    Arc::new(move |t| a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect())
}

/// The operator path `t ↦ L_{γ(t)}`.
pub fn hessian_path(f: &FunctionalFamily, gamma: ParamPath, endpoint_gap: f64) -> Result<OperatorPath> {
    let kind = if f.layout.is_some() { PathKind::SignCompact } else { PathKind::Dense };
    let f = f.clone();
    OperatorPath::new(kind, move |t| hessian_operator(&f, &gamma(t)), endpoint_gap)
}

/// Damped Newton iteration for `∇f_λ(u) = 0`.
///
/// Each step solves `H s = -g`, falling back to `s = -g` when `H` is
/// numerically singular, and halves the step until `‖∇f‖` decreases. An
/// iterate is accepted when `‖∇f‖ ≤ tol` and the full Newton step is below
/// `NEWTON_STEP_TOL ‖u‖ + tol`; near `u = 0` the gradient is small
/// everywhere, so the residual alone does not locate a critical point. On failure the best
/// iterate and its residual are returned in the error.
pub fn newton_critical_point(
    f: &FunctionalFamily,
    lambda: &[f64],
    u0: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = f.galerkin_dim;
    let mut u = u0.to_vec();
    let mut g = f.grad(lambda, &u)?;
    let mut r = norm(&g);
    let step = |u: &[f64], g: &[f64]| -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let h = f.hess(lambda, u)?;
        let minus_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let newton = lu_solve(n, h.entries(), &minus_g, 1e-14);
        Ok((minus_g, newton))
    };
    let settled = |u: &[f64], newton: &Option<Vec<f64>>| {
        newton.as_ref().is_some_and(|s| norm(s) <= NEWTON_STEP_TOL * norm(u) + tol)
    };
    for _ in 0..max_iter {
        let (minus_g, newton) = step(&u, &g)?;
        if r <= tol && settled(&u, &newton) {
            return Ok(u);
        }
        let mut moved = false;
        for dir in newton.iter().chain(core::iter::once(&minus_g)) {
            let mut alpha = 1.0;
            for _ in 0..40 {
                let cand: Vec<f64> = u.iter().zip(dir).map(|(x, d)| x + alpha * d).collect();
                let gc = f.grad(lambda, &cand)?;
                let rc = norm(&gc);
                if rc.is_finite() && rc < r {
                    u = cand;
                    g = gc;
                    r = rc;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    if r <= tol && settled(&u, &step(&u, &g)?.1) {
        return Ok(u);
    }
    Err(Error::NewtonNoConvergence { best: u, residual: r })
}

/// A nontrivial critical point near the trivial branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub lambda: Vec<f64>,
    pub u: Vec<f64>,
    pub grad_residual: f64,
}

/// Certified bifurcation from the trivial branch at `γ(t_star)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationRecord {
    pub t_star: f64,
    pub lambda_star: Vec<f64>,
    pub kernel_dim: usize,
    /// One witness per radius, norms decreasing.
    pub witnesses: Vec<Witness>,
    pub radius_schedule: Vec<f64>,
}

/// A point of `Σ(L)` on the path where no shrinking branch was found.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub t: f64,
    pub lambda: Vec<f64>,
    pub kernel_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct BifurcationSearch {
    pub records: Vec<BifurcationRecord>,
    /// Degenerate but no branch.
    pub unconfirmed: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectOptions {
    pub n_scan: usize,
    /// Decreasing, at least three entries.
    pub radii: Vec<f64>,
    pub residual_tol: f64,
    pub newton_iter: usize,
    pub seed: u64,
    pub gap: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            n_scan: 256,
            radii: vec![1e-1, 1e-2, 1e-3, 1e-4],
            residual_tol: 1e-9,
            newton_iter: 60,
            seed: 0,
            gap: DEFAULT_GAP,
        }
    }
}

const PERTURBATIONS: usize = 8;
const LADDER: usize = 60;
const MIN_RADII: usize = 3;

/// Locates bifurcation points on `t ↦ γ(t)`.
///
/// The Hessian Morse index is scanned on `n_scan` points; each change is
/// bisected to a point of `Σ(L)`. Around every such point Newton is seeded
/// with `r * (kernel direction)` and random perturbations of it at parameters
/// `γ(t* ± 2^-j)`, for each radius `r`. A record needs a nontrivial solution
/// with `r / 10 < ‖u‖ ≤ r` for at least three radii.
pub fn find_bifurcation_on_path(f: &FunctionalFamily, gamma: ParamPath, opts: &DetectOptions) -> Result<BifurcationSearch> {
    if opts.n_scan < 2 {
        return Err(Error::Invalid("n_scan must be at least 2".into()));
    }
    if opts.radii.len() < MIN_RADII || opts.radii.windows(2).any(|w| !(w[1] < w[0])) || opts.radii[0] <= 0.0 {
        return Err(Error::Invalid("radii must be positive, strictly decreasing, at least three".into()));
    }
    let index_at = |t: f64| -> Result<(usize, f64)> { inertia(&hessian_at_zero(f, &gamma(t))?) };

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let h = 1.0 / (opts.n_scan - 1) as f64;
    let mut prev = (0.0, index_at(0.0)?);
    if prev.1 .1 < opts.gap {
        candidates.push((0.0, 0));
    }
    for i in 1..opts.n_scan {
        let t = if i + 1 == opts.n_scan { 1.0 } else { i as f64 * h };
        let cur = (t, index_at(t)?);
        let degenerate = cur.1 .1 < opts.gap;
        if cur.1 .0 != prev.1 .0 && !degenerate && prev.1 .1 >= opts.gap {
            let (mut a, mut b) = (prev.0, cur.0);
            let ma = prev.1 .0;
            for _ in 0..64 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if index_at(mid)?.0 == ma {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            candidates.push((0.5 * (a + b), ma.abs_diff(cur.1 .0)));
        } else if degenerate {
            candidates.push((t, 0));
        }
        prev = cur;
    }

    let mut out = BifurcationSearch::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for (t_star, jump) in candidates {
        if out.records.last().is_some_and(|r| (r.t_star - t_star).abs() < 0.5 * h) {
            continue;
        }
        let lambda_star = gamma(t_star);
        let l = hessian_at_zero(f, &lambda_star)?;
        let spec = eigendecompose(&l, 1e-9)?;
        let mut order: Vec<usize> = (0..spec.len()).collect();
        order.sort_by(|&i, &j| spec.eigenvalues()[i].abs().total_cmp(&spec.eigenvalues()[j].abs()));
        let kernel_dim = if jump > 0 {
            jump
        } else {
            spec.eigenvalues().iter().filter(|x| x.abs() < opts.gap).count().max(1)
        };
        let kernel: Vec<Vec<f64>> = order[..kernel_dim].iter().map(|&k| spec.eigenvector(k).to_vec()).collect();

        let mut witnesses = Vec::new();
        for &r in &opts.radii {
            match branch_point(f, &gamma, t_star, &kernel, r, opts, &mut rng)? {
                Some(w) => witnesses.push(w),
                None => break,
            }
        }
        if witnesses.len() >= MIN_RADII {
            let radius_schedule = opts.radii[..witnesses.len()].to_vec();
            out.records.push(BifurcationRecord { t_star, lambda_star, kernel_dim, witnesses, radius_schedule });
        } else {
            out.unconfirmed.push(Candidate { t: t_star, lambda: lambda_star, kernel_dim });
        }
    }
    Ok(out)
}

fn branch_point(
    f: &FunctionalFamily,
    gamma: &ParamPath,
    t_star: f64,
    kernel: &[Vec<f64>],
    r: f64,
    opts: &DetectOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Witness>> {
    let n = f.galerkin_dim;
    let mut seeds: Vec<Vec<f64>> = Vec::with_capacity(2 + PERTURBATIONS);
    let dir = &kernel[0];
    seeds.push(dir.iter().map(|x| r * x).collect());
    seeds.push(dir.iter().map(|x| -r * x).collect());
    for _ in 0..PERTURBATIONS {
        let mut v: Vec<f64> = vec![0.0; n];
        for k in kernel {
            let c: f64 = rng.random_range(-1.0..1.0);
            for (vi, ki) in v.iter_mut().zip(k) {
                *vi += c * ki;
            }
        }
        for vi in v.iter_mut() {
            *vi += 0.3 * rng.random_range(-1.0..1.0) / (n as f64).sqrt();
        }
        let s = norm(&v);
        if s > 0.0 {
            seeds.push(v.iter().map(|x| r * x / s).collect());
        }
    }

    let mut delta = 1.0 / 64.0;
    for _ in 0..LADDER {
        let mut best: Option<Witness> = None;
        for side in [1.0, -1.0] {
            let t = t_star + side * delta;
            if !(0.0..=1.0).contains(&t) {
                continue;
            }
            let lambda = gamma(t);
            for seed in &seeds {
                let Ok(u) = newton_critical_point(f, &lambda, seed, opts.newton_iter, opts.residual_tol) else {
                    continue;
                };
                let nu = norm(&u);
                if nu > r || nu <= 0.1 * r {
                    continue;
                }
                let grad_residual = norm(&f.grad(&lambda, &u)?);
                if grad_residual > opts.residual_tol {
                    continue;
                }
                if best.as_ref().is_none_or(|b| nu > norm(&b.u)) {
                    best = Some(Witness { t, lambda: lambda.clone(), u, grad_residual });
                }
            }
        }
        if best.is_some() {
            return Ok(best);
        }
        delta *= 0.5;
    }
    Ok(None)
}

/// Names accepted by [`registry`].
pub const REGISTRY: [&str; 3] = ["krasnoselskii", "torus_demo", "positive_definite"];

/// Characteristic operator of the `krasnoselskii` family.
pub const KRASNOSELSKII_K: [f64; 4] = [1.0, 0.5, 1.0 / 3.0, 0.25];

/// Built-in families.
///
/// * `krasnoselskii`: `f(λ, u) = ½⟨(I - λK)u, u⟩ + ¼‖u‖⁴`, `K = diag(1, 1/2, 1/3, 1/4)`.
/// * `torus_demo`: `f(θ, u) = ½⟨L_θ u, u⟩ + ¼‖u‖⁴` with `L_θ = J + (cos πθ₁ - 1) P₀`,
///   `J` strongly indefinite (window sign `+1`, both tails) truncated to
///   two `+1` and two `-1` tail directions; independent of `θ₂`.
/// * `positive_definite`: `f(λ, u) = ½ Σ (k + 1 + λ²) u_k² + ¼‖u‖⁴` on `R³`,
///   value only.
pub fn registry(name: &str) -> Result<FunctionalFamily> {
    match name {
        "krasnoselskii" => {
            let diag = |l: f64| -> Vec<f64> { KRASNOSELSKII_K.iter().map(|k| 1.0 - l * k).collect() };
            FunctionalFamily::new(name, 4, 1, move |l, u| quartic_eval(&diag(l[0]), u))
                .map(|f| {
                    f.with_grad(move |l, u| quartic_grad(&diag(l[0]), u))
                        .with_hess(move |l, u| quartic_hess(&diag(l[0]), u))
                })
        }
        "torus_demo" => {
            let diag = |th: f64| -> Vec<f64> { vec![(core::f64::consts::PI * th).cos(), 1.0, 1.0, -1.0, -1.0] };
            FunctionalFamily::new(name, 5, 2, move |l, u| quartic_eval(&diag(l[0]), u))?
                .with_grad(move |l, u| quartic_grad(&diag(l[0]), u))
                .with_hess(move |l, u| quartic_hess(&diag(l[0]), u))
                .with_layout(SignLayout { j_window: vec![1], tail_plus: true, tail_minus: true })
        }
        "positive_definite" => FunctionalFamily::new(name, 3, 1, |l, u| {
            let d: Vec<f64> = (0..3).map(|k| k as f64 + 1.0 + l[0] * l[0]).collect();
            quartic_eval(&d, u)
        }),
        _ => Err(Error::UnknownFamily(name.into())),
    }
}

fn quartic_eval(d: &[f64], u: &[f64]) -> f64 {
    let q: f64 = d.iter().zip(u).map(|(a, x)| a * x * x).sum();
    let s: f64 = u.iter().map(|x| x * x).sum();
    0.5 * q + 0.25 * s * s
}

fn quartic_grad(d: &[f64], u: &[f64]) -> Vec<f64> {
    let s: f64 = u.iter().map(|x| x * x).sum();
    d.iter().zip(u).map(|(a, x)| a * x + s * x).collect()
}

fn quartic_hess(d: &[f64], u: &[f64]) -> SymmetricMatrix {
    let s: f64 = u.iter().map(|x| x * x).sum();
    SymmetricMatrix::from_fn(d.len(), |i, j| {
        let diag = if i == j { d[i] + s } else { 0.0 };
        diag + 2.0 * u[i] * u[j]
    })
    .expect("finite hessian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{sfl_crossings, sfl_endpoint};

    #[test]
    fn krasnoselskii_hessian() {
        let f = registry("krasnoselskii").unwrap();
        let h = hessian_at_zero(&f, &[2.0]).unwrap();
        let want = SymmetricMatrix::diagonal(&[-1.0, 0.0, 1.0 / 3.0, 0.5]).unwrap();
        assert!(h.max_abs_diff(&want) < 1e-15);
        assert!(hessian_at_zero(&f, &[0.0]).unwrap().max_abs_diff(&SymmetricMatrix::identity(4)) == 0.0);
    }

    #[test]
    fn registry_trivial_branch() {
        for name in REGISTRY {
            let f = registry(name).unwrap();
            for l in [-1.0, 0.0, 0.3, 2.5] {
                let lambda = vec![l; f.param_dim()];
                assert!(f.trivial_branch_residual(&lambda).unwrap() <= TRIVIAL_BRANCH_TOL, "{name}");
            }
        }
        assert!(matches!(registry("nope"), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn finite_differences_match_analytic() {
        let f = registry("krasnoselskii").unwrap();
        let g = f.clone().without_derivatives();
        let u = [0.3, -0.2, 0.1, 0.05];
        let a = f.hess(&[1.7], &u).unwrap();
        let b = g.hess(&[1.7], &u).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-6 * a.norm());
    }

    #[test]
    fn asymmetric_hessian_rejected() {
        let f = FunctionalFamily::new("bad", 2, 1, |_, _| 0.0)
            .unwrap()
            .with_grad(|_, u| vec![u[1], 0.0]);
        assert!(matches!(hessian_at_zero(&f, &[0.0]), Err(Error::NonSymmetricHessian { .. })));
    }

    #[test]
    fn newton_examples() {
        let f = registry("krasnoselskii").unwrap();
        let u = newton_critical_point(&f, &[1.5], &[0.5, 0.0, 0.0, 0.0], 50, 1e-12).unwrap();
        assert!((u[0].abs() - 0.5f64.sqrt()).abs() < 1e-10);
        let z = newton_critical_point(&f, &[0.5], &[0.1, -0.05, 0.02, 0.0], 50, 1e-12).unwrap();
        assert!(norm(&z) < 1e-10);

        let quad = FunctionalFamily::new("quad", 2, 1, |_, u| u[0] * u[0] + 0.5 * u[0] * u[1] + u[1] * u[1])
            .unwrap()
            .with_grad(|_, u| vec![2.0 * u[0] + 0.5 * u[1], 0.5 * u[0] + 2.0 * u[1]])
            .with_hess(|_, _| SymmetricMatrix::from_rows(&[[2.0, 0.5], [0.5, 2.0]]).unwrap());
        let z = newton_critical_point(&quad, &[0.0], &[0.7, -0.3], 1, 1e-14).unwrap();
        assert!(norm(&z) < 1e-15);
    }

    #[test]
    fn torus_hessian_and_path() {
        let f = registry("torus_demo").unwrap();
        let op = hessian_operator(&f, &[0.25, 0.9]).unwrap();
        let Operator::SignCompact(s) = &op else { panic!("kind") };
        assert_eq!(s.window_dim(), 1);
        assert!((s.window().get(0, 0) - (core::f64::consts::PI * 0.25).cos()).abs() < 1e-15);
        let path = hessian_path(&f, segment(vec![0.0, 0.3], vec![1.0, 0.3]), DEFAULT_GAP).unwrap();
        assert_eq!(sfl_crossings(&path, 17, 1e-9).unwrap().value, -1);
        assert_eq!(sfl_endpoint(&path).unwrap().value, -1);
    }

    #[test]
    fn krasnoselskii_bifurcations() {
        let f = registry("krasnoselskii").unwrap();
        let found = find_bifurcation_on_path(&f, segment(vec![0.5], vec![4.5]), &DetectOptions::default()).unwrap();
        let stars: Vec<f64> = found.records.iter().map(|r| r.lambda_star[0]).collect();
        assert_eq!(stars.len(), 4, "{found:?}");
        for (s, want) in stars.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((s - want).abs() < 1e-6);
        }
        for r in &found.records {
            assert_eq!(r.kernel_dim, 1);
            for (w, rad) in r.witnesses.iter().zip(&r.radius_schedule) {
                assert!(w.grad_residual <= 1e-9 && norm(&w.u) <= *rad && norm(&w.u) > 0.0);
            }
        }
        assert!(found.unconfirmed.is_empty());
        // witnesses lie on the branch ‖u‖² = λ κ_k - 1 and shrink geometrically
        for (r, kappa) in found.records.iter().zip(KRASNOSELSKII_K) {
            for w in &r.witnesses {
                let n2 = norm(&w.u).powi(2);
                assert!((n2 - (w.lambda[0] * kappa - 1.0)).abs() <= 1e-3 * n2, "{w:?}");
            }
            assert!(r.witnesses.windows(2).all(|p| norm(&p[0].u) >= 5.0 * norm(&p[1].u)));
        }
    }

    #[test]
    fn small_seeds_are_not_critical_points() {
        // near the trivial branch the gradient is tiny but Newton still moves
        let f = registry("krasnoselskii").unwrap();
        let lambda = [1.0 + 2f64.powi(-17)];
        let seed = [1e-4, 0.0, 0.0, 0.0];
        assert!(norm(&f.grad(&lambda, &seed).unwrap()) < 1e-9);
        let u = newton_critical_point(&f, &lambda, &seed, 60, 1e-9).unwrap();
        // here the iteration falls back onto u = 0
        assert!(norm(&u) < 1e-12, "{u:?}");
    }

    #[test]
    fn torus_bifurcation_and_definite_family() {
        let f = registry("torus_demo").unwrap();
        let found = find_bifurcation_on_path(&f, segment(vec![0.0, 0.4], vec![1.0, 0.4]), &DetectOptions::default()).unwrap();
        assert_eq!(found.records.len(), 1);
        assert!((found.records[0].t_star - 0.5).abs() < 1e-9);
        assert!(found.records[0].witnesses.iter().all(|w| w.t > 0.5));

        let g = registry("positive_definite").unwrap();
        let found = find_bifurcation_on_path(&g, segment(vec![-2.0], vec![2.0]), &DetectOptions::default()).unwrap();
        assert!(found.records.is_empty() && found.unconfirmed.is_empty());
    }
}
