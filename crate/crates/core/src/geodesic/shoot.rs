use crate::prelude::*;

use super::{christoffel, contract, inner, Mat, MetricFamily, CHRISTOFFEL_STEP, MAX_DIM};
use crate::error::{Error, Result};

/// Local error target of the integrator, per unit time.
pub const ODE_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-12;
const STATE: usize = 2 * MAX_DIM + MAX_DIM * MAX_DIM;

type State = [f64; STATE];

/// A sampled geodesic `t ↦ exp_p(t v)`, `t ∈ [0, 1]`, with a parallel frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicRecord {
    pub dim: usize,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub times: Vec<f64>,
    pub positions: Vec<[f64; MAX_DIM]>,
    pub velocities: Vec<[f64; MAX_DIM]>,
    /// `frames[i][c]` is the frame vector `E_c` at sample `i`; `E_0` is the
    /// unit tangent unless the velocity vanishes.
    pub frames: Vec<Mat>,
    /// `g(E_c, E_c)`.
    pub signs: Vec<i8>,
    /// `g(γ'(0), γ'(0))`.
    pub energy: f64,
    pub energy_drift: f64,
    /// Largest `|γ'' + Γ(γ', γ')|` at interior samples (five-point differences).
    pub geodesic_residual: f64,
    /// Largest `|∇E/dt|` at interior samples.
    pub frame_residual: f64,
    pub zero_velocity: bool,
}

impl GeodesicRecord {
    pub fn samples(&self) -> usize {
        self.times.len()
    }

    /// Frame vectors orthogonal to the tangent, with their signs.
    pub fn transverse(&self, i: usize) -> (&[[f64; MAX_DIM]], &[i8]) {
        let skip = usize::from(!self.zero_velocity);
        let k = self.dim - 1;
        (&self.frames[i][skip..skip + k], &self.signs[skip..skip + k])
    }
}

/// Indefinite Gram-Schmidt from the tangent and coordinate directions.
fn initial_frame(g: &Mat, m: usize, v: &[f64]) -> Result<(Mat, Vec<i8>)> {
    let scale = (0..m).fold(0.0f64, |s, i| s.max(g[i][i].abs())).max(1e-300);
    let mut frame: Vec<[f64; MAX_DIM]> = Vec::with_capacity(m);
    let mut signs: Vec<i8> = Vec::with_capacity(m);
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if vn > 0.0 {
        let q = inner(g, m, v, v);
        if q.abs() <= 1e-10 * scale * vn * vn {
            return Err(Error::TangentialDegeneracy("velocity is null".into()));
        }
        let mut e = [0.0; MAX_DIM];
        for i in 0..m {
            e[i] = v[i] / q.abs().sqrt();
        }
        frame.push(e);
        signs.push(if q > 0.0 { 1 } else { -1 });
    }
    let mut candidates: Vec<[f64; MAX_DIM]> = Vec::new();
    for i in 0..m {
        let mut e = [0.0; MAX_DIM];
        e[i] = 1.0;
        candidates.push(e);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            for s in [1.0, -1.0] {
                let mut e = [0.0; MAX_DIM];
                e[i] = 1.0;
                e[j] = s;
                candidates.push(e);
            }
        }
    }
    for c in candidates {
        if frame.len() == m {
            break;
        }
        let mut w = c;
        for (e, &s) in frame.iter().zip(&signs) {
            let proj = inner(g, m, &w, e) * f64::from(s);
            for i in 0..m {
                w[i] -= proj * e[i];
            }
        }
        let n = inner(g, m, &w, &w);
        let wn = w.iter().map(|x| x * x).sum::<f64>();
        if n.abs() <= 1e-8 * scale * wn || wn < 1e-16 {
            continue;
        }
        for x in w.iter_mut().take(m) {
            *x /= n.abs().sqrt();
        }
        frame.push(w);
        signs.push(if n > 0.0 { 1 } else { -1 });
    }
    if frame.len() < m {
        return Err(Error::TangentialDegeneracy("no nondegenerate frame".into()));
    }
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    out[..m].copy_from_slice(&frame);
    Ok((out, signs))
}

struct Flow<'a> {
    metric: &'a MetricFamily,
    lambda: &'a [f64],
    m: usize,
}

impl Flow<'_> {
    fn deriv(&self, y: &State) -> Result<State> {
        let m = self.m;
        let x = &y[..m];
        let v = &y[MAX_DIM..MAX_DIM + m];
        let gamma = christoffel(self.metric, self.lambda, x, CHRISTOFFEL_STEP)?;
        let mut d = [0.0; STATE];
        d[..m].copy_from_slice(v);
        let acc = contract(&gamma, m, v, v);
        for k in 0..m {
            d[MAX_DIM + k] = -acc[k];
        }
        for c in 0..m {
            let off = 2 * MAX_DIM + c * MAX_DIM;
            let de = contract(&gamma, m, v, &y[off..off + m]);
            for k in 0..m {
                d[off + k] = -de[k];
            }
        }
        Ok(d)
    }

    fn rk4(&self, y: &State, h: f64) -> Result<State> {
        let axpy = |a: &State, s: f64, b: &State| {
            let mut o = *a;
            for (oi, bi) in o.iter_mut().zip(b) {
                *oi += s * bi;
            }
            o
        };
        let k1 = self.deriv(y)?;
        let k2 = self.deriv(&axpy(y, 0.5 * h, &k1))?;
        let k3 = self.deriv(&axpy(y, 0.5 * h, &k2))?;
        let k4 = self.deriv(&axpy(y, h, &k3))?;
        let mut o = *y;
        for i in 0..STATE {
            o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(o)
    }
}

/// Integrates `γ'' = -Γ(γ', γ')` together with the parallel transport of a
/// frame, by RK4 with step doubling. The frame is `g`-orthonormalized at
/// `t = 0` only. `steps` uniform output intervals are recorded.
pub fn geodesic_shoot(metric: &MetricFamily, lambda: &[f64], p: &[f64], v: &[f64], steps: usize) -> Result<GeodesicRecord> {
    let m = metric.dim();
    if p.len() != m || v.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: p.len().min(v.len()) });
    }
    if steps < 4 {
        return Err(Error::Invalid("at least four output steps are needed".into()));
    }
    if !metric.contains(p) {
        return Err(Error::ChartExit { t: 0.0 });
    }
    let g0 = metric.metric(lambda, p)?;
    let (frame, signs) = initial_frame(&g0, m, v)?;
    let flow = Flow { metric, lambda, m };

    let mut y: State = [0.0; STATE];
    y[..m].copy_from_slice(p);
    y[MAX_DIM..MAX_DIM + m].copy_from_slice(v);
    for c in 0..m {
        let off = 2 * MAX_DIM + c * MAX_DIM;
        y[off..off + m].copy_from_slice(&frame[c][..m]);
    }
    let speed = v.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let dt = 1.0 / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(y);
    let mut h = dt.min(0.05 / speed.max(1e-300));
    for i in 0..steps {
        let t_end = if i + 1 == steps { 1.0 } else { (i + 1) as f64 * dt };
        let mut t = i as f64 * dt;
        while t < t_end {
            let step = h.min(t_end - t);
            let full = flow.rk4(&y, step);
            let half = flow.rk4(&y, 0.5 * step).and_then(|mid| flow.rk4(&mid, 0.5 * step));
            let (full, half) = match (full, half) {
                (Ok(f), Ok(h2)) => (f, h2),
                (Err(e), _) | (_, Err(e)) => {
                    if matches!(e, Error::SingularMetric | Error::NonFinite) && !metric.contains(&y[..m]) {
                        return Err(Error::ChartExit { t });
                    }
                    if step <= MIN_STEP {
                        return Err(e);
                    }
                    h = 0.5 * step;
                    continue;
                }
            };
            let vmax = half[MAX_DIM..MAX_DIM + m].iter().fold(0.0f64, |s, x| s.max(x.abs()));
            let mut err = 0.0f64;
            for k in 0..(MAX_DIM + m) {
                err = err.max((half[k] - full[k]).abs() / 15.0);
            }
            let tol = ODE_TOL * step * (1.0 + vmax);
            if err <= tol || step <= MIN_STEP {
                let mut next = y;
                for k in 0..STATE {
                    next[k] = half[k] + (half[k] - full[k]) / 15.0;
                }
                if !metric.contains(&next[..m]) {
                    // shrink onto the boundary before reporting the exit
                    if step > 1e-9 {
                        h = 0.5 * step;
                        continue;
                    }
                    return Err(Error::ChartExit { t: t + step });
                }
                y = next;
                t += step;
                let grow = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 2.0) };
                if step == h || grow < 1.0 {
                    h = step * grow;
                }
            } else {
                h = step * (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5);
                if h < MIN_STEP {
                    return Err(Error::NoConvergence { residual: err });
                }
            }
        }
        states.push(y);
    }

    let unpack = |s: &State| {
        let mut x = [0.0; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        x[..m].copy_from_slice(&s[..m]);
        w[..m].copy_from_slice(&s[MAX_DIM..MAX_DIM + m]);
        for c in 0..m {
            let off = 2 * MAX_DIM + c * MAX_DIM;
            e[c][..m].copy_from_slice(&s[off..off + m]);
        }
        (x, w, e)
    };
    let mut positions = Vec::with_capacity(states.len());
    let mut velocities = Vec::with_capacity(states.len());
    let mut frames = Vec::with_capacity(states.len());
    for s in &states {
        let (x, w, e) = unpack(s);
        positions.push(x);
        velocities.push(w);
        frames.push(e);
    }
    let times: Vec<f64> = (0..=steps).map(|i| if i == steps { 1.0 } else { i as f64 * dt }).collect();
    let energy = inner(&g0, m, v, v);
    let mut energy_drift = 0.0f64;
    for (x, w) in positions.iter().zip(&velocities) {
        let g = metric.metric(lambda, &x[..m])?;
        energy_drift = energy_drift.max((inner(&g, m, &w[..m], &w[..m]) - energy).abs());
    }

    let mut geodesic_residual = 0.0f64;
    let mut frame_residual = 0.0f64;
    let five = |a: &[f64; MAX_DIM], b: &[f64; MAX_DIM], c: &[f64; MAX_DIM], d: &[f64; MAX_DIM], k: usize| {
        (-a[k] + 8.0 * b[k] - 8.0 * c[k] + d[k]) / (12.0 * dt)
    };
    for i in 2..steps.saturating_sub(1) {
        let gamma = christoffel(metric, lambda, &positions[i][..m], CHRISTOFFEL_STEP)?;
        let w = &velocities[i][..m];
        let acc = contract(&gamma, m, w, w);
        for k in 0..m {
            let d = five(&velocities[i + 2], &velocities[i + 1], &velocities[i - 1], &velocities[i - 2], k);
            geodesic_residual = geodesic_residual.max((d + acc[k]).abs());
        }
        for c in 0..m {
            let de = contract(&gamma, m, w, &frames[i][c][..m]);
            for k in 0..m {
                let d = five(&frames[i + 2][c], &frames[i + 1][c], &frames[i - 1][c], &frames[i - 2][c], k);
                frame_residual = frame_residual.max((d + de[k]).abs());
            }
        }
    }

    Ok(GeodesicRecord {
        dim: m,
        lambda: lambda.to_vec(),
        p: p.to_vec(),
        v: v.to_vec(),
        times,
        positions,
        velocities,
        frames,
        signs,
        energy,
        energy_drift,
        geodesic_residual,
        frame_residual,
        zero_velocity: speed == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::registry;
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn euclidean_line() {
        let m = registry("euclidean").unwrap();
        let r = geodesic_shoot(&m, &[], &[1.0, 2.0], &[0.5, -3.0], 64).unwrap();
        for (t, x) in r.times.iter().zip(&r.positions) {
            assert!((x[0] - (1.0 + 0.5 * t)).abs() < 1e-13);
            assert!((x[1] - (2.0 - 3.0 * t)).abs() < 1e-13);
        }
        assert!(r.energy_drift < 1e-12);
    }

    #[test]
    fn sphere_great_circle() {
        let m = registry("round_sphere(1)").unwrap();
        let r = geodesic_shoot(&m, &[], &[PI / 2.0, 0.0], &[0.0, 2.0], 256).unwrap();
        for (t, x) in r.times.iter().zip(&r.positions) {
            assert!((x[0] - PI / 2.0).abs() < 1e-10);
            assert!((x[1] - 2.0 * t).abs() < 1e-9);
        }
        assert!(r.energy_drift <= 1e-8 * (1.0 + r.energy));
        assert!(r.geodesic_residual < 1e-6, "{}", r.geodesic_residual);
        assert!(r.frame_residual < 1e-6, "{}", r.frame_residual);

        // an inclined great circle: z = sin(α) sin(t |v|) in embedding coordinates
        let a: f64 = 0.6;
        let r = geodesic_shoot(&m, &[], &[PI / 2.0, 0.0], &[-3.0 * a.sin(), 3.0 * a.cos()], 512).unwrap();
        for (t, x) in r.times.iter().zip(&r.positions) {
            assert!((x[0].cos() - a.sin() * (3.0 * t).sin()).abs() < 1e-8);
        }
        assert!(r.energy_drift <= 1e-8 * (1.0 + r.energy));
    }

    #[test]
    fn frame_is_orthonormal_and_signed() {
        let m = registry("split_spheres(1, 1, 1, 0.7)").unwrap();
        let v: Vec<f64> = m.direction().iter().map(|d| 4.0 * d).collect();
        let r = geodesic_shoot(&m, &[], m.base_point(), &v, 128).unwrap();
        assert_eq!(r.signs, vec![1, 1, -1, -1]);
        for i in [0, 64, 128] {
            let g = m.metric(&[], &r.positions[i][..4]).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    let want = if a == b { f64::from(r.signs[a]) } else { 0.0 };
                    assert!((inner(&g, 4, &r.frames[i][a], &r.frames[i][b]) - want).abs() < 1e-8);
                }
            }
        }
        // both factors move along their equators
        let last = r.positions[128];
        assert!((last[1] - 4.0).abs() < 1e-8 && (last[3] - 2.8).abs() < 1e-8);
    }

    #[test]
    fn chart_exit() {
        let m = registry("round_sphere(1)").unwrap();
        let e = geodesic_shoot(&m, &[], &[PI / 2.0, 0.0], &[-3.0, 0.0], 64).unwrap_err();
        let Error::ChartExit { t } = e else { panic!("{e:?}") };
        assert!((t - (PI / 2.0 - 0.01) / 3.0).abs() < 1e-6);
    }
}
