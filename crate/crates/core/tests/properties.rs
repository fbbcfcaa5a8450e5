use proptest::prelude::*;
use sflow_core::flow::{
    homotopy_check, sfl, sfl_endpoint, Interpolation, Operator, OperatorPath, PathKind, DEFAULT_N_INIT, DEFAULT_TOL,
};
use sflow_core::{morse_index, relative_morse_index, SignCompactOperator, SymmetricMatrix, DEFAULT_GAP};

const GAP: f64 = 1e-6;

fn symmetric(n: usize, raw: &[f64]) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n, |i, j| raw[i * n + j] + raw[j * n + i]).unwrap()
}

fn matrix(n: usize) -> impl Strategy<Value = SymmetricMatrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |raw| symmetric(n, &raw))
}

fn invertible(n: usize) -> impl Strategy<Value = SymmetricMatrix> {
    matrix(n).prop_filter("endpoint too close to singular", |m| {
        m.eigenvalues().unwrap().iter().all(|v| v.abs() > 1e-3)
    })
}

/// Cubic spline through `knots` with invertible ends.
fn spline(n: usize, knots: usize) -> impl Strategy<Value = OperatorPath> {
    (invertible(n), prop::collection::vec(matrix(n), knots - 2), invertible(n)).prop_map(move |(a, mid, b)| {
        let mut ops = vec![a];
        ops.extend(mid);
        ops.push(b);
        let last = (ops.len() - 1) as f64;
        let samples = ops.into_iter().enumerate().map(|(i, m)| (i as f64 / last, Operator::Dense(m))).collect();
        OperatorPath::from_samples(samples, Interpolation::CubicSpline, GAP).unwrap()
    })
}

fn dims() -> impl Strategy<Value = usize> {
    1usize..=8
}

fn endpoint_morse(p: &OperatorPath, t: f64) -> i64 {
    morse_index(&p.sample(t).unwrap().window(), GAP).unwrap() as i64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_is_the_morse_difference(p in dims().prop_flat_map(|n| spline(n, 5))) {
        let value = sfl(&p).unwrap().value;
        prop_assert_eq!(value, endpoint_morse(&p, 0.0) - endpoint_morse(&p, 1.0));
    }

    #[test]
    fn reversal_negates(p in dims().prop_flat_map(|n| spline(n, 4))) {
        prop_assert_eq!(sfl(&p.reversed()).unwrap().value, -sfl(&p).unwrap().value);
    }

    #[test]
    fn constant_paths_have_no_flow(m in dims().prop_flat_map(invertible)) {
        let p = OperatorPath::constant(Operator::Dense(m), GAP).unwrap();
        prop_assert_eq!(sfl(&p).unwrap().value, 0);
    }

    #[test]
    fn concatenation_adds(
        (a, b) in dims().prop_flat_map(|n| (spline(n, 4), spline(n, 4)))
    ) {
        // splice `b` onto the end of `a` through the straight segment between them
        let (end, start) = (a.sample(1.0).unwrap(), b.sample(0.0).unwrap());
        let bridge = OperatorPath::new(PathKind::Dense, move |t| Operator::lerp(&end, &start, t), DEFAULT_GAP).unwrap();
        let ab = a.concatenate(&bridge, 1e-12).unwrap().concatenate(&b, 1e-12).unwrap();
        let parts = sfl(&a).unwrap().value + sfl(&bridge).unwrap().value + sfl(&b).unwrap().value;
        prop_assert_eq!(sfl(&ab).unwrap().value, parts);
    }

    #[test]
    fn congruence_preserves_flow(
        (p, raw) in dims().prop_flat_map(|n| (spline(n, 4), prop::collection::vec(-0.3f64..0.3, n * n)))
    ) {
        let n = p.sample(0.0).unwrap().window().dim();
        // `M(t) = I + t R` with `|R| < 1` stays invertible
        let scale = 0.9 / (n as f64 * 0.3);
        let m = move |t: f64| {
            (0..n * n)
                .map(|k| f64::from(u8::from(k / n == k % n)) + t * scale * raw[k])
                .collect::<Vec<_>>()
        };
        let q = p.congruent(m).unwrap();
        prop_assert_eq!(sfl(&q).unwrap().value, sfl(&p).unwrap().value);
    }

    #[test]
    fn homotopies_with_invertible_ends(
        (a, b, p0, p1) in dims().prop_flat_map(|n| (invertible(n), invertible(n), matrix(n), matrix(n)))
    ) {
        // `h(s, t)` passes through `(1 - s) p0 + s p1` at `t = 1/2` and keeps the ends fixed
        let h = move |s: f64, t: f64| {
            let mid = SymmetricMatrix::lerp(&p0, &p1, s)?;
            let m = if t <= 0.5 {
                SymmetricMatrix::lerp(&a, &mid, 2.0 * t)?
            } else {
                SymmetricMatrix::lerp(&mid, &b, 2.0 * t - 1.0)?
            };
            Ok(Operator::Dense(m))
        };
        let r = homotopy_check(h, PathKind::Dense, 5, DEFAULT_N_INIT, DEFAULT_TOL, GAP).unwrap();
        prop_assert!(r.consistent, "{:?}", r.values);
    }

    #[test]
    fn relative_index_is_the_morse_difference(
        (s, t) in dims().prop_flat_map(|n| (invertible(n), invertible(n)))
    ) {
        let want = morse_index(&s, GAP).unwrap() as i64 - morse_index(&t, GAP).unwrap() as i64;
        prop_assert_eq!(relative_morse_index(&s, &t, GAP).unwrap(), want);
        prop_assert_eq!(relative_morse_index(&t, &s, GAP).unwrap(), -want);
    }

    #[test]
    fn sign_compact_routes_agree(
        (signs, k0, k1) in dims().prop_flat_map(|n| {
            (prop::collection::vec(prop::bool::ANY, n), matrix(n), matrix(n))
        })
    ) {
        let j: Vec<i8> = signs.iter().map(|&b| if b { 1 } else { -1 }).collect();
        let a = SignCompactOperator::new(j.clone(), k0, true, true).unwrap();
        let b = SignCompactOperator::new(j, k1, true, true).unwrap();
        prop_assume!(a.margin().unwrap() > 1e-3 && b.margin().unwrap() > 1e-3);
        let (a, b) = (Operator::SignCompact(a), Operator::SignCompact(b));
        let p = OperatorPath::new(PathKind::SignCompact, move |t| Operator::lerp(&a, &b, t), GAP).unwrap();
        prop_assert_eq!(sfl(&p).unwrap().value, sfl_endpoint(&p).unwrap().value);
    }
}
