//! Morse indices, relative Morse indices and the finite-window model of
//! compactly perturbed sign operators.
//!
//! A [`SignCompactOperator`] represents `J + K` on an infinite-dimensional
//! Hilbert space: `J` is `±1` on a finite window of basis vectors and acts as
//! `+1` / `-1` on the infinite tails, while `K` is supported on the window.
//! Tails are never materialized. Outside the window both operators of a pair
//! with the same `J` coincide with `J`, so the tail basis vectors lie in
//! `E_+(S) ∩ E_+(T)` or `E_-(S) ∩ E_-(T)` and add nothing to either
//! intersection in the relative Morse index.


use crate::prelude::*;
use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, singular_values, SymmetricMatrix};

/// Default invertibility certificate.
pub const DEFAULT_GAP: f64 = 1e-8;
/// Singular-value cutoff used for intersection dimensions.
pub const RANK_CUTOFF: f64 = 1e-8;
const EIG_TOL: f64 = 1e-9;

/// Number of negative eigenvalues, provided every eigenvalue has modulus at
/// least `gap`.
pub fn morse_index(a: &SymmetricMatrix, gap: f64) -> Result<usize> {
    let eig = a.eigenvalues()?;
    certify(&eig, gap)?;
    Ok(eig.iter().filter(|&&l| l < 0.0).count())
}

/// Morse index together with the invertibility margin `min |eigenvalue|`.
pub fn inertia(a: &SymmetricMatrix) -> Result<(usize, f64)> {
    let eig = a.eigenvalues()?;
    let margin = eig.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    Ok((eig.iter().filter(|&&l| l < 0.0).count(), margin))
}

fn certify(eig: &[f64], gap: f64) -> Result<()> {
    let min_abs = eig.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    if min_abs < gap {
        return Err(Error::DegenerateOperator { min_abs, gap });
    }
    Ok(())
}

/// Dimension of the intersection of two subspaces given by orthonormal bases
/// (flattened columns of length `n`), as `dim U + dim V - rank [U V]`.
pub fn intersection_dim(n: usize, u: &[f64], v: &[f64]) -> usize {
    let p = u.len() / n;
    let q = v.len() / n;
    if p == 0 || q == 0 {
        return 0;
    }
    let mut stacked = Vec::with_capacity(u.len() + v.len());
    stacked.extend_from_slice(u);
    stacked.extend_from_slice(v);
    let sv = singular_values(n, p + q, stacked);
    let rank = sv.iter().filter(|&&s| s > RANK_CUTOFF).count();
    p + q - rank
}

/// `mu_rel(S, T) = dim(E_-(S) ∩ E_+(T)) - dim(E_+(S) ∩ E_-(T))`.
///
/// In finite dimension this equals `morse_index(S) - morse_index(T)`.
pub fn relative_morse_index(s: &SymmetricMatrix, t: &SymmetricMatrix, gap: f64) -> Result<i64> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: t.dim() });
    }
    let n = s.dim();
    let ss = eigendecompose(s, EIG_TOL)?;
    let ts = eigendecompose(t, EIG_TOL)?;
    certify(ss.eigenvalues(), gap)?;
    certify(ts.eigenvalues(), gap)?;
    let s_neg = ss.subspace(|l| l < 0.0);
    let s_pos = ss.subspace(|l| l > 0.0);
    let t_neg = ts.subspace(|l| l < 0.0);
    let t_pos = ts.subspace(|l| l > 0.0);
    let a = intersection_dim(n, &s_neg, &t_pos) as i64;
    let b = intersection_dim(n, &s_pos, &t_neg) as i64;
    Ok(a - b)
}

/// Essential-spectrum class of a selfadjoint Fredholm operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EssentialClass {
    EssentiallyPositive,
    EssentiallyNegative,
    StronglyIndefinite,
}

/// `J + K` with `J = diag(j_window) ⊕ (+I on the plus tail) ⊕ (-I on the minus tail)`
/// and `K` supported on the window.
#[derive(Clone, Debug, PartialEq)]
pub struct SignCompactOperator {
    j_window: Vec<i8>,
    k_window: SymmetricMatrix,
    tail_plus: bool,
    tail_minus: bool,
}

impl SignCompactOperator {
    pub fn new(j_window: Vec<i8>, k_window: SymmetricMatrix, tail_plus: bool, tail_minus: bool) -> Result<Self> {
        if j_window.is_empty() {
            return Err(Error::Invalid("window must be nonempty".into()));
        }
        if j_window.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Invalid("window signs must be +1 or -1".into()));
        }
        if k_window.dim() != j_window.len() {
            return Err(Error::DimensionMismatch { expected: j_window.len(), found: k_window.dim() });
        }
        if !tail_plus && !tail_minus {
            return Err(Error::Invalid("at least one infinite tail is required".into()));
        }
        Ok(Self { j_window, k_window, tail_plus, tail_minus })
    }

    /// The unperturbed sign operator `J` (with `K = 0`).
    pub fn sign(j_window: Vec<i8>, tail_plus: bool, tail_minus: bool) -> Result<Self> {
        let n = j_window.len().max(1);
        Self::new(j_window, SymmetricMatrix::zeros(n), tail_plus, tail_minus)
    }

    pub fn window_dim(&self) -> usize {
        self.j_window.len()
    }

    pub fn j_window(&self) -> &[i8] {
        &self.j_window
    }

    pub fn k_window(&self) -> &SymmetricMatrix {
        &self.k_window
    }

    pub fn tail_plus(&self) -> bool {
        self.tail_plus
    }

    pub fn tail_minus(&self) -> bool {
        self.tail_minus
    }

    /// Same `J` (window signs and tails)?
    pub fn same_sign(&self, other: &Self) -> bool {
        self.j_window == other.j_window && self.tail_plus == other.tail_plus && self.tail_minus == other.tail_minus
    }

    /// The window block `J_window + K_window`.
    pub fn window(&self) -> SymmetricMatrix {
        let n = self.window_dim();
        SymmetricMatrix::from_fn(n, |i, j| {
            let jd = if i == j { f64::from(self.j_window[i]) } else { 0.0 };
            jd + self.k_window.get(i, j)
        })
        .expect("window entries are finite")
    }

    /// Replace the perturbation, keeping `J`.
    pub fn with_k(&self, k_window: SymmetricMatrix) -> Result<Self> {
        Self::new(self.j_window.clone(), k_window, self.tail_plus, self.tail_minus)
    }

    /// Builds the operator whose window block is `window` (so `K = window - J`).
    pub fn from_window(j_window: Vec<i8>, window: &SymmetricMatrix, tail_plus: bool, tail_minus: bool) -> Result<Self> {
        let n = j_window.len();
        if window.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: window.dim() });
        }
        let k = SymmetricMatrix::from_fn(n, |i, j| {
            window.get(i, j) - if i == j { f64::from(j_window[i]) } else { 0.0 }
        })?;
        Self::new(j_window, k, tail_plus, tail_minus)
    }

    /// Pulls `plus` basis vectors from the `+1` tail and `minus` from the
    /// `-1` tail into the window, with zero perturbation on them.
    pub fn enlarged(&self, plus: usize, minus: usize) -> Result<Self> {
        if (plus > 0 && !self.tail_plus) || (minus > 0 && !self.tail_minus) {
            return Err(Error::Invalid("cannot enlarge the window from an absent tail".into()));
        }
        let mut j = self.j_window.clone();
        j.extend(core::iter::repeat_n(1, plus));
        j.extend(core::iter::repeat_n(-1, minus));
        let zeros: Vec<f64> = alloc::vec![0.0; plus + minus];
        Self::new(j, self.k_window.extended(&zeros), self.tail_plus, self.tail_minus)
    }

    /// `min |eigenvalue|` of the window block. Tail eigenvalues are `±1`.
    pub fn margin(&self) -> Result<f64> {
        Ok(self.window().margin()?.min(1.0))
    }

    /// Cogredient transform by a window-local invertible `M` (row-major).
    pub fn congruence(&self, m: &[f64]) -> Result<Self> {
        let w = self.window().congruence(m)?;
        Self::from_window(self.j_window.clone(), &w, self.tail_plus, self.tail_minus)
    }
}

/// Relative Morse index of two compact perturbations of the same `J`,
/// evaluated on the common window.
pub fn relative_morse_index_sc(s: &SignCompactOperator, t: &SignCompactOperator, gap: f64) -> Result<i64> {
    if !s.same_sign(t) {
        return Err(Error::MismatchedJ);
    }
    relative_morse_index(&s.window(), &t.window(), gap)
}

/// Classifies `J + K` by its essential spectrum, which only the tails decide.
pub fn classify_essential(s: &SignCompactOperator) -> EssentialClass {
    match (s.tail_plus, s.tail_minus) {
        (true, false) => EssentialClass::EssentiallyPositive,
        (false, true) => EssentialClass::EssentiallyNegative,
        _ => EssentialClass::StronglyIndefinite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    
    fn diag(d: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::diagonal(d).unwrap()
    }

    /// `id + K_n` with `K_n = -2 * (projection on the first n basis vectors)` in dimension `2n`.
    fn id_plus_kn(n: usize) -> SymmetricMatrix {
        let d: Vec<f64> = (0..2 * n).map(|i| if i < n { -1.0 } else { 1.0 }).collect();
        diag(&d)
    }

    #[test]
    fn morse_index_examples() {
        assert_eq!(morse_index(&diag(&[-1.0, -2.0, 3.0]), DEFAULT_GAP), Ok(2));
        assert_eq!(morse_index(&SymmetricMatrix::identity(5), DEFAULT_GAP), Ok(0));
        for n in 1..=6 {
            assert_eq!(morse_index(&id_plus_kn(n), DEFAULT_GAP), Ok(n));
        }
    }

    #[test]
    fn morse_index_rejects_degenerate() {
        let err = morse_index(&diag(&[1.0, 1e-12]), DEFAULT_GAP).unwrap_err();
        assert!(matches!(err, Error::DegenerateOperator { .. }));
    }

    #[test]
    fn relative_index_examples() {
        let s = diag(&[-1.0, 1.0]);
        let t = SymmetricMatrix::identity(2);
        assert_eq!(relative_morse_index(&s, &t, DEFAULT_GAP), Ok(1));
        assert_eq!(relative_morse_index(&s, &s, DEFAULT_GAP), Ok(0));
        assert!(matches!(
            relative_morse_index(&s, &SymmetricMatrix::identity(3), DEFAULT_GAP),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn window_pair_sign_flip() {
        let j = SignCompactOperator::sign(vec![1, -1], true, true).unwrap();
        let t = j.with_k(diag(&[0.0, 2.0])).unwrap();
        // window eigenvalue -1 -> +1: one negative direction is lost from S to T
        assert_eq!(relative_morse_index_sc(&j, &t, DEFAULT_GAP), Ok(1));
        assert_eq!(relative_morse_index_sc(&t, &j, DEFAULT_GAP), Ok(-1));
        assert_eq!(relative_morse_index_sc(&j, &j, DEFAULT_GAP), Ok(0));
    }

    #[test]
    fn compact_perturbation_of_identity() {
        for n in 1..=8 {
            let id = SignCompactOperator::sign(vec![1; n], true, false).unwrap();
            let kn = id.with_k(diag(&vec![-2.0; n])).unwrap();
            assert_eq!(relative_morse_index_sc(&kn, &id, DEFAULT_GAP), Ok(n as i64));
        }
    }

    #[test]
    fn mismatched_j() {
        let a = SignCompactOperator::sign(vec![1, -1], true, true).unwrap();
        let b = SignCompactOperator::sign(vec![1, 1], true, true).unwrap();
        let c = SignCompactOperator::sign(vec![1, -1], true, false);
        assert!(c.is_err() || relative_morse_index_sc(&a, &c.unwrap(), DEFAULT_GAP) == Err(Error::MismatchedJ));
        assert_eq!(relative_morse_index_sc(&a, &b, DEFAULT_GAP), Err(Error::MismatchedJ));
    }

    #[test]
    fn classification() {
        let plus = SignCompactOperator::sign(vec![1, -1], true, false).unwrap();
        let minus = SignCompactOperator::sign(vec![1, -1], false, true).unwrap();
        let both = SignCompactOperator::sign(vec![1, -1], true, true).unwrap();
        assert_eq!(classify_essential(&plus), EssentialClass::EssentiallyPositive);
        assert_eq!(classify_essential(&minus), EssentialClass::EssentiallyNegative);
        assert_eq!(classify_essential(&both), EssentialClass::StronglyIndefinite);
        let perturbed = both.with_k(diag(&[-5.0, 7.0])).unwrap();
        assert_eq!(classify_essential(&perturbed), EssentialClass::StronglyIndefinite);
        assert!(SignCompactOperator::sign(vec![1], false, false).is_err());
    }

    #[test]
    fn enlarging_keeps_relative_index() {
        let j = SignCompactOperator::sign(vec![1, -1, 1], true, true).unwrap();
        let s = j.with_k(diag(&[-3.0, 0.5, 0.0])).unwrap();
        let t = j.with_k(diag(&[0.0, 3.0, -2.5])).unwrap();
        let base = relative_morse_index_sc(&s, &t, DEFAULT_GAP).unwrap();
        for (p, m) in [(1, 0), (0, 2), (3, 3)] {
            let se = s.enlarged(p, m).unwrap();
            let te = t.enlarged(p, m).unwrap();
            assert_eq!(relative_morse_index_sc(&se, &te, DEFAULT_GAP).unwrap(), base);
        }
    }
}
