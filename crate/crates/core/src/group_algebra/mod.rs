//! Linear automorphisms of the space of relations `(f, g)`.
//!
//! A real 2×2 matrix `A` acts on a pair of functions by
//! `(f, g) ↦ (A₁₁f + A₁₂g, A₂₁f + A₂₂g)`. The matrices that keep every strict
//! relation `f < g` strict form the group 𝒢, which is parameterized by
//! `(a, b, c)` with `a ≠ 0`, `b > 0` through
//!
//! ```text
//! A = (1 −1; 1 1) · (a c; 0 b) · (1 1; −1 1)
//!   = (a+b−c  a−b+c; a−b−c  a+b+c)
//! ```
//!
//! and splits as the semidirect product of positive dilations 𝒯 and the
//! difference-preserving group ℋ. Functions are represented by their values
//! on a finite sample set.

mod grid;
pub mod properties;

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{smooth_p, smooth_p_grid, write_p_grid_csv, PGridPoint};

/// Absolute tolerance on equality constraints in membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Tolerance for algebraic round-trips (decompositions, fixed points).
pub const ROUNDTRIP_TOL: f64 = 1e-12;
/// Matrices with `|det|` at or below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("matrix is numerically singular (det = {0:e})")]
    Singular(f64),
    #[error("invalid group parameters: {0}")]
    Domain(String),
    #[error("matrix is not in 𝒢: {0}")]
    NotInG(String),
    #[error("the identity is excluded from fixed-point analysis")]
    Identity,
    #[error("sample set is empty")]
    EmptySamples,
    #[error("function values have mismatched lengths ({f} vs {g})")]
    LengthMismatch { f: usize, g: usize },
}

/// An element of GL(2, ℝ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    entries: [[f64; 2]; 2],
    det: f64,
}

impl GroupElement {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self, GroupError> {
        let det = entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0];
        if !det.is_finite() || det.abs() <= SINGULAR_DET {
            return Err(GroupError::Singular(det));
        }
        Ok(GroupElement { entries, det })
    }

    pub fn from_rows(a11: f64, a12: f64, a21: f64, a22: f64) -> Result<Self, GroupError> {
        Self::new([[a11, a12], [a21, a22]])
    }

    pub fn identity() -> Self {
        GroupElement {
            entries: [[1.0, 0.0], [0.0, 1.0]],
            det: 1.0,
        }
    }

    pub fn scalar(lambda: f64) -> Result<Self, GroupError> {
        Self::new([[lambda, 0.0], [0.0, lambda]])
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row][col]
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        let inv = 1.0 / self.det;
        GroupElement {
            entries: [[d * inv, -b * inv], [-c * inv, a * inv]],
            det: inv,
        }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &GroupElement) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.entries[i][j] - other.entries[i][j]).abs());
            }
        }
        m
    }

    pub fn approx_eq(&self, other: &GroupElement, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&GroupElement::identity(), tol)
    }

    /// Matrix product without the singularity re-check (products of
    /// invertible matrices are invertible).
    fn product(&self, rhs: &GroupElement) -> GroupElement {
        let a = &self.entries;
        let b = &rhs.entries;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        GroupElement {
            entries: out,
            det: self.det * rhs.det,
        }
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.product(&rhs)
    }
}

impl<'a> Mul<&'a GroupElement> for &'a GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        self.product(rhs)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.entries;
        write!(f, "(({a}, {b}), ({c}, {d}))")
    }
}

/// `(a, b, c)` coordinates of an element of 𝒢.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatedParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ConjugatedParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, GroupError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(GroupError::Domain(format!(
                "non-finite parameters ({a}, {b}, {c})"
            )));
        }
        if a == 0.0 {
            return Err(GroupError::Domain("a must be nonzero".into()));
        }
        if b <= 0.0 {
            return Err(GroupError::Domain(format!("b must be positive, got {b}")));
        }
        Ok(ConjugatedParams { a, b, c })
    }
}

/// Parameters of ℋ: the matrix `(p, q−1; p−1, q)` with `p + q ≠ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HParams {
    pub p: f64,
    pub q: f64,
}

impl HParams {
    pub fn new(p: f64, q: f64) -> Result<Self, GroupError> {
        if !(p.is_finite() && q.is_finite()) || (p + q - 1.0).abs() <= SINGULAR_DET {
            return Err(GroupError::Domain(format!(
                "p + q must differ from 1 (p={p}, q={q})"
            )));
        }
        Ok(HParams { p, q })
    }

    pub fn matrix(&self) -> GroupElement {
        let HParams { p, q } = *self;
        GroupElement {
            entries: [[p, q - 1.0], [p - 1.0, q]],
            det: p + q - 1.0,
        }
    }
}

/// Positive dilation `λ·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilationParam {
    pub lambda: f64,
}

impl DilationParam {
    pub fn new(lambda: f64) -> Result<Self, GroupError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(GroupError::Domain(format!(
                "dilation must be positive, got {lambda}"
            )));
        }
        Ok(DilationParam { lambda })
    }

    pub fn matrix(&self) -> GroupElement {
        GroupElement::scalar(self.lambda).expect("positive dilation is invertible")
    }
}

/// Values of `f` and `g` on a shared finite sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionPair {
    f: Vec<f64>,
    g: Vec<f64>,
}

impl FunctionPair {
    pub fn new(f: Vec<f64>, g: Vec<f64>) -> Result<Self, GroupError> {
        if f.len() != g.len() {
            return Err(GroupError::LengthMismatch {
                f: f.len(),
                g: g.len(),
            });
        }
        Ok(FunctionPair { f, g })
    }

    /// Evaluates `f` and `g` on every sample point.
    pub fn sample<T>(points: &[T], f: impl Fn(&T) -> f64, g: impl Fn(&T) -> f64) -> Self {
        FunctionPair {
            f: points.iter().map(&f).collect(),
            g: points.iter().map(&g).collect(),
        }
    }

    pub fn constant(f: f64, g: f64, samples: usize) -> Self {
        FunctionPair {
            f: vec![f; samples],
            g: vec![g; samples],
        }
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// Pointwise `g − f`.
    pub fn difference(&self) -> Vec<f64> {
        self.f.iter().zip(&self.g).map(|(f, g)| g - f).collect()
    }

    /// True when `f < g` at every sample, i.e. the pair lies in the conjecture space.
    pub fn is_conjecture(&self) -> bool {
        self.f.iter().zip(&self.g).all(|(f, g)| f < g)
    }

    pub fn max_abs_diff(&self, other: &FunctionPair) -> f64 {
        self.f
            .iter()
            .zip(&other.f)
            .chain(self.g.iter().zip(&other.g))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// `B = (1 1; −1 1)` maps the conjecture space onto `{g > 0}`.
fn conjugator() -> GroupElement {
    GroupElement {
        entries: [[1.0, 1.0], [-1.0, 1.0]],
        det: 2.0,
    }
}

fn conjugator_inverse() -> GroupElement {
    GroupElement {
        entries: [[0.5, -0.5], [0.5, 0.5]],
        det: 0.5,
    }
}

pub fn mat_from_abc(params: ConjugatedParams) -> Result<GroupElement, GroupError> {
    let ConjugatedParams { a, b, c } = ConjugatedParams::new(params.a, params.b, params.c)?;
    GroupElement::new([[a + b - c, a - b + c], [a - b - c, a + b + c]])
}

/// Inverse of [`mat_from_abc`]: conjugates by `B` and reads off the
/// upper-triangular entries of `B·A·B⁻¹ = 2·(a c; 0 b)`.
pub fn abc_from_mat(m: &GroupElement) -> Result<ConjugatedParams, GroupError> {
    let q = (&conjugator() * m) * conjugator_inverse();
    let lower = q.get(1, 0) / 2.0;
    let a = q.get(0, 0) / 2.0;
    let c = q.get(0, 1) / 2.0;
    let b = q.get(1, 1) / 2.0;
    if lower.abs() > MEMBERSHIP_TOL {
        return Err(GroupError::NotInG(format!(
            "conjugate is not upper triangular (lower-left {lower:e})"
        )));
    }
    if b <= MEMBERSHIP_TOL {
        return Err(GroupError::NotInG(format!("b = {b} is not positive")));
    }
    if a.abs() <= MEMBERSHIP_TOL {
        return Err(GroupError::NotInG("a vanishes".into()));
    }
    Ok(ConjugatedParams { a, b, c })
}

pub fn is_in_t(m: &GroupElement) -> bool {
    let [[a11, a12], [a21, a22]] = m.entries();
    a12.abs() <= MEMBERSHIP_TOL
        && a21.abs() <= MEMBERSHIP_TOL
        && (a11 - a22).abs() <= MEMBERSHIP_TOL
        && a11 > MEMBERSHIP_TOL
}

pub fn is_in_h(m: &GroupElement) -> bool {
    let [[a11, a12], [a21, a22]] = m.entries();
    (a11 - a21 - 1.0).abs() <= MEMBERSHIP_TOL
        && (a22 - a12 - 1.0).abs() <= MEMBERSHIP_TOL
        && (m.trace() - 1.0).abs() > MEMBERSHIP_TOL
}

pub fn is_in_g(m: &GroupElement) -> bool {
    abc_from_mat(m).is_ok()
}

pub fn is_in_j1(m: &GroupElement) -> bool {
    abc_from_mat(m).is_ok_and(|p| (p.a - p.b).abs() <= MEMBERSHIP_TOL)
}

pub fn is_in_j2(m: &GroupElement) -> bool {
    abc_from_mat(m).is_ok_and(|p| (p.a - 0.5).abs() <= MEMBERSHIP_TOL)
}

/// Named subgroups of GL(2, ℝ) that preserve the conjecture space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subgroup {
    T,
    H,
    G,
    J1,
    J2,
}

impl Subgroup {
    pub const ALL: [Subgroup; 5] = [
        Subgroup::T,
        Subgroup::H,
        Subgroup::G,
        Subgroup::J1,
        Subgroup::J2,
    ];

    pub fn contains(self, m: &GroupElement) -> bool {
        match self {
            Subgroup::T => is_in_t(m),
            Subgroup::H => is_in_h(m),
            Subgroup::G => is_in_g(m),
            Subgroup::J1 => is_in_j1(m),
            Subgroup::J2 => is_in_j2(m),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subgroup::T => "T",
            Subgroup::H => "H",
            Subgroup::G => "G",
            Subgroup::J1 => "J1",
            Subgroup::J2 => "J2",
        }
    }
}

/// Unique factorization `A = (λI)·C` with `λI ∈ 𝒯` and `C ∈ ℋ`.
pub fn decompose_th(m: &GroupElement) -> Result<(DilationParam, HParams), GroupError> {
    let ConjugatedParams { a, b, c } = abc_from_mat(m)?;
    let lambda = 2.0 * b;
    let p = (a + b - c) / lambda;
    let q = (a + b + c) / lambda;
    Ok((DilationParam::new(lambda)?, HParams::new(p, q)?))
}

/// Pointwise action `(f̄, ḡ) = (A₁₁f + A₁₂g, A₂₁f + A₂₂g)`.
pub fn act(m: &GroupElement, pair: &FunctionPair) -> FunctionPair {
    let [[a11, a12], [a21, a22]] = m.entries();
    let (f, g) = pair
        .f
        .iter()
        .zip(&pair.g)
        .map(|(&f, &g)| (a11 * f + a12 * g, a21 * f + a22 * g))
        .unzip();
    FunctionPair { f, g }
}

/// Returns a pair in the conjecture space fixed by `m`, if one exists.
///
/// A non-identity element of 𝒢 fixes some `f < g` exactly when `2b = 1` and
/// `2a ≠ 1`; the witness is the constant pair `½(f̄ − 1, f̄ + 1)` with
/// `f̄ = 2c/(1 − 2a)`.
pub fn fixed_point_witness(
    m: &GroupElement,
    samples: usize,
) -> Result<Option<FunctionPair>, GroupError> {
    if samples == 0 {
        return Err(GroupError::EmptySamples);
    }
    let ConjugatedParams { a, b, c } = abc_from_mat(m)?;
    if m.is_identity(MEMBERSHIP_TOL) {
        return Err(GroupError::Identity);
    }
    let two_b_is_one = (2.0 * b - 1.0).abs() <= MEMBERSHIP_TOL;
    let two_a_is_one = (2.0 * a - 1.0).abs() <= MEMBERSHIP_TOL;
    if !two_b_is_one || two_a_is_one {
        return Ok(None);
    }
    let f_bar = 2.0 * c / (1.0 - 2.0 * a);
    let g_bar = 1.0;
    Ok(Some(FunctionPair::constant(
        0.5 * (f_bar - g_bar),
        0.5 * (f_bar + g_bar),
        samples,
    )))
}

/// `‖(f, g)‖ = sup|f| + sup|g|` over the sample set.
pub fn pair_norm(pair: &FunctionPair) -> Result<f64, GroupError> {
    if pair.is_empty() {
        return Err(GroupError::EmptySamples);
    }
    let sup = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(sup(&pair.f) + sup(&pair.g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a11: f64, a12: f64, a21: f64, a22: f64) -> GroupElement {
        GroupElement::from_rows(a11, a12, a21, a22).unwrap()
    }

    fn abc(a: f64, b: f64, c: f64) -> GroupElement {
        mat_from_abc(ConjugatedParams::new(a, b, c).unwrap()).unwrap()
    }

    /// Multiplies the three factor matrices directly.
    fn triple_product(a: f64, b: f64, c: f64) -> GroupElement {
        let left = GroupElement {
            entries: [[1.0, -1.0], [1.0, 1.0]],
            det: 2.0,
        };
        let mid = GroupElement {
            entries: [[a, c], [0.0, b]],
            det: a * b,
        };
        let right = conjugator();
        (left * mid) * right
    }

    #[test]
    fn mat_from_abc_examples() {
        assert!(abc(0.5, 0.5, 0.0).is_identity(0.0));
        assert_eq!(abc(1.0, 0.5, 0.0).entries(), [[1.5, 0.5], [0.5, 1.5]]);
        assert_eq!(abc(1.0, 1.0, 1.0).entries(), [[1.0, 1.0], [-1.0, 3.0]]);
        for (a, b, c) in [(1.0, 0.5, 0.0), (1.0, 1.0, 1.0), (-2.0, 0.3, 4.0)] {
            assert!(abc(a, b, c).approx_eq(&triple_product(a, b, c), 1e-14));
        }
    }

    #[test]
    fn mat_from_abc_rejects_bad_params() {
        assert!(matches!(
            ConjugatedParams::new(0.0, 1.0, 0.0),
            Err(GroupError::Domain(_))
        ));
        assert!(matches!(
            ConjugatedParams::new(1.0, 0.0, 0.0),
            Err(GroupError::Domain(_))
        ));
        let raw = ConjugatedParams {
            a: 1.0,
            b: -1.0,
            c: 0.0,
        };
        assert!(mat_from_abc(raw).is_err());
    }

    #[test]
    fn abc_from_mat_examples() {
        let p = abc_from_mat(&GroupElement::identity()).unwrap();
        assert_eq!((p.a, p.b, p.c), (0.5, 0.5, 0.0));
        let p = abc_from_mat(&m(1.5, 0.5, 0.5, 1.5)).unwrap();
        assert_eq!((p.a, p.b, p.c), (1.0, 0.5, 0.0));
        assert!(matches!(
            abc_from_mat(&m(0.0, 1.0, 1.0, 0.0)),
            Err(GroupError::NotInG(_))
        ));
    }

    #[test]
    fn membership_examples() {
        let h = m(2.0, 2.0, 1.0, 3.0);
        assert!(is_in_h(&h));
        assert_eq!(h.det(), 4.0);
        assert_eq!(h.det(), h.trace() - 1.0);

        let s = m(3.0, 0.0, 0.0, 3.0);
        assert!(is_in_t(&s) && is_in_g(&s) && is_in_j1(&s));
        assert!(!is_in_j2(&s));
        let p = abc_from_mat(&s).unwrap();
        assert_eq!((p.a, p.b, p.c), (1.5, 1.5, 0.0));

        let r = m(1.0, 0.0, 0.0, -1.0);
        for sg in Subgroup::ALL {
            assert!(
                !sg.contains(&r),
                "{} should not contain diag(1,-1)",
                sg.name()
            );
        }
    }

    #[test]
    fn singular_matrices_are_rejected() {
        assert!(matches!(
            GroupElement::from_rows(1.0, 2.0, 2.0, 4.0),
            Err(GroupError::Singular(_))
        ));
        assert!(GroupElement::from_rows(1e-7, 0.0, 0.0, 1e-7).is_err());
        assert!(GroupElement::from_rows(1e-5, 0.0, 0.0, 1e-5).is_ok());
    }

    #[test]
    fn decompose_examples() {
        let (t, h) = decompose_th(&GroupElement::identity()).unwrap();
        assert_eq!((t.lambda, h.p, h.q), (1.0, 1.0, 1.0));
        assert!(h.matrix().is_identity(0.0));

        let (t, h) = decompose_th(&m(1.5, 0.5, 0.5, 1.5)).unwrap();
        assert_eq!((t.lambda, h.p, h.q), (1.0, 1.5, 1.5));

        let (t, h) = decompose_th(&m(1.0, 1.0, -1.0, 3.0)).unwrap();
        assert_eq!((t.lambda, h.p, h.q), (2.0, 0.5, 1.5));
        let back = t.matrix() * h.matrix();
        assert!(back.approx_eq(&m(1.0, 1.0, -1.0, 3.0), ROUNDTRIP_TOL));

        assert!(decompose_th(&m(0.0, 1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn act_examples() {
        let xs = [0.0, 1.0, 2.0];
        let pair = FunctionPair::sample(&xs, |x| *x, |x| x + 1.0);
        assert_eq!(act(&GroupElement::identity(), &pair), pair);

        let doubled = act(&GroupElement::scalar(2.0).unwrap(), &pair);
        assert_eq!(doubled.f(), &[0.0, 2.0, 4.0]);
        assert_eq!(doubled.g(), &[2.0, 4.0, 6.0]);
        assert_eq!(doubled.difference(), vec![2.0; 3]);

        let h = m(2.0, 2.0, 1.0, 3.0);
        let pair = FunctionPair::sample(&xs, |x| x * x - 3.0, |x| 5.0 * x);
        assert_eq!(act(&h, &pair).difference(), pair.difference());
    }

    #[test]
    fn fixed_point_examples() {
        let a = abc(1.0, 0.5, 1.0);
        let w = fixed_point_witness(&a, 4)
            .unwrap()
            .expect("2b=1, 2a≠1 has a witness");
        assert_eq!(w.f(), &[-1.5; 4]);
        assert_eq!(w.g(), &[-0.5; 4]);
        assert!(act(&a, &w).max_abs_diff(&w) <= ROUNDTRIP_TOL);
        assert!(w.is_conjecture());

        assert_eq!(fixed_point_witness(&abc(0.5, 0.5, 1.0), 4).unwrap(), None);
        assert_eq!(fixed_point_witness(&abc(1.0, 1.0, 0.0), 4).unwrap(), None);
        assert_eq!(
            fixed_point_witness(&GroupElement::identity(), 4),
            Err(GroupError::Identity)
        );
    }

    #[test]
    fn pair_norm_examples() {
        let xs = [-1.0, 0.0, 2.0];
        assert_eq!(
            pair_norm(&FunctionPair::sample(&xs, |_| 0.0, |_| 0.0)).unwrap(),
            0.0
        );
        let pair = FunctionPair::sample(&xs, |x| *x, |x| -x);
        assert_eq!(pair_norm(&pair).unwrap(), 4.0);
        let scaled = act(&GroupElement::scalar(3.0).unwrap(), &pair);
        assert_eq!(pair_norm(&scaled).unwrap(), 12.0);
        assert_eq!(
            pair_norm(&FunctionPair::constant(0.0, 0.0, 0)),
            Err(GroupError::EmptySamples)
        );
    }

    #[test]
    fn negative_identity_breaks_invariance() {
        let pair = FunctionPair::constant(0.0, 1.0, 3);
        let flipped = act(&GroupElement::scalar(-1.0).unwrap(), &pair);
        assert!(pair.is_conjecture());
        assert!(!flipped.is_conjecture());
    }
}
