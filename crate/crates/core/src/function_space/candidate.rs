use std::fmt;

use serde::{Deserialize, Serialize};

use super::basis::{is_atomic, EvalContext};
use super::snap::as_small_rational;
use super::{FeatureBasis, FunctionSpaceError, Result};
use crate::dataset::Scalar;

/// Coefficients below this magnitude count as zero when canonicalizing.
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Strict,
    NonStrict,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Strict => "<",
            Relation::NonStrict => "≤",
        }
    }
}

/// `f_θ = ⟨θ_f, φ⟩` against `g_θ = ⟨θ_g, φ⟩` over a shared basis `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConjecture {
    pub basis: FeatureBasis,
    pub theta_f: Vec<f64>,
    pub theta_g: Vec<f64>,
    pub relation: Relation,
}

impl CandidateConjecture {
    pub fn new(
        basis: FeatureBasis,
        theta_f: Vec<f64>,
        theta_g: Vec<f64>,
        relation: Relation,
    ) -> Result<Self> {
        let n = basis.len();
        if theta_f.len() != n || theta_g.len() != n {
            return Err(FunctionSpaceError::Domain(format!(
                "coefficient lengths {}/{} do not match {n} basis entries",
                theta_f.len(),
                theta_g.len()
            )));
        }
        if theta_f.iter().chain(&theta_g).any(|t| !t.is_finite()) {
            return Err(FunctionSpaceError::Domain("non-finite coefficient".into()));
        }
        if theta_f.iter().chain(&theta_g).all(|&t| t == 0.0) {
            return Err(FunctionSpaceError::Degenerate("both sides are zero".into()));
        }
        Ok(CandidateConjecture {
            basis,
            theta_f,
            theta_g,
            relation,
        })
    }

    /// Splits `d = θ_g − θ_f` into its positive part (g side) and negative part (f side).
    pub fn from_difference(basis: FeatureBasis, d: &[f64], relation: Relation) -> Result<Self> {
        let theta_g = d.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let theta_f = d.iter().map(|&x| if x < 0.0 { -x } else { 0.0 }).collect();
        Self::new(basis, theta_f, theta_g, relation)
    }

    pub fn difference(&self) -> Vec<f64> {
        self.theta_g
            .iter()
            .zip(&self.theta_f)
            .map(|(g, f)| g - f)
            .collect()
    }

    /// `g − f` from precomputed features.
    pub fn margin_from_features(&self, phi: &[f64]) -> f64 {
        self.theta_g
            .iter()
            .zip(&self.theta_f)
            .zip(phi)
            .map(|((g, f), p)| (g - f) * p)
            .sum()
    }

    pub fn record(&self) -> Result<ConjectureRecord> {
        Ok(ConjectureRecord {
            basis_id: self.basis.id.clone(),
            theta_f: self.theta_f.clone(),
            theta_g: self.theta_g.clone(),
            relation: self.relation,
            canonical_key: canonical_difference(self)?.key(),
            text: render(self)?,
        })
    }
}

impl fmt::Display for CandidateConjecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match render(self) {
            Ok(text) => f.write_str(&text),
            Err(_) => write!(f, "<degenerate candidate over {}>", self.basis.id),
        }
    }
}

/// One line of `conjectures.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureRecord {
    pub basis_id: String,
    pub theta_f: Vec<f64>,
    pub theta_g: Vec<f64>,
    pub relation: Relation,
    pub canonical_key: String,
    pub text: String,
}

impl ConjectureRecord {
    pub fn candidate(&self, basis: &FeatureBasis) -> Result<CandidateConjecture> {
        if basis.id != self.basis_id {
            return Err(FunctionSpaceError::UnknownBasis(self.basis_id.clone()));
        }
        CandidateConjecture::new(
            basis.clone(),
            self.theta_f.clone(),
            self.theta_g.clone(),
            self.relation,
        )
    }
}

/// `(f_θ(x), g_θ(x))`.
pub fn eval_candidate(
    c: &CandidateConjecture,
    x: &[Scalar],
    ctx: &EvalContext,
) -> Result<(f64, f64)> {
    let phi = c.basis.eval_f64(x, ctx)?;
    let dot = |t: &[f64]| t.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>();
    Ok((dot(&c.theta_f), dot(&c.theta_g)))
}

/// The ray of `θ_g − θ_f`, scaled to max-abs 1 with the first nonzero
/// coefficient positive; `orientation` is the sign that was removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalKey {
    pub vector: Vec<f64>,
    pub orientation: i8,
}

impl CanonicalKey {
    /// The normalized difference before the sign convention is applied.
    pub fn ray(&self) -> Vec<f64> {
        self.vector
            .iter()
            .map(|v| v * self.orientation as f64)
            .collect()
    }

    /// Stable text key used for deduplication.
    pub fn key(&self) -> String {
        let parts: Vec<String> = self
            .vector
            .iter()
            .map(|v| {
                let s = format!("{v:.9}");
                if s.trim_start_matches('-')
                    .chars()
                    .all(|c| c == '0' || c == '.')
                {
                    "0.000000000".to_string()
                } else {
                    s
                }
            })
            .collect();
        format!(
            "{}[{}]",
            if self.orientation > 0 { '+' } else { '-' },
            parts.join(",")
        )
    }
}

pub fn canonical_difference(c: &CandidateConjecture) -> Result<CanonicalKey> {
    let d = c.difference();
    let max = d.iter().fold(0f64, |m, x| m.max(x.abs()));
    if max <= ZERO_TOL {
        return Err(FunctionSpaceError::Degenerate("θ_g − θ_f is zero".into()));
    }
    let first = d
        .iter()
        .find(|x| x.abs() > ZERO_TOL * max)
        .copied()
        .unwrap_or(1.0);
    let orientation: i8 = if first > 0.0 { 1 } else { -1 };
    let scale = orientation as f64 / max;
    Ok(CanonicalKey {
        vector: d.iter().map(|x| x * scale).collect(),
        orientation,
    })
}

fn format_coefficient(m: f64) -> String {
    if m.fract() == 0.0 && m.abs() < 1e15 {
        format!("{}", m as i64)
    } else if let Some(r) = as_small_rational(m, 1000) {
        format!("{}/{}", r.numer(), r.denom())
    } else {
        format!("{m}")
    }
}

fn needs_parens(label: &str) -> bool {
    let mut depth = 0i32;
    for c in label.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' | '-' if depth == 0 => return true,
            _ => {}
        }
    }
    false
}

fn render_side(theta: &[f64], labels: &[String]) -> String {
    let mut out = String::new();
    for (t, label) in theta.iter().zip(labels) {
        if *t == 0.0 {
            continue;
        }
        match (out.is_empty(), *t < 0.0) {
            (true, true) => out.push('-'),
            (true, false) => {}
            (false, true) => out.push_str(" - "),
            (false, false) => out.push_str(" + "),
        }
        let m = t.abs();
        let wrap = needs_parens(label) && !is_atomic(label) && (m != 1.0 || *t < 0.0);
        if m != 1.0 {
            out.push_str(&format_coefficient(m));
            out.push('·');
        }
        if wrap {
            out.push('(');
            out.push_str(label);
            out.push(')');
        } else {
            out.push_str(label);
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// `f-side REL g-side` in basis order, e.g. `π(a+b) ≤ π(a)+π(b)`.
pub fn render(c: &CandidateConjecture) -> Result<String> {
    if c.theta_g.iter().all(|&t| t == 0.0) {
        return Err(FunctionSpaceError::Degenerate("g side is zero".into()));
    }
    if c.theta_f == c.theta_g {
        return Err(FunctionSpaceError::Degenerate("both sides coincide".into()));
    }
    let labels = c.basis.labels();
    Ok(format!(
        "{} {} {}",
        render_side(&c.theta_f, &labels),
        c.relation.symbol(),
        render_side(&c.theta_g, &labels)
    ))
}

fn parse_error(text: &str, reason: impl Into<String>) -> FunctionSpaceError {
    FunctionSpaceError::Parse {
        text: text.to_string(),
        reason: reason.into(),
    }
}

fn parse_coefficient(s: &str) -> Option<f64> {
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.parse().ok()?;
        let d: i64 = d.parse().ok()?;
        return (d != 0).then(|| n as f64 / d as f64);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Splits a side into signed terms at top-level ` + ` / ` - `.
fn split_terms(side: &str) -> Vec<(f64, &str)> {
    let (mut sign, body) = match side.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, side),
    };
    let bytes = body.as_bytes();
    let mut terms = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b' ' if depth == 0
                && i + 2 < bytes.len()
                && bytes[i + 2] == b' '
                && matches!(bytes[i + 1], b'+' | b'-') =>
            {
                terms.push((sign, &body[start..i]));
                sign = if bytes[i + 1] == b'-' { -1.0 } else { 1.0 };
                start = i + 3;
                i += 3;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    terms.push((sign, &body[start..]));
    terms
}

fn parse_side(text: &str, side: &str, labels: &[String]) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; labels.len()];
    if side == "0" {
        return Ok(theta);
    }
    let find = |s: &str| labels.iter().position(|l| l == s);
    for (sign, term) in split_terms(side) {
        let unwrapped = term.strip_prefix('(').and_then(|r| r.strip_suffix(')'));
        let (coef, idx) = if let Some(idx) = find(term).or_else(|| unwrapped.and_then(find)) {
            (1.0, idx)
        } else {
            let (head, rest) = term
                .split_once('·')
                .ok_or_else(|| parse_error(text, format!("unknown term `{term}`")))?;
            let coef = parse_coefficient(head)
                .ok_or_else(|| parse_error(text, format!("bad coefficient `{head}`")))?;
            let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')'));
            let idx = find(rest)
                .or_else(|| inner.and_then(find))
                .ok_or_else(|| parse_error(text, format!("unknown term `{rest}`")))?;
            (coef, idx)
        };
        theta[idx] += sign * coef;
    }
    Ok(theta)
}

/// Inverse of [`render`] over a known basis.
pub fn parse(text: &str, basis: &FeatureBasis) -> Result<CandidateConjecture> {
    let (lhs, relation, rhs) = if let Some((l, r)) = text.split_once(" ≤ ") {
        (l, Relation::NonStrict, r)
    } else if let Some((l, r)) = text.split_once(" <= ") {
        (l, Relation::NonStrict, r)
    } else if let Some((l, r)) = text.split_once(" < ") {
        (l, Relation::Strict, r)
    } else {
        return Err(parse_error(text, "no relation symbol"));
    };
    let labels = basis.labels();
    let theta_f = parse_side(text, lhs.trim(), &labels)?;
    let theta_g = parse_side(text, rhs.trim(), &labels)?;
    CandidateConjecture::new(basis.clone(), theta_f, theta_g, relation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{builtin_basis, BasisFunction};
    use crate::group_algebra::{self, FunctionPair, Subgroup};
    use crate::number_theory_data::PrimePiTable;
    use proptest::prelude::*;

    fn ab_basis() -> FeatureBasis {
        // π(e₁), π(e₂)
        FeatureBasis::new(
            "pi-e",
            vec!["a".into(), "b".into()],
            2,
            1,
            vec![BasisFunction::pi_e(1), BasisFunction::pi_e(2)],
        )
        .unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let table = PrimePiTable::build(100).unwrap();
        let ctx = EvalContext::with_table(&table);
        let c =
            CandidateConjecture::new(ab_basis(), vec![1.0, 0.0], vec![0.0, 1.0], Relation::Strict)
                .unwrap();
        assert_eq!(
            eval_candidate(&c, &[Scalar::Int(2), Scalar::Int(3)], &ctx).unwrap(),
            (3.0, 3.0)
        );
        let same = CandidateConjecture::new(
            ab_basis(),
            vec![0.3, -2.0],
            vec![0.3, -2.0],
            Relation::Strict,
        )
        .unwrap();
        let zero_f =
            CandidateConjecture::new(ab_basis(), vec![0.0, 0.0], vec![1.0, 1.0], Relation::Strict)
                .unwrap();
        for a in 2..10 {
            for b in 2..10 {
                let x = [Scalar::Int(a), Scalar::Int(b)];
                let (f, g) = eval_candidate(&same, &x, &ctx).unwrap();
                assert_eq!(f, g);
                assert_eq!(eval_candidate(&zero_f, &x, &ctx).unwrap().0, 0.0);
            }
        }
        assert!(
            CandidateConjecture::new(ab_basis(), vec![0.0; 2], vec![0.0; 2], Relation::Strict)
                .is_err()
        );
        assert!(
            CandidateConjecture::new(ab_basis(), vec![1.0], vec![0.0; 2], Relation::Strict)
                .is_err()
        );
    }

    #[test]
    fn canonical_examples() {
        let c =
            CandidateConjecture::new(ab_basis(), vec![1.0, 0.0], vec![0.0, 1.0], Relation::Strict)
                .unwrap();
        let k = canonical_difference(&c).unwrap();
        assert_eq!(k.vector, vec![1.0, -1.0]);
        assert_eq!(k.orientation, -1);
        assert_eq!(k.ray(), vec![-1.0, 1.0]);
        assert_eq!(k.key(), "-[1.000000000,-1.000000000]");
        let zero =
            CandidateConjecture::new(ab_basis(), vec![2.0, 1.0], vec![2.0, 1.0], Relation::Strict)
                .unwrap();
        assert!(matches!(
            canonical_difference(&zero),
            Err(FunctionSpaceError::Degenerate(_))
        ));
    }

    #[test]
    fn render_examples() {
        let basis = builtin_basis("pi-ab").unwrap();
        let hl = CandidateConjecture::new(
            basis.clone(),
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            Relation::NonStrict,
        )
        .unwrap();
        assert_eq!(render(&hl).unwrap(), "π(a+b) ≤ π(a)+π(b)");
        let two = CandidateConjecture::new(
            basis.clone(),
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
            Relation::Strict,
        )
        .unwrap();
        assert_eq!(render(&two).unwrap(), "π(ab) < 2·π(a+b)");
        let sum = CandidateConjecture::new(
            basis.clone(),
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.0],
            Relation::Strict,
        )
        .unwrap();
        assert_eq!(render(&sum).unwrap(), "π(ab) < 1/2·(π(a)+π(b))");
        let g_zero =
            CandidateConjecture::new(ab_basis(), vec![1.0, 0.0], vec![0.0, 0.0], Relation::Strict)
                .unwrap();
        assert!(matches!(
            render(&g_zero),
            Err(FunctionSpaceError::Degenerate(_))
        ));
        let groups = builtin_basis("groups").unwrap();
        let t2 = CandidateConjecture::new(
            groups.clone(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 5.0 / 12.0, 0.0, 1.0, 0.0],
            Relation::NonStrict,
        )
        .unwrap();
        assert_eq!(
            render(&t2).unwrap(),
            "diameter ≤ 5/12·(tau1+tau2) + log2_order"
        );
        assert_eq!(parse(&render(&t2).unwrap(), &groups).unwrap(), t2);
        let neg = CandidateConjecture::new(
            basis.clone(),
            vec![-1.0, 0.0, 0.25],
            vec![0.0, 3.0, -1.5],
            Relation::Strict,
        )
        .unwrap();
        assert_eq!(
            render(&neg).unwrap(),
            "-(π(a)+π(b)) + 1/4·π(a+b) < 3·π(ab) - 3/2·π(a+b)"
        );
        assert_eq!(parse(&render(&neg).unwrap(), &basis).unwrap(), neg);
    }

    #[test]
    fn parse_rejects_garbage() {
        let basis = builtin_basis("pi-ab").unwrap();
        assert!(parse("π(a) < π(b)", &basis).is_err());
        assert!(parse("π(ab) = π(a+b)", &basis).is_err());
        assert!(parse("x·π(ab) < π(a+b)", &basis).is_err());
        assert_eq!(
            parse("π(ab) <= π(a+b)", &basis).unwrap().relation,
            Relation::NonStrict
        );
    }

    #[test]
    fn record_round_trip() {
        let basis = builtin_basis("pi-ab").unwrap();
        let c = CandidateConjecture::from_difference(
            basis.clone(),
            &[-1.0, 1.0, 0.0],
            Relation::Strict,
        )
        .unwrap();
        assert_eq!(c.theta_f, vec![1.0, 0.0, 0.0]);
        assert_eq!(c.theta_g, vec![0.0, 1.0, 0.0]);
        let rec = c.record().unwrap();
        assert_eq!(rec.text, "π(a)+π(b) < π(ab)");
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"relation\":\"strict\""));
        let back: ConjectureRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.candidate(&basis).unwrap(), c);
    }

    fn pair_of(c: &CandidateConjecture, rows: &[Vec<f64>]) -> FunctionPair {
        let dot = |t: &[f64], p: &[f64]| t.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
        let f = rows.iter().map(|p| dot(&c.theta_f, p)).collect();
        let g = rows.iter().map(|p| dot(&c.theta_g, p)).collect();
        FunctionPair::new(f, g).unwrap()
    }

    fn shared_table() -> &'static PrimePiTable {
        static TABLE: std::sync::OnceLock<PrimePiTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| PrimePiTable::build(4_000_000).unwrap())
    }

    fn coeffs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 3)
    }

    proptest! {
        #[test]
        fn permutation_invariance(a in 2i64..150, b in 2i64..150, c in 2i64..150,
                                  tf in prop::collection::vec(-3.0f64..3.0, 5),
                                  tg in prop::collection::vec(-3.0f64..3.0, 5)) {
            let ctx = EvalContext::with_table(shared_table());
            let basis = builtin_basis("pi-abc").unwrap();
            let cand = CandidateConjecture::new(basis, tf, tg, Relation::Strict).unwrap();
            let base = eval_candidate(&cand, &[Scalar::Int(a), Scalar::Int(b), Scalar::Int(c)], &ctx).unwrap();
            for p in [[b, a, c], [c, b, a], [a, c, b], [b, c, a], [c, a, b]] {
                let x: Vec<Scalar> = p.iter().copied().map(Scalar::Int).collect();
                let v = eval_candidate(&cand, &x, &ctx).unwrap();
                prop_assert!((v.0 - base.0).abs() <= 1e-9 * (1.0 + base.0.abs()));
                prop_assert!((v.1 - base.1).abs() <= 1e-9 * (1.0 + base.1.abs()));
            }
        }

        #[test]
        fn linearity(a in 2i64..2000, b in 2i64..2000, t1 in coeffs(), t2 in coeffs(),
                     u1 in coeffs(), u2 in coeffs(), s in -3.0f64..3.0, r in -3.0f64..3.0) {
            let ctx = EvalContext::with_table(shared_table());
            let basis = builtin_basis("pi-ab").unwrap();
            let x = [Scalar::Int(a), Scalar::Int(b)];
            let mk = |f: &[f64], g: &[f64]| {
                let f = if f.iter().all(|v| *v == 0.0) { vec![1.0, 0.0, 0.0] } else { f.to_vec() };
                CandidateConjecture::new(basis.clone(), f, g.to_vec(), Relation::Strict).unwrap()
            };
            let combo = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(p, q)| s * p + r * q).collect::<Vec<_>>();
            let c1 = mk(&t1, &u1);
            let c2 = mk(&t2, &u2);
            let mix = mk(&combo(&c1.theta_f, &c2.theta_f), &combo(&c1.theta_g, &c2.theta_g));
            let (f1, g1) = eval_candidate(&c1, &x, &ctx).unwrap();
            let (f2, g2) = eval_candidate(&c2, &x, &ctx).unwrap();
            let (fm, gm) = eval_candidate(&mix, &x, &ctx).unwrap();
            let scale = 1.0 + f1.abs() + f2.abs() + g1.abs() + g2.abs();
            prop_assert!((fm - (s * f1 + r * f2)).abs() <= 1e-10 * scale * 1e3);
            prop_assert!((gm - (s * g1 + r * g2)).abs() <= 1e-10 * scale * 1e3);
        }

        #[test]
        fn dedup_soundness(tf in coeffs(), tg in coeffs(), seed in 0u64..1000) {
            prop_assume!(tf.iter().zip(&tg).any(|(f, g)| (f - g).abs() > 1e-3));
            let basis = builtin_basis("pi-ab").unwrap();
            let c = CandidateConjecture::new(basis.clone(), tf, tg, Relation::Strict).unwrap();
            let key = canonical_difference(&c).unwrap();
            let mut sampler = group_algebra::properties::Sampler::new(seed);
            let m = sampler.element(Subgroup::G);
            let params = group_algebra::abc_from_mat(&m).unwrap();
            // the action on coefficient vectors mirrors the action on the pair
            let fbar: Vec<f64> = c.theta_f.iter().zip(&c.theta_g)
                .map(|(f, g)| m.get(0, 0) * f + m.get(0, 1) * g).collect();
            let gbar: Vec<f64> = c.theta_f.iter().zip(&c.theta_g)
                .map(|(f, g)| m.get(1, 0) * f + m.get(1, 1) * g).collect();
            let moved = CandidateConjecture::new(basis, fbar, gbar, Relation::Strict).unwrap();
            let moved_key = canonical_difference(&moved).unwrap();
            prop_assert_eq!(key.orientation, moved_key.orientation);
            for (u, v) in key.vector.iter().zip(&moved_key.vector) {
                prop_assert!((u - v).abs() <= 1e-10, "{:?} vs {:?} under {:?}", key, moved_key, params);
            }
            // the evaluated pair moves the same way
            let rows = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 4.0]];
            let acted = group_algebra::act(&m, &pair_of(&c, &rows));
            let direct = pair_of(&moved, &rows);
            prop_assert!(acted.max_abs_diff(&direct) <= 1e-9);
        }

        #[test]
        fn render_parse_round_trip(d in prop::collection::vec(-12i64..=12, 3), den in 1i64..=12, strict in any::<bool>()) {
            prop_assume!(d.iter().any(|&x| x > 0));
            let basis = builtin_basis("pi-ab").unwrap();
            let rel = if strict { Relation::Strict } else { Relation::NonStrict };
            let diff: Vec<f64> = d.iter().map(|&x| x as f64 / den as f64).collect();
            let c = CandidateConjecture::from_difference(basis.clone(), &diff, rel).unwrap();
            let text = render(&c).unwrap();
            prop_assert_eq!(parse(&text, &basis).unwrap(), c);
        }
    }
}
