//! The function class searched by the oracle: a fixed list of symbolic basis
//! functions, linear candidates over them, and their text form.

mod basis;
mod candidate;
mod snap;

use std::cell::Cell;
use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetRow, Scalar, Value};

pub use basis::{Argument, BasisFunction, EvalContext, Hook, Outer, PiSource, MAX_ARITY};
pub use candidate::{
    canonical_difference, eval_candidate, parse, render, CandidateConjecture, CanonicalKey,
    ConjectureRecord, Relation,
};
pub use snap::{as_small_rational, nearest_rational, ratio_to_f64, snap_rational, SnapResult};

use basis::EvalFailure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionSpaceError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid basis `{basis}`: {reason}")]
    InvalidBasis { basis: String, reason: String },
    #[error("basis entry `{entry}` failed at {input}: {reason}")]
    Evaluation {
        entry: String,
        input: String,
        reason: String,
    },
    #[error("basis entry `{entry}` needs π({argument}) but the prime table stops at {limit}")]
    OutOfTable {
        entry: String,
        argument: u64,
        limit: u64,
    },
    #[error("degenerate candidate: {0}")]
    Degenerate(String),
    #[error("cannot parse `{text}`: {reason}")]
    Parse { text: String, reason: String },
    #[error("unknown basis `{0}`")]
    UnknownBasis(String),
}

pub type Result<T> = std::result::Result<T, FunctionSpaceError>;

/// A finite slice of the function class: `entries` over named raw variables,
/// with argument degree at most `d1` and outer powers at most `d2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasis {
    pub id: String,
    pub variables: Vec<String>,
    pub d1: u32,
    pub d2: u32,
    pub entries: Vec<BasisFunction>,
}

impl FeatureBasis {
    pub fn new(
        id: impl Into<String>,
        variables: Vec<String>,
        d1: u32,
        d2: u32,
        entries: Vec<BasisFunction>,
    ) -> Result<Self> {
        let basis = FeatureBasis {
            id: id.into(),
            variables,
            d1,
            d2,
            entries,
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn arity(&self) -> usize {
        self.variables.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.label(&self.variables))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(FunctionSpaceError::InvalidBasis {
                basis: self.id.clone(),
                reason,
            })
        };
        let n = self.arity();
        if n == 0 || n > MAX_ARITY {
            return bad(format!("arity {n} outside 1..={MAX_ARITY}"));
        }
        if self.d1 == 0 || self.d2 == 0 {
            return bad("d1 and d2 must be at least 1".into());
        }
        if self.entries.is_empty() {
            return bad("no entries".into());
        }
        for entry in &self.entries {
            let label = entry.label_checked(&self.variables).map_err(|r| {
                FunctionSpaceError::InvalidBasis {
                    basis: self.id.clone(),
                    reason: r,
                }
            })?;
            if let Some(cols) = &entry.columns {
                let mut sorted = cols.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if cols.is_empty() || sorted.len() != cols.len() {
                    return bad(format!("`{label}` has empty or repeated columns"));
                }
            }
            let width = entry.selected_count(n);
            if let Argument::Symmetric { exponents } | Argument::SqrtShift { exponents } =
                &entry.argument
            {
                if exponents.len() > width {
                    return bad(format!(
                        "`{label}` uses e_{} of {width} variables",
                        exponents.len()
                    ));
                }
            }
            if entry.argument_degree() > self.d1 {
                return bad(format!(
                    "`{label}` has degree {} > d1 = {}",
                    entry.argument_degree(),
                    self.d1
                ));
            }
            match entry.outer {
                Outer::Pow(0) => return bad(format!("`{label}` has power 0")),
                o if o.degree() > self.d2 => {
                    return bad(format!(
                        "`{label}` has power {} > d2 = {}",
                        o.degree(),
                        self.d2
                    ))
                }
                _ => {}
            }
        }
        let labels = self.labels();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return bad(format!("duplicate entry `{l}`"));
            }
        }
        Ok(())
    }

    /// Evaluates every entry at `row`, appending to `out`.
    pub fn eval_into(&self, row: &[Scalar], ctx: &EvalContext, out: &mut Vec<Value>) -> Result<()> {
        if row.len() != self.arity() {
            return Err(FunctionSpaceError::Domain(format!(
                "row has {} values, basis `{}` expects {}",
                row.len(),
                self.id,
                self.arity()
            )));
        }
        for entry in &self.entries {
            let v = entry
                .eval(row, ctx)
                .map_err(|e| self.failure(entry, row, e))?;
            out.push(v);
        }
        Ok(())
    }

    pub fn eval(&self, row: &[Scalar], ctx: &EvalContext) -> Result<Vec<Value>> {
        let mut out = Vec::with_capacity(self.len());
        self.eval_into(row, ctx, &mut out)?;
        Ok(out)
    }

    pub fn eval_f64(&self, row: &[Scalar], ctx: &EvalContext) -> Result<Vec<f64>> {
        Ok(self
            .eval(row, ctx)?
            .into_iter()
            .map(Value::as_f64)
            .collect())
    }

    fn failure(&self, entry: &BasisFunction, row: &[Scalar], e: EvalFailure) -> FunctionSpaceError {
        let label = entry.label(&self.variables);
        let input = DatasetRow {
            values: row.to_vec(),
        }
        .to_string();
        match e {
            EvalFailure::Domain(reason) => FunctionSpaceError::Evaluation {
                entry: label,
                input,
                reason,
            },
            EvalFailure::NoTable => FunctionSpaceError::Evaluation {
                entry: label,
                input,
                reason: "no prime table supplied".into(),
            },
            EvalFailure::OutOfTable { argument, limit } => FunctionSpaceError::OutOfTable {
                entry: label,
                argument,
                limit,
            },
        }
    }

    pub fn uses_pi(&self) -> bool {
        self.entries.iter().any(|e| e.hook != Hook::None)
    }

    /// Smallest prime-table limit that covers every `π` argument on the box
    /// `[lower, upper]`. Every supported argument is monotone in each variable
    /// on nonnegative inputs, so the upper corner decides.
    pub fn required_pi_limit(&self, upper: &[i64]) -> Result<u64> {
        let max = Cell::new(0u64);
        let ctx = EvalContext {
            pi: PiSource::Probe(&max),
        };
        let row: Vec<Scalar> = upper.iter().copied().map(Scalar::Int).collect();
        self.eval(&row, &ctx)?;
        Ok(max.get())
    }

    /// Evaluates at every corner of an integer box so domain violations
    /// (e.g. `ln 0`) surface before a long run.
    pub fn check_box(&self, bounds: &[(i64, i64)], ctx: &EvalContext) -> Result<()> {
        let k = bounds.len();
        let mut row = vec![Scalar::Int(0); k];
        for mask in 0u32..(1 << k) {
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                row[i] = Scalar::Int(if mask >> i & 1 == 1 { hi } else { lo });
            }
            self.eval(&row, ctx)?;
        }
        Ok(())
    }

    /// Evaluates every row; used for finite catalogs.
    pub fn check_rows<'r>(
        &self,
        rows: impl IntoIterator<Item = &'r DatasetRow>,
        ctx: &EvalContext,
    ) -> Result<()> {
        rows.into_iter()
            .try_for_each(|r| self.eval(&r.values, ctx).map(drop))
    }
}

/// `e₁..e_{d1}` of `x`.
pub fn symmetric_features(x: &[f64], d1: usize) -> Result<Vec<f64>> {
    if d1 > x.len() {
        return Err(FunctionSpaceError::Domain(format!(
            "d1 = {d1} exceeds {} variables",
            x.len()
        )));
    }
    Ok(basis::elementary_symmetric(x, d1))
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Column names of the group catalog, in dataset order.
pub const GROUP_COLUMNS: [&str; 6] = ["tau1", "tau2", "o1", "o2", "log2_order", "diameter"];

/// Identifiers accepted by [`builtin_basis`].
pub const BUILTIN_BASES: [&str; 6] = [
    "pi-ab",
    "pi-abc",
    "pi-abc-chi",
    "pi-x-poly",
    "pi-x-shift",
    "groups",
];

/// Named bases shipped with the engine.
pub fn builtin_basis(id: &str) -> Result<FeatureBasis> {
    use BasisFunction as B;
    let (vars, d1, d2, entries) = match id {
        "pi-ab" => (
            names(&["a", "b"]),
            2,
            1,
            vec![B::pi_each_sum(), B::pi_e(2), B::pi_e(1)],
        ),
        "pi-abc" => (
            names(&["a", "b", "c"]),
            3,
            1,
            vec![
                B::pi_each_sum(),
                B::pi_e(1),
                B::pi_e(2),
                B::pi_e(3),
                B::pi_each_product(),
            ],
        ),
        "pi-abc-chi" => (
            names(&["a", "b", "c"]),
            3,
            1,
            vec![
                B::pi_e(1),
                B::pi_e(2),
                B::pi_e(3),
                B::e(1),
                B::e(2),
                B::e(3),
            ],
        ),
        "pi-x-poly" => (
            names(&["x"]),
            1,
            3,
            vec![
                B::pi_e(1).with_outer(Outer::Pow(2)),
                B::e(1).with_outer(Outer::Pow(3)),
                B::e(1),
                B::constant(),
            ],
        ),
        "pi-x-shift" => (
            names(&["x"]),
            1,
            1,
            vec![
                B::pi_e(1),
                B {
                    argument: Argument::SqrtShift { exponents: vec![1] },
                    hook: Hook::Pi,
                    outer: Outer::Identity,
                    columns: None,
                },
                B::e(1).with_outer(Outer::Sqrt),
                B::constant(),
            ],
        ),
        "groups" => (
            names(&GROUP_COLUMNS),
            1,
            1,
            vec![
                B::e(1).with_columns(&[5]),
                B::e(1).with_columns(&[0, 1]),
                B::e(1).with_columns(&[2, 3]),
                B::e(1).with_columns(&[4]),
                B::constant(),
            ],
        ),
        other => return Err(FunctionSpaceError::UnknownBasis(other.to_string())),
    };
    FeatureBasis::new(id, vars, d1, d2, entries)
}

/// Bases keyed by id, the on-disk form of `bases.json`.
pub fn bases_document<'b>(
    bases: impl IntoIterator<Item = &'b FeatureBasis>,
) -> BTreeMap<String, FeatureBasis> {
    bases
        .into_iter()
        .map(|b| (b.id.clone(), b.clone()))
        .collect()
}

/// Writes the raw columns followed by one column per basis entry.
pub fn write_features_csv<'r, W: Write>(
    mut out: W,
    basis: &FeatureBasis,
    rows: impl IntoIterator<Item = &'r DatasetRow>,
    ctx: &EvalContext,
) -> std::io::Result<()> {
    let mut header = basis.variables.clone();
    header.extend(basis.labels());
    writeln!(out, "{}", header.join(","))?;
    let mut vals = Vec::with_capacity(basis.len());
    for row in rows {
        vals.clear();
        basis
            .eval_into(&row.values, ctx, &mut vals)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let fields: Vec<String> = row
            .values
            .iter()
            .map(Scalar::to_string)
            .chain(vals.iter().map(Value::to_string))
            .collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_theory_data::PrimePiTable;

    #[test]
    fn symmetric_feature_examples() {
        assert_eq!(symmetric_features(&[2.0, 3.0], 2).unwrap(), vec![5.0, 6.0]);
        assert_eq!(
            symmetric_features(&[1.0, 2.0, 3.0], 3).unwrap(),
            vec![6.0, 11.0, 6.0]
        );
        assert_eq!(symmetric_features(&[4.5], 1).unwrap(), vec![4.5]);
        assert!(matches!(
            symmetric_features(&[1.0], 2),
            Err(FunctionSpaceError::Domain(_))
        ));
    }

    #[test]
    fn builtins_are_valid() {
        for id in BUILTIN_BASES {
            let b = builtin_basis(id).unwrap();
            assert_eq!(b.id, id);
            b.validate().unwrap();
        }
        assert_eq!(
            builtin_basis("pi-ab").unwrap().labels(),
            vec!["π(a)+π(b)", "π(ab)", "π(a+b)"]
        );
        assert_eq!(
            builtin_basis("groups").unwrap().labels(),
            vec!["diameter", "tau1+tau2", "o1+o2", "log2_order", "1"]
        );
        assert!(matches!(
            builtin_basis("nope"),
            Err(FunctionSpaceError::UnknownBasis(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_bases() {
        let v = names(&["a", "b"]);
        let too_deep = FeatureBasis::new("x", v.clone(), 1, 1, vec![BasisFunction::e(2)]);
        assert!(matches!(
            too_deep,
            Err(FunctionSpaceError::InvalidBasis { .. })
        ));
        let too_high = FeatureBasis::new(
            "x",
            v.clone(),
            2,
            2,
            vec![BasisFunction::e(1).with_outer(Outer::Pow(3))],
        );
        assert!(too_high.is_err());
        let dup = FeatureBasis::new(
            "x",
            v.clone(),
            2,
            1,
            vec![BasisFunction::e(1), BasisFunction::e(1)],
        );
        assert!(dup.is_err());
        let wide = FeatureBasis::new("x", v.clone(), 3, 1, vec![BasisFunction::e(3)]);
        assert!(wide.is_err());
        let cols = FeatureBasis::new(
            "x",
            v.clone(),
            1,
            1,
            vec![BasisFunction::e(1).with_columns(&[0, 0])],
        );
        assert!(cols.is_err());
        let out_of_range =
            FeatureBasis::new("x", v, 1, 1, vec![BasisFunction::e(1).with_columns(&[2])]);
        assert!(out_of_range.is_err());
    }

    #[test]
    fn evaluation_errors_name_entry_and_input() {
        let b = FeatureBasis::new(
            "ln",
            names(&["x"]),
            1,
            1,
            vec![BasisFunction::e(1).with_outer(Outer::Ln)],
        )
        .unwrap();
        let err = b.eval(&[Scalar::Int(0)], &EvalContext::none()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ln(x)") && msg.contains("(0)"), "{msg}");
        assert!(b.check_box(&[(0, 10)], &EvalContext::none()).is_err());
        assert!(b.check_box(&[(1, 10)], &EvalContext::none()).is_ok());

        let table = PrimePiTable::build(50).unwrap();
        let pi = builtin_basis("pi-ab").unwrap();
        let err = pi
            .eval(
                &[Scalar::Int(10), Scalar::Int(10)],
                &EvalContext::with_table(&table),
            )
            .unwrap_err();
        assert_eq!(
            err,
            FunctionSpaceError::OutOfTable {
                entry: "π(ab)".into(),
                argument: 100,
                limit: 50
            }
        );
    }

    #[test]
    fn required_limits() {
        let pi = builtin_basis("pi-ab").unwrap();
        assert_eq!(pi.required_pi_limit(&[2000, 2000]).unwrap(), 4_000_000);
        let shift = builtin_basis("pi-x-shift").unwrap();
        assert_eq!(shift.required_pi_limit(&[100]).unwrap(), 110);
        assert_eq!(
            builtin_basis("groups")
                .unwrap()
                .required_pi_limit(&[1, 1, 1, 1, 1, 1])
                .unwrap(),
            0
        );
    }

    #[test]
    fn features_csv() {
        let table = PrimePiTable::build(100).unwrap();
        let basis = builtin_basis("pi-ab").unwrap();
        let rows = [DatasetRow::ints(&[2, 3]), DatasetRow::ints(&[5, 7])];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &basis, &rows, &EvalContext::with_table(&table)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "a,b,π(a)+π(b),π(ab),π(a+b)\n2,3,3,3,3\n5,7,7,11,5\n");
    }

    #[test]
    fn basis_json_round_trip() {
        let all: Vec<FeatureBasis> = BUILTIN_BASES
            .iter()
            .map(|id| builtin_basis(id).unwrap())
            .collect();
        let doc = bases_document(&all);
        let text = serde_json::to_string(&doc).unwrap();
        let back: BTreeMap<String, FeatureBasis> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }
}
