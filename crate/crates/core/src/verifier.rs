//! Counterexample search for candidate inequalities over integer boxes and
//! explicit row sets.

use std::fmt;
use std::io::Write;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetRow, Scalar, Value};
use crate::function_space::{
    as_small_rational, CandidateConjecture, EvalContext, FunctionSpaceError, Relation,
};
use crate::number_theory_data::{
    default_variables, NumberTheoryError, PiGrid, PrimePiTable, Sampling,
};

/// Absolute tolerance for comparisons that leave integer arithmetic.
pub const REAL_TOL: f64 = 1e-9;
/// Largest denominator for which coefficients are treated as exact rationals.
pub const EXACT_DENOMINATOR: u32 = 1000;

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("evaluation failed at {point}: {source}")]
    Evaluation {
        point: DatasetRow,
        source: FunctionSpaceError,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Table(#[from] NumberTheoryError),
}

pub type Result<T> = std::result::Result<T, VerifierError>;

/// Where a candidate is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Domain {
    /// Closed integer box, optionally restricted to nondecreasing tuples.
    Grid {
        grid: PiGrid,
        #[serde(default)]
        ordered: bool,
    },
    /// A finite list of rows such as the group catalog.
    Rows { name: String, rows: Vec<DatasetRow> },
}

impl Domain {
    /// Full box `lo..=hi` per variable, taken literally.
    pub fn grid(variables: Vec<String>, ranges: Vec<(i64, i64)>) -> Result<Self> {
        let grid = PiGrid {
            variables,
            ranges,
            sampling: Sampling::Exhaustive,
            include_small: true,
        };
        grid.validate()?;
        Ok(Domain::Grid {
            grid,
            ordered: false,
        })
    }

    pub fn square(arity: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::grid(default_variables(arity), vec![(lo, hi); arity])
    }

    pub fn rows(name: impl Into<String>, rows: Vec<DatasetRow>) -> Self {
        Domain::Rows {
            name: name.into(),
            rows,
        }
    }

    pub fn ordered(mut self) -> Self {
        if let Domain::Grid { ordered, .. } = &mut self {
            *ordered = true;
        }
        self
    }

    pub fn sampled(mut self, count: usize, seed: u64) -> Self {
        if let Domain::Grid { grid, .. } = &mut self {
            grid.sampling = Sampling::Sampled { count, seed };
        }
        self
    }

    /// Parses `a=2..2000,b=2..2000`, optionally followed by `ordered`,
    /// `sample=N` and `seed=S` items.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |msg: String| VerifierError::Domain(format!("`{spec}`: {msg}"));
        let mut variables = Vec::new();
        let mut ranges = Vec::new();
        let mut ordered = false;
        let mut sample = None;
        let mut seed = 0u64;
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "ordered" {
                ordered = true;
                continue;
            }
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| bad(format!("expected name=lo..hi, got `{item}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "sample" => {
                    sample = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad sample count `{value}`")))?,
                    )
                }
                "seed" => {
                    seed = value
                        .parse()
                        .map_err(|_| bad(format!("bad seed `{value}`")))?
                }
                _ => {
                    let (lo, hi) = value
                        .split_once("..")
                        .ok_or_else(|| bad(format!("expected lo..hi, got `{value}`")))?;
                    let hi = hi.strip_prefix('=').unwrap_or(hi);
                    let lo: i64 = lo
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad bound `{lo}`")))?;
                    let hi: i64 = hi
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad bound `{hi}`")))?;
                    if variables.iter().any(|v| v == key) {
                        return Err(bad(format!("variable `{key}` repeated")));
                    }
                    variables.push(key.to_string());
                    ranges.push((lo, hi));
                }
            }
        }
        if variables.is_empty() {
            return Err(bad("no variables".into()));
        }
        let mut domain = Self::grid(variables, ranges).map_err(|e| bad(e.to_string()))?;
        if ordered {
            domain = domain.ordered();
        }
        if let Some(count) = sample {
            domain = domain.sampled(count, seed);
        }
        Ok(domain)
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            Domain::Grid { grid, .. } => Some(grid.arity()),
            Domain::Rows { rows, .. } => rows.first().map(DatasetRow::len),
        }
    }

    pub fn is_exhaustive(&self) -> bool {
        match self {
            Domain::Grid { grid, .. } => grid.sampling == Sampling::Exhaustive,
            Domain::Rows { .. } => true,
        }
    }

    /// Upper corner of a grid; for row sets, the componentwise maximum.
    pub fn upper_corner(&self) -> Vec<i64> {
        match self {
            Domain::Grid { grid, .. } => grid.upper_corner(),
            Domain::Rows { rows, .. } => {
                let k = rows.first().map_or(0, DatasetRow::len);
                (0..k)
                    .map(|i| {
                        rows.iter()
                            .map(|r| r.values[i].as_f64().ceil() as i64)
                            .max()
                            .unwrap_or(0)
                    })
                    .collect()
            }
        }
    }

    /// Every point of the domain, in scan order.
    pub fn materialize(&self) -> Vec<DatasetRow> {
        let points = self.points();
        let mut buf = Vec::new();
        (0..points.len())
            .filter_map(|i| {
                if points.fill(i, &mut buf) {
                    Some(DatasetRow {
                        values: buf.clone(),
                    })
                } else {
                    None
                }
            })
            .collect()
    }

    fn points(&self) -> Points<'_> {
        match self {
            Domain::Grid { grid, ordered } => match grid.sampling {
                Sampling::Exhaustive => Points::Box {
                    bounds: grid.bounds(),
                    ordered: *ordered,
                },
                Sampling::Sampled { count, seed } => {
                    let bounds = grid.bounds();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let rows = (0..count)
                        .map(|_| {
                            let mut p: Vec<i64> = bounds
                                .iter()
                                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                                .collect();
                            if *ordered {
                                p.sort_unstable();
                            }
                            DatasetRow::ints(&p)
                        })
                        .collect();
                    Points::Owned(rows)
                }
            },
            Domain::Rows { rows, .. } => Points::Rows(rows),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Grid { grid, ordered } => {
                let parts: Vec<String> = grid
                    .variables
                    .iter()
                    .zip(&grid.ranges)
                    .map(|(v, (lo, hi))| format!("{v}={lo}..{hi}"))
                    .collect();
                write!(f, "{}", parts.join(","))?;
                if *ordered {
                    write!(f, ",ordered")?;
                }
                if let Sampling::Sampled { count, seed } = grid.sampling {
                    write!(f, ",sample={count},seed={seed}")?;
                }
                Ok(())
            }
            Domain::Rows { name, rows } => write!(f, "{name} ({} rows)", rows.len()),
        }
    }
}

enum Points<'d> {
    Box {
        bounds: Vec<(i64, i64)>,
        ordered: bool,
    },
    Rows(&'d [DatasetRow]),
    Owned(Vec<DatasetRow>),
}

impl Points<'_> {
    fn len(&self) -> u64 {
        match self {
            Points::Box { bounds, .. } => bounds
                .iter()
                .map(|&(lo, hi)| (hi - lo + 1).max(0) as u64)
                .product(),
            Points::Rows(rows) => rows.len() as u64,
            Points::Owned(rows) => rows.len() as u64,
        }
    }

    /// Writes point `index` into `out`; `false` when a filter drops it.
    fn fill(&self, index: u64, out: &mut Vec<Scalar>) -> bool {
        out.clear();
        match self {
            Points::Box { bounds, ordered } => {
                out.resize(bounds.len(), Scalar::Int(0));
                let mut rest = index;
                for (slot, &(lo, hi)) in out.iter_mut().zip(bounds).rev() {
                    let width = (hi - lo + 1) as u64;
                    *slot = Scalar::Int(lo + (rest % width) as i64);
                    rest /= width;
                }
                !*ordered || out.windows(2).all(|w| w[0].as_f64() <= w[1].as_f64())
            }
            Points::Rows(rows) => {
                out.extend_from_slice(&rows[index as usize].values);
                true
            }
            Points::Owned(rows) => {
                out.extend_from_slice(&rows[index as usize].values);
                true
            }
        }
    }
}

/// `g − f` at one point, with its sign decided exactly when possible.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Margin {
    value: f64,
    sign: i8,
    exact: bool,
}

/// Precomputed difference coefficients, scaled to integers when every
/// coefficient is a small rational.
struct MarginFn {
    diff: Vec<f64>,
    scaled: Option<(Vec<i128>, i128)>,
}

impl MarginFn {
    fn new(c: &CandidateConjecture) -> Self {
        let diff = c.difference();
        let rationals: Option<Vec<_>> = diff
            .iter()
            .map(|&d| as_small_rational(d, EXACT_DENOMINATOR))
            .collect();
        let scaled = rationals.map(|rs| {
            let lcm = rs.iter().fold(1i64, |acc, r| acc.lcm(r.denom())) as i128;
            let ints = rs
                .iter()
                .map(|r| *r.numer() as i128 * (lcm / *r.denom() as i128))
                .collect();
            (ints, lcm)
        });
        MarginFn { diff, scaled }
    }

    fn eval(&self, phi: &[Value]) -> Margin {
        if let Some((ints, lcm)) = &self.scaled {
            let mut acc: Option<i128> = Some(0);
            for (c, v) in ints.iter().zip(phi) {
                acc = match (acc, v) {
                    (Some(a), Value::Int(x)) => c.checked_mul(*x).and_then(|p| a.checked_add(p)),
                    _ => None,
                };
            }
            if let Some(sum) = acc {
                return Margin {
                    value: sum as f64 / *lcm as f64,
                    sign: sum.signum() as i8,
                    exact: true,
                };
            }
        }
        let value: f64 = self.diff.iter().zip(phi).map(|(d, v)| d * v.as_f64()).sum();
        let sign = if value < -REAL_TOL {
            -1
        } else if value <= REAL_TOL {
            0
        } else {
            1
        };
        Margin {
            value,
            sign,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// `f < g` at every point tested.
    Holds,
    /// `f ≤ g` everywhere with at least one equality point.
    NonStrict,
    /// Some point has `f > g`.
    Falsified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub spec: String,
    pub exhaustive: bool,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub text: String,
    pub basis_id: String,
    pub relation: Relation,
    pub status: Status,
    /// Whether the declared relation survives: strict needs `Holds`,
    /// non-strict tolerates equality points.
    pub holds_as_declared: bool,
    pub domain: DomainSummary,
    /// Minimum of `g − f` over the points tested.
    pub min_margin: f64,
    pub min_point: Option<DatasetRow>,
    /// First strict violation in scan order.
    pub witness: Option<DatasetRow>,
    pub witness_margin: Option<f64>,
    pub equality_points: u64,
    /// Every comparison was done in integer arithmetic.
    pub exact: bool,
}

impl VerificationReport {
    /// `sup (f − g)` over the points tested.
    pub fn delta(&self) -> f64 {
        -self.min_margin
    }
}

#[derive(Debug, Clone)]
struct ChunkSummary {
    count: u64,
    min: Option<(f64, u64, DatasetRow)>,
    witness: Option<(u64, DatasetRow, f64)>,
    equality: u64,
    exact: bool,
    error: Option<(DatasetRow, FunctionSpaceError)>,
}

impl ChunkSummary {
    fn empty() -> Self {
        ChunkSummary {
            count: 0,
            min: None,
            witness: None,
            equality: 0,
            exact: true,
            error: None,
        }
    }

    /// Folds a later chunk into an earlier one.
    fn absorb(&mut self, later: ChunkSummary) {
        if self.error.is_some() {
            return;
        }
        self.count += later.count;
        self.equality += later.equality;
        self.exact &= later.exact;
        if let Some(m) = later.min {
            if self.min.as_ref().is_none_or(|cur| m.0 < cur.0) {
                self.min = Some(m);
            }
        }
        if self.witness.is_none() {
            self.witness = later.witness;
        }
        self.error = later.error;
    }
}

fn scan_chunk(
    c: &CandidateConjecture,
    margin_fn: &MarginFn,
    points: &Points,
    range: std::ops::Range<u64>,
    pi: Option<&PrimePiTable>,
) -> ChunkSummary {
    let ctx = pi.map_or(EvalContext::none(), EvalContext::with_table);
    let mut out = ChunkSummary::empty();
    let mut row = Vec::with_capacity(8);
    let mut phi = Vec::with_capacity(c.basis.len());
    for index in range {
        if !points.fill(index, &mut row) {
            continue;
        }
        phi.clear();
        if let Err(e) = c.basis.eval_into(&row, &ctx, &mut phi) {
            out.error = Some((
                DatasetRow {
                    values: row.clone(),
                },
                e,
            ));
            return out;
        }
        let m = margin_fn.eval(&phi);
        out.count += 1;
        out.exact &= m.exact;
        if out.min.as_ref().is_none_or(|cur| m.value < cur.0) {
            out.min = Some((
                m.value,
                index,
                DatasetRow {
                    values: row.clone(),
                },
            ));
        }
        match m.sign {
            0 => out.equality += 1,
            s if s < 0 && out.witness.is_none() => {
                out.witness = Some((
                    index,
                    DatasetRow {
                        values: row.clone(),
                    },
                    m.value,
                ));
            }
            _ => {}
        }
    }
    out
}

fn check_arity(c: &CandidateConjecture, domain: &Domain) -> Result<()> {
    match domain.arity() {
        Some(k) if k != c.basis.arity() => Err(VerifierError::Domain(format!(
            "domain has {k} variables, basis `{}` expects {}",
            c.basis.id,
            c.basis.arity()
        ))),
        _ => Ok(()),
    }
}

/// Scans the whole domain and classifies the candidate. Chunks run in
/// parallel and merge in scan order, so the report does not depend on the
/// thread count.
pub fn verify(
    c: &CandidateConjecture,
    domain: &Domain,
    pi: Option<&PrimePiTable>,
) -> Result<VerificationReport> {
    check_arity(c, domain)?;
    let margin_fn = MarginFn::new(c);
    let points = domain.points();
    let n = points.len();
    let chunks: Vec<ChunkSummary> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            scan_chunk(
                c,
                &margin_fn,
                &points,
                k * CHUNK..((k + 1) * CHUNK).min(n),
                pi,
            )
        })
        .collect();
    let mut total = ChunkSummary::empty();
    for chunk in chunks {
        total.absorb(chunk);
    }
    if let Some((point, source)) = total.error {
        return Err(VerifierError::Evaluation { point, source });
    }
    let status = if total.witness.is_some() {
        Status::Falsified
    } else if total.equality > 0 {
        Status::NonStrict
    } else {
        Status::Holds
    };
    let holds_as_declared = match c.relation {
        Relation::Strict => status == Status::Holds,
        Relation::NonStrict => status != Status::Falsified,
    };
    let (min_margin, min_point) = match total.min {
        Some((v, _, row)) => (v, Some(row)),
        None => (f64::INFINITY, None),
    };
    Ok(VerificationReport {
        text: c.to_string(),
        basis_id: c.basis.id.clone(),
        relation: c.relation,
        status,
        holds_as_declared,
        domain: DomainSummary {
            spec: domain.to_string(),
            exhaustive: domain.is_exhaustive(),
            count: total.count,
        },
        min_margin,
        min_point,
        witness_margin: total.witness.as_ref().map(|w| w.2),
        witness: total.witness.map(|w| w.1),
        equality_points: total.equality,
        exact: total.exact,
    })
}

/// Per-point `(x, g − f)` in scan order.
pub fn margin_profile<'a>(
    c: &'a CandidateConjecture,
    domain: &'a Domain,
    pi: Option<&'a PrimePiTable>,
) -> Result<impl Iterator<Item = Result<(DatasetRow, f64)>> + 'a> {
    check_arity(c, domain)?;
    let margin_fn = MarginFn::new(c);
    let points = domain.points();
    let ctx = pi.map_or(EvalContext::none(), EvalContext::with_table);
    let mut row = Vec::new();
    Ok((0..points.len()).filter_map(move |index| {
        if !points.fill(index, &mut row) {
            return None;
        }
        let point = DatasetRow {
            values: row.clone(),
        };
        Some(match c.basis.eval(&row, &ctx) {
            Ok(phi) => Ok((point, margin_fn.eval(&phi).value)),
            Err(source) => Err(VerifierError::Evaluation { point, source }),
        })
    }))
}

/// CSV with one column per variable followed by `margin`.
pub fn write_margin_profile_csv<W: Write>(
    mut out: W,
    variables: &[String],
    profile: impl Iterator<Item = Result<(DatasetRow, f64)>>,
) -> std::io::Result<()> {
    writeln!(out, "{},margin", variables.join(","))?;
    for item in profile {
        let (row, margin) =
            item.map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        let vals: Vec<String> = row.values.iter().map(Scalar::to_string).collect();
        writeln!(out, "{},{margin}", vals.join(","))?;
    }
    Ok(())
}

/// Prime table large enough for every `π` argument the candidate's basis
/// can reach on `domain`, or `None` if the basis never calls `π`.
pub fn table_for(c: &CandidateConjecture, domain: &Domain) -> Result<Option<PrimePiTable>> {
    if !c.basis.uses_pi() {
        return Ok(None);
    }
    let limit = c
        .basis
        .required_pi_limit(&domain.upper_corner())
        .map_err(|e| VerifierError::Domain(e.to_string()))?;
    Ok(Some(PrimePiTable::build(limit.max(2))?))
}
