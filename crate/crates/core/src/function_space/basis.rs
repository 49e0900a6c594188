use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::dataset::{Scalar, Value};
use crate::number_theory_data::PrimePiTable;

/// Largest number of variables a symmetric argument may range over.
pub const MAX_ARITY: usize = 8;

/// The inner argument of a basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Argument {
    /// `∏ e_k^{m_k}` with `exponents[k-1] = m_k`; no exponents is the constant 1.
    Symmetric { exponents: Vec<u32> },
    /// `t + √t` with `t = ∏ e_k^{m_k}`.
    SqrtShift { exponents: Vec<u32> },
    /// `Σᵢ outer(hook(xᵢ))`.
    EachSum,
    /// `∏ᵢ outer(hook(xᵢ))`.
    EachProduct,
}

/// Dataset-specific transform applied to the argument before the outer transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hook {
    #[default]
    None,
    /// `π(⌊t⌋)`
    Pi,
    /// `π(π(⌊t⌋))`
    PiPi,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outer {
    #[default]
    Identity,
    Ln,
    Sqrt,
    Pow(u32),
}

impl Outer {
    pub fn degree(self) -> u32 {
        match self {
            Outer::Pow(k) => k,
            _ => 1,
        }
    }
}

/// `outer(hook(argument))`, optionally restricted to a subset of the columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisFunction {
    pub argument: Argument,
    #[serde(default)]
    pub hook: Hook,
    #[serde(default)]
    pub outer: Outer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<usize>>,
}

/// Where `π` comes from during evaluation.
#[derive(Clone, Copy)]
pub enum PiSource<'a> {
    None,
    Table(&'a PrimePiTable),
    /// Records the largest argument and answers with the bound `π(n) ≤ n`.
    Probe(&'a Cell<u64>),
}

#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub pi: PiSource<'a>,
}

impl<'a> EvalContext<'a> {
    pub fn none() -> Self {
        EvalContext { pi: PiSource::None }
    }

    pub fn with_table(table: &'a PrimePiTable) -> Self {
        EvalContext {
            pi: PiSource::Table(table),
        }
    }
}

/// Why a single basis function failed at a point.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum EvalFailure {
    Domain(String),
    OutOfTable { argument: u64, limit: u64 },
    NoTable,
}

impl BasisFunction {
    pub fn symmetric(exponents: &[u32]) -> Self {
        BasisFunction {
            argument: Argument::Symmetric {
                exponents: exponents.to_vec(),
            },
            hook: Hook::None,
            outer: Outer::Identity,
            columns: None,
        }
    }

    /// `e_k` of the variables.
    pub fn e(k: usize) -> Self {
        let mut exps = vec![0; k];
        exps[k - 1] = 1;
        Self::symmetric(&exps)
    }

    pub fn constant() -> Self {
        Self::symmetric(&[])
    }

    /// `π(e_k)`.
    pub fn pi_e(k: usize) -> Self {
        Self::e(k).with_hook(Hook::Pi)
    }

    /// `π(x₁) + π(x₂) + …`.
    pub fn pi_each_sum() -> Self {
        BasisFunction {
            argument: Argument::EachSum,
            hook: Hook::Pi,
            outer: Outer::Identity,
            columns: None,
        }
    }

    /// `π(x₁)·π(x₂)·…`.
    pub fn pi_each_product() -> Self {
        BasisFunction {
            argument: Argument::EachProduct,
            hook: Hook::Pi,
            outer: Outer::Identity,
            columns: None,
        }
    }

    pub fn with_hook(mut self, hook: Hook) -> Self {
        self.hook = hook;
        self
    }

    pub fn with_outer(mut self, outer: Outer) -> Self {
        self.outer = outer;
        self
    }

    pub fn with_columns(mut self, columns: &[usize]) -> Self {
        self.columns = Some(columns.to_vec());
        self
    }

    pub fn selected<'r>(&'r self, row: &'r [Scalar]) -> impl Iterator<Item = Scalar> + 'r {
        let all = self.columns.is_none();
        let cols = self.columns.as_deref().unwrap_or(&[]);
        let direct = all.then(|| row.iter().copied()).into_iter().flatten();
        let picked = cols.iter().map(move |&c| row[c]);
        direct.chain(picked)
    }

    pub fn selected_count(&self, arity: usize) -> usize {
        self.columns.as_ref().map_or(arity, Vec::len)
    }

    /// Polynomial degree of the argument in the raw variables.
    pub fn argument_degree(&self) -> u32 {
        match &self.argument {
            Argument::Symmetric { exponents } | Argument::SqrtShift { exponents } => exponents
                .iter()
                .enumerate()
                .map(|(i, m)| (i as u32 + 1) * m)
                .sum(),
            Argument::EachSum | Argument::EachProduct => 1,
        }
    }

    pub(crate) fn eval(&self, row: &[Scalar], ctx: &EvalContext) -> Result<Value, EvalFailure> {
        match &self.argument {
            Argument::Symmetric { exponents } => {
                let t = symmetric_monomial(self.selected(row), exponents);
                let t = apply_hook(self.hook, t, ctx)?;
                apply_outer(self.outer, t)
            }
            Argument::SqrtShift { exponents } => {
                let t = sqrt_shift(symmetric_monomial(self.selected(row), exponents))?;
                let t = apply_hook(self.hook, t, ctx)?;
                apply_outer(self.outer, t)
            }
            Argument::EachSum => {
                let mut acc = Value::Int(0);
                for x in self.selected(row) {
                    let v = apply_outer(self.outer, apply_hook(self.hook, x.into(), ctx)?)?;
                    acc = add(acc, v);
                }
                Ok(acc)
            }
            Argument::EachProduct => {
                let mut acc = Value::Int(1);
                for x in self.selected(row) {
                    let v = apply_outer(self.outer, apply_hook(self.hook, x.into(), ctx)?)?;
                    acc = mul(acc, v);
                }
                Ok(acc)
            }
        }
    }

    /// [`label`](Self::label) with a column-range check.
    pub fn label_checked(&self, variables: &[String]) -> Result<String, String> {
        if let Some(c) = self
            .columns
            .iter()
            .flatten()
            .find(|&&c| c >= variables.len())
        {
            return Err(format!(
                "column {c} out of range for {} variables",
                variables.len()
            ));
        }
        Ok(self.label(variables))
    }

    /// Human-readable form over the given variable names, e.g. `π(ab)`.
    pub fn label(&self, variables: &[String]) -> String {
        let names: Vec<&str> = match &self.columns {
            None => variables.iter().map(String::as_str).collect(),
            Some(cols) => cols.iter().map(|&c| variables[c].as_str()).collect(),
        };
        match &self.argument {
            Argument::Symmetric { exponents } => {
                let inner = monomial_label(&names, exponents);
                self.outer_label(&self.hook_label(inner))
            }
            Argument::SqrtShift { exponents } => {
                let t = monomial_label(&names, exponents);
                let t = if is_atomic(&t) { t } else { format!("({t})") };
                self.outer_label(&self.hook_label(format!("{t}+√{t}")))
            }
            Argument::EachSum => names
                .iter()
                .map(|n| self.outer_label(&self.hook_label(n.to_string())))
                .collect::<Vec<_>>()
                .join("+"),
            Argument::EachProduct => names
                .iter()
                .map(|n| self.outer_label(&self.hook_label(n.to_string())))
                .collect::<Vec<_>>()
                .join("·"),
        }
    }

    fn hook_label(&self, inner: String) -> String {
        match self.hook {
            Hook::None => inner,
            Hook::Pi => format!("π({inner})"),
            Hook::PiPi => format!("π(π({inner}))"),
        }
    }

    fn outer_label(&self, inner: &str) -> String {
        match self.outer {
            Outer::Identity => inner.to_string(),
            Outer::Ln => format!("ln({inner})"),
            Outer::Sqrt => format!("√({inner})"),
            Outer::Pow(k) if is_atomic(inner) => format!("{inner}^{k}"),
            Outer::Pow(k) => format!("({inner})^{k}"),
        }
    }
}

fn monomial_label(names: &[&str], exponents: &[u32]) -> String {
    let factors: Vec<(usize, u32)> = exponents
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(i, &m)| (i + 1, m))
        .collect();
    if factors.is_empty() {
        return "1".to_string();
    }
    if let [(k, 1)] = factors[..] {
        return elementary_label(names, k);
    }
    factors
        .iter()
        .map(|&(k, m)| {
            let base = elementary_label(names, k);
            let base = if is_atomic(&base) {
                base
            } else {
                format!("({base})")
            };
            if m == 1 {
                base
            } else {
                format!("{base}^{m}")
            }
        })
        .collect::<Vec<_>>()
        .join("·")
}

/// `e_k` spelled out: `a+b+c`, `ab+ac+bc`, `abc`.
fn elementary_label(names: &[&str], k: usize) -> String {
    let sep = if names.iter().all(|n| n.chars().count() == 1) {
        ""
    } else {
        "·"
    };
    let mut terms = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    let n = names.len();
    if k > n {
        return format!("e{k}");
    }
    loop {
        terms.push(idx.iter().map(|&i| names[i]).collect::<Vec<_>>().join(sep));
        // next k-subset in lexicographic order
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    terms.join("+")
}

/// A label that can take an exponent or coefficient without parentheses:
/// a bare name, or a single call like `π(…)`.
pub(crate) fn is_atomic(s: &str) -> bool {
    if s.chars().all(|c| c.is_alphanumeric() || c == '_') {
        // single letters and names like `tau1`; `ab` is a product
        return s.chars().count() == 1 || s.chars().any(|c| c.is_ascii_digit() || c == '_');
    }
    let Some(open) = s.find('(') else {
        return false;
    };
    if !s.ends_with(')') {
        return false;
    }
    let head = &s[..open];
    if !head.chars().all(|c| c.is_alphabetic() || c == '√') {
        return false;
    }
    // the first '(' must close at the very end
    let mut depth = 0usize;
    for (i, c) in s.char_indices().skip_while(|&(i, _)| i < open) {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return i + c.len_utf8() == s.len();
                }
            }
            _ => {}
        }
    }
    false
}

/// Evaluates `e_1..e_n` and the monomial `∏ e_k^{m_k}`.
fn symmetric_monomial(values: impl Iterator<Item = Scalar>, exponents: &[u32]) -> Value {
    let mut ints = [0i128; MAX_ARITY];
    let mut reals = [0f64; MAX_ARITY];
    let mut n = 0;
    let mut exact = true;
    for v in values.take(MAX_ARITY) {
        match v {
            Scalar::Int(i) => ints[n] = i as i128,
            Scalar::Real(_) => exact = false,
        }
        reals[n] = v.as_f64();
        n += 1;
    }
    if exact {
        if let Some(v) = exact_monomial(&ints[..n], exponents) {
            return Value::Int(v);
        }
    }
    Value::Real(real_monomial(&reals[..n], exponents))
}

fn exact_monomial(xs: &[i128], exponents: &[u32]) -> Option<i128> {
    let mut e = [0i128; MAX_ARITY + 1];
    e[0] = 1;
    for (i, &x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] = e[k].checked_add(e[k - 1].checked_mul(x)?)?;
        }
    }
    let mut acc: i128 = 1;
    for (i, &m) in exponents.iter().enumerate() {
        if m > 0 {
            let ek = *e.get(i + 1)?;
            acc = acc.checked_mul(ek.checked_pow(m)?)?;
        }
    }
    Some(acc)
}

fn real_monomial(xs: &[f64], exponents: &[u32]) -> f64 {
    let mut e = [0f64; MAX_ARITY + 1];
    e[0] = 1.0;
    for (i, &x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    exponents
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(i, &m)| e.get(i + 1).copied().unwrap_or(0.0).powi(m as i32))
        .product()
}

/// `e_1..e_d` of `x` as reals.
pub(crate) fn elementary_symmetric(xs: &[f64], d: usize) -> Vec<f64> {
    let mut e = vec![0f64; xs.len() + 1];
    e[0] = 1.0;
    for (i, &x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e[1..=d].to_vec()
}

fn isqrt(n: i128) -> i128 {
    let mut r = (n as f64).sqrt() as i128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn sqrt_shift(t: Value) -> Result<Value, EvalFailure> {
    match t {
        Value::Int(m) if m >= 0 => Ok(Value::Int(m + isqrt(m))),
        Value::Real(m) if m >= 0.0 => Ok(Value::Real(m + m.sqrt())),
        other => Err(EvalFailure::Domain(format!(
            "square root of negative value {other}"
        ))),
    }
}

fn pi_lookup(n: i128, ctx: &EvalContext) -> Result<Value, EvalFailure> {
    if n < 2 {
        return Ok(Value::Int(0));
    }
    let n = u64::try_from(n).unwrap_or(u64::MAX);
    match ctx.pi {
        PiSource::None => Err(EvalFailure::NoTable),
        PiSource::Table(table) => {
            table
                .get(n)
                .map(|p| Value::Int(p as i128))
                .ok_or(EvalFailure::OutOfTable {
                    argument: n,
                    limit: table.limit(),
                })
        }
        PiSource::Probe(max) => {
            max.set(max.get().max(n));
            Ok(Value::Int(n as i128))
        }
    }
}

fn floor_int(v: Value) -> Result<i128, EvalFailure> {
    match v {
        Value::Int(i) => Ok(i),
        Value::Real(r) if r.is_finite() => Ok(r.floor() as i128),
        Value::Real(r) => Err(EvalFailure::Domain(format!("non-finite argument {r}"))),
    }
}

fn apply_hook(hook: Hook, v: Value, ctx: &EvalContext) -> Result<Value, EvalFailure> {
    match hook {
        Hook::None => Ok(v),
        Hook::Pi => pi_lookup(floor_int(v)?, ctx),
        Hook::PiPi => {
            let inner = pi_lookup(floor_int(v)?, ctx)?;
            pi_lookup(floor_int(inner)?, ctx)
        }
    }
}

fn apply_outer(outer: Outer, v: Value) -> Result<Value, EvalFailure> {
    let out = match (outer, v) {
        (Outer::Identity, v) => v,
        (Outer::Pow(k), Value::Int(i)) => match i.checked_pow(k) {
            Some(p) => Value::Int(p),
            None => Value::Real((i as f64).powi(k as i32)),
        },
        (Outer::Pow(k), Value::Real(r)) => Value::Real(r.powi(k as i32)),
        (Outer::Ln, v) => {
            let x = v.as_f64();
            if x <= 0.0 {
                return Err(EvalFailure::Domain(format!("ln of nonpositive value {v}")));
            }
            Value::Real(x.ln())
        }
        (Outer::Sqrt, v) => {
            let x = v.as_f64();
            if x < 0.0 {
                return Err(EvalFailure::Domain(format!(
                    "square root of negative value {v}"
                )));
            }
            Value::Real(x.sqrt())
        }
    };
    if let Value::Real(r) = out {
        if !r.is_finite() {
            return Err(EvalFailure::Domain(format!("non-finite result {r}")));
        }
    }
    Ok(out)
}

fn add(a: Value, b: Value) -> Value {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x
            .checked_add(y)
            .map_or(Value::Real(x as f64 + y as f64), Value::Int),
        (a, b) => Value::Real(a.as_f64() + b.as_f64()),
    }
}

fn mul(a: Value, b: Value) -> Value {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x
            .checked_mul(y)
            .map_or(Value::Real(x as f64 * y as f64), Value::Int),
        (a, b) => Value::Real(a.as_f64() * b.as_f64()),
    }
}
