//! Prime-counting tables, the Rosser–Schoenfeld sandwich and integer grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetRow;

/// Smallest `α` for which `π(x) < α·x/ln x` is known for all `x ≥ 17`.
pub const ROSSER_SCHOENFELD_ALPHA: f64 = 1.25506;
pub const ROSSER_SCHOENFELD_MIN_X: u64 = 17;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumberTheoryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("prime table limit {limit} exceeds the configured cap ({reason})")]
    Resource { limit: u64, reason: String },
    #[error("argument {argument} exceeds the prime table limit {limit}")]
    OutOfTable { argument: u64, limit: u64 },
    #[error("range error: {0}")]
    Range(String),
}

/// Caps applied before allocating a table.
#[derive(Debug, Clone, Copy)]
pub struct SieveCaps {
    pub max_limit: u64,
    pub max_bytes: u64,
}

impl Default for SieveCaps {
    fn default() -> Self {
        SieveCaps {
            max_limit: 1 << 31,
            max_bytes: 2 << 30,
        }
    }
}

/// `π(n)` for every `0 ≤ n ≤ limit`.
#[derive(Debug, Clone)]
pub struct PrimePiTable {
    limit: u64,
    pi: Vec<u32>,
}

impl PrimePiTable {
    pub fn build(limit: u64) -> Result<Self, NumberTheoryError> {
        Self::build_with_caps(limit, SieveCaps::default())
    }

    /// Bit-array sieve of Eratosthenes followed by a prefix-count pass.
    pub fn build_with_caps(limit: u64, caps: SieveCaps) -> Result<Self, NumberTheoryError> {
        if limit < 2 {
            return Err(NumberTheoryError::Domain(format!(
                "table limit must be at least 2, got {limit}"
            )));
        }
        if limit > caps.max_limit {
            return Err(NumberTheoryError::Resource {
                limit,
                reason: format!("max limit {}", caps.max_limit),
            });
        }
        let bytes = (limit + 1) * 4 + (limit + 1) / 8;
        if bytes > caps.max_bytes {
            return Err(NumberTheoryError::Resource {
                limit,
                reason: format!("needs {bytes} bytes, ceiling {}", caps.max_bytes),
            });
        }

        let n = limit as usize + 1;
        // bit i set => i is composite
        let mut composite = vec![0u64; n.div_ceil(64)];
        let mut i = 2usize;
        while i * i < n {
            if composite[i / 64] >> (i % 64) & 1 == 0 {
                let mut j = i * i;
                while j < n {
                    composite[j / 64] |= 1 << (j % 64);
                    j += i;
                }
            }
            i += 1;
        }

        let mut pi = vec![0u32; n];
        let mut count = 0u32;
        for (k, slot) in pi.iter_mut().enumerate().skip(2) {
            if composite[k / 64] >> (k % 64) & 1 == 0 {
                count += 1;
            }
            *slot = count;
        }
        Ok(PrimePiTable { limit, pi })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `π(n)`, or `None` past the table limit.
    pub fn get(&self, n: u64) -> Option<u32> {
        self.pi.get(usize::try_from(n).ok()?).copied()
    }

    pub fn pi(&self, n: u64) -> Result<u32, NumberTheoryError> {
        self.get(n).ok_or(NumberTheoryError::OutOfTable {
            argument: n,
            limit: self.limit,
        })
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.pi[n as usize] != self.pi[n as usize - 1]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.pi
    }
}

/// `x/ln x < π(x) < α·x/ln x`, evaluated with the exact table value.
pub fn rosser_schoenfeld_check(
    table: &PrimePiTable,
    x: u64,
    alpha: f64,
) -> Result<bool, NumberTheoryError> {
    if x < ROSSER_SCHOENFELD_MIN_X {
        return Err(NumberTheoryError::Domain(format!(
            "sandwich is only asserted for x ≥ 17, got {x}"
        )));
    }
    if alpha.is_nan() || alpha < ROSSER_SCHOENFELD_ALPHA {
        return Err(NumberTheoryError::Domain(format!(
            "alpha must be at least {ROSSER_SCHOENFELD_ALPHA}, got {alpha}"
        )));
    }
    let pi = table.pi(x)? as f64;
    let xf = x as f64;
    let lower = xf / xf.ln();
    Ok(lower < pi && pi < alpha * lower)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Sampling {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

/// Closed integer box `lo..=hi` per variable, scanned in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiGrid {
    pub variables: Vec<String>,
    pub ranges: Vec<(i64, i64)>,
    #[serde(default = "exhaustive")]
    pub sampling: Sampling,
    /// Keep 0 and 1 in the ranges (π is degenerate there).
    #[serde(default)]
    pub include_small: bool,
}

fn exhaustive() -> Sampling {
    Sampling::Exhaustive
}

impl PiGrid {
    pub fn new(variables: Vec<String>, ranges: Vec<(i64, i64)>) -> Result<Self, NumberTheoryError> {
        let grid = PiGrid {
            variables,
            ranges,
            sampling: Sampling::Exhaustive,
            include_small: false,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Variables named `a, b, c, …` (or `x` for a single one) over a common range.
    pub fn square(arity: usize, lo: i64, hi: i64) -> Result<Self, NumberTheoryError> {
        Self::new(default_variables(arity), vec![(lo, hi); arity])
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<(), NumberTheoryError> {
        if self.ranges.is_empty() {
            return Err(NumberTheoryError::Range("grid has no variables".into()));
        }
        if self.variables.len() != self.ranges.len() {
            return Err(NumberTheoryError::Range(format!(
                "{} variable names for {} ranges",
                self.variables.len(),
                self.ranges.len()
            )));
        }
        for (name, &(lo, hi)) in self.variables.iter().zip(&self.ranges) {
            let lo = self.effective_lo(lo);
            if lo > hi {
                return Err(NumberTheoryError::Range(format!(
                    "{name}: empty range {lo}..{hi}"
                )));
            }
        }
        Ok(())
    }

    fn effective_lo(&self, lo: i64) -> i64 {
        if self.include_small {
            lo
        } else {
            lo.max(2)
        }
    }

    /// Effective bounds after excluding 0 and 1.
    pub fn bounds(&self) -> Vec<(i64, i64)> {
        self.ranges
            .iter()
            .map(|&(lo, hi)| (self.effective_lo(lo), hi))
            .collect()
    }

    pub fn arity(&self) -> usize {
        self.ranges.len()
    }

    /// Number of points in the full box.
    pub fn box_size(&self) -> u64 {
        self.bounds()
            .iter()
            .map(|&(lo, hi)| (hi - lo + 1) as u64)
            .product()
    }

    /// Number of rows [`PiGrid::points`] yields.
    pub fn len(&self) -> u64 {
        match self.sampling {
            Sampling::Exhaustive => self.box_size(),
            Sampling::Sampled { count, .. } => count as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper corner; every feature used here is monotone in each variable on
    /// nonnegative inputs, so this is where table arguments peak.
    pub fn upper_corner(&self) -> Vec<i64> {
        self.bounds().iter().map(|&(_, hi)| hi).collect()
    }

    /// The `index`-th point of the exhaustive lexicographic scan.
    pub fn point_at(&self, index: u64, out: &mut [i64]) {
        let bounds = self.bounds();
        let mut rest = index;
        for (slot, &(lo, hi)) in out.iter_mut().zip(&bounds).rev() {
            let width = (hi - lo + 1) as u64;
            *slot = lo + (rest % width) as i64;
            rest /= width;
        }
    }

    /// Rows of the grid: lexicographic when exhaustive, seeded uniform otherwise.
    pub fn points(&self) -> Box<dyn Iterator<Item = Vec<i64>> + '_> {
        let k = self.arity();
        match self.sampling {
            Sampling::Exhaustive => Box::new((0..self.box_size()).map(move |i| {
                let mut p = vec![0; k];
                self.point_at(i, &mut p);
                p
            })),
            Sampling::Sampled { count, seed } => {
                let bounds = self.bounds();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Box::new((0..count).map(move |_| {
                    bounds
                        .iter()
                        .map(|&(lo, hi)| rng.random_range(lo..=hi))
                        .collect()
                }))
            }
        }
    }
}

/// Dataset rows for `pi_grid`.
pub fn pi_grid(grid: &PiGrid) -> Result<impl Iterator<Item = DatasetRow> + '_, NumberTheoryError> {
    grid.validate()?;
    Ok(grid.points().map(|p| DatasetRow::ints(&p)))
}

pub fn default_variables(arity: usize) -> Vec<String> {
    match arity {
        1 => vec!["x".to_string()],
        n => (0..n)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect(),
    }
}

pub fn write_pi_table_csv<W: std::io::Write>(
    mut out: W,
    table: &PrimePiTable,
) -> std::io::Result<()> {
    writeln!(out, "n,pi")?;
    for (n, pi) in table.as_slice().iter().enumerate() {
        writeln!(out, "{n},{pi}")?;
    }
    Ok(())
}
