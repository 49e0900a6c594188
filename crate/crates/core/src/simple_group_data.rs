//! Two-generated simple permutation groups of small degree and their
//! Cayley-graph diameters.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Write;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetRow, Scalar};

pub const MAX_DEGREE: usize = 12;
pub const DEFAULT_CLOSURE_CAP: usize = 500_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupDataError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("closure exceeded {cap} elements (stopped at {partial})")]
    Resource { cap: usize, partial: usize },
    #[error("catalog entry `{entry}` is invalid: {reason}")]
    Catalog { entry: String, reason: String },
}

pub type Result<T> = std::result::Result<T, GroupDataError>;

/// A bijection of `{0..n-1}` in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Permutation {
    images: Vec<u8>,
}

impl TryFrom<Vec<u8>> for Permutation {
    type Error = GroupDataError;

    fn try_from(images: Vec<u8>) -> Result<Self> {
        Permutation::new(images)
    }
}

impl From<Permutation> for Vec<u8> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}

impl Permutation {
    pub fn new(images: Vec<u8>) -> Result<Self> {
        let n = images.len();
        if n == 0 || n > MAX_DEGREE {
            return Err(GroupDataError::Domain(format!(
                "degree {n} outside 1..={MAX_DEGREE}"
            )));
        }
        let mut seen = [false; MAX_DEGREE];
        for &i in &images {
            let i = i as usize;
            if i >= n || seen[i] {
                return Err(GroupDataError::Domain(format!(
                    "{images:?} is not a bijection"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (0..n as u8).collect(),
        }
    }

    /// Builds a permutation from disjoint cycles, e.g. `&[&[0, 1], &[2, 3, 4]]`.
    pub fn from_cycles(n: usize, cycles: &[&[u8]]) -> Result<Self> {
        let mut images: Vec<u8> = (0..n as u8).collect();
        let mut moved = HashSet::new();
        for cycle in cycles {
            for (k, &from) in cycle.iter().enumerate() {
                if from as usize >= n || !moved.insert(from) {
                    return Err(GroupDataError::Domain(format!(
                        "cycles {cycles:?} are not disjoint on {n} points"
                    )));
                }
                images[from as usize] = cycle[(k + 1) % cycle.len()];
            }
        }
        Permutation::new(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    /// `(self ∘ q)(i) = self(q(i))`.
    pub fn compose(&self, q: &Permutation) -> Result<Permutation> {
        if self.degree() != q.degree() {
            return Err(GroupDataError::Domain(format!(
                "degree mismatch {} vs {}",
                self.degree(),
                q.degree()
            )));
        }
        Ok(Permutation {
            images: q.images.iter().map(|&i| self.images[i as usize]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u8; self.degree()];
        for (i, &p) in self.images.iter().enumerate() {
            inv[p as usize] = i as u8;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(i, &p)| i == p as usize)
    }

    pub fn cycle_lengths(&self) -> Vec<usize> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.apply(i);
                len += 1;
            }
            lengths.push(len);
        }
        lengths
    }

    /// Least `k ≥ 1` with `p^k = id`.
    pub fn element_order(&self) -> u64 {
        self.cycle_lengths()
            .into_iter()
            .fold(1u64, |acc, l| acc.lcm(&(l as u64)))
    }

    /// Number of fixed points.
    pub fn trace(&self) -> u32 {
        self.images
            .iter()
            .enumerate()
            .filter(|&(i, &p)| i == p as usize)
            .count() as u32
    }

    /// Packs the images four bits each; unique for degree ≤ 16.
    fn key(&self) -> u64 {
        self.images
            .iter()
            .rev()
            .fold(0u64, |acc, &p| acc << 4 | p as u64)
    }

    fn unkey(mut key: u64, n: usize) -> Permutation {
        let mut images = Vec::with_capacity(n);
        for _ in 0..n {
            images.push((key & 0xf) as u8);
            key >>= 4;
        }
        Permutation { images }
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation without fixed points; the identity is `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut any = false;
        for start in 0..n {
            if seen[start] || self.apply(start) == start {
                continue;
            }
            any = true;
            write!(f, "(")?;
            let mut i = start;
            let mut first = true;
            while !seen[i] {
                seen[i] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{i}")?;
                first = false;
                i = self.apply(i);
            }
            write!(f, ")")?;
        }
        if !any {
            write!(f, "()")?;
        }
        Ok(())
    }
}

fn common_degree(gens: &[Permutation]) -> Result<usize> {
    let n = gens
        .first()
        .ok_or_else(|| GroupDataError::Domain("no generators".into()))?
        .degree();
    if gens.iter().any(|g| g.degree() != n) {
        return Err(GroupDataError::Domain(
            "generators have different degrees".into(),
        ));
    }
    Ok(n)
}

fn compose_keys(p: u64, q: &Permutation, n: usize) -> u64 {
    // p ∘ q on packed images
    let mut out = 0u64;
    for i in (0..n).rev() {
        let img = (p >> (4 * q.apply(i))) & 0xf;
        out = out << 4 | img;
    }
    out
}

/// Breadth-first word lengths from the identity under right multiplication
/// by `steps`; stops with a resource error past `cap` elements.
fn bfs(steps: &[Permutation], n: usize, cap: usize) -> Result<HashMap<u64, u32>> {
    let id = Permutation::identity(n).key();
    let mut dist = HashMap::from([(id, 0u32)]);
    let mut queue = VecDeque::from([id]);
    while let Some(p) = queue.pop_front() {
        let d = dist[&p];
        for s in steps {
            let next = compose_keys(p, s, n);
            if let Entry::Vacant(e) = dist.entry(next) {
                e.insert(d + 1);
                queue.push_back(next);
                if dist.len() > cap {
                    return Err(GroupDataError::Resource {
                        cap,
                        partial: dist.len(),
                    });
                }
            }
        }
    }
    Ok(dist)
}

/// All elements of `⟨gens⟩`.
pub fn group_closure(gens: &[Permutation], cap: usize) -> Result<Vec<Permutation>> {
    let n = common_degree(gens)?;
    let dist = bfs(gens, n, cap)?;
    let mut elems: Vec<Permutation> = dist.keys().map(|&k| Permutation::unkey(k, n)).collect();
    elems.sort_unstable();
    Ok(elems)
}

fn symmetric_steps(gens: &[Permutation]) -> Vec<Permutation> {
    let mut steps: Vec<Permutation> = gens.iter().flat_map(|g| [g.clone(), g.inverse()]).collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Word-length distance from the identity for every element, with `S ∪ S⁻¹`.
pub fn word_lengths(gens: &[Permutation], cap: usize) -> Result<HashMap<Permutation, u32>> {
    let n = common_degree(gens)?;
    let dist = bfs(&symmetric_steps(gens), n, cap)?;
    Ok(dist
        .into_iter()
        .map(|(k, d)| (Permutation::unkey(k, n), d))
        .collect())
}

/// Diameter of `Cay(⟨S⟩, S ∪ S⁻¹)`, the eccentricity of the identity.
pub fn cayley_diameter(gens: &[Permutation]) -> Result<u32> {
    cayley_diameter_capped(gens, DEFAULT_CLOSURE_CAP)
}

pub fn cayley_diameter_capped(gens: &[Permutation], cap: usize) -> Result<u32> {
    let n = common_degree(gens)?;
    let dist = bfs(&symmetric_steps(gens), n, cap)?;
    Ok(dist.values().copied().max().unwrap_or(0))
}

/// A validated catalog entry with its dataset features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub name: String,
    pub degree: usize,
    pub sigma: Permutation,
    pub tau: Permutation,
    pub order: u64,
    pub tau1: u32,
    pub tau2: u32,
    pub o1: u64,
    pub o2: u64,
    pub diameter: u32,
    pub log2_order: f64,
}

impl GroupRecord {
    pub fn row(&self) -> DatasetRow {
        DatasetRow {
            values: vec![
                Scalar::Int(self.tau1 as i64),
                Scalar::Int(self.tau2 as i64),
                Scalar::Int(self.o1 as i64),
                Scalar::Int(self.o2 as i64),
                Scalar::Real(self.log2_order),
                Scalar::Int(self.diameter as i64),
            ],
        }
    }

    /// `𝒟 ≤ (log₂|ℋ|)^c`.
    pub fn babai_holds(&self, c: f64) -> bool {
        (self.diameter as f64) <= self.log2_order.powf(c)
    }
}

/// A generator pair with the published order of the group it should generate.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub sigma: Permutation,
    pub tau: Permutation,
    pub expected_order: u64,
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

fn alternating(n: u8) -> Vec<CatalogEntry> {
    let name = match n {
        5 => "A5",
        6 => "A6",
        7 => "A7",
        8 => "A8",
        _ => "A9",
    };
    // an odd-length cycle plus a 3-cycle
    let long: Vec<u8> = if n % 2 == 1 {
        (0..n).collect()
    } else {
        (1..n).collect()
    };
    let sigma = Permutation::from_cycles(n as usize, &[&long]).expect("valid cycle");
    let tau = Permutation::from_cycles(n as usize, &[&[0, 1, 2]]).expect("valid cycle");
    let mut out = vec![CatalogEntry {
        name,
        sigma,
        tau,
        expected_order: factorial(n as u64) / 2,
    }];
    match n {
        5 => out.push(CatalogEntry {
            name,
            sigma: Permutation::from_cycles(5, &[&[0, 1, 2, 3, 4]]).expect("valid cycle"),
            tau: Permutation::from_cycles(5, &[&[0, 1], &[2, 3]]).expect("valid cycle"),
            expected_order: 60,
        }),
        6 => out.push(CatalogEntry {
            name,
            sigma: Permutation::from_cycles(6, &[&[0, 1, 2, 3], &[4, 5]]).expect("valid cycle"),
            tau: Permutation::from_cycles(6, &[&[0, 1, 2, 3, 4]]).expect("valid cycle"),
            expected_order: 360,
        }),
        _ => {}
    }
    out
}

/// The generator pairs behind [`build_catalog`].
pub fn catalog_entries() -> Vec<CatalogEntry> {
    let mut entries: Vec<CatalogEntry> = (5..=9).flat_map(alternating).collect();
    entries.push(CatalogEntry {
        name: "PSL(3,2)",
        sigma: Permutation::new(vec![1, 2, 3, 4, 5, 6, 0]).expect("valid images"),
        tau: Permutation::new(vec![0, 1, 4, 3, 2, 6, 5]).expect("valid images"),
        expected_order: 168,
    });
    entries.push(CatalogEntry {
        name: "PSL(2,8)",
        sigma: Permutation::new(vec![1, 3, 5, 7, 2, 0, 6, 4, 8]).expect("valid images"),
        tau: Permutation::new(vec![8, 1, 5, 6, 7, 2, 3, 4, 0]).expect("valid images"),
        expected_order: 504,
    });
    entries
}

/// Validates one entry and computes its features.
pub fn build_record(entry: &CatalogEntry, cap: usize) -> Result<GroupRecord> {
    let bad = |reason: String| GroupDataError::Catalog {
        entry: entry.name.to_string(),
        reason,
    };
    let gens = [entry.sigma.clone(), entry.tau.clone()];
    let n = common_degree(&gens).map_err(|e| bad(e.to_string()))?;
    let dist = bfs(&symmetric_steps(&gens), n, cap)?;
    let order = dist.len() as u64;
    if order != entry.expected_order {
        return Err(bad(format!(
            "generated {order} elements, expected {}",
            entry.expected_order
        )));
    }
    let st = entry
        .sigma
        .compose(&entry.tau)
        .map_err(|e| bad(e.to_string()))?;
    let ts = entry
        .tau
        .compose(&entry.sigma)
        .map_err(|e| bad(e.to_string()))?;
    if st == ts {
        return Err(bad("generators commute".into()));
    }
    let (o1, o2) = (entry.sigma.element_order(), entry.tau.element_order());
    if !order.is_multiple_of(o1) || !order.is_multiple_of(o2) {
        return Err(bad("generator order does not divide the group order".into()));
    }
    let diameter = dist.values().copied().max().unwrap_or(0);
    if diameter < 1 || diameter as u64 > order - 1 {
        return Err(bad(format!("diameter {diameter} out of range")));
    }
    Ok(GroupRecord {
        name: entry.name.to_string(),
        degree: n,
        sigma: entry.sigma.clone(),
        tau: entry.tau.clone(),
        order,
        tau1: entry.sigma.trace(),
        tau2: entry.tau.trace(),
        o1,
        o2,
        diameter,
        log2_order: (order as f64).log2(),
    })
}

/// Every catalog entry, validated; entries are processed in parallel and
/// returned in catalog order.
pub fn build_catalog() -> Result<Vec<GroupRecord>> {
    catalog_entries()
        .par_iter()
        .map(|e| build_record(e, DEFAULT_CLOSURE_CAP))
        .collect()
}

pub fn dataset_rows(catalog: &[GroupRecord]) -> impl Iterator<Item = DatasetRow> + '_ {
    catalog.iter().map(GroupRecord::row)
}

/// Feature table over the group columns `(τ₁, τ₂, 𝒪₁, 𝒪₂, log₂|ℋ|, 𝒟)`.
pub fn catalog_dataset(catalog: &[GroupRecord]) -> Dataset {
    let columns = crate::function_space::GROUP_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .collect();
    Dataset::new(columns, dataset_rows(catalog).collect())
}

pub fn write_catalog_csv<W: Write>(out: W, catalog: &[GroupRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "name",
        "degree",
        "tau1",
        "tau2",
        "o1",
        "o2",
        "log2_order",
        "diameter",
    ])?;
    for r in catalog {
        w.write_record([
            r.name.clone(),
            r.degree.to_string(),
            r.tau1.to_string(),
            r.tau2.to_string(),
            r.o1.to_string(),
            r.o2.to_string(),
            format!("{:.6}", r.log2_order),
            r.diameter.to_string(),
        ])?;
    }
    w.flush()
}
