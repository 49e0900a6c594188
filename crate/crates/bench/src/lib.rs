//! Shared fixtures for the benchmarks.

use conjspace_core::DatasetRow;

/// Every `(a, b)` with `lo ≤ a, b ≤ hi`.
pub fn square_rows(lo: i64, hi: i64) -> Vec<DatasetRow> {
    (lo..=hi)
        .flat_map(|a| (lo..=hi).map(move |b| DatasetRow::ints(&[a, b])))
        .collect()
}
