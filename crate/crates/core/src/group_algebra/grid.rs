use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::GroupError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PGridPoint {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

/// Smooth indicator `p̃(a,b) = 1 + exp(−(a·s)²) − tanh(b·s)` for sharpness `s`.
///
/// As `s → ∞` it tends to 0 exactly on `{a ≠ 0, b > 0}`, the parameter region
/// of 𝒢, to 1 on `a = 0, b > 0` and to 2 on `a ≠ 0, b < 0`.
pub fn smooth_p(a: f64, b: f64, sharpness: f64) -> f64 {
    1.0 + (-(a * sharpness).powi(2)).exp() - (b * sharpness).tanh()
}

/// Dense grid of `p̃`, row-major in `a` then `b`, with `resolution` points per axis.
pub fn smooth_p_grid(
    a_range: (f64, f64),
    b_range: (f64, f64),
    resolution: usize,
    sharpness: f64,
) -> Result<Vec<PGridPoint>, GroupError> {
    if resolution < 2 {
        return Err(GroupError::Domain(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    if !(sharpness.is_finite() && sharpness > 0.0) {
        return Err(GroupError::Domain(format!(
            "sharpness must be positive, got {sharpness}"
        )));
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let step = (hi - lo) / (resolution - 1) as f64;
        (0..resolution).map(|i| lo + step * i as f64).collect()
    };
    let bs = axis(b_range);
    Ok(axis(a_range)
        .into_iter()
        .flat_map(|a| {
            bs.iter().map(move |&b| PGridPoint {
                a,
                b,
                p: smooth_p(a, b, sharpness),
            })
        })
        .collect())
}

pub fn write_p_grid_csv<W: Write>(mut out: W, grid: &[PGridPoint]) -> io::Result<()> {
    writeln!(out, "a,b,p")?;
    for pt in grid {
        writeln!(out, "{},{},{}", pt.a, pt.b, pt.p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sharp_limits() {
        let s = 1e3;
        assert!(smooth_p(1.0, 1.0, s).abs() < 1e-12);
        assert!((smooth_p(0.0, 1.0, s) - 1.0).abs() < 1e-12);
        assert!((smooth_p(1.0, -1.0, s) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_layout_and_csv() {
        let grid = smooth_p_grid((-1.0, 1.0), (0.0, 2.0), 3, 2.0).unwrap();
        assert_eq!(grid.len(), 9);
        assert_eq!((grid[0].a, grid[0].b), (-1.0, 0.0));
        assert_eq!((grid[1].a, grid[1].b), (-1.0, 1.0));
        assert_eq!((grid[3].a, grid[3].b), (0.0, 0.0));
        let mut buf = Vec::new();
        write_p_grid_csv(&mut buf, &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,b,p\n-1,0,"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(smooth_p_grid((0.0, 1.0), (0.0, 1.0), 1, 1.0).is_err());
        assert!(smooth_p_grid((0.0, 1.0), (0.0, 1.0), 4, 0.0).is_err());
    }
}
