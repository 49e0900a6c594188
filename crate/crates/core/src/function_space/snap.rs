use num_rational::Ratio;

/// Rationals with the largest allowed denominator, one per coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapResult {
    pub values: Vec<Ratio<i64>>,
    /// Largest `|θᵢ − snapped θᵢ|`.
    pub max_distance: f64,
}

impl SnapResult {
    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(ratio_to_f64).collect()
    }
}

pub fn ratio_to_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Nearest `n/d` with `1 ≤ d ≤ max_den`; ties go to the smaller denominator.
pub fn nearest_rational(x: f64, max_den: u32) -> (Ratio<i64>, f64) {
    let mut best = Ratio::from_integer(x.round() as i64);
    let mut best_dist = (x - x.round()).abs();
    for d in 2..=max_den as i64 {
        let n = (x * d as f64).round();
        let dist = (x - n / d as f64).abs();
        if dist < best_dist {
            best = Ratio::new(n as i64, d);
            best_dist = dist;
        }
    }
    (best, best_dist)
}

/// Rounds each coefficient to the nearest rational with denominator at most
/// `max_den`. Returns `None` for `max_den = 0` or non-finite input.
pub fn snap_rational(theta: &[f64], max_den: u32) -> Option<SnapResult> {
    if max_den == 0 || theta.iter().any(|t| !t.is_finite()) {
        return None;
    }
    let mut values = Vec::with_capacity(theta.len());
    let mut max_distance = 0f64;
    for &t in theta {
        let (r, dist) = nearest_rational(t, max_den);
        values.push(r);
        max_distance = max_distance.max(dist);
    }
    Some(SnapResult {
        values,
        max_distance,
    })
}

/// `Some(n/d)` when `x` is bitwise equal to a rational with `d ≤ max_den`.
pub fn as_small_rational(x: f64, max_den: u32) -> Option<Ratio<i64>> {
    if !x.is_finite() || x.abs() > 1e15 {
        return None;
    }
    (1..=max_den as i64).find_map(|d| {
        let n = (x * d as f64).round();
        (n / d as f64 == x).then(|| Ratio::new(n as i64, d))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_examples() {
        let s = snap_rational(&[0.120225, -1.0, 0.4166667], 12).unwrap();
        assert_eq!(
            s.values,
            vec![Ratio::new(1, 8), Ratio::from_integer(-1), Ratio::new(5, 12)]
        );
        assert!((s.max_distance - 0.004775).abs() < 1e-9);
        assert!(snap_rational(&[1.0], 0).is_none());
        assert!(snap_rational(&[f64::NAN], 4).is_none());
    }

    #[test]
    fn ties_prefer_small_denominators() {
        assert_eq!(nearest_rational(0.5, 10).0, Ratio::new(1, 2));
        assert_eq!(nearest_rational(0.0, 10).0, Ratio::from_integer(0));
        assert_eq!(nearest_rational(2.0 / 3.0, 9).0, Ratio::new(2, 3));
    }

    #[test]
    fn distance_bound() {
        for i in 0..2000 {
            let x = -3.0 + i as f64 * 0.003_1;
            for n in [1u32, 2, 5, 12] {
                let (r, d) = nearest_rational(x, n);
                assert!(d <= 0.5 / n as f64 + 1e-12);
                assert!((ratio_to_f64(&r) - x).abs() - d < 1e-12);
            }
        }
    }

    #[test]
    fn exact_rationals() {
        assert_eq!(as_small_rational(0.25, 1000), Some(Ratio::new(1, 4)));
        assert_eq!(as_small_rational(5.0 / 12.0, 1000), Some(Ratio::new(5, 12)));
        assert_eq!(as_small_rational(-3.0, 1000), Some(Ratio::from_integer(-3)));
        assert_eq!(as_small_rational(std::f64::consts::PI, 1000), None);
    }
}
