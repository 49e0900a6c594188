//! Randomized checks of the structural facts about 𝒯, ℋ, 𝒢, 𝒥₁ and 𝒥₂.
//!
//! Every check here is backed by a theorem, so a failure points at an
//! implementation bug rather than at bad luck with the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::*;

/// Sample points per random function pair.
const SAMPLES: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub trials: usize,
    /// Worst numerical error seen, where the property has one.
    pub max_error: f64,
    pub detail: String,
}

struct Check {
    name: &'static str,
    trials: usize,
    max_error: f64,
    failures: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            trials: 0,
            max_error: 0.0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, err: f64, what: impl FnOnce() -> String) {
        self.trials += 1;
        if err.is_finite() {
            self.max_error = self.max_error.max(err);
        }
        if !ok && self.failures.len() < 3 {
            self.failures.push(what());
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name,
            passed: self.failures.is_empty() && self.trials > 0,
            trials: self.trials,
            max_error: self.max_error,
            detail: self.failures.join("; "),
        }
    }
}

/// Draws random elements of the named subgroups.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn nonzero(&mut self) -> f64 {
        let mag = self.rng.random_range(0.2..3.0);
        if self.rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    }

    fn positive(&mut self) -> f64 {
        self.rng.random_range(0.2..3.0)
    }

    fn real(&mut self) -> f64 {
        self.rng.random_range(-3.0..3.0)
    }

    pub fn element(&mut self, group: Subgroup) -> GroupElement {
        match group {
            Subgroup::T => DilationParam::new(self.positive()).unwrap().matrix(),
            Subgroup::H => loop {
                let (p, q) = (self.real(), self.real());
                if (p + q - 1.0).abs() > 0.2 {
                    break HParams::new(p, q).unwrap().matrix();
                }
            },
            Subgroup::G => {
                let (a, b, c) = (self.nonzero(), self.positive(), self.real());
                self.abc(a, b, c)
            }
            Subgroup::J1 => {
                let (b, c) = (self.positive(), self.real());
                self.abc(b, b, c)
            }
            Subgroup::J2 => {
                let (b, c) = (self.positive(), self.real());
                self.abc(0.5, b, c)
            }
        }
    }

    fn abc(&mut self, a: f64, b: f64, c: f64) -> GroupElement {
        mat_from_abc(ConjugatedParams::new(a, b, c).unwrap()).unwrap()
    }

    /// A pair with `f < g` at every sample, gap at least 0.01.
    pub fn conjecture_pair(&mut self) -> FunctionPair {
        let f: Vec<f64> = (0..SAMPLES)
            .map(|_| self.rng.random_range(-5.0..5.0))
            .collect();
        let g = f
            .iter()
            .map(|x| x + self.rng.random_range(0.01..5.0))
            .collect();
        FunctionPair::new(f, g).unwrap()
    }
}

/// Runs the whole suite with `trials` random draws per property.
pub fn run_suite(trials: usize, seed: u64) -> Vec<PropertyOutcome> {
    let mut s = Sampler::new(seed);
    vec![
        closure(&mut s, trials),
        h_determinant_identity(&mut s, trials),
        invariance(&mut s, trials),
        non_invariance_witness(),
        decomposition(&mut s, trials),
        semidirect_structure(&mut s, trials),
        fixed_point_lemma(&mut s, trials),
        free_action(&mut s, trials),
        fixed_point_free(&mut s, trials),
        two_components(&mut s, trials),
        closedness(&mut s, trials),
    ]
}

fn closure(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("closure under products and inverses");
    for group in Subgroup::ALL {
        for _ in 0..trials {
            let x = s.element(group);
            let y = s.element(group);
            let prod = x * y;
            let inv = x.inverse();
            let ok = group.contains(&prod) && group.contains(&inv);
            check.record(ok, 0.0, || format!("{}: {x} * {y}", group.name()));
        }
    }
    check.finish()
}

fn h_determinant_identity(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("H: 1 + det = tr");
    for _ in 0..trials {
        let h = s.element(Subgroup::H);
        let err = (1.0 + h.det() - h.trace()).abs();
        check.record(err <= MEMBERSHIP_TOL, err, || format!("{h}"));
    }
    check.finish()
}

fn invariance(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("G preserves f<g and scales g-f by 2b");
    for _ in 0..trials {
        let a = s.element(Subgroup::G);
        let b = abc_from_mat(&a).unwrap().b;
        let pair = s.conjecture_pair();
        let moved = act(&a, &pair);
        let err = moved
            .difference()
            .iter()
            .zip(pair.difference())
            .map(|(new, old)| (new - 2.0 * b * old).abs())
            .fold(0.0, f64::max);
        let ok = moved.is_conjecture() && err <= MEMBERSHIP_TOL;
        check.record(ok, err, || format!("{a}"));
    }
    check.finish()
}

fn non_invariance_witness() -> PropertyOutcome {
    let mut check = Check::new("-I leaves the conjecture space");
    let pair = FunctionPair::constant(0.0, 1.0, SAMPLES);
    let flipped = act(&GroupElement::scalar(-1.0).unwrap(), &pair);
    let ok = !flipped.is_conjecture() && !is_in_g(&GroupElement::scalar(-1.0).unwrap());
    check.record(ok, 0.0, || "-I kept (0,1) in the conjecture space".into());
    check.finish()
}

fn decomposition(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("G = T·H round-trip and uniqueness");
    for _ in 0..trials {
        let a = s.element(Subgroup::G);
        let Ok((t, h)) = decompose_th(&a) else {
            check.record(false, f64::NAN, || format!("{a} did not decompose"));
            continue;
        };
        let rebuilt = t.matrix() * h.matrix();
        let err = rebuilt.max_abs_diff(&a);
        let again = decompose_th(&rebuilt);
        let unique = again.is_ok_and(|(t2, h2)| {
            (t2.lambda - t.lambda).abs() <= ROUNDTRIP_TOL
                && (h2.p - h.p).abs() <= ROUNDTRIP_TOL
                && (h2.q - h.q).abs() <= ROUNDTRIP_TOL
        });
        let ok = err < ROUNDTRIP_TOL && unique && is_in_t(&t.matrix()) && is_in_h(&h.matrix());
        check.record(ok, err, || format!("{a}"));
    }
    check.finish()
}

fn semidirect_structure(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("T ∩ H = {I} and T normal in G");
    let id = GroupElement::identity();
    check.record(is_in_t(&id) && is_in_h(&id), 0.0, || {
        "identity missing from T or H".into()
    });
    for _ in 0..trials {
        let t = s.element(Subgroup::T);
        let h = s.element(Subgroup::H);
        let g = s.element(Subgroup::G);
        let t_only = t.is_identity(MEMBERSHIP_TOL) || !is_in_h(&t);
        let h_only = h.is_identity(MEMBERSHIP_TOL) || !is_in_t(&h);
        let by_h = (h * t) * h.inverse();
        let by_g = (g * t) * g.inverse();
        let err = by_h.max_abs_diff(&t).max(by_g.max_abs_diff(&t));
        let ok = t_only && h_only && is_in_t(&by_h) && is_in_t(&by_g);
        check.record(ok, err, || format!("t={t} h={h} g={g}"));
    }
    check.finish()
}

fn fixed_point_lemma(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("fixed point exists iff 2b=1 and 2a≠1");
    for _ in 0..trials {
        // 2b = 1 and 2a ≠ 1: witness must exist and be fixed.
        let a = loop {
            let a = s.nonzero();
            if (2.0 * a - 1.0).abs() > 0.05 {
                break a;
            }
        };
        let c = s.real();
        let m = s.abc(a, 0.5, c);
        match fixed_point_witness(&m, SAMPLES) {
            Ok(Some(w)) => {
                let err = act(&m, &w).max_abs_diff(&w);
                let ok = err <= ROUNDTRIP_TOL && w.is_conjecture();
                check.record(ok, err, || format!("witness not fixed by {m}"));
            }
            other => check.record(false, f64::NAN, || {
                format!("{m}: expected witness, got {other:?}")
            }),
        }
        // 2b ≠ 1: no witness.
        let b = loop {
            let b = s.positive();
            if (2.0 * b - 1.0).abs() > 0.05 {
                break b;
            }
        };
        let (a, c) = (s.nonzero(), s.real());
        let m = s.abc(a, b, c);
        let ok = matches!(fixed_point_witness(&m, SAMPLES), Ok(None));
        check.record(ok, 0.0, || format!("{m}: unexpected witness with 2b≠1"));
        // 2b = 1, 2a = 1, c ≠ 0: no witness.
        let c = loop {
            let c = s.real();
            if c.abs() > 0.05 {
                break c;
            }
        };
        let m = s.abc(0.5, 0.5, c);
        let ok = matches!(fixed_point_witness(&m, SAMPLES), Ok(None));
        check.record(ok, 0.0, || format!("{m}: unexpected witness with 2a=1"));
    }
    check.finish()
}

fn free_action(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("J1 and J2 act freely");
    for group in [Subgroup::J1, Subgroup::J2] {
        for _ in 0..trials {
            let m = s.element(group);
            if m.is_identity(MEMBERSHIP_TOL) {
                continue;
            }
            let ok = matches!(fixed_point_witness(&m, SAMPLES), Ok(None));
            check.record(ok, 0.0, || {
                format!("{}: {m} has a fixed point", group.name())
            });
        }
    }
    check.finish()
}

fn fixed_point_free(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    let mut check = Check::new("dilation by 2 moves every conjecture");
    let two = GroupElement::scalar(2.0).unwrap();
    for _ in 0..trials {
        let pair = s.conjecture_pair();
        let moved = act(&two, &pair).max_abs_diff(&pair);
        check.record(moved > 0.0, 0.0, || "pair fixed by 2I".into());
    }
    check.finish()
}

fn two_components(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    // Straight path in matrix space from the a<0 component to the a>0 one;
    // the midpoint has a = 0 and must fall outside 𝒢.
    const STEPS: usize = 21;
    let mut check = Check::new("G has two components separated by a=0");
    for _ in 0..trials {
        let a = s.positive();
        let (b, c) = (s.positive(), s.real());
        let start = s.abc(-a, b, c).entries();
        let end = s.abc(a, b, c).entries();
        let mut ok = true;
        for k in 0..STEPS {
            let t = k as f64 / (STEPS - 1) as f64;
            let mut e = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    e[i][j] = (1.0 - t) * start[i][j] + t * end[i][j];
                }
            }
            let member = GroupElement::new(e)
                .ok()
                .and_then(|m| abc_from_mat(&m).ok());
            ok &= match (k.cmp(&(STEPS / 2)), member) {
                (std::cmp::Ordering::Less, Some(p)) => p.a < 0.0,
                (std::cmp::Ordering::Greater, Some(p)) => p.a > 0.0,
                (std::cmp::Ordering::Equal, None) => true,
                _ => false,
            };
        }
        check.record(ok, 0.0, || format!("path a=±{a}, b={b}, c={c}"));
    }
    check.finish()
}

fn closedness(s: &mut Sampler, trials: usize) -> PropertyOutcome {
    // Sequences inside each subgroup whose parameters converge to an
    // admissible limit; the limit matrix must pass membership.
    let mut check = Check::new("subgroups are closed under admissible limits");
    for _ in 0..trials.div_ceil(10) {
        for group in Subgroup::ALL {
            let limit = s.element(group);
            let mut last_gap = f64::INFINITY;
            let mut last_eps = f64::INFINITY;
            let mut inside = true;
            for n in 1..=50 {
                let eps = 1.0 / (n * n) as f64;
                last_eps = eps;
                let member = perturb_within(group, &limit, eps);
                inside &= group.contains(&member);
                last_gap = member.max_abs_diff(&limit);
            }
            let ok = inside && last_gap <= 4.0 * last_eps && group.contains(&limit);
            check.record(ok, last_gap, || format!("{}: limit {limit}", group.name()));
        }
    }
    check.finish()
}

/// An element of `group` at parameter distance `eps` from `m`.
fn perturb_within(group: Subgroup, m: &GroupElement, eps: f64) -> GroupElement {
    match group {
        Subgroup::T => GroupElement::scalar(m.get(0, 0) + eps).unwrap(),
        Subgroup::H => {
            let (p, q) = (m.get(0, 0), m.get(1, 1));
            HParams::new(p + eps, q + eps).unwrap().matrix()
        }
        Subgroup::G | Subgroup::J1 | Subgroup::J2 => {
            let ConjugatedParams { a, b, c } = abc_from_mat(m).unwrap();
            let (a, b) = match group {
                Subgroup::J1 => (b + eps, b + eps),
                Subgroup::J2 => (a, b + eps),
                _ => (a + eps * a.signum(), b + eps),
            };
            mat_from_abc(ConjugatedParams::new(a, b, c + eps).unwrap()).unwrap()
        }
    }
}
