//! Sign-agreement descent over linear candidates `⟨θ_f, φ⟩ < ⟨θ_g, φ⟩`.
//!
//! `θ = (θ_f, θ_g)` lives on the unit sphere. Each inner step draws a fresh
//! batch, scores it with the exact loss `(1 − ω̄²)²`, stops once that reaches
//! `tol`, and otherwise descends a `tanh` surrogate.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetRow};
use crate::function_space::{
    canonical_difference, snap_rational, CandidateConjecture, EvalContext, FeatureBasis,
    FunctionSpaceError, Relation,
};
use crate::number_theory_data::PrimePiTable;
use crate::verifier::{verify, Domain, Status, VerificationReport, VerifierError};

/// Step for the central-difference gradient.
pub const FD_STEP: f64 = 1e-5;
/// Floor for diagonal metric entries.
pub const METRIC_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle config: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Features(#[from] FunctionSpaceError),
    #[error(transparent)]
    Verify(#[from] VerifierError),
    #[error("non-finite update: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    #[default]
    Identity,
    /// Per-feature second moment over the current batch.
    Diagonal,
}

/// Prefactor of the batch sign sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaScale {
    /// `1/b`: `ω̄ ∈ [−1, 1]` and the loss vanishes on unanimous batches.
    #[default]
    Mean,
    /// `2/b`, kept for comparison; the loss can then never reach zero.
    Doubled,
}

impl OmegaScale {
    fn factor(self, batch: usize) -> f64 {
        match self {
            OmegaScale::Mean => 1.0 / batch as f64,
            OmegaScale::Doubled => 2.0 / batch as f64,
        }
    }

    /// `scale · sum`, dividing last so unanimous batches give exactly `±1` (or `±2`).
    fn apply(self, sum: f64, batch: usize) -> f64 {
        match self {
            OmegaScale::Mean => sum / batch as f64,
            OmegaScale::Doubled => 2.0 * sum / batch as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub tol: f64,
    pub batch_size: usize,
    pub emax: usize,
    pub eta: f64,
    pub kappa: f64,
    pub metric_mode: MetricMode,
    pub restarts: usize,
    pub seed: u64,
    pub snap_denominator: u32,
    pub omega_scale: OmegaScale,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol: 0.0,
            batch_size: 64,
            emax: 20,
            eta: 0.05,
            kappa: 0.05,
            metric_mode: MetricMode::Identity,
            restarts: 20,
            seed: 0,
            snap_denominator: 12,
            omega_scale: OmegaScale::Mean,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OracleError::Config(m.to_string()));
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tol must be ≥ 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if self.emax == 0 {
            return bad("emax must be ≥ 1");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be > 0");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be > 0");
        }
        if self.restarts == 0 {
            return bad("restarts must be ≥ 1");
        }
        if self.snap_denominator == 0 {
            return bad("snap_denominator must be ≥ 1");
        }
        Ok(())
    }
}

/// Basis features of every dataset row, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    width: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn build(
        basis: &FeatureBasis,
        rows: &[DatasetRow],
        pi: Option<&PrimePiTable>,
    ) -> Result<Self> {
        let per_row: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|r| {
                let ctx = pi.map_or(EvalContext::none(), EvalContext::with_table);
                basis.eval_f64(&r.values, &ctx)
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(FeatureMatrix {
            width: basis.len(),
            values: per_row.concat(),
        })
    }

    pub fn from_values(width: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || !values.len().is_multiple_of(width) {
            return Err(OracleError::Domain(format!(
                "{} values do not fill rows of {width}",
                values.len()
            )));
        }
        Ok(FeatureMatrix { width, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn scaled(&self, c: f64) -> FeatureMatrix {
        FeatureMatrix {
            width: self.width,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `f − g` at one feature row.
fn margin(theta: &[f64], phi: &[f64]) -> f64 {
    let k = phi.len();
    phi.iter()
        .enumerate()
        .map(|(j, p)| (theta[j] - theta[k + j]) * p)
        .sum()
}

/// The batch objective at fixed features; all functions take `θ = (θ_f, θ_g)`.
#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub features: &'a FeatureMatrix,
    pub batch: &'a [usize],
    pub scale: OmegaScale,
}

impl<'a> Objective<'a> {
    pub fn new(features: &'a FeatureMatrix, batch: &'a [usize], scale: OmegaScale) -> Result<Self> {
        if batch.is_empty() {
            return Err(OracleError::Domain("empty batch".into()));
        }
        Ok(Objective {
            features,
            batch,
            scale,
        })
    }

    fn factor(&self) -> f64 {
        self.scale.factor(self.batch.len())
    }

    /// `ω̄ = scale · Σ sgn(f − g)`.
    pub fn omega(&self, theta: &[f64]) -> f64 {
        let sum = self
            .batch
            .iter()
            .map(|&i| sign(margin(theta, self.features.row(i))))
            .sum::<f64>();
        self.scale.apply(sum, self.batch.len())
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let w = self.omega(theta);
        (1.0 - w * w).powi(2)
    }

    fn smooth_omega(&self, theta: &[f64], kappa: f64) -> f64 {
        let sum = self
            .batch
            .iter()
            .map(|&i| (kappa * margin(theta, self.features.row(i))).tanh())
            .sum::<f64>();
        self.scale.apply(sum, self.batch.len())
    }

    /// The loss with `sgn` replaced by `tanh(κ·)`.
    pub fn smooth_loss(&self, theta: &[f64], kappa: f64) -> f64 {
        let w = self.smooth_omega(theta, kappa);
        (1.0 - w * w).powi(2)
    }

    /// Central differences of [`smooth_loss`](Self::smooth_loss).
    pub fn gradient(&self, theta: &[f64], kappa: f64) -> Vec<f64> {
        let mut probe = theta.to_vec();
        (0..theta.len())
            .map(|j| {
                probe[j] = theta[j] + FD_STEP;
                let up = self.smooth_loss(&probe, kappa);
                probe[j] = theta[j] - FD_STEP;
                let down = self.smooth_loss(&probe, kappa);
                probe[j] = theta[j];
                (up - down) / (2.0 * FD_STEP)
            })
            .collect()
    }

    /// Chain rule: `dL/dω = −4ω(1 − ω²)`, `dω/dθ_f = scale·Σ κ(1 − s²)φ = −dω/dθ_g`.
    pub fn analytic_gradient(&self, theta: &[f64], kappa: f64) -> Vec<f64> {
        let k = self.features.width();
        let mut dw = vec![0.0; k];
        let mut w = 0.0;
        for &i in self.batch {
            let phi = self.features.row(i);
            let s = (kappa * margin(theta, phi)).tanh();
            w += s;
            for (d, p) in dw.iter_mut().zip(phi) {
                *d += kappa * (1.0 - s * s) * p;
            }
        }
        let scale = self.factor();
        w = self.scale.apply(w, self.batch.len());
        let dl = -4.0 * w * (1.0 - w * w);
        let mut grad: Vec<f64> = dw.iter().map(|d| dl * scale * d).collect();
        grad.extend(dw.iter().map(|d| -dl * scale * d));
        grad
    }
}

/// `M_θ` restricted to diagonal forms; the same entry serves both halves.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Identity,
    Diagonal(Vec<f64>),
}

impl Metric {
    pub fn for_batch(mode: MetricMode, features: &FeatureMatrix, batch: &[usize]) -> Metric {
        match mode {
            MetricMode::Identity => Metric::Identity,
            MetricMode::Diagonal => {
                let k = features.width();
                let mut m = vec![0.0; k];
                for &i in batch {
                    for (acc, p) in m.iter_mut().zip(features.row(i)) {
                        *acc += p * p;
                    }
                }
                let n = batch.len().max(1) as f64;
                Metric::Diagonal(m.into_iter().map(|v| (v / n).max(METRIC_FLOOR)).collect())
            }
        }
    }

    fn entry(&self, j: usize) -> f64 {
        match self {
            Metric::Identity => 1.0,
            Metric::Diagonal(m) => m[j % m.len()],
        }
    }
}

/// Rescales to unit Euclidean norm; `None` for the zero or a non-finite vector.
pub fn gauge_fix(theta: &[f64]) -> Option<Vec<f64>> {
    let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| theta.iter().map(|t| t / norm).collect())
}

/// `θ' = gauge_fix(θ − η M⁻¹ ∇)`.
pub fn step(theta: &[f64], grad: &[f64], eta: f64, metric: &Metric) -> Result<Vec<f64>> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(OracleError::NonFinite("gradient".into()));
    }
    let moved: Vec<f64> = theta
        .iter()
        .zip(grad)
        .enumerate()
        .map(|(j, (t, g))| t - eta * g / metric.entry(j))
        .collect();
    gauge_fix(&moved).ok_or_else(|| OracleError::NonFinite("update collapsed to zero".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

/// One descent from a fixed starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub trajectory: Vec<TrajectoryPoint>,
    pub theta: Vec<f64>,
    /// `ω̄` on the batch that met the tolerance.
    pub omega: f64,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

/// Uniform direction on the unit sphere in `R^dim`.
pub fn initial_theta(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = gauge_fix(&v) {
            return u;
        }
    }
}

pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs the inner loop from `theta0` (any nonzero scale): `emax` epochs of
/// `batch_size` steps, each on a fresh batch drawn with replacement.
pub fn descend(
    config: &OracleConfig,
    features: &FeatureMatrix,
    theta0: &[f64],
    rng: &mut ChaCha8Rng,
) -> Descent {
    let mut trajectory = Vec::new();
    let Some(mut theta) = gauge_fix(theta0) else {
        return Descent {
            trajectory,
            theta: theta0.to_vec(),
            omega: 0.0,
            converged: false,
            diagnostic: Some("initial θ is zero".into()),
        };
    };
    let b = config.batch_size;
    let mut batch = vec![0usize; b];
    for epoch in 0..config.emax {
        for step_idx in 0..b {
            for slot in batch.iter_mut() {
                *slot = rng.random_range(0..features.len());
            }
            let obj = Objective {
                features,
                batch: &batch,
                scale: config.omega_scale,
            };
            let loss = obj.loss(&theta);
            trajectory.push(TrajectoryPoint {
                epoch,
                step: step_idx,
                loss,
            });
            if loss <= config.tol {
                let omega = obj.omega(&theta);
                return Descent {
                    trajectory,
                    theta,
                    omega,
                    converged: true,
                    diagnostic: None,
                };
            }
            let grad = obj.gradient(&theta, config.kappa);
            let metric = Metric::for_batch(config.metric_mode, features, &batch);
            match step(&theta, &grad, config.eta, &metric) {
                Ok(next) => theta = next,
                Err(e) => {
                    let diagnostic = Some(format!("epoch {epoch} step {step_idx}: {e}"));
                    return Descent {
                        trajectory,
                        theta,
                        omega: 0.0,
                        converged: false,
                        diagnostic,
                    };
                }
            }
        }
    }
    Descent {
        trajectory,
        theta,
        omega: 0.0,
        converged: false,
        diagnostic: None,
    }
}

/// A candidate built from a converged restart, with its full-domain report.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub restart: usize,
    pub candidate: CandidateConjecture,
    pub report: VerificationReport,
    /// Denominator bound of the snap that produced the candidate.
    pub denominator: u32,
    pub snap_distance: f64,
}

impl Emission {
    pub fn verified(&self) -> bool {
        self.report.holds_as_declared
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub restart: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub converged: bool,
    pub emission: Option<Emission>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub config: OracleConfig,
    pub basis_id: String,
    pub restarts: Vec<RestartOutcome>,
    /// Verified emissions, first occurrence per canonical key, in restart order.
    pub candidates: Vec<Emission>,
}

impl OracleRun {
    /// Lowest loss seen across all restarts.
    pub fn best_loss(&self) -> Option<f64> {
        self.restarts
            .iter()
            .flat_map(|r| r.trajectory.iter().map(|p| p.loss))
            .reduce(f64::min)
    }
}

/// Orients `θ` so that `f < g` on the accepting batch, then tries snaps of
/// `θ_g − θ_f` from coarse to fine and keeps the first one the verifier
/// accepts: strict if it holds strictly, non-strict if only equality points
/// stand in the way. Falls back to the finest snap with its failing report.
pub fn emit(
    config: &OracleConfig,
    basis: &FeatureBasis,
    theta: &[f64],
    omega: f64,
    restart: usize,
    domain: &Domain,
    pi: Option<&PrimePiTable>,
) -> Result<Option<Emission>> {
    let k = basis.len();
    let (mut tf, mut tg) = (&theta[..k], &theta[k..]);
    if omega > 0.0 {
        std::mem::swap(&mut tf, &mut tg);
    }
    let d: Vec<f64> = tg.iter().zip(tf).map(|(g, f)| g - f).collect();
    let max = d.iter().fold(0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Ok(None);
    }
    let d: Vec<f64> = d.iter().map(|x| x / max).collect();
    let mut tried: Vec<Vec<f64>> = Vec::new();
    let mut fallback = None;
    for den in 1..=config.snap_denominator {
        let snap =
            snap_rational(&d, den).ok_or_else(|| OracleError::NonFinite("coefficients".into()))?;
        let v = snap.as_f64();
        // the g side must be nonzero and the difference new
        if !v.iter().any(|&x| x > 0.0) || tried.contains(&v) {
            continue;
        }
        tried.push(v.clone());
        let mut candidate =
            CandidateConjecture::from_difference(basis.clone(), &v, Relation::Strict)?;
        let mut report = verify(&candidate, domain, pi)?;
        if report.status == Status::NonStrict {
            candidate.relation = Relation::NonStrict;
            report = verify(&candidate, domain, pi)?;
        }
        let emission = Emission {
            restart,
            candidate,
            report,
            denominator: den,
            snap_distance: snap.max_distance,
        };
        if emission.verified() {
            return Ok(Some(emission));
        }
        fallback = Some(emission);
    }
    Ok(fallback)
}

/// Runs every restart (in parallel, merged in restart order) on the points of
/// `rows` and verifies emissions on `domain`.
pub fn run_oracle_on(
    config: &OracleConfig,
    basis: &FeatureBasis,
    rows: &[DatasetRow],
    domain: &Domain,
    pi: Option<&PrimePiTable>,
) -> Result<OracleRun> {
    config.validate()?;
    if rows.is_empty() {
        return Err(OracleError::Domain("dataset is empty".into()));
    }
    let features = FeatureMatrix::build(basis, rows, pi)?;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(config.seed, r);
            let theta0 = initial_theta(&mut rng, 2 * basis.len());
            let descent = descend(config, &features, &theta0, &mut rng);
            let emission = if descent.converged {
                emit(config, basis, &descent.theta, descent.omega, r, domain, pi)?
            } else {
                None
            };
            Ok(RestartOutcome {
                restart: r,
                trajectory: descent.trajectory,
                converged: descent.converged,
                emission,
                diagnostic: descent.diagnostic,
            })
        })
        .collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    for e in outcomes
        .iter()
        .filter_map(|o| o.emission.as_ref())
        .filter(|e| e.verified())
    {
        if seen.insert(canonical_difference(&e.candidate)?.key()) {
            candidates.push(e.clone());
        }
    }
    Ok(OracleRun {
        config: config.clone(),
        basis_id: basis.id.clone(),
        restarts: outcomes,
        candidates,
    })
}

/// [`run_oracle_on`] with the dataset rows as both training and verification set.
pub fn run_oracle(
    config: &OracleConfig,
    dataset: &Dataset,
    basis: &FeatureBasis,
    pi: Option<&PrimePiTable>,
) -> Result<OracleRun> {
    let domain = Domain::rows("dataset", dataset.rows.clone());
    run_oracle_on(config, basis, &dataset.rows, &domain, pi)
}

fn candidate_theta(c: &CandidateConjecture) -> Vec<f64> {
    c.theta_f.iter().chain(&c.theta_g).copied().collect()
}

/// `ω̄` of a candidate over explicit rows.
pub fn omega(
    c: &CandidateConjecture,
    batch: &[DatasetRow],
    pi: Option<&PrimePiTable>,
    scale: OmegaScale,
) -> Result<f64> {
    let x = FeatureMatrix::build(&c.basis, batch, pi)?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    Ok(Objective::new(&x, &idx, scale)?.omega(&candidate_theta(c)))
}

pub fn loss(
    c: &CandidateConjecture,
    batch: &[DatasetRow],
    pi: Option<&PrimePiTable>,
    scale: OmegaScale,
) -> Result<f64> {
    let w = omega(c, batch, pi, scale)?;
    Ok((1.0 - w * w).powi(2))
}

pub fn smooth_loss(
    c: &CandidateConjecture,
    batch: &[DatasetRow],
    pi: Option<&PrimePiTable>,
    kappa: f64,
    scale: OmegaScale,
) -> Result<f64> {
    let x = FeatureMatrix::build(&c.basis, batch, pi)?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    Ok(Objective::new(&x, &idx, scale)?.smooth_loss(&candidate_theta(c), kappa))
}

pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    trajectory: &[TrajectoryPoint],
) -> std::io::Result<()> {
    writeln!(out, "epoch,step,loss")?;
    for p in trajectory {
        writeln!(out, "{},{},{}", p.epoch, p.step, p.loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Scalar;
    use crate::function_space::{builtin_basis, parse, BasisFunction};

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_values(rows[0].len(), rows.concat()).unwrap()
    }

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn omega_examples() {
        let x = matrix(&[&[1.0, 2.0], &[2.0, 1.0], &[3.0, 3.0], &[1.0, 5.0]]);
        let idx = all(4);
        let obj = Objective::new(&x, &idx, OmegaScale::Mean).unwrap();
        // f = φ₀, g = φ₀ + 1 via a third constant column is not available; use θ_g > θ_f
        let f_lt_g = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(obj.omega(&f_lt_g), -1.0);
        assert_eq!(obj.loss(&f_lt_g), 0.0);
        let equal = [0.3, -0.2, 0.3, -0.2];
        assert_eq!(obj.omega(&equal), 0.0);
        assert_eq!(obj.loss(&equal), 1.0);
        // f = φ₀, g = φ₁: signs −, +, 0, −
        let mixed = Objective::new(&x, &[0, 1], OmegaScale::Mean).unwrap();
        assert_eq!(mixed.omega(&[1.0, 0.0, 0.0, 1.0]), 0.0);
        assert!(Objective::new(&x, &[], OmegaScale::Mean).is_err());
        let doubled = Objective::new(&x, &idx, OmegaScale::Doubled).unwrap();
        assert_eq!(doubled.omega(&f_lt_g), -2.0);
        assert_eq!(doubled.loss(&f_lt_g), 9.0);
    }

    #[test]
    fn loss_at_inverse_sqrt_two() {
        // ω̄ = ±1/√2 cannot come from a sign mean, so check the formula itself
        let w = std::f64::consts::FRAC_1_SQRT_2;
        assert!(((1.0 - w * w).powi(2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn smooth_loss_examples() {
        let x = matrix(&[&[1.0], &[2.0], &[0.5]]);
        let idx = all(3);
        let obj = Objective::new(&x, &idx, OmegaScale::Mean).unwrap();
        let equal = [0.6, 0.6];
        for kappa in [0.1, 1.0, 50.0] {
            assert_eq!(obj.smooth_loss(&equal, kappa), 1.0);
        }
        let negative = [0.0, 1.0];
        let mut prev = f64::INFINITY;
        for kappa in [1.0, 5.0, 20.0, 100.0] {
            let v = obj.smooth_loss(&negative, kappa);
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-12);
        let single = Objective::new(&x, &[1], OmegaScale::Mean).unwrap();
        let m: f64 = -2.0 * 0.7;
        let closed = (1.0 - (0.9 * m).tanh().powi(2)).powi(2);
        assert!((single.smooth_loss(&[0.0, 0.7], 0.9) - closed).abs() < 1e-15);
    }

    #[test]
    fn saturation_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..20);
            let vals: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0.5..3.0) * if rng.random() { 1.0 } else { -1.0 })
                .collect();
            // one feature, θ = (1, 0): margins are the feature values
            let x = FeatureMatrix::from_values(1, vals).unwrap();
            let idx = all(n);
            let obj = Objective::new(&x, &idx, OmegaScale::Mean).unwrap();
            for kappa in [5.0, 8.0, 12.0] {
                let gap = (obj.smooth_loss(&[1.0, 0.0], kappa) - obj.loss(&[1.0, 0.0])).abs();
                assert!(gap <= 4.0 * (-kappa).exp(), "{gap}");
            }
        }
    }

    #[test]
    fn gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let k = rng.random_range(1..5);
            let n = rng.random_range(1..40);
            let vals: Vec<f64> = (0..n * k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x = FeatureMatrix::from_values(k, vals).unwrap();
            let idx = all(n);
            let obj = Objective::new(&x, &idx, OmegaScale::Mean).unwrap();
            let theta = initial_theta(&mut rng, 2 * k);
            let kappa = rng.random_range(0.2..2.0);
            let fd = obj.gradient(&theta, kappa);
            let an = obj.analytic_gradient(&theta, kappa);
            let scale = an.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
            for (a, b) in fd.iter().zip(&an) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn saturated_gradient_vanishes() {
        let x = matrix(&[&[1.0, 2.0], &[3.0, 1.0], &[2.0, 2.0]]);
        let idx = all(3);
        let obj = Objective::new(&x, &idx, OmegaScale::Mean).unwrap();
        let theta = gauge_fix(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        let g = obj.gradient(&theta, 60.0);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
    }

    #[test]
    fn constant_feature_gradient_is_antisymmetric() {
        let x = matrix(&[&[1.0, 2.0], &[1.0, -1.0], &[1.0, 0.5]]);
        let idx = all(3);
        let obj = Objective::new(&x, &idx, OmegaScale::Mean).unwrap();
        let theta = gauge_fix(&[0.2, -0.4, 0.5, 0.1]).unwrap();
        let g = obj.gradient(&theta, 0.7);
        assert!((g[0] + g[2]).abs() < 1e-9);
        assert!((g[1] + g[3]).abs() < 1e-9);
    }

    #[test]
    fn step_examples() {
        let s = step(&[1.0, 0.0], &[0.0, 1.0], 1.0, &Metric::Identity).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - r).abs() < 1e-15 && (s[1] + r).abs() < 1e-15);
        let t = [3.0, 4.0];
        assert_eq!(
            step(&t, &[0.0, 0.0], 0.5, &Metric::Identity).unwrap(),
            vec![0.6, 0.8]
        );
        assert!(step(&t, &[f64::NAN, 0.0], 0.5, &Metric::Identity).is_err());
    }

    #[test]
    fn diagonal_step_ignores_feature_scale() {
        // features × c with κ/c and η·c² reproduce the same direction
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vals: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..5.0)).collect();
        let x = FeatureMatrix::from_values(3, vals).unwrap();
        let idx = all(10);
        let theta = initial_theta(&mut rng, 6);
        for c in [0.1, 7.0] {
            let xc = x.scaled(c);
            let (kappa, eta) = (0.3, 0.2);
            let g = Objective::new(&x, &idx, OmegaScale::Mean)
                .unwrap()
                .gradient(&theta, kappa);
            let gc = Objective::new(&xc, &idx, OmegaScale::Mean)
                .unwrap()
                .gradient(&theta, kappa / c);
            let m = Metric::for_batch(MetricMode::Diagonal, &x, &idx);
            let mc = Metric::for_batch(MetricMode::Diagonal, &xc, &idx);
            let a = step(&theta, &g, eta, &m).unwrap();
            let b = step(&theta, &gc, eta * c * c, &mc).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-6, "{a:?} vs {b:?}");
            }
        }
    }

    fn pi_ab_rows(hi: i64) -> Vec<DatasetRow> {
        (2..=hi)
            .flat_map(|a| (2..=hi).map(move |b| DatasetRow::ints(&[a, b])))
            .collect()
    }

    #[test]
    fn tol_one_succeeds_immediately() {
        let basis = builtin_basis("pi-ab").unwrap();
        let rows = pi_ab_rows(20);
        let table = PrimePiTable::build(400).unwrap();
        let domain = Domain::square(2, 2, 20).unwrap();
        let config = OracleConfig {
            tol: 1.0,
            restarts: 3,
            ..OracleConfig::default()
        };
        let run = run_oracle_on(&config, &basis, &rows, &domain, Some(&table)).unwrap();
        assert!(run
            .restarts
            .iter()
            .all(|r| r.converged && r.trajectory.len() == 1));
    }

    #[test]
    fn single_row_dataset() {
        let basis =
            FeatureBasis::new("one", vec!["x".into()], 1, 1, vec![BasisFunction::e(1)]).unwrap();
        let ds = Dataset::new(vec!["x".into()], vec![DatasetRow::ints(&[3])]);
        let config = OracleConfig {
            restarts: 4,
            emax: 2,
            batch_size: 4,
            ..OracleConfig::default()
        };
        let run = run_oracle(&config, &ds, &basis, None).unwrap();
        for r in &run.restarts {
            // the margin is (θ_f − θ_g)·3, nonzero for a random direction
            assert!(r.converged);
            assert_eq!(r.trajectory.len(), 1);
        }
        assert_eq!(run.candidates.len(), 1);
        assert_eq!(run.candidates[0].candidate.to_string(), "0 < x");
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let basis = builtin_basis("pi-ab").unwrap();
        let rows = pi_ab_rows(40);
        let table = PrimePiTable::build(1600).unwrap();
        let domain = Domain::square(2, 2, 40).unwrap();
        let config = OracleConfig {
            restarts: 6,
            seed: 17,
            ..OracleConfig::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_oracle_on(&config, &basis, &rows, &domain, Some(&table)).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, run(1));
    }

    #[test]
    fn gauge_invariant_trajectories() {
        let basis = builtin_basis("pi-ab").unwrap();
        let rows = pi_ab_rows(60);
        let table = PrimePiTable::build(3600).unwrap();
        let x = FeatureMatrix::build(&basis, &rows, Some(&table)).unwrap();
        let config = OracleConfig {
            emax: 5,
            tol: 0.0,
            ..OracleConfig::default()
        };
        for seed in 0..5 {
            let mut rng = restart_rng(seed, 0);
            let theta = initial_theta(&mut rng, 6);
            let csv = |lambda: f64| {
                let scaled: Vec<f64> = theta.iter().map(|t| t * lambda).collect();
                let d = descend(&config, &x, &scaled, &mut rng.clone());
                let mut buf = Vec::new();
                write_trajectory_csv(&mut buf, &d.trajectory).unwrap();
                buf
            };
            let base = csv(1.0);
            assert_eq!(csv(0.1), base);
            assert_eq!(csv(10.0), base);
        }
    }

    #[test]
    fn losses_bounded_and_best_so_far_monotone() {
        let basis = builtin_basis("pi-ab").unwrap();
        let rows = pi_ab_rows(30);
        let table = PrimePiTable::build(900).unwrap();
        let domain = Domain::square(2, 2, 30).unwrap();
        let config = OracleConfig {
            restarts: 4,
            emax: 3,
            seed: 8,
            ..OracleConfig::default()
        };
        let run = run_oracle_on(&config, &basis, &rows, &domain, Some(&table)).unwrap();
        for r in &run.restarts {
            assert!(r.trajectory.len() <= config.emax * config.batch_size);
            let mut best = f64::INFINITY;
            for p in &r.trajectory {
                assert!((0.0..=1.0).contains(&p.loss));
                let next = best.min(p.loss);
                assert!(next <= best);
                best = next;
            }
            if r.converged {
                assert!(r.trajectory.last().unwrap().loss <= config.tol);
            }
        }
    }

    #[test]
    fn emitted_candidates_are_oriented() {
        let basis = builtin_basis("pi-ab").unwrap();
        let rows = pi_ab_rows(30);
        let table = PrimePiTable::build(900).unwrap();
        let domain = Domain::square(2, 2, 30).unwrap();
        let config = OracleConfig {
            restarts: 8,
            seed: 3,
            ..OracleConfig::default()
        };
        let run = run_oracle_on(&config, &basis, &rows, &domain, Some(&table)).unwrap();
        for e in run.restarts.iter().filter_map(|r| r.emission.as_ref()) {
            let w = omega(&e.candidate, &rows, Some(&table), OmegaScale::Mean).unwrap();
            assert!(
                w == -1.0 || !e.verified() || e.candidate.relation == Relation::NonStrict,
                "{} {w}",
                e.candidate
            );
        }
        let keys: Vec<String> = run
            .candidates
            .iter()
            .map(|e| canonical_difference(&e.candidate).unwrap().key())
            .collect();
        let unique: HashSet<&String> = keys.iter().collect();
        assert_eq!(unique.len(), keys.len());
    }

    #[test]
    fn candidate_level_wrappers() {
        let basis = builtin_basis("pi-ab").unwrap();
        let table = PrimePiTable::build(10_000).unwrap();
        let c = parse("π(a)+π(b) ≤ π(ab)", &basis).unwrap();
        let batch: Vec<DatasetRow> = [[5, 7], [11, 13], [20, 30]]
            .iter()
            .map(|p| DatasetRow::ints(p))
            .collect();
        assert_eq!(
            omega(&c, &batch, Some(&table), OmegaScale::Mean).unwrap(),
            -1.0
        );
        assert_eq!(
            loss(&c, &batch, Some(&table), OmegaScale::Mean).unwrap(),
            0.0
        );
        let s = smooth_loss(&c, &batch, Some(&table), 5.0, OmegaScale::Mean).unwrap();
        assert!(s < 1e-6);
        assert!(omega(&c, &[], Some(&table), OmegaScale::Mean).is_err());
        let _ = Scalar::Int(0);
    }

    #[test]
    fn config_validation_and_json() {
        assert!(OracleConfig::default().validate().is_ok());
        for bad in [
            OracleConfig {
                batch_size: 0,
                ..OracleConfig::default()
            },
            OracleConfig {
                eta: 0.0,
                ..OracleConfig::default()
            },
            OracleConfig {
                kappa: -1.0,
                ..OracleConfig::default()
            },
            OracleConfig {
                tol: f64::NAN,
                ..OracleConfig::default()
            },
            OracleConfig {
                restarts: 0,
                ..OracleConfig::default()
            },
            OracleConfig {
                snap_denominator: 0,
                ..OracleConfig::default()
            },
            OracleConfig {
                emax: 0,
                ..OracleConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let cfg: OracleConfig = serde_json::from_str(
            r#"{"tol": 0.01, "metric_mode": "diagonal", "omega_scale": "doubled"}"#,
        )
        .unwrap();
        assert_eq!(cfg.metric_mode, MetricMode::Diagonal);
        assert_eq!(cfg.omega_scale, OmegaScale::Doubled);
        assert_eq!(cfg.batch_size, 64);
        assert!(serde_json::from_str::<OracleConfig>(r#"{"tolerance": 1}"#).is_err());
    }
}
