//! Linear structural equation simulator with unmeasured mediator blocks.
//!
//! The generating model has four layers: an upstream mediator block
//! `M0` (length K), the measured mediator `M1`, a downstream block `M2`
//! (length J), and the outcome `Y`:
//!
//! ```text
//! M0 = alpha0 + beta0*T + e0
//! M1 = alpha1 + beta1*T + psi1'M0 + xi1'M0*T + e1
//! M2 = alpha2 + beta2*T + Psi2*M0 + psi3*M1 + Xi2*M0*T + xi3*M1*T + e2
//! Y  = alpha3 + beta3*T + gamma0'M0 + gamma1*M1 + gamma2'M2
//!      + kappa0'M0*T + kappa1*M1*T + kappa2'M2*T + e3
//! ```
//!
//! Treatment is assigned independently of every error, and the errors of
//! different equations are drawn mutually independently — a sufficient
//! (stronger than necessary) construction for the ignorability
//! conditions the estimator relies on. Simulated datasets expose only
//! `(T, M1, Y)`; the upstream and downstream blocks are generated but
//! withheld, which is exactly the unmeasured-mediator setting the
//! estimator is built for.
//!
//! Ground truth comes from two independent routes: closed-form
//! expressions in the structural coefficients, and a brute-force
//! counterfactual Monte Carlo that replays the structural equations
//! under fixed treatment assignments with shared errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Arm, DataError, ObservationRecord, ObservationTable};
use crate::gmm::ThetaVector;
use crate::util::Welford;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("invalid specification: {detail}")]
    InvalidSpec { detail: String },
    #[error("structural ground-truth routes disagree: {detail}")]
    InternalInconsistency { detail: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

impl SimError {
    pub fn name(&self) -> &'static str {
        match self {
            SimError::DimensionMismatch { .. } => "DimensionMismatch",
            SimError::InvalidSpec { .. } => "InvalidSpec",
            SimError::InternalInconsistency { .. } => "InternalInconsistency",
            SimError::Data(e) => e.name(),
        }
    }
}

/// Zero-mean error distribution for one structural equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDist {
    /// Normal with the given standard deviation.
    Normal { std: f64 },
    /// `scale * (B - p)` where `B ~ Bernoulli(p)`.
    ScaledCenteredBernoulli { p: f64, scale: f64 },
    /// Uniform on `(-half_width, half_width)`.
    CenteredUniform { half_width: f64 },
}

impl ErrorDist {
    fn validate(&self, context: &str) -> Result<(), SimError> {
        let bad = |detail: String| Err(SimError::InvalidSpec { detail });
        match *self {
            ErrorDist::Normal { std } => {
                if !(std.is_finite() && std >= 0.0) {
                    return bad(format!("{context}: normal std {std} must be finite and >= 0"));
                }
            }
            ErrorDist::ScaledCenteredBernoulli { p, scale } => {
                if !(0.0..=1.0).contains(&p) || !scale.is_finite() {
                    return bad(format!(
                        "{context}: bernoulli p {p} must lie in [0,1] and scale {scale} be finite"
                    ));
                }
            }
            ErrorDist::CenteredUniform { half_width } => {
                if !(half_width.is_finite() && half_width >= 0.0) {
                    return bad(format!(
                        "{context}: uniform half_width {half_width} must be finite and >= 0"
                    ));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            ErrorDist::Normal { std } => {
                if std == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, std).unwrap().sample(rng)
                }
            }
            ErrorDist::ScaledCenteredBernoulli { p, scale } => {
                let b = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
                scale * (b - p)
            }
            ErrorDist::CenteredUniform { half_width } => {
                half_width * (2.0 * rng.gen::<f64>() - 1.0)
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ErrorDist::Normal { std } => std * std,
            ErrorDist::ScaledCenteredBernoulli { p, scale } => scale * scale * p * (1.0 - p),
            ErrorDist::CenteredUniform { half_width } => half_width * half_width / 3.0,
        }
    }
}

/// Error distributions for the four equations, one entry per component
/// of the vector-valued blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub m0: Vec<ErrorDist>,
    pub m1: ErrorDist,
    pub m2: Vec<ErrorDist>,
    pub y: ErrorDist,
}

/// Full structural parameterization.
///
/// Vector coefficients over the upstream block have length
/// `k_upstream`; those over the downstream block have length
/// `j_downstream`; `Psi2` and `Xi2` are `J x K` matrices stored as rows.
/// Serialized as JSON with exactly these field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsemSpec {
    pub k_upstream: usize,
    pub j_downstream: usize,
    pub alpha0: Vec<f64>,
    pub beta0: Vec<f64>,
    pub alpha1: f64,
    pub beta1: f64,
    pub psi1: Vec<f64>,
    pub xi1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta2: Vec<f64>,
    #[serde(rename = "Psi2")]
    pub psi2: Vec<Vec<f64>>,
    #[serde(rename = "Xi2")]
    pub xi2: Vec<Vec<f64>>,
    pub psi3: Vec<f64>,
    pub xi3: Vec<f64>,
    pub alpha3: f64,
    pub beta3: f64,
    pub gamma0: Vec<f64>,
    pub gamma1: f64,
    pub gamma2: Vec<f64>,
    pub kappa0: Vec<f64>,
    pub kappa1: f64,
    pub kappa2: Vec<f64>,
    pub noise: NoiseSpec,
    pub p_treat: f64,
}

impl LsemSpec {
    /// A model with no upstream or downstream blocks, the plain
    /// single-mediator design.
    #[allow(clippy::too_many_arguments)]
    pub fn single_mediator(
        alpha1: f64,
        beta1: f64,
        alpha3: f64,
        beta3: f64,
        gamma1: f64,
        kappa1: f64,
        mediator_noise: ErrorDist,
        outcome_noise: ErrorDist,
        p_treat: f64,
    ) -> Self {
        LsemSpec {
            k_upstream: 0,
            j_downstream: 0,
            alpha0: vec![],
            beta0: vec![],
            alpha1,
            beta1,
            psi1: vec![],
            xi1: vec![],
            alpha2: vec![],
            beta2: vec![],
            psi2: vec![],
            xi2: vec![],
            psi3: vec![],
            xi3: vec![],
            alpha3,
            beta3,
            gamma0: vec![],
            gamma1,
            gamma2: vec![],
            kappa0: vec![],
            kappa1,
            kappa2: vec![],
            noise: NoiseSpec {
                m0: vec![],
                m1: mediator_noise,
                m2: vec![],
                y: outcome_noise,
            },
            p_treat,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let k = self.k_upstream;
        let j = self.j_downstream;
        let dims: [(&str, usize, usize); 12] = [
            ("alpha0", self.alpha0.len(), k),
            ("beta0", self.beta0.len(), k),
            ("psi1", self.psi1.len(), k),
            ("xi1", self.xi1.len(), k),
            ("gamma0", self.gamma0.len(), k),
            ("kappa0", self.kappa0.len(), k),
            ("alpha2", self.alpha2.len(), j),
            ("beta2", self.beta2.len(), j),
            ("psi3", self.psi3.len(), j),
            ("xi3", self.xi3.len(), j),
            ("gamma2", self.gamma2.len(), j),
            ("kappa2", self.kappa2.len(), j),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(SimError::DimensionMismatch {
                    detail: format!("{name} has length {got}, expected {want}"),
                });
            }
        }
        for (name, mat) in [("Psi2", &self.psi2), ("Xi2", &self.xi2)] {
            if mat.len() != j {
                return Err(SimError::DimensionMismatch {
                    detail: format!("{name} has {} rows, expected {j}", mat.len()),
                });
            }
            for (r, row) in mat.iter().enumerate() {
                if row.len() != k {
                    return Err(SimError::DimensionMismatch {
                        detail: format!("{name} row {r} has length {}, expected {k}", row.len()),
                    });
                }
            }
        }
        if self.noise.m0.len() != k {
            return Err(SimError::DimensionMismatch {
                detail: format!("noise.m0 has length {}, expected {k}", self.noise.m0.len()),
            });
        }
        if self.noise.m2.len() != j {
            return Err(SimError::DimensionMismatch {
                detail: format!("noise.m2 has length {}, expected {j}", self.noise.m2.len()),
            });
        }
        for (i, d) in self.noise.m0.iter().enumerate() {
            d.validate(&format!("noise.m0[{i}]"))?;
        }
        self.noise.m1.validate("noise.m1")?;
        for (i, d) in self.noise.m2.iter().enumerate() {
            d.validate(&format!("noise.m2[{i}]"))?;
        }
        self.noise.y.validate("noise.y")?;
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(SimError::InvalidSpec {
                detail: format!("p_treat {} must lie strictly inside (0,1)", self.p_treat),
            });
        }
        let scalars = [
            self.alpha1,
            self.beta1,
            self.alpha3,
            self.beta3,
            self.gamma1,
            self.kappa1,
        ];
        let vectors = [
            &self.alpha0,
            &self.beta0,
            &self.psi1,
            &self.xi1,
            &self.alpha2,
            &self.beta2,
            &self.psi3,
            &self.xi3,
            &self.gamma0,
            &self.gamma2,
            &self.kappa0,
            &self.kappa2,
        ];
        let all_finite = scalars.iter().all(|v| v.is_finite())
            && vectors.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self
                .psi2
                .iter()
                .chain(self.xi2.iter())
                .all(|row| row.iter().all(|x| x.is_finite()));
        if !all_finite {
            return Err(SimError::InvalidSpec {
                detail: "all coefficients must be finite".into(),
            });
        }
        Ok(())
    }
}

/// True effects and population regression coefficients implied by a
/// structural specification.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub gade0: f64,
    pub gade1: f64,
    pub gacme0: f64,
    pub gacme1: f64,
    pub ate: f64,
    pub theta_true: ThetaVector,
}

/// A Monte Carlo effect estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Brute-force counterfactual estimates of all five effects.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CounterfactualEstimate {
    pub gade0: McEstimate,
    pub gade1: McEstimate,
    pub gacme0: McEstimate,
    pub gacme1: McEstimate,
    pub ate: McEstimate,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn eval_m0(spec: &LsemSpec, t: f64, e0: &[f64]) -> Vec<f64> {
    (0..spec.k_upstream)
        .map(|k| spec.alpha0[k] + spec.beta0[k] * t + e0[k])
        .collect()
}

fn eval_m1(spec: &LsemSpec, t: f64, m0: &[f64], e1: f64) -> f64 {
    spec.alpha1 + spec.beta1 * t + dot(&spec.psi1, m0) + t * dot(&spec.xi1, m0) + e1
}

fn eval_m2(spec: &LsemSpec, t: f64, m0: &[f64], m1: f64, e2: &[f64]) -> Vec<f64> {
    (0..spec.j_downstream)
        .map(|j| {
            spec.alpha2[j]
                + spec.beta2[j] * t
                + dot(&spec.psi2[j], m0)
                + spec.psi3[j] * m1
                + t * (dot(&spec.xi2[j], m0) + spec.xi3[j] * m1)
                + e2[j]
        })
        .collect()
}

fn eval_y(spec: &LsemSpec, t: f64, m0: &[f64], m1: f64, m2: &[f64], e3: f64) -> f64 {
    spec.alpha3
        + spec.beta3 * t
        + dot(&spec.gamma0, m0)
        + spec.gamma1 * m1
        + dot(&spec.gamma2, m2)
        + t * (dot(&spec.kappa0, m0) + spec.kappa1 * m1 + dot(&spec.kappa2, m2))
        + e3
}

pub(crate) struct UnitErrors {
    t_uniform: f64,
    e0: Vec<f64>,
    e1: f64,
    e2: Vec<f64>,
    e3: f64,
}

/// Per-unit generator stream: one ChaCha stream per unit index, so
/// values depend only on `(seed, index)` and never on scheduling.
fn unit_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws every random input of one unit in a fixed order: the treatment
/// uniform first, then the errors of each equation in causal order.
fn draw_errors(spec: &LsemSpec, rng: &mut ChaCha12Rng) -> UnitErrors {
    let t_uniform = rng.gen::<f64>();
    let e0 = spec.noise.m0.iter().map(|d| d.sample(rng)).collect();
    let e1 = spec.noise.m1.sample(rng);
    let e2 = spec.noise.m2.iter().map(|d| d.sample(rng)).collect();
    let e3 = spec.noise.y.sample(rng);
    UnitErrors {
        t_uniform,
        e0,
        e1,
        e2,
        e3,
    }
}

/// Fully evaluated unit, including the withheld blocks.
#[derive(Clone, Debug)]
pub(crate) struct UnitSample {
    pub t: f64,
    #[allow(dead_code)]
    pub m0: Vec<f64>,
    pub m1: f64,
    #[allow(dead_code)]
    pub m2: Vec<f64>,
    pub y: f64,
}

pub(crate) fn sample_unit(spec: &LsemSpec, seed: u64, index: u64) -> UnitSample {
    let mut rng = unit_rng(seed, index);
    let errs = draw_errors(spec, &mut rng);
    let t = if errs.t_uniform < spec.p_treat {
        1.0
    } else {
        0.0
    };
    let m0 = eval_m0(spec, t, &errs.e0);
    let m1 = eval_m1(spec, t, &m0, errs.e1);
    let m2 = eval_m2(spec, t, &m0, m1, &errs.e2);
    let y = eval_y(spec, t, &m0, m1, &m2, errs.e3);
    UnitSample { t, m0, m1, m2, y }
}

/// Generates a synthetic A/B test dataset.
///
/// Each unit draws its treatment with probability `p_treat`
/// independently of all errors, evaluates the four structural equations,
/// and emits only `(T, M1, Y)` — the upstream and downstream blocks are
/// withheld. Deterministic in `seed`: identical seeds give identical
/// tables for any worker-thread count.
pub fn simulate(spec: &LsemSpec, n: usize, seed: u64) -> Result<ObservationTable, SimError> {
    spec.validate()?;
    if n < 4 {
        return Err(SimError::InvalidSpec {
            detail: format!("n = {n} is below the minimum of 4"),
        });
    }
    let records: Vec<ObservationRecord> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let u = sample_unit(spec, seed, i);
            ObservationRecord {
                unit_id: None,
                treatment: if u.t == 1.0 {
                    Arm::Treatment
                } else {
                    Arm::Control
                },
                mediator: u.m1,
                outcome: u.y,
            }
        })
        .collect();
    Ok(ObservationTable::new(records)?)
}

/// Population coefficients of the two-equation regression system implied
/// by the structure, via the closed-form reduced-form substitution.
///
/// Substituting the upstream and downstream equations into the outcome
/// equation (and using that the treatment indicator is idempotent)
/// collects the intercept, treatment, mediator and interaction terms:
///
/// ```text
/// theta_m10 = alpha1 + psi1'alpha0
/// theta_m11 = beta1 + psi1'beta0 + xi1'(alpha0 + beta0)
/// theta_y0  = alpha3 + gamma0'alpha0 + gamma2'(alpha2 + Psi2*alpha0)
/// theta_y1  = beta3 + gamma0'beta0
///             + gamma2'(beta2 + Psi2*beta0 + Xi2*(alpha0 + beta0))
///             + kappa0'(alpha0 + beta0)
///             + kappa2'(alpha2 + beta2 + (Psi2 + Xi2)(alpha0 + beta0))
/// theta_y2  = gamma1 + gamma2'psi3
/// theta_y3  = gamma2'xi3 + kappa1 + kappa2'(psi3 + xi3)
/// ```
pub fn theta_from_structural(spec: &LsemSpec) -> Result<ThetaVector, SimError> {
    spec.validate()?;
    let j = spec.j_downstream;

    let theta_m10 = spec.alpha1 + dot(&spec.psi1, &spec.alpha0);
    let theta_m11 = spec.beta1
        + dot(&spec.psi1, &spec.beta0)
        + dot(&spec.xi1, &spec.alpha0)
        + dot(&spec.xi1, &spec.beta0);

    let mut a0_plus_b0 = vec![0.0; spec.k_upstream];
    for (i, v) in a0_plus_b0.iter_mut().enumerate() {
        *v = spec.alpha0[i] + spec.beta0[i];
    }

    // Downstream block split into its control-arm level, its treatment
    // shift (holding M1 fixed), and its treated-arm level.
    let mut m2_control = vec![0.0; j];
    let mut m2_shift = vec![0.0; j];
    let mut m2_treated = vec![0.0; j];
    for r in 0..j {
        m2_control[r] = spec.alpha2[r] + dot(&spec.psi2[r], &spec.alpha0);
        m2_shift[r] = spec.beta2[r]
            + dot(&spec.psi2[r], &spec.beta0)
            + dot(&spec.xi2[r], &a0_plus_b0);
        m2_treated[r] = spec.alpha2[r]
            + spec.beta2[r]
            + dot(&spec.psi2[r], &a0_plus_b0)
            + dot(&spec.xi2[r], &a0_plus_b0);
    }

    let theta_y0 = spec.alpha3 + dot(&spec.gamma0, &spec.alpha0) + dot(&spec.gamma2, &m2_control);
    let theta_y1 = spec.beta3
        + dot(&spec.gamma0, &spec.beta0)
        + dot(&spec.gamma2, &m2_shift)
        + dot(&spec.kappa0, &a0_plus_b0)
        + dot(&spec.kappa2, &m2_treated);

    let theta_y2 = spec.gamma1 + dot(&spec.gamma2, &spec.psi3);
    let theta_y3 = dot(&spec.gamma2, &spec.xi3)
        + spec.kappa1
        + dot(&spec.kappa2, &spec.psi3)
        + dot(&spec.kappa2, &spec.xi3);

    Ok(ThetaVector {
        theta_m10,
        theta_m11,
        theta_y0,
        theta_y1,
        theta_y2,
        theta_y3,
    })
}

/// Mean of `M1(t, M0(t))`: the reduced-form mediator level in arm `t`.
fn mean_m1(spec: &LsemSpec, t: f64) -> f64 {
    spec.alpha1
        + dot(&spec.psi1, &spec.alpha0)
        + (spec.beta1
            + dot(&spec.psi1, &spec.beta0)
            + dot(&spec.xi1, &spec.alpha0)
            + dot(&spec.xi1, &spec.beta0))
            * t
}

/// Direct effect in structural coefficients, grouped as the
/// channel-by-channel expansion rather than through the regression
/// coefficients.
fn gade_structural(spec: &LsemSpec, t: f64) -> f64 {
    let j = spec.j_downstream;
    let mut a0_plus_b0 = vec![0.0; spec.k_upstream];
    for (i, v) in a0_plus_b0.iter_mut().enumerate() {
        *v = spec.alpha0[i] + spec.beta0[i];
    }
    let m1_t = mean_m1(spec, t);

    let mut m2_t_shift = vec![0.0; j]; // treatment shift of M2 holding M1 fixed
    let mut m2_level = vec![0.0; j]; // level of M2 in the treated arm at M1 = m1_t
    for r in 0..j {
        m2_t_shift[r] =
            spec.beta2[r] + dot(&spec.psi2[r], &spec.beta0) + dot(&spec.xi2[r], &spec.beta0)
                + dot(&spec.xi2[r], &spec.alpha0)
                + spec.xi3[r] * m1_t;
        m2_level[r] = spec.alpha2[r]
            + spec.beta2[r]
            + dot(&spec.psi2[r], &a0_plus_b0)
            + dot(&spec.xi2[r], &a0_plus_b0)
            + (spec.psi3[r] + spec.xi3[r]) * m1_t;
    }

    spec.beta3
        + dot(&spec.gamma0, &spec.beta0)
        + dot(&spec.gamma2, &m2_t_shift)
        + dot(&spec.kappa0, &a0_plus_b0)
        + spec.kappa1 * m1_t
        + dot(&spec.kappa2, &m2_level)
}

/// Mediated effect in structural coefficients.
fn gacme_structural(spec: &LsemSpec, t: f64) -> f64 {
    let m1_shift = spec.beta1
        + dot(&spec.psi1, &spec.beta0)
        + dot(&spec.xi1, &spec.alpha0)
        + dot(&spec.xi1, &spec.beta0);
    let mut channel = spec.gamma1 + spec.kappa1 * t;
    for r in 0..spec.j_downstream {
        channel += (spec.gamma2[r] + spec.kappa2[r] * t) * (spec.psi3[r] + spec.xi3[r] * t);
    }
    channel * m1_shift
}

/// Ground-truth effects from the structure, by two independent routes.
///
/// Route one expands the counterfactual definitions channel by channel
/// in the structural coefficients; route two applies the effect formulas
/// to [`theta_from_structural`]. The two must agree to rounding — a
/// disagreement signals an implementation bug and is reported as an
/// error rather than returned as output.
pub fn true_effects_from_structural(spec: &LsemSpec) -> Result<GroundTruth, SimError> {
    let theta = theta_from_structural(spec)?;

    let mut effects = [0.0f64; 4]; // gade0, gade1, gacme0, gacme1
    for (i, t) in [0.0f64, 1.0f64].into_iter().enumerate() {
        let gade_direct = gade_structural(spec, t);
        let gacme_direct = gacme_structural(spec, t);
        let gade_theta =
            theta.theta_y1 + theta.theta_y3 * (theta.theta_m10 + theta.theta_m11 * t);
        let gacme_theta = theta.theta_m11 * (theta.theta_y2 + theta.theta_y3 * t);
        for (name, a, b) in [
            ("direct", gade_direct, gade_theta),
            ("mediated", gacme_direct, gacme_theta),
        ] {
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(SimError::InternalInconsistency {
                    detail: format!(
                        "{name} effect at t={t}: structural {a} vs coefficient-map {b}"
                    ),
                });
            }
        }
        effects[i] = gade_direct;
        effects[i + 2] = gacme_direct;
    }

    let [gade0, gade1, gacme0, gacme1] = effects;
    let ate = gade0 + gacme1;
    let alt = gade1 + gacme0;
    if (ate - alt).abs() > 1e-12 * (1.0 + ate.abs().max(alt.abs())) {
        return Err(SimError::InternalInconsistency {
            detail: format!("total-effect decompositions disagree: {ate} vs {alt}"),
        });
    }

    Ok(GroundTruth {
        gade0,
        gade1,
        gacme0,
        gacme1,
        ate,
        theta_true: theta,
    })
}

/// All five per-unit counterfactual contributions for one error draw.
#[derive(Clone, Copy, Debug)]
pub(crate) struct UnitEffects {
    pub gade0: f64,
    pub gade1: f64,
    pub gacme0: f64,
    pub gacme1: f64,
    pub ate: f64,
}

/// Evaluates the potential outcomes of one unit under every treatment
/// assignment the effect definitions require, sharing one error draw
/// across all arms (common random numbers).
pub(crate) fn unit_counterfactuals(spec: &LsemSpec, errs: &UnitErrors) -> UnitEffects {
    let m0_0 = eval_m0(spec, 0.0, &errs.e0);
    let m0_1 = eval_m0(spec, 1.0, &errs.e0);
    let m1_0 = eval_m1(spec, 0.0, &m0_0, errs.e1);
    let m1_1 = eval_m1(spec, 1.0, &m0_1, errs.e1);

    // y[a][c]: outcome with treatment and non-mediator blocks in arm a,
    // and the measured mediator held at its arm-c potential value.
    let mut y = [[0.0f64; 2]; 2];
    for (a, m0_a) in [(0usize, &m0_0), (1usize, &m0_1)] {
        let t = a as f64;
        for (c, m1_c) in [(0usize, m1_0), (1usize, m1_1)] {
            let m2 = eval_m2(spec, t, m0_a, m1_c, &errs.e2);
            y[a][c] = eval_y(spec, t, m0_a, m1_c, &m2, errs.e3);
        }
    }

    UnitEffects {
        gade0: y[1][0] - y[0][0],
        gade1: y[1][1] - y[0][1],
        gacme0: y[0][1] - y[0][0],
        gacme1: y[1][1] - y[1][0],
        ate: y[1][1] - y[0][0],
    }
}

/// Brute-force Monte Carlo evaluation of the counterfactual effect
/// definitions.
///
/// Every unit draws one error vector and replays the structural
/// equations under the fixed treatment assignments each definition
/// nests, so the counterfactual arms share random numbers and the
/// per-unit differences telescope exactly. Averages and Monte Carlo
/// standard errors over `n_mc` units are returned.
pub fn counterfactual_oracle(
    spec: &LsemSpec,
    n_mc: usize,
    seed: u64,
) -> Result<CounterfactualEstimate, SimError> {
    spec.validate()?;
    if n_mc < 1000 {
        return Err(SimError::InvalidSpec {
            detail: format!("n_mc = {n_mc} is below the minimum of 1000"),
        });
    }
    let mut acc = [Welford::default(); 5];
    for i in 0..n_mc as u64 {
        let mut rng = unit_rng(seed, i);
        let errs = draw_errors(spec, &mut rng);
        let u = unit_counterfactuals(spec, &errs);
        acc[0].add(u.gade0);
        acc[1].add(u.gade1);
        acc[2].add(u.gacme0);
        acc[3].add(u.gacme1);
        acc[4].add(u.ate);
    }
    let est = |w: &Welford| McEstimate {
        value: w.mean(),
        std_error: w.mean_std_error(),
    };
    Ok(CounterfactualEstimate {
        gade0: est(&acc[0]),
        gade1: est(&acc[1]),
        gacme0: est(&acc[2]),
        gacme1: est(&acc[3]),
        ate: est(&acc[4]),
    })
}
