//! Effect estimates, delta-method standard errors, and z-tests.
//!
//! The fitted regression coefficients map to three causal quantities:
//!
//! * `GADE(t)` — generalized average direct effect, the part of the
//!   treatment effect not transmitted by the measured mediator:
//!   `theta_y1 + theta_y3*(theta_m10 + theta_m11*t)`.
//! * `GACME(t)` — generalized average causal mediation effect, the part
//!   transmitted by the induced change in the mediator:
//!   `theta_m11*(theta_y2 + theta_y3*t)`.
//! * `ATE` — the total effect, `GADE(0) + GACME(1) = GADE(1) + GACME(0)`.
//!
//! Variances come from the first-order delta method over the joint
//! coefficient covariance, and each effect gets a two-sided z-test.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ArmSummaries;
use crate::gmm::{GmmFit, ThetaVector};

/// Index of each coefficient in 6-vectors and the 6x6 covariance.
const M10: usize = 0;
const M11: usize = 1;
const Y1: usize = 3;
const Y2: usize = 4;
const Y3: usize = 5;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("delta-method expansion produced a negative variance ({value:.3e}); the coefficient covariance is not positive semidefinite")]
    NegativeVariance { value: f64 },
    #[error("standard error is zero; z-test is undefined")]
    ZeroStdError,
}

impl InferenceError {
    pub fn name(&self) -> &'static str {
        match self {
            InferenceError::NegativeVariance { .. } => "NegativeVariance",
            InferenceError::ZeroStdError => "ZeroStdError",
        }
    }
}

/// Which causal quantity an estimate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Gade,
    Gacme,
    Ate,
}

impl std::fmt::Display for EffectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EffectKind::Gade => write!(f, "GADE"),
            EffectKind::Gacme => write!(f, "GACME"),
            EffectKind::Ate => write!(f, "ATE"),
        }
    }
}

/// One estimated effect with its inference.
///
/// `pct_change` is the effect divided by the control-arm mean outcome
/// (as a plain ratio; multiply by 100 for display), with `pct_std_error`
/// the standard error on the same scale. `p_underflow` marks p-values
/// that underflowed to zero in double precision.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub arm: Option<u8>,
    pub value: f64,
    pub std_error: f64,
    pub z_stat: f64,
    pub p_value: f64,
    pub p_underflow: bool,
    pub pct_change: f64,
    pub pct_std_error: f64,
}

impl EffectEstimate {
    /// Row label, e.g. `GADE(0)` or `ATE`.
    pub fn label(&self) -> String {
        match self.arm {
            Some(t) => format!("{}({t})", self.kind),
            None => self.kind.to_string(),
        }
    }

    /// Significance marker for the estimate's p-value.
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

/// Full estimation report for one dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectReport {
    pub gade0: EffectEstimate,
    pub gade1: EffectEstimate,
    pub gacme0: EffectEstimate,
    pub gacme1: EffectEstimate,
    pub ate: EffectEstimate,
    pub theta: ThetaVector,
    /// Row-major 6x6 asymptotic covariance of the coefficients.
    pub covariance: [[f64; 6]; 6],
    pub arm_summaries: ArmSummaries,
}

impl EffectReport {
    pub fn estimates(&self) -> [&EffectEstimate; 5] {
        [
            &self.gade0,
            &self.gade1,
            &self.gacme0,
            &self.gacme1,
            &self.ate,
        ]
    }

    /// Residuals of the two decompositions of the total effect,
    /// `ATE - (GADE(0)+GACME(1))` and `ATE - (GADE(1)+GACME(0))`.
    pub fn decomposition_gaps(&self) -> (f64, f64) {
        additivity_gaps(
            self.gade0.value,
            self.gade1.value,
            self.gacme0.value,
            self.gacme1.value,
            self.ate.value,
        )
    }
}

/// Residuals of the two ways of assembling a total effect from its
/// direct and mediated parts. Works on any common scale, including the
/// percent scale of published report rows.
pub fn additivity_gaps(gade0: f64, gade1: f64, gacme0: f64, gacme1: f64, ate: f64) -> (f64, f64) {
    (ate - (gade0 + gacme1), ate - (gade1 + gacme0))
}

/// Direct and mediated effect values implied by the coefficients, for
/// arm `t`.
pub fn effects_from_theta(theta: &ThetaVector, t: u8) -> (f64, f64) {
    debug_assert!(t <= 1);
    let tf = t as f64;
    let gade = theta.theta_y1 + theta.theta_y3 * (theta.theta_m10 + theta.theta_m11 * tf);
    let gacme = theta.theta_m11 * (theta.theta_y2 + theta.theta_y3 * tf);
    (gade, gacme)
}

/// Gradient of `GADE(t)` with respect to the coefficient vector.
pub fn gade_gradient(theta: &ThetaVector, t: u8) -> Vector6<f64> {
    let tf = t as f64;
    let mut g = Vector6::zeros();
    g[M10] = theta.theta_y3;
    g[M11] = theta.theta_y3 * tf;
    g[Y1] = 1.0;
    g[Y3] = theta.theta_m10 + theta.theta_m11 * tf;
    g
}

/// Gradient of `GACME(t)` with respect to the coefficient vector.
pub fn gacme_gradient(theta: &ThetaVector, t: u8) -> Vector6<f64> {
    let tf = t as f64;
    let mut g = Vector6::zeros();
    g[M11] = theta.theta_y2 + theta.theta_y3 * tf;
    g[Y2] = theta.theta_m11;
    g[Y3] = theta.theta_m11 * tf;
    g
}

/// Gradient of the total effect `theta_y1 + theta_y3*theta_m10 +
/// theta_m11*theta_y2 + theta_m11*theta_y3`.
pub fn ate_gradient(theta: &ThetaVector) -> Vector6<f64> {
    let mut g = Vector6::zeros();
    g[M10] = theta.theta_y3;
    g[M11] = theta.theta_y2 + theta.theta_y3;
    g[Y1] = 1.0;
    g[Y2] = theta.theta_m11;
    g[Y3] = theta.theta_m10 + theta.theta_m11;
    g
}

fn check_variance(v: f64) -> Result<f64, InferenceError> {
    if v < -1e-12 {
        Err(InferenceError::NegativeVariance { value: v })
    } else {
        Ok(v)
    }
}

/// Delta-method variances of the direct and mediated effect estimators
/// for arm `t`, written out term by term over the entries of the
/// coefficient covariance. The input covariance is already scaled by the
/// sample size, so the outputs are variances of the estimates as-is.
pub fn delta_variances(
    theta: &ThetaVector,
    covariance: &Matrix6<f64>,
    t: u8,
) -> Result<(f64, f64), InferenceError> {
    debug_assert!(t <= 1);
    let tf = t as f64;
    let v = |a: usize, b: usize| covariance[(a, b)];
    let m10 = theta.theta_m10;
    let m11 = theta.theta_m11;
    let y2 = theta.theta_y2;
    let y3 = theta.theta_y3;
    let m1t = m10 + m11 * tf;

    let avar_gade = v(Y1, Y1)
        + m1t * m1t * v(Y3, Y3)
        + y3 * y3 * v(M10, M10)
        + (y3 * tf) * (y3 * tf) * v(M11, M11)
        + 2.0 * y3 * v(Y1, M10)
        + 2.0 * m1t * v(Y1, Y3)
        + 2.0 * (y3 * tf) * v(Y1, M11)
        + 2.0 * m1t * y3 * v(Y3, M10)
        + 2.0 * m1t * y3 * tf * v(Y3, M11)
        + 2.0 * y3 * y3 * tf * v(M10, M11);

    let y2t = y2 + y3 * tf;
    let avar_gacme = y2t * y2t * v(M11, M11)
        + m11 * m11 * v(Y2, Y2)
        + (m11 * tf) * (m11 * tf) * v(Y3, Y3)
        + 2.0 * y2t * m11 * v(M11, Y2)
        + 2.0 * y2t * m11 * tf * v(M11, Y3)
        + 2.0 * m11 * m11 * tf * v(Y2, Y3);

    Ok((check_variance(avar_gade)?, check_variance(avar_gacme)?))
}

/// Two-sided p-value for a standard-normal test statistic, computed
/// through the complementary error function. Relative accuracy is about
/// 1e-13 all the way down to the double-precision underflow threshold
/// near 1e-300; below that the p-value flushes to zero.
pub fn two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// z-statistic and two-sided p-value for an estimate.
pub fn z_test(value: f64, std_error: f64) -> Result<(f64, f64), InferenceError> {
    if !(std_error > 0.0) {
        return Err(InferenceError::ZeroStdError);
    }
    let z = value / std_error;
    Ok((z, two_sided_p(z)))
}

/// Significance marker mirroring the usual report legend:
/// `***` p<0.001, `**` p<0.01, `*` p<0.05, `.` p<0.1.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

fn make_estimate(
    kind: EffectKind,
    arm: Option<u8>,
    value: f64,
    avar: f64,
    control_mean_outcome: f64,
) -> Result<EffectEstimate, InferenceError> {
    let std_error = avar.max(0.0).sqrt();
    let (z_stat, p_value) = z_test(value, std_error)?;
    Ok(EffectEstimate {
        kind,
        arm,
        value,
        std_error,
        z_stat,
        p_value,
        p_underflow: p_value == 0.0,
        pct_change: value / control_mean_outcome,
        pct_std_error: std_error / control_mean_outcome.abs(),
    })
}

/// Assembles the full effect report from a fit and the arm summaries.
///
/// The total effect is `GADE(0) + GACME(1)`; its standard error comes
/// from the delta method applied jointly over all six coefficients, so
/// the covariance between the direct and mediated estimates is honored.
/// Percent changes divide by the control-arm mean outcome.
pub fn build_report(
    fit: &GmmFit,
    summaries: &ArmSummaries,
) -> Result<EffectReport, InferenceError> {
    let theta = &fit.theta;
    let cm = summaries.control.mean_outcome;

    let (gade0_v, gacme0_v) = effects_from_theta(theta, 0);
    let (gade1_v, gacme1_v) = effects_from_theta(theta, 1);
    let (avar_gade0, avar_gacme0) = delta_variances(theta, &fit.covariance, 0)?;
    let (avar_gade1, avar_gacme1) = delta_variances(theta, &fit.covariance, 1)?;

    let ate_v = gade0_v + gacme1_v;
    let grad = ate_gradient(theta);
    let avar_ate = check_variance((grad.transpose() * fit.covariance * grad)[(0, 0)])?;

    Ok(EffectReport {
        gade0: make_estimate(EffectKind::Gade, Some(0), gade0_v, avar_gade0, cm)?,
        gade1: make_estimate(EffectKind::Gade, Some(1), gade1_v, avar_gade1, cm)?,
        gacme0: make_estimate(EffectKind::Gacme, Some(0), gacme0_v, avar_gacme0, cm)?,
        gacme1: make_estimate(EffectKind::Gacme, Some(1), gacme1_v, avar_gacme1, cm)?,
        ate: make_estimate(EffectKind::Ate, None, ate_v, avar_ate, cm)?,
        theta: *theta,
        covariance: fit.covariance_rows(),
        arm_summaries: *summaries,
    })
}
