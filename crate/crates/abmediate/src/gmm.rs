//! Joint GMM estimation of the two-equation regression system.
//!
//! The system regresses the mediator on treatment and the outcome on
//! treatment, mediator and their interaction:
//!
//! ```text
//! M = theta_m10 + theta_m11*T            + mu_m
//! Y = theta_y0  + theta_y1*T + theta_y2*M + theta_y3*M*T + mu_y
//! ```
//!
//! Six moment conditions (each equation's residual times its
//! instruments) exactly identify the six coefficients, so the iterative
//! GMM solution coincides with per-equation least squares for any
//! weighting matrix; running the full iteration with a HAC weighting
//! matrix buys the joint asymptotic covariance of all six coefficients,
//! which downstream effect inference needs.

use nalgebra::{Cholesky, Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Arm, ObservationRecord, ObservationTable};
use crate::util::{chunk_reduce, Kahan, CHUNK_LEN};
use rayon::prelude::*;

/// Default convergence tolerance on the coefficient update norm.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap; the exactly identified system converges in one
/// or two iterations, so hitting the cap signals numerical pathology.
pub const DEFAULT_MAX_ITER: usize = 100;

/// Coefficients of the regression system, in the fixed order
/// `(m10, m11, y0, y1, y2, y3)` used by every 6-vector and 6x6 matrix in
/// this crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub theta_m10: f64,
    pub theta_m11: f64,
    pub theta_y0: f64,
    pub theta_y1: f64,
    pub theta_y2: f64,
    pub theta_y3: f64,
}

impl ThetaVector {
    pub fn zero() -> Self {
        ThetaVector {
            theta_m10: 0.0,
            theta_m11: 0.0,
            theta_y0: 0.0,
            theta_y1: 0.0,
            theta_y2: 0.0,
            theta_y3: 0.0,
        }
    }

    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::new(
            self.theta_m10,
            self.theta_m11,
            self.theta_y0,
            self.theta_y1,
            self.theta_y2,
            self.theta_y3,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        ThetaVector {
            theta_m10: v[0],
            theta_m11: v[1],
            theta_y0: v[2],
            theta_y1: v[3],
            theta_y2: v[4],
            theta_y3: v[5],
        }
    }

    pub fn as_array(self) -> [f64; 6] {
        [
            self.theta_m10,
            self.theta_m11,
            self.theta_y0,
            self.theta_y1,
            self.theta_y2,
            self.theta_y3,
        ]
    }

    pub fn is_finite(self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// The six moment functions evaluated at one observation.
///
/// `g1` is the mediator-equation residual and `g3` the outcome-equation
/// residual; the rest are those residuals times their instruments, so
/// `g2 = T*g1`, `g4 = T*g3`, `g5 = M*g3`, `g6 = M*T*g3` hold exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentVector {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
    pub g6: f64,
}

impl MomentVector {
    pub fn as_array(self) -> [f64; 6] {
        [self.g1, self.g2, self.g3, self.g4, self.g5, self.g6]
    }

    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.as_array())
    }
}

/// Kernel for the HAC covariance of the moment vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// No autocorrelation terms: the outer-product (lag-zero) matrix.
    /// The statistically meaningful choice for exchangeable users.
    Lag0,
    /// Bartlett taper over row-order lags, for ordered data.
    Bartlett,
}

/// Bandwidth policy for the Bartlett kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Plug-in rule `floor(4*(N/100)^(2/9))`.
    Auto,
    Fixed(usize),
}

/// HAC configuration: kernel plus bandwidth. `Lag0` ignores the
/// bandwidth; `Bartlett` with `Fixed(0)` degenerates to `Lag0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HacConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl Default for HacConfig {
    fn default() -> Self {
        HacConfig {
            kernel: Kernel::Lag0,
            bandwidth: Bandwidth::Auto,
        }
    }
}

impl HacConfig {
    pub fn lag0() -> Self {
        HacConfig::default()
    }

    pub fn bartlett(bandwidth: Bandwidth) -> Self {
        HacConfig {
            kernel: Kernel::Bartlett,
            bandwidth,
        }
    }
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("design matrix is singular ({detail})")]
    SingularDesign { detail: String },
    #[error("HAC matrix is singular; moment conditions are degenerate")]
    SingularOmega,
    #[error("bandwidth {bandwidth} must be smaller than the number of rows {n}")]
    BandwidthTooLarge { bandwidth: usize, n: usize },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

impl EstimationError {
    /// Stable machine-readable error name.
    pub fn name(&self) -> &'static str {
        match self {
            EstimationError::SingularDesign { .. } => "SingularDesign",
            EstimationError::SingularOmega => "SingularOmega",
            EstimationError::BandwidthTooLarge { .. } => "BandwidthTooLarge",
            EstimationError::NoConvergence { .. } => "NoConvergence",
        }
    }
}

/// Result of an iterative GMM fit.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub theta: ThetaVector,
    /// Estimated asymptotic covariance of the coefficient estimates,
    /// `(G' Omega^-1 G)^-1 / N`. Symmetric positive semidefinite.
    pub covariance: Matrix6<f64>,
    /// The HAC matrix evaluated at the final coefficients.
    pub omega: Matrix6<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GmmFit {
    /// Covariance as row-major nested arrays, for serialization.
    pub fn covariance_rows(&self) -> [[f64; 6]; 6] {
        let mut out = [[0.0; 6]; 6];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.covariance[(i, j)];
            }
        }
        out
    }
}

/// Evaluates the six moment functions at one observation.
pub fn moment_eval(theta: &ThetaVector, record: &ObservationRecord) -> MomentVector {
    let t = record.treatment.indicator();
    let m = record.mediator;
    let y = record.outcome;
    let g1 = m - theta.theta_m10 - theta.theta_m11 * t;
    let g3 = y - theta.theta_y0 - theta.theta_y1 * t - theta.theta_y2 * m - theta.theta_y3 * m * t;
    MomentVector {
        g1,
        g2: t * g1,
        g3,
        g4: t * g3,
        g5: m * g3,
        g6: m * t * g3,
    }
}

/// Sample average of the moment vector.
pub fn average_moments(table: &ObservationTable, theta: &ThetaVector) -> Vector6<f64> {
    let acc = chunk_reduce(
        table.records(),
        || [Kahan::default(); 6],
        |acc, r| {
            let g = moment_eval(theta, r).as_array();
            for (slot, v) in acc.iter_mut().zip(g) {
                slot.add(v);
            }
        },
        |acc, other| {
            for (slot, v) in acc.iter_mut().zip(other) {
                slot.merge(v);
            }
        },
    );
    let n = table.len() as f64;
    Vector6::from_iterator(acc.iter().map(|k| k.value() / n))
}

#[derive(Clone, Copy, Default)]
struct RawMoments {
    t: Kahan,
    m: Kahan,
    mt: Kahan,
    m2: Kahan,
    m2t: Kahan,
}

/// Jacobian of the average moment vector with respect to the
/// coefficients. The moments are linear in the coefficients, so this
/// matrix depends on the data only.
pub fn moment_jacobian(table: &ObservationTable) -> Matrix6<f64> {
    let acc = chunk_reduce(
        table.records(),
        RawMoments::default,
        |acc, r| {
            let t = r.treatment.indicator();
            let m = r.mediator;
            acc.t.add(t);
            acc.m.add(m);
            acc.mt.add(m * t);
            acc.m2.add(m * m);
            acc.m2t.add(m * m * t);
        },
        |acc, o| {
            acc.t.merge(o.t);
            acc.m.merge(o.m);
            acc.mt.merge(o.mt);
            acc.m2.merge(o.m2);
            acc.m2t.merge(o.m2t);
        },
    );
    let n = table.len() as f64;
    let (t, m, mt, m2, m2t) = (
        acc.t.value() / n,
        acc.m.value() / n,
        acc.mt.value() / n,
        acc.m2.value() / n,
        acc.m2t.value() / n,
    );
    #[rustfmt::skip]
    let jac = Matrix6::new(
        -1.0, -t,  0.0, 0.0, 0.0,  0.0,
        -t,   -t,  0.0, 0.0, 0.0,  0.0,
        0.0,  0.0, -1.0, -t,  -m,   -mt,
        0.0,  0.0, -t,   -t,  -mt,  -mt,
        0.0,  0.0, -m,   -mt, -m2,  -m2t,
        0.0,  0.0, -mt,  -mt, -m2t, -m2t,
    );
    jac
}

#[derive(Clone, Copy, Default)]
struct ArmRegAcc {
    s_mm: Kahan,
    s_my: Kahan,
    max_abs_m: f64,
    count: usize,
}

/// Per-equation least squares, the initial value of the GMM iteration.
///
/// Because the treatment indicator is binary, each equation is solved
/// through its within-arm form: the mediator coefficients are arm means,
/// and the outcome equation splits into one `Y ~ M` regression per arm.
/// This evaluates the least-squares solution without forming normal
/// equations and sets every sample moment average to zero up to
/// rounding.
pub fn ols_init(table: &ObservationTable) -> Result<ThetaVector, EstimationError> {
    let s = crate::data::summarize(table);
    let means = [
        (Arm::Control, s.control.mean_mediator, s.control.mean_outcome),
        (
            Arm::Treatment,
            s.treatment.mean_mediator,
            s.treatment.mean_outcome,
        ),
    ];

    // Within-arm centered second moments of (M, Y), one arm at a time.
    let mut slopes = [0.0f64; 2];
    let mut intercepts = [0.0f64; 2];
    for (idx, (arm, m_mean, y_mean)) in means.into_iter().enumerate() {
        let acc = chunk_reduce(
            table.records(),
            ArmRegAcc::default,
            |acc, r| {
                if r.treatment == arm {
                    let dm = r.mediator - m_mean;
                    acc.s_mm.add(dm * dm);
                    acc.s_my.add(dm * (r.outcome - y_mean));
                    acc.max_abs_m = acc.max_abs_m.max(r.mediator.abs());
                    acc.count += 1;
                }
            },
            |acc, o| {
                acc.s_mm.merge(o.s_mm);
                acc.s_my.merge(o.s_my);
                acc.max_abs_m = acc.max_abs_m.max(o.max_abs_m);
                acc.count += o.count;
            },
        );
        let s_mm = acc.s_mm.value();
        // Rank threshold: centered sums of an exactly constant column only
        // reach rounding scale, (eps * |M|)^2 per row.
        let floor = acc.count as f64 * (16.0 * f64::EPSILON * acc.max_abs_m).powi(2);
        if s_mm <= floor {
            return Err(EstimationError::SingularDesign {
                detail: format!("mediator has no variance within the {arm:?} arm"),
            });
        }
        slopes[idx] = acc.s_my.value() / s_mm;
        intercepts[idx] = y_mean - slopes[idx] * m_mean;
    }

    Ok(ThetaVector {
        theta_m10: s.control.mean_mediator,
        theta_m11: s.treatment.mean_mediator - s.control.mean_mediator,
        theta_y0: intercepts[0],
        theta_y1: intercepts[1] - intercepts[0],
        theta_y2: slopes[0],
        theta_y3: slopes[1] - slopes[0],
    })
}

/// Plug-in bandwidth `floor(4*(N/100)^(2/9))`.
fn auto_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

fn resolve_bandwidth(config: &HacConfig, n: usize) -> Result<usize, EstimationError> {
    match config.kernel {
        Kernel::Lag0 => Ok(0),
        Kernel::Bartlett => match config.bandwidth {
            Bandwidth::Auto => Ok(auto_bandwidth(n).min(n - 1)),
            Bandwidth::Fixed(h) => {
                if h >= n {
                    Err(EstimationError::BandwidthTooLarge { bandwidth: h, n })
                } else {
                    Ok(h)
                }
            }
        },
    }
}

struct OuterAcc([[Kahan; 6]; 6]);

impl Default for OuterAcc {
    fn default() -> Self {
        OuterAcc([[Kahan::default(); 6]; 6])
    }
}

fn per_row_moments(table: &ObservationTable, theta: &ThetaVector) -> Vec<[f64; 6]> {
    table
        .records()
        .par_iter()
        .map(|r| moment_eval(theta, r).as_array())
        .collect()
}

/// Sum over valid rows of `g_i * g_{i+s}'`, divided by N.
fn lag_cross_product(g: &[[f64; 6]], s: usize) -> Matrix6<f64> {
    let n_pairs = g.len() - s;
    let partials: Vec<OuterAcc> = g[..n_pairs]
        .par_chunks(CHUNK_LEN)
        .enumerate()
        .map(|(ci, chunk)| {
            let base = ci * CHUNK_LEN;
            let mut acc = OuterAcc::default();
            for (j, gi) in chunk.iter().enumerate() {
                let gs = &g[base + j + s];
                for a in 0..6 {
                    for b in 0..6 {
                        acc.0[a][b].add(gi[a] * gs[b]);
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = OuterAcc::default();
    for p in partials {
        for a in 0..6 {
            for b in 0..6 {
                total.0[a][b].merge(p.0[a][b]);
            }
        }
    }
    let n = g.len() as f64;
    Matrix6::from_fn(|a, b| total.0[a][b].value() / n)
}

/// HAC covariance of the moment vector at the given coefficients:
/// the lag-weighted sum of cross-product matrices, symmetrized.
pub fn hac_matrix(
    table: &ObservationTable,
    theta: &ThetaVector,
    config: &HacConfig,
) -> Result<Matrix6<f64>, EstimationError> {
    let h = resolve_bandwidth(config, table.len())?;
    let g = per_row_moments(table, theta);
    let mut omega = lag_cross_product(&g, 0);
    for s in 1..=h {
        let w = 1.0 - s as f64 / (h as f64 + 1.0);
        let gamma = lag_cross_product(&g, s);
        omega += (gamma + gamma.transpose()) * w;
    }
    // Symmetrize after accumulation.
    Ok((omega + omega.transpose()) * 0.5)
}

/// Iterative GMM fit of the regression system.
///
/// Starts from per-equation least squares, then alternates between
/// recomputing the HAC matrix at the current coefficients and
/// re-minimizing the weighted quadratic form, until the coefficient
/// update norm drops below `tol`. The moments are linear in the
/// coefficients, so each minimization is a single weighted linear solve
/// expanded around the current point; for this exactly identified system
/// the minimizer does not depend on the weighting matrix and the loop is
/// expected to converge on the first or second pass.
pub fn itgmm_fit(
    table: &ObservationTable,
    config: &HacConfig,
    tol: f64,
    max_iter: usize,
) -> Result<GmmFit, EstimationError> {
    assert!(tol > 0.0, "tol must be positive");
    assert!(max_iter >= 1, "max_iter must be at least 1");

    let n = table.len() as f64;
    let jac = moment_jacobian(table);
    let mut theta = ols_init(table)?.to_vector();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let omega = hac_matrix(table, &ThetaVector::from_vector(&theta), config)?;
        let chol = Cholesky::new(omega).ok_or(EstimationError::SingularOmega)?;
        // Minimize gbar(theta)' W gbar(theta), W = Omega^-1, by expanding
        // the linear moments around the current point and solving the
        // first-order condition for the update.
        let gbar = average_moments(table, &ThetaVector::from_vector(&theta));
        let winv_j = chol.solve(&jac);
        let jtwj = jac.transpose() * winv_j;
        let rhs = -(jac.transpose() * chol.solve(&gbar));
        let delta = Cholesky::new(jtwj)
            .ok_or(EstimationError::SingularOmega)?
            .solve(&rhs);
        theta += delta;
        if delta.norm() < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EstimationError::NoConvergence { iterations });
    }

    let theta = ThetaVector::from_vector(&theta);
    if !theta.is_finite() {
        return Err(EstimationError::SingularOmega);
    }
    let omega = hac_matrix(table, &theta, config)?;
    let chol = Cholesky::new(omega).ok_or(EstimationError::SingularOmega)?;
    let jtwj = jac.transpose() * chol.solve(&jac);
    let covariance = Cholesky::new(jtwj)
        .ok_or(EstimationError::SingularOmega)?
        .inverse()
        / n;
    let covariance = (covariance + covariance.transpose()) * 0.5;

    Ok(GmmFit {
        theta,
        covariance,
        omega,
        iterations,
        converged,
    })
}

/// [`itgmm_fit`] with the default tolerance and iteration cap.
pub fn itgmm_fit_default(
    table: &ObservationTable,
    config: &HacConfig,
) -> Result<GmmFit, EstimationError> {
    itgmm_fit(table, config, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservationTable;
    use proptest::prelude::*;

    fn rec(t: u8, m: f64, y: f64) -> ObservationRecord {
        ObservationRecord {
            unit_id: None,
            treatment: if t == 1 { Arm::Treatment } else { Arm::Control },
            mediator: m,
            outcome: y,
        }
    }

    fn small_table() -> ObservationTable {
        ObservationTable::new(vec![
            rec(0, 1.0, 0.0),
            rec(0, 3.0, 1.0),
            rec(1, 4.0, 0.0),
            rec(1, 6.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn moments_at_zero_theta_are_raw_products() {
        let g = moment_eval(&ThetaVector::zero(), &rec(1, 2.0, 3.0));
        assert_eq!(g.as_array(), [2.0, 2.0, 3.0, 3.0, 6.0, 6.0]);
    }

    #[test]
    fn mediator_equation_exact_fit_zeroes_g1_g2() {
        let theta = ThetaVector {
            theta_m10: 2.0,
            theta_m11: 3.0,
            ..ThetaVector::zero()
        };
        let g = moment_eval(&theta, &rec(1, 5.0, 0.0));
        assert_eq!(g.g1, 0.0);
        assert_eq!(g.g2, 0.0);
    }

    #[test]
    fn ols_mediator_coefficients_are_group_means() {
        let theta = ols_init(&small_table()).unwrap();
        assert!((theta.theta_m10 - 2.0).abs() < 1e-14);
        assert!((theta.theta_m11 - 3.0).abs() < 1e-14);
    }

    #[test]
    fn ols_detects_constant_mediator_within_arm() {
        let table = ObservationTable::new(vec![
            rec(0, 2.0, 0.0),
            rec(0, 2.0, 1.0),
            rec(1, 5.0, 0.0),
            rec(1, 5.0, 1.0),
        ])
        .unwrap();
        let err = ols_init(&table).unwrap_err();
        assert_eq!(err.name(), "SingularDesign");
    }

    #[test]
    fn lag0_is_outer_product_average() {
        let table = small_table();
        let theta = ols_init(&table).unwrap();
        let omega = hac_matrix(&table, &theta, &HacConfig::lag0()).unwrap();
        // hand loop
        let mut want = Matrix6::zeros();
        for r in table.records() {
            let g = moment_eval(&theta, r).to_vector();
            want += g * g.transpose();
        }
        want /= table.len() as f64;
        assert!((omega - want).abs().max() < 1e-12);
    }

    #[test]
    fn bartlett_zero_bandwidth_equals_lag0() {
        let table = small_table();
        let theta = ols_init(&table).unwrap();
        let a = hac_matrix(&table, &theta, &HacConfig::lag0()).unwrap();
        let b = hac_matrix(
            &table,
            &theta,
            &HacConfig::bartlett(Bandwidth::Fixed(0)),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bartlett_matches_brute_force_triple_loop() {
        // 5 handmade rows; evaluate at an arbitrary theta so residuals
        // are nonzero.
        let table = ObservationTable::new(vec![
            rec(0, 1.0, 2.0),
            rec(1, 3.0, -1.0),
            rec(0, -2.0, 0.5),
            rec(1, 0.5, 1.5),
            rec(0, 2.5, -0.5),
        ])
        .unwrap();
        let theta = ThetaVector {
            theta_m10: 0.3,
            theta_m11: -0.2,
            theta_y0: 0.1,
            theta_y1: 0.4,
            theta_y2: -0.5,
            theta_y3: 0.2,
        };
        let h = 2usize;
        let got = hac_matrix(&table, &theta, &HacConfig::bartlett(Bandwidth::Fixed(h))).unwrap();

        // Brute force: loop over signed lags and matrix entries, with
        // weights 1, 2/3, 1/3.
        let g: Vec<Vector6<f64>> = table
            .records()
            .iter()
            .map(|r| moment_eval(&theta, r).to_vector())
            .collect();
        let n = g.len();
        let mut want = Matrix6::zeros();
        for s in -(h as i64)..=(h as i64) {
            let w = 1.0 - s.unsigned_abs() as f64 / (h as f64 + 1.0);
            let mut gamma = Matrix6::zeros();
            for i in 0..n as i64 {
                let j = i + s;
                if j < 0 || j >= n as i64 {
                    continue;
                }
                for a in 0..6 {
                    for b in 0..6 {
                        gamma[(a, b)] += g[i as usize][a] * g[j as usize][b];
                    }
                }
            }
            want += gamma * (w / n as f64);
        }
        assert!((got - want).abs().max() < 1e-12);
    }

    #[test]
    fn bandwidth_too_large_is_rejected() {
        let table = small_table();
        let theta = ols_init(&table).unwrap();
        let err = hac_matrix(&table, &theta, &HacConfig::bartlett(Bandwidth::Fixed(4)))
            .unwrap_err();
        assert_eq!(err.name(), "BandwidthTooLarge");
        assert!(hac_matrix(&table, &theta, &HacConfig::bartlett(Bandwidth::Fixed(3))).is_ok());
    }

    // Enough rows per arm for an invertible HAC matrix: at the
    // least-squares solution the moment vectors of each arm sum to zero
    // exactly, so a table with n rows spans at most n - 2 dimensions.
    fn noisy_table() -> ObservationTable {
        ObservationTable::new(vec![
            rec(0, 1.0, 0.2),
            rec(0, 3.0, 1.1),
            rec(0, 2.0, 0.4),
            rec(0, 2.5, 1.0),
            rec(0, 1.5, 0.6),
            rec(1, 4.0, 0.1),
            rec(1, 6.0, 1.3),
            rec(1, 5.0, 0.9),
            rec(1, 4.5, 0.3),
            rec(1, 5.5, 1.2),
        ])
        .unwrap()
    }

    #[test]
    fn fit_zeroes_sample_moments() {
        let table = noisy_table();
        let fit = itgmm_fit_default(&table, &HacConfig::lag0()).unwrap();
        let gbar = average_moments(&table, &fit.theta);
        assert!(gbar.abs().max() < 1e-12);
        assert!(fit.converged);
        assert!(fit.iterations <= 2);
    }

    #[test]
    fn fit_requires_convergence_budget() {
        let table = noisy_table();
        // An unreachable tolerance exhausts the iteration cap.
        let err = itgmm_fit(&table, &HacConfig::lag0(), 1e-300, 3).unwrap_err();
        assert_eq!(err.name(), "NoConvergence");
    }

    #[test]
    fn constant_outcome_yields_singular_omega() {
        let table = ObservationTable::new(vec![
            rec(0, 1.0, 1.0),
            rec(0, 3.0, 1.0),
            rec(1, 4.0, 1.0),
            rec(1, 6.0, 1.0),
        ])
        .unwrap();
        let err = itgmm_fit_default(&table, &HacConfig::lag0()).unwrap_err();
        assert_eq!(err.name(), "SingularOmega");
    }

    proptest! {
        #[test]
        fn instrumented_moments_are_products(
            t in 0u8..=1,
            m in -50.0f64..50.0,
            y in -50.0f64..50.0,
            th in proptest::array::uniform6(-5.0f64..5.0),
        ) {
            let theta = ThetaVector {
                theta_m10: th[0], theta_m11: th[1], theta_y0: th[2],
                theta_y1: th[3], theta_y2: th[4], theta_y3: th[5],
            };
            let r = rec(t, m, y);
            let g = moment_eval(&theta, &r);
            let tf = t as f64;
            prop_assert_eq!(g.g2, tf * g.g1);
            prop_assert_eq!(g.g4, tf * g.g3);
            prop_assert_eq!(g.g5, m * g.g3);
            prop_assert_eq!(g.g6, m * tf * g.g3);
        }
    }
}
