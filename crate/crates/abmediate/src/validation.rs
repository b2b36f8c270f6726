//! Self-checking Monte Carlo suites.
//!
//! Every statistical claim the library makes is checked against an
//! independent route: algebraic identities hold on random datasets,
//! estimates recover the simulator's closed-form ground truth, reported
//! standard errors match sampling variation across replications, and
//! p-values are uniform under a null model. The checks are grouped into
//! four named suites (`identity`, `consistency`, `coverage`, `delta`)
//! runnable from the CLI, and each check prints its observed value next
//! to the required tolerance.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::data::{summarize, Arm, ObservationTable};
use crate::effects::{additivity_gaps, build_report, EffectReport};
use crate::gmm::{average_moments, itgmm_fit_default, HacConfig, ThetaVector};
use crate::sim::{
    counterfactual_oracle, simulate, theta_from_structural, true_effects_from_structural,
    ErrorDist, GroundTruth, LsemSpec, NoiseSpec,
};
use crate::util::Welford;

/// Two-sided 97.5% standard-normal quantile, for 95% intervals.
pub const Z_975: f64 = 1.959963984540054;

/// One validation check: an observed statistic against its requirement.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    fn upper_bound(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            requirement: format!("<= {bound:.3e}"),
            passed: observed <= bound,
        }
    }

    fn in_range(name: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            requirement: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&observed),
        }
    }

    pub fn render(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "[{status}] {}: observed {:.6e}, required {}",
            self.name, self.observed, self.requirement
        )
    }
}

/// Result of one suite run.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.render());
            out.push('\n');
        }
        let n_pass = self.checks.iter().filter(|c| c.passed).count();
        out.push_str(&format!(
            "suite {}: {}/{} checks passed\n",
            self.suite,
            n_pass,
            self.checks.len()
        ));
        out
    }
}

/// The named validation suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Algebraic decomposition identities and exact identification.
    Identity,
    /// Estimates recover simulator ground truth at large N.
    Consistency,
    /// Confidence-interval coverage and null p-value calibration.
    Coverage,
    /// Delta-method standard errors match replication spread.
    Delta,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identity => "identity",
            Suite::Consistency => "consistency",
            Suite::Coverage => "coverage",
            Suite::Delta => "delta",
        }
    }

    pub fn default_reps(self) -> usize {
        match self {
            Suite::Identity => 50,
            Suite::Consistency => 20,
            Suite::Coverage => 500,
            Suite::Delta => 500,
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Suite::Identity),
            "consistency" => Ok(Suite::Consistency),
            "coverage" => Ok(Suite::Coverage),
            "delta" => Ok(Suite::Delta),
            other => Err(format!(
                "unknown suite {other:?}; expected identity|consistency|coverage|delta"
            )),
        }
    }
}

/// Runs a named suite. `reps` falls back to the suite's default
/// replication count.
pub fn run_suite(suite: Suite, reps: Option<usize>, seed: u64) -> SuiteReport {
    let reps = reps.unwrap_or_else(|| suite.default_reps());
    let checks = match suite {
        Suite::Identity => {
            let mut checks = decomposition_identity_checks(reps, seed);
            checks.extend(report_additivity_checks());
            checks.extend(exact_identification_checks(reps, seed ^ 0x1dea));
            checks
        }
        Suite::Consistency => {
            let mut checks = estimator_consistency_checks(reps, 1_000_000, seed);
            checks.extend(oracle_equivalence_checks(10, 200_000, seed ^ 0x07ac));
            checks.extend(residual_mean_zero_checks(1_000_000, seed ^ 0x4e5));
            checks
        }
        Suite::Coverage => {
            let mut checks = sampling_distribution_checks(reps, 10_000, seed).coverage;
            checks.extend(null_calibration_checks(reps, 10_000, seed ^ 0x9a11));
            checks
        }
        Suite::Delta => sampling_distribution_checks(reps, 10_000, seed).delta,
    };
    SuiteReport {
        suite: suite.name().to_string(),
        checks,
    }
}

fn coef(rng: &mut ChaCha12Rng) -> f64 {
    rng.gen_range(-0.8..0.8)
}

fn random_noise(rng: &mut ChaCha12Rng) -> ErrorDist {
    match rng.gen_range(0u8..3) {
        0 => ErrorDist::Normal {
            std: rng.gen_range(0.5..1.5),
        },
        1 => ErrorDist::ScaledCenteredBernoulli {
            p: rng.gen_range(0.2..0.8),
            scale: rng.gen_range(0.8..2.0),
        },
        _ => ErrorDist::CenteredUniform {
            half_width: rng.gen_range(0.8..2.5),
        },
    }
}

/// Draws a random structural specification with the given block sizes.
/// Coefficients are moderate, noise families are mixed, and the
/// assignment probability stays away from the boundaries.
///
/// Each upstream component is given exactly one role: it either feeds
/// the measured mediator (`psi1`/`xi1` loadings) or it feeds the
/// outcome side (`gamma0`/`kappa0` and a `Psi2`/`Xi2` column). An
/// upstream component loading on both sides would correlate the
/// mediator with the outcome-equation disturbance, and no estimator
/// that sees only `(T, M1, Y)` can separate the channels then; the
/// identification the estimator relies on holds exactly on the split
/// designs, which is what these suites are entitled to assume.
pub fn random_spec(k: usize, j: usize, rng: &mut ChaCha12Rng) -> LsemSpec {
    let vec_k = |rng: &mut ChaCha12Rng| (0..k).map(|_| coef(rng)).collect::<Vec<_>>();
    let vec_j = |rng: &mut ChaCha12Rng| (0..j).map(|_| coef(rng)).collect::<Vec<_>>();
    let mat = |rng: &mut ChaCha12Rng| {
        (0..j)
            .map(|_| (0..k).map(|_| coef(rng)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let mut spec = LsemSpec {
        k_upstream: k,
        j_downstream: j,
        alpha0: vec_k(rng),
        beta0: vec_k(rng),
        alpha1: coef(rng),
        beta1: coef(rng),
        psi1: vec_k(rng),
        xi1: vec_k(rng),
        alpha2: vec_j(rng),
        beta2: vec_j(rng),
        psi2: mat(rng),
        xi2: mat(rng),
        psi3: vec_j(rng),
        xi3: vec_j(rng),
        alpha3: coef(rng),
        beta3: coef(rng),
        gamma0: vec_k(rng),
        gamma1: coef(rng),
        gamma2: vec_j(rng),
        kappa0: vec_k(rng),
        kappa1: coef(rng),
        kappa2: vec_j(rng),
        noise: NoiseSpec {
            m0: (0..k).map(|_| random_noise(rng)).collect(),
            m1: random_noise(rng),
            m2: (0..j).map(|_| random_noise(rng)).collect(),
            y: random_noise(rng),
        },
        p_treat: rng.gen_range(0.3..0.7),
    };
    for comp in 0..k {
        if rng.gen_bool(0.5) {
            // mediator-feeding: no direct outcome or downstream loads
            spec.gamma0[comp] = 0.0;
            spec.kappa0[comp] = 0.0;
            for row in 0..j {
                spec.psi2[row][comp] = 0.0;
                spec.xi2[row][comp] = 0.0;
            }
        } else {
            // outcome-feeding: invisible to the measured mediator
            spec.psi1[comp] = 0.0;
            spec.xi1[comp] = 0.0;
        }
    }
    spec
}

/// A specification with every treatment-linked coefficient zero, so all
/// five true effects vanish. The mediator-to-outcome link is kept
/// bounded away from zero so the mediated-effect estimator has a
/// regular limiting distribution under the null.
pub fn random_null_spec(k: usize, j: usize, rng: &mut ChaCha12Rng) -> LsemSpec {
    let mut spec = random_spec(k, j, rng);
    spec.beta0 = vec![0.0; k];
    spec.beta1 = 0.0;
    spec.xi1 = vec![0.0; k];
    spec.beta2 = vec![0.0; j];
    spec.xi2 = vec![vec![0.0; k]; j];
    spec.xi3 = vec![0.0; j];
    spec.beta3 = 0.0;
    spec.kappa0 = vec![0.0; k];
    spec.kappa1 = 0.0;
    spec.kappa2 = vec![0.0; j];
    spec.gamma1 = rng.gen_range(0.8..1.2);
    for (g2, p3) in spec.gamma2.iter_mut().zip(spec.psi3.iter_mut()) {
        *g2 = rng.gen_range(-0.3..0.3);
        *p3 = rng.gen_range(-0.3..0.3);
    }
    spec.p_treat = 0.5;
    spec
}

fn block_size(rng: &mut ChaCha12Rng) -> usize {
    [0usize, 1, 3][rng.gen_range(0usize..3)]
}

struct Dataset {
    table: ObservationTable,
    truth: GroundTruth,
}

fn random_dataset(n: usize, rng: &mut ChaCha12Rng) -> Dataset {
    let spec = random_spec(block_size(rng), block_size(rng), rng);
    let table = simulate(&spec, n, rng.gen()).expect("valid random spec");
    let truth = true_effects_from_structural(&spec).expect("valid random spec");
    Dataset { table, truth }
}

fn fitted_report(table: &ObservationTable) -> EffectReport {
    let fit = itgmm_fit_default(table, &HacConfig::lag0()).expect("fit on simulated data");
    build_report(&fit, &summarize(table)).expect("report on simulated data")
}

/// Total-effect decomposition identity on randomly simulated datasets:
/// both ways of re-assembling the total from direct and mediated parts
/// agree to near machine precision.
pub fn decomposition_identity_checks(n_datasets: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_gap: f64 = 0.0;
    for _ in 0..n_datasets {
        let ds = random_dataset(2_000, &mut rng);
        let report = fitted_report(&ds.table);
        let (a, b) = report.decomposition_gaps();
        max_gap = max_gap.max(a.abs()).max(b.abs());
    }
    vec![Check::upper_bound(
        format!("total-effect decomposition gap, max over {n_datasets} datasets"),
        max_gap,
        1e-10,
    )]
}

/// Percent-change rows from two production mediation reports, used as
/// fixtures: (GADE(0), GADE(1), GACME(0), GACME(1), ATE), in percent.
const REFERENCE_REPORT_ROWS: [[f64; 5]; 2] = [
    [0.4959, 0.4905, -0.2703, -0.2757, 0.2202],
    [-0.1448, -0.1472, -0.2237, -0.2261, -0.3709],
];

/// The report validator accepts published rows: the two decompositions
/// reproduce the total to last-digit rounding.
pub fn report_additivity_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    for (i, row) in REFERENCE_REPORT_ROWS.iter().enumerate() {
        let [gade0, gade1, gacme0, gacme1, ate] = *row;
        let (a, b) = additivity_gaps(gade0, gade1, gacme0, gacme1, ate);
        checks.push(Check::upper_bound(
            format!("published row set {i}, |ATE - (GADE(0)+GACME(1))|"),
            a.abs(),
            5e-5,
        ));
        checks.push(Check::upper_bound(
            format!("published row set {i}, |ATE - (GADE(1)+GACME(0))|"),
            b.abs(),
            5e-5,
        ));
    }
    checks
}

/// Large-sample consistency: on datasets of `n_rows` rows, estimated
/// coefficients and effects land within four reported standard errors
/// of the structural ground truth.
pub fn estimator_consistency_checks(n_specs: usize, n_rows: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_coef_dev: f64 = 0.0;
    let mut max_effect_dev: f64 = 0.0;
    for _ in 0..n_specs {
        let ds = random_dataset(n_rows, &mut rng);
        let report = fitted_report(&ds.table);
        let theta_hat = report.theta.as_array();
        let theta_true = ds.truth.theta_true.as_array();
        for c in 0..6 {
            let se = report.covariance[c][c].max(0.0).sqrt();
            max_coef_dev = max_coef_dev.max((theta_hat[c] - theta_true[c]).abs() / se);
        }
        let truths = [
            ds.truth.gade0,
            ds.truth.gade1,
            ds.truth.gacme0,
            ds.truth.gacme1,
            ds.truth.ate,
        ];
        for (est, want) in report.estimates().into_iter().zip(truths) {
            max_effect_dev = max_effect_dev.max((est.value - want).abs() / est.std_error);
        }
    }
    vec![
        Check::upper_bound(
            format!("coefficient recovery |est-true|/se, max over {n_specs} specs x 6"),
            max_coef_dev,
            4.0,
        ),
        Check::upper_bound(
            format!("effect recovery |est-true|/se, max over {n_specs} specs x 5"),
            max_effect_dev,
            4.0,
        ),
    ]
}

/// Output of the replication study behind the `delta` and `coverage`
/// suites.
pub struct SamplingChecks {
    /// Per effect: empirical SD across replications over mean reported
    /// standard error.
    pub delta: Vec<Check>,
    /// Per effect: empirical coverage of nominal 95% intervals.
    pub coverage: Vec<Check>,
}

const EFFECT_LABELS: [&str; 5] = ["GADE(0)", "GADE(1)", "GACME(0)", "GACME(1)", "ATE"];

/// Replicates one design `reps` times at `n_rows` rows and compares the
/// sampling spread of each effect estimate against its reported
/// standard error, and nominal 95% intervals against their coverage.
pub fn sampling_distribution_checks(reps: usize, n_rows: usize, seed: u64) -> SamplingChecks {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let spec = random_spec(1, 1, &mut rng);
    let truth = true_effects_from_structural(&spec).expect("valid random spec");
    let truths = [
        truth.gade0,
        truth.gade1,
        truth.gacme0,
        truth.gacme1,
        truth.ate,
    ];

    let mut values = [Welford::default(); 5];
    let mut ses = [Welford::default(); 5];
    let mut covered = [0usize; 5];
    for _ in 0..reps {
        let table = simulate(&spec, n_rows, rng.gen()).expect("valid random spec");
        let report = fitted_report(&table);
        for (e, est) in report.estimates().into_iter().enumerate() {
            values[e].add(est.value);
            ses[e].add(est.std_error);
            if (est.value - truths[e]).abs() <= Z_975 * est.std_error {
                covered[e] += 1;
            }
        }
    }

    let mut delta = Vec::new();
    let mut coverage = Vec::new();
    for e in 0..5 {
        let sd = values[e].sample_variance().sqrt();
        let mean_se = ses[e].mean();
        let ratio = sd / mean_se;
        delta.push(Check::in_range(
            format!("{} sampling SD over mean reported SE, {reps} reps", EFFECT_LABELS[e]),
            ratio,
            0.85,
            1.15,
        ));
        coverage.push(Check::in_range(
            format!("{} nominal 95% CI coverage, {reps} reps", EFFECT_LABELS[e]),
            covered[e] as f64 / reps as f64,
            0.92,
            0.98,
        ));
    }
    SamplingChecks { delta, coverage }
}

/// The brute-force counterfactual oracle agrees with the closed-form
/// ground truth within its own Monte Carlo error.
pub fn oracle_equivalence_checks(n_specs: usize, n_mc: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for _ in 0..n_specs {
        let spec = random_spec(block_size(&mut rng), block_size(&mut rng), &mut rng);
        let truth = true_effects_from_structural(&spec).expect("valid random spec");
        let est = counterfactual_oracle(&spec, n_mc, rng.gen()).expect("valid random spec");
        for (mc, want) in [
            (est.gade0, truth.gade0),
            (est.gade1, truth.gade1),
            (est.gacme0, truth.gacme0),
            (est.gacme1, truth.gacme1),
            (est.ate, truth.ate),
        ] {
            // An effect whose per-unit contributions are constant (for
            // example a mediated effect with no upstream block) has zero
            // Monte Carlo error; floor the scale at rounding level so an
            // exact match counts as agreement.
            let scale = mc.std_error.max(1e-12 * (1.0 + want.abs()));
            max_dev = max_dev.max((mc.value - want).abs() / scale);
        }
    }
    vec![Check::upper_bound(
        format!("counterfactual oracle vs closed form |mc-true|/mc-se, max over {n_specs} specs x 5"),
        max_dev,
        4.0,
    )]
}

fn gauss_solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for col in (0..N).rev() {
        let mut s = b[col];
        for k in (col + 1)..N {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Textbook per-equation least squares through explicit normal
/// equations, kept independent of the estimator implementation.
fn normal_equation_ols(table: &ObservationTable) -> ThetaVector {
    let mut st = 0.0_f64;
    let mut sm = 0.0_f64;
    let mut smt = 0.0_f64;
    let mut sm2 = 0.0_f64;
    let mut sm2t = 0.0_f64;
    let mut sy = 0.0_f64;
    let mut sty = 0.0_f64;
    let mut smy = 0.0_f64;
    let mut smty = 0.0_f64;
    let n = table.len() as f64;
    for r in table.records() {
        let t = r.treatment.indicator();
        let m = r.mediator;
        let y = r.outcome;
        st += t;
        sm += m;
        smt += m * t;
        sm2 += m * m;
        sm2t += m * m * t;
        sy += y;
        sty += t * y;
        smy += m * y;
        smty += m * t * y;
    }
    let med = gauss_solve([[n, st], [st, st]], [sm, smt]).expect("mediator design");
    let out = gauss_solve(
        [
            [n, st, sm, smt],
            [st, st, smt, smt],
            [sm, smt, sm2, sm2t],
            [smt, smt, sm2t, sm2t],
        ],
        [sy, sty, smy, smty],
    )
    .expect("outcome design");
    ThetaVector {
        theta_m10: med[0],
        theta_m11: med[1],
        theta_y0: out[0],
        theta_y1: out[1],
        theta_y2: out[2],
        theta_y3: out[3],
    }
}

/// Exact identification: the GMM fit equals independent per-equation
/// least squares, converges immediately, and zeroes the sample moments.
pub fn exact_identification_checks(n_datasets: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_coef_gap: f64 = 0.0;
    let mut max_iterations: usize = 0;
    let mut max_scaled_moment: f64 = 0.0;
    for i in 0..n_datasets {
        let ds = random_dataset(2_000, &mut rng);
        // alternate kernels; the minimizer must not depend on the weight
        let config = if i % 2 == 0 {
            HacConfig::lag0()
        } else {
            HacConfig::bartlett(crate::gmm::Bandwidth::Auto)
        };
        let fit = itgmm_fit_default(&ds.table, &config).expect("fit on simulated data");
        let ols = normal_equation_ols(&ds.table);
        for (a, b) in fit.theta.as_array().into_iter().zip(ols.as_array()) {
            max_coef_gap = max_coef_gap.max((a - b).abs());
        }
        max_iterations = max_iterations.max(fit.iterations);
        let max_abs_data = ds
            .table
            .records()
            .iter()
            .map(|r| r.mediator.abs().max(r.outcome.abs()))
            .fold(1.0_f64, f64::max);
        let gbar = average_moments(&ds.table, &fit.theta);
        max_scaled_moment = max_scaled_moment.max(gbar.abs().max() / (1.0 + max_abs_data));
    }
    vec![
        Check::upper_bound(
            format!("|itgmm - normal-equation ols| per coefficient, max over {n_datasets} datasets"),
            max_coef_gap,
            1e-8,
        ),
        Check::upper_bound(
            "itgmm iterations to converge, max",
            max_iterations as f64,
            2.0,
        ),
        Check::upper_bound(
            "max |mean moment| / (1 + max |data|) at the fit",
            max_scaled_moment,
            1e-8,
        ),
    ]
}

/// Kolmogorov-Smirnov distance of a sample against the uniform
/// distribution on [0, 1].
fn ks_distance_uniform(sample: &mut [f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, p) in sample.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - p;
        let lo = p - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Under a specification with no treatment pathways, mediated-effect
/// p-values must be uniform and the test must hold its size.
pub fn null_calibration_checks(reps: usize, n_rows: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let spec = random_null_spec(1, 1, &mut rng);
    let mut p_values = Vec::with_capacity(reps);
    for _ in 0..reps {
        let table = simulate(&spec, n_rows, rng.gen()).expect("valid null spec");
        let report = fitted_report(&table);
        p_values.push(report.gacme1.p_value);
    }
    let rejection = p_values.iter().filter(|&&p| p < 0.05).count() as f64 / reps as f64;
    let d = ks_distance_uniform(&mut p_values);
    // asymptotic 1% critical value with the usual finite-sample scaling
    let n = reps as f64;
    let d_crit = 1.62762 / (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    vec![
        Check::upper_bound(
            format!("KS distance of GACME(1) null p-values from uniform, {reps} reps"),
            d,
            d_crit,
        ),
        Check::in_range(
            format!("GACME(1) rejection rate at alpha=0.05 under the null, {reps} reps"),
            rejection,
            0.03,
            0.07,
        ),
    ]
}

/// Residuals of the regression system, evaluated at the *population*
/// coefficients on simulated data, have conditional mean zero: per arm
/// for the mediator equation, and per (arm x mediator-quartile) bin for
/// the outcome equation.
pub fn residual_mean_zero_checks(n_rows: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let spec = random_spec(1, 1, &mut rng);
    let table = simulate(&spec, n_rows, rng.gen()).expect("valid random spec");
    let theta = theta_from_structural(&spec).expect("valid random spec");

    let mut max_arm_dev: f64 = 0.0;
    // per arm: (mediator, outcome residual) pairs
    let mut arm_rows: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for arm in [Arm::Control, Arm::Treatment] {
        let t = arm.indicator();
        let mut acc = Welford::default();
        for r in table.records() {
            if r.treatment == arm {
                acc.add(r.mediator - theta.theta_m10 - theta.theta_m11 * t);
                let res = r.outcome
                    - theta.theta_y0
                    - theta.theta_y1 * t
                    - theta.theta_y2 * r.mediator
                    - theta.theta_y3 * r.mediator * t;
                arm_rows[t as usize].push((r.mediator, res));
            }
        }
        max_arm_dev = max_arm_dev.max(acc.mean().abs() / acc.mean_std_error());
    }

    // Mediator quartile bins by within-arm rank, so every bin holds a
    // quarter of its arm even when the mediator has atoms.
    let mut max_bin_dev: f64 = 0.0;
    for rows in arm_rows.iter_mut() {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut bins = [Welford::default(); 4];
        for (pos, (_, res)) in rows.iter().enumerate() {
            bins[(pos * 4) / rows.len()].add(*res);
        }
        for b in &bins {
            assert!(b.count() > 1, "empty residual bin");
            max_bin_dev = max_bin_dev.max(b.mean().abs() / b.mean_std_error());
        }
    }

    vec![
        Check::upper_bound(
            "mediator-equation residual |mean|/se at population coefficients, max over arms",
            max_arm_dev,
            4.0,
        ),
        Check::upper_bound(
            "outcome-equation residual |mean|/se, max over arm x mediator-quartile bins",
            max_bin_dev,
            4.0,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_specs_are_valid() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            let spec = random_spec(block_size(&mut rng), block_size(&mut rng), &mut rng);
            spec.validate().unwrap();
            true_effects_from_structural(&spec).unwrap();
        }
    }

    #[test]
    fn null_specs_have_zero_effects() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10 {
            let spec = random_null_spec(1, 1, &mut rng);
            let truth = true_effects_from_structural(&spec).unwrap();
            assert_eq!(truth.ate, 0.0);
            assert_eq!(truth.gacme1, 0.0);
            assert_eq!(truth.gade0, 0.0);
        }
    }

    #[test]
    fn gauss_solver_matches_hand_solution() {
        let x = gauss_solve([[2.0, 1.0], [1.0, 3.0]], [5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!(gauss_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0]).is_none());
    }

    #[test]
    fn ks_distance_detects_non_uniform_samples() {
        let mut uniformish: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance_uniform(&mut uniformish) < 0.01);
        let mut clumped = vec![0.4; 1000];
        assert!(ks_distance_uniform(&mut clumped) > 0.5);
    }

    #[test]
    fn identity_suite_passes_quickly() {
        let report = run_suite(Suite::Identity, Some(5), 31);
        assert!(report.passed(), "{}", report.render());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in [
            Suite::Identity,
            Suite::Consistency,
            Suite::Coverage,
            Suite::Delta,
        ] {
            assert_eq!(Suite::from_str(s.name()).unwrap(), s);
        }
        assert!(Suite::from_str("bogus").is_err());
    }
}
