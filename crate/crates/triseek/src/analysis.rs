//! Certification of closed-loop runs: perturbation terms and their bounds,
//! a matrix-inequality feasibility search, ultimate-bound radii, Taylor
//! remainder checks, and a whole-trajectory report.
//!
//! The error dynamics stack the two formation errors and the seeking error
//! into chi = (delta1, delta2, z). Near the maximizer the loop behaves like
//! chi' = A chi + B (phi1 + phi2* + phi3), where the phi terms collect the
//! Taylor remainders of the sampled field. Everything here quantifies how
//! far the true nonlinear run is from that linear picture and turns a
//! feasible Lyapunov certificate into an explicit convergence radius.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::Gains;
use crate::error::{Error, Result};
use crate::field::{estimate_regularity, Rect, RegularityConstants, ScalarField};
use crate::geometry::{signed_sine, Assumption2Report, FormationMatrix, FormationSpec};
use crate::linalg::{spectral_norm2, sym_eig2, symmetric_eigenvalues, Mat2, Vec2};
use crate::quadrature::GaussLegendre;
use crate::sim::{Sample, Trajectory};
use crate::stats::{fit_exponential_decay, tail_max};

/// Linearization of the error dynamics about the maximizer.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    /// 6x6 block diagonal: -k1 I, -k2 I, k0 H*.
    pub a: DMatrix<f64>,
    /// 6x2 injection of the lumped perturbation into the z rows.
    pub b: DMatrix<f64>,
    /// 2x6 selector picking z out of chi.
    pub c1: DMatrix<f64>,
    pub maximizer: Vec2,
    pub hessian_at_maximizer: Mat2,
}

/// Builds the linearized system for a field with a nondegenerate interior
/// maximizer. Fails when the field has no maximizer or the Hessian there is
/// not negative definite.
pub fn build_system_matrices(field: &ScalarField, gains: &Gains) -> Result<SystemMatrices> {
    let maximizer = field.maximizer()?;
    let hessian = field.hessian(&maximizer);
    let (_, hi) = sym_eig2(&hessian);
    if !(hi < 0.0) {
        return Err(Error::AssumptionViolation(format!(
            "field curvature at the maximizer must be negative definite \
             (largest eigenvalue {hi:.6e})"
        )));
    }
    let mut a = DMatrix::zeros(6, 6);
    for i in 0..2 {
        a[(i, i)] = -gains.k1;
        a[(2 + i, 2 + i)] = -gains.k2;
        for j in 0..2 {
            a[(4 + i, 4 + j)] = gains.k0 * hessian[(i, j)];
        }
    }
    let mut b = DMatrix::zeros(6, 2);
    b[(4, 0)] = 1.0;
    b[(5, 1)] = 1.0;
    let mut c1 = DMatrix::zeros(2, 6);
    c1[(0, 4)] = 1.0;
    c1[(1, 5)] = 1.0;
    Ok(SystemMatrices { a, b, c1, maximizer, hessian_at_maximizer: hessian })
}

/// Second-order remainder terms of the gradient estimate at one sample.
#[derive(Debug, Clone, Copy)]
pub struct PhiTerms {
    /// Remainder of the live formation: K0 g - K0 grad f(x0).
    pub phi2: Vec2,
    /// Same integral evaluated with the target offsets at the same base point.
    pub phi2_star: Vec2,
    /// phi2 - phi2_star; decays with the formation errors.
    pub phi3: Vec2,
}

fn curvature_remainder(
    field: &ScalarField,
    base: &Vec2,
    offset: &Vec2,
    quad: &GaussLegendre,
) -> f64 {
    quad.integrate_unit(|xi| {
        let h = field.hessian(&(base + offset * xi));
        (1.0 - xi) * offset.dot(&(h * offset))
    })
}

fn remainder_pair(
    field: &ScalarField,
    base: &Vec2,
    r1: &Vec2,
    r2: &Vec2,
    inverse: &Mat2,
    k0: f64,
    quad: &GaussLegendre,
) -> Vec2 {
    let rem = Vec2::new(
        curvature_remainder(field, base, r1, quad),
        curvature_remainder(field, base, r2, quad),
    );
    inverse * rem * k0
}

/// Evaluates phi2, phi2*, and phi3 at a recorded sample by Gauss-Legendre
/// quadrature of the exact integral remainders.
pub fn compute_phi_terms(
    sample: &Sample,
    field: &ScalarField,
    spec: &FormationSpec,
    gains: &Gains,
    quadrature_order: usize,
) -> Result<PhiTerms> {
    let quad = GaussLegendre::new(quadrature_order)?;
    let live = FormationMatrix::from_rows(&sample.r1, &sample.r2);
    let inverse = live.invert(0.0)?;
    let phi2 =
        remainder_pair(field, &sample.x0, &sample.r1, &sample.r2, &inverse, gains.k0, &quad);
    let phi2_star = remainder_pair(
        field,
        &sample.x0,
        &spec.r1_star(),
        &spec.r2_star(),
        &spec.inverse(),
        gains.k0,
        &quad,
    );
    Ok(PhiTerms { phi2, phi2_star, phi3: phi2 - phi2_star })
}

/// The residual perturbation phi1 at one sample, with its sample bound.
#[derive(Debug, Clone, Copy)]
pub struct Phi1Sample {
    pub phi1: Vec2,
    /// alpha1 * |z| at this sample.
    pub bound: f64,
    pub within_bound: bool,
}

/// Evaluates phi1 = K0 g - K0 H* z - phi2 at a sample and checks it against
/// alpha1 |z|. Requires the sample to carry a seeking error.
pub fn compute_phi1(
    sample: &Sample,
    field: &ScalarField,
    spec: &FormationSpec,
    gains: &Gains,
    alpha1: f64,
    quadrature_order: usize,
) -> Result<Phi1Sample> {
    let z = sample.z.ok_or(Error::NoMaximizer)?;
    let maximizer = field.maximizer()?;
    let h_star = field.hessian(&maximizer);
    let terms = compute_phi_terms(sample, field, spec, gains, quadrature_order)?;
    let phi1 = sample.g * gains.k0 - h_star * z * gains.k0 - terms.phi2;
    let bound = alpha1 * z.norm();
    Ok(Phi1Sample { phi1, bound, within_bound: phi1.norm() <= bound + 1e-9 })
}

/// Constants bounding the perturbation terms over a region, plus the fitted
/// decay of phi3 along a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UncertaintyBounds {
    /// Gain on |z| bounding phi1: 2 G_H k0.
    pub alpha1: f64,
    /// Constant bound on phi2*: (k0 M_H / 2) |R*^-1| (|r1*|^2 + |r2*|^2).
    pub alpha2_star: f64,
    /// Fitted initial amplitude of |phi3(t)|.
    pub epsilon: f64,
    /// Fitted exponential decay rate of |phi3(t)|; infinite when phi3 is
    /// already at the noise floor.
    pub beta: f64,
}

/// Derives alpha1 and alpha2* from regularity constants valid over the whole
/// run, and fits the decay of phi3 from the recorded samples.
pub fn uncertainty_bounds(
    field: &ScalarField,
    regularity: &RegularityConstants,
    spec: &FormationSpec,
    gains: &Gains,
    trajectory: &Trajectory,
    quadrature_order: usize,
) -> Result<UncertaintyBounds> {
    let alpha1 = 2.0 * regularity.g_h * gains.k0;
    let alpha2_star =
        0.5 * gains.k0 * regularity.m_h * spec.inverse_norm() * spec.size_squared_sum();
    let mut series = Vec::with_capacity(trajectory.samples.len());
    for sample in &trajectory.samples {
        let terms = compute_phi_terms(sample, field, spec, gains, quadrature_order)?;
        series.push((sample.t, terms.phi3.norm()));
    }
    let fit = fit_exponential_decay(&series, 1e-12);
    Ok(UncertaintyBounds { alpha1, alpha2_star, epsilon: fit.amplitude, beta: fit.rate })
}

/// Candidate Lyapunov certificate: storage function P with multipliers for
/// the three perturbation channels and a decay rate lambda.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmiCandidate {
    /// Diagonal of the 6x6 storage matrix P = diag(p1, p1, p2, p2, p3, p3).
    pub p_diag: [f64; 3],
    pub tau: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda: f64,
}

impl LmiCandidate {
    pub fn new(p_diag: [f64; 3], tau: f64, gamma1: f64, gamma2: f64, lambda: f64) -> Self {
        LmiCandidate { p_diag, tau, gamma1, gamma2, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("p1", self.p_diag[0]),
            ("p2", self.p_diag[1]),
            ("p3", self.p_diag[2]),
            ("tau", self.tau),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("lambda", self.lambda),
        ];
        for (name, v) in scalars {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument {
                    arg: "candidate",
                    reason: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// The full 6x6 storage matrix.
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(6, 6);
        for block in 0..3 {
            for i in 0..2 {
                p[(2 * block + i, 2 * block + i)] = self.p_diag[block];
            }
        }
        p
    }

    pub fn p_min_eigenvalue(&self) -> f64 {
        self.p_diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rescales P and all multipliers by c, leaving lambda untouched. The
    /// certificate and the radius it implies are invariant under this.
    pub fn scaled(&self, c: f64) -> Self {
        LmiCandidate {
            p_diag: [self.p_diag[0] * c, self.p_diag[1] * c, self.p_diag[2] * c],
            tau: self.tau * c,
            gamma1: self.gamma1 * c,
            gamma2: self.gamma2 * c,
            lambda: self.lambda,
        }
    }
}

/// Assembles the 12x12 certificate matrix; the candidate certifies the decay
/// rate lambda exactly when this matrix is negative definite.
pub fn lmi_matrix(sys: &SystemMatrices, cand: &LmiCandidate, alpha1: f64) -> DMatrix<f64> {
    let p = cand.p_matrix();
    let pa = &p * &sys.a;
    let pb = &p * &sys.b;
    let c1tc1 = sys.c1.transpose() * &sys.c1;
    let mut m = DMatrix::zeros(12, 12);
    for i in 0..6 {
        for j in 0..6 {
            m[(i, j)] = pa[(i, j)]
                + pa[(j, i)]
                + cand.tau * alpha1 * alpha1 * c1tc1[(i, j)]
                + cand.lambda * p[(i, j)];
        }
    }
    for (block, gain) in [(0, cand.tau), (1, cand.gamma1), (2, cand.gamma2)] {
        let col = 6 + 2 * block;
        for i in 0..6 {
            for j in 0..2 {
                m[(i, col + j)] = pb[(i, j)];
                m[(col + j, i)] = pb[(i, j)];
            }
        }
        m[(col, col)] = -gain;
        m[(col + 1, col + 1)] = -gain;
    }
    m
}

/// Outcome of testing one candidate certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LmiVerdict {
    pub feasible: bool,
    /// Distance of the largest eigenvalue below zero; negative when the
    /// candidate fails.
    pub margin: f64,
    pub max_eigenvalue: f64,
    pub p_min_eigenvalue: f64,
}

/// Checks whether a candidate makes the certificate matrix negative definite.
pub fn check_lmi(sys: &SystemMatrices, cand: &LmiCandidate, alpha1: f64) -> Result<LmiVerdict> {
    cand.validate()?;
    if !(alpha1 >= 0.0) || !alpha1.is_finite() {
        return Err(Error::InvalidArgument {
            arg: "alpha1",
            reason: format!("must be nonnegative and finite, got {alpha1}"),
        });
    }
    let m = lmi_matrix(sys, cand, alpha1);
    let eigs = symmetric_eigenvalues(&m)?;
    let max_eigenvalue = *eigs.last().expect("12x12 spectrum is nonempty");
    let p_min = cand.p_min_eigenvalue();
    Ok(LmiVerdict {
        feasible: max_eigenvalue < 0.0 && p_min > 0.0,
        margin: -max_eigenvalue,
        max_eigenvalue,
        p_min_eigenvalue: p_min,
    })
}

/// Result of the randomized certificate search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmiSearchOutcome {
    pub best: LmiCandidate,
    pub verdict: LmiVerdict,
    pub trials_used: usize,
}

fn schur_warm_starts(sys: &SystemMatrices, alpha1: f64, lambda: f64) -> Vec<LmiCandidate> {
    // For block-diagonal P the delta rows decouple, and with the optimal
    // multiplier tau = p3/alpha1 the z rows are negative definite when
    // p3 (2 a_min - lambda - 2 alpha1) > p3^2 (1/gamma1 + 1/gamma2), where
    // a_min is the slowest decay rate of the z block. Seed the search at the
    // p3 maximizing that quadratic slack, with gamma1 pinned to 1.
    let slack = 2.0 * z_block_min_decay(sys) - lambda - 2.0 * alpha1;
    if slack <= 0.0 {
        return Vec::new();
    }
    let mut starts = Vec::new();
    for gamma2 in [1e3, 1e5] {
        let p3 = 0.5 * slack / (1.0 + 1.0 / gamma2);
        let tau = if alpha1 > 0.0 { p3 / alpha1 } else { 1.0 };
        for p_delta in [1.0, p3.max(1e-6)] {
            starts.push(LmiCandidate::new(
                [p_delta, p_delta, p3],
                tau,
                1.0,
                gamma2,
                lambda,
            ));
        }
    }
    starts
}

fn z_block_min_decay(sys: &SystemMatrices) -> f64 {
    let z_block = Mat2::new(sys.a[(4, 4)], sys.a[(4, 5)], sys.a[(5, 4)], sys.a[(5, 5)]);
    let (_, hi) = sym_eig2(&z_block);
    -hi
}

/// Searches for a feasible certificate at the given decay rate: warm starts
/// from a Schur-complement analysis, seeded log-uniform random draws, then a
/// multiplicative coordinate climb on the best candidate. gamma1 is pinned
/// to 1 to remove the scaling freedom of the inequality.
pub fn lmi_search(
    sys: &SystemMatrices,
    alpha1: f64,
    lambda: f64,
    budget: usize,
    seed: u64,
) -> Result<LmiSearchOutcome> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument {
            arg: "lambda",
            reason: format!("must be positive and finite, got {lambda}"),
        });
    }
    if budget == 0 {
        return Err(Error::InvalidArgument {
            arg: "budget",
            reason: "need at least one trial".to_string(),
        });
    }
    fn consider(
        sys: &SystemMatrices,
        alpha1: f64,
        cand: LmiCandidate,
        best: &mut Option<(LmiCandidate, LmiVerdict)>,
        trials: &mut usize,
        budget: usize,
    ) -> Result<bool> {
        if *trials >= budget {
            return Ok(false);
        }
        *trials += 1;
        let verdict = check_lmi(sys, &cand, alpha1)?;
        let improved = match best {
            None => true,
            Some((_, v)) => verdict.margin > v.margin,
        };
        if improved {
            *best = Some((cand, verdict));
        }
        Ok(improved)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = 0usize;
    let mut best: Option<(LmiCandidate, LmiVerdict)> = None;

    for cand in schur_warm_starts(sys, alpha1, lambda) {
        consider(sys, alpha1, cand, &mut best, &mut trials, budget)?;
    }
    let random_share = (budget / 2).max(1).min(budget);
    while trials < random_share {
        let mut draw =
            |lo: f64, hi: f64| -> f64 { 10f64.powf(rng.gen_range(lo..hi)) };
        let cand = LmiCandidate::new(
            [draw(-3.0, 3.0), draw(-3.0, 3.0), draw(-3.0, 3.0)],
            draw(-3.0, 3.0),
            1.0,
            draw(0.0, 6.0),
            lambda,
        );
        consider(sys, alpha1, cand, &mut best, &mut trials, budget)?;
    }
    // Multiplicative coordinate climb from the incumbent, coarse to fine.
    let mut factors = vec![4.0, 2.0, 1.25, 1.05, 1.01];
    'climb: while trials < budget {
        let Some((incumbent, _)) = best.clone() else { break };
        let mut any = false;
        for coord in 0..5 {
            for &f in &factors {
                for &factor in &[f, 1.0 / f] {
                    if trials >= budget {
                        break 'climb;
                    }
                    let mut cand = incumbent.clone();
                    match coord {
                        0 => cand.p_diag[0] *= factor,
                        1 => cand.p_diag[1] *= factor,
                        2 => cand.p_diag[2] *= factor,
                        3 => cand.tau *= factor,
                        _ => cand.gamma2 *= factor,
                    }
                    if consider(sys, alpha1, cand, &mut best, &mut trials, budget)? {
                        any = true;
                    }
                }
            }
        }
        if !any {
            if factors.len() > 1 {
                factors.remove(0);
            } else {
                break;
            }
        }
    }
    let (cand, verdict) = best.expect("budget >= 1 guarantees at least one trial");
    Ok(LmiSearchOutcome { best: cand, verdict, trials_used: trials })
}

/// Ultimate-bound radii implied by a feasible certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundRadii {
    /// Radius from the tight bound: alpha2* sqrt(gamma1 / (lambda sigma_min P)).
    pub nominal: f64,
    /// Radius twice the nominal, matching the looser constant chain used in
    /// the convergence proof's final step.
    pub conservative: f64,
}

/// Converts a feasible certificate into explicit radii on limsup |z|.
/// Fails when the candidate does not certify the system at this alpha1.
pub fn theorem_bound(
    sys: &SystemMatrices,
    cand: &LmiCandidate,
    alpha1: f64,
    spec: &FormationSpec,
    gains: &Gains,
    m_h: f64,
) -> Result<BoundRadii> {
    let verdict = check_lmi(sys, cand, alpha1)?;
    if !verdict.feasible {
        return Err(Error::PreconditionFailed(format!(
            "candidate is not feasible (margin {:.3e}); radii would be meaningless",
            verdict.margin
        )));
    }
    let alpha2_star = 0.5 * gains.k0 * m_h * spec.inverse_norm() * spec.size_squared_sum();
    let nominal = alpha2_star
        * (cand.gamma1 / (cand.lambda * verdict.p_min_eigenvalue)).sqrt();
    Ok(BoundRadii { nominal, conservative: 2.0 * nominal })
}

/// Outcome of randomized Taylor remainder checks over a region.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TaylorReport {
    pub pairs: usize,
    /// Worst |f(y) - f(x) - (y-x).grad f(x)| relative to (M_H/2)|y-x|^2.
    pub worst_value_ratio: f64,
    /// Worst |grad f(y) - grad f(x)| relative to M_H |y-x|.
    pub worst_gradient_ratio: f64,
    /// Curvature bound used, including the grid-resolution slack.
    pub m_h_used: f64,
    pub passed: bool,
}

/// Draws random point pairs in the region and checks the first-order Taylor
/// remainder and gradient variation against the estimated curvature bound.
pub fn taylor_checks(
    field: &ScalarField,
    region: &Rect,
    pairs: usize,
    seed: u64,
) -> Result<TaylorReport> {
    if pairs == 0 {
        return Err(Error::InvalidArgument {
            arg: "pairs",
            reason: "need at least one pair".to_string(),
        });
    }
    let extent = (region.max - region.min).amax();
    let grid_step = (extent / 256.0).max(1e-6);
    let reg = estimate_regularity(field, region, grid_step)?;
    // The grid maximum can miss the true supremum between nodes by at most
    // the Lipschitz modulus times the node spacing.
    let m_h_used = reg.m_h + reg.l_h * grid_step;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_value: f64 = 0.0;
    let mut worst_gradient: f64 = 0.0;
    for _ in 0..pairs {
        let x = Vec2::new(
            rng.gen_range(region.min.x..=region.max.x),
            rng.gen_range(region.min.y..=region.max.y),
        );
        let y = Vec2::new(
            rng.gen_range(region.min.x..=region.max.x),
            rng.gen_range(region.min.y..=region.max.y),
        );
        let h = y - x;
        let dist = h.norm();
        if dist < 1e-12 {
            continue;
        }
        let remainder = (field.eval(&y) - field.eval(&x) - h.dot(&field.grad(&x))).abs();
        // Absolute floors keep the ratios finite when the curvature bound is
        // zero (affine fields), where the remainders are pure rounding noise.
        let value_floor = 1e-12 * (field.eval(&x).abs() + field.eval(&y).abs() + 1.0);
        let grad_floor =
            1e-12 * (field.grad(&x).norm() + field.grad(&y).norm() + 1.0);
        let value_ratio = remainder / (0.5 * m_h_used * dist * dist + value_floor);
        let gradient_ratio =
            (field.grad(&y) - field.grad(&x)).norm() / (m_h_used * dist + grad_floor);
        worst_value = worst_value.max(value_ratio);
        worst_gradient = worst_gradient.max(gradient_ratio);
    }
    Ok(TaylorReport {
        pairs,
        worst_value_ratio: worst_value,
        worst_gradient_ratio: worst_gradient,
        m_h_used,
        passed: worst_value <= 1.0 + 1e-9 && worst_gradient <= 1.0 + 1e-9,
    })
}

/// Knobs for the trajectory analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub quadrature_order: usize,
    pub lmi_budget: usize,
    pub lmi_lambda: f64,
    pub seed: u64,
    /// Half-width of the box around the maximizer over which the certificate
    /// constants are estimated.
    pub lmi_region_halfwidth: f64,
    pub regularity_grid_step: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            quadrature_order: 16,
            lmi_budget: 10_000,
            lmi_lambda: 0.01,
            seed: 0,
            lmi_region_halfwidth: 50.0,
            regularity_grid_step: 1.0,
        }
    }
}

/// Fit of one formation error against its exact exponential decay.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FormationFit {
    pub initial_norm: f64,
    pub fitted_rate: f64,
    pub expected_rate: f64,
    pub rate_relative_error: f64,
    /// Max over samples of | |delta(t)| - |delta(0)| e^{-k t} | / |delta(0)|.
    pub max_oracle_deviation: f64,
    pub rate_ok: bool,
    pub oracle_ok: bool,
}

fn fit_formation_error(
    series: &[(f64, f64)],
    expected_rate: f64,
    rate_tol: f64,
    oracle_tol: f64,
) -> FormationFit {
    let initial = series.first().map_or(0.0, |&(_, v)| v);
    if initial == 0.0 {
        // Zero initial error stays zero; report the exact rate vacuously and
        // fold any numerical drift into the oracle deviation (absolute).
        let drift = series.iter().map(|&(_, v)| v).fold(0.0, f64::max);
        return FormationFit {
            initial_norm: 0.0,
            fitted_rate: f64::INFINITY,
            expected_rate,
            rate_relative_error: 0.0,
            max_oracle_deviation: drift,
            rate_ok: true,
            oracle_ok: drift <= oracle_tol,
        };
    }
    let fit = fit_exponential_decay(series, (1e-9 * initial).max(1e-300));
    let rate_relative_error = (fit.rate - expected_rate).abs() / expected_rate;
    let max_dev = series
        .iter()
        .map(|&(t, v)| (v - initial * (-expected_rate * t).exp()).abs() / initial)
        .fold(0.0, f64::max);
    FormationFit {
        initial_norm: initial,
        fitted_rate: fit.rate,
        expected_rate,
        rate_relative_error,
        max_oracle_deviation: max_dev,
        rate_ok: rate_relative_error <= rate_tol,
        oracle_ok: max_dev <= oracle_tol,
    }
}

/// Formation-geometry invariants checked over the recorded samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeometryChecks {
    pub sine_sign_constant: bool,
    pub min_abs_sine: f64,
    /// min(|rho0|, |rho*|) minus the numerical allowance.
    pub sine_floor: f64,
    pub sine_bound_holds: bool,
    /// Min over samples of |det R| - min(|rho0|,|rho*|) |r1| |r2|.
    pub min_det_slack: f64,
    pub det_bound_holds: bool,
    /// Fitted decay rate of |R^-1(t) - R*^-1|.
    pub inverse_convergence_rate: f64,
    pub inverse_rate_ok: bool,
}

fn geometry_checks(traj: &Trajectory, min_rate: f64) -> Result<GeometryChecks> {
    let rho_floor = traj.assumption2.rho0.abs().min(traj.assumption2.rho_star.abs());
    let target_inv = traj.formation.inverse();
    let mut sign = 0.0f64;
    let mut sign_constant = true;
    let mut min_abs_sine = f64::INFINITY;
    let mut min_det_slack = f64::INFINITY;
    let mut inv_series = Vec::with_capacity(traj.samples.len());
    for sample in &traj.samples {
        let sine = signed_sine(&sample.r1, &sample.r2)?;
        if sign == 0.0 {
            sign = sine.signum();
        } else if sine.signum() != sign {
            sign_constant = false;
        }
        min_abs_sine = min_abs_sine.min(sine.abs());
        let slack = sample.det_r.abs() - rho_floor * sample.r1.norm() * sample.r2.norm();
        min_det_slack = min_det_slack.min(slack);
        let live = FormationMatrix::from_rows(&sample.r1, &sample.r2);
        let inv = live.invert(0.0)?;
        inv_series.push((sample.t, spectral_norm2(&(inv - target_inv))));
    }
    let initial_gap = inv_series.first().map_or(0.0, |&(_, v)| v);
    let fit = fit_exponential_decay(&inv_series, (1e-9 * initial_gap).max(1e-300));
    Ok(GeometryChecks {
        sine_sign_constant: sign_constant,
        min_abs_sine,
        sine_floor: rho_floor - 1e-9,
        sine_bound_holds: sign_constant && min_abs_sine >= rho_floor - 1e-9,
        min_det_slack,
        det_bound_holds: min_det_slack >= -1e-9,
        inverse_convergence_rate: fit.rate,
        inverse_rate_ok: fit.rate >= 0.9 * min_rate,
    })
}

/// Summary of the feasibility search and the radii it certifies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    /// alpha1 evaluated with constants local to the maximizer.
    pub alpha1: f64,
    /// alpha2* evaluated with the local curvature bound.
    pub alpha2_star: f64,
    pub feasible: bool,
    pub margin: f64,
    pub trials_used: usize,
    pub candidate: LmiCandidate,
    pub sigma_min_p: f64,
    /// tau / gamma1, comparable across rescalings of the candidate.
    pub scaled_tau: f64,
    /// gamma2 / gamma1.
    pub scaled_gamma2: f64,
    /// sigma_min(P) / gamma1.
    pub scaled_sigma_min_p: f64,
    pub radii: Option<BoundRadii>,
    /// Whether limsup |z| observed on this run stays within the conservative
    /// radius.
    pub bound_holds: Option<bool>,
    /// Whether the radius lands inside the region the constants were
    /// estimated on, so the certificate is self-consistent.
    pub radius_within_region: Option<bool>,
}

/// Seeking-related checks; absent for fields without a maximizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeekingChecks {
    pub maximizer: [f64; 2],
    pub final_z_norm: f64,
    pub final_gradient_norm: f64,
    /// Max of |z| over the trailing fifth of the samples.
    pub limsup_z: f64,
    /// Constants over the padded bounding box of the whole run.
    pub run_regularity: RegularityConstants,
    /// Constants over the certificate box around the maximizer.
    pub local_regularity: RegularityConstants,
    /// Bounds from the run-wide constants; used for samplewise checks.
    pub bounds: UncertaintyBounds,
    /// Max over samples of |phi1| - alpha1 |z|.
    pub phi1_max_excess: f64,
    pub phi1_bound_holds: bool,
    pub phi2_star_max: f64,
    pub phi2_star_bound_holds: bool,
    /// Fitted decay rate of |phi3| meets 0.9 min(k1, k2).
    pub phi3_rate_ok: bool,
    /// Max over samples of |K0 g - K0 H* z - phi1 - phi2|.
    pub residual_max: f64,
    pub residual_ok: bool,
    /// Max over samples of |K0 g - K0 grad f(x0) - phi2|, the quadrature
    /// closure of the remainder identity.
    pub gradient_closure_max: f64,
    pub gradient_closure_ok: bool,
    pub certificate: CertificateReport,
}

/// Full verification report for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub field: String,
    pub gains: Gains,
    pub formation: FormationSpec,
    pub assumption2: Assumption2Report,
    pub samples: usize,
    pub duration: f64,
    pub stopped_early: bool,
    pub formation_fit_1: FormationFit,
    pub formation_fit_2: FormationFit,
    pub geometry: GeometryChecks,
    pub seeking: Option<SeekingChecks>,
}

fn run_bounding_box(traj: &Trajectory, maximizer: Option<Vec2>) -> Result<Rect> {
    let mut points = Vec::with_capacity(3 * traj.samples.len() + 1);
    for s in &traj.samples {
        points.push(s.x0);
        points.push(s.x1);
        points.push(s.x2);
    }
    if let Some(m) = maximizer {
        points.push(m);
    }
    Rect::bounding(points)
        .ok_or_else(|| Error::PreconditionFailed("trajectory has no samples to bound".into()))
}

fn seeking_checks(
    field: &ScalarField,
    traj: &Trajectory,
    opts: &AnalysisOptions,
) -> Result<SeekingChecks> {
    let maximizer = field.maximizer()?;
    let spec = &traj.formation;
    let gains = &traj.gains;
    let run_box = run_bounding_box(traj, Some(maximizer))?.padded(0.05);
    let run_regularity = estimate_regularity(field, &run_box, opts.regularity_grid_step)?;
    let halfwidth = Vec2::new(opts.lmi_region_halfwidth, opts.lmi_region_halfwidth);
    let local_box = Rect::new(maximizer - halfwidth, maximizer + halfwidth)?;
    let local_step = opts.regularity_grid_step.min(opts.lmi_region_halfwidth / 25.0);
    let local_regularity = estimate_regularity(field, &local_box, local_step)?;

    let bounds =
        uncertainty_bounds(field, &run_regularity, spec, gains, traj, opts.quadrature_order)?;

    let h_star = field.hessian(&maximizer);
    let mut phi1_max_excess = f64::NEG_INFINITY;
    let mut phi2_star_max: f64 = 0.0;
    let mut residual_max: f64 = 0.0;
    let mut closure_max: f64 = 0.0;
    for sample in &traj.samples {
        let z = sample.z.ok_or(Error::NoMaximizer)?;
        let terms = compute_phi_terms(sample, field, spec, gains, opts.quadrature_order)?;
        let phi1 = sample.g * gains.k0 - h_star * z * gains.k0 - terms.phi2;
        phi1_max_excess = phi1_max_excess.max(phi1.norm() - bounds.alpha1 * z.norm());
        phi2_star_max = phi2_star_max.max(terms.phi2_star.norm());
        let residual =
            sample.g * gains.k0 - h_star * z * gains.k0 - phi1 - terms.phi2;
        residual_max = residual_max.max(residual.norm());
        let closure = sample.g * gains.k0 - field.grad(&sample.x0) * gains.k0 - terms.phi2;
        closure_max = closure_max.max(closure.norm());
    }

    let zero_initial_errors = traj
        .samples
        .first()
        .map(|s| s.delta1.norm() == 0.0 && s.delta2.norm() == 0.0)
        .unwrap_or(false);
    let min_rate = gains.min_formation_rate();
    let phi3_rate_ok = zero_initial_errors || bounds.beta >= 0.9 * min_rate;

    let sys = build_system_matrices(field, gains)?;
    let alpha1_local = 2.0 * local_regularity.g_h * gains.k0;
    let alpha2_star_local =
        0.5 * gains.k0 * local_regularity.m_h * spec.inverse_norm() * spec.size_squared_sum();
    let search = lmi_search(&sys, alpha1_local, opts.lmi_lambda, opts.lmi_budget, opts.seed)?;
    let znorms: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| s.z.map(|z| z.norm()).unwrap_or(f64::NAN))
        .collect();
    let limsup_z = tail_max(&znorms, 0.2);
    let (radii, bound_holds, radius_within_region) = if search.verdict.feasible {
        let radii = theorem_bound(
            &sys,
            &search.best,
            alpha1_local,
            spec,
            gains,
            local_regularity.m_h,
        )?;
        (
            Some(radii),
            Some(limsup_z <= radii.conservative),
            Some(radii.conservative <= opts.lmi_region_halfwidth),
        )
    } else {
        (None, None, None)
    };
    let certificate = CertificateReport {
        alpha1: alpha1_local,
        alpha2_star: alpha2_star_local,
        feasible: search.verdict.feasible,
        margin: search.verdict.margin,
        trials_used: search.trials_used,
        sigma_min_p: search.verdict.p_min_eigenvalue,
        scaled_tau: search.best.tau / search.best.gamma1,
        scaled_gamma2: search.best.gamma2 / search.best.gamma1,
        scaled_sigma_min_p: search.verdict.p_min_eigenvalue / search.best.gamma1,
        candidate: search.best,
        radii,
        bound_holds,
        radius_within_region,
    };

    let last = traj.samples.last().expect("run_bounding_box checked samples");
    Ok(SeekingChecks {
        maximizer: [maximizer.x, maximizer.y],
        final_z_norm: last.z.map(|z| z.norm()).unwrap_or(f64::NAN),
        final_gradient_norm: field.grad(&last.x0).norm(),
        limsup_z,
        run_regularity,
        local_regularity,
        bounds,
        phi1_max_excess,
        phi1_bound_holds: phi1_max_excess <= 1e-9,
        phi2_star_max,
        phi2_star_bound_holds: phi2_star_max <= bounds.alpha2_star + 1e-9,
        phi3_rate_ok,
        residual_max,
        residual_ok: residual_max <= 1e-8,
        gradient_closure_max: closure_max,
        gradient_closure_ok: closure_max <= 1e-8,
        certificate,
    })
}

/// Runs every check on a recorded trajectory and assembles the report.
/// Fields without a maximizer get the formation and geometry sections only.
pub fn analyze_trajectory(
    field: &ScalarField,
    traj: &Trajectory,
    opts: &AnalysisOptions,
) -> Result<Report> {
    if traj.samples.is_empty() {
        return Err(Error::PreconditionFailed("trajectory has no samples".into()));
    }
    let delta1: Vec<(f64, f64)> =
        traj.samples.iter().map(|s| (s.t, s.delta1.norm())).collect();
    let delta2: Vec<(f64, f64)> =
        traj.samples.iter().map(|s| (s.t, s.delta2.norm())).collect();
    let formation_fit_1 = fit_formation_error(&delta1, traj.gains.k1, 0.01, 1e-6);
    let formation_fit_2 = fit_formation_error(&delta2, traj.gains.k2, 0.01, 1e-6);
    let geometry = geometry_checks(traj, traj.gains.min_formation_rate())?;
    let seeking = match field.maximizer() {
        Ok(_) => Some(seeking_checks(field, traj, opts)?),
        Err(Error::NoMaximizer) => None,
        Err(e) => return Err(e),
    };
    let last = traj.samples.last().expect("checked nonempty");
    Ok(Report {
        field: field.describe(),
        gains: traj.gains,
        formation: traj.formation,
        assumption2: traj.assumption2,
        samples: traj.samples.len(),
        duration: last.t,
        stopped_early: traj.stopped_early,
        formation_fit_1,
        formation_fit_2,
        geometry,
        seeking,
    })
}
