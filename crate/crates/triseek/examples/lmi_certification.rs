//! Searching for a quadratic stability certificate of the error dynamics
//! and turning it into a residual-ball radius for the seeking error.
//!
//! The certificate is a 12x12 linear matrix inequality in a structured P,
//! two multipliers, and two channel weights. Feasibility is decided by the
//! top eigenvalue, so any candidate can be checked independently of how the
//! search found it.

use triseek::analysis::{
    build_system_matrices, check_lmi, lmi_search, theorem_bound, LmiCandidate,
};
use triseek::control::Gains;
use triseek::field::{estimate_regularity, Rect, ScalarField};
use triseek::geometry::FormationSpec;
use triseek::linalg::Vec2;

fn main() -> triseek::Result<()> {
    let field = ScalarField::builtin("paper-gaussian").unwrap();
    let gains = Gains::new(0.7, 0.05, 0.05)?;
    let spec = FormationSpec::from_size_angle(0.4, 90.0)?;
    let sys = build_system_matrices(&field, &gains)?;

    // Constants certified over a 100 m square centered on the peak.
    let hw = 50.0;
    let region = Rect::new(sys.maximizer - Vec2::new(hw, hw), sys.maximizer + Vec2::new(hw, hw))?;
    let reg = estimate_regularity(&field, &region, 1.0)?;
    let alpha1 = 2.0 * reg.g_h * gains.k0;
    println!("curvature-variation gain bound alpha1 = {alpha1:.4e}");

    let lambda = 0.01;
    let search = lmi_search(&sys, alpha1, lambda, 10_000, 0)?;
    let cand = &search.best;
    println!(
        "search: feasible = {} after {} trials, margin {:.3e}",
        search.verdict.feasible, search.trials_used, search.verdict.margin
    );
    println!(
        "candidate: P = diag({:.3e}, {:.3e}, {:.3e}) x I2, tau = {:.3e}, gamma2 = {:.3e}",
        cand.p_diag[0], cand.p_diag[1], cand.p_diag[2], cand.tau, cand.gamma2
    );

    // The inequality is homogeneous: scaling every variable by c > 0 scales
    // the whole matrix, so feasibility cannot depend on the scale.
    let scaled = cand.scaled(100.0);
    let v = check_lmi(&sys, &scaled, alpha1)?;
    println!("candidate x 100 stays feasible: {} (margin {:.3e})", v.feasible, v.margin);

    let radii = theorem_bound(&sys, cand, alpha1, &spec, &gains, reg.m_h)?;
    println!(
        "residual ball: nominal {:.3} m, conservative {:.3} m",
        radii.nominal, radii.conservative
    );

    // Certificates are portable: write one down and anyone can re-check it.
    let manual = LmiCandidate::new(cand.p_diag, cand.tau, 1.0, cand.gamma2, lambda);
    let again = check_lmi(&sys, &manual, alpha1)?;
    println!("re-checked from scratch: feasible = {}", again.feasible);
    Ok(())
}
