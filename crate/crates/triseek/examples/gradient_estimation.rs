//! What the three-point gradient estimate can and cannot see. On an affine
//! field the estimate is exact to rounding for any non-degenerate triangle.
//! On a curved field it picks up a second-order error with a closed form
//! that the analysis layer computes by quadrature.

use nalgebra::{Matrix2, Vector2};
use triseek::analysis::{compute_phi_terms, AnalysisOptions};
use triseek::control::{estimate_gradient, Gains};
use triseek::field::ScalarField;
use triseek::geometry::{FormationSpec, SwarmState};
use triseek::sim::{run, SimConfig};

fn sample_on(field: &ScalarField, state: &SwarmState) -> (f64, f64, f64) {
    (field.eval(&state.x0), field.eval(&state.x1), field.eval(&state.x2))
}

fn main() -> triseek::Result<()> {
    let affine = ScalarField::affine(Vector2::new(0.3, -1.7), 12.0);
    let x0 = Vector2::new(52.0, -18.0);
    let skewed = SwarmState::new(
        0.0,
        x0,
        x0 + Vector2::new(3.1, 0.2),
        x0 + Vector2::new(-0.4, 2.6),
    )?;
    let (f0, f1, f2) = sample_on(&affine, &skewed);
    let g = estimate_gradient(&skewed, f0, f1, f2, 1e-12)?;
    println!("affine field, slope (0.3, -1.7):");
    println!("  estimate ({:+.16}, {:+.16})", g.x, g.y);
    println!("  error    {:.3e}\n", (g - Vector2::new(0.3, -1.7)).norm());

    // A quadratic bowl bends the estimate away from the true gradient. The
    // curvature correction is K0 * R^{-1} * (r_i' Q r_i / 2); the analysis
    // layer evaluates it by integral quadrature, so comparing the two is a
    // real cross-check, not the same formula twice.
    let curvature = Matrix2::new(-0.08, 0.01, 0.01, -0.05);
    let bowl = ScalarField::quadratic(curvature, Vector2::new(0.0, 0.0), 0.0)?;
    let spec = FormationSpec::from_size_angle(0.4, 90.0)?;
    let gains = Gains::new(0.7, 0.05, 0.05)?;
    let y0 = Vector2::new(14.0, -3.0);
    let start = SwarmState::new(0.0, y0, y0 + spec.r1_star(), y0 + spec.r2_star())?;
    let mut config = SimConfig::new(0.05, 0.05, 1)?;
    config.singularity_floor = Some(1e-12);
    let snap = run(&start, &bowl, &spec, &gains, &config)?.samples[0];

    let k0_true = gains.k0 * bowl.grad(&y0);
    let k0_est = gains.k0 * snap.g;
    let phi = compute_phi_terms(&snap, &bowl, &spec, &gains, AnalysisOptions::default().quadrature_order)?;
    println!("quadratic bowl at ({}, {}):", y0.x, y0.y);
    println!("  K0 * true gradient      ({:+.12}, {:+.12})", k0_true.x, k0_true.y);
    println!("  K0 * estimate           ({:+.12}, {:+.12})", k0_est.x, k0_est.y);
    println!("  curvature correction    ({:+.12}, {:+.12})", phi.phi2.x, phi.phi2.y);
    let closure = (k0_est - k0_true - phi.phi2).norm();
    println!("  estimate - gradient - correction = {closure:.3e}");
    Ok(())
}
