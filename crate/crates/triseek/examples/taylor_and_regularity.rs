//! Estimating the field regularity constants on a region and then auditing
//! them against randomized second-order Taylor remainders.

use triseek::analysis::taylor_checks;
use triseek::field::{estimate_regularity, Rect, ScalarField};
use triseek::linalg::Vec2;

fn main() -> triseek::Result<()> {
    let region = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(200.0, 200.0))?;

    for name in ["paper-gaussian", "paper-multimodal"] {
        let field = ScalarField::builtin(name).unwrap();
        let reg = estimate_regularity(&field, &region, 1.0)?;
        println!("{name} over [0, 200]^2:");
        println!("  max Hessian norm        M_H = {:.6e}", reg.m_h);
        println!("  Hessian Lipschitz bound L_H = {:.6e}", reg.l_h);
        println!("  Hessian variation       G_H = {:.6e}", reg.g_h);

        // Remainder audit: |f(y) - f(x) - grad f(x)'d - d'Hd/2| must stay
        // within (M_H/2)|d|^2 resp. M_H |d| for the gradient, for random
        // pairs across the whole region. Ratios at or below 1 pass.
        let audit = taylor_checks(&field, &region, 10_000, 7)?;
        println!(
            "  remainder audit on {} pairs: worst value ratio {:.4}, worst gradient ratio {:.4} -> {}",
            audit.pairs,
            audit.worst_value_ratio,
            audit.worst_gradient_ratio,
            if audit.passed { "pass" } else { "FAIL" }
        );

        // The constants shrink drastically on a small box around the peak,
        // which is what makes local certification tractable.
        let peak = field.maximizer()?;
        let local = Rect::new(peak - Vec2::new(5.0, 5.0), peak + Vec2::new(5.0, 5.0))?;
        let tight = estimate_regularity(&field, &local, 0.2)?;
        println!("  on the peak +/- 5 m box: G_H = {:.6e}\n", tight.g_h);
    }
    Ok(())
}
