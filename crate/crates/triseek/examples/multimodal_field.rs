//! Seeking on a field with three peaks: a gradient climber has no global
//! guarantees here, but from a start in the right basin the team still
//! settles on the strongest mode. The run is long because the field is
//! nearly flat between peaks.

use nalgebra::Vector2;
use triseek::control::Gains;
use triseek::field::ScalarField;
use triseek::geometry::{FormationSpec, SwarmState};
use triseek::sim::{run, SimConfig};

fn main() -> triseek::Result<()> {
    let field = ScalarField::builtin("paper-multimodal").expect("built-in preset");
    let spec = FormationSpec::from_size_angle(0.2, 90.0)?;
    let gains = Gains::new(0.7, 0.05, 0.05)?;

    let x0 = Vector2::new(140.0, 140.0);
    let start = SwarmState::new(0.0, x0, x0 + 2.0 * spec.r1_star(), x0 + 2.0 * spec.r2_star())?;
    let config = SimConfig::new(0.05, 12_000.0, 100)?;

    let traj = run(&start, &field, &spec, &gains, &config)?;

    println!("{:>9}  {:>18}  {:>12}  {:>12}", "t [s]", "x0", "|grad f|", "f0");
    for sample in traj.samples.iter().step_by(300) {
        let grad = field.grad(&sample.x0).norm();
        println!(
            "{:9.0}  ({:7.2}, {:7.2})  {:12.4e}  {:12.6}",
            sample.t, sample.x0.x, sample.x0.y, grad, sample.f0
        );
    }

    let last = traj.samples.last().unwrap();
    let global_peak = field.maximizer()?;
    println!(
        "\nsettled at ({:.3}, {:.3}); the strongest peak sits at ({:.1}, {:.1})",
        last.x0.x, last.x0.y, global_peak.x, global_peak.y
    );
    println!(
        "final measured-gradient norm {:.3e}, true gradient norm {:.3e}",
        last.g.norm(),
        field.grad(&last.x0).norm()
    );
    Ok(())
}
