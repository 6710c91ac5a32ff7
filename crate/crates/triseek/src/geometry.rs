//! Formation geometry: relative positions, the formation matrix, and the
//! initial-geometry admissibility test that keeps it invertible for all time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TimeTag};
use crate::linalg::{cross2, spectral_norm2, Mat2, Vec2};

/// Collinearity tolerance for the same-direction test: |sin| of the angle
/// between r1(0) and the desired r1 must not exceed this.
pub const SAME_DIRECTION_TOL: f64 = 1e-9;

/// Desired relative positions of the two follower agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    r1_star: Vec2,
    r2_star: Vec2,
}

impl FormationSpec {
    pub fn new(r1_star: Vec2, r2_star: Vec2) -> Result<Self> {
        if r1_star.norm() == 0.0 || r2_star.norm() == 0.0 {
            return Err(Error::InvalidArgument {
                arg: "formation",
                reason: "desired relative positions must be nonzero".to_string(),
            });
        }
        let spec = FormationSpec { r1_star, r2_star };
        if spec.rho_star() == 0.0 {
            return Err(Error::InvalidArgument {
                arg: "formation",
                reason: "desired relative positions must not be parallel".to_string(),
            });
        }
        Ok(spec)
    }

    /// Shorthand: r1 along +x with the given length, r2 rotated
    /// counterclockwise by `angle_deg`. Components smaller than 1e-12 of the
    /// size are snapped to zero so right angles stay exact.
    pub fn from_size_angle(size: f64, angle_deg: f64) -> Result<Self> {
        if !(size > 0.0) || !size.is_finite() {
            return Err(Error::InvalidArgument {
                arg: "formation.size",
                reason: format!("must be positive and finite, got {size}"),
            });
        }
        let rad = angle_deg.to_radians();
        let snap = |v: f64| if v.abs() < 1e-12 * size { 0.0 } else { v };
        FormationSpec::new(
            Vec2::new(size, 0.0),
            Vec2::new(snap(size * rad.cos()), snap(size * rad.sin())),
        )
    }

    pub fn r1_star(&self) -> Vec2 {
        self.r1_star
    }

    pub fn r2_star(&self) -> Vec2 {
        self.r2_star
    }

    /// Signed sine of the angle from r1* to r2*; nonzero by construction.
    pub fn rho_star(&self) -> f64 {
        cross2(&self.r1_star, &self.r2_star) / (self.r1_star.norm() * self.r2_star.norm())
    }

    pub fn matrix(&self) -> FormationMatrix {
        FormationMatrix::from_rows(&self.r1_star, &self.r2_star)
    }

    /// Inverse of the desired formation matrix (exists by construction).
    pub fn inverse(&self) -> Mat2 {
        self.matrix().invert(0.0).expect("spec invariant: desired matrix nonsingular")
    }

    /// Spectral norm of the desired-matrix inverse.
    pub fn inverse_norm(&self) -> f64 {
        spectral_norm2(&self.inverse())
    }

    /// ||r1*||^2 + ||r2*||^2, the squared-size sum in the curvature bounds.
    pub fn size_squared_sum(&self) -> f64 {
        self.r1_star.norm_squared() + self.r2_star.norm_squared()
    }
}

/// Positions of the three agents at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmState {
    pub t: f64,
    pub x0: Vec2,
    pub x1: Vec2,
    pub x2: Vec2,
}

impl SwarmState {
    pub fn new(t: f64, x0: Vec2, x1: Vec2, x2: Vec2) -> Result<Self> {
        let s = SwarmState { t, x0, x1, x2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.t.is_finite()
            && [self.x0, self.x1, self.x2].iter().all(|v| v.x.is_finite() && v.y.is_finite());
        if !finite {
            return Err(Error::InvalidArgument {
                arg: "state",
                reason: format!("non-finite coordinates at t = {}", self.t),
            });
        }
        Ok(())
    }
}

/// Relative positions of the followers with respect to the lead agent.
pub fn relative_positions(state: &SwarmState) -> (Vec2, Vec2) {
    (state.x1 - state.x0, state.x2 - state.x0)
}

/// sin of the counterclockwise angle from r1 to r2, via the planar cross
/// product. Errors on zero-length input.
pub fn signed_sine(r1: &Vec2, r2: &Vec2) -> Result<f64> {
    let (n1, n2) = (r1.norm(), r2.norm());
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::DegenerateFormation(
            "zero-length relative position in angle computation".to_string(),
        ));
    }
    Ok(cross2(r1, r2) / (n1 * n2))
}

/// The 2x2 matrix with rows r1^T, r2^T and its determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormationMatrix {
    m: Mat2,
    det: f64,
}

impl FormationMatrix {
    pub fn from_rows(r1: &Vec2, r2: &Vec2) -> Self {
        let m = Mat2::new(r1.x, r1.y, r2.x, r2.y);
        FormationMatrix { m, det: cross2(r1, r2) }
    }

    pub fn matrix(&self) -> Mat2 {
        self.m
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Adjugate-over-determinant inverse, refused when |det| < floor.
    pub fn invert(&self, floor: f64) -> Result<Mat2> {
        if !(floor >= 0.0) {
            return Err(Error::InvalidArgument {
                arg: "floor",
                reason: format!("must be nonnegative, got {floor}"),
            });
        }
        if self.det.abs() < floor.max(f64::MIN_POSITIVE) {
            return Err(Error::NearSingularFormation {
                t: TimeTag(None),
                det: self.det,
                floor,
            });
        }
        let adj = Mat2::new(self.m[(1, 1)], -self.m[(0, 1)], -self.m[(1, 0)], self.m[(0, 0)]);
        Ok(adj / self.det)
    }
}

/// Outcome of the initial-geometry admissibility test.
///
/// `same_direction`: r1(0) points along the desired r1. `same_half_plane`:
/// agent 2 starts on the same side of the line through x0(0), x1(0) as its
/// desired position, encoded as matching signs of the two signed sines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    pub same_direction: bool,
    pub same_half_plane: bool,
    pub rho0: f64,
    pub rho_star: f64,
}

impl Assumption2Report {
    pub fn passed(&self) -> bool {
        self.same_direction && self.same_half_plane
    }
}

/// Tests the initial geometry that guarantees the formation matrix stays
/// invertible along the whole trajectory.
pub fn check_assumption2(initial: &SwarmState, spec: &FormationSpec) -> Result<Assumption2Report> {
    initial.validate()?;
    let (r1, r2) = relative_positions(initial);
    if r1.norm() == 0.0 || r2.norm() == 0.0 || (initial.x1 - initial.x2).norm() == 0.0 {
        return Err(Error::DegenerateFormation("coincident agents at t = 0".to_string()));
    }
    let sine_to_desired = signed_sine(&r1, &spec.r1_star())?;
    let same_direction =
        sine_to_desired.abs() <= SAME_DIRECTION_TOL && r1.dot(&spec.r1_star()) > 0.0;
    let rho0 = signed_sine(&r1, &r2)?;
    let rho_star = spec.rho_star();
    let same_half_plane = rho0 != 0.0 && rho0.signum() == rho_star.signum();
    Ok(Assumption2Report { same_direction, same_half_plane, rho0, rho_star })
}

/// Multiplier in the determinant lower bound: with admissible initial
/// geometry, |det R(t)| >= min(|rho0|, |rho*|) ||r1(t)|| ||r2(t)|| for all t.
pub fn det_lower_bound(spec: &FormationSpec, initial: &SwarmState) -> Result<f64> {
    let report = check_assumption2(initial, spec)?;
    if !report.passed() {
        return Err(Error::PreconditionFailed(
            "determinant bound requires admissible initial geometry".to_string(),
        ));
    }
    Ok(report.rho0.abs().min(report.rho_star.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(x0: (f64, f64), x1: (f64, f64), x2: (f64, f64)) -> SwarmState {
        SwarmState {
            t: 0.0,
            x0: Vec2::new(x0.0, x0.1),
            x1: Vec2::new(x1.0, x1.1),
            x2: Vec2::new(x2.0, x2.1),
        }
    }

    #[test]
    fn relative_positions_are_differences() {
        let s = state((0.0, 0.0), (1.0, 0.0), (0.0, 1.0));
        let (r1, r2) = relative_positions(&s);
        assert_eq!(r1, Vec2::new(1.0, 0.0));
        assert_eq!(r2, Vec2::new(0.0, 1.0));

        let s = state((100.0, 100.0), (100.4, 100.0), (100.0, 100.4));
        let (r1, r2) = relative_positions(&s);
        assert!((r1 - Vec2::new(0.4, 0.0)).norm() < 1e-13);
        assert!((r2 - Vec2::new(0.0, 0.4)).norm() < 1e-13);
    }

    #[test]
    fn signed_sine_known_angles() {
        let e1 = Vec2::new(1.0, 0.0);
        assert_eq!(signed_sine(&e1, &Vec2::new(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(signed_sine(&e1, &Vec2::new(0.0, -1.0)).unwrap(), -1.0);
        let got = signed_sine(&e1, &Vec2::new(1.0, 1.0)).unwrap();
        assert!((got - 2.0_f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(signed_sine(&Vec2::zeros(), &e1).is_err());
    }

    #[test]
    fn invert_known_matrices() {
        let id = FormationMatrix::from_rows(&Vec2::new(1.0, 0.0), &Vec2::new(0.0, 1.0));
        assert_eq!(id.invert(0.0).unwrap(), Mat2::identity());

        let r = FormationMatrix::from_rows(&Vec2::new(0.4, 0.0), &Vec2::new(0.0, 0.4));
        let inv = r.invert(0.0).unwrap();
        assert!((inv - Mat2::new(2.5, 0.0, 0.0, 2.5)).norm() < 1e-14);

        let thin = FormationMatrix::from_rows(&Vec2::new(1.0, 0.0), &Vec2::new(1.0, 1e-9));
        match thin.invert(1e-6) {
            Err(Error::NearSingularFormation { det, floor, .. }) => {
                assert!((det - 1e-9).abs() < 1e-24);
                assert_eq!(floor, 1e-6);
            }
            other => panic!("expected near-singular error, got {other:?}"),
        }
    }

    #[test]
    fn admissibility_examples() {
        let spec =
            FormationSpec::new(Vec2::new(0.4, 0.0), Vec2::new(0.0, 0.4)).unwrap();

        // Same direction (twice as long), same half-plane.
        let ok = check_assumption2(&state((0.0, 0.0), (2.0, 0.0), (0.0, 1.0)), &spec).unwrap();
        assert!(ok.passed() && ok.same_direction && ok.same_half_plane);

        // Opposite direction.
        let bad_dir =
            check_assumption2(&state((0.0, 0.0), (-1.0, 0.0), (0.0, 1.0)), &spec).unwrap();
        assert!(!bad_dir.same_direction && !bad_dir.passed());

        // Opposite half-plane: signed sines -1 vs +1.
        let bad_side =
            check_assumption2(&state((0.0, 0.0), (1.0, 0.0), (0.0, -1.0)), &spec).unwrap();
        assert!(bad_side.same_direction && !bad_side.same_half_plane && !bad_side.passed());
        assert_eq!(bad_side.rho0, -1.0);
        assert_eq!(bad_side.rho_star, 1.0);

        assert!(matches!(
            check_assumption2(&state((0.0, 0.0), (0.0, 0.0), (0.0, 1.0)), &spec),
            Err(Error::DegenerateFormation(_))
        ));
    }

    #[test]
    fn det_bound_multiplier() {
        let spec = FormationSpec::new(Vec2::new(0.4, 0.0), Vec2::new(0.0, 0.4)).unwrap();
        let m =
            det_lower_bound(&spec, &state((0.0, 0.0), (2.0, 0.0), (0.0, 3.0))).unwrap();
        assert!((m - 1.0).abs() < 1e-15);

        // rho0 = sin 30 deg = 0.5, rho* = 0.8 -> min is 0.5.
        let spec = FormationSpec::new(
            Vec2::new(0.4, 0.0),
            Vec2::new(0.4 * 0.6, 0.4 * 0.8),
        )
        .unwrap();
        let th = 30.0_f64.to_radians();
        let m = det_lower_bound(
            &spec,
            &state((0.0, 0.0), (2.0, 0.0), (th.cos(), th.sin())),
        )
        .unwrap();
        assert!((m - 0.5).abs() < 1e-12);

        // Inadmissible start refuses the bound.
        let r = det_lower_bound(&spec, &state((0.0, 0.0), (2.0, 0.0), (0.5, -0.5)));
        assert!(matches!(r, Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn size_angle_shorthand() {
        let spec = FormationSpec::from_size_angle(0.4, 90.0).unwrap();
        assert_eq!(spec.r1_star(), Vec2::new(0.4, 0.0));
        assert_eq!(spec.r2_star(), Vec2::new(0.0, 0.4));
        assert_eq!(spec.rho_star(), 1.0);
        assert!((spec.inverse_norm() - 2.5).abs() < 1e-14);
        assert!((spec.size_squared_sum() - 0.32).abs() < 1e-15);

        assert!(FormationSpec::from_size_angle(0.0, 90.0).is_err());
        assert!(FormationSpec::from_size_angle(0.4, 180.0).is_err());
    }

    proptest! {
        #[test]
        fn signed_sine_is_antisymmetric_and_bounded(
            ax in -10.0..10.0f64, ay in -10.0..10.0f64,
            bx in -10.0..10.0f64, by in -10.0..10.0f64,
        ) {
            let a = Vec2::new(ax, ay);
            let b = Vec2::new(bx, by);
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let ab = signed_sine(&a, &b).unwrap();
            let ba = signed_sine(&b, &a).unwrap();
            prop_assert!((ab + ba).abs() < 1e-12);
            prop_assert!(ab.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn inverse_roundtrip_is_identity(
            r1x in -5.0..5.0f64, r1y in -5.0..5.0f64,
            r2x in -5.0..5.0f64, r2y in -5.0..5.0f64,
        ) {
            let r1 = Vec2::new(r1x, r1y);
            let r2 = Vec2::new(r2x, r2y);
            let fm = FormationMatrix::from_rows(&r1, &r2);
            prop_assume!(fm.det().abs() > 1e-3);
            let inv = fm.invert(1e-6).unwrap();
            let err = (fm.matrix() * inv - Mat2::identity()).norm();
            prop_assert!(err <= 1e-12 * (1.0 + inv.norm() * fm.matrix().norm()));
        }
    }
}
