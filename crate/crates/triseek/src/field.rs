//! Scalar field models with analytic first and second derivatives.
//!
//! The seeking loop only ever samples field *values*; the analytic
//! derivatives exist so the certification layer can form Taylor remainders
//! and curvature bounds independently of the controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eig2, sym_norm2, Mat2, Vec2};

/// Reserved preset id for the isotropic kilo-scale Gaussian benchmark.
pub const PRESET_GAUSSIAN: &str = "paper-gaussian";
/// Reserved preset id for the three-component anisotropic Gaussian benchmark.
pub const PRESET_MULTIMODAL: &str = "paper-multimodal";

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        if !(max.x > min.x && max.y > min.y) {
            return Err(Error::InvalidArgument {
                arg: "region",
                reason: format!(
                    "degenerate rectangle [{}, {}] x [{}, {}]",
                    min.x, max.x, min.y, max.y
                ),
            });
        }
        Ok(Rect { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Grows the rectangle by `fraction` of its span on every side.
    pub fn padded(&self, fraction: f64) -> Rect {
        let dx = self.width() * fraction;
        let dy = self.height() * fraction;
        Rect {
            min: Vec2::new(self.min.x - dx, self.min.y - dy),
            max: Vec2::new(self.max.x + dx, self.max.y + dy),
        }
    }

    /// Smallest rectangle containing all points; degenerate spans are
    /// widened to a minimal positive extent so the result is a valid region.
    pub fn bounding(points: impl IntoIterator<Item = Vec2>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut min, mut max) = (first, first);
        for p in it {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            if *hi - *lo < 1e-6 {
                *lo -= 0.5;
                *hi += 0.5;
            }
        };
        pad(&mut min.x, &mut max.x);
        pad(&mut min.y, &mut max.y);
        Some(Rect { min, max })
    }
}

/// One Gaussian component A * exp(-(x-c)^T S (x-c)) with symmetric PSD shape S.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: Vec2,
    pub shape: Mat2,
}

impl GaussianBump {
    pub fn new(amplitude: f64, center: Vec2, shape: Mat2) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument {
                arg: "amplitude",
                reason: format!("must be positive and finite, got {amplitude}"),
            });
        }
        if (shape[(0, 1)] - shape[(1, 0)]).abs() > 1e-12 * sym_norm2(&shape).max(1.0) {
            return Err(Error::InvalidArgument {
                arg: "shape",
                reason: "exponent matrix must be symmetric".to_string(),
            });
        }
        let (lo, _) = sym_eig2(&shape);
        if lo < 0.0 {
            return Err(Error::InvalidArgument {
                arg: "shape",
                reason: "exponent matrix must be positive semidefinite".to_string(),
            });
        }
        Ok(GaussianBump { amplitude, center, shape })
    }

    /// Axis-aligned component exp(-(x-cx)^2/wx - (y-cy)^2/wy), scaled.
    pub fn axis_aligned(amplitude: f64, center: Vec2, widths: [f64; 2]) -> Result<Self> {
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument {
                arg: "widths",
                reason: format!("divisors must be positive, got {widths:?}"),
            });
        }
        GaussianBump::new(
            amplitude,
            center,
            Mat2::new(1.0 / widths[0], 0.0, 0.0, 1.0 / widths[1]),
        )
    }

    fn eval(&self, x: &Vec2) -> f64 {
        let d = x - self.center;
        self.amplitude * (-(d.dot(&(self.shape * d)))).exp()
    }

    fn grad(&self, x: &Vec2) -> Vec2 {
        let d = x - self.center;
        -2.0 * self.eval(x) * (self.shape * d)
    }

    fn hessian(&self, x: &Vec2) -> Mat2 {
        let d = x - self.center;
        let sd = self.shape * d;
        self.eval(x) * (4.0 * sd * sd.transpose() - 2.0 * self.shape)
    }
}

/// The field kinds understood by the simulator and the certification layer.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Gaussian(GaussianBump),
    SumOfGaussians(Vec<GaussianBump>),
    Affine { slope: Vec2, offset: f64 },
    Quadratic { curvature: Mat2, center: Vec2, offset: f64 },
}

impl ScalarField {
    pub fn affine(slope: Vec2, offset: f64) -> Self {
        ScalarField::Affine { slope, offset }
    }

    /// Quadratic f(x) = offset + (x-c)^T Q (x-c) / 2, so the Hessian is Q.
    pub fn quadratic(curvature: Mat2, center: Vec2, offset: f64) -> Result<Self> {
        if (curvature[(0, 1)] - curvature[(1, 0)]).abs() > 1e-12 * sym_norm2(&curvature).max(1.0) {
            return Err(Error::InvalidArgument {
                arg: "curvature",
                reason: "coefficient matrix must be symmetric".to_string(),
            });
        }
        Ok(ScalarField::Quadratic { curvature, center, offset })
    }

    pub fn sum_of_gaussians(components: Vec<GaussianBump>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument {
                arg: "components",
                reason: "sum needs at least one component".to_string(),
            });
        }
        Ok(ScalarField::SumOfGaussians(components))
    }

    /// Built-in benchmark fields, by reserved preset id.
    pub fn builtin(name: &str) -> Option<ScalarField> {
        match name {
            PRESET_GAUSSIAN => Some(ScalarField::Gaussian(
                GaussianBump::axis_aligned(1000.0, Vec2::new(100.0, 100.0), [70_000.0, 70_000.0])
                    .expect("static preset is valid"),
            )),
            PRESET_MULTIMODAL => {
                let c = Vec2::new(100.0, 100.0);
                // Diagonal ridge: exponent (dx+dy)^2/707 + (dy-dx)^2/143
                // expands to the symmetric matrix below.
                let a = 1.0 / 707.0;
                let b = 1.0 / 143.0;
                let ridge = Mat2::new(a + b, a - b, a - b, a + b);
                let comps = vec![
                    GaussianBump::axis_aligned(1.0, c, [10_000.0, 10_000.0]).unwrap(),
                    GaussianBump::new(1.0, c, ridge).unwrap(),
                    GaussianBump::axis_aligned(1.0, c, [1_000.0, 50.0]).unwrap(),
                ];
                Some(ScalarField::SumOfGaussians(comps))
            }
            _ => None,
        }
    }

    /// Short label for reports.
    pub fn describe(&self) -> String {
        match self {
            ScalarField::Gaussian(_) => "gaussian".to_string(),
            ScalarField::SumOfGaussians(c) => format!("sum_of_gaussians({})", c.len()),
            ScalarField::Affine { .. } => "affine".to_string(),
            ScalarField::Quadratic { .. } => "quadratic".to_string(),
        }
    }

    pub fn eval(&self, x: &Vec2) -> f64 {
        match self {
            ScalarField::Gaussian(g) => g.eval(x),
            ScalarField::SumOfGaussians(cs) => cs.iter().map(|g| g.eval(x)).sum(),
            ScalarField::Affine { slope, offset } => slope.dot(x) + offset,
            ScalarField::Quadratic { curvature, center, offset } => {
                let d = x - center;
                offset + 0.5 * d.dot(&(curvature * d))
            }
        }
    }

    pub fn grad(&self, x: &Vec2) -> Vec2 {
        match self {
            ScalarField::Gaussian(g) => g.grad(x),
            ScalarField::SumOfGaussians(cs) => {
                cs.iter().map(|g| g.grad(x)).fold(Vec2::zeros(), |a, v| a + v)
            }
            ScalarField::Affine { slope, .. } => *slope,
            ScalarField::Quadratic { curvature, center, .. } => curvature * (x - center),
        }
    }

    pub fn hessian(&self, x: &Vec2) -> Mat2 {
        match self {
            ScalarField::Gaussian(g) => g.hessian(x),
            ScalarField::SumOfGaussians(cs) => {
                cs.iter().map(|g| g.hessian(x)).fold(Mat2::zeros(), |a, m| a + m)
            }
            ScalarField::Affine { .. } => Mat2::zeros(),
            ScalarField::Quadratic { curvature, .. } => *curvature,
        }
    }

    /// Location of the field maximum.
    ///
    /// Analytic center for single-Gaussian and quadratic fields; for Gaussian
    /// sums, a coarse grid scan followed by damped Newton ascent, accepted
    /// only once the gradient norm is below 1e-9.
    pub fn maximizer(&self) -> Result<Vec2> {
        match self {
            ScalarField::Gaussian(g) => Ok(g.center),
            ScalarField::Quadratic { center, .. } => Ok(*center),
            ScalarField::Affine { .. } => Err(Error::NoMaximizer),
            ScalarField::SumOfGaussians(cs) => self.ascend_from_grid(cs),
        }
    }

    fn ascend_from_grid(&self, comps: &[GaussianBump]) -> Result<Vec2> {
        // Scan a box covering every component out to where it has decayed
        // to ~e^-9 of its peak, then polish the best node.
        let mut region: Option<Rect> = None;
        for g in comps {
            let (lo, _) = sym_eig2(&g.shape);
            let extent = if lo > 0.0 { 3.0 / lo.sqrt() } else { 1.0 };
            let r = Rect {
                min: g.center - Vec2::new(extent, extent),
                max: g.center + Vec2::new(extent, extent),
            };
            region = Some(match region {
                None => r,
                Some(acc) => Rect {
                    min: Vec2::new(acc.min.x.min(r.min.x), acc.min.y.min(r.min.y)),
                    max: Vec2::new(acc.max.x.max(r.max.x), acc.max.y.max(r.max.y)),
                },
            });
        }
        let region = region.expect("constructor guarantees at least one component");
        let n = 128;
        let mut best = region.min;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let p = Vec2::new(
                    region.min.x + region.width() * i as f64 / n as f64,
                    region.min.y + region.height() * j as f64 / n as f64,
                );
                let v = self.eval(&p);
                if v > best_val {
                    best_val = v;
                    best = p;
                }
            }
        }

        let mut x = best;
        for _ in 0..200 {
            let g = self.grad(&x);
            if g.norm() <= 1e-11 {
                break;
            }
            let h = self.hessian(&x);
            let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
            let (_, hi) = sym_eig2(&h);
            let newton_ok = hi < 0.0 && det.abs() > 1e-300;
            let step = if newton_ok {
                // Solve H s = -g by the 2x2 adjugate.
                let inv = Mat2::new(h[(1, 1)], -h[(0, 1)], -h[(1, 0)], h[(0, 0)]) / det;
                -(inv * g)
            } else {
                g.normalize() * region.width().max(region.height()) * 1e-3
            };
            // Backtrack until the gradient norm decreases.
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = x + scale * step;
                if self.grad(&trial).norm() < g.norm() {
                    x = trial;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let gnorm = self.grad(&x).norm();
        if gnorm > 1e-9 {
            return Err(Error::NonConvergence { what: "maximizer ascent", iterations: 200 });
        }
        Ok(x)
    }
}

/// Curvature bounds estimated on a region.
///
/// `m_h` bounds the Hessian spectral norm, `l_h` its Lipschitz constant, and
/// `g_h` the largest Hessian variation between two points of the region
/// (capped at 2 m_h, which it can never exceed). All three are grid
/// estimates, valid on `region` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    pub m_h: f64,
    pub l_h: f64,
    pub g_h: f64,
    pub region: Rect,
}

impl RegularityConstants {
    pub fn new(m_h: f64, l_h: f64, g_h: f64, region: Rect) -> Result<Self> {
        for (name, v) in [("m_h", m_h), ("l_h", l_h), ("g_h", g_h)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument {
                    arg: "regularity",
                    reason: format!("{name} must be finite and nonnegative, got {v}"),
                });
            }
        }
        if g_h > 2.0 * m_h + 1e-12 {
            return Err(Error::InvalidArgument {
                arg: "regularity",
                reason: format!("g_h = {g_h} exceeds 2 m_h = {}", 2.0 * m_h),
            });
        }
        Ok(RegularityConstants { m_h, l_h, g_h, region })
    }
}

/// Number of subgrid nodes per axis used for the pairwise `g_h` scan.
const PAIR_SCAN_NODES: usize = 32;

/// Estimates curvature bounds for `field` over `region` with the given grid
/// resolution.
///
/// `m_h` is the max Hessian norm over the grid; `l_h` the max difference
/// quotient between right/up/diagonal neighbors; `g_h` the max pairwise
/// Hessian distance over a coarse deterministic subgrid, capped at 2 m_h.
pub fn estimate_regularity(
    field: &ScalarField,
    region: &Rect,
    grid_step: f64,
) -> Result<RegularityConstants> {
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::InvalidArgument {
            arg: "grid_step",
            reason: format!("must be positive and finite, got {grid_step}"),
        });
    }
    Rect::new(region.min, region.max)?;

    let nx = (region.width() / grid_step).ceil().max(1.0) as usize;
    let ny = (region.height() / grid_step).ceil().max(1.0) as usize;
    let dx = region.width() / nx as f64;
    let dy = region.height() / ny as f64;

    let node = |i: usize, j: usize| {
        Vec2::new(region.min.x + dx * i as f64, region.min.y + dy * j as f64)
    };

    let mut hess = vec![Mat2::zeros(); (nx + 1) * (ny + 1)];
    let idx = |i: usize, j: usize| i * (ny + 1) + j;
    let mut m_h = 0.0_f64;
    for i in 0..=nx {
        for j in 0..=ny {
            let h = field.hessian(&node(i, j));
            m_h = m_h.max(sym_norm2(&h));
            hess[idx(i, j)] = h;
        }
    }

    let mut l_h = 0.0_f64;
    let diag = f64::hypot(dx, dy);
    for i in 0..=nx {
        for j in 0..=ny {
            let h0 = &hess[idx(i, j)];
            if i < nx {
                l_h = l_h.max(sym_norm2(&(hess[idx(i + 1, j)] - h0)) / dx);
            }
            if j < ny {
                l_h = l_h.max(sym_norm2(&(hess[idx(i, j + 1)] - h0)) / dy);
            }
            if i < nx && j < ny {
                l_h = l_h.max(sym_norm2(&(hess[idx(i + 1, j + 1)] - h0)) / diag);
            }
        }
    }

    let sx = (nx / (PAIR_SCAN_NODES - 1).min(nx)).max(1);
    let sy = (ny / (PAIR_SCAN_NODES - 1).min(ny)).max(1);
    let mut sample = Vec::new();
    for i in (0..=nx).step_by(sx) {
        for j in (0..=ny).step_by(sy) {
            sample.push(hess[idx(i, j)]);
        }
    }
    let mut g_h = 0.0_f64;
    for a in 0..sample.len() {
        for b in (a + 1)..sample.len() {
            g_h = g_h.max(sym_norm2(&(sample[a] - sample[b])));
        }
    }
    g_h = g_h.min(2.0 * m_h);

    RegularityConstants::new(m_h, l_h, g_h, *region)
}
