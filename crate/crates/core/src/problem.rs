//! Initial and boundary data of the two benchmarks.

use std::f64::consts::{FRAC_PI_2, LN_2};

use crate::mesh::Point;
use crate::vec3::{self, Vec3};

pub type Field3 = Box<dyn Fn(Point) -> Vec3 + Send + Sync>;
pub type Field2 = Box<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Initial velocity, initial director and (time-independent) Dirichlet data
/// for the director. `laplacian` is the pointwise Laplacian of `initial`,
/// needed only by the analytic lift.
pub struct ProblemData {
    pub velocity: Field2,
    pub initial: Field3,
    pub boundary: Field3,
    pub laplacian: Option<Field3>,
}

impl ProblemData {
    /// Same field for initial and boundary data, zero initial velocity.
    pub fn from_director(d0: impl Fn(Point) -> Vec3 + Send + Sync + Clone + 'static) -> Self {
        ProblemData {
            velocity: Box::new(|_| [0.0; 2]),
            initial: Box::new(d0.clone()),
            boundary: Box::new(d0),
            laplacian: None,
        }
    }

    pub fn with_laplacian(mut self, lap: impl Fn(Point) -> Vec3 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Box::new(lap));
        self
    }
}

/// Radius separating the inner from the outer annulus boundary.
const SPIRAL_SPLIT: f64 = 1.5;

pub fn radial(x: Point) -> Vec3 {
    let r = x[0].hypot(x[1]);
    [x[0] / r, x[1] / r, 0.0]
}

/// Radial on the inner circle, tangential `(x2, -x1)/|x|` on the outer one.
pub fn spiral_boundary(x: Point) -> Vec3 {
    let r = x[0].hypot(x[1]);
    if r < SPIRAL_SPLIT {
        radial(x)
    } else {
        [x[1] / r, -x[0] / r, 0.0]
    }
}

/// Angle of the stationary spiral against the radial direction,
/// positive toward `(x2, -x1)/|x|`.
pub fn spiral_angle(x: Point) -> f64 {
    FRAC_PI_2 * x[0].hypot(x[1]).ln() / LN_2
}

pub fn spiral_exact(x: Point) -> Vec3 {
    let r = x[0].hypot(x[1]);
    let (s, c) = spiral_angle(x).sin_cos();
    let (er, et) = ([x[0] / r, x[1] / r], [x[1] / r, -x[0] / r]);
    [c * er[0] + s * et[0], c * er[1] + s * et[1], 0.0]
}

/// Annulus benchmark: zero velocity, radial initial director.
pub fn spiral_problem() -> ProblemData {
    ProblemData {
        velocity: Box::new(|_| [0.0; 2]),
        initial: Box::new(radial),
        boundary: Box::new(spiral_boundary),
        laplacian: None,
    }
}

/// Two point defects at `(+-0.25, 0)` on the unit square, with the director
/// set to `e_3` within distance `radius` of each.
pub fn defects_initial(radius: f64) -> impl Fn(Point) -> Vec3 + Send + Sync + Clone + 'static {
    move |x: Point| {
        let near = |c: f64| (x[0] - c).hypot(x[1]) < radius;
        if near(0.25) || near(-0.25) {
            return [0.0, 0.0, 1.0];
        }
        let d = [4.0 * x[0] * x[0] + 4.0 * x[1] * x[1] - 0.25, 2.0 * x[1], 0.0];
        let n = vec3::norm(d);
        if n == 0.0 {
            [0.0, 0.0, 1.0]
        } else {
            vec3::scale(1.0 / n, d)
        }
    }
}

pub fn defects_problem(radius: f64) -> ProblemData {
    ProblemData::from_director(defects_initial(radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_endpoints() {
        assert_eq!(spiral_angle([1.0, 0.0]), 0.0);
        assert!((spiral_angle([0.0, 2.0]) - FRAC_PI_2).abs() < 1e-15);
        let x = [0.6, 0.8];
        assert!(vec3::norm(vec3::sub(spiral_exact(x), radial(x))) < 1e-15);
        let y = [1.2, -1.6];
        assert!(vec3::norm(vec3::sub(spiral_exact(y), spiral_boundary(y))) < 1e-15);
        assert_eq!(spiral_boundary(x), radial(x));
    }

    #[test]
    fn defects_unit_norm() {
        let f = defects_initial(0.05);
        assert_eq!(f([0.25, 0.01]), [0.0, 0.0, 1.0]);
        assert_eq!(f([-0.26, 0.0]), [0.0, 0.0, 1.0]);
        for x in [[0.0, 0.0], [0.4, -0.3], [0.1, 0.2]] {
            assert!((vec3::norm(f(x)) - 1.0).abs() < 1e-15);
        }
    }
}
