//! Small fixed-size vector helpers for director values.

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// `(|d|^2 I - d d^T) x`, which equals `-(d x (d x x))`.
#[inline]
pub fn tangential(d: Vec3, x: Vec3) -> Vec3 {
    let dd = dot(d, d);
    let dx = dot(d, x);
    [dd * x[0] - dx * d[0], dd * x[1] - dx * d[1], dd * x[2] - dx * d[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng) -> Vec3 {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    }

    #[test]
    fn triple_product_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, b, c) = (random(&mut rng), random(&mut rng), random(&mut rng));
            // (a x b) . c = a . (b x c) = -b . (a x c)
            let lhs = dot(cross(a, b), c);
            assert!((lhs - dot(a, cross(b, c))).abs() < 1e-14);
            assert!((lhs + dot(b, cross(a, c))).abs() < 1e-14);
            let t = tangential(a, b);
            let dd = cross(a, cross(a, b));
            for m in 0..3 {
                assert!((t[m] + dd[m]).abs() < 1e-14);
            }
        }
    }
}
