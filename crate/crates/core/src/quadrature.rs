//! Quadrature on triangles (barycentric points, weights summing to one) and on facets.

/// A rule on the reference triangle. Weights are normalized to sum to 1, so
/// `|T| * sum_q w_q f(x_q)` approximates the integral over `T`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Twelve-point Dunavant rule, exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        let mut orbit3 = |w: f64, a: f64, b: f64| {
            for p in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push(p);
                weights.push(w);
            }
        };
        orbit3(0.116_786_275_726_379, 0.501_426_509_658_179, 0.249_286_745_170_910);
        orbit3(0.050_844_906_370_207, 0.873_821_971_016_996, 0.063_089_014_491_502);
        let (w, a, b, c) = (
            0.082_851_075_618_374,
            0.053_145_049_844_817,
            0.310_352_451_033_784,
            0.636_502_499_121_399,
        );
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            points.push(p);
            weights.push(w);
        }
        TriangleRule { points, weights }
    }

    /// Vertex rule; integrating P1 functions with it gives the lumped mass.
    pub fn vertex() -> Self {
        TriangleRule {
            points: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            weights: vec![1.0 / 3.0; 3],
        }
    }
}

/// Three-point Gauss–Legendre rule on `[0, 1]`, exact for degree 5.
/// Returns `(s, w)` pairs with weights summing to one.
pub fn gauss3_unit() -> [(f64, f64); 3] {
    let r = (0.6f64).sqrt() / 2.0;
    [(0.5 - r, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + r, 5.0 / 18.0)]
}
