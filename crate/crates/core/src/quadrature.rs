//! Gauss–Legendre rules on the unit interval and the unit square.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Rule with `n` points, exact for polynomials of degree `2n − 1`.
    pub fn gauss(n: usize) -> Self {
        let n = NonZeroUsize::new(n).expect("quadrature needs at least one point");
        let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(n)
            .iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, weights) = pairs.into_iter().unzip();
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn order(&self) -> usize {
        2 * self.len() - 1
    }
}

/// Tensor-product rule on the unit square together with the matching face
/// rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub line: Rule1d,
    /// Reference points `(x̂, ŷ)`, x̂ running fastest.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Smallest Gauss rule exact to at least `order` in each variable.
    pub fn with_order(order: usize) -> Self {
        Self::tensor(order / 2 + 1)
    }

    pub fn tensor(n: usize) -> Self {
        let line = Rule1d::gauss(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&y, &wy) in line.points.iter().zip(&line.weights) {
            for (&x, &wx) in line.points.iter().zip(&line.weights) {
                points.push([x, y]);
                weights.push(wx * wy);
            }
        }
        Self {
            line,
            points,
            weights,
        }
    }

    /// Rule used by the bilinear forms for degree `k`: order `2k + 3`.
    pub fn for_degree(k: usize) -> Self {
        Self::with_order(2 * k + 3)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn order(&self) -> usize {
        self.line.order()
    }
}
