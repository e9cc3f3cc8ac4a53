//! Reference elements on the unit square.
//!
//! `RT_k` is spanned by `Q_{k+1,k} × Q_{k,k+1}`. Each component is a tensor
//! product of Lagrange polynomials: along its own direction the nodes are
//! `0`, the `k` interior Gauss points and `1`; across it the nodes are the
//! `k + 1` Gauss points. Degrees of freedom are point values of one velocity
//! component, so the ones sitting on `x̂ ∈ {0, 1}` (resp. `ŷ`) are normal
//! traces and are shared between neighbouring cells.
//!
//! `DQ_k` uses the `(k + 1)²` Gauss points as Lagrange nodes.

use crate::mesh::Side;
use crate::quadrature::Rule1d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    RaviartThomas,
    DiscontinuousQ,
}

/// Lagrange basis on a fixed set of distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagrange1d {
    nodes: Vec<f64>,
    scale: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(nodes: Vec<f64>) -> Self {
        let scale = (0..nodes.len())
            .map(|i| {
                let d: f64 = (0..nodes.len())
                    .filter(|&l| l != i)
                    .map(|l| nodes[i] - nodes[l])
                    .product();
                1.0 / d
            })
            .collect();
        Self { nodes, scale }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        let p: f64 = (0..self.len())
            .filter(|&l| l != i)
            .map(|l| x - self.nodes[l])
            .product();
        p * self.scale[i]
    }

    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let n = self.len();
        let mut sum = 0.0;
        for m in (0..n).filter(|&m| m != i) {
            let p: f64 = (0..n)
                .filter(|&l| l != i && l != m)
                .map(|l| x - self.nodes[l])
                .product();
            sum += p;
        }
        sum * self.scale[i]
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, x)).collect()
    }

    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.derivative(i, x)).collect()
    }
}

/// Where a local RT degree of freedom lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalDof {
    /// `index`-th normal-trace value on a cell side.
    Face { side: Side, index: usize },
    /// `index`-th cell-interior value.
    Interior { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    family: Family,
    degree: usize,
    /// `k + 1` Gauss nodes.
    gauss: Lagrange1d,
    /// `k + 2` nodes including both end points (RT only).
    closed: Lagrange1d,
}

/// Value and reference gradient of every RT shape function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorShapes {
    pub values: Vec<[f64; 2]>,
    /// `grad[i][c][d] = ∂_d v_c` on the reference square.
    pub grads: Vec<[[f64; 2]; 2]>,
}

impl ReferenceElement {
    pub fn new(family: Family, degree: usize) -> Self {
        let gauss = Lagrange1d::new(Rule1d::gauss(degree + 1).points);
        let closed = match family {
            Family::RaviartThomas => {
                let mut nodes = vec![0.0];
                if degree > 0 {
                    nodes.extend(Rule1d::gauss(degree).points);
                }
                nodes.push(1.0);
                Lagrange1d::new(nodes)
            }
            Family::DiscontinuousQ => Lagrange1d::new(Vec::new()),
        };
        Self {
            family,
            degree,
            gauss,
            closed,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dofs_per_cell(&self) -> usize {
        let k = self.degree;
        match self.family {
            Family::RaviartThomas => 2 * (k + 1) * (k + 2),
            Family::DiscontinuousQ => (k + 1) * (k + 1),
        }
    }

    pub fn dofs_per_face(&self) -> usize {
        match self.family {
            Family::RaviartThomas => self.degree + 1,
            Family::DiscontinuousQ => 0,
        }
    }

    pub fn interior_dofs(&self) -> usize {
        self.dofs_per_cell() - 4 * self.dofs_per_face()
    }

    /// Offset of the `y`-component block in the local RT numbering.
    fn y_block(&self) -> usize {
        (self.degree + 1) * (self.degree + 2)
    }

    /// Classification of each local RT shape function.
    pub fn local_dofs(&self) -> Vec<LocalDof> {
        assert_eq!(self.family, Family::RaviartThomas);
        let k = self.degree;
        let mut dofs = Vec::with_capacity(self.dofs_per_cell());
        // x-component: i along x (closed nodes), j along y (Gauss nodes)
        for i in 0..k + 2 {
            for j in 0..k + 1 {
                dofs.push(match i {
                    0 => LocalDof::Face {
                        side: Side::Left,
                        index: j,
                    },
                    i if i == k + 1 => LocalDof::Face {
                        side: Side::Right,
                        index: j,
                    },
                    i => LocalDof::Interior {
                        index: (i - 1) * (k + 1) + j,
                    },
                });
            }
        }
        // y-component: j along y (closed nodes), i along x (Gauss nodes)
        for j in 0..k + 2 {
            for i in 0..k + 1 {
                dofs.push(match j {
                    0 => LocalDof::Face {
                        side: Side::Bottom,
                        index: i,
                    },
                    j if j == k + 1 => LocalDof::Face {
                        side: Side::Top,
                        index: i,
                    },
                    j => LocalDof::Interior {
                        index: k * (k + 1) + (j - 1) * (k + 1) + i,
                    },
                });
            }
        }
        dofs
    }

    /// Reference location and component of each local RT degree of freedom.
    pub fn rt_nodes(&self) -> Vec<([f64; 2], usize)> {
        let k = self.degree;
        let mut nodes = Vec::with_capacity(self.dofs_per_cell());
        for i in 0..k + 2 {
            for j in 0..k + 1 {
                nodes.push(([self.closed.nodes[i], self.gauss.nodes[j]], 0));
            }
        }
        for j in 0..k + 2 {
            for i in 0..k + 1 {
                nodes.push(([self.gauss.nodes[i], self.closed.nodes[j]], 1));
            }
        }
        nodes
    }

    /// Reference Lagrange nodes of the DQ shape functions.
    pub fn dq_nodes(&self) -> Vec<[f64; 2]> {
        let g = &self.gauss.nodes;
        let mut nodes = Vec::with_capacity(g.len() * g.len());
        for &y in g {
            for &x in g {
                nodes.push([x, y]);
            }
        }
        nodes
    }

    pub fn eval_vector(&self, p: [f64; 2]) -> VectorShapes {
        assert_eq!(self.family, Family::RaviartThomas);
        let k = self.degree;
        let (cx, cy) = (self.closed.values(p[0]), self.closed.values(p[1]));
        let (dcx, dcy) = (self.closed.derivatives(p[0]), self.closed.derivatives(p[1]));
        let (gx, gy) = (self.gauss.values(p[0]), self.gauss.values(p[1]));
        let (dgx, dgy) = (self.gauss.derivatives(p[0]), self.gauss.derivatives(p[1]));

        let n = self.dofs_per_cell();
        let mut values = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for i in 0..k + 2 {
            for j in 0..k + 1 {
                values.push([cx[i] * gy[j], 0.0]);
                grads.push([[dcx[i] * gy[j], cx[i] * dgy[j]], [0.0, 0.0]]);
            }
        }
        for j in 0..k + 2 {
            for i in 0..k + 1 {
                values.push([0.0, gx[i] * cy[j]]);
                grads.push([[0.0, 0.0], [dgx[i] * cy[j], gx[i] * dcy[j]]]);
            }
        }
        debug_assert_eq!(values.len(), self.y_block() * 2);
        VectorShapes { values, grads }
    }

    /// Values and reference gradients of the DQ shape functions.
    pub fn eval_scalar(&self, p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (gx, gy) = (self.gauss.values(p[0]), self.gauss.values(p[1]));
        let (dgx, dgy) = (self.gauss.derivatives(p[0]), self.gauss.derivatives(p[1]));
        let m = self.gauss.len();
        let mut values = Vec::with_capacity(m * m);
        let mut grads = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                values.push(gx[i] * gy[j]);
                grads.push([dgx[i] * gy[j], gx[i] * dgy[j]]);
            }
        }
        (values, grads)
    }
}
