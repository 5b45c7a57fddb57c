//! Structured rectangular grids on `[0, Lx] (x [0, Ly])` with Dirichlet
//! boundary nodes, fields over interior nodes, and second-order
//! finite-difference operators.
//!
//! Interior node `(i, j)` sits at `((i + 1) hx, (j + 1) hy)` and has flat index
//! `i + nx * j`. Boundary nodes are never stored; their values come from the
//! field's [`SpaceTimeFn`] trace.

mod field;
pub mod ops;

pub use field::{Field, SpaceTimeFn};
pub use ops::{
    div_weighted_flux, gradient_inner, gradient_sq_integral, l2_inner, l2_inner_values, l2_norm,
    l2_norm_values, laplacian, weighted_gradient_inner,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: grid has {expected} interior nodes, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-positive flux weight {value} at {location}")]
    NonPositiveWeight { location: String, value: f64 },
    #[error("non-finite value {value} at interior node {node}")]
    NonFinite { node: usize, value: f64 },
}

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 2],
    extent: [f64; 2],
    spacing: [f64; 2],
}

/// One endpoint of a grid face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Interior(usize),
    Boundary(Point),
}

/// A face between two adjacent nodes along `axis`; `left` has the smaller coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub left: Node,
    pub right: Node,
    pub axis: usize,
}

impl Grid {
    pub fn new_1d(extent: f64, n: usize) -> Result<Self, GridError> {
        Self::build(1, [n, 1], [extent, 1.0])
    }

    pub fn new_2d(extent: [f64; 2], n: [usize; 2]) -> Result<Self, GridError> {
        Self::build(2, n, extent)
    }

    /// Unit interval or unit square with `n` interior nodes per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self, GridError> {
        match dim {
            1 => Self::new_1d(1.0, n),
            2 => Self::new_2d([1.0, 1.0], [n, n]),
            d => Err(GridError::InvalidGrid(format!("dimension must be 1 or 2, got {d}"))),
        }
    }

    fn build(dim: usize, n: [usize; 2], extent: [f64; 2]) -> Result<Self, GridError> {
        let mut spacing = [1.0; 2];
        for ax in 0..dim {
            if n[ax] < 3 {
                return Err(GridError::InvalidGrid(format!("axis {ax} needs at least 3 interior nodes, got {}", n[ax])));
            }
            if !(extent[ax].is_finite() && extent[ax] > 0.0) {
                return Err(GridError::InvalidGrid(format!("axis {ax} extent must be positive, got {}", extent[ax])));
            }
            spacing[ax] = extent[ax] / (n[ax] + 1) as f64;
        }
        Ok(Self { dim, n, extent, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one interior node (cell volume).
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n[0] && j < self.n[1]);
        i + self.n[0] * j
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n[0], idx / self.n[0])
    }

    pub fn position(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        let y = if self.dim == 2 { (j + 1) as f64 * self.spacing[1] } else { 0.0 };
        [(i + 1) as f64 * self.spacing[0], y]
    }

    pub fn positions(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.position(k)).collect()
    }

    /// Boundary nodes adjacent to the interior (corners excluded; the
    /// five-point stencil never reads them).
    pub fn boundary_positions(&self) -> Vec<Point> {
        let mut out = Vec::new();
        self.for_each_face(|f| {
            for node in [f.left, f.right] {
                if let Node::Boundary(p) = node {
                    out.push(p);
                }
            }
        });
        out
    }

    /// Visits every face exactly once, including faces touching the boundary.
    pub fn for_each_face(&self, mut visit: impl FnMut(Face)) {
        let [nx, ny] = self.n;
        for idx in 0..self.len() {
            let (i, j) = self.coords(idx);
            let p = self.position(idx);
            if i == 0 {
                visit(Face { left: Node::Boundary([0.0, p[1]]), right: Node::Interior(idx), axis: 0 });
            }
            let right = if i + 1 < nx { Node::Interior(idx + 1) } else { Node::Boundary([self.extent[0], p[1]]) };
            visit(Face { left: Node::Interior(idx), right, axis: 0 });
            if self.dim == 2 {
                if j == 0 {
                    visit(Face { left: Node::Boundary([p[0], 0.0]), right: Node::Interior(idx), axis: 1 });
                }
                let up = if j + 1 < ny { Node::Interior(idx + nx) } else { Node::Boundary([p[0], self.extent[1]]) };
                visit(Face { left: Node::Interior(idx), right: up, axis: 1 });
            }
        }
    }
}
