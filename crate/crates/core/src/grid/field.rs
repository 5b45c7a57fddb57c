use std::fmt;
use std::sync::Arc;

use super::{Grid, GridError, Point};
use crate::model::expr::{Expr, Var};

type Closure = dyn Fn(Point, f64) -> f64 + Send + Sync;

/// A scalar function of position and time: Dirichlet traces, boundary data
/// and their extensions into the domain.
#[derive(Clone)]
pub enum SpaceTimeFn {
    Constant(f64),
    Expr { expr: Arc<Expr>, dt: Arc<Expr> },
    Closure(Arc<Closure>),
}

impl SpaceTimeFn {
    pub fn constant(v: f64) -> Self {
        SpaceTimeFn::Constant(v)
    }

    pub fn from_expr(expr: Expr) -> Self {
        if let Some(c) = expr.as_constant() {
            return SpaceTimeFn::Constant(c);
        }
        let dt = expr.diff(Var::T);
        SpaceTimeFn::Expr { expr: Arc::new(expr), dt: Arc::new(dt) }
    }

    pub fn from_closure(f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        SpaceTimeFn::Closure(Arc::new(f))
    }

    pub fn eval(&self, p: Point, t: f64) -> f64 {
        match self {
            SpaceTimeFn::Constant(c) => *c,
            SpaceTimeFn::Expr { expr, .. } => expr.eval(p[0], p[1], t),
            SpaceTimeFn::Closure(f) => f(p, t),
        }
    }

    /// Analytic time derivative, when one is known.
    pub fn dt(&self, p: Point, t: f64) -> Option<f64> {
        match self {
            SpaceTimeFn::Constant(_) => Some(0.0),
            SpaceTimeFn::Expr { dt, .. } => Some(dt.eval(p[0], p[1], t)),
            SpaceTimeFn::Closure(_) => None,
        }
    }

    pub fn has_analytic_dt(&self) -> bool {
        !matches!(self, SpaceTimeFn::Closure(_))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            SpaceTimeFn::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// Samples at every interior node of `grid`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        (0..grid.len()).map(|k| self.eval(grid.position(k), t)).collect()
    }
}

impl fmt::Debug for SpaceTimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceTimeFn::Constant(c) => write!(f, "Constant({c})"),
            SpaceTimeFn::Expr { expr, .. } => write!(f, "Expr({expr})"),
            SpaceTimeFn::Closure(_) => f.write_str("Closure(..)"),
        }
    }
}

impl From<f64> for SpaceTimeFn {
    fn from(v: f64) -> Self {
        SpaceTimeFn::Constant(v)
    }
}

/// Values at interior nodes plus a Dirichlet trace supplying boundary values.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    trace: SpaceTimeFn,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, trace: SpaceTimeFn) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { node, value });
        }
        Ok(Self { grid, values, trace })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()], trace: SpaceTimeFn::Constant(c) }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at interior nodes at time `t`; `f` also serves as the trace.
    pub fn sampled(grid: Grid, f: &SpaceTimeFn, t: f64) -> Self {
        Self { grid, values: f.sample(&grid, t), trace: f.clone() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn trace(&self) -> &SpaceTimeFn {
        &self.trace
    }

    pub fn with_trace(mut self, trace: SpaceTimeFn) -> Self {
        self.trace = trace;
        self
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, GridError> {
        Field::new(self.grid, values, self.trace.clone())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a face endpoint: stored value or trace at time `t`.
    pub fn node_value(&self, node: super::Node, t: f64) -> f64 {
        match node {
            super::Node::Interior(k) => self.values[k],
            super::Node::Boundary(p) => self.trace.eval(p, t),
        }
    }

    /// Applies `f` nodewise; boundary values of the result follow `f` applied to the trace.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let trace = match &self.trace {
            SpaceTimeFn::Constant(c) => SpaceTimeFn::Constant(f(*c)),
            other => {
                let inner = other.clone();
                SpaceTimeFn::from_closure(move |p, t| f(inner.eval(p, t)))
            }
        };
        Self { grid: self.grid, values, trace }
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }
}
