//! Face-based finite-difference operators.
//!
//! Every operator is written as a sum over faces so the discrete
//! summation-by-parts identity `-<L f, g> = sum_faces (df/h)(dg/h) |cell|`
//! holds for fields with homogeneous trace.

use super::{Field, Grid, GridError, Node};

fn check_grid(grid: &Grid, f: &Field) -> Result<(), GridError> {
    if f.len() != grid.len() {
        return Err(GridError::DimensionMismatch { expected: grid.len(), found: f.len() });
    }
    if f.grid() != grid {
        return Err(GridError::GridMismatch);
    }
    Ok(())
}

fn scatter(out: &mut [f64], left: Node, right: Node, flux_over_h: f64) {
    if let Node::Interior(l) = left {
        out[l] += flux_over_h;
    }
    if let Node::Interior(r) = right {
        out[r] -= flux_over_h;
    }
}

/// Centered second-difference Laplacian at interior nodes; boundary values
/// come from the trace of `f` at time `t`.
pub fn laplacian(grid: &Grid, f: &Field, t: f64) -> Result<Vec<f64>, GridError> {
    check_grid(grid, f)?;
    let h = grid.spacing();
    let mut out = vec![0.0; grid.len()];
    grid.for_each_face(|face| {
        let hh = h[face.axis];
        let flux = (f.node_value(face.right, t) - f.node_value(face.left, t)) / hh;
        scatter(&mut out, face.left, face.right, flux / hh);
    });
    Ok(out)
}

/// Conservative `div(w (grad a - eta grad b))` with arithmetic-mean face weights.
pub fn div_weighted_flux(grid: &Grid, w: &Field, a: &Field, b: &Field, eta: f64, t: f64) -> Result<Vec<f64>, GridError> {
    check_grid(grid, w)?;
    check_grid(grid, a)?;
    check_grid(grid, b)?;
    check_positive_weights(grid, w, t)?;
    let h = grid.spacing();
    let mut out = vec![0.0; grid.len()];
    grid.for_each_face(|face| {
        let hh = h[face.axis];
        let wf = 0.5 * (w.node_value(face.left, t) + w.node_value(face.right, t));
        let da = a.node_value(face.right, t) - a.node_value(face.left, t);
        let db = b.node_value(face.right, t) - b.node_value(face.left, t);
        let flux = wf * (da / hh - eta * db / hh);
        scatter(&mut out, face.left, face.right, flux / hh);
    });
    Ok(out)
}

pub(crate) fn check_positive_weights(grid: &Grid, w: &Field, t: f64) -> Result<(), GridError> {
    if let Some((k, &v)) = w.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(GridError::NonPositiveWeight { location: format!("interior node {k}"), value: v });
    }
    let mut bad = None;
    grid.for_each_face(|face| {
        for node in [face.left, face.right] {
            if let Node::Boundary(p) = node {
                let v = w.node_value(node, t);
                if !(v > 0.0) && bad.is_none() {
                    bad = Some((p, v));
                }
            }
        }
    });
    match bad {
        Some((p, v)) => Err(GridError::NonPositiveWeight { location: format!("boundary point {p:?}"), value: v }),
        None => Ok(()),
    }
}

/// `sum_faces ((f_R - f_L)/h)^2 |cell|`, boundary faces included.
pub fn gradient_sq_integral(grid: &Grid, f: &Field, t: f64) -> Result<f64, GridError> {
    gradient_inner(grid, f, f, t)
}

/// Discrete `int grad f . grad g`.
pub fn gradient_inner(grid: &Grid, f: &Field, g: &Field, t: f64) -> Result<f64, GridError> {
    check_grid(grid, f)?;
    check_grid(grid, g)?;
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let mut acc = 0.0;
    grid.for_each_face(|face| {
        let hh = h[face.axis];
        let df = (f.node_value(face.right, t) - f.node_value(face.left, t)) / hh;
        let dg = (g.node_value(face.right, t) - g.node_value(face.left, t)) / hh;
        acc += df * dg;
    });
    Ok(acc * vol)
}

/// Discrete `int w grad f . grad g` with the same face weights as [`div_weighted_flux`].
pub fn weighted_gradient_inner(grid: &Grid, w: &Field, f: &Field, g: &Field, t: f64) -> Result<f64, GridError> {
    check_grid(grid, w)?;
    check_grid(grid, f)?;
    check_grid(grid, g)?;
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let mut acc = 0.0;
    grid.for_each_face(|face| {
        let hh = h[face.axis];
        let wf = 0.5 * (w.node_value(face.left, t) + w.node_value(face.right, t));
        let df = (f.node_value(face.right, t) - f.node_value(face.left, t)) / hh;
        let dg = (g.node_value(face.right, t) - g.node_value(face.left, t)) / hh;
        acc += wf * df * dg;
    });
    Ok(acc * vol)
}

/// Midpoint-rule `L^2` inner product over interior nodes.
pub fn l2_inner(grid: &Grid, f: &Field, g: &Field) -> Result<f64, GridError> {
    check_grid(grid, f)?;
    check_grid(grid, g)?;
    l2_inner_values(grid, f.values(), g.values())
}

pub fn l2_norm(grid: &Grid, f: &Field) -> Result<f64, GridError> {
    Ok(l2_inner(grid, f, f)?.sqrt())
}

pub fn l2_inner_values(grid: &Grid, f: &[f64], g: &[f64]) -> Result<f64, GridError> {
    for v in [f, g] {
        if v.len() != grid.len() {
            return Err(GridError::DimensionMismatch { expected: grid.len(), found: v.len() });
        }
    }
    Ok(f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume())
}

pub fn l2_norm_values(grid: &Grid, f: &[f64]) -> Result<f64, GridError> {
    Ok(l2_inner_values(grid, f, f)?.sqrt())
}
