//! Matrix forms of the grid operators and their Dirichlet lifts.
//!
//! For any field `f`, `laplacian(f) = laplacian_matrix * f.values + lift(trace)`,
//! and likewise for the weighted divergence.

use super::sparse::Csr;
use crate::grid::{div_weighted_flux, laplacian, Field, Grid, GridError, Node, SpaceTimeFn};

/// `div(w grad .)` on interior unknowns with homogeneous trace. Symmetric
/// negative definite for positive `w`.
pub fn weighted_operator(grid: &Grid, w: &Field, t: f64) -> Result<Csr, GridError> {
    crate::grid::ops::check_positive_weights(grid, w, t)?;
    let h = grid.spacing();
    let mut trips = Vec::with_capacity(5 * grid.len());
    grid.for_each_face(|face| {
        let hh = h[face.axis];
        let c = 0.5 * (w.node_value(face.left, t) + w.node_value(face.right, t)) / (hh * hh);
        match (face.left, face.right) {
            (Node::Interior(l), Node::Interior(r)) => {
                trips.extend([(l, l, -c), (l, r, c), (r, r, -c), (r, l, c)]);
            }
            (Node::Interior(k), Node::Boundary(_)) | (Node::Boundary(_), Node::Interior(k)) => trips.push((k, k, -c)),
            _ => {}
        }
    });
    Ok(Csr::from_triplets(grid.len(), trips, true))
}

pub fn laplacian_matrix(grid: &Grid) -> Csr {
    weighted_operator(grid, &Field::constant(*grid, 1.0), 0.0).expect("unit weights are positive")
}

/// Boundary contribution of `trace` to the Laplacian at time `t`.
pub fn laplacian_lift(grid: &Grid, trace: &SpaceTimeFn, t: f64) -> Result<Vec<f64>, GridError> {
    laplacian(grid, &Field::new(*grid, vec![0.0; grid.len()], trace.clone())?, t)
}

/// Boundary contribution of `trace` to `div(w grad .)` at time `t`.
pub fn weighted_lift(grid: &Grid, w: &Field, trace: &SpaceTimeFn, t: f64) -> Result<Vec<f64>, GridError> {
    let a = Field::new(*grid, vec![0.0; grid.len()], trace.clone())?;
    div_weighted_flux(grid, w, &a, &Field::zeros(*grid), 0.0, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_plus_lift_reproduces_operator() {
        let g = Grid::new_2d([1.0, 2.0], [4, 5]).unwrap();
        let trace = SpaceTimeFn::from_closure(|p, t| p[0] * p[0] - p[1] + t);
        let vals: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.7).cos()).collect();
        let f = Field::new(g, vals.clone(), trace.clone()).unwrap();
        let direct = laplacian(&g, &f, 0.3).unwrap();
        let mut via = laplacian_matrix(&g).matvec(&vals);
        for (v, l) in via.iter_mut().zip(laplacian_lift(&g, &trace, 0.3).unwrap()) {
            *v += l;
        }
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        let w = Field::new(g, (0..g.len()).map(|k| 1.0 + 0.1 * k as f64).collect(), 2.0.into()).unwrap();
        let direct = div_weighted_flux(&g, &w, &f, &Field::zeros(g), 0.0, 0.3).unwrap();
        let a = weighted_operator(&g, &w, 0.3).unwrap();
        assert_eq!(a.asymmetry(), 0.0);
        let mut via = a.matvec(&vals);
        for (v, l) in via.iter_mut().zip(weighted_lift(&g, &w, &trace, 0.3).unwrap()) {
            *v += l;
        }
        for (x, y) in direct.iter().zip(&via) {
            assert!((x - y).abs() <= 1e-11 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let g = Grid::new_1d(1.0, 4).unwrap();
        assert!(weighted_operator(&g, &Field::constant(g, 0.0), 0.0).is_err());
    }
}
