//! Inverse Dirichlet Laplacian `N` and the dual norm `|f|_* = |grad N(f)|`.

use super::assembly::laplacian_matrix;
use super::krylov::{cg, LinearConfig};
use super::sparse::Csr;
use super::SolverError;
use crate::grid::{Grid, GridError};

const INVERSE_CFG: LinearConfig = LinearConfig { tol: 1e-15, max_iter: 20_000 };

/// `-L` as an SPD matrix.
pub fn neg_laplacian(grid: &Grid) -> Csr {
    let l = laplacian_matrix(grid);
    Csr::identity(grid.len()).add(0.0, &l, -1.0)
}

/// Solves `-L u = f` with homogeneous Dirichlet trace. With the midpoint
/// mass matrix `M = |cell| I` on both sides of the weak form, the mass
/// scaling cancels.
pub fn inverse_dirichlet_laplacian(f: &[f64], grid: &Grid) -> Result<Vec<f64>, SolverError> {
    if f.len() != grid.len() {
        return Err(GridError::DimensionMismatch { expected: grid.len(), found: f.len() }.into());
    }
    Ok(cg(&neg_laplacian(grid), f, None, &INVERSE_CFG)?.x)
}

/// `sqrt(<f, N f>)`, which equals the discrete `|grad N(f)|`.
pub fn star_norm(f: &[f64], grid: &Grid) -> Result<f64, SolverError> {
    let n = inverse_dirichlet_laplacian(f, grid)?;
    let v: f64 = f.iter().zip(&n).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume();
    Ok(v.max(0.0).sqrt())
}

/// Smallest eigenvalue of `-L` by inverse power iteration.
pub fn smallest_dirichlet_eigenvalue(grid: &Grid) -> Result<f64, SolverError> {
    let a = neg_laplacian(grid);
    let mut v: Vec<f64> = grid.positions().iter().map(|p| 1.0 + 0.01 * (p[0] + p[1])).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let w = cg(&a, &v, None, &INVERSE_CFG)?.x;
        let rayleigh = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let next = 1.0 / rayleigh;
        v = w;
        if (next - lambda).abs() <= 1e-13 * next {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Discrete Poincaré constant `C` with `|f| <= C |grad f|` for homogeneous trace.
pub fn discrete_poincare_constant(grid: &Grid) -> Result<f64, SolverError> {
    Ok(1.0 / smallest_dirichlet_eigenvalue(grid)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        let g = Grid::new_1d(1.0, 16).unwrap();
        assert!(inverse_dirichlet_laplacian(&[0.0; 16], &g).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(star_norm(&[0.0; 16], &g).unwrap(), 0.0);
    }

    #[test]
    fn constant_source_gives_parabola() {
        // -u'' = 1, u(0) = u(1) = 0 has u = x(1 - x)/2; the 3-point stencil is exact on quadratics
        let g = Grid::new_1d(1.0, 63).unwrap();
        let u = inverse_dirichlet_laplacian(&[1.0; 63], &g).unwrap();
        for (k, p) in g.positions().iter().enumerate() {
            assert!((u[k] - p[0] * (1.0 - p[0]) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalue_matches_closed_form() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let h: f64 = 1.0 / 32.0;
        let exact = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((smallest_dirichlet_eigenvalue(&g).unwrap() - exact).abs() < 1e-8 * exact);
        let c = discrete_poincare_constant(&g).unwrap();
        assert!(c > 1.0 / std::f64::consts::PI && c < 1.05 / std::f64::consts::PI);
    }

    #[test]
    fn length_mismatch() {
        let g = Grid::new_1d(1.0, 8).unwrap();
        assert!(matches!(inverse_dirichlet_laplacian(&[1.0; 3], &g), Err(SolverError::Grid(_))));
    }
}
