//! Curvature of the metric g(J) = omega(., J .) and the scalar-curvature moment map.

use rayon::prelude::*;

use super::grid::{derivs, JField, SurfaceGrid};
use crate::error::{QmError, Result};

/// Gaussian curvature of the metric E dx^2 + 2F dx dy + G dy^2 by the Brioschi formula, with
/// fourth-order central differences. Off the disk grid the metric is taken to be Euclidean.
pub fn gaussian_curvature(grid: &SurfaceGrid, e: &[f64], f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let h2 = grid.cell_area();
    let k: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let de = derivs(grid, e, 1.0, k);
            let df = derivs(grid, f, 0.0, k);
            let dg = derivs(grid, g, 1.0, k);
            let (ee, ff, gg) = (e[k], f[k], g[k]);
            let det3 = |m: [[f64; 3]; 3]| {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            };
            let m1 = [
                [-0.5 * de.fyy + df.fxy - 0.5 * dg.fxx, 0.5 * de.fx, df.fx - 0.5 * de.fy],
                [df.fy - 0.5 * dg.fx, ee, ff],
                [0.5 * dg.fy, ff, gg],
            ];
            let m2 = [[0.0, 0.5 * de.fy, 0.5 * dg.fx], [0.5 * de.fy, ee, ff], [0.5 * dg.fx, ff, gg]];
            let w = ee * gg - ff * ff;
            (det3(m1) - det3(m2)) / (w * w)
        })
        .collect();
    for (i, v) in k.iter().enumerate() {
        // a curvature radius below the grid spacing means the stencils do not resolve the field
        if !v.is_finite() || v.abs() * h2 > 1.0 {
            return Err(QmError::Stencil(i));
        }
    }
    Ok(k)
}

/// S(J) = 2 K of g(J); in dimension two every J is integrable, so this is the Hermitian scalar curvature.
pub fn hermitian_scalar_curvature(grid: &SurfaceGrid, j: &JField) -> Result<Vec<f64>> {
    if j.grid != *grid {
        return Err(QmError::Invalid("field lives on a different grid".into()));
    }
    let (e, f, g) = j.metric();
    Ok(gaussian_curvature(grid, &e, &f, &g)?.into_iter().map(|k| 2.0 * k).collect())
}

/// Sum over nodes of S(J) H dA.
pub fn moment_map_ham(grid: &SurfaceGrid, h: &[f64], j: &JField) -> Result<f64> {
    if h.len() != grid.len() {
        return Err(QmError::Invalid("Hamiltonian has the wrong number of values".into()));
    }
    let s = hermitian_scalar_curvature(grid, j)?;
    Ok(s.iter().zip(h).map(|(s, h)| s * h).sum::<f64>() * grid.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn flat_structure_has_zero_curvature_exactly() {
        for g in [SurfaceGrid::torus(16).unwrap(), SurfaceGrid::disk(20, 1.0).unwrap()] {
            let s = hermitian_scalar_curvature(&g, &JField::standard(g)).unwrap();
            assert!(s.iter().all(|&v| v == 0.0));
            assert_eq!(moment_map_ham(&g, &vec![1.0; g.len()], &JField::standard(g)).unwrap(), 0.0);
        }
    }

    fn conformal_error(n: usize) -> f64 {
        // g = exp(2 phi)(dx^2 + dy^2), K = -exp(-2 phi) lap(phi)
        let g = SurfaceGrid::torus(n).unwrap();
        let phi = |x: f64, y: f64| 0.3 * (TAU * x).sin() * (TAU * y).cos();
        let lap = |x: f64, y: f64| -2.0 * TAU * TAU * phi(x, y);
        let mut e = vec![0.0; g.len()];
        let f = vec![0.0; g.len()];
        for (k, v) in e.iter_mut().enumerate() {
            let (x, y) = g.node(k);
            *v = (2.0 * phi(x, y)).exp();
        }
        let kk = gaussian_curvature(&g, &e, &f, &e).unwrap();
        (0..g.len())
            .map(|k| {
                let (x, y) = g.node(k);
                (kk[k] + (-2.0 * phi(x, y)).exp() * lap(x, y)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn conformal_metric_curvature_converges() {
        let (a, b) = (conformal_error(32), conformal_error(64));
        assert!(a / b > 8.0, "{a} {b}");
        assert!(b < 1e-3);
    }

    #[test]
    fn rough_field_is_rejected() {
        let g = SurfaceGrid::torus(16).unwrap();
        let y: Vec<f64> = (0..g.len()).map(|k| if k % 2 == 0 { 1.0 } else { 1e4 }).collect();
        let j = JField::new(g, vec![0.0; g.len()], y).unwrap();
        assert!(matches!(hermitian_scalar_curvature(&g, &j), Err(QmError::Stencil(_))));
    }
}
