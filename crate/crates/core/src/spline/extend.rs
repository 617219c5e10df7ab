//! Least-squares refit of trained splines onto a different grid size.

use super::basis::BSplineSpec;
use super::layer::KanLayer;
use super::model::KanModel;
use crate::error::SplineError;
use crate::linalg::Cholesky;
use crate::scalar::Scalar;

/// Samples per knot interval of the target grid.
pub const SAMPLES_PER_INTERVAL: usize = 64;
/// Ridge added to the normal equations.
pub const RIDGE: f64 = 1e-8;
const REFINE_STEPS: usize = 2;

fn sample_points<T: Scalar>(spec: &BSplineSpec<T>) -> Vec<T> {
    let n = spec.grid() * SAMPLES_PER_INTERVAL;
    let width = spec.hi() - spec.lo();
    (0..n)
        .map(|s| spec.lo() + width * T::lit((s as f64 + 0.5) / n as f64))
        .collect()
}

/// Refit every edge of `layer` onto `grid` intervals (same order and domain).
///
/// Each edge's spline is sampled at [`SAMPLES_PER_INTERVAL`] points per new
/// interval and projected onto the new basis by ridge-regularized normal
/// equations followed by iterative refinement against the unregularized
/// system. Base weights are unchanged.
pub fn refit_grid<T: Scalar>(layer: &KanLayer<T>, grid: usize) -> Result<KanLayer<T>, SplineError> {
    let new_spec = layer.spec().with_grid(grid)?;
    if grid == layer.spec().grid() {
        return Ok(layer.clone());
    }
    let nb = new_spec.num_basis();
    let k = new_spec.order();
    let xs = sample_points(&new_spec);
    let rows: Vec<_> = xs
        .iter()
        .map(|&x| new_spec.active(x))
        .collect::<Result<_, _>>()?;

    let mut gram = vec![T::zero(); nb * nb];
    for a in &rows {
        for p in 0..=k {
            for q in 0..=k {
                gram[(a.first + p) * nb + a.first + q] += a.values[p] * a.values[q];
            }
        }
    }
    let mut ridged = gram.clone();
    let eps = T::lit(RIDGE);
    for d in 0..nb {
        ridged[d * nb + d] += eps;
    }
    let chol = Cholesky::factor(&ridged, nb)
        .ok_or_else(|| SplineError::NonFinite("grid refit normal equations".into()))?;

    let mut coeffs = Vec::with_capacity(layer.out_dim() * layer.in_dim() * nb);
    for o in 0..layer.out_dim() {
        for j in 0..layer.in_dim() {
            let mut rhs = vec![T::zero(); nb];
            for (a, &x) in rows.iter().zip(&xs) {
                let y = layer.edge_spline(o, j, x)?;
                for p in 0..=k {
                    rhs[a.first + p] += a.values[p] * y;
                }
            }
            let mut c = chol.solve(&rhs);
            for _ in 0..REFINE_STEPS {
                let resid: Vec<T> = (0..nb)
                    .map(|r| {
                        let row = &gram[r * nb..(r + 1) * nb];
                        rhs[r] - row.iter().zip(&c).map(|(&g, &v)| g * v).sum::<T>()
                    })
                    .collect();
                let corr = chol.solve(&resid);
                c.iter_mut().zip(&corr).for_each(|(v, &d)| *v += d);
            }
            coeffs.extend(c);
        }
    }
    let mut out = layer.clone();
    out.replace_grid(new_spec, coeffs);
    Ok(out)
}

/// Grid extension: refit onto a finer grid `g_new >= G`.
pub fn grid_extend<T: Scalar>(layer: &KanLayer<T>, g_new: usize) -> Result<KanLayer<T>, SplineError> {
    if g_new < layer.spec().grid() {
        return Err(SplineError::InvalidSpec(format!(
            "grid extension needs G_new >= {}, got {g_new}",
            layer.spec().grid()
        )));
    }
    refit_grid(layer, g_new)
}

/// Refit each layer of `model` to the matching entry of `grids`.
pub fn regrid_model<T: Scalar>(model: &KanModel<T>, grids: &[usize]) -> Result<KanModel<T>, SplineError> {
    if grids.len() != model.layers().len() {
        return Err(SplineError::Shape(format!(
            "{} grid sizes for {} layers",
            grids.len(),
            model.layers().len()
        )));
    }
    let layers = model
        .layers()
        .iter()
        .zip(grids)
        .map(|(l, &g)| refit_grid(l, g))
        .collect::<Result<Vec<_>, _>>()?;
    KanModel::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_layer(g: usize, seed: u64) -> KanLayer<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = BSplineSpec::new(3, g, -1.0, 2.0).unwrap();
        KanLayer::random(2, 2, spec, 1.0, &mut rng)
    }

    fn max_dev(a: &KanLayer<f64>, b: &KanLayer<f64>) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..1000 {
            let x = -1.0 + 3.0 * s as f64 / 999.0;
            for o in 0..2 {
                for j in 0..2 {
                    let d = a.edge_spline(o, j, x).unwrap() - b.edge_spline(o, j, x).unwrap();
                    worst = worst.max(d.abs());
                }
            }
        }
        worst
    }

    #[test]
    fn nested_extension_is_exact() {
        let old = random_layer(5, 11);
        let new = grid_extend(&old, 10).unwrap();
        assert_eq!(new.spec().grid(), 10);
        assert_eq!(new.num_basis(), 13);
        assert!(max_dev(&old, &new) < 1e-8, "{}", max_dev(&old, &new));
        assert_eq!(new.base_weights(), old.base_weights());
    }

    #[test]
    fn same_grid_is_identity() {
        let old = random_layer(6, 2);
        assert_eq!(grid_extend(&old, 6).unwrap(), old);
    }

    #[test]
    fn shrinking_is_rejected_by_extend() {
        assert!(grid_extend(&random_layer(6, 2), 5).is_err());
        assert!(refit_grid(&random_layer(6, 2), 4).is_ok());
    }

    #[test]
    fn non_nested_extension_is_close() {
        let old = random_layer(5, 3);
        let new = grid_extend(&old, 7).unwrap();
        let s: f64 = new.spec().basis_eval(0.123).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(max_dev(&old, &new) < 0.2);
    }
}
