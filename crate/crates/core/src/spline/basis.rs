//! Uniform B-spline knot grids and basis evaluation.
//!
//! A grid of `G` intervals over `[lo, hi]` is extended by `K` knots on each
//! side, giving `G + 2K + 1` knots and `G + K` basis functions of degree `K`.
//! Every interior interval therefore sees the same `K + 1` local pieces,
//! which is what lets one lookup table serve all basis functions.

use serde::{Deserialize, Serialize};

use crate::error::SplineError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct BSplineSpec<T> {
    order: usize,
    grid: usize,
    lo: T,
    hi: T,
    knots: Vec<T>,
}

/// The `K + 1` possibly nonzero basis values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveBasis<T> {
    /// Global index of the first active basis function (equals the interval index).
    pub first: usize,
    /// Offset of `x` within its interval, in units of the knot spacing.
    pub local: T,
    pub values: Vec<T>,
}

impl<T: Scalar> BSplineSpec<T> {
    pub fn new(order: usize, grid: usize, lo: T, hi: T) -> Result<Self, SplineError> {
        if order < 1 {
            return Err(SplineError::InvalidSpec("order K must be >= 1".into()));
        }
        if grid < 1 {
            return Err(SplineError::InvalidSpec("grid G must be >= 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(SplineError::InvalidSpec(format!(
                "domain [{lo}, {hi}] must be finite and non-empty"
            )));
        }
        let h = (hi - lo) / T::from_usize_lossy(grid);
        let knots = (0..grid + 2 * order + 1)
            .map(|j| {
                let offset = j as f64 - order as f64;
                lo + T::lit(offset) * h
            })
            .collect();
        Ok(Self {
            order,
            grid,
            lo,
            hi,
            knots,
        })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn grid(&self) -> usize {
        self.grid
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Knot spacing `(hi - lo) / G`.
    #[inline]
    pub fn spacing(&self) -> T {
        (self.hi - self.lo) / T::from_usize_lossy(self.grid)
    }

    /// Number of basis functions, `K + G`.
    #[inline]
    pub fn num_basis(&self) -> usize {
        self.order + self.grid
    }

    /// Same order and domain, different grid size.
    pub fn with_grid(&self, grid: usize) -> Result<Self, SplineError> {
        Self::new(self.order, grid, self.lo, self.hi)
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: T) -> T {
        x.max(self.lo).min(self.hi)
    }

    fn check_domain(&self, x: T) -> Result<(), SplineError> {
        if x.is_finite() && self.contains(x) {
            Ok(())
        } else {
            Err(SplineError::OutOfDomain {
                x: x.as_f64(),
                lo: self.lo.as_f64(),
                hi: self.hi.as_f64(),
            })
        }
    }

    /// Interval index and local offset in `[0, 1]`; the right domain edge
    /// belongs to the last interval.
    fn locate(&self, x: T) -> (usize, T) {
        let pos = (x - self.lo) / self.spacing();
        let last = self.grid - 1;
        let idx = pos.floor().to_usize().unwrap_or(0).min(last);
        (idx, pos - T::from_usize_lossy(idx))
    }

    /// Full basis vector of length `K + G` (Cox–de Boor).
    pub fn basis_eval(&self, x: T) -> Result<Vec<T>, SplineError> {
        let active = self.active(x)?;
        let mut out = vec![T::zero(); self.num_basis()];
        out[active.first..active.first + self.order + 1].copy_from_slice(&active.values);
        Ok(out)
    }

    /// The `K + 1` basis functions supported on the interval containing `x`.
    pub fn active(&self, x: T) -> Result<ActiveBasis<T>, SplineError> {
        self.check_domain(x)?;
        let (first, local) = self.locate(x);
        let values = uniform_pieces(self.order, local);
        Ok(ActiveBasis {
            first,
            local,
            values,
        })
    }

    /// Active basis values together with their derivatives w.r.t. `x`.
    pub fn active_with_derivative(&self, x: T) -> Result<(ActiveBasis<T>, Vec<T>), SplineError> {
        let active = self.active(x)?;
        let lower = uniform_pieces(self.order - 1, active.local);
        let inv_h = T::one() / self.spacing();
        let k = self.order;
        // B'_{i,K} = (B_{i,K-1} - B_{i+1,K-1}) / h on a uniform grid
        let deriv = (0..=k)
            .map(|j| {
                let left = if j >= 1 { lower[j - 1] } else { T::zero() };
                let right = if j < k { lower[j] } else { T::zero() };
                (left - right) * inv_h
            })
            .collect();
        Ok((active, deriv))
    }
}

/// Values of the `degree + 1` uniform B-spline pieces at local offset
/// `t` within one interval, via the triangular Cox–de Boor recursion on
/// integer knots.
///
/// `out[j]` is the basis function whose support starts `degree - j`
/// intervals to the left of the current one.
pub fn uniform_pieces<T: Scalar>(degree: usize, t: T) -> Vec<T> {
    let mut n = vec![T::zero(); degree + 1];
    n[0] = T::one();
    // left[r] = t + r - 1 , right[r] = r - t  (integer knots, span at 0)
    for d in 1..=degree {
        let mut saved = T::zero();
        for r in 0..d {
            let right = T::from_usize_lossy(r + 1) - t;
            let left = t + T::from_usize_lossy(d - r - 1);
            let denom = T::from_usize_lossy(d);
            let tmp = n[r] / denom;
            n[r] = saved + right * tmp;
            saved = left * tmp;
        }
        n[d] = saved;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Textbook recursion over the full extended knot vector.
    fn cox_de_boor(knots: &[f64], i: usize, k: usize, x: f64) -> f64 {
        if k == 0 {
            return if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + k] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(knots, i, k - 1, x);
        }
        let d2 = knots[i + k + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + k + 1] - x) / d2 * cox_de_boor(knots, i + 1, k - 1, x);
        }
        v
    }

    #[test]
    fn basis_count_is_k_plus_g() {
        let s = BSplineSpec::new(3, 5, 0.0, 1.0).unwrap();
        assert_eq!(s.basis_eval(0.42).unwrap().len(), 8);
        assert_eq!(s.knots().len(), 5 + 2 * 3 + 1);
    }

    #[test]
    fn linear_hat_at_midpoint() {
        let s = BSplineSpec::new(1, 1, 0.0, 1.0).unwrap();
        let b = s.basis_eval(0.5).unwrap();
        assert_eq!(b, vec![0.5, 0.5]);
    }

    #[test]
    fn matches_recursive_oracle_at_037() {
        let s = BSplineSpec::new(3, 5, 0.0_f64, 1.0).unwrap();
        let b = s.basis_eval(0.37).unwrap();
        for (i, &v) in b.iter().enumerate() {
            let want = cox_de_boor(s.knots(), i, 3, 0.37);
            assert_abs_diff_eq!(v, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_knot_spacing() {
        let s = BSplineSpec::new(4, 7, -1.5_f64, 2.0).unwrap();
        let h = 3.5 / 7.0;
        for w in s.knots().windows(2) {
            assert!(((w[1] - w[0]) - h).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let s = BSplineSpec::new(2, 4, 0.0_f64, 1.0).unwrap();
        assert!(matches!(s.basis_eval(1.01), Err(SplineError::OutOfDomain { .. })));
        assert!(s.basis_eval(-0.1).is_err());
        assert!(s.basis_eval(f64::NAN).is_err());
        assert!(s.basis_eval(1.0).is_ok());
    }

    #[test]
    fn right_edge_partition_of_unity() {
        for k in 1..=4 {
            let s = BSplineSpec::new(k, 6, 0.0_f64, 1.0).unwrap();
            let sum: f64 = s.basis_eval(1.0).unwrap().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let s = BSplineSpec::new(3, 5, 0.0_f64, 1.0).unwrap();
        let x = 0.53;
        let (a, d) = s.active_with_derivative(x).unwrap();
        let h = 1e-6;
        let up = s.basis_eval(x + h).unwrap();
        let dn = s.basis_eval(x - h).unwrap();
        for j in 0..=3 {
            let fd = (up[a.first + j] - dn[a.first + j]) / (2.0 * h);
            assert_abs_diff_eq!(d[j], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn f32_agrees_with_f64() {
        let s64 = BSplineSpec::new(3, 8, 0.0_f64, 1.0).unwrap();
        let s32 = BSplineSpec::new(3, 8, 0.0_f32, 1.0).unwrap();
        let a = s64.basis_eval(0.3).unwrap();
        let b = s32.basis_eval(0.3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - *y as f64).abs() < 1e-6);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_nonneg_local_support(k in 1usize..=5, g in 1usize..=40, u in 0.0f64..1.0) {
                let s = BSplineSpec::new(k, g, -2.0_f64, 3.0).unwrap();
                let x = -2.0 + 5.0 * u;
                let b = s.basis_eval(x).unwrap();
                let sum: f64 = b.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(b.iter().all(|&v| v >= 0.0));
                let nz: Vec<usize> = b.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect();
                prop_assert!(nz.len() <= k + 1);
                if let (Some(a), Some(z)) = (nz.first(), nz.last()) {
                    prop_assert_eq!(z - a + 1, nz.len());
                }
            }
        }
    }
}
