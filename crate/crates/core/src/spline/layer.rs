use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::basis::BSplineSpec;
use crate::error::SplineError;
use crate::scalar::Scalar;

/// Activation on the residual base path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseActivation {
    #[default]
    Relu,
    /// Kept for ablations only.
    Silu,
}

impl BaseActivation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            BaseActivation::Relu => x.max(T::zero()),
            BaseActivation::Silu => x / (T::one() + (-x).exp()),
        }
    }

    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            BaseActivation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            BaseActivation::Silu => {
                let s = T::one() / (T::one() + (-x).exp());
                s * (T::one() + x * (T::one() - s))
            }
        }
    }
}

/// What to do with inputs outside the spline domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainPolicy {
    #[default]
    Clamp,
    Strict,
}

/// One KAN layer: `out[o] = Σ_j act(x_j)·w_b[o][j] + Σ_i c[o][j][i]·B_i(x_j)`.
///
/// Coefficients are stored row-major as `[out_dim][in_dim][K + G]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct KanLayer<T> {
    in_dim: usize,
    out_dim: usize,
    spec: BSplineSpec<T>,
    coeffs: Vec<T>,
    base: Vec<T>,
    #[serde(default)]
    activation: BaseActivation,
    #[serde(default)]
    policy: DomainPolicy,
}

impl<T: Scalar> KanLayer<T> {
    /// Zero-initialized layer.
    pub fn zeros(in_dim: usize, out_dim: usize, spec: BSplineSpec<T>) -> Self {
        let nb = spec.num_basis();
        Self {
            in_dim,
            out_dim,
            coeffs: vec![T::zero(); out_dim * in_dim * nb],
            base: vec![T::zero(); out_dim * in_dim],
            spec,
            activation: BaseActivation::Relu,
            policy: DomainPolicy::Clamp,
        }
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        spec: BSplineSpec<T>,
        coeffs: Vec<T>,
        base: Vec<T>,
    ) -> Result<Self, SplineError> {
        let nb = spec.num_basis();
        if coeffs.len() != out_dim * in_dim * nb {
            return Err(SplineError::Shape(format!(
                "coefficient tensor has {} entries, expected {out_dim}x{in_dim}x{nb}",
                coeffs.len()
            )));
        }
        if base.len() != out_dim * in_dim {
            return Err(SplineError::Shape(format!(
                "base weights have {} entries, expected {out_dim}x{in_dim}",
                base.len()
            )));
        }
        if let Some(v) = coeffs.iter().chain(&base).find(|v| !v.is_finite()) {
            return Err(SplineError::NonFinite(format!("layer parameter {v}")));
        }
        Ok(Self {
            in_dim,
            out_dim,
            spec,
            coeffs,
            base,
            activation: BaseActivation::Relu,
            policy: DomainPolicy::Clamp,
        })
    }

    /// Small random spline coefficients and scaled base weights.
    pub fn random<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        spec: BSplineSpec<T>,
        coeff_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim, spec);
        let cn = Normal::new(0.0, coeff_std).expect("valid std");
        for c in layer.coeffs.iter_mut() {
            *c = T::lit(cn.sample(rng));
        }
        let bound = (1.0 / in_dim.max(1) as f64).sqrt();
        for w in layer.base.iter_mut() {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        layer
    }

    pub fn with_activation(mut self, activation: BaseActivation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_policy(mut self, policy: DomainPolicy) -> Self {
        self.policy = policy;
        self
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }
    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
    #[inline]
    pub fn spec(&self) -> &BSplineSpec<T> {
        &self.spec
    }
    #[inline]
    pub fn num_basis(&self) -> usize {
        self.spec.num_basis()
    }
    pub fn activation(&self) -> BaseActivation {
        self.activation
    }
    pub fn policy(&self) -> DomainPolicy {
        self.policy
    }
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }
    pub fn base_weights(&self) -> &[T] {
        &self.base
    }
    pub fn base_weights_mut(&mut self) -> &mut [T] {
        &mut self.base
    }

    /// Number of spline coefficients (`M` in the sensitivity metric).
    pub fn num_coeffs(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn coeff_index(&self, o: usize, j: usize, i: usize) -> usize {
        (o * self.in_dim + j) * self.num_basis() + i
    }

    #[inline]
    pub fn coeff(&self, o: usize, j: usize, i: usize) -> T {
        self.coeffs[self.coeff_index(o, j, i)]
    }

    /// Coefficients of edge `(o, j)`.
    pub fn edge(&self, o: usize, j: usize) -> &[T] {
        let nb = self.num_basis();
        let start = (o * self.in_dim + j) * nb;
        &self.coeffs[start..start + nb]
    }

    pub fn edge_mut(&mut self, o: usize, j: usize) -> &mut [T] {
        let nb = self.num_basis();
        let start = (o * self.in_dim + j) * nb;
        &mut self.coeffs[start..start + nb]
    }

    #[inline]
    pub fn base_weight(&self, o: usize, j: usize) -> T {
        self.base[o * self.in_dim + j]
    }

    /// Apply the domain policy to one input.
    pub fn admit(&self, x: T) -> Result<T, SplineError> {
        if !x.is_finite() {
            return Err(SplineError::NonFinite(format!("input {x}")));
        }
        match self.policy {
            DomainPolicy::Clamp => Ok(self.spec.clamp(x)),
            DomainPolicy::Strict => {
                if self.spec.contains(x) {
                    Ok(x)
                } else {
                    Err(SplineError::OutOfDomain {
                        x: x.as_f64(),
                        lo: self.spec.lo().as_f64(),
                        hi: self.spec.hi().as_f64(),
                    })
                }
            }
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, SplineError> {
        if x.len() != self.in_dim {
            return Err(SplineError::Shape(format!(
                "layer expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        let k = self.spec.order();
        let mut out = vec![T::zero(); self.out_dim];
        for (j, &raw) in x.iter().enumerate() {
            let xj = self.admit(raw)?;
            let act = self.activation.apply(xj);
            let basis = self.spec.active(xj)?;
            for (o, y) in out.iter_mut().enumerate() {
                let edge = &self.edge(o, j)[basis.first..=basis.first + k];
                let spline: T = edge.iter().zip(&basis.values).map(|(&c, &b)| c * b).sum();
                *y += self.base_weight(o, j) * act + spline;
            }
        }
        Ok(out)
    }

    /// Spline part of edge `(o, j)` evaluated at `x` (no base path, no policy).
    pub fn edge_spline(&self, o: usize, j: usize, x: T) -> Result<T, SplineError> {
        let a = self.spec.active(x)?;
        let edge = &self.edge(o, j)[a.first..=a.first + self.spec.order()];
        Ok(edge.iter().zip(&a.values).map(|(&c, &b)| c * b).sum())
    }

    pub(crate) fn replace_grid(&mut self, spec: BSplineSpec<T>, coeffs: Vec<T>) {
        debug_assert_eq!(coeffs.len(), self.out_dim * self.in_dim * spec.num_basis());
        self.spec = spec;
        self.coeffs = coeffs;
    }
}

pub fn layer_forward<T: Scalar>(layer: &KanLayer<T>, x: &[T]) -> Result<Vec<T>, SplineError> {
    layer.forward(x)
}
