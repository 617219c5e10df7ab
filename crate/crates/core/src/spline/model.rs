use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::BSplineSpec;
use super::layer::KanLayer;
use crate::error::SplineError;
use crate::scalar::Scalar;

/// A stack of KAN layers with chained dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct KanModel<T> {
    layers: Vec<KanLayer<T>>,
}

/// Loss used by training and sensitivity profiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    CrossEntropy,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub coeffs: Vec<Vec<T>>,
    pub base: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &KanModel<T>) -> Self {
        Self {
            coeffs: model.layers.iter().map(|l| vec![T::zero(); l.num_coeffs()]).collect(),
            base: model
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.base_weights().len()])
                .collect(),
        }
    }

    fn scale(&mut self, s: T) {
        for v in self.coeffs.iter_mut().chain(self.base.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= s);
        }
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x += y);
        }
        for (a, b) in self.base.iter_mut().zip(&other.base) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x += y);
        }
    }
}

struct LayerTape<T> {
    admitted: Vec<T>,
    /// Derivative of the domain policy (0 where an input was clamped).
    pass: Vec<T>,
    first: Vec<usize>,
    basis: Vec<Vec<T>>,
    dbasis: Vec<Vec<T>>,
}

impl<T: Scalar> KanModel<T> {
    pub fn new(layers: Vec<KanLayer<T>>) -> Result<Self, SplineError> {
        for (k, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(SplineError::Shape(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    w[0].out_dim(),
                    k + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Randomly initialized model with the same spline spec on every layer.
    pub fn random<R: Rng + ?Sized>(
        dims: &[usize],
        spec: &BSplineSpec<T>,
        coeff_std: f64,
        rng: &mut R,
    ) -> Result<Self, SplineError> {
        if dims.len() < 2 {
            return Err(SplineError::Shape("need at least input and output width".into()));
        }
        let layers = dims
            .windows(2)
            .map(|w| KanLayer::random(w[0], w[1], spec.clone(), coeff_std, rng))
            .collect();
        Self::new(layers)
    }

    pub fn empty() -> Self {
        Self { layers: Vec::new() }
    }

    pub fn layers(&self) -> &[KanLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer<T>] {
        &mut self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn grids(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.spec().grid()).collect()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, SplineError> {
        let mut cur = x.to_vec();
        for l in &self.layers {
            cur = l.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.coeffs().iter().chain(l.base_weights()).all(|v| v.is_finite()))
    }

    /// Loss of one sample and its parameter gradients (analytic backprop).
    pub fn sample_loss_and_grad(
        &self,
        x: &[T],
        target: &[T],
        loss: LossKind,
    ) -> Result<(T, Gradients<T>), SplineError> {
        let mut grads = Gradients::zeros_like(self);
        let l = self.accumulate_sample(x, target, loss, &mut grads)?;
        Ok((l, grads))
    }

    /// Mean loss and mean gradients over a batch of rows.
    pub fn batch_loss_and_grad(
        &self,
        xs: &[&[T]],
        ts: &[&[T]],
        loss: LossKind,
    ) -> Result<(T, Gradients<T>), SplineError> {
        let mut grads = Gradients::zeros_like(self);
        let mut total = T::zero();
        for (x, t) in xs.iter().zip(ts) {
            total += self.accumulate_sample(x, t, loss, &mut grads)?;
        }
        let n = T::from_usize_lossy(xs.len().max(1));
        grads.scale(T::one() / n);
        Ok((total / n, grads))
    }

    pub fn loss(&self, x: &[T], target: &[T], loss: LossKind) -> Result<T, SplineError> {
        let y = self.forward(x)?;
        Ok(loss_value(&y, target, loss)?.0)
    }

    fn accumulate_sample(
        &self,
        x: &[T],
        target: &[T],
        loss: LossKind,
        grads: &mut Gradients<T>,
    ) -> Result<T, SplineError> {
        let mut tapes = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            if cur.len() != layer.in_dim() {
                return Err(SplineError::Shape(format!(
                    "layer expects {} inputs, got {}",
                    layer.in_dim(),
                    cur.len()
                )));
            }
            let k = layer.spec().order();
            let mut tape = LayerTape {
                admitted: Vec::with_capacity(cur.len()),
                pass: Vec::with_capacity(cur.len()),
                first: Vec::with_capacity(cur.len()),
                basis: Vec::with_capacity(cur.len()),
                dbasis: Vec::with_capacity(cur.len()),
            };
            let mut out = vec![T::zero(); layer.out_dim()];
            for (j, &raw) in cur.iter().enumerate() {
                let xj = layer.admit(raw)?;
                let (a, d) = layer.spec().active_with_derivative(xj)?;
                let act = layer.activation().apply(xj);
                for (o, y) in out.iter_mut().enumerate() {
                    let edge = &layer.edge(o, j)[a.first..=a.first + k];
                    let s: T = edge.iter().zip(&a.values).map(|(&c, &b)| c * b).sum();
                    *y += layer.base_weight(o, j) * act + s;
                }
                tape.pass.push(if xj == raw { T::one() } else { T::zero() });
                tape.admitted.push(xj);
                tape.first.push(a.first);
                tape.basis.push(a.values);
                tape.dbasis.push(d);
            }
            tapes.push(tape);
            cur = out;
        }
        let (value, mut delta) = loss_value(&cur, target, loss)?;

        for (li, layer) in self.layers.iter().enumerate().rev() {
            let tape = &tapes[li];
            let k = layer.spec().order();
            let mut dx = vec![T::zero(); layer.in_dim()];
            for j in 0..layer.in_dim() {
                let xj = tape.admitted[j];
                let act = layer.activation().apply(xj);
                let dact = layer.activation().derivative(xj);
                let first = tape.first[j];
                for (o, &g) in delta.iter().enumerate() {
                    if g == T::zero() {
                        continue;
                    }
                    let base_idx = o * layer.in_dim() + j;
                    grads.base[li][base_idx] += g * act;
                    let start = layer.coeff_index(o, j, first);
                    let mut ds = T::zero();
                    for m in 0..=k {
                        grads.coeffs[li][start + m] += g * tape.basis[j][m];
                        ds += layer.coeffs()[start + m] * tape.dbasis[j][m];
                    }
                    dx[j] += g * (layer.base_weight(o, j) * dact + ds);
                }
                dx[j] *= tape.pass[j];
            }
            delta = dx;
        }
        Ok(value)
    }

    pub fn apply_update(&mut self, step: &Gradients<T>, lr: T) {
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (c, &g) in layer.coeffs_mut().iter_mut().zip(&step.coeffs[li]) {
                *c -= lr * g;
            }
            for (w, &g) in layer.base_weights_mut().iter_mut().zip(&step.base[li]) {
                *w -= lr * g;
            }
        }
    }
}

pub(crate) fn add_grads<T: Scalar>(acc: &mut Gradients<T>, g: &Gradients<T>) {
    acc.add(g)
}

pub(crate) fn scale_grads<T: Scalar>(acc: &mut Gradients<T>, s: T) {
    acc.scale(s)
}

/// Loss value and gradient with respect to the model output.
fn loss_value<T: Scalar>(y: &[T], t: &[T], loss: LossKind) -> Result<(T, Vec<T>), SplineError> {
    if y.len() != t.len() {
        return Err(SplineError::Shape(format!(
            "model has {} outputs but target has {}",
            y.len(),
            t.len()
        )));
    }
    match loss {
        LossKind::Mse => {
            let n = T::from_usize_lossy(y.len().max(1));
            let mut v = T::zero();
            let g = y
                .iter()
                .zip(t)
                .map(|(&a, &b)| {
                    let d = a - b;
                    v += d * d;
                    T::lit(2.0) * d / n
                })
                .collect();
            Ok((v / n, g))
        }
        LossKind::CrossEntropy => {
            let m = y.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = y.iter().map(|&v| (v - m).exp()).collect();
            let z: T = exps.iter().copied().sum();
            let log_z = z.ln() + m;
            let v = t.iter().zip(y).map(|(&ti, &yi)| -ti * (yi - log_z)).sum();
            let tsum: T = t.iter().copied().sum();
            let g = exps.iter().zip(t).map(|(&e, &ti)| tsum * e / z - ti).collect();
            Ok((v, g))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(seed: u64) -> KanModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = BSplineSpec::new(3, 5, -1.0, 1.0).unwrap();
        KanModel::random(&[2, 3, 2], &spec, 0.3, &mut rng).unwrap()
    }

    #[test]
    fn dims_must_chain() {
        let spec = BSplineSpec::new(1, 2, 0.0, 1.0).unwrap();
        let a = KanLayer::zeros(2, 3, spec.clone());
        let b = KanLayer::zeros(2, 1, spec);
        assert!(KanModel::new(vec![a, b]).is_err());
    }

    /// Central differences on a handful of coefficients of each layer.
    fn check_fd(loss: LossKind, target: &[f64]) {
        let model = toy(3);
        let x = [0.3, -0.4];
        let (_, g) = model.sample_loss_and_grad(&x, target, loss).unwrap();
        let h = 1e-5;
        for li in 0..2 {
            for idx in [0, 3, 7, 12, 20] {
                let mut up = model.clone();
                up.layers_mut()[li].coeffs_mut()[idx] += h;
                let mut dn = model.clone();
                dn.layers_mut()[li].coeffs_mut()[idx] -= h;
                let fd = (up.loss(&x, target, loss).unwrap() - dn.loss(&x, target, loss).unwrap())
                    / (2.0 * h);
                let an = g.coeffs[li][idx];
                let scale = fd.abs().max(an.abs()).max(1e-8);
                assert!((fd - an).abs() / scale < 1e-4, "layer {li} idx {idx}: {an} vs {fd}");
            }
            for idx in 0..model.layers()[li].base_weights().len() {
                let mut up = model.clone();
                up.layers_mut()[li].base_weights_mut()[idx] += h;
                let mut dn = model.clone();
                dn.layers_mut()[li].base_weights_mut()[idx] -= h;
                let fd = (up.loss(&x, target, loss).unwrap() - dn.loss(&x, target, loss).unwrap())
                    / (2.0 * h);
                let an = g.base[li][idx];
                assert!((fd - an).abs() < 1e-7 + 1e-4 * fd.abs(), "base {li}/{idx}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        check_fd(LossKind::Mse, &[0.2, -0.1]);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        check_fd(LossKind::CrossEntropy, &[0.0, 1.0]);
    }
}
