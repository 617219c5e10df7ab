//! Layer evaluation through the shared LUT instead of exact basis values.

use super::coeffs::{quantize_coeffs, QuantizedCoeffs};
use super::lut::ShLut;
use super::scheme::QuantScheme;
use crate::error::QuantError;
use crate::spline::KanLayer;

/// A layer prepared for the quantized lookup path.
#[derive(Debug, Clone)]
pub struct LutLayer<'a> {
    pub layer: &'a KanLayer<f64>,
    pub scheme: QuantScheme,
    pub lut: ShLut,
    pub coeffs: QuantizedCoeffs,
}

impl<'a> LutLayer<'a> {
    pub fn new(layer: &'a KanLayer<f64>, scheme: QuantScheme) -> Result<Self, QuantError> {
        let lut = ShLut::build(layer.spec(), &scheme)?;
        let coeffs = quantize_coeffs(layer, scheme.coeff_bits)?;
        Ok(Self {
            layer,
            scheme,
            lut,
            coeffs,
        })
    }

    pub fn quantize_inputs(&self, x: &[f64]) -> Vec<u32> {
        x.iter()
            .map(|&v| self.scheme.quantize_input(self.layer.spec(), v))
            .collect()
    }

    fn check(&self, codes: &[u32]) -> Result<(), QuantError> {
        if codes.len() != self.layer.in_dim() {
            return Err(QuantError::Invalid(format!(
                "layer expects {} input codes, got {}",
                self.layer.in_dim(),
                codes.len()
            )));
        }
        Ok(())
    }

    /// Float coefficients times LUT values, plus the float base path at the
    /// dequantized input.
    pub fn forward_codes(&self, codes: &[u32]) -> Result<Vec<f64>, QuantError> {
        self.check(codes)?;
        let fs = self.lut.value_full_scale() as f64;
        let spec = self.layer.spec();
        let mut out = vec![0.0; self.layer.out_dim()];
        for (j, &c) in codes.iter().enumerate() {
            let hit = self.lut.lookup(c)?;
            let x = self.scheme.dequantize(spec, c);
            let act = self.layer.activation().apply(x);
            for (o, y) in out.iter_mut().enumerate() {
                let edge = self.layer.edge(o, j);
                let s: f64 = hit
                    .indices()
                    .zip(&hit.values)
                    .map(|(i, &v)| edge[i] * v as f64 / fs)
                    .sum();
                *y += self.layer.base_weight(o, j) * act + s;
            }
        }
        Ok(out)
    }

    /// Worst-case deviation of [`forward_codes`](Self::forward_codes) from the
    /// exact layer at the dequantized inputs: half an LSB per active term.
    pub fn error_bound(&self, codes: &[u32]) -> Result<Vec<f64>, QuantError> {
        self.check(codes)?;
        let half_lsb = 0.5 / self.lut.value_full_scale() as f64;
        let mut out = vec![0.0; self.layer.out_dim()];
        for (j, &c) in codes.iter().enumerate() {
            let hit = self.lut.lookup(c)?;
            for (o, b) in out.iter_mut().enumerate() {
                let edge = self.layer.edge(o, j);
                *b += hit.indices().map(|i| edge[i].abs() * half_lsb).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Integer spline MAC `Σ_j Σ_i code(c'[o][j][i]) · lut(x_j)[i]` per output.
    pub fn digital_mac(&self, codes: &[u32]) -> Result<Vec<i64>, QuantError> {
        self.check(codes)?;
        let mut out = vec![0i64; self.layer.out_dim()];
        for (j, &c) in codes.iter().enumerate() {
            let hit = self.lut.lookup(c)?;
            for (o, y) in out.iter_mut().enumerate() {
                for (i, &v) in hit.indices().zip(&hit.values) {
                    *y += self.coeffs.codes[self.layer.coeff_index(o, j, i)] as i64 * v as i64;
                }
            }
        }
        Ok(out)
    }

    /// Word-line input per logical crossbar row `j·(K+G) + i`: the LUT value
    /// of basis `i` at input `j`, zero for inactive bases.
    pub fn wordline_codes(&self, codes: &[u32]) -> Result<Vec<u64>, QuantError> {
        self.check(codes)?;
        let nb = self.layer.num_basis();
        let mut out = vec![0u64; codes.len() * nb];
        for (j, &c) in codes.iter().enumerate() {
            let hit = self.lut.lookup(c)?;
            for (i, &v) in hit.indices().zip(&hit.values) {
                out[j * nb + i] = v as u64;
            }
        }
        Ok(out)
    }

    /// Coefficient codes as `[output][logical row]`.
    pub fn crossbar_weights(&self) -> Vec<Vec<i32>> {
        let nb = self.layer.num_basis();
        (0..self.layer.out_dim())
            .map(|o| {
                (0..self.layer.in_dim() * nb)
                    .map(|l| self.coeffs.codes[self.layer.coeff_index(o, l / nb, l % nb)])
                    .collect()
            })
            .collect()
    }

    /// Scale that turns [`digital_mac`](Self::digital_mac) into real units.
    pub fn mac_scale(&self) -> f64 {
        self.coeffs.scale / self.lut.value_full_scale() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haq::QuantMode;
    use crate::spline::BSplineSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lut_path_within_analytical_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (g, mode) in [(5, QuantMode::AlignSymPowergap), (8, QuantMode::AlignSym), (13, QuantMode::AlignSym)] {
            let spec = BSplineSpec::new(3, g, -1.0, 1.0).unwrap();
            let layer = KanLayer::random(3, 2, spec, 1.0, &mut rng);
            let ll = LutLayer::new(&layer, QuantScheme::new(mode, g, 8).unwrap()).unwrap();
            for _ in 0..200 {
                let codes: Vec<u32> = (0..3).map(|_| rng.random_range(0..=ll.scheme.code_range_hi)).collect();
                let x: Vec<f64> = codes.iter().map(|&c| ll.scheme.dequantize(layer.spec(), c)).collect();
                let exact = layer.forward(&x).unwrap();
                let approx = ll.forward_codes(&codes).unwrap();
                let bound = ll.error_bound(&codes).unwrap();
                for o in 0..2 {
                    assert!((exact[o] - approx[o]).abs() <= bound[o] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn digital_mac_matches_dequantized_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = BSplineSpec::new(3, 8, 0.0, 1.0).unwrap();
        let layer = KanLayer::random(2, 1, spec, 1.0, &mut rng);
        let ll = LutLayer::new(&layer, QuantScheme::new(QuantMode::AlignSymPowergap, 8, 8).unwrap()).unwrap();
        let codes = [17, 200];
        let mac = ll.digital_mac(&codes).unwrap()[0] as f64 * ll.mac_scale();
        let mut want = 0.0;
        for (j, &c) in codes.iter().enumerate() {
            let hit = ll.lut.lookup(c).unwrap();
            for (i, &v) in hit.indices().zip(&hit.values) {
                want += ll.coeffs.dequantize(layer.coeff_index(0, j, i)) * v as f64 / 255.0;
            }
        }
        assert!((mac - want).abs() < 1e-12);
    }
}
