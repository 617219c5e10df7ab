//! Versioned JSON checkpoints.
//!
//! ```json
//! { "format": "kan-cim-checkpoint", "version": 1,
//!   "layers": [ { "in_dim": 2, "out_dim": 1, "order": 3, "grid": 5,
//!                 "domain": [0.0, 1.0], "activation": "relu", "policy": "clamp",
//!                 "coeffs": [...], "base_weights": [...] } ] }
//! ```
//! `coeffs` is row-major `[out_dim][in_dim][order + grid]`, `base_weights`
//! is row-major `[out_dim][in_dim]`. Numbers are written in shortest
//! round-trip decimal form, so reloading is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::basis::BSplineSpec;
use super::layer::{BaseActivation, DomainPolicy, KanLayer};
use super::model::KanModel;
use crate::error::CheckpointError;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "kan-cim-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    order: usize,
    grid: usize,
    domain: [f64; 2],
    activation: BaseActivation,
    policy: DomainPolicy,
    coeffs: Vec<f64>,
    base_weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointRecord {
    format: String,
    version: u32,
    layers: Vec<LayerRecord>,
}

pub fn to_json<T: Scalar>(model: &KanModel<T>) -> String {
    let rec = CheckpointRecord {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        layers: model
            .layers()
            .iter()
            .map(|l| LayerRecord {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                order: l.spec().order(),
                grid: l.spec().grid(),
                domain: [l.spec().lo().as_f64(), l.spec().hi().as_f64()],
                activation: l.activation(),
                policy: l.policy(),
                coeffs: l.coeffs().iter().map(|v| v.as_f64()).collect(),
                base_weights: l.base_weights().iter().map(|v| v.as_f64()).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&rec).expect("checkpoint serializes")
}

pub fn from_json<T: Scalar>(text: &str) -> Result<KanModel<T>, CheckpointError> {
    let rec: CheckpointRecord =
        serde_json::from_str(text).map_err(|e| CheckpointError::Format(e.to_string()))?;
    if rec.format != CHECKPOINT_FORMAT {
        return Err(CheckpointError::Format(format!("unknown format tag `{}`", rec.format)));
    }
    if rec.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(rec.version));
    }
    let layers = rec
        .layers
        .into_iter()
        .map(|l| {
            let spec = BSplineSpec::new(l.order, l.grid, T::lit(l.domain[0]), T::lit(l.domain[1]))?;
            let layer = KanLayer::from_parts(
                l.in_dim,
                l.out_dim,
                spec,
                l.coeffs.into_iter().map(T::lit).collect(),
                l.base_weights.into_iter().map(T::lit).collect(),
            )?;
            Ok(layer.with_activation(l.activation).with_policy(l.policy))
        })
        .collect::<Result<Vec<_>, CheckpointError>>()?;
    Ok(KanModel::new(layers)?)
}

pub fn save<T: Scalar>(model: &KanModel<T>, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_json(model))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<KanModel<T>, CheckpointError> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = BSplineSpec::new(2, 4, -1.0, 1.0).unwrap();
        let model = KanModel::<f64>::random(&[3, 2, 1], &spec, 0.7, &mut rng).unwrap();
        let back: KanModel<f64> = from_json(&to_json(&model)).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let spec = BSplineSpec::new(1, 2, 0.0, 1.0).unwrap();
        let model = KanModel::new(vec![KanLayer::<f64>::zeros(1, 1, spec)]).unwrap();
        let text = to_json(&model);
        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(from_json::<f64>(&bumped), Err(CheckpointError::Version(9))));
        let broken = text.replace("\"grid\": 2", "\"grid\": 3");
        assert!(from_json::<f64>(&broken).is_err());
    }
}
