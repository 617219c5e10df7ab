//! Per-layer gradient sensitivity and percentile grid assignment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SplineError;
use crate::spline::{Dataset, KanModel, LossKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Sensitivity {
    High,
    Medium,
    Low,
}

impl Sensitivity {
    pub fn name(self) -> &'static str {
        match self {
            Self::High => "HIGH",
            Self::Medium => "MEDIUM",
            Self::Low => "LOW",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTemplates {
    pub high: usize,
    pub medium: usize,
    pub low: usize,
}

impl GridTemplates {
    pub fn grid(&self, class: Sensitivity) -> usize {
        match class {
            Sensitivity::High => self.high,
            Sensitivity::Medium => self.medium,
            Sensitivity::Low => self.low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub scores: Vec<f64>,
    pub tau_high: f64,
    pub tau_low: f64,
    pub classes: Vec<Sensitivity>,
}

/// `S_l = mean_samples (1/M_l) sum_j (dLoss/dc_{l,j})^2` over spline
/// coefficients only.
pub fn profile_sensitivity(model: &KanModel<f64>, val: &Dataset<f64>, loss: LossKind) -> Result<Vec<f64>, SplineError> {
    let n_layers = model.layers().len();
    if val.is_empty() {
        return Ok(vec![0.0; n_layers]);
    }
    let per_sample: Vec<Vec<f64>> = (0..val.len())
        .into_par_iter()
        .map(|r| {
            let (_, g) = model.sample_loss_and_grad(val.features(r), val.targets(r), loss)?;
            Ok(g.coeffs
                .iter()
                .map(|c| c.iter().map(|v| v * v).sum::<f64>() / c.len().max(1) as f64)
                .collect())
        })
        .collect::<Result<_, SplineError>>()?;
    let mut s = vec![0.0; n_layers];
    for row in &per_sample {
        s.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    s.iter_mut().for_each(|v| *v /= val.len() as f64);
    Ok(s)
}

/// Nearest rank (1-based, at least 1) of the `percent` point in `len` items.
fn rank(len: usize, percent: usize) -> usize {
    ((len * percent + 50) / 100).clamp(1, len)
}

/// Classify layers: the top third (by descending score) is HIGH, the next
/// third MEDIUM, the rest LOW. Ties at a threshold go to the higher class.
pub fn classify(scores: &[f64]) -> SensitivityProfile {
    if scores.is_empty() {
        return SensitivityProfile { scores: vec![], tau_high: 0.0, tau_low: 0.0, classes: vec![] };
    }
    let mut desc = scores.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let l = desc.len();
    let tau_high = desc[rank(l, 33) - 1];
    let tau_low = desc[rank(l, 67) - 1];
    let classes = scores
        .iter()
        .map(|&s| {
            if s >= tau_high {
                Sensitivity::High
            } else if s >= tau_low {
                Sensitivity::Medium
            } else {
                Sensitivity::Low
            }
        })
        .collect();
    SensitivityProfile { scores: scores.to_vec(), tau_high, tau_low, classes }
}

pub fn assign_grids(profile: &SensitivityProfile, templates: &GridTemplates) -> Vec<usize> {
    profile.classes.iter().map(|&c| templates.grid(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::spline::{BSplineSpec, KanLayer};
    use proptest::prelude::*;
    use rand::Rng;

    const T: GridTemplates = GridTemplates { high: 20, medium: 10, low: 5 };

    #[test]
    fn three_layers_get_three_classes() {
        let p = classify(&[3.0, 2.0, 1.0]);
        assert_eq!(p.classes, vec![Sensitivity::High, Sensitivity::Medium, Sensitivity::Low]);
        assert_eq!(assign_grids(&p, &T), vec![20, 10, 5]);
        let p = classify(&[1.0, 3.0, 2.0]);
        assert_eq!(assign_grids(&p, &T), vec![5, 20, 10]);
    }

    #[test]
    fn constant_scores_all_high() {
        let p = classify(&[0.7; 6]);
        assert!(p.classes.iter().all(|&c| c == Sensitivity::High));
    }

    #[test]
    fn single_layer_is_high() {
        assert_eq!(classify(&[0.0]).classes, vec![Sensitivity::High]);
    }

    fn data(in_dim: usize, out_dim: usize, n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = substream(seed, &[]);
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..in_dim).map(|_| rng.random_range(-0.9..0.9)).collect();
                let y: Vec<f64> = (0..out_dim).map(|o| (x[o % in_dim] * 2.0).sin()).collect();
                (x, y)
            })
            .collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn dead_layer_scores_zero() {
        let spec = BSplineSpec::new(3, 5, -1.0, 1.0).unwrap();
        let mut rng = substream(1, &[]);
        let first = KanLayer::random(2, 2, spec.clone(), 0.5, &mut rng);
        // zero output layer: nothing downstream of layer 0 sees a gradient
        let mut last = KanLayer::zeros(2, 1, spec);
        last.base_weights_mut().iter_mut().for_each(|w| *w = 0.0);
        let m = KanModel::new(vec![first, last]).unwrap();
        let s = profile_sensitivity(&m, &data(2, 1, 40, 2), LossKind::Mse).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(s[1] > 0.0);
    }

    #[test]
    fn identical_branches_score_equal() {
        let spec = BSplineSpec::new(3, 6, -1.0, 1.0).unwrap();
        let branch = KanModel::random(&[2, 3, 1], &spec, 0.4, &mut substream(5, &[])).unwrap();
        let twin = branch.clone();
        let d = data(2, 1, 64, 6);
        let a = profile_sensitivity(&branch, &d, LossKind::Mse).unwrap();
        let b = profile_sensitivity(&twin, &d, LossKind::Mse).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn matches_finite_differences() {
        let spec = BSplineSpec::new(3, 4, -1.0, 1.0).unwrap();
        let m = KanModel::random(&[2, 3, 2, 1], &spec, 0.4, &mut substream(11, &[])).unwrap();
        let d = data(2, 1, 12, 12);
        let s = profile_sensitivity(&m, &d, LossKind::Mse).unwrap();
        let h = 1e-6;
        for (l, &sl) in s.iter().enumerate() {
            let mut acc = 0.0;
            for r in 0..d.len() {
                let (x, t) = (d.features(r), d.targets(r));
                let mut sq = 0.0;
                for c in 0..m.layers()[l].num_coeffs() {
                    let mut p = m.clone();
                    p.layers_mut()[l].coeffs_mut()[c] += h;
                    let lp = p.loss(x, t, LossKind::Mse).unwrap();
                    p.layers_mut()[l].coeffs_mut()[c] -= 2.0 * h;
                    let lm = p.loss(x, t, LossKind::Mse).unwrap();
                    let g = (lp - lm) / (2.0 * h);
                    sq += g * g;
                }
                acc += sq / m.layers()[l].num_coeffs() as f64;
            }
            let fd = acc / d.len() as f64;
            assert!((sl - fd).abs() / fd < 1e-3, "layer {l}: {sl} vs {fd}");
        }
    }

    proptest! {
        #[test]
        fn classes_invariant_to_rescaling(s in prop::collection::vec(0.0f64..10.0, 1..12), k in 1e-3f64..1e3) {
            let scaled: Vec<f64> = s.iter().map(|v| v * k).collect();
            prop_assert_eq!(classify(&s).classes, classify(&scaled).classes);
        }

        #[test]
        fn higher_score_never_lower_class(s in prop::collection::vec(0.0f64..10.0, 1..12)) {
            let p = classify(&s);
            let rank = |c: Sensitivity| match c { Sensitivity::High => 2, Sensitivity::Medium => 1, Sensitivity::Low => 0 };
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if s[i] > s[j] {
                        prop_assert!(rank(p.classes[i]) >= rank(p.classes[j]));
                    }
                }
            }
            prop_assert_eq!(p.classes[s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0], Sensitivity::High);
        }
    }
}
