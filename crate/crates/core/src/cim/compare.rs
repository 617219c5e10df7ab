//! Monte Carlo comparison of the three word-line encoders.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderConfig, EncoderScheme, TransferFn};
use crate::error::CimError;
use crate::rng::substream;

const COMPARE_TAG: u64 = 0x636d70;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub n_values: Vec<u32>,
    pub sigmas: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub transfer: TransferFn,
    pub v_max: f64,
    pub unit_pulse: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            n_values: vec![1, 2, 3, 4],
            sigmas: vec![0.0, 0.001, 0.002, 0.004, 0.008],
            trials: 10_000,
            seed: 0,
            transfer: TransferFn::default(),
            v_max: 0.9,
            unit_pulse: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderStats {
    pub scheme: EncoderScheme,
    pub n: u32,
    pub sigma: f64,
    pub max_err: u64,
    pub mean_err: f64,
    pub latency_units: u64,
    pub dac_levels: usize,
    pub delay_chain: u64,
}

/// Decode error of one noisy conversion. Segment `k` of every scheme sees
/// the same offset `sigma · z[k]`.
fn trial_error(enc: &EncoderConfig, x: u64, z: [f64; 2]) -> Result<u64, CimError> {
    let train = enc.encode(x)?;
    let dv = [enc.voltage_noise_sigma * z[0], enc.voltage_noise_sigma * z[1]];
    let q = enc.physical_charge(&train, &dv);
    let decoded = q.round().clamp(0.0, enc.max_input() as f64) as u64;
    Ok(decoded.abs_diff(x))
}

pub fn compare_encoders(cfg: &CompareConfig) -> Result<Vec<EncoderStats>, CimError> {
    if cfg.trials == 0 {
        return Err(CimError::Config("trials must be positive".into()));
    }
    let mut out = Vec::new();
    for &n in &cfg.n_values {
        // (x, z) per trial, shared by every scheme and sigma
        let draws: Vec<(u64, [f64; 2])> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(cfg.seed, &[COMPARE_TAG, n as u64, t]);
                let x = rng.random_range(0..1u64 << (2 * n));
                (x, [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            })
            .collect();
        for scheme in EncoderScheme::ALL {
            let base = EncoderConfig::new(scheme, n, cfg.transfer, cfg.v_max, cfg.unit_pulse)?;
            for &sigma in &cfg.sigmas {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(CimError::Config(format!("noise sigma {sigma} must be >= 0")));
                }
                let enc = base.clone().with_noise(sigma);
                let errs = draws
                    .par_iter()
                    .map(|&(x, z)| trial_error(&enc, x, z))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(EncoderStats {
                    scheme,
                    n,
                    sigma,
                    max_err: errs.iter().copied().max().unwrap_or(0),
                    mean_err: errs.iter().sum::<u64>() as f64 / errs.len() as f64,
                    latency_units: scheme.latency_units(n),
                    dac_levels: scheme.dac_levels(n),
                    delay_chain: scheme.delay_chain_len(n),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_encoder_csv<W: Write>(w: W, stats: &[EncoderStats]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scheme", "N", "sigma", "max_err", "mean_err", "latency_units", "dac_levels", "delay_chain"])?;
    for s in stats {
        wr.write_record([
            s.scheme.name().to_string(),
            s.n.to_string(),
            s.sigma.to_string(),
            s.max_err.to_string(),
            format!("{:.6}", s.mean_err),
            s.latency_units.to_string(),
            s.dac_levels.to_string(),
            s.delay_chain.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pick(stats: &[EncoderStats], scheme: EncoderScheme, n: u32, sigma: f64) -> &EncoderStats {
        stats.iter().find(|s| s.scheme == scheme && s.n == n && s.sigma == sigma).unwrap()
    }

    #[test]
    fn zero_noise_is_exact() {
        let cfg = CompareConfig { sigmas: vec![0.0], trials: 500, ..Default::default() };
        for s in compare_encoders(&cfg).unwrap() {
            assert_eq!(s.max_err, 0, "{s:?}");
        }
    }

    #[test]
    fn structural_columns() {
        let cfg = CompareConfig { sigmas: vec![0.0], trials: 1, ..Default::default() };
        let st = compare_encoders(&cfg).unwrap();
        let p = pick(&st, EncoderScheme::PurePwm, 3, 0.0).latency_units as f64;
        let t = pick(&st, EncoderScheme::Tmdv, 3, 0.0).latency_units as f64;
        assert!((p / t - 64.0 / 9.0).abs() < 1e-12);
        assert_eq!(pick(&st, EncoderScheme::Tmdv, 1, 0.0).dac_levels, 2);
        assert_eq!(pick(&st, EncoderScheme::PureVoltage, 1, 0.0).dac_levels, 4);
    }

    #[test]
    fn error_grows_with_noise() {
        let cfg = CompareConfig { trials: 2000, ..Default::default() };
        let st = compare_encoders(&cfg).unwrap();
        for scheme in EncoderScheme::ALL {
            for n in 1..=4 {
                let errs: Vec<u64> = cfg.sigmas.iter().map(|&s| pick(&st, scheme, n, s).max_err).collect();
                assert!(errs.windows(2).all(|w| w[0] <= w[1]), "{scheme:?} N={n}: {errs:?}");
            }
        }
    }

    #[test]
    fn csv_shape() {
        let cfg = CompareConfig { n_values: vec![2], sigmas: vec![0.0], trials: 3, ..Default::default() };
        let mut buf = Vec::new();
        write_encoder_csv(&mut buf, &compare_encoders(&cfg).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("scheme,N,sigma,max_err"));
    }
}
