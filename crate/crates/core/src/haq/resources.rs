//! Count-based hardware inventory for the B(X) lookup path.

use serde::{Deserialize, Serialize};

use super::lut::stored_len;
use super::scheme::{QuantMode, QuantScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MuxKind {
    Mux,
    Demux,
}

/// `count` switches of `ways`-to-1 (MUX) or 1-to-`ways` (DEMUX).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxGroup {
    pub kind: MuxKind,
    pub ways: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub lut_entries: u64,
    pub mux_inventory: Vec<MuxGroup>,
    pub decoder_bits: Vec<u32>,
}

impl ResourceCount {
    pub fn mux_ways_total(&self) -> u64 {
        self.mux_inventory.iter().map(|m| m.ways * m.count).sum()
    }

    /// Σ 2^bits over the decoders (output-line count).
    pub fn decoder_lines(&self) -> u64 {
        self.decoder_bits.iter().map(|&b| 1u64 << b).sum()
    }
}

/// Conventional baseline: one full-range LUT, one `2L`-to-1 MUX per basis
/// function and a single `n`-bit decoder.
fn conventional(scheme: &QuantScheme, order: usize) -> ResourceCount {
    let nb = (order + scheme.grid) as u64;
    ResourceCount {
        lut_entries: nb << scheme.n_bits,
        mux_inventory: vec![MuxGroup {
            kind: MuxKind::Mux,
            ways: 2 * scheme.codes_per_interval() as u64,
            count: nb,
        }],
        decoder_bits: vec![scheme.n_bits],
    }
}

/// `(baseline, optimized)` inventories for `scheme` at spline order `order`.
pub fn count_resources(scheme: &QuantScheme, order: usize) -> (ResourceCount, ResourceCount) {
    let baseline = conventional(scheme, order);
    let l = scheme.codes_per_interval();
    let pieces = (order + 1) as u64;
    let optimized = match scheme.mode {
        QuantMode::Conventional => baseline.clone(),
        QuantMode::AlignSym => ResourceCount {
            lut_entries: stored_len(order, l) as u64,
            mux_inventory: baseline.mux_inventory.clone(),
            decoder_bits: vec![scheme.n_bits],
        },
        QuantMode::AlignSymPowergap => ResourceCount {
            lut_entries: stored_len(order, l) as u64,
            mux_inventory: vec![
                MuxGroup {
                    kind: MuxKind::Mux,
                    ways: l as u64,
                    count: pieces,
                },
                MuxGroup {
                    kind: MuxKind::Demux,
                    ways: pieces + 1,
                    count: pieces,
                },
            ],
            decoder_bits: vec![scheme.n_bits - scheme.ld, scheme.ld],
        },
    };
    (baseline, optimized)
}

/// Baseline / optimized LUT entry ratio.
pub fn lut_reduction_ratio(scheme: &QuantScheme, order: usize) -> f64 {
    let (b, o) = count_resources(scheme, order);
    b.lut_entries as f64 / o.lut_entries as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k3_g5_lut_entries() {
        let s = QuantScheme::new(QuantMode::AlignSymPowergap, 5, 8).unwrap();
        let (b, o) = count_resources(&s, 3);
        assert_eq!(b.lut_entries, 2048);
        assert_eq!(o.lut_entries, 64);
        assert_eq!(lut_reduction_ratio(&s, 3), 32.0);
        assert_eq!(b.decoder_bits, vec![8]);
        assert_eq!(o.decoder_bits, vec![3, 5]);
    }

    #[test]
    fn k3_g8_mux_inventory() {
        let s = QuantScheme::new(QuantMode::AlignSymPowergap, 8, 8).unwrap();
        let (_, o) = count_resources(&s, 3);
        assert_eq!(
            o.mux_inventory,
            vec![
                MuxGroup { kind: MuxKind::Mux, ways: 32, count: 4 },
                MuxGroup { kind: MuxKind::Demux, ways: 5, count: 4 },
            ]
        );
    }

    #[test]
    fn conventional_self_comparison() {
        let s = QuantScheme::new(QuantMode::Conventional, 8, 8).unwrap();
        assert_eq!(lut_reduction_ratio(&s, 3), 1.0);
    }

    #[test]
    fn ratio_at_least_ten_and_growing() {
        let mut prev = 0.0;
        for g in [8, 16, 32, 64] {
            let s = QuantScheme::new(QuantMode::AlignSymPowergap, g, 8).unwrap();
            let r = lut_reduction_ratio(&s, 3);
            assert!(r >= 10.0 && r > prev, "G={g}: {r}");
            prev = r;
        }
    }

    #[test]
    fn decoder_split_is_smaller() {
        for d in 1..=7u32 {
            assert!((1u64 << 8) > (1u64 << (8 - d)) + (1u64 << d));
        }
    }

    #[test]
    fn optimized_never_exceeds_baseline() {
        for g in 1..=256usize {
            for mode in [QuantMode::AlignSym, QuantMode::AlignSymPowergap] {
                let s = QuantScheme::new(mode, g, 8).unwrap();
                let (b, o) = count_resources(&s, 3);
                assert!(o.lut_entries < b.lut_entries);
            }
        }
    }
}
