//! The shared hemi lookup table (SH-LUT).
//!
//! With the knot grid aligned to the code lattice every knot interval sees
//! the same `K + 1` polynomial pieces sampled at the same local codes, so a
//! single `(K + 1) × L` table serves all basis functions. Uniform B-spline
//! pieces are mirror images of each other (`piece j` at local code `u`
//! equals `piece K-j` at `L-1-u`), so only half of that table is stored.
//! When `L` is odd the central local code is its own mirror; its row keeps
//! the `⌈(K+1)/2⌉` entries that are not duplicates of each other.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::scheme::{QuantMode, QuantScheme};
use crate::error::QuantError;
use crate::scalar::{round_half_even, Scalar};
use crate::spline::BSplineSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShLut {
    order: usize,
    grid: usize,
    mode: QuantMode,
    n_bits: u32,
    codes_per_interval: u32,
    /// Shift for the global/local split (PowerGap only).
    local_bits: Option<u32>,
    value_bits: u32,
    code_range_hi: u32,
    /// Unshared central local code for odd `L`.
    central: Option<u32>,
    entries: Vec<u32>,
}

/// Result of one lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutHit {
    /// Knot interval (global part of the code).
    pub interval: usize,
    /// Position inside the interval (local part of the code).
    pub local: u32,
    /// Values for basis functions `interval ..= interval + K`.
    pub values: Vec<u32>,
}

impl LutHit {
    pub fn indices(&self) -> Range<usize> {
        self.interval..self.interval + self.values.len()
    }
}

/// Quantize a basis value in `[0, 1]` to `full_scale` with round-half-even.
pub fn quantize_value(v: f64, full_scale: u32) -> u32 {
    round_half_even(v * full_scale as f64).clamp(0, full_scale as i64) as u32
}

impl ShLut {
    pub fn build<T: Scalar>(spec: &BSplineSpec<T>, scheme: &QuantScheme) -> Result<Self, QuantError> {
        if !scheme.is_aligned() {
            return Err(QuantError::Invalid(
                "conventional quantization leaves knots misaligned; no shared LUT exists".into(),
            ));
        }
        if scheme.grid != spec.grid() {
            return Err(QuantError::Invalid(format!(
                "scheme solved for G = {} but spline has G = {}",
                scheme.grid,
                spec.grid()
            )));
        }
        let k = spec.order();
        let l = scheme.codes_per_interval();
        let fs = scheme.value_full_scale();
        let half = l / 2;
        let central = (l % 2 == 1).then_some(half);
        let mut entries = Vec::with_capacity(stored_len(k, l));
        // Canonical rows come from interval 0.
        let row = |u: u32| -> Result<Vec<u32>, QuantError> {
            let x = scheme.dequantize(spec, u);
            let a = spec.active(x).map_err(|e| QuantError::Invalid(e.to_string()))?;
            debug_assert_eq!(a.first, 0);
            Ok(a.values.iter().map(|v| quantize_value(v.as_f64(), fs)).collect())
        };
        for u in 0..half {
            entries.extend(row(u)?);
        }
        if let Some(c) = central {
            entries.extend(row(c)?.into_iter().take(k / 2 + 1));
        }
        Ok(Self {
            order: k,
            grid: spec.grid(),
            mode: scheme.mode,
            n_bits: scheme.n_bits,
            codes_per_interval: l,
            local_bits: (scheme.mode == QuantMode::AlignSymPowergap).then_some(scheme.ld),
            value_bits: scheme.value_bits,
            code_range_hi: scheme.code_range_hi,
            central,
            entries,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn codes_per_interval(&self) -> u32 {
        self.codes_per_interval
    }

    pub fn value_bits(&self) -> u32 {
        self.value_bits
    }

    pub fn value_full_scale(&self) -> u32 {
        (1u32 << self.value_bits) - 1
    }

    pub fn code_range_hi(&self) -> u32 {
        self.code_range_hi
    }

    pub fn central(&self) -> Option<u32> {
        self.central
    }

    /// Stored (hemi-shared) entries.
    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn stored_len(&self) -> usize {
        self.entries.len()
    }

    /// Size of the unshared `(K + 1) × L` table.
    pub fn full_len(&self) -> usize {
        (self.order + 1) * self.codes_per_interval as usize
    }

    /// Value of piece `j` (basis `interval + j`) at local code `u`.
    pub fn piece(&self, j: usize, u: u32) -> u32 {
        let k = self.order;
        let l = self.codes_per_interval;
        let half = l / 2;
        let w = k + 1;
        if u < half {
            self.entries[u as usize * w + j]
        } else if Some(u) == self.central {
            self.entries[half as usize * w + j.min(k - j)]
        } else {
            let mu = l - 1 - u;
            self.entries[mu as usize * w + (k - j)]
        }
    }

    /// Split a code into (interval, local code).
    pub fn split(&self, code: u32) -> (usize, u32) {
        match self.local_bits {
            Some(bits) => ((code >> bits) as usize, code & ((1u32 << bits) - 1)),
            None => (
                (code / self.codes_per_interval) as usize,
                code % self.codes_per_interval,
            ),
        }
    }

    pub fn lookup(&self, code: u32) -> Result<LutHit, QuantError> {
        if code > self.code_range_hi {
            return Err(QuantError::CodeOutOfRange {
                code,
                hi: self.code_range_hi,
            });
        }
        let (interval, local) = self.split(code);
        Ok(LutHit {
            interval,
            local,
            values: (0..=self.order).map(|j| self.piece(j, local)).collect(),
        })
    }

    /// Reconstructed full table, `[local code][piece]`.
    pub fn full_table(&self) -> Vec<Vec<u32>> {
        (0..self.codes_per_interval)
            .map(|u| (0..=self.order).map(|j| self.piece(j, u)).collect())
            .collect()
    }

    /// Plain-text dump used for golden files.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sh-lut v1");
        let _ = writeln!(s, "order {}", self.order);
        let _ = writeln!(s, "grid {}", self.grid);
        let _ = writeln!(s, "mode {}", self.mode.name());
        let _ = writeln!(s, "n_bits {}", self.n_bits);
        let _ = writeln!(s, "codes_per_interval {}", self.codes_per_interval);
        let _ = writeln!(
            s,
            "local_bits {}",
            self.local_bits.map_or("none".to_string(), |b| b.to_string())
        );
        let _ = writeln!(s, "value_bits {}", self.value_bits);
        let _ = writeln!(s, "code_range_hi {}", self.code_range_hi);
        let _ = writeln!(
            s,
            "central {}",
            self.central.map_or("none".to_string(), |c| c.to_string())
        );
        let _ = writeln!(s, "entries {}", self.entries.len());
        for row in self.entries.chunks(self.order + 1) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self, QuantError> {
        let bad = |m: String| QuantError::Dump(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("# sh-lut v1") {
            return Err(bad("missing `# sh-lut v1` header".into()));
        }
        let mut field = |name: &str| -> Result<String, QuantError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{name}`")))?;
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            if key != name {
                return Err(bad(format!("expected `{name}`, found `{key}`")));
            }
            Ok(value.trim().to_string())
        };
        fn num<V: std::str::FromStr>(v: &str, name: &str) -> Result<V, QuantError> {
            v.parse().map_err(|_| QuantError::Dump(format!("bad value `{v}` for `{name}`")))
        }
        fn opt(v: &str, name: &str) -> Result<Option<u32>, QuantError> {
            if v == "none" {
                Ok(None)
            } else {
                num(v, name).map(Some)
            }
        }
        let order: usize = num(&field("order")?, "order")?;
        let grid: usize = num(&field("grid")?, "grid")?;
        let mode_s = field("mode")?;
        let mode = QuantMode::parse(&mode_s).ok_or_else(|| bad(format!("unknown mode `{mode_s}`")))?;
        let n_bits = num(&field("n_bits")?, "n_bits")?;
        let codes_per_interval = num(&field("codes_per_interval")?, "codes_per_interval")?;
        let local_bits = opt(&field("local_bits")?, "local_bits")?;
        let value_bits = num(&field("value_bits")?, "value_bits")?;
        let code_range_hi = num(&field("code_range_hi")?, "code_range_hi")?;
        let central = opt(&field("central")?, "central")?;
        let count: usize = num(&field("entries")?, "entries")?;
        let mut entries = Vec::with_capacity(count);
        for line in lines {
            for tok in line.split_whitespace() {
                entries.push(num(tok, "entry")?);
            }
        }
        if entries.len() != count || count != stored_len(order, codes_per_interval) {
            return Err(bad(format!(
                "expected {} entries, found {}",
                stored_len(order, codes_per_interval),
                entries.len()
            )));
        }
        Ok(Self {
            order,
            grid,
            mode,
            n_bits,
            codes_per_interval,
            local_bits,
            value_bits,
            code_range_hi,
            central,
            entries,
        })
    }
}

/// Stored entry count: `⌈(K + 1)·L / 2⌉`.
pub fn stored_len(order: usize, codes_per_interval: u32) -> usize {
    let l = codes_per_interval as usize;
    (l / 2) * (order + 1) + if l % 2 == 1 { order / 2 + 1 } else { 0 }
}

pub fn build_sh_lut<T: Scalar>(spec: &BSplineSpec<T>, scheme: &QuantScheme) -> Result<ShLut, QuantError> {
    ShLut::build(spec, scheme)
}

pub fn lut_lookup(lut: &ShLut, code: u32) -> Result<LutHit, QuantError> {
    lut.lookup(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(k: usize, g: usize, mode: QuantMode) -> (BSplineSpec<f64>, QuantScheme, ShLut) {
        let spec = BSplineSpec::new(k, g, 0.0, 1.0).unwrap();
        let scheme = QuantScheme::new(mode, g, 8).unwrap();
        let lut = ShLut::build(&spec, &scheme).unwrap();
        (spec, scheme, lut)
    }

    #[test]
    fn k3_g5_every_code_matches_direct_quantization() {
        let (spec, scheme, lut) = setup(3, 5, QuantMode::AlignSymPowergap);
        assert_eq!(scheme.ld, 5);
        assert_eq!(scheme.code_range_hi, 159);
        for c in 0..=159 {
            let hit = lut.lookup(c).unwrap();
            let b = spec.basis_eval(scheme.dequantize(&spec, c)).unwrap();
            let want: Vec<u32> = hit.indices().map(|i| quantize_value(b[i], 255)).collect();
            assert_eq!(hit.values, want, "code {c}");
        }
    }

    #[test]
    fn code_100_splits_into_interval_3_local_4() {
        let (spec, scheme, lut) = setup(3, 5, QuantMode::AlignSymPowergap);
        assert_eq!(lut.lookup(0).unwrap().interval, 0);
        assert_eq!(lut.lookup(0).unwrap().local, 0);
        let hit = lut.lookup(100).unwrap();
        assert_eq!((hit.interval, hit.local), (3, 4));
        assert_eq!(hit.indices(), 3..7);
        let b = spec.basis_eval(scheme.dequantize(&spec, 100)).unwrap();
        let nz: Vec<usize> = (0..b.len()).filter(|&i| b[i] > 0.0).collect();
        assert_eq!(nz, vec![3, 4, 5, 6]);
    }

    #[test]
    fn mirror_codes_give_reversed_pieces() {
        for (k, g) in [(3, 5), (2, 7), (4, 3)] {
            let (_, _, lut) = setup(k, g, QuantMode::AlignSym);
            let t = lut.full_table();
            let l = lut.codes_per_interval() as usize;
            for u in 0..l {
                let mut rev = t[l - 1 - u].clone();
                rev.reverse();
                assert_eq!(t[u], rev);
            }
        }
    }

    #[test]
    fn even_grid_stores_exactly_half() {
        let (_, _, lut) = setup(3, 5, QuantMode::AlignSymPowergap);
        assert_eq!(lut.full_len(), 128);
        assert_eq!(lut.stored_len(), 64);
        assert_eq!(lut.central(), None);
    }

    #[test]
    fn odd_grid_keeps_central_entries() {
        // G = 5, n = 8 → L = 51, odd
        let (spec, scheme, lut) = setup(3, 5, QuantMode::AlignSym);
        assert_eq!(scheme.l, 51);
        assert_eq!(lut.central(), Some(25));
        assert!(lut.stored_len() <= lut.full_len().div_ceil(2) + 1);
        for c in 0..=scheme.code_range_hi {
            let hit = lut.lookup(c).unwrap();
            let b = spec.basis_eval(scheme.dequantize(&spec, c)).unwrap();
            let want: Vec<u32> = hit.indices().map(|i| quantize_value(b[i], 255)).collect();
            assert_eq!(hit.values, want, "code {c}");
        }
    }

    #[test]
    fn partition_of_unity_under_quantization() {
        let (_, scheme, lut) = setup(3, 5, QuantMode::AlignSymPowergap);
        let fs = scheme.value_full_scale() as i64;
        for c in 0..=scheme.code_range_hi {
            let s: i64 = lut.lookup(c).unwrap().values.iter().map(|&v| v as i64).sum();
            assert!((s - fs).abs() * 2 <= 4, "code {c}: sum {s}");
        }
    }

    #[test]
    fn out_of_range_code() {
        let (_, _, lut) = setup(3, 5, QuantMode::AlignSymPowergap);
        assert_eq!(lut.lookup(160), Err(QuantError::CodeOutOfRange { code: 160, hi: 159 }));
    }

    #[test]
    fn conventional_has_no_shared_lut() {
        let spec = BSplineSpec::new(3, 5, 0.0, 1.0).unwrap();
        let scheme = QuantScheme::new(QuantMode::Conventional, 5, 8).unwrap();
        assert!(ShLut::build(&spec, &scheme).is_err());
    }

    #[test]
    fn dump_roundtrip() {
        for mode in [QuantMode::AlignSym, QuantMode::AlignSymPowergap] {
            let (_, _, lut) = setup(3, 5, mode);
            let back = ShLut::from_dump(&lut.to_dump()).unwrap();
            assert_eq!(back, lut);
        }
        assert!(ShLut::from_dump("# sh-lut v1\norder 3\n").is_err());
    }
}
