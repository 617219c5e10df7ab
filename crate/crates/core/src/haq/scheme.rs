//! Alignment constraints between the knot grid and the input code lattice.

use serde::{Deserialize, Serialize};

use crate::error::QuantError;
use crate::spline::BSplineSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantMode {
    /// Affine input quantization over the whole domain, knots not aligned.
    Conventional,
    /// `L` codes per knot interval, `G·L <= 2^n`.
    AlignSym,
    /// `2^LD` codes per knot interval, `G·2^LD <= 2^n`.
    AlignSymPowergap,
}

impl QuantMode {
    pub fn name(self) -> &'static str {
        match self {
            QuantMode::Conventional => "conventional",
            QuantMode::AlignSym => "align_sym",
            QuantMode::AlignSymPowergap => "align_sym_powergap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "conventional" => Some(QuantMode::Conventional),
            "align_sym" => Some(QuantMode::AlignSym),
            "align_sym_powergap" => Some(QuantMode::AlignSymPowergap),
            _ => None,
        }
    }
}

/// Largest `L >= 1` with `G·L <= 2^n`.
pub fn solve_l(grid: usize, n_bits: u32) -> Result<u32, QuantError> {
    check_bits(n_bits)?;
    let span = 1u64 << n_bits;
    let l = if grid == 0 { 0 } else { span / grid as u64 };
    if l == 0 {
        return Err(QuantError::Infeasible { grid, bits: n_bits });
    }
    Ok(l as u32)
}

/// Largest `LD >= 0` with `G·2^LD <= 2^n`.
pub fn solve_ld(grid: usize, n_bits: u32) -> Result<u32, QuantError> {
    let l = solve_l(grid, n_bits)?;
    Ok(31 - l.leading_zeros())
}

fn check_bits(n_bits: u32) -> Result<(), QuantError> {
    if (1..=24).contains(&n_bits) {
        Ok(())
    } else {
        Err(QuantError::Invalid(format!("input width must be 1..=24 bits, got {n_bits}")))
    }
}

/// Solved quantization contract for one spline grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantScheme {
    pub n_bits: u32,
    pub grid: usize,
    pub mode: QuantMode,
    /// Integer-multiple solution (`L`).
    pub l: u32,
    /// Power-of-two exponent solution (`D` = `LD`).
    pub ld: u32,
    pub code_range_hi: u32,
    /// Bit width of stored basis values.
    pub value_bits: u32,
    pub coeff_bits: u32,
}

impl QuantScheme {
    pub fn new(mode: QuantMode, grid: usize, n_bits: u32) -> Result<Self, QuantError> {
        let l = solve_l(grid, n_bits)?;
        let ld = solve_ld(grid, n_bits)?;
        let code_range_hi = match mode {
            QuantMode::Conventional => ((1u64 << n_bits) - 1) as u32,
            QuantMode::AlignSym => grid as u32 * l - 1,
            QuantMode::AlignSymPowergap => (grid as u32) * (1u32 << ld) - 1,
        };
        Ok(Self {
            n_bits,
            grid,
            mode,
            l,
            ld,
            code_range_hi,
            value_bits: n_bits.min(16),
            coeff_bits: 8,
        })
    }

    pub fn with_value_bits(mut self, bits: u32) -> Result<Self, QuantError> {
        if !(1..=16).contains(&bits) {
            return Err(QuantError::Invalid(format!("value width must be 1..=16 bits, got {bits}")));
        }
        self.value_bits = bits;
        Ok(self)
    }

    pub fn with_coeff_bits(mut self, bits: u32) -> Result<Self, QuantError> {
        if !(2..=16).contains(&bits) {
            return Err(QuantError::Invalid(format!("coefficient width must be 2..=16 bits, got {bits}")));
        }
        self.coeff_bits = bits;
        Ok(self)
    }

    /// Codes per knot interval; nominal `floor(2^n / G)` for the conventional mode.
    pub fn codes_per_interval(&self) -> u32 {
        match self.mode {
            QuantMode::Conventional | QuantMode::AlignSym => self.l,
            QuantMode::AlignSymPowergap => 1 << self.ld,
        }
    }

    pub fn is_aligned(&self) -> bool {
        self.mode != QuantMode::Conventional
    }

    pub fn num_codes(&self) -> u32 {
        self.code_range_hi + 1
    }

    /// Full-scale integer that represents a basis value of 1.0.
    pub fn value_full_scale(&self) -> u32 {
        (1u32 << self.value_bits) - 1
    }

    /// Input value represented by `code`.
    ///
    /// Aligned modes place codes at cell centres, `L` cells per knot
    /// interval, so the local pattern is mirror symmetric.
    pub fn dequantize<T: Scalar>(&self, spec: &BSplineSpec<T>, code: u32) -> T {
        match self.mode {
            QuantMode::Conventional => {
                let steps = T::from_usize_lossy(self.code_range_hi as usize);
                spec.lo() + (spec.hi() - spec.lo()) * T::from_usize_lossy(code as usize) / steps
            }
            _ => {
                let cells = T::from_usize_lossy(self.num_codes() as usize);
                spec.lo()
                    + (spec.hi() - spec.lo()) * (T::from_usize_lossy(code as usize) + T::lit(0.5)) / cells
            }
        }
    }

    /// Nearest code for an input value (clamped to the code range).
    pub fn quantize_input<T: Scalar>(&self, spec: &BSplineSpec<T>, x: T) -> u32 {
        let pos = ((x - spec.lo()) / (spec.hi() - spec.lo())).as_f64();
        let v = match self.mode {
            QuantMode::Conventional => pos * self.code_range_hi as f64,
            _ => pos * self.num_codes() as f64 - 0.5,
        };
        crate::scalar::round_half_even(v).clamp(0, self.code_range_hi as i64) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_l(g: u64, n: u32) -> Option<u32> {
        (1..=(1u64 << n)).filter(|l| g * l <= 1 << n).max().map(|l| l as u32)
    }

    fn brute_ld(g: u64, n: u32) -> Option<u32> {
        (0..=n).filter(|d| g << d <= 1 << n).max()
    }

    #[test]
    fn published_examples() {
        assert_eq!(solve_l(5, 8).unwrap(), 51);
        assert_eq!(QuantScheme::new(QuantMode::AlignSym, 5, 8).unwrap().code_range_hi, 254);
        assert_eq!(solve_l(8, 8).unwrap(), 32);
        assert_eq!(solve_l(256, 8).unwrap(), 1);
        assert_eq!(solve_ld(5, 8).unwrap(), 5);
        assert_eq!(QuantScheme::new(QuantMode::AlignSymPowergap, 5, 8).unwrap().code_range_hi, 159);
        assert_eq!(solve_ld(8, 8).unwrap(), 5);
        assert_eq!(QuantScheme::new(QuantMode::AlignSymPowergap, 8, 8).unwrap().code_range_hi, 255);
        assert_eq!(solve_ld(64, 8).unwrap(), 2);
    }

    #[test]
    fn infeasible_grid() {
        assert_eq!(solve_l(257, 8), Err(QuantError::Infeasible { grid: 257, bits: 8 }));
        assert!(solve_ld(0, 8).is_err());
    }

    #[test]
    fn solvers_match_enumeration() {
        for n in 4..=12u32 {
            for g in 1..=(1u64 << n) {
                assert_eq!(solve_l(g as usize, n).ok(), brute_l(g, n), "L g={g} n={n}");
                assert_eq!(solve_ld(g as usize, n).ok(), brute_ld(g, n), "LD g={g} n={n}");
            }
        }
    }

    #[test]
    fn input_quantization_roundtrip() {
        let spec = BSplineSpec::new(3, 5, -1.0_f64, 1.0).unwrap();
        for mode in [QuantMode::Conventional, QuantMode::AlignSym, QuantMode::AlignSymPowergap] {
            let s = QuantScheme::new(mode, 5, 8).unwrap();
            for c in 0..=s.code_range_hi {
                assert_eq!(s.quantize_input(&spec, s.dequantize(&spec, c)), c);
            }
            assert_eq!(s.quantize_input(&spec, 5.0), s.code_range_hi);
            assert_eq!(s.quantize_input(&spec, -5.0), 0);
        }
    }
}
