//! Behavioral analog compute-in-memory fabric.

mod compare;
mod crossbar;
mod encoder;
mod ladder;
mod mac;

pub use compare::{compare_encoders, write_encoder_csv, CompareConfig, EncoderStats};
pub use crossbar::{CrossbarConfig, MAX_ROWS};
pub use encoder::{
    calibrate_dac, calibrate_dac_with_unit, encode_input, ideal_charge, EncoderConfig, EncoderMode, EncoderScheme,
    PulseTrain, Segment, TransferFn,
};
pub use ladder::{solve_ir_drop, BitLineSolver, LadderSolution, TridiagonalSolver};
pub use mac::{simulate_mac, simulate_mac_with, CrossbarState, MacResult, SLICE_BITS};
