//! Bit-line IR drop.
//!
//! The bit line is a resistive ladder: an ideal clamp source at `V_clamp`
//! feeds node 0 through one wire segment, and each further row node hangs
//! one segment further away. Cell `k` is a conductance `g[k]` from its
//! read source `V_clamp + d[k]` to node `k`. Everything is solved in
//! deviations `e[k] = v[k] − V_clamp`.

use crate::error::CimError;
use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct LadderSolution {
    /// Current delivered by each cell into the bit line.
    pub currents: Vec<f64>,
    /// Absolute node voltages.
    pub node_voltages: Vec<f64>,
    /// Current drawn by the clamp.
    pub clamp_current: f64,
}

pub trait BitLineSolver: Sync {
    /// `g`: cell conductances (0 = access transistor off), `d`: read voltage
    /// of each cell above the clamp level.
    fn solve(&self, g: &[f64], d: &[f64], wire_r: f64, v_clamp: f64) -> Result<LadderSolution, CimError>;
}

/// O(R) Thomas-algorithm solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct TridiagonalSolver;

pub(crate) fn check_inputs(g: &[f64], d: &[f64], wire_r: f64) -> Result<(), CimError> {
    if g.is_empty() || g.len() != d.len() {
        return Err(CimError::Config(format!(
            "ladder needs matching non-empty vectors, got {} conductances and {} drives",
            g.len(),
            d.len()
        )));
    }
    if g.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || !(wire_r >= 0.0 && wire_r.is_finite()) {
        return Err(CimError::Config("conductances and wire_r must be finite and >= 0".into()));
    }
    if wire_r == 0.0 && g.iter().all(|&x| x == 0.0) {
        return Err(CimError::Degenerate("all cells off and zero wire resistance".into()));
    }
    Ok(())
}

pub(crate) fn assemble(g: &[f64], d: &[f64], e: Vec<f64>, wire_r: f64, v_clamp: f64) -> LadderSolution {
    let currents: Vec<f64> = g.iter().zip(d).zip(&e).map(|((&g, &d), &e)| g * (d - e)).collect();
    let clamp_current = if wire_r > 0.0 { e[0] / wire_r } else { currents.iter().sum() };
    LadderSolution {
        currents,
        node_voltages: e.iter().map(|&e| v_clamp + e).collect(),
        clamp_current,
    }
}

impl BitLineSolver for TridiagonalSolver {
    fn solve(&self, g: &[f64], d: &[f64], wire_r: f64, v_clamp: f64) -> Result<LadderSolution, CimError> {
        check_inputs(g, d, wire_r)?;
        let n = g.len();
        if wire_r == 0.0 {
            return Ok(assemble(g, d, vec![0.0; n], wire_r, v_clamp));
        }
        // KCL scaled by wire_r:
        //   -e[k-1] + (r g[k] + 2) e[k] - e[k+1] = r g[k] d[k], last row has one neighbour.
        let mut diag: Vec<f64> = g.iter().map(|&g| wire_r * g + 2.0).collect();
        diag[n - 1] -= 1.0;
        let off = vec![-1.0; n];
        let rhs: Vec<f64> = g.iter().zip(d).map(|(&g, &d)| wire_r * g * d).collect();
        let e = solve_tridiagonal(&off, &diag, &off, &rhs)
            .ok_or_else(|| CimError::Degenerate("singular ladder".into()))?;
        Ok(assemble(g, d, e, wire_r, v_clamp))
    }
}

pub fn solve_ir_drop(g: &[f64], d: &[f64], wire_r: f64, v_clamp: f64) -> Result<LadderSolution, CimError> {
    TridiagonalSolver.solve(g, d, wire_r, v_clamp)
}
