//! LSTM and GRU cells and the bidirectional encoder built from them.
//!
//! Gate layout follows the usual packed convention: GRU columns are
//! `[reset | update | new]`, LSTM columns are `[input | forget | cell | output]`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

/// Tape handles for one direction's weights.
#[derive(Clone, Copy, Debug)]
pub struct CellVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b_ih: Var,
    pub b_hh: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct RnnState {
    pub h: Var,
    /// Cell memory, LSTM only.
    pub c: Option<Var>,
}

impl RnnState {
    pub fn zeros<T: Real>(tape: &mut Tape<T>, cell: CellKind, hidden: usize) -> Self {
        let h = tape.constant(Tensor::zeros(&[1, hidden]));
        let c = (cell == CellKind::Lstm).then(|| tape.constant(Tensor::zeros(&[1, hidden])));
        RnnState { h, c }
    }
}

/// One recurrence step. `x_proj` is the `[1×G·h]` input projection `x·W_ih`
/// (without bias), precomputed for the whole sequence.
pub fn cell_step<T: Real>(
    tape: &mut Tape<T>,
    cell: CellKind,
    w: &CellVars,
    x_proj: Var,
    state: RnnState,
    hidden: usize,
) -> Result<RnnState> {
    let xb = tape.add(x_proj, w.b_ih)?;
    let hp = tape.matmul(state.h, w.w_hh)?;
    let hb = tape.add(hp, w.b_hh)?;
    let h = hidden;
    match cell {
        CellKind::Gru => {
            let xr = tape.slice_cols(xb, 0, h)?;
            let hr = tape.slice_cols(hb, 0, h)?;
            let r_pre = tape.add(xr, hr)?;
            let r = tape.sigmoid(r_pre);
            let xz = tape.slice_cols(xb, h, 2 * h)?;
            let hz = tape.slice_cols(hb, h, 2 * h)?;
            let z_pre = tape.add(xz, hz)?;
            let z = tape.sigmoid(z_pre);
            let xn = tape.slice_cols(xb, 2 * h, 3 * h)?;
            let hn = tape.slice_cols(hb, 2 * h, 3 * h)?;
            let gated = tape.mul(r, hn)?;
            let n_pre = tape.add(xn, gated)?;
            let n = tape.tanh(n_pre);
            let keep_new = tape.one_minus(z);
            let a = tape.mul(keep_new, n)?;
            let b = tape.mul(z, state.h)?;
            let h_new = tape.add(a, b)?;
            Ok(RnnState { h: h_new, c: None })
        }
        CellKind::Lstm => {
            let c_prev = state
                .c
                .ok_or_else(|| Error::Contract("LSTM step without cell state".into()))?;
            let pre = tape.add(xb, hb)?;
            let gate = |tape: &mut Tape<T>, k: usize| tape.slice_cols(pre, k * h, (k + 1) * h);
            let i_pre = gate(tape, 0)?;
            let f_pre = gate(tape, 1)?;
            let g_pre = gate(tape, 2)?;
            let o_pre = gate(tape, 3)?;
            let i = tape.sigmoid(i_pre);
            let f = tape.sigmoid(f_pre);
            let g = tape.tanh(g_pre);
            let o = tape.sigmoid(o_pre);
            let fc = tape.mul(f, c_prev)?;
            let ig = tape.mul(i, g)?;
            let c = tape.add(fc, ig)?;
            let tc = tape.tanh(c);
            let h_new = tape.mul(o, tc)?;
            Ok(RnnState { h: h_new, c: Some(c) })
        }
    }
}

/// Runs one direction over the unmasked positions of `x: [L×d]`. Masked
/// positions carry the state through unchanged and emit a zero row.
pub fn rnn_pass<T: Real>(
    tape: &mut Tape<T>,
    cell: CellKind,
    w: &CellVars,
    x: Var,
    mask: &[bool],
    hidden: usize,
    reverse: bool,
) -> Result<Var> {
    let (len, _) = tape.value(x).dims2("rnn_pass")?;
    if mask.len() != len {
        return Err(Error::shape("rnn_pass", format!("mask {} for {len} steps", mask.len())));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptySequence("recurrent pass over a fully masked sequence"));
    }
    let x_proj = tape.matmul(x, w.w_ih)?;
    let mut state = RnnState::zeros(tape, cell, hidden);
    let zero_row = tape.constant(Tensor::zeros(&[1, hidden]));
    let mut rows = vec![zero_row; len];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    };
    for t in order.filter(|&t| mask[t]) {
        let xt = tape.row(x_proj, t)?;
        state = cell_step(tape, cell, w, xt, state, hidden)?;
        rows[t] = state.h;
    }
    tape.concat(&rows, 0)
}

/// Bidirectional pass: row `t` of the result is `[forward_t | backward_t]`.
pub fn birnn<T: Real>(
    tape: &mut Tape<T>,
    cell: CellKind,
    fwd: &CellVars,
    bwd: &CellVars,
    x: Var,
    mask: &[bool],
    hidden: usize,
) -> Result<Var> {
    let f = rnn_pass(tape, cell, fwd, x, mask, hidden, false)?;
    let b = rnn_pass(tape, cell, bwd, x, mask, hidden, true)?;
    tape.concat(&[f, b], 1)
}
