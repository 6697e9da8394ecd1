use rand::Rng;

use super::param::{glorot_uniform, ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Fully connected layer `y = xW + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_weight(format!("{name}.weight"), in_dim, out_dim, rng)?;
        let bias = store.add_zeros(format!("{name}.bias"), &[out_dim])?;
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }
}

#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    w_ir: ParamId,
    w_iz: ParamId,
    w_in: ParamId,
    w_hr: ParamId,
    w_hz: ParamId,
    w_hn: ParamId,
    pub b_ir: ParamId,
    pub b_iz: ParamId,
    pub b_in: ParamId,
    pub b_hr: ParamId,
    pub b_hz: ParamId,
    pub b_hn: ParamId,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (d, h) = (input_dim, hidden_dim);
        let mut w = |store: &mut ParamStore, suffix: &str, fan_in: usize| {
            store.add_weight(format!("{name}.{suffix}"), fan_in, h, rng)
        };
        let w_ir = w(store, "w_ir", d)?;
        let w_iz = w(store, "w_iz", d)?;
        let w_in = w(store, "w_in", d)?;
        let w_hr = w(store, "w_hr", h)?;
        let w_hz = w(store, "w_hz", h)?;
        let w_hn = w(store, "w_hn", h)?;
        let mut b = |suffix: &str| store.add_zeros(format!("{name}.{suffix}"), &[h]);
        Ok(Self {
            input_dim,
            hidden_dim,
            w_ir,
            w_iz,
            w_in,
            w_hr,
            w_hz,
            w_hn,
            b_ir: b("b_ir")?,
            b_iz: b("b_iz")?,
            b_in: b("b_in")?,
            b_hr: b("b_hr")?,
            b_hz: b("b_hz")?,
            b_hn: b("b_hn")?,
        })
    }

    fn gate(&self, tape: &mut Tape, x: Var, wx: ParamId, bx: ParamId, h: Var, wh: ParamId, bh: ParamId) -> Result<(Var, Var)> {
        let wxv = tape.param(wx);
        let bxv = tape.param(bx);
        let whv = tape.param(wh);
        let bhv = tape.param(bh);
        let xi = tape.matmul(x, wxv)?;
        let xi = tape.add_bias(xi, bxv)?;
        let hh = tape.matmul(h, whv)?;
        let hh = tape.add_bias(hh, bhv)?;
        Ok((xi, hh))
    }

    /// One GRU update:
    /// `r = σ(xW_ir + b_ir + hW_hr + b_hr)`, `z = σ(xW_iz + b_iz + hW_hz + b_hz)`,
    /// `n = tanh(xW_in + b_in + r ⊙ (hW_hn + b_hn))`, `h' = (1 − z) ⊙ n + z ⊙ h`.
    pub fn step(&self, tape: &mut Tape, h_prev: Var, x: Var) -> Result<Var> {
        check_hidden(tape, h_prev, self.hidden_dim)?;
        let (xr, hr) = self.gate(tape, x, self.w_ir, self.b_ir, h_prev, self.w_hr, self.b_hr)?;
        let r = tape.add(xr, hr)?;
        let r = tape.sigmoid(r);
        let (xz, hz) = self.gate(tape, x, self.w_iz, self.b_iz, h_prev, self.w_hz, self.b_hz)?;
        let z = tape.add(xz, hz)?;
        let z = tape.sigmoid(z);
        let (xn, hn) = self.gate(tape, x, self.w_in, self.b_in, h_prev, self.w_hn, self.b_hn)?;
        let rh = tape.mul(r, hn)?;
        let n = tape.add(xn, rh)?;
        let n = tape.tanh(n);
        let diff = tape.sub(h_prev, n)?;
        let zd = tape.mul(z, diff)?;
        tape.add(n, zd)
    }
}

/// Elman cell `h' = tanh(h W_h + x W_x + b)`.
#[derive(Debug, Clone)]
pub struct RnnCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_h: ParamId,
    pub w_x: ParamId,
    pub bias: ParamId,
}

impl RnnCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            input_dim,
            hidden_dim,
            w_h: store.add_weight(format!("{name}.w_h"), hidden_dim, hidden_dim, rng)?,
            w_x: store.add_weight(format!("{name}.w_x"), input_dim, hidden_dim, rng)?,
            bias: store.add_zeros(format!("{name}.bias"), &[hidden_dim])?,
        })
    }

    pub fn step(&self, tape: &mut Tape, h_prev: Var, x: Var) -> Result<Var> {
        check_hidden(tape, h_prev, self.hidden_dim)?;
        let wh = tape.param(self.w_h);
        let wx = tape.param(self.w_x);
        let b = tape.param(self.bias);
        let a = tape.matmul(h_prev, wh)?;
        let c = tape.matmul(x, wx)?;
        let s = tape.add(a, c)?;
        let s = tape.add_bias(s, b)?;
        Ok(tape.tanh(s))
    }
}

fn check_hidden(tape: &Tape, h: Var, hidden: usize) -> Result<()> {
    let s = tape.shape(h);
    if s.len() != 2 || s[1] != hidden {
        return Err(Error::dim(format!(
            "hidden state shape {s:?} does not match hidden size {hidden}"
        )));
    }
    Ok(())
}

/// Recurrent core selectable between GRU and plain RNN.
#[derive(Debug, Clone)]
pub enum RecurrentCore {
    Gru(GruCell),
    Rnn(RnnCell),
}

impl RecurrentCore {
    pub fn hidden_dim(&self) -> usize {
        match self {
            RecurrentCore::Gru(c) => c.hidden_dim,
            RecurrentCore::Rnn(c) => c.hidden_dim,
        }
    }

    pub fn step(&self, tape: &mut Tape, h_prev: Var, x: Var) -> Result<Var> {
        match self {
            RecurrentCore::Gru(c) => c.step(tape, h_prev, x),
            RecurrentCore::Rnn(c) => c.step(tape, h_prev, x),
        }
    }
}

/// A bank of equally shaped rectangular kernels.
#[derive(Debug, Clone)]
pub struct RectConv {
    pub kernels: ParamId,
    pub bias: ParamId,
    pub count: usize,
    pub kh: usize,
    pub kw: usize,
}

impl RectConv {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        count: usize,
        kh: usize,
        kw: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let init = glorot_uniform(&[count, 1, kh, kw], kh * kw, count * kh * kw, rng);
        Ok(Self {
            kernels: store.add(format!("{name}.kernels"), init)?,
            bias: store.add_zeros(format!("{name}.bias"), &[count])?,
            count,
            kh,
            kw,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let k = tape.param(self.kernels);
        let b = tape.param(self.bias);
        tape.conv2d(x, k, b)
    }
}
