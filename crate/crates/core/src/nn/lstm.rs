//! LSTM cell and bidirectional encoder with exact analytic gradients.

use rand::Rng;

use super::tensor::{
    check_dim, join_name, matvec, matvec_t_add, outer_add, NnError, ParamVisit, Tensor,
};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gate weights stacked [i; f; g; o] along the output axis: `w` is
/// [4H x I], `u` is [4H x H], `b` is [4H].
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
    pub gw: Tensor,
    pub gu: Tensor,
    pub gb: Tensor,
    input: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let fan_in = input + hidden;
        LstmCell {
            w: Tensor::uniform_init(&[4 * hidden, input], fan_in, rng),
            u: Tensor::uniform_init(&[4 * hidden, hidden], fan_in, rng),
            b: Tensor::uniform_init(&[4 * hidden], fan_in, rng),
            gw: Tensor::zeros(&[4 * hidden, input]),
            gu: Tensor::zeros(&[4 * hidden, hidden]),
            gb: Tensor::zeros(&[4 * hidden]),
            input,
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache), NnError> {
        check_dim("lstm input", x.len(), self.input)?;
        check_dim("lstm hidden", h_prev.len(), self.hidden)?;
        let hh = self.hidden;
        let mut z = vec![0.0; 4 * hh];
        matvec(&self.w, x, &mut z);
        let mut zu = vec![0.0; 4 * hh];
        matvec(&self.u, h_prev, &mut zu);
        for ((zi, &ui), &bi) in z.iter_mut().zip(&zu).zip(self.b.data()) {
            *zi += ui + bi;
        }
        let mut gates = vec![0.0; 4 * hh];
        for k in 0..hh {
            gates[k] = sigmoid(z[k]); // input gate
            gates[hh + k] = sigmoid(z[hh + k]); // forget gate
            gates[2 * hh + k] = z[2 * hh + k].tanh(); // candidate
            gates[3 * hh + k] = sigmoid(z[3 * hh + k]); // output gate
        }
        let mut c = vec![0.0; hh];
        let mut tanh_c = vec![0.0; hh];
        let mut h = vec![0.0; hh];
        for k in 0..hh {
            c[k] = gates[hh + k] * c_prev[k] + gates[k] * gates[2 * hh + k];
            tanh_c[k] = c[k].tanh();
            h[k] = gates[3 * hh + k] * tanh_c[k];
        }
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c: tanh_c.clone(),
        };
        Ok((h, c, cache))
    }

    /// Backward through one step; returns (dx, dh_prev, dc_prev).
    pub fn step_backward(
        &mut self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc_in: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hh = self.hidden;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hh];
        let mut dc_prev = vec![0.0; hh];
        for k in 0..hh {
            let (i, f, cand, o) = (g[k], g[hh + k], g[2 * hh + k], g[3 * hh + k]);
            let do_ = dh[k] * cache.tanh_c[k];
            let dc = dc_in[k] + dh[k] * o * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let di = dc * cand;
            let df = dc * cache.c_prev[k];
            let dcand = dc * i;
            dc_prev[k] = dc * f;
            dz[k] = di * i * (1.0 - i);
            dz[hh + k] = df * f * (1.0 - f);
            dz[2 * hh + k] = dcand * (1.0 - cand * cand);
            dz[3 * hh + k] = do_ * o * (1.0 - o);
        }
        outer_add(&mut self.gw, &dz, &cache.x);
        outer_add(&mut self.gu, &dz, &cache.h_prev);
        for (gb, &d) in self.gb.data_mut().iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dx = vec![0.0; self.input];
        matvec_t_add(&self.w, &dz, &mut dx);
        let mut dh_prev = vec![0.0; hh];
        matvec_t_add(&self.u, &dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

impl ParamVisit for LstmCell {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        f(&join_name(prefix, "w"), &mut self.w, &mut self.gw);
        f(&join_name(prefix, "u"), &mut self.u, &mut self.gu);
        f(&join_name(prefix, "b"), &mut self.b, &mut self.gb);
    }
}

/// Bidirectional encoder: output at position i concatenates the forward
/// state over tokens <= i and the backward state over tokens >= i.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

#[derive(Debug)]
pub struct BiLstmCache {
    fwd_steps: Vec<LstmStepCache>,
    bwd_steps: Vec<LstmStepCache>,
    len: usize,
}

impl BiLstm {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            fwd: LstmCell::new(input, hidden, rng),
            bwd: LstmCell::new(input, hidden, rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        2 * self.fwd.hidden()
    }

    pub fn encode(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NnError> {
        Ok(self.encode_cached(xs)?.0)
    }

    pub fn encode_cached(
        &self,
        xs: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, BiLstmCache), NnError> {
        let hh = self.fwd.hidden();
        let mut fwd_h = Vec::with_capacity(xs.len());
        let mut fwd_steps = Vec::with_capacity(xs.len());
        let mut h = vec![0.0; hh];
        let mut c = vec![0.0; hh];
        for x in xs {
            let (nh, nc, cache) = self.fwd.step(x, &h, &c)?;
            fwd_steps.push(cache);
            fwd_h.push(nh.clone());
            h = nh;
            c = nc;
        }
        let mut bwd_h = vec![Vec::new(); xs.len()];
        let mut bwd_steps = Vec::with_capacity(xs.len());
        let mut h = vec![0.0; hh];
        let mut c = vec![0.0; hh];
        for (t, x) in xs.iter().enumerate().rev() {
            let (nh, nc, cache) = self.bwd.step(x, &h, &c)?;
            bwd_steps.push(cache);
            bwd_h[t] = nh.clone();
            h = nh;
            c = nc;
        }
        let ys = fwd_h
            .into_iter()
            .zip(bwd_h)
            .map(|(f, b)| {
                let mut y = f;
                y.extend(b);
                y
            })
            .collect();
        Ok((ys, BiLstmCache { fwd_steps, bwd_steps, len: xs.len() }))
    }

    /// Backward through the whole sequence; returns per-position dx.
    pub fn backward(&mut self, cache: &BiLstmCache, dys: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hh = self.fwd.hidden();
        let t_len = cache.len;
        assert_eq!(dys.len(), t_len);
        let mut dxs = vec![vec![0.0; self.fwd.input()]; t_len];

        let mut dh = vec![0.0; hh];
        let mut dc = vec![0.0; hh];
        for t in (0..t_len).rev() {
            let mut dh_t = dys[t][..hh].to_vec();
            for (a, b) in dh_t.iter_mut().zip(&dh) {
                *a += b;
            }
            let (dx, dh_prev, dc_prev) = self.fwd.step_backward(&cache.fwd_steps[t], &dh_t, &dc);
            for (a, b) in dxs[t].iter_mut().zip(&dx) {
                *a += b;
            }
            dh = dh_prev;
            dc = dc_prev;
        }

        // Backward cell processed positions T-1..0, so its "previous" state
        // lives at the next earlier index of its own trajectory.
        let mut dh = vec![0.0; hh];
        let mut dc = vec![0.0; hh];
        for (step_idx, t) in (0..t_len).enumerate() {
            let mut dh_t = dys[t][hh..].to_vec();
            for (a, b) in dh_t.iter_mut().zip(&dh) {
                *a += b;
            }
            let step_cache = &cache.bwd_steps[t_len - 1 - step_idx];
            let (dx, dh_prev, dc_prev) = self.bwd.step_backward(step_cache, &dh_t, &dc);
            for (a, b) in dxs[t].iter_mut().zip(&dx) {
                *a += b;
            }
            dh = dh_prev;
            dc = dc_prev;
        }
        dxs
    }
}

impl ParamVisit for BiLstm {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        self.fwd.visit_params(&join_name(prefix, "fwd"), f);
        self.bwd.visit_params(&join_name(prefix, "bwd"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn single_token_directions_agree_on_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let net = BiLstm::new(3, 4, &mut rng);
        let x = vec![vec![0.2, -0.4, 0.9]];
        let ys = net.encode(&x).unwrap();
        assert_eq!(ys.len(), 1);
        assert_eq!(ys[0].len(), 8);
        // Each direction sees exactly the one token from a zero state.
        let (hf, _, _) = net.fwd.step(&x[0], &[0.0; 4], &[0.0; 4]).unwrap();
        let (hb, _, _) = net.bwd.step(&x[0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(&ys[0][..4], hf.as_slice());
        assert_eq!(&ys[0][4..], hb.as_slice());
    }

    #[test]
    fn zero_input_zero_weights_gives_gate_closed_form() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut cell = LstmCell::new(2, 3, &mut rng);
        cell.w.fill(0.0);
        cell.u.fill(0.0);
        cell.b.fill(0.0);
        let (h, c, _) = cell.step(&[0.0, 0.0], &[0.0; 3], &[0.0; 3]).unwrap();
        // i = o = 0.5, candidate = tanh(0) = 0 so c = 0 and h = 0.
        assert!(c.iter().all(|v| *v == 0.0));
        assert!(h.iter().all(|v| *v == 0.0));
    }
}
