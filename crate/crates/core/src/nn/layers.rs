//! Network layers with hand-written reverse-mode gradients.
//!
//! All layers read their weights from a flat parameter vector at offsets
//! reserved through [`ParamRegistry`], and their `backward` methods
//! accumulate (`+=`) into a gradient vector of the same layout, so
//! mini-batch gradients sum naturally across samples.

use super::params::{Init, ParamRegistry};
use super::Scalar;
use crate::tensor::Tensor3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Linear => v,
            Activation::Relu => {
                if v > T::zero() {
                    v
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Derivative as a function of the preactivation (zero at the relu kink).
    #[inline]
    fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Per-cell dense map on a cell grid: every cell `(r, c)` owns its own
/// `c_out x c_in` weight matrix and `c_out` bias. Weight storage is
/// `[cells_rows, cells_cols, c_out, c_in]`, bias `[cells_rows, cells_cols,
/// c_out]`.
#[derive(Clone, Debug)]
pub struct LocallyConnected {
    pub cells_rows: usize,
    pub cells_cols: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub act: Activation,
    pub w_off: usize,
    pub b_off: usize,
}

impl LocallyConnected {
    pub fn register(
        reg: &mut ParamRegistry,
        name: &str,
        cells_rows: usize,
        cells_cols: usize,
        c_in: usize,
        c_out: usize,
        act: Activation,
    ) -> Self {
        let w_off = reg.add(
            format!("{name}.weight"),
            vec![cells_rows, cells_cols, c_out, c_in],
            Init::GlorotUniform {
                fan_in: c_in,
                fan_out: c_out,
            },
        );
        let b_off = reg.add(
            format!("{name}.bias"),
            vec![cells_rows, cells_cols, c_out],
            Init::Zero,
        );
        LocallyConnected {
            cells_rows,
            cells_cols,
            c_in,
            c_out,
            act,
            w_off,
            b_off,
        }
    }

    fn check_input<T>(&self, x: &Tensor3<T>) {
        assert_eq!(
            (x.rows, x.cols, x.channels),
            (self.cells_rows, self.cells_cols, self.c_in),
            "locally-connected input shape mismatch"
        );
    }

    /// Returns `(output, preactivation)`.
    pub fn forward<T: Scalar>(&self, params: &[T], x: &Tensor3<T>) -> (Tensor3<T>, Tensor3<T>) {
        self.check_input(x);
        let mut pre = Tensor3::zeros(self.cells_rows, self.cells_cols, self.c_out);
        for r in 0..self.cells_rows {
            for c in 0..self.cells_cols {
                let cell = r * self.cells_cols + c;
                let w = &params[self.w_off + cell * self.c_out * self.c_in..];
                let b = &params[self.b_off + cell * self.c_out..];
                let xin = x.cell(r, c);
                let out = pre.cell_mut(r, c);
                for o in 0..self.c_out {
                    let wrow = &w[o * self.c_in..(o + 1) * self.c_in];
                    let mut acc = b[o];
                    for (wv, xv) in wrow.iter().zip(xin.iter()) {
                        acc += *wv * *xv;
                    }
                    out[o] = acc;
                }
            }
        }
        let mut out = pre.clone();
        for v in &mut out.data {
            *v = self.act.apply(*v);
        }
        (out, pre)
    }

    /// Accumulates weight/bias gradients into `dparams` and returns the
    /// gradient with respect to the input.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        x: &Tensor3<T>,
        pre: &Tensor3<T>,
        dy: &Tensor3<T>,
        dparams: &mut [T],
    ) -> Tensor3<T> {
        self.check_input(x);
        assert_eq!(
            (dy.rows, dy.cols, dy.channels),
            (self.cells_rows, self.cells_cols, self.c_out),
            "locally-connected cotangent shape mismatch"
        );
        let mut dx = Tensor3::zeros(self.cells_rows, self.cells_cols, self.c_in);
        for r in 0..self.cells_rows {
            for c in 0..self.cells_cols {
                let cell = r * self.cells_cols + c;
                let wbase = self.w_off + cell * self.c_out * self.c_in;
                let bbase = self.b_off + cell * self.c_out;
                let xin = x.cell(r, c);
                let pcell = pre.cell(r, c);
                let dycell = dy.cell(r, c);
                let dxcell = dx.cell_mut(r, c);
                for o in 0..self.c_out {
                    let g = dycell[o] * self.act.derivative(pcell[o]);
                    if g == T::zero() {
                        continue;
                    }
                    dparams[bbase + o] += g;
                    let wrow = &params[wbase + o * self.c_in..wbase + (o + 1) * self.c_in];
                    let dwrow = &mut dparams[wbase + o * self.c_in..wbase + (o + 1) * self.c_in];
                    for i in 0..self.c_in {
                        dwrow[i] += g * xin[i];
                        dxcell[i] += g * wrow[i];
                    }
                }
            }
        }
        dx
    }

    pub fn param_count(&self) -> usize {
        self.cells_rows * self.cells_cols * self.c_out * (self.c_in + 1)
    }
}

/// 2-D convolution with periodic (wrap-around) padding and odd kernel size.
/// Weight storage is `[c_out, c_in, k, k]`, bias `[c_out]`.
#[derive(Clone, Debug)]
pub struct Conv2dPeriodic {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub act: Activation,
    pub w_off: usize,
    pub b_off: usize,
}

impl Conv2dPeriodic {
    pub fn register(
        reg: &mut ParamRegistry,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        act: Activation,
    ) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        let w_off = reg.add(
            format!("{name}.weight"),
            vec![c_out, c_in, k, k],
            Init::GlorotUniform {
                fan_in: c_in * k * k,
                fan_out: c_out * k * k,
            },
        );
        let b_off = reg.add(format!("{name}.bias"), vec![c_out], Init::Zero);
        Conv2dPeriodic {
            c_in,
            c_out,
            k,
            act,
            w_off,
            b_off,
        }
    }

    /// Copy channel `ic` of `x` into a `(rows + 2p) x (cols + 2p)` plane with
    /// periodic padding.
    fn padded_plane<T: Scalar>(&self, x: &Tensor3<T>, ic: usize) -> Vec<T> {
        let p = self.k / 2;
        let (nr, nc) = (x.rows, x.cols);
        let (pr, pc) = (nr + 2 * p, nc + 2 * p);
        let mut plane = vec![T::zero(); pr * pc];
        for rp in 0..pr {
            let r = ((rp as isize - p as isize).rem_euclid(nr as isize)) as usize;
            for cp in 0..pc {
                let c = ((cp as isize - p as isize).rem_euclid(nc as isize)) as usize;
                plane[rp * pc + cp] = x.data[(r * nc + c) * x.channels + ic];
            }
        }
        plane
    }

    /// Returns `(output, preactivation)`.
    pub fn forward<T: Scalar>(&self, params: &[T], x: &Tensor3<T>) -> (Tensor3<T>, Tensor3<T>) {
        assert_eq!(x.channels, self.c_in, "conv input channel mismatch");
        let p = self.k / 2;
        let (nr, nc) = (x.rows, x.cols);
        let pc = nc + 2 * p;
        let padded: Vec<Vec<T>> = (0..self.c_in).map(|ic| self.padded_plane(x, ic)).collect();

        let mut pre = Tensor3::zeros(nr, nc, self.c_out);
        let mut acc = vec![T::zero(); nr * nc];
        for oc in 0..self.c_out {
            let b = params[self.b_off + oc];
            acc.fill(b);
            for (ic, plane) in padded.iter().enumerate() {
                let wbase = self.w_off + (oc * self.c_in + ic) * self.k * self.k;
                for di in 0..self.k {
                    for dj in 0..self.k {
                        let w = params[wbase + di * self.k + dj];
                        if w == T::zero() {
                            continue;
                        }
                        for r in 0..nr {
                            let src = &plane[(r + di) * pc + dj..(r + di) * pc + dj + nc];
                            let dst = &mut acc[r * nc..(r + 1) * nc];
                            for (d, s) in dst.iter_mut().zip(src.iter()) {
                                *d += w * *s;
                            }
                        }
                    }
                }
            }
            for r in 0..nr {
                for c in 0..nc {
                    pre.data[(r * nc + c) * self.c_out + oc] = acc[r * nc + c];
                }
            }
        }
        let mut out = pre.clone();
        for v in &mut out.data {
            *v = self.act.apply(*v);
        }
        (out, pre)
    }

    /// Accumulates weight/bias gradients into `dparams` and returns the
    /// gradient with respect to the input.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        x: &Tensor3<T>,
        pre: &Tensor3<T>,
        dy: &Tensor3<T>,
        dparams: &mut [T],
    ) -> Tensor3<T> {
        assert_eq!(x.channels, self.c_in, "conv input channel mismatch");
        assert_eq!(dy.channels, self.c_out, "conv cotangent channel mismatch");
        let p = self.k / 2;
        let (nr, nc) = (x.rows, x.cols);
        let (pr, pc) = (nr + 2 * p, nc + 2 * p);
        let padded: Vec<Vec<T>> = (0..self.c_in).map(|ic| self.padded_plane(x, ic)).collect();

        // dpre planes, one per output channel.
        let mut dpre = vec![T::zero(); self.c_out * nr * nc];
        for r in 0..nr {
            for c in 0..nc {
                let base = (r * nc + c) * self.c_out;
                for oc in 0..self.c_out {
                    let g = dy.data[base + oc] * self.act.derivative(pre.data[base + oc]);
                    dpre[(oc * nr + r) * nc + c] = g;
                }
            }
        }

        let mut dxpad = vec![T::zero(); self.c_in * pr * pc];
        for oc in 0..self.c_out {
            let dp = &dpre[oc * nr * nc..(oc + 1) * nr * nc];
            let mut bsum = T::zero();
            for v in dp {
                bsum += *v;
            }
            dparams[self.b_off + oc] += bsum;
            for ic in 0..self.c_in {
                let plane = &padded[ic];
                let wbase = self.w_off + (oc * self.c_in + ic) * self.k * self.k;
                let dxp = &mut dxpad[ic * pr * pc..(ic + 1) * pr * pc];
                for di in 0..self.k {
                    for dj in 0..self.k {
                        let w = params[wbase + di * self.k + dj];
                        let mut dw = T::zero();
                        for r in 0..nr {
                            let g_row = &dp[r * nc..(r + 1) * nc];
                            let x_row = &plane[(r + di) * pc + dj..(r + di) * pc + dj + nc];
                            let dx_row = &mut dxp[(r + di) * pc + dj..(r + di) * pc + dj + nc];
                            for i in 0..nc {
                                dw += g_row[i] * x_row[i];
                                dx_row[i] += w * g_row[i];
                            }
                        }
                        dparams[wbase + di * self.k + dj] += dw;
                    }
                }
            }
        }

        // Fold the padded gradient back onto the torus.
        let mut dx = Tensor3::zeros(nr, nc, self.c_in);
        for ic in 0..self.c_in {
            let dxp = &dxpad[ic * pr * pc..(ic + 1) * pr * pc];
            for rp in 0..pr {
                let r = ((rp as isize - p as isize).rem_euclid(nr as isize)) as usize;
                for cp in 0..pc {
                    let c = ((cp as isize - p as isize).rem_euclid(nc as isize)) as usize;
                    dx.data[(r * nc + c) * self.c_in + ic] += dxp[rp * pc + cp];
                }
            }
        }
        dx
    }

    pub fn param_count(&self) -> usize {
        self.c_out * (self.c_in * self.k * self.k + 1)
    }
}

/// Residual unit `out = x + relu(W x + b)` with a locally-connected body.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub body: LocallyConnected,
}

impl ResidualBlock {
    pub fn register(
        reg: &mut ParamRegistry,
        name: &str,
        cells_rows: usize,
        cells_cols: usize,
        channels: usize,
    ) -> Self {
        ResidualBlock {
            body: LocallyConnected::register(
                reg,
                name,
                cells_rows,
                cells_cols,
                channels,
                channels,
                Activation::Relu,
            ),
        }
    }

    /// Returns `(output, body preactivation)`.
    pub fn forward<T: Scalar>(&self, params: &[T], x: &Tensor3<T>) -> (Tensor3<T>, Tensor3<T>) {
        let (body_out, body_pre) = self.body.forward(params, x);
        let mut out = x.clone();
        for (o, b) in out.data.iter_mut().zip(body_out.data.iter()) {
            *o += *b;
        }
        (out, body_pre)
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        x: &Tensor3<T>,
        pre: &Tensor3<T>,
        dy: &Tensor3<T>,
        dparams: &mut [T],
    ) -> Tensor3<T> {
        let mut dx = self.body.backward(params, x, pre, dy, dparams);
        for (d, g) in dx.data.iter_mut().zip(dy.data.iter()) {
            *d += *g;
        }
        dx
    }
}
