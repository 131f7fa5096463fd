use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self · x + bias`.
    pub fn affine(&self, x: &[f64], bias: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut s = bias[r];
            for (w, xv) in row.iter().zip(x) {
                s += w * xv;
            }
            *o = s;
        }
    }

    /// `out += selfᵀ · y`.
    pub fn add_transposed_product(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
    }

    /// `self += y ⊗ x`.
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        let cols = self.cols;
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (w, xv) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *w += yr * xv;
            }
        }
    }
}

/// Which cross-layer hidden-state paths are wired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Both layers read both previous hidden states.
    #[default]
    Full,
    /// The audience layer reads the action layer's state, not the reverse.
    SingleDirection,
    /// Two independent recurrent layers.
    None,
}

impl Coupling {
    /// Whether the action layer reads the audience hidden state `g`.
    pub fn action_reads_audience(self) -> bool {
        matches!(self, Coupling::Full)
    }

    /// Whether the audience layer reads the action hidden state `h`.
    pub fn audience_reads_action(self) -> bool {
        matches!(self, Coupling::Full | Coupling::SingleDirection)
    }
}

/// Gate weights of one recurrent layer.
///
/// `w` stacks the input, forget, candidate and output gate matrices (in that
/// order) into `4·hidden` rows. Columns read `[h_prev, g_prev, x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub hidden: usize,
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(hidden: usize, cols: usize) -> Self {
        LayerParams {
            hidden,
            w: Matrix::zeros(4 * hidden, cols),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn input_cols(&self) -> usize {
        self.w.cols
    }

    /// Zeroes the weight columns in `cols`.
    pub fn clear_columns(&mut self, cols: std::ops::Range<usize>) {
        for r in 0..self.w.rows {
            for c in cols.clone() {
                self.w.set(r, c, 0.0);
            }
        }
    }
}

/// Single affine decoder map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(out: usize, input: usize) -> Self {
        Affine {
            w: Matrix::zeros(out, input),
            b: vec![0.0; out],
        }
    }
}

/// Every trainable parameter of the coupled model.
///
/// The same structure doubles as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClstmParams {
    pub coupling: Coupling,
    pub layer_i: LayerParams,
    pub layer_a: LayerParams,
    pub decoder_i: Affine,
    pub decoder_a: Affine,
}

impl ClstmParams {
    pub fn zeros(d1: usize, d2: usize, h1: usize, h2: usize, coupling: Coupling) -> Self {
        ClstmParams {
            coupling,
            layer_i: LayerParams::zeros(h1, h1 + h2 + d1),
            layer_a: LayerParams::zeros(h2, h1 + h2 + d2),
            decoder_i: Affine::zeros(d1, h1),
            decoder_a: Affine::zeros(d2, h2),
        }
    }

    /// Uniform `±1/√fan_in` initialization, seeded.
    pub fn init(d1: usize, d2: usize, h1: usize, h2: usize, coupling: Coupling, seed: u64) -> Self {
        let mut p = Self::zeros(d1, d2, h1, h2, coupling);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], b: &mut [f64], fan_in: usize| {
            let r = 1.0 / (fan_in as f64).sqrt();
            for x in w.iter_mut().chain(b.iter_mut()) {
                *x = rng.gen_range(-r..r);
            }
        };
        fill(&mut p.layer_i.w.data, &mut p.layer_i.b, h1 + h2 + d1);
        fill(&mut p.layer_a.w.data, &mut p.layer_a.b, h1 + h2 + d2);
        fill(&mut p.decoder_i.w.data, &mut p.decoder_i.b, h1);
        fill(&mut p.decoder_a.w.data, &mut p.decoder_a.b, h2);
        p.apply_coupling_mask();
        p
    }

    pub fn d1(&self) -> usize {
        self.decoder_i.w.rows
    }

    pub fn d2(&self) -> usize {
        self.decoder_a.w.rows
    }

    pub fn h1(&self) -> usize {
        self.layer_i.hidden
    }

    pub fn h2(&self) -> usize {
        self.layer_a.hidden
    }

    /// Zeroes the cross-layer columns that the coupling mode leaves unwired.
    pub fn apply_coupling_mask(&mut self) {
        let (h1, h2) = (self.h1(), self.h2());
        if !self.coupling.action_reads_audience() {
            self.layer_i.clear_columns(h1..h1 + h2);
        }
        if !self.coupling.audience_reads_action() {
            self.layer_a.clear_columns(0..h1);
        }
    }

    /// A zero-valued container with the same shapes.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d1(), self.d2(), self.h1(), self.h2(), self.coupling)
    }

    /// Parameter tensors in their fixed serialization order.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            &self.layer_i.w.data,
            &self.layer_i.b,
            &self.layer_a.w.data,
            &self.layer_a.b,
            &self.decoder_i.w.data,
            &self.decoder_i.b,
            &self.decoder_a.w.data,
            &self.decoder_a.b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.layer_i.w.data,
            &mut self.layer_i.b,
            &mut self.layer_a.w.data,
            &mut self.layer_a.b,
            &mut self.decoder_i.w.data,
            &mut self.decoder_i.b,
            &mut self.decoder_a.w.data,
            &mut self.decoder_a.b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn add_assign(&mut self, other: &ClstmParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn same_shape(&self, other: &ClstmParams) -> bool {
        self.coupling == other.coupling
            && self
                .tensors()
                .iter()
                .zip(other.tensors())
                .all(|(a, b)| a.len() == b.len())
            && self.layer_i.w.cols == other.layer_i.w.cols
            && self.layer_a.w.cols == other.layer_a.w.cols
            && self.h1() == other.h1()
            && self.h2() == other.h2()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Rebuilds parameters from a flat vector in [`tensors`](Self::tensors) order.
    pub fn from_flat(
        d1: usize,
        d2: usize,
        h1: usize,
        h2: usize,
        coupling: Coupling,
        flat: &[f64],
    ) -> Result<Self> {
        let mut p = Self::zeros(d1, d2, h1, h2, coupling);
        let n = p.num_params();
        if flat.len() != n {
            return Err(Error::shape("flattened parameters", n, flat.len()));
        }
        let mut off = 0;
        for t in p.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(p)
    }
}

/// Parameter-wise convex combination `(1-λ)·old + λ·new`.
pub fn merge_models(old: &ClstmParams, new: &ClstmParams, lambda: f64) -> Result<ClstmParams> {
    if !old.same_shape(new) {
        return Err(Error::Config("cannot merge models of different shapes".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("merge weight {lambda} outside [0, 1]")));
    }
    let mut out = old.clone();
    if lambda == 0.0 {
        return Ok(out);
    }
    if lambda == 1.0 {
        return Ok(new.clone());
    }
    for (o, n) in out.tensors_mut().into_iter().zip(new.tensors()) {
        for (x, y) in o.iter_mut().zip(n) {
            *x = (1.0 - lambda) * *x + lambda * y;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let p = ClstmParams::init(4, 2, 3, 3, Coupling::Full, 9);
        let q = ClstmParams::from_flat(4, 2, 3, 3, Coupling::Full, &p.flatten()).unwrap();
        assert_eq!(p, q);
        assert!(ClstmParams::from_flat(4, 2, 3, 3, Coupling::Full, &[0.0; 3]).is_err());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let p = ClstmParams::init(40, 11, 16, 16, Coupling::Full, 1);
        let r = 1.0 / ((16 + 16 + 40) as f64).sqrt();
        assert!(p.layer_i.w.data.iter().all(|x| x.abs() <= r));
        assert!(p.layer_i.w.data.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn coupling_mask_clears_cross_columns() {
        let p = ClstmParams::init(4, 2, 3, 2, Coupling::None, 1);
        for r in 0..p.layer_i.w.rows {
            for c in 3..5 {
                assert_eq!(p.layer_i.w.get(r, c), 0.0);
            }
        }
        for r in 0..p.layer_a.w.rows {
            for c in 0..3 {
                assert_eq!(p.layer_a.w.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn merge_examples() {
        let a = ClstmParams::init(4, 2, 3, 3, Coupling::Full, 1);
        let b = ClstmParams::init(4, 2, 3, 3, Coupling::Full, 2);
        assert_eq!(merge_models(&a, &b, 0.0).unwrap(), a);
        assert_eq!(merge_models(&a, &b, 1.0).unwrap(), b);
        let mut two = ClstmParams::zeros(1, 1, 1, 1, Coupling::Full);
        let mut four = two.clone();
        two.decoder_a.b[0] = 2.0;
        four.decoder_a.b[0] = 4.0;
        assert_eq!(merge_models(&two, &four, 0.5).unwrap().decoder_a.b[0], 3.0);
        let c = ClstmParams::init(4, 2, 5, 3, Coupling::Full, 2);
        assert!(merge_models(&a, &c, 0.5).is_err());
    }

    #[test]
    fn merge_is_idempotent_at_zero() {
        let a = ClstmParams::init(4, 2, 3, 3, Coupling::Full, 1);
        let b = ClstmParams::init(4, 2, 3, 3, Coupling::Full, 2);
        let once = merge_models(&a, &b, 0.0).unwrap();
        assert_eq!(merge_models(&once, &b, 0.0).unwrap(), a);
        let proj = merge_models(&a, &b, 1.0).unwrap();
        assert_eq!(merge_models(&proj, &b, 1.0).unwrap(), b);
    }
}
