use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self · x`
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    /// `out += selfᵀ · y`
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                axpy(yr, self.row(r), out);
            }
        }
    }

    /// `self += y · xᵀ`
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                axpy(yr, x, self.row_mut(r));
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab: usize,
    pub d: usize,
    pub h: usize,
}

pub const NUM_CLASSES: usize = 4;

/// All trainable weights. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// V × d token embeddings.
    pub embed: Matrix,
    /// h × 2d, acting on `[e_t ; mean(e_1..e_t)]`.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// V × h next-token head.
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// 4 × h noise-kind head.
    pub wc: Matrix,
    pub bc: Vec<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims { vocab, d, h } = dims;
        ModelParams {
            embed: Matrix::zeros(vocab, d),
            w1: Matrix::zeros(h, 2 * d),
            b1: vec![0.0; h],
            w2: Matrix::zeros(vocab, h),
            b2: vec![0.0; vocab],
            wc: Matrix::zeros(NUM_CLASSES, h),
            bc: vec![0.0; NUM_CLASSES],
        }
    }

    /// Weights ~ U(-0.1, 0.1) from a seeded ChaCha8 stream (embed, w1, w2, wc
    /// in that order); biases zero.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in [&mut p.embed, &mut p.w1, &mut p.w2, &mut p.wc] {
            for x in &mut m.data {
                *x = rng.gen_range(-0.1..0.1);
            }
        }
        p
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab: self.embed.rows,
            d: self.embed.cols,
            h: self.w1.rows,
        }
    }

    /// Flat views in serialization order: embed, w1, b1, w2, b2, wc, bc.
    pub fn tensors(&self) -> [&[f64]; 7] {
        [
            &self.embed.data,
            &self.w1.data,
            &self.b1,
            &self.w2.data,
            &self.b2,
            &self.wc.data,
            &self.bc,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 7] {
        [
            &mut self.embed.data,
            &mut self.w1.data,
            &mut self.b1,
            &mut self.w2.data,
            &mut self.b2,
            &mut self.wc.data,
            &mut self.bc,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// `self += alpha · other`
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(alpha, src, dst);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}
