//! Two-layer projection head: input → hidden (tanh) → output, followed by
//! L2 normalization onto the unit sphere. Forward caches everything the
//! manual backward pass needs; parameters update by plain SGD.
//!
//! Checkpoints (`.head`) use the same binary container idiom as the other
//! formats with an f64 payload in the fixed order w1, b1, w2, b2.

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::numeric::norm;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const HEAD_MAGIC: &[u8; 4] = b"SHED";
const HEAD_VERSION: u16 = 1;
const DTYPE_F64: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    w1: Array2<f64>, // hidden×in
    b1: Array1<f64>,
    w2: Array2<f64>, // out×hidden
    b2: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Array2<f64>,
    pub hidden: Array2<f64>, // post-tanh activations
    pub output: Array2<f64>, // unit-norm rows
    prenorm_norms: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ProjectionHead {
    /// Uniform ±1/√fan_in weights, zero biases, deterministic per seed.
    pub fn init(d_in: usize, hidden: usize, d_out: usize, seed: u64) -> Result<Self> {
        if d_in < 1 || hidden < 1 || d_out < 2 {
            return Err(Error::InvalidArgument {
                name: "head dims",
                detail: format!("got in={d_in}, hidden={hidden}, out={d_out}"),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim1 = 1.0 / (d_in as f64).sqrt();
        let lim2 = 1.0 / (hidden as f64).sqrt();
        let w1 = Array2::from_shape_fn((hidden, d_in), |_| rng.random_range(-lim1..lim1));
        let w2 = Array2::from_shape_fn((d_out, hidden), |_| rng.random_range(-lim2..lim2));
        Ok(Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(d_out),
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.ncols(), self.w1.nrows(), self.w2.nrows())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        let (d_in, _, d_out) = self.dims();
        if x.ncols() != d_in {
            return Err(Error::DimensionMismatch {
                context: "head input",
                expected: d_in,
                got: x.ncols(),
            });
        }
        let mut hidden = x.dot(&self.w1.t());
        hidden += &self.b1;
        hidden.mapv_inplace(f64::tanh);
        let mut pre = hidden.dot(&self.w2.t());
        pre += &self.b2;

        let mut norms = Array1::zeros(x.nrows());
        let mut output = Array2::zeros((x.nrows(), d_out));
        for i in 0..x.nrows() {
            let n = norm(pre.row(i));
            if !(n > 1e-12) || !n.is_finite() {
                return Err(Error::NonFinite {
                    context: "projection output norm",
                    index: Some(i),
                });
            }
            norms[i] = n;
            output.row_mut(i).assign(&(&pre.row(i) / n));
        }
        Ok(ForwardCache {
            input: x.to_owned(),
            hidden,
            output,
            prenorm_norms: norms,
        })
    }

    /// Exact gradients of a scalar loss w.r.t. all parameters, given the
    /// loss gradient at the normalized outputs.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<f64>) -> HeadGradients {
        let b = cache.output.nrows();
        let d_out = cache.output.ncols();
        // through normalization: dY = (dZ − (dZ·z) z)/‖y‖
        let mut grad_pre = Array2::zeros((b, d_out));
        for i in 0..b {
            let z = cache.output.row(i);
            let g = grad_output.row(i);
            let radial = g.dot(&z);
            let gp = (&g.to_owned() - &(&z.to_owned() * radial)) / cache.prenorm_norms[i];
            grad_pre.row_mut(i).assign(&gp);
        }
        let gw2 = grad_pre.t().dot(&cache.hidden);
        let gb2 = grad_pre.sum_axis(Axis(0));
        let mut grad_hidden = grad_pre.dot(&self.w2);
        // tanh' = 1 − h²
        grad_hidden.zip_mut_with(&cache.hidden, |g, &h| *g *= 1.0 - h * h);
        let gw1 = grad_hidden.t().dot(&cache.input);
        let gb1 = grad_hidden.sum_axis(Axis(0));
        HeadGradients {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
        }
    }

    pub fn apply_sgd(&mut self, grads: &HeadGradients, learning_rate: f64) {
        self.w1.scaled_add(-learning_rate, &grads.w1);
        self.b1.scaled_add(-learning_rate, &grads.b1);
        self.w2.scaled_add(-learning_rate, &grads.w2);
        self.b2.scaled_add(-learning_rate, &grads.b2);
    }

    /// Maps a whole set; labels and risk tier carry through unchanged.
    pub fn embed(&self, set: &EmbeddingSet) -> Result<EmbeddingSet> {
        let cache = self.forward(set.vectors().view())?;
        EmbeddingSet::new(
            cache.output,
            set.labels().map(|l| l.to_vec()),
            set.risk_tier(),
            true,
        )
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "head parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for w in self.w1.iter_mut() {
            *w = it.next().unwrap();
        }
        for b in self.b1.iter_mut() {
            *b = it.next().unwrap();
        }
        for w in self.w2.iter_mut() {
            *w = it.next().unwrap();
        }
        for b in self.b2.iter_mut() {
            *b = it.next().unwrap();
        }
        Ok(())
    }

    pub fn flatten_grads(grads: &HeadGradients) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(grads.w1.iter());
        out.extend(grads.b1.iter());
        out.extend(grads.w2.iter());
        out.extend(grads.b2.iter());
        out
    }
}

pub fn save_head(head: &ProjectionHead, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let wr = |w: &mut BufWriter<std::fs::File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    let (d_in, hidden, d_out) = head.dims();
    wr(&mut w, HEAD_MAGIC)?;
    wr(&mut w, &HEAD_VERSION.to_le_bytes())?;
    wr(&mut w, &[DTYPE_F64, 0])?;
    wr(&mut w, &(d_in as u32).to_le_bytes())?;
    wr(&mut w, &(hidden as u32).to_le_bytes())?;
    wr(&mut w, &(d_out as u32).to_le_bytes())?;
    for x in head.flatten_params() {
        wr(&mut w, &x.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_head(path: &Path) -> Result<ProjectionHead> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |detail: String| Error::Format {
        what: "head checkpoint",
        detail,
    };
    let mut read_exact = |buf: &mut [u8]| -> Result<()> {
        r.read_exact(buf).map_err(|_| bad("truncated file".into()))
    };
    let mut magic = [0u8; 4];
    read_exact(&mut magic)?;
    if &magic != HEAD_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut u16b = [0u8; 2];
    read_exact(&mut u16b)?;
    if u16::from_le_bytes(u16b) != HEAD_VERSION {
        return Err(bad("unsupported version".into()));
    }
    let mut flags = [0u8; 2];
    read_exact(&mut flags)?;
    if flags[0] != DTYPE_F64 {
        return Err(bad(format!("unsupported dtype tag {}", flags[0])));
    }
    let mut u32b = [0u8; 4];
    read_exact(&mut u32b)?;
    let d_in = u32::from_le_bytes(u32b) as usize;
    read_exact(&mut u32b)?;
    let hidden = u32::from_le_bytes(u32b) as usize;
    read_exact(&mut u32b)?;
    let d_out = u32::from_le_bytes(u32b) as usize;
    let mut head = ProjectionHead::init(d_in, hidden, d_out, 0)?;
    let mut params = vec![0.0; head.num_params()];
    let mut f64b = [0u8; 8];
    for p in params.iter_mut() {
        read_exact(&mut f64b)?;
        *p = f64::from_le_bytes(f64b);
    }
    head.set_params(&params)?;
    Ok(head)
}
