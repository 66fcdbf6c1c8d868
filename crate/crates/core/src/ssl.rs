//! Reference contrastive (NT-Xent) and reconstruction losses.
//!
//! Embeddings are laid out pairwise, `(a1, b1, a2, b2, ...)`, so the
//! positive of anchor `i` is `i ^ 1` and every other vector in the batch is
//! a negative. The loss is averaged over all `2N` anchors.

use crate::error::{Error, Result};
use crate::metrics::check_same_grid;
use crate::volume::Volume3D;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    vectors: Vec<Vec<f64>>,
    dim: usize,
    tau: f64,
}

impl EmbeddingBatch {
    /// `vectors` must hold an even number of equal-length finite vectors.
    pub fn new(vectors: Vec<Vec<f64>>, tau: f64) -> Result<Self> {
        if vectors.is_empty() || !vectors.len().is_multiple_of(2) {
            return Err(Error::InvalidBatch(format!(
                "expected a positive even number of vectors, got {}",
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::InvalidBatch("embedding dimension is zero".into()));
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidBatch("vectors differ in dimension".into()));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding component".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidBatch(format!(
                "temperature must be > 0, got {tau}"
            )));
        }
        Ok(Self { vectors, dim, tau })
    }

    /// Interleave `(a_i, b_i)` pairs into a batch.
    pub fn from_pairs(pairs: Vec<(Vec<f64>, Vec<f64>)>, tau: f64) -> Result<Self> {
        let vectors = pairs.into_iter().flat_map(|(a, b)| [a, b]).collect();
        Self::new(vectors, tau)
    }

    pub fn n_pairs(&self) -> usize {
        self.vectors.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// `u·v / (‖u‖‖v‖)`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidBatch("vectors differ in dimension".into()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Forward quantities shared by the loss and its gradient.
struct Forward {
    norms: Vec<f64>,
    sim: Vec<Vec<f64>>,
    /// Softmax over `k != i` of `sim[i][k] / tau`; the diagonal is zero.
    prob: Vec<Vec<f64>>,
    loss: f64,
}

fn forward(batch: &EmbeddingBatch) -> Result<Forward> {
    if batch.n_pairs() < 2 {
        return Err(Error::InvalidBatch(format!(
            "NT-Xent needs at least 2 pairs, got {}",
            batch.n_pairs()
        )));
    }
    let z = &batch.vectors;
    let m = z.len();
    let norms: Vec<f64> = z.iter().map(|v| norm(v)).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut sim = vec![vec![0.0; m]; m];
    for i in 0..m {
        for k in i..m {
            let s = dot(&z[i], &z[k]) / (norms[i] * norms[k]);
            sim[i][k] = s;
            sim[k][i] = s;
        }
    }

    let mut prob = vec![vec![0.0; m]; m];
    let mut total = 0.0;
    for i in 0..m {
        let logits = |k: usize| sim[i][k] / batch.tau;
        let max = (0..m)
            .filter(|&k| k != i)
            .map(logits)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for k in (0..m).filter(|&k| k != i) {
            let e = (logits(k) - max).exp();
            prob[i][k] = e;
            sum += e;
        }
        for p in prob[i].iter_mut() {
            *p /= sum;
        }
        let lse = max + sum.ln();
        total += lse - logits(i ^ 1);
    }
    Ok(Forward {
        norms,
        sim,
        prob,
        loss: total / m as f64,
    })
}

/// Mean NT-Xent loss over all `2N` anchors.
pub fn nt_xent_loss(batch: &EmbeddingBatch) -> Result<f64> {
    forward(batch).map(|f| f.loss)
}

/// Analytic gradient of [`nt_xent_loss`] with respect to every embedding,
/// in batch order.
pub fn nt_xent_grad(batch: &EmbeddingBatch) -> Result<Vec<Vec<f64>>> {
    let f = forward(batch)?;
    let z = &batch.vectors;
    let m = z.len();
    let scale = 1.0 / (m as f64 * batch.tau);
    let mut grad = vec![vec![0.0; batch.dim]; m];

    // dL/ds_ik from anchor i's term, pushed through s_ik = cos(z_i, z_k)
    // into both z_i and z_k.
    for i in 0..m {
        for k in (0..m).filter(|&k| k != i) {
            let positive = if k == i ^ 1 { 1.0 } else { 0.0 };
            let c = scale * (f.prob[i][k] - positive);
            if c == 0.0 {
                continue;
            }
            let s = f.sim[i][k];
            let inv = 1.0 / (f.norms[i] * f.norms[k]);
            let (ni2, nk2) = (f.norms[i] * f.norms[i], f.norms[k] * f.norms[k]);
            for d in 0..batch.dim {
                grad[i][d] += c * (z[k][d] * inv - s * z[i][d] / ni2);
                grad[k][d] += c * (z[i][d] * inv - s * z[k][d] / nk2);
            }
        }
    }
    Ok(grad)
}

/// Contrastive plus reconstruction loss with unit weights.
pub fn combined_loss(contrastive: f64, recon_l1: f64) -> Result<f64> {
    if !contrastive.is_finite() || !recon_l1.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss terms {contrastive}, {recon_l1}"
        )));
    }
    Ok(contrastive + recon_l1)
}

/// Mean absolute voxel difference.
pub fn l1_loss(pred: &Volume3D, target: &Volume3D) -> Result<f64> {
    check_same_grid(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}
