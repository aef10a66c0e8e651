//! Autoencoder for compressing sparse ternary health vectors into dense
//! embeddings. Mirror-image encoder/decoder, relu hidden layers, tanh output
//! (matching the ternary targets), trained with MSE and Adam.

use std::fs;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::opt::Adam;
use crate::rng::{derive_seed, stage_rng};

#[derive(Debug, Error)]
pub enum AeError {
    #[error("layer dims must decrease strictly from input to latent, got {dims:?}")]
    DimsNotDecreasing { dims: Vec<usize> },
    #[error("input has length {got}, expected {want}")]
    DimMismatch { got: usize, want: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad checkpoint: {message}")]
    BadCheckpoint { message: String },
    #[error("checkpoint input dim {got} does not match vocabulary size {want}")]
    VocabMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out_dim x in_dim
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Encoder/decoder parameters. `dims` is the encoder chain
/// `[input, hidden.., latent]`; the decoder mirrors it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AeParams {
    pub dims: Vec<usize>,
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

impl AeParams {
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(|l| l.w.data.len() + l.b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in self.layers() {
            out.extend_from_slice(&layer.w.data);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter size mismatch");
        let mut off = 0;
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            let wn = layer.w.data.len();
            layer.w.data.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = layer.b.len();
            layer.b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
    }
}

fn glorot_layer(rng: &mut impl Rng, out_dim: usize, in_dim: usize) -> Layer {
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    Layer {
        w: Matrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-bound..bound)),
        b: vec![0.0; out_dim],
    }
}

/// Build mirrored encoder/decoder stacks with Glorot-uniform weights and zero
/// biases, deterministic under `seed`.
pub fn init_ae(
    input_dim: usize,
    hidden_dims: &[usize],
    latent_dim: usize,
    seed: u64,
) -> Result<AeParams, AeError> {
    let mut dims = Vec::with_capacity(hidden_dims.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(hidden_dims);
    dims.push(latent_dim);
    let decreasing = dims.windows(2).all(|p| p[0] > p[1]) && latent_dim >= 1;
    if !decreasing {
        return Err(AeError::DimsNotDecreasing { dims });
    }

    let mut rng = stage_rng(seed, "ae-init");
    let encoder: Vec<Layer> = dims
        .windows(2)
        .map(|p| glorot_layer(&mut rng, p[1], p[0]))
        .collect();
    let decoder: Vec<Layer> = dims
        .windows(2)
        .rev()
        .map(|p| glorot_layer(&mut rng, p[0], p[1]))
        .collect();
    Ok(AeParams {
        dims,
        encoder,
        decoder,
    })
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Forward through the full stack, caching pre-activations and activations
/// for backprop. Activations: relu everywhere except the final decoder layer,
/// which is tanh so reconstructions live in (-1, 1).
struct ForwardCache {
    /// activations[0] = input, activations[l] = output of layer l
    activations: Vec<Vec<f64>>,
    /// pre-activations per layer
    pre: Vec<Vec<f64>>,
}

fn forward_cached(params: &AeParams, x: &[f64]) -> ForwardCache {
    let n_layers = params.encoder.len() + params.decoder.len();
    let mut activations = Vec::with_capacity(n_layers + 1);
    let mut pre = Vec::with_capacity(n_layers);
    activations.push(x.to_vec());
    for (l, layer) in params.layers().enumerate() {
        let mut z = layer.w.matvec(activations.last().unwrap());
        for (zi, bi) in z.iter_mut().zip(&layer.b) {
            *zi += bi;
        }
        let a = if l + 1 == n_layers {
            z.iter().map(|&v| v.tanh()).collect()
        } else {
            z.iter().map(|&v| relu(v)).collect()
        };
        pre.push(z);
        activations.push(a);
    }
    ForwardCache { activations, pre }
}

/// Compress one input to its latent embedding.
pub fn encode(params: &AeParams, x: &[f64]) -> Result<Vec<f64>, AeError> {
    if x.len() != params.input_dim() {
        return Err(AeError::DimMismatch {
            got: x.len(),
            want: params.input_dim(),
        });
    }
    let mut a = x.to_vec();
    for layer in &params.encoder {
        let mut z = layer.w.matvec(&a);
        for (zi, bi) in z.iter_mut().zip(&layer.b) {
            *zi += bi;
        }
        a = z.into_iter().map(relu).collect();
    }
    Ok(a)
}

/// Reconstruct from a latent embedding; output passes through tanh.
pub fn decode(params: &AeParams, z: &[f64]) -> Result<Vec<f64>, AeError> {
    if z.len() != params.latent_dim() {
        return Err(AeError::DimMismatch {
            got: z.len(),
            want: params.latent_dim(),
        });
    }
    let mut a = z.to_vec();
    let last = params.decoder.len() - 1;
    for (l, layer) in params.decoder.iter().enumerate() {
        let mut zv = layer.w.matvec(&a);
        for (zi, bi) in zv.iter_mut().zip(&layer.b) {
            *zi += bi;
        }
        a = if l == last {
            zv.into_iter().map(|v| v.tanh()).collect()
        } else {
            zv.into_iter().map(relu).collect()
        };
    }
    Ok(a)
}

/// Mean over samples of the per-coordinate mean squared reconstruction error.
pub fn ae_loss(params: &AeParams, batch: &[Vec<f64>]) -> Result<f64, AeError> {
    if batch.is_empty() {
        return Err(AeError::EmptyBatch);
    }
    let m = params.input_dim() as f64;
    let mut total = 0.0;
    for x in batch {
        if x.len() != params.input_dim() {
            return Err(AeError::DimMismatch {
                got: x.len(),
                want: params.input_dim(),
            });
        }
        let recon = forward_cached(params, x).activations.pop().unwrap();
        total += x
            .iter()
            .zip(&recon)
            .map(|(xi, ri)| (xi - ri) * (xi - ri))
            .sum::<f64>()
            / m;
    }
    Ok(total / batch.len() as f64)
}

/// Loss plus exact reverse-mode gradient, flattened in the same order as
/// [`AeParams::flatten`].
pub fn loss_and_grad(params: &AeParams, batch: &[Vec<f64>]) -> Result<(f64, Vec<f64>), AeError> {
    if batch.is_empty() {
        return Err(AeError::EmptyBatch);
    }
    let m = params.input_dim() as f64;
    let n = batch.len() as f64;
    let n_layers = params.encoder.len() + params.decoder.len();
    let mut grads: Vec<Layer> = params
        .layers()
        .map(|l| Layer {
            w: Matrix::zeros(l.w.rows, l.w.cols),
            b: vec![0.0; l.b.len()],
        })
        .collect();
    let mut loss = 0.0;

    for x in batch {
        if x.len() != params.input_dim() {
            return Err(AeError::DimMismatch {
                got: x.len(),
                want: params.input_dim(),
            });
        }
        let cache = forward_cached(params, x);
        let recon = &cache.activations[n_layers];
        loss += x
            .iter()
            .zip(recon)
            .map(|(xi, ri)| (xi - ri) * (xi - ri))
            .sum::<f64>()
            / m;

        // dL/da_L for this sample, including the 1/(m*n) batch factors
        let mut g_a: Vec<f64> = recon
            .iter()
            .zip(x)
            .map(|(ri, xi)| 2.0 * (ri - xi) / (m * n))
            .collect();

        for l in (0..n_layers).rev() {
            let layer = if l < params.encoder.len() {
                &params.encoder[l]
            } else {
                &params.decoder[l - params.encoder.len()]
            };
            let g_z: Vec<f64> = if l + 1 == n_layers {
                cache.activations[l + 1]
                    .iter()
                    .zip(&g_a)
                    .map(|(a, g)| g * (1.0 - a * a)) // tanh'
                    .collect()
            } else {
                cache.pre[l]
                    .iter()
                    .zip(&g_a)
                    .map(|(z, g)| if *z > 0.0 { *g } else { 0.0 }) // relu'
                    .collect()
            };
            grads[l].w.add_outer(&g_z, &cache.activations[l], 1.0);
            for (gb, gz) in grads[l].b.iter_mut().zip(&g_z) {
                *gb += gz;
            }
            g_a = layer.w.matvec_t(&g_z);
        }
    }

    let mut flat = Vec::with_capacity(params.n_params());
    for g in &grads {
        flat.extend_from_slice(&g.w.data);
        flat.extend_from_slice(&g.b);
    }
    Ok((loss / n, flat))
}

#[derive(Debug, Clone)]
pub struct AeTrainConfig {
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        AeTrainConfig {
            hidden_dims: vec![2000],
            latent_dim: 500,
            epochs: 100,
            learning_rate: 0.001,
            batch_size: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AeTrainResult {
    pub params: AeParams,
    /// Full-dataset loss before training, then after each epoch.
    pub loss_curve: Vec<f64>,
    pub epochs_run: usize,
}

/// Minibatch Adam over the reconstruction loss. Deterministic under
/// `config.seed`, including the per-epoch shuffle.
pub fn train_ae(dataset: &[Vec<f64>], config: &AeTrainConfig) -> Result<AeTrainResult, AeError> {
    if dataset.is_empty() {
        return Err(AeError::EmptyBatch);
    }
    let input_dim = dataset[0].len();
    let mut params = init_ae(input_dim, &config.hidden_dims, config.latent_dim, config.seed)?;
    let mut flat = params.flatten();
    let mut adam = Adam::new(config.learning_rate, flat.len());

    let mut loss_curve = Vec::with_capacity(config.epochs + 1);
    loss_curve.push(ae_loss(&params, dataset)?);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = stage_rng(derive_seed(config.seed, epoch as u64), "ae-shuffle");
        shuffle(&mut order, &mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| dataset[i].clone()).collect();
            let (loss, grad) = loss_and_grad(&params, &batch)?;
            if !loss.is_finite() {
                return Err(AeError::NonFiniteLoss { epoch });
            }
            adam.step(&mut flat, &grad);
            params.assign_from_flat(&flat);
        }
        let epoch_loss = ae_loss(&params, dataset)?;
        if !epoch_loss.is_finite() {
            return Err(AeError::NonFiniteLoss { epoch });
        }
        loss_curve.push(epoch_loss);
    }

    Ok(AeTrainResult {
        params,
        loss_curve,
        epochs_run: config.epochs,
    })
}

/// Fisher-Yates with our seeded RNG; `rand::seq` shuffles would also work but
/// this keeps the exact stream explicit.
pub(crate) fn shuffle(order: &mut [usize], rng: &mut impl Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

// ---- checkpoint ----

const AE_MAGIC: &[u8; 4] = b"AEC1";

/// Versioned binary checkpoint: dims, seed, epoch, then all weights as
/// little-endian f32.
pub fn save_checkpoint(
    params: &AeParams,
    seed: u64,
    epoch: u32,
    path: &Path,
) -> Result<(), AeError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(AE_MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(&epoch.to_le_bytes());
    buf.extend_from_slice(&(params.dims.len() as u32).to_le_bytes());
    for &d in &params.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for layer in params.layers() {
        for &v in &layer.w.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &v in &layer.b {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| AeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub struct AeCheckpoint {
    pub params: AeParams,
    pub seed: u64,
    pub epoch: u32,
}

pub fn load_checkpoint(path: &Path) -> Result<AeCheckpoint, AeError> {
    let buf = fs::read(path).map_err(|e| AeError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut r = ByteReader::new(&buf);
    if r.take(4)? != &AE_MAGIC[..] {
        return Err(AeError::BadCheckpoint {
            message: "bad magic".into(),
        });
    }
    let version = r.u32()?;
    if version != 1 {
        return Err(AeError::BadCheckpoint {
            message: format!("unsupported version {version}"),
        });
    }
    let seed = r.u64()?;
    let epoch = r.u32()?;
    let n_dims = r.u32()? as usize;
    if n_dims < 2 {
        return Err(AeError::BadCheckpoint {
            message: "need at least input and latent dims".into(),
        });
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(r.u32()? as usize);
    }

    let layer_from = |r: &mut ByteReader, out_dim: usize, in_dim: usize| -> Result<Layer, AeError> {
        let mut w = Matrix::zeros(out_dim, in_dim);
        for v in w.data.iter_mut() {
            *v = f64::from(r.f32()?);
        }
        let mut b = vec![0.0; out_dim];
        for v in b.iter_mut() {
            *v = f64::from(r.f32()?);
        }
        Ok(Layer { w, b })
    };

    let mut encoder = Vec::with_capacity(n_dims - 1);
    for p in dims.windows(2) {
        encoder.push(layer_from(&mut r, p[1], p[0])?);
    }
    let mut decoder = Vec::with_capacity(n_dims - 1);
    let rev: Vec<&[usize]> = dims.windows(2).rev().collect();
    for p in rev {
        decoder.push(layer_from(&mut r, p[0], p[1])?);
    }
    r.expect_end()?;
    Ok(AeCheckpoint {
        params: AeParams {
            dims,
            encoder,
            decoder,
        },
        seed,
        epoch,
    })
}

/// Check a loaded checkpoint against the lexicon it will embed.
pub fn validate_checkpoint_vocab(params: &AeParams, vocab_size: usize) -> Result<(), AeError> {
    if params.input_dim() != vocab_size {
        return Err(AeError::VocabMismatch {
            got: params.input_dim(),
            want: vocab_size,
        });
    }
    Ok(())
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], AeError> {
        if self.pos + n > self.buf.len() {
            return Err(AeError::BadCheckpoint {
                message: "truncated file".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, AeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, AeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32, AeError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn expect_end(&self) -> Result<(), AeError> {
        if self.pos != self.buf.len() {
            return Err(AeError::BadCheckpoint {
                message: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn init_is_deterministic() {
        let a = init_ae(40, &[20], 10, 7).unwrap();
        let b = init_ae(40, &[20], 10, 7).unwrap();
        assert_eq!(a, b);
        let c = init_ae(40, &[20], 10, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn latent_must_be_smaller_than_input() {
        assert!(matches!(
            init_ae(10, &[], 10, 0),
            Err(AeError::DimsNotDecreasing { .. })
        ));
        assert!(matches!(
            init_ae(10, &[12], 3, 0),
            Err(AeError::DimsNotDecreasing { .. })
        ));
    }

    #[test]
    fn decoder_mirrors_encoder_shapes() {
        let p = init_ae(10, &[6], 3, 0).unwrap();
        assert_eq!((p.encoder[0].w.rows, p.encoder[0].w.cols), (6, 10));
        assert_eq!((p.encoder[1].w.rows, p.encoder[1].w.cols), (3, 6));
        assert_eq!((p.decoder[0].w.rows, p.decoder[0].w.cols), (6, 3));
        assert_eq!((p.decoder[1].w.rows, p.decoder[1].w.cols), (10, 6));
    }

    #[test]
    fn zero_input_zero_biases_give_zero_embedding_and_reconstruction() {
        let p = init_ae(10, &[6], 3, 1).unwrap();
        let z = encode(&p, &vec![0.0; 10]).unwrap();
        assert_eq!(z, vec![0.0; 3]);
        let r = decode(&p, &vec![0.0; 3]).unwrap();
        assert_eq!(r, vec![0.0; 10]);
    }

    #[test]
    fn round_trip_has_input_dimension() {
        let p = init_ae(12, &[8], 4, 2).unwrap();
        let x: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let r = decode(&p, &encode(&p, &x).unwrap()).unwrap();
        assert_eq!(r.len(), 12);
        assert!(r.iter().all(|v| v.is_finite() && v.abs() < 1.0));
    }

    #[test]
    fn encode_dim_mismatch_rejected() {
        let p = init_ae(10, &[6], 3, 1).unwrap();
        assert!(matches!(
            encode(&p, &vec![0.0; 9]),
            Err(AeError::DimMismatch { got: 9, want: 10 })
        ));
    }

    #[test]
    fn perfect_reconstruction_gives_zero_loss() {
        // zero inputs reconstruct exactly to zero under zero biases
        let p = init_ae(6, &[4], 2, 3).unwrap();
        let loss = ae_loss(&p, &[vec![0.0; 6], vec![0.0; 6]]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn all_zero_params_one_hot_batch_loss_is_one_over_m() {
        let mut p = init_ae(8, &[4], 2, 0).unwrap();
        let flat = vec![0.0; p.n_params()];
        p.assign_from_flat(&flat);
        let mut batch = Vec::new();
        for i in 0..4 {
            let mut x = vec![0.0; 8];
            x[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
            batch.push(x);
        }
        let loss = ae_loss(&p, &batch).unwrap();
        assert!((loss - 1.0 / 8.0).abs() < 1e-15, "loss {loss}");
    }

    #[test]
    fn loss_matches_scalar_oracle_on_3x4_batch() {
        // brute-force scalar recomputation, no matrix code
        let p = init_ae(4, &[3], 2, 5).unwrap();
        let batch = vec![
            vec![1.0, 0.0, -1.0, 0.0],
            vec![0.0, 1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 0.0, 1.0],
        ];
        let loss = ae_loss(&p, &batch).unwrap();

        let mut expected = 0.0;
        for x in &batch {
            // encoder: two layers of relu, decoder: relu then tanh
            let mut a = x.clone();
            let n_layers = p.encoder.len() + p.decoder.len();
            for (l, layer) in p.encoder.iter().chain(p.decoder.iter()).enumerate() {
                let mut next = vec![0.0; layer.w.rows];
                for r in 0..layer.w.rows {
                    let mut z = layer.b[r];
                    for c in 0..layer.w.cols {
                        z += layer.w.get(r, c) * a[c];
                    }
                    next[r] = if l + 1 == n_layers {
                        z.tanh()
                    } else {
                        z.max(0.0)
                    };
                }
                a = next;
            }
            let mut sq = 0.0;
            for (xi, ri) in x.iter().zip(&a) {
                sq += (xi - ri) * (xi - ri);
            }
            expected += sq / 4.0;
        }
        expected /= 3.0;
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = init_ae(10, &[6], 3, 11).unwrap();
        let mut rng = stage_rng(99, "ae-gradcheck-data");
        let batch: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                (0..10)
                    .map(|_| [-1.0, 0.0, 1.0][rng.gen_range(0..3)])
                    .collect()
            })
            .collect();
        let (_, grad) = loss_and_grad(&p, &batch).unwrap();

        let flat = p.flatten();
        let h = 1e-4;
        let mut ok = 0;
        let mut total = 0;
        for i in 0..flat.len() {
            let mut plus = p.clone();
            let mut f = flat.clone();
            f[i] += h;
            plus.assign_from_flat(&f);
            let mut minus = p.clone();
            f[i] -= 2.0 * h;
            minus.assign_from_flat(&f);
            let fd = (ae_loss(&plus, &batch).unwrap() - ae_loss(&minus, &batch).unwrap())
                / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-8);
            total += 1;
            if (grad[i] - fd).abs() / denom <= 1e-4 {
                ok += 1;
            }
        }
        assert!(
            ok as f64 >= 0.95 * total as f64,
            "only {ok}/{total} coordinates matched"
        );
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let data: Vec<Vec<f64>> = (0..8).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }; 6]).collect();
        let config = AeTrainConfig {
            hidden_dims: vec![4],
            latent_dim: 2,
            epochs: 1,
            learning_rate: 0.0,
            batch_size: 4,
            seed: 3,
        };
        let result = train_ae(&data, &config).unwrap();
        let fresh = init_ae(6, &[4], 2, 3).unwrap();
        assert_eq!(result.params, fresh);
    }

    #[test]
    fn training_is_deterministic_and_loss_improves() {
        let mut rng = stage_rng(5, "ae-train-data");
        // low-rank ternary data: 3 prototype vectors replicated with sign noise
        let protos: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..20).map(|_| [-1.0, 0.0, 1.0][rng.gen_range(0..3)]).collect())
            .collect();
        let data: Vec<Vec<f64>> = (0..60)
            .map(|i| protos[i % 3].clone())
            .collect();
        let config = AeTrainConfig {
            hidden_dims: vec![12],
            latent_dim: 6,
            epochs: 50,
            learning_rate: 0.001,
            batch_size: 16,
            seed: 4,
        };
        let a = train_ae(&data, &config).unwrap();
        let b = train_ae(&data, &config).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.params, b.params);

        let first = a.loss_curve[0];
        let last = *a.loss_curve.last().unwrap();
        assert!(last < first * 0.5, "loss {first} -> {last}");
        // allow <=5% upticks between consecutive epochs
        for pair in a.loss_curve.windows(2) {
            assert!(pair[1] <= pair[0] * 1.05, "uptick {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = init_ae(10, &[6], 3, 17).unwrap();
        let path = dir.path().join("ae.ckpt");
        save_checkpoint(&p, 17, 42, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.seed, 17);
        assert_eq!(loaded.epoch, 42);
        assert_eq!(loaded.params.dims, vec![10, 6, 3]);

        // saving the loaded params reproduces the file byte for byte
        let path2 = dir.path().join("ae2.ckpt");
        save_checkpoint(&loaded.params, loaded.seed, loaded.epoch, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());

        assert!(validate_checkpoint_vocab(&loaded.params, 10).is_ok());
        assert!(matches!(
            validate_checkpoint_vocab(&loaded.params, 11),
            Err(AeError::VocabMismatch { .. })
        ));
    }
}
