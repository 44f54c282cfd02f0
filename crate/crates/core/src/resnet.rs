//! Block residual network `v -> (I + N_{K-1}) o ... o (I + N_0) v`.
//!
//! Every block is a fully connected network with layer widths
//! `[n, w, ..., w, n]`; the activation follows every hidden layer and the
//! output layer is affine. Parameters live in one flat vector, block by block
//! and layer by layer, each layer storing its `out x in` weight matrix
//! (row-major) followed by its bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};
use crate::rng::{stream, Purpose};

const MAGIC: &[u8; 4] = b"MEVM";
const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn id(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    fn from_id(id: u32) -> Result<Self> {
        match id {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Relu),
            _ => Err(EvoError::Format(format!("unknown activation id {id}"))),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a` and input `z`.
    #[inline]
    fn slope(self, a: f64, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub n: usize,
    pub blocks: usize,
    /// Hidden layers per block.
    pub depth: usize,
    pub width: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.blocks == 0 || self.depth == 0 || self.width == 0 {
            return Err(EvoError::InvalidArgument(format!(
                "network sizes must be >= 1, got n={} K={} depth={} width={}",
                self.n, self.blocks, self.depth, self.width
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each layer of one block.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.n];
        widths.extend(std::iter::repeat(self.width).take(self.depth));
        widths.push(self.n);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn block_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn param_count(&self) -> usize {
        self.blocks * self.block_params()
    }
}

/// Gradient of the loss, laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub values: Vec<f64>,
}

impl GradientSet {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResNetModel {
    arch: Architecture,
    seed: u64,
    init_scale: f64,
    params: Vec<f64>,
}

/// Activations of one block kept for the backward pass.
struct BlockTape {
    input: Vec<f64>,
    /// Per layer: pre-activation and output, `rows x fan_out`.
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
}

impl ResNetModel {
    /// Weights `~ N(0, g^2 / fan_in)`, biases zero.
    pub fn init(arch: Architecture, seed: u64, init_scale: f64) -> Result<Self> {
        arch.validate()?;
        if !(init_scale >= 0.0 && init_scale.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "init scale must be >= 0, got {init_scale}"
            )));
        }
        let mut rng = stream(seed, Purpose::Init, 0);
        let mut params = Vec::with_capacity(arch.param_count());
        for _ in 0..arch.blocks {
            for (fan_in, fan_out) in arch.layer_dims() {
                let std = init_scale / (fan_in as f64).sqrt();
                for _ in 0..fan_in * fan_out {
                    let z: f64 = rng.sample(StandardNormal);
                    params.push(std * z);
                }
                params.extend(std::iter::repeat(0.0).take(fan_out));
            }
        }
        Ok(Self {
            arch,
            seed,
            init_scale,
            params,
        })
    }

    pub fn from_params(
        arch: Architecture,
        seed: u64,
        init_scale: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(EvoError::DimensionMismatch {
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(EvoError::InvalidArgument(
                "non-finite model parameter".into(),
            ));
        }
        Ok(Self {
            arch,
            seed,
            init_scale,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn n(&self) -> usize {
        self.arch.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn init_scale(&self) -> f64 {
        self.init_scale
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Zeroes the output layer of every block, making the network the identity.
    pub fn zero_output_layers(&mut self) {
        let dims = self.arch.layer_dims();
        let (fi, fo) = *dims.last().unwrap();
        let bp = self.arch.block_params();
        for b in 0..self.arch.blocks {
            let end = (b + 1) * bp;
            self.params[end - (fi * fo + fo)..end].fill(0.0);
        }
    }

    fn check_rows(&self, x: &[f64]) -> Result<usize> {
        let n = self.arch.n;
        if x.is_empty() || x.len() % n != 0 {
            return Err(EvoError::InvalidArgument(format!(
                "{} values do not form a batch of {n}-vectors",
                x.len()
            )));
        }
        Ok(x.len() / n)
    }

    fn block_forward(
        &self,
        block: usize,
        x: &[f64],
        rows: usize,
        tape: Option<&mut BlockTape>,
    ) -> Result<Vec<f64>> {
        let act = self.arch.activation;
        let dims = self.arch.layer_dims();
        let last = dims.len() - 1;
        let mut offset = block * self.arch.block_params();
        let mut cur: Vec<f64> = x.to_vec();
        let mut zs = Vec::new();
        let mut acts = Vec::new();
        for (l, &(fi, fo)) in dims.iter().enumerate() {
            let w = &self.params[offset..offset + fi * fo];
            let bias = &self.params[offset + fi * fo..offset + fi * fo + fo];
            offset += fi * fo + fo;
            let mut z = vec![0.0; rows * fo];
            for r in 0..rows {
                let a = &cur[r * fi..(r + 1) * fi];
                for o in 0..fo {
                    let wr = &w[o * fi..(o + 1) * fi];
                    let mut s = bias[o];
                    for i in 0..fi {
                        s += wr[i] * a[i];
                    }
                    z[r * fo + o] = s;
                }
            }
            let out: Vec<f64> = if l < last {
                z.iter().map(|&v| act.apply(v)).collect()
            } else {
                z.clone()
            };
            if z.iter().any(|v| !v.is_finite()) {
                return Err(EvoError::NonFinite { block, layer: l });
            }
            if tape.is_some() {
                zs.push(z);
                acts.push(out.clone());
            }
            cur = out;
        }
        let y: Vec<f64> = x.iter().zip(&cur).map(|(a, b)| a + b).collect();
        if let Some(t) = tape {
            t.input = x.to_vec();
            t.z = zs;
            t.a = acts;
        }
        Ok(y)
    }

    /// Row-wise forward pass of a `rows x n` batch.
    pub fn forward_batch(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rows = self.check_rows(x)?;
        let mut cur = x.to_vec();
        for b in 0..self.arch.blocks {
            cur = self.block_forward(b, &cur, rows, None)?;
        }
        Ok(cur)
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.arch.n {
            return Err(EvoError::DimensionMismatch {
                expected: self.arch.n,
                got: v.len(),
            });
        }
        self.forward_batch(v)
    }

    /// Mean squared residual norm over the batch.
    pub fn loss(&self, inputs: &[f64], targets: &[f64]) -> Result<f64> {
        if inputs.len() != targets.len() {
            return Err(EvoError::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let rows = self.check_rows(inputs)?;
        let y = self.forward_batch(inputs)?;
        Ok(mean_sq_residual(&y, targets, rows, self.arch.n))
    }

    /// Loss and its exact gradient.
    pub fn backward(&self, inputs: &[f64], targets: &[f64]) -> Result<(f64, GradientSet)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.backward_into(inputs, targets, &mut grad)?;
        Ok((loss, GradientSet { values: grad }))
    }

    /// Overwrites `grad` with the gradient and returns the loss.
    pub fn backward_into(&self, inputs: &[f64], targets: &[f64], grad: &mut [f64]) -> Result<f64> {
        if inputs.len() != targets.len() {
            return Err(EvoError::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(EvoError::DimensionMismatch {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let n = self.arch.n;
        let rows = self.check_rows(inputs)?;
        let mut tapes = Vec::with_capacity(self.arch.blocks);
        let mut cur = inputs.to_vec();
        for b in 0..self.arch.blocks {
            let mut tape = BlockTape {
                input: Vec::new(),
                z: Vec::new(),
                a: Vec::new(),
            };
            cur = self.block_forward(b, &cur, rows, Some(&mut tape))?;
            tapes.push(tape);
        }
        let loss = mean_sq_residual(&cur, targets, rows, n);

        let act = self.arch.activation;
        let dims = self.arch.layer_dims();
        let bp = self.arch.block_params();
        let scale = 2.0 / rows as f64;
        // dL/d(output of the current block)
        let mut g: Vec<f64> = cur
            .iter()
            .zip(targets)
            .map(|(y, t)| scale * (y - t))
            .collect();
        grad.fill(0.0);
        for b in (0..self.arch.blocks).rev() {
            let tape = &tapes[b];
            let mut delta = g.clone();
            let mut offsets = Vec::with_capacity(dims.len());
            let mut off = b * bp;
            for &(fi, fo) in &dims {
                offsets.push(off);
                off += fi * fo + fo;
            }
            for l in (0..dims.len()).rev() {
                let (fi, fo) = dims[l];
                let off = offsets[l];
                let prev: &[f64] = if l == 0 { &tape.input } else { &tape.a[l - 1] };
                {
                    let (gw, gb) = grad[off..off + fi * fo + fo].split_at_mut(fi * fo);
                    for r in 0..rows {
                        let d = &delta[r * fo..(r + 1) * fo];
                        let p = &prev[r * fi..(r + 1) * fi];
                        for o in 0..fo {
                            let dv = d[o];
                            gb[o] += dv;
                            let row = &mut gw[o * fi..(o + 1) * fi];
                            for i in 0..fi {
                                row[i] += dv * p[i];
                            }
                        }
                    }
                }
                let w = &self.params[off..off + fi * fo];
                let mut back = vec![0.0; rows * fi];
                for r in 0..rows {
                    let d = &delta[r * fo..(r + 1) * fo];
                    let out = &mut back[r * fi..(r + 1) * fi];
                    for o in 0..fo {
                        let dv = d[o];
                        let wr = &w[o * fi..(o + 1) * fi];
                        for i in 0..fi {
                            out[i] += dv * wr[i];
                        }
                    }
                }
                if l > 0 {
                    let (z, a) = (&tape.z[l - 1], &tape.a[l - 1]);
                    for ((bk, a), z) in back.iter_mut().zip(a).zip(z) {
                        *bk *= act.slope(*a, *z);
                    }
                    delta = back;
                } else {
                    // residual connection adds the identity path
                    for (gi, bk) in g.iter_mut().zip(&back) {
                        *gi += bk;
                    }
                }
            }
        }
        Ok(loss)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for v in [
            self.arch.n,
            self.arch.blocks,
            self.arch.depth,
            self.arch.width,
        ] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        w.write_all(&self.arch.activation.id().to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.init_scale.to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_BYTES];
        r.read_exact(&mut header)
            .map_err(|e| truncated(e, "model header"))?;
        if &header[..4] != MAGIC {
            return Err(EvoError::Format("not a model file (bad magic)".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(EvoError::Format(format!(
                "unsupported model version {version}"
            )));
        }
        let arch = Architecture {
            n: u32_at(8) as usize,
            blocks: u32_at(12) as usize,
            depth: u32_at(16) as usize,
            width: u32_at(20) as usize,
            activation: Activation::from_id(u32_at(24))?,
        };
        arch.validate()
            .map_err(|e| EvoError::Format(e.to_string()))?;
        let seed = u64::from_le_bytes(header[28..36].try_into().unwrap());
        let init_scale = f64::from_le_bytes(header[36..44].try_into().unwrap());
        let mut params = vec![0.0; arch.param_count()];
        let mut buf = [0u8; 8];
        for p in params.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|e| truncated(e, "model parameters"))?;
            *p = f64::from_le_bytes(buf);
        }
        if r.read(&mut buf)? != 0 {
            return Err(EvoError::Format(
                "trailing bytes after model parameters".into(),
            ));
        }
        Self::from_params(arch, seed, init_scale, params)
            .map_err(|e| EvoError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }

    pub fn file_size(&self) -> usize {
        HEADER_BYTES + 8 * self.params.len()
    }
}

fn truncated(e: std::io::Error, what: &str) -> EvoError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        EvoError::Format(format!("truncated file while reading {what}"))
    } else {
        EvoError::Io(e)
    }
}

fn mean_sq_residual(y: &[f64], t: &[f64], rows: usize, n: usize) -> f64 {
    let mut total = 0.0;
    for r in 0..rows {
        let mut s = 0.0;
        for i in r * n..(r + 1) * n {
            let d = y[i] - t[i];
            s += d * d;
        }
        total += s;
    }
    total / rows as f64
}

/// `max ||N(v)|| / ||v||` over the nonzero probes (rows of `probes`).
pub fn operator_norm_estimate(model: &ResNetModel, probes: &[f64]) -> Result<f64> {
    let n = model.n();
    let rows: Vec<&[f64]> = probes
        .chunks_exact(n)
        .filter(|v| v.iter().any(|x| *x != 0.0))
        .collect();
    if rows.is_empty() {
        return Err(EvoError::EmptyProbeSet);
    }
    let flat: Vec<f64> = rows.concat();
    let out = model.forward_batch(&flat)?;
    Ok(rows
        .iter()
        .zip(out.chunks_exact(n))
        .map(|(v, y)| crate::basis::l2(y) / crate::basis::l2(v))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(n: usize, blocks: usize, width: usize) -> Architecture {
        Architecture {
            n,
            blocks,
            depth: 3,
            width,
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn paper_architecture_and_init() {
        let a = arch(7, 2, 30);
        assert_eq!(a.layer_dims(), vec![(7, 30), (30, 30), (30, 30), (30, 7)]);
        assert_eq!(
            a.param_count(),
            2 * (7 * 30 + 30 + 2 * (30 * 30 + 30) + 30 * 7 + 7)
        );
        let m = ResNetModel::init(a, 11, 1.0).unwrap();
        let m2 = ResNetModel::init(a, 11, 1.0).unwrap();
        assert_eq!(m, m2);
        let mut off = 0;
        for _ in 0..2 {
            for (fi, fo) in a.layer_dims() {
                off += fi * fo;
                assert!(m.params()[off..off + fo].iter().all(|&b| b == 0.0));
                off += fo;
            }
        }
        assert!(ResNetModel::init(arch(0, 1, 3), 0, 1.0).is_err());
    }

    #[test]
    fn identity_cases() {
        let a = arch(4, 2, 6);
        let z = ResNetModel::from_params(a, 0, 1.0, vec![0.0; a.param_count()]).unwrap();
        let v = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(z.forward(&v).unwrap(), v.to_vec());
        let mut m = ResNetModel::init(a, 3, 1.0).unwrap();
        m.zero_output_layers();
        assert_eq!(m.forward(&v).unwrap(), v.to_vec());
    }

    #[test]
    fn blocks_compose() {
        let a = arch(3, 2, 5);
        let m = ResNetModel::init(a, 5, 1.0).unwrap();
        let single = Architecture { blocks: 1, ..a };
        let bp = a.block_params();
        let f = ResNetModel::from_params(single, 0, 1.0, m.params()[..bp].to_vec()).unwrap();
        let g = ResNetModel::from_params(single, 0, 1.0, m.params()[bp..].to_vec()).unwrap();
        let v = [0.2, -0.4, 0.9];
        assert_eq!(
            m.forward(&v).unwrap(),
            g.forward(&f.forward(&v).unwrap()).unwrap()
        );
    }

    #[test]
    fn loss_definition() {
        let a = arch(3, 1, 4);
        let z = ResNetModel::from_params(a, 0, 1.0, vec![0.0; a.param_count()]).unwrap();
        assert_eq!(z.loss(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let x = [0.0; 6];
        let t = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(z.loss(&x, &t).unwrap(), 2.0);
        let m = ResNetModel::init(a, 1, 1.0).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(m.loss(&x, &m.forward(&x).unwrap()).unwrap(), 0.0);
        assert!(m.loss(&x, &[0.0; 2]).is_err());
    }

    #[test]
    fn batch_matches_rows() {
        let m = ResNetModel::init(arch(3, 2, 8), 2, 1.0).unwrap();
        let x = [0.1, 0.2, 0.3, -0.5, 0.0, 1.5];
        let y = m.forward_batch(&x).unwrap();
        assert_eq!(&y[..3], &m.forward(&x[..3]).unwrap()[..]);
        assert_eq!(&y[3..], &m.forward(&x[3..]).unwrap()[..]);
    }

    #[test]
    fn gradient_is_mean_of_per_sample_gradients() {
        let m = ResNetModel::init(arch(3, 2, 5), 9, 1.0).unwrap();
        let x = [0.1, 0.2, 0.3, -0.5, 0.0, 1.5];
        let t = [0.0, 0.4, 0.3, -0.2, 0.1, 1.0];
        let (l, g) = m.backward(&x, &t).unwrap();
        assert_eq!(l, m.loss(&x, &t).unwrap());
        let (_, g1) = m.backward(&x[..3], &t[..3]).unwrap();
        let (_, g2) = m.backward(&x[3..], &t[3..]).unwrap();
        for i in 0..g.values.len() {
            assert!((g.values[i] - 0.5 * (g1.values[i] + g2.values[i])).abs() < 1e-12);
        }
        let (l0, g0) = m.backward(&x, &m.forward_batch(&x).unwrap()).unwrap();
        assert_eq!(l0, 0.0);
        assert!(g0.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu] {
            let a = Architecture {
                activation: act,
                ..arch(3, 2, 5)
            };
            let mut m = ResNetModel::init(a, 21, 1.0).unwrap();
            // nonzero biases keep ReLU pre-activations away from the kink
            for (i, p) in m.params_mut().iter_mut().enumerate() {
                *p += 0.05 * (i as f64).sin();
            }
            let x = [
                0.1, 0.2, 0.3, -0.5, 0.0, 1.5, 0.7, -0.7, 0.2, 0.0, 0.9, -1.1,
            ];
            let t = [
                0.0, 0.4, 0.3, -0.2, 0.1, 1.0, 0.5, -0.5, 0.1, 0.2, 0.8, -1.0,
            ];
            let (_, g) = m.backward(&x, &t).unwrap();
            let h = 1e-5;
            for i in 0..m.params().len() {
                let mut p = m.clone();
                p.params_mut()[i] += h;
                let up = p.loss(&x, &t).unwrap();
                p.params_mut()[i] -= 2.0 * h;
                let down = p.loss(&x, &t).unwrap();
                let fd = (up - down) / (2.0 * h);
                let err = (fd - g.values[i]).abs() / fd.abs().max(g.values[i].abs()).max(1e-6);
                assert!(err < 1e-6, "{act:?} param {i}: fd {fd} vs {}", g.values[i]);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let m = ResNetModel::init(arch(5, 1, 7), 4, 1.0).unwrap();
        let mut bytes = Vec::new();
        m.write(&mut bytes).unwrap();
        assert_eq!(bytes.len(), m.file_size());
        assert_eq!(
            bytes.len(),
            44 + 8 * (5 * 7 + 7 + 2 * (7 * 7 + 7) + 7 * 5 + 5)
        );
        let back = ResNetModel::read(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        let v = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(back.forward(&v).unwrap(), m.forward(&v).unwrap());
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(
            ResNetModel::read(&mut bad.as_slice()),
            Err(EvoError::Format(_))
        ));
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(
            ResNetModel::read(&mut &cut[..]),
            Err(EvoError::Format(_))
        ));
    }

    #[test]
    fn non_finite_is_located() {
        let a = arch(2, 2, 3);
        let mut m = ResNetModel::init(a, 0, 1.0).unwrap();
        let bp = a.block_params();
        m.params_mut()[bp] = 1e308;
        let err = m.forward(&[1e10, 1.0]).unwrap_err();
        assert!(
            matches!(err, EvoError::NonFinite { block: 1, layer: 0 }),
            "{err:?}"
        );
    }

    #[test]
    fn operator_norm_of_identity_is_one() {
        let a = arch(3, 1, 4);
        let z = ResNetModel::from_params(a, 0, 1.0, vec![0.0; a.param_count()]).unwrap();
        let probes = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, -1.0, 0.5, 0.0];
        assert!((operator_norm_estimate(&z, &probes).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            operator_norm_estimate(&z, &[0.0; 3]),
            Err(EvoError::EmptyProbeSet)
        ));
    }
}
