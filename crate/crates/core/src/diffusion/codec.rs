//! Small convolutional autoencoder standing in for the latent codec, plus an
//! identity mode for debugging.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::nn::Conv;
use super::params::{Grads, Init, ParamId, ParamSet};
use super::tape::{ConvSpec, NodeId, Tape};
use super::tensor::{Real, Tensor};
use crate::error::Result;
use crate::image::Image;
use crate::math::sqrt;
use crate::rng::{stream, Stream};

pub const IMAGE_SIZE: usize = 64;
pub const LATENT_CHANNELS: usize = 4;
pub const DOWNSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    #[default]
    Conv,
    /// The latent is the image itself.
    Identity,
}

#[derive(Debug, Clone)]
struct Layout {
    enc: [Conv; 4],
    dec: [Conv; 5],
}

#[derive(Debug, Clone)]
pub struct LatentCodec<T> {
    pub mode: CodecMode,
    pub image_shape: [usize; 3],
    pub latent_shape: [usize; 3],
    pub params: ParamSet<T>,
    layout: Option<Layout>,
    mean: ParamId,
    std: ParamId,
}

/// HWC image to CHW tensor.
pub fn image_to_tensor<T: Real>(img: &Image) -> Tensor<T> {
    let [w, h, c] = img.dims();
    let mut data = Vec::with_capacity(w * h * c);
    for ch in 0..c {
        for v in 0..h {
            for u in 0..w {
                data.push(T::from_f64(img.get(u, v, ch) as f64));
            }
        }
    }
    Tensor { shape: [c, h, w], data }
}

/// CHW tensor to HWC image, clipped to [0, 1].
pub fn tensor_to_image<T: Real>(t: &Tensor<T>) -> Image {
    let [c, h, w] = t.shape;
    let mut data = vec![0.0f32; w * h * c];
    for ch in 0..c {
        for v in 0..h {
            for u in 0..w {
                let x = t.data[(ch * h + v) * w + u].to_f64().clamp(0.0, 1.0);
                data[(v * w + u) * c + ch] = x as f32;
            }
        }
    }
    Image::from_vec(w, h, c, data).expect("consistent dims")
}

impl<T: Real> LatentCodec<T> {
    pub fn new(mode: CodecMode, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Init);
        let mut ps = ParamSet::new();
        let s = IMAGE_SIZE;
        let (latent_shape, layout) = match mode {
            CodecMode::Identity => ([3, s, s], None),
            CodecMode::Conv => {
                let enc = [
                    Conv::new(&mut ps, &mut rng, "codec.enc0", 3, 16, ConvSpec::SAME3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.enc1", 16, 32, ConvSpec::DOWN3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.enc2", 32, 64, ConvSpec::DOWN3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.enc3", 64, LATENT_CHANNELS, ConvSpec::POINT, 1.0),
                ];
                let dec = [
                    Conv::new(&mut ps, &mut rng, "codec.dec0", LATENT_CHANNELS, 64, ConvSpec::SAME3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.dec1", 64, 64, ConvSpec::SAME3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.dec2", 64, 32, ConvSpec::SAME3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.dec3", 32, 16, ConvSpec::SAME3, 1.4),
                    Conv::new(&mut ps, &mut rng, "codec.dec4", 16, 3, ConvSpec::SAME3, 1.0),
                ];
                (
                    [LATENT_CHANNELS, s / DOWNSAMPLE, s / DOWNSAMPLE],
                    Some(Layout { enc, dec }),
                )
            }
        };
        let lc = latent_shape[0];
        let mean = ps.add("codec.latent_mean", &[lc], Init::Zeros, &mut rng);
        let std = ps.add("codec.latent_std", &[lc], Init::Value(vec![1.0; lc]), &mut rng);
        ps.get_mut(mean).trainable = false;
        ps.get_mut(std).trainable = false;
        Self {
            mode,
            image_shape: [3, s, s],
            latent_shape,
            params: ps,
            layout,
            mean,
            std,
        }
    }

    fn encode_raw(&self, tape: &mut Tape<'_, T>, x: NodeId) -> NodeId {
        let Some(l) = &self.layout else { return x };
        let mut h = x;
        for (i, c) in l.enc.iter().enumerate() {
            h = c.apply(tape, h);
            if i + 1 < l.enc.len() {
                h = tape.silu(h);
            }
        }
        h
    }

    fn decode_raw(&self, tape: &mut Tape<'_, T>, z: NodeId) -> NodeId {
        let Some(l) = &self.layout else { return z };
        let d = &l.dec;
        let mut h = d[0].apply(tape, z);
        h = tape.silu(h);
        h = d[1].apply(tape, h);
        h = tape.silu(h);
        h = tape.upsample2(h);
        h = d[2].apply(tape, h);
        h = tape.silu(h);
        h = tape.upsample2(h);
        h = d[3].apply(tape, h);
        h = tape.silu(h);
        d[4].apply(tape, h)
    }

    fn stats(&self) -> (&[T], &[T]) {
        (&self.params.get(self.mean).data, &self.params.get(self.std).data)
    }

    /// Normalized latent of an image tensor.
    pub fn encode(&self, img: &Tensor<T>) -> Result<Tensor<T>> {
        img.check_shape(self.image_shape)?;
        let mut tape = Tape::new(&self.params, false);
        let x = tape.input(img.clone());
        let z = self.encode_raw(&mut tape, x);
        let mut out = tape.value(z).clone();
        let (mean, std) = self.stats();
        let plane = out.plane();
        for (i, v) in out.data.iter_mut().enumerate() {
            let c = i / plane;
            *v = (*v - mean[c]) / std[c];
        }
        Ok(out)
    }

    /// Image tensor (unclipped) of a normalized latent.
    pub fn decode(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        z.check_shape(self.latent_shape)?;
        let (mean, std) = self.stats();
        let plane = z.plane();
        let raw: Vec<T> = z.data.iter().enumerate().map(|(i, &v)| v * std[i / plane] + mean[i / plane]).collect();
        let mut tape = Tape::new(&self.params, false);
        let zi = tape.input(Tensor { shape: z.shape, data: raw });
        let out = self.decode_raw(&mut tape, zi);
        Ok(tape.value(out).clone())
    }

    /// Reconstruction MSE of one image and its gradient.
    pub fn reconstruction_grads(&self, img: &Tensor<T>) -> Result<(f64, Grads<T>)> {
        img.check_shape(self.image_shape)?;
        let mut grads = Grads::zeros_for(&self.params);
        if self.layout.is_none() {
            return Ok((0.0, grads));
        }
        let mut tape = Tape::new(&self.params, true);
        let x = tape.input(img.clone());
        let z = self.encode_raw(&mut tape, x);
        let y = self.decode_raw(&mut tape, z);
        let (loss, seed) = mse_seed(&tape.value(y).data, &img.data);
        tape.backward(y, seed, &mut grads);
        Ok((loss, grads))
    }

    pub fn reconstruction_loss(&self, img: &Tensor<T>) -> Result<f64> {
        let z = self.encode(img)?;
        let y = self.decode(&z)?;
        Ok(mse_seed(&y.data, &img.data).0)
    }

    /// Fit the per-channel latent normalization to a corpus.
    pub fn fit_latent_stats(&mut self, images: &[Tensor<T>]) -> Result<()> {
        let c = self.latent_shape[0];
        self.params.get_mut(self.mean).data = vec![T::ZERO; c];
        self.params.get_mut(self.std).data = vec![T::ONE; c];
        let mut sum = vec![0.0; c];
        let mut sq = vec![0.0; c];
        let mut n = 0usize;
        for img in images {
            let z = self.encode(img)?;
            let plane = z.plane();
            for (i, v) in z.data.iter().enumerate() {
                let x = v.to_f64();
                sum[i / plane] += x;
                sq[i / plane] += x * x;
            }
            n += plane;
        }
        if n == 0 {
            return Ok(());
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std: Vec<f64> = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| sqrt((s / n as f64 - m * m).max(1e-12)))
            .collect();
        self.params.get_mut(self.mean).data = mean.into_iter().map(T::from_f64).collect();
        self.params.get_mut(self.std).data = std.into_iter().map(T::from_f64).collect();
        Ok(())
    }
}

/// Mean squared error and its gradient w.r.t. `pred`.
pub fn mse_seed<T: Real>(pred: &[T], target: &[T]) -> (f64, Vec<T>) {
    let n = pred.len() as f64;
    let scale = T::from_f64(2.0 / n);
    let mut loss = 0.0;
    let seed = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += (d * d).to_f64();
            d * scale
        })
        .collect();
    (loss / n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_identity() {
        let codec = LatentCodec::<f32>::new(CodecMode::Conv, 1);
        let img = Tensor::from_vec([3, 64, 64], (0..3 * 64 * 64).map(|i| (i % 17) as f32 / 17.0).collect()).unwrap();
        let z = codec.encode(&img).unwrap();
        assert_eq!(z.shape, [4, 16, 16]);
        assert_eq!(codec.decode(&z).unwrap().shape, [3, 64, 64]);
        assert_eq!(codec.encode(&img).unwrap(), z);
        let id = LatentCodec::<f32>::new(CodecMode::Identity, 1);
        assert_eq!(id.encode(&img).unwrap(), img);
        assert_eq!(id.decode(&img).unwrap(), img);
        assert_eq!(id.reconstruction_loss(&img).unwrap(), 0.0);
    }

    #[test]
    fn latent_stats_normalize() {
        let mut codec = LatentCodec::<f64>::new(CodecMode::Conv, 2);
        let imgs: Vec<Tensor<f64>> = (0..3)
            .map(|k| Tensor::from_vec([3, 64, 64], (0..3 * 64 * 64).map(|i| ((i * (k + 2)) % 13) as f64 / 13.0).collect()).unwrap())
            .collect();
        codec.fit_latent_stats(&imgs).unwrap();
        let mut sum = [0.0; 4];
        for img in &imgs {
            let z = codec.encode(img).unwrap();
            for (i, v) in z.data.iter().enumerate() {
                sum[i / 256] += v;
            }
        }
        assert!(sum.iter().all(|s| s.abs() < 1e-8), "{sum:?}");
    }

    #[test]
    fn image_tensor_roundtrip() {
        let img = Image::from_vec(2, 2, 3, (0..12).map(|i| i as f32 / 12.0).collect()).unwrap();
        let t: Tensor<f32> = image_to_tensor(&img);
        assert_eq!(t.data[4], img.get(0, 0, 1));
        assert_eq!(tensor_to_image(&t), img);
    }
}
