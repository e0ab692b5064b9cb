//! Conversion of full-resolution targets and control images to the
//! model's working resolutions by area averaging.

use alloc::vec::Vec;

use super::codec::{image_to_tensor, IMAGE_SIZE};
use super::tensor::{Real, Tensor};
use super::train::Example;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::prompts::ConditionEmbedding;

fn downsample_to(img: &Image, size: usize) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if w != h || w % size != 0 {
        return Err(Error::ShapeMismatch {
            expected: alloc::vec![size, size],
            actual: alloc::vec![w, h],
        });
    }
    if w == size {
        return Ok(img.clone());
    }
    img.area_downsample(w / size)
}

/// RGB target at 64 × 64 as a `[3, 64, 64]` tensor.
pub fn target_tensor<T: Real>(img: &Image) -> Result<Tensor<T>> {
    if img.channels() != 3 {
        return Err(Error::ShapeMismatch {
            expected: alloc::vec![3],
            actual: alloc::vec![img.channels()],
        });
    }
    Ok(image_to_tensor(&downsample_to(img, IMAGE_SIZE)?))
}

/// Single-channel control map area-averaged to `size × size`.
pub fn control_tensor<T: Real>(img: &Image, size: usize) -> Result<Tensor<T>> {
    let single = if img.channels() == 1 { img.clone() } else { img.channel(0) };
    Ok(image_to_tensor(&downsample_to(&single, size)?))
}

pub fn cond_vector<T: Real>(e: &ConditionEmbedding) -> Vec<T> {
    e.0.iter().map(|&v| T::from_f64(v)).collect()
}

pub fn example<T: Real>(target: &Image, control: &Image, cond: &ConditionEmbedding, latent_size: usize) -> Result<Example<T>> {
    Ok(Example {
        image: target_tensor(target)?,
        cond: cond_vector(cond),
        control: control_tensor(control, latent_size)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ContactPose, SensorModality};
    use crate::prompts::PromptSchema;

    #[test]
    fn area_resolutions() {
        let ctrl = Image::from_fn(512, 512, |u, _| if u < 256 { 1.0 } else { 0.0 });
        let c: Tensor<f32> = control_tensor(&ctrl, 16).unwrap();
        assert_eq!(c.shape, [1, 16, 16]);
        assert_eq!((c.data[0], c.data[15]), (1.0, 0.0));
        let tgt = Image::filled(512, 512, 3, 0.25);
        let t: Tensor<f32> = target_tensor(&tgt).unwrap();
        assert_eq!(t.shape, [3, 64, 64]);
        assert!(t.data.iter().all(|&v| v == 0.25));
        assert!(target_tensor::<f32>(&Image::zeros(100, 100, 3)).is_err());
        let e = ConditionEmbedding::new(SensorModality::ViTac, &ContactPose::ORIGIN, PromptSchema::Short);
        let ex: Example<f32> = example(&tgt, &ctrl, &e, 16).unwrap();
        assert_eq!(ex.cond.len(), 8);
    }
}
