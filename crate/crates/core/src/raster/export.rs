//! Debug images and exact tensor dumps of render buffers.

use image::{GrayImage, Luma, Rgb, RgbImage};

use super::RenderBuffers;
use crate::backends::tensor::Tensor;

pub fn opacity_png(b: &RenderBuffers) -> GrayImage {
    GrayImage::from_fn(b.width, b.height, |x, y| {
        Luma([if b.is_opaque(b.index(x, y)) { 255 } else { 0 }])
    })
}

/// Normals mapped from [−1, 1] to [0, 255]; background is black.
pub fn normals_png(b: &RenderBuffers) -> RgbImage {
    RgbImage::from_fn(b.width, b.height, |x, y| {
        match b.normals.at(b.index(x, y)) {
            Some(n) => Rgb([n.x, n.y, n.z].map(|c| ((c + 1.0) * 0.5 * 255.0).round() as u8)),
            None => Rgb([0, 0, 0]),
        }
    })
}

/// Grey Lambertian shading of the normal buffer on a white background,
/// lit from the camera. Used as a stand-in image when no RGB renders exist.
pub fn shaded_png(b: &RenderBuffers) -> RgbImage {
    RgbImage::from_fn(b.width, b.height, |x, y| {
        match b.normals.at(b.index(x, y)) {
            Some(n) => {
                let l = (0.15 + 0.85 * n.z.max(0.0)) * 255.0;
                let v = l.round().clamp(0.0, 255.0) as u8;
                Rgb([v, v, v])
            }
            None => Rgb([255, 255, 255]),
        }
    })
}

pub fn depth_tensor(b: &RenderBuffers) -> Tensor {
    Tensor::f32(vec![b.height as u64, b.width as u64], b.depth.data.clone())
        .expect("depth buffer matches its dimensions")
}

pub fn normals_tensor(b: &RenderBuffers) -> Tensor {
    Tensor::f32(
        vec![b.height as u64, b.width as u64, 3],
        b.normals.data.iter().flatten().copied().collect(),
    )
    .expect("normal buffer matches its dimensions")
}

pub fn opacity_tensor(b: &RenderBuffers) -> Tensor {
    Tensor::u8(
        vec![b.height as u64, b.width as u64],
        b.face_id
            .iter()
            .map(|&f| u8::from(f != super::NO_FACE))
            .collect(),
    )
    .expect("opacity buffer matches its dimensions")
}
