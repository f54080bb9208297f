//! 8-bit RGB image helpers shared by the protocol and the stubs.

use std::path::Path;

pub use image::RgbImage;

use super::tensor::{Tensor, TensorError};

pub fn load_png(path: impl AsRef<Path>) -> Result<RgbImage, image::ImageError> {
    Ok(image::open(path)?.to_rgb8())
}

pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), image::ImageError> {
    img.save_with_format(path, image::ImageFormat::Png)
}

/// H×W×3 u8 tensor.
pub fn image_to_tensor(img: &RgbImage) -> Tensor {
    Tensor::u8(
        vec![img.height() as u64, img.width() as u64, 3],
        img.as_raw().clone(),
    )
    .expect("image buffer matches its dimensions")
}

pub fn tensor_to_image(t: &Tensor) -> Result<RgbImage, TensorError> {
    let data = t.as_u8().ok_or(TensorError::BadDType(1))?;
    match t.dims.as_slice() {
        &[h, w, 3] => RgbImage::from_raw(w as u32, h as u32, data.to_vec()).ok_or(
            TensorError::LengthMismatch {
                len: data.len(),
                dims: t.dims.clone(),
            },
        ),
        _ => Err(TensorError::LengthMismatch {
            len: data.len(),
            dims: t.dims.clone(),
        }),
    }
}

/// Rec. 601 luma in [0, 255].
pub fn grayscale(img: &RgbImage) -> Vec<f64> {
    img.pixels()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Normalized cross-correlation of two equally sized grayscale images.
///
/// Returns `None` when either image has zero variance.
pub fn normalized_cross_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}
