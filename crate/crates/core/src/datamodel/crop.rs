use image::RgbImage;

use super::{BoundingBox, DataError};
use crate::logonet::INPUT_SIZE;
use crate::nncore::{Scalar, Tensor};

/// Crops `bbox` (clipped to the image) and resizes it bilinearly to
/// `32 x 32 x 3`, RGB scaled to `[0, 1]`.
///
/// Sampling aligns corners: output pixel `i` reads source coordinate
/// `x0 + i * (w - 1) / 31`, so the four corner pixels are copied exactly.
pub fn crop_resize<T: Scalar>(image: &RgbImage, bbox: &BoundingBox) -> Result<Tensor<T>, DataError> {
    let b = bbox
        .clip(image.width(), image.height())
        .ok_or(DataError::BoxOutsideImage { bbox: *bbox, width: image.width(), height: image.height() })?;
    Ok(resize_region(image, &b, INPUT_SIZE))
}

fn resize_region<T: Scalar>(image: &RgbImage, b: &BoundingBox, size: usize) -> Tensor<T> {
    let raw = image.as_raw();
    let stride = image.width() as usize * 3;
    let coords = |origin: i32, extent: u32| -> Vec<(usize, usize, f64)> {
        (0..size)
            .map(|i| {
                let s = if size == 1 { 0.0 } else { i as f64 * (extent - 1) as f64 / (size - 1) as f64 };
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(extent as usize - 1);
                (origin as usize + lo, origin as usize + hi, s - lo as f64)
            })
            .collect()
    };
    let xs = coords(b.x, b.w);
    let ys = coords(b.y, b.h);
    let mut data = Vec::with_capacity(size * size * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| raw[y * stride + x * 3 + c] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                data.push(T::from_f64_lossy((top * (1.0 - fy) + bottom * fy) / 255.0));
            }
        }
    }
    Tensor::new(vec![size, size, 3], data).expect("size^2 * 3 values")
}
