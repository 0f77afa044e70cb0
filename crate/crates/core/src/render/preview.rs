//! 16-bit PNG preview export. Linear radiance goes through the sRGB
//! transfer curve; pixels outside the mask are black.

use super::RadianceImage;
use std::path::Path;

fn srgb(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// Write a preview with radiance scaled by `scale` before the transfer curve.
pub fn write_png_preview_scaled(
    path: &Path,
    image: &RadianceImage,
    scale: f64,
) -> Result<(), image::ImageError> {
    let mut buf = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::new(
        image.width as u32,
        image.height as u32,
    );
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let i = y as usize * image.width + x as usize;
        if image.mask[i] {
            let p = image.pixels[i] * scale;
            *px = image::Rgb([
                (srgb(p.x) * 65535.0).round() as u16,
                (srgb(p.y) * 65535.0).round() as u16,
                (srgb(p.z) * 65535.0).round() as u16,
            ]);
        }
    }
    buf.save_with_format(path, image::ImageFormat::Png)
}

/// Write a preview normalized so the image peak maps to white.
pub fn write_png_preview(path: &Path, image: &RadianceImage) -> Result<(), image::ImageError> {
    let peak = image.peak();
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    write_png_preview_scaled(path, image, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn preview_is_written_and_valid_png() {
        let mut img = RadianceImage::new_black(8, 8);
        for i in 20..40 {
            img.pixels[i] = Vec3::new(0.5, 0.2, 0.9);
            img.mask[i] = true;
        }
        let dir = std::env::temp_dir().join("nearps_preview_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preview.png");
        write_png_preview(&path, &img).unwrap();
        let loaded = image::open(&path).unwrap();
        assert_eq!(loaded.width(), 8);
        assert_eq!(loaded.height(), 8);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn srgb_curve_endpoints() {
        assert_eq!(srgb(0.0), 0.0);
        assert!((srgb(1.0) - 1.0).abs() < 1e-12);
        assert!(srgb(0.5) > 0.5, "sRGB brightens midtones");
    }
}
