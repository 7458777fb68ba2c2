use std::io::Cursor;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ColorType, DynamicImage, ImageEncoder, ImageReader};

use crate::channel::Channel;
use crate::error::{Error, Result};

use super::CodecMode;

/// Square 8-bit RGB raster; R, G and B carry the 4-, 3- and 1,2-gram planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorImage {
    side: usize,
    /// Interleaved RGB, row-major.
    pixels: Vec<u8>,
    /// Known when produced by the encoder; unknown after reading a file.
    pub mode: Option<CodecMode>,
}

impl BehaviorImage {
    pub fn from_planes(side: usize, planes: [&[u8]; 3], mode: Option<CodecMode>) -> Result<Self> {
        let len = side * side;
        if side == 0 || planes.iter().any(|p| p.len() != len) {
            return Err(Error::Image(format!("planes are not {side}x{side}")));
        }
        let mut pixels = Vec::with_capacity(len * 3);
        for i in 0..len {
            pixels.extend(planes.iter().map(|p| p[i]));
        }
        Ok(BehaviorImage { side, pixels, mode })
    }

    pub fn from_rgb(side: usize, pixels: Vec<u8>) -> Result<Self> {
        if side == 0 || pixels.len() != side * side * 3 {
            return Err(Error::Image(format!(
                "{} bytes is not a {side}x{side} RGB raster",
                pixels.len()
            )));
        }
        Ok(BehaviorImage {
            side,
            pixels,
            mode: None,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn rgb(&self) -> &[u8] {
        &self.pixels
    }

    pub fn plane(&self, channel: Channel) -> Vec<u8> {
        self.pixels
            .iter()
            .skip(channel.index())
            .step_by(3)
            .copied()
            .collect()
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let side = self.side as u32;
        PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
            .write_image(&self.pixels, side, side, ColorType::Rgb8.into())?;
        Ok(out)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let decoded =
            ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Png).decode()?;
        Self::from_dynamic(decoded)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        Self::from_png_bytes(&std::fs::read(path)?)
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let DynamicImage::ImageRgb8(rgb) = img else {
            return Err(Error::Image(format!(
                "expected 8-bit RGB, found {:?}",
                img.color()
            )));
        };
        if w != h {
            return Err(Error::Image(format!("image is {w}x{h}, not square")));
        }
        Self::from_rgb(w, rgb.into_raw())
    }
}
