//! 8-bit RGB images and PNG encoding.

use std::fs;
use std::io::Cursor;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major `[height × width × 3]`.
    pub data: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("image is {actual:?} (H, W), expected {expected:?}")]
    SizeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("{0} values for a {1}×{2} image")]
    DataLength(usize, usize, usize),
    #[error("alpha {0} outside [0, 1]")]
    Alpha(f64),
    #[error("png encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png color type {0:?}")]
    ColorType(png::ColorType),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if data.len() != width * height * 3 {
            return Err(ImageError::DataLength(data.len(), height, width));
        }
        Ok(Self { width, height, data })
    }

    pub fn pixel(&self, i: usize, j: usize) -> [u8; 3] {
        let o = (i * self.width + j) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, i: usize, j: usize, rgb: [u8; 3]) {
        let o = (i * self.width + j) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Non-interlaced 8-bit RGB PNG with fixed encoder settings, so equal
    /// images give equal bytes.
    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            encoder.set_compression(png::Compression::Balanced);
            encoder.set_filter(png::Filter::Adaptive);
            let mut writer = encoder.write_header()?;
            writer.write_image_data(&self.data)?;
            writer.finish()?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info()?;
        let size = reader.output_buffer_size().ok_or(ImageError::DataLength(0, 0, 0))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf)?;
        buf.truncate(info.buffer_size());
        let (w, h) = (info.width as usize, info.height as usize);
        let data = match info.color_type {
            png::ColorType::Rgb => buf,
            png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
            png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
            png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
            other => return Err(ImageError::ColorType(other)),
        };
        Self::from_raw(w, h, data)
    }

    pub fn write_png(&self, path: &Path) -> Result<(), ImageError> {
        fs::write(path, self.to_png()?)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self, ImageError> {
        Self::from_png(&fs::read(path)?)
    }
}
