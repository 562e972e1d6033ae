//! Lossless RGB raster I/O.
//!
//! Every stamped image is an 8-bit RGB raster. Grayscale and alpha inputs are
//! expanded to RGB on load (alpha is composited over black). PNG text chunks
//! carry the image metadata, most importantly the public `photo_id`.
//!
//! JPEG is accepted on load so suspicious files can still be verified, but it
//! is never written: a single flipped low bit from lossy re-encoding is
//! indistinguishable from tampering.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Cursor;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metadata key under which the stamping camera's photo ID travels.
pub const PHOTO_ID_KEY: &str = "photo_id";

const MAX_DECODE_ALLOC: u64 = 256 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelId {
    Red,
    Green,
    Blue,
}

impl ChannelId {
    pub const ALL: [ChannelId; 3] = [ChannelId::Red, ChannelId::Green, ChannelId::Blue];

    pub fn index(self) -> usize {
        match self {
            ChannelId::Red => 0,
            ChannelId::Green => 1,
            ChannelId::Blue => 2,
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelId::Red => "red",
            ChannelId::Green => "green",
            ChannelId::Blue => "blue",
        })
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "red" => Ok(ChannelId::Red),
            "g" | "green" => Ok(ChannelId::Green),
            "b" | "blue" => Ok(ChannelId::Blue),
            other => Err(Error::InvalidConfig(format!("unknown channel {other:?}"))),
        }
    }
}

/// An 8-bit per channel RGB raster stored row-major, plus string metadata.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
    metadata: BTreeMap<String, String>,
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RgbImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl RgbImage {
    /// A black image.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            pixels: vec![[0; 3]; width as usize * height as usize],
            metadata: BTreeMap::new(),
        })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            metadata: BTreeMap::new(),
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::from_pixels(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn same_dims(&self, other: &RgbImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[self.offset(x, y)]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i] = value;
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        y as usize * self.width as usize + x as usize
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    pub fn photo_id(&self) -> Option<&str> {
        self.metadata.get(PHOTO_ID_KEY).map(String::as_str)
    }

    /// Copy of one channel as a row-major byte plane of `width * height` bytes.
    pub fn channel_plane(&self, ch: ChannelId) -> Vec<u8> {
        let c = ch.index();
        self.pixels.iter().map(|p| p[c]).collect()
    }

    pub fn set_channel_plane(&mut self, ch: ChannelId, plane: &[u8]) -> Result<()> {
        if plane.len() != self.pixels.len() {
            return Err(Error::LengthMismatch {
                expected: self.pixels.len(),
                actual: plane.len(),
            });
        }
        let c = ch.index();
        for (p, &v) in self.pixels.iter_mut().zip(plane) {
            p[c] = v;
        }
        Ok(())
    }

    /// Copy of the rectangle `(x, y, w, h)`, metadata excluded.
    pub fn sub_image(&self, x: u32, y: u32, w: u32, h: u32) -> Result<RgbImage> {
        if x.checked_add(w).is_none_or(|r| r > self.width)
            || y.checked_add(h).is_none_or(|b| b > self.height)
        {
            return Err(Error::RegionOutOfBounds(
                format!("({x}, {y}, {w}x{h})"),
                self.width,
                self.height,
            ));
        }
        RgbImage::from_fn(w, h, |i, j| self.pixel(x + i, y + j))
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    if (width as u64) * (height as u64) > (1 << 30) {
        return Err(Error::InvalidImage(format!("{width}x{height} is too large")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Bmp,
    Jpeg,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(ImageFormat::Png),
            "bmp" => Ok(ImageFormat::Bmp),
            "jpg" | "jpeg" => Ok(ImageFormat::Jpeg),
            _ => Err(Error::UnsupportedFormat(format!("{}", path.display()))),
        }
    }

    /// Sniff the container from its magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(&[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a]) {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(b"BM") {
            Some(ImageFormat::Bmp)
        } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
            Some(ImageFormat::Jpeg)
        } else {
            None
        }
    }

    pub fn is_lossless(self) -> bool {
        !matches!(self, ImageFormat::Jpeg)
    }
}

/// Decode PNG, BMP or JPEG bytes into an RGB raster.
pub fn decode(bytes: &[u8]) -> Result<RgbImage> {
    match ImageFormat::detect(bytes) {
        Some(ImageFormat::Png) => decode_png(bytes),
        Some(fmt @ (ImageFormat::Bmp | ImageFormat::Jpeg)) => decode_with_image_crate(bytes, fmt),
        None => Err(Error::UnsupportedFormat("unrecognized file signature".into())),
    }
}

/// Encode to a lossless container. PNG keeps metadata, BMP drops it.
pub fn encode(img: &RgbImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(img),
        ImageFormat::Bmp => encode_bmp(img),
        ImageFormat::Jpeg => Err(Error::LossyFormatRequested("jpeg".into())),
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let bytes = std::fs::read(path.as_ref())?;
    decode(&bytes)
}

pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path)?;
    if !format.is_lossless() {
        return Err(Error::LossyFormatRequested(path.display().to_string()));
    }
    let bytes = encode(img, format)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut limits = png::Limits::default();
    limits.bytes = MAX_DECODE_ALLOC as usize;
    let mut decoder = png::Decoder::new_with_limits(Cursor::new(bytes), limits);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::Decode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let data = &buf[..frame.buffer_size()];

    let expand = |v: &[u8]| -> [u8; 3] {
        match frame.color_type {
            png::ColorType::Grayscale => [v[0]; 3],
            png::ColorType::GrayscaleAlpha => [over_black(v[0], v[1]); 3],
            png::ColorType::Rgb => [v[0], v[1], v[2]],
            png::ColorType::Rgba => [
                over_black(v[0], v[3]),
                over_black(v[1], v[3]),
                over_black(v[2], v[3]),
            ],
            png::ColorType::Indexed => unreachable!("palette is expanded by the decoder"),
        }
    };
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode(format!("unexpected bit depth {:?}", frame.bit_depth)));
    }
    let samples = frame.color_type.samples();
    let pixels: Vec<[u8; 3]> = data
        .chunks_exact(frame.line_size)
        .take(frame.height as usize)
        .flat_map(|row| row[..frame.width as usize * samples].chunks_exact(samples))
        .map(expand)
        .collect();
    let mut img = RgbImage::from_pixels(frame.width, frame.height, pixels)?;

    let info = reader.info();
    for chunk in &info.uncompressed_latin1_text {
        img.metadata.insert(chunk.keyword.clone(), chunk.text.clone());
    }
    for chunk in &info.compressed_latin1_text {
        if let Ok(text) = chunk.get_text() {
            img.metadata.insert(chunk.keyword.clone(), text);
        }
    }
    for chunk in &info.utf8_text {
        if let Ok(text) = chunk.get_text() {
            img.metadata.insert(chunk.keyword.clone(), text);
        }
    }
    Ok(img)
}

fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width, img.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        for (key, value) in &img.metadata {
            if key.is_empty() || key.len() > 79 || !key.chars().all(|c| (' '..='~').contains(&c)) {
                return Err(Error::InvalidMetadata(key.clone()));
            }
            let res = if value.chars().all(|c| (c as u32) < 256) {
                encoder.add_text_chunk(key.clone(), value.clone())
            } else {
                encoder.add_itxt_chunk(key.clone(), value.clone())
            };
            res.map_err(|e| Error::Encode(e.to_string()))?;
        }
        let mut writer = encoder.write_header().map_err(|e| Error::Encode(e.to_string()))?;
        writer
            .write_image_data(img.pixels.as_flattened())
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer.finish().map_err(|e| Error::Encode(e.to_string()))?;
    }
    Ok(out)
}

fn encode_bmp(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut encoder = image::codecs::bmp::BmpEncoder::new(&mut out);
    encoder
        .encode(
            img.pixels.as_flattened(),
            img.width,
            img.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Encode(e.to_string()))?;
    Ok(out)
}

fn decode_with_image_crate(bytes: &[u8], format: ImageFormat) -> Result<RgbImage> {
    let fmt = match format {
        ImageFormat::Bmp => image::ImageFormat::Bmp,
        ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        ImageFormat::Png => image::ImageFormat::Png,
    };
    let mut reader = image::ImageReader::with_format(Cursor::new(bytes), fmt);
    let mut limits = image::Limits::default();
    limits.max_alloc = Some(MAX_DECODE_ALLOC);
    reader.limits(limits);
    let decoded = reader.decode().map_err(|e| Error::Decode(e.to_string()))?;
    let rgba = decoded.to_rgba8();
    let (w, h) = rgba.dimensions();
    let pixels = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            [over_black(r, a), over_black(g, a), over_black(b, a)]
        })
        .collect();
    RgbImage::from_pixels(w, h, pixels)
}

fn over_black(c: u8, alpha: u8) -> u8 {
    ((c as u32 * alpha as u32 + 127) / 255) as u8
}

/// Lossy JPEG round trip, used only to model recompression as a manipulation.
pub(crate) fn jpeg_roundtrip(img: &RgbImage, quality: u8) -> Result<RgbImage> {
    let mut out = Vec::new();
    let mut encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality);
    encoder
        .encode(
            img.pixels.as_flattened(),
            img.width,
            img.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Encode(e.to_string()))?;
    let mut decoded = decode(&out)?;
    decoded.metadata = img.metadata.clone();
    Ok(decoded)
}
