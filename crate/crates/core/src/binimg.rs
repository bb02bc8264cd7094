//! Binary files as fixed-width 8-bit grayscale rasters.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Single-channel 8-bit raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Param(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Param(format!(
                "{} pixels do not fill a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact(self.width)
    }
}

/// On-disk raster encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary netpbm graymap, maxval 255.
    Pgm,
    /// 8-bit grayscale PNG without alpha.
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

const KB: usize = 1024;

/// Row width for a file of `size_bytes` bytes.
///
/// | size (KB)   | width |
/// |-------------|-------|
/// | < 10        | 32    |
/// | 10 – 30     | 64    |
/// | 30 – 60     | 128   |
/// | 60 – 100    | 256   |
/// | 100 – 200   | 384   |
/// | 200 – 500   | 512   |
/// | 500 – 1000  | 768   |
/// | ≥ 1000      | 1024  |
///
/// Intervals are half-open on the right.
pub fn width_for_size(size_bytes: usize) -> Result<usize> {
    const TABLE: [(usize, usize); 7] = [
        (10 * KB, 32),
        (30 * KB, 64),
        (60 * KB, 128),
        (100 * KB, 256),
        (200 * KB, 384),
        (500 * KB, 512),
        (1000 * KB, 768),
    ];
    if size_bytes == 0 {
        return Err(Error::EmptyFile);
    }
    Ok(TABLE
        .iter()
        .find(|(limit, _)| size_bytes < *limit)
        .map_or(1024, |&(_, w)| w))
}

/// One pixel per byte, row-major; the last row is padded with zeros.
pub fn bytes_to_image(data: &[u8], width: Option<usize>) -> Result<GrayImage> {
    if data.is_empty() {
        return Err(Error::EmptyFile);
    }
    let width = match width {
        Some(0) => return Err(Error::Param("image width must be at least 1".into())),
        Some(w) => w,
        None => width_for_size(data.len())?,
    };
    let height = data.len().div_ceil(width);
    let mut pixels = Vec::with_capacity(width * height);
    pixels.extend_from_slice(data);
    pixels.resize(width * height, 0);
    GrayImage::new(width, height, pixels)
}

/// Reads `path` and converts its bytes with the default width rule.
pub fn file_to_image(path: &Path) -> Result<GrayImage> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    bytes_to_image(&data, None)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let magic = pgm_token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(Error::parse("PGM", format!("bad magic {magic:?}, expected \"P5\"")));
    }
    let width = pgm_number(bytes, &mut pos, "width")?;
    let height = pgm_number(bytes, &mut pos, "height")?;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::parse("PGM", format!("maxval {maxval} unsupported, expected 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::parse("PGM", "missing whitespace after maxval")),
    }
    if width == 0 || height == 0 {
        return Err(Error::parse("PGM", format!("zero dimension {width}x{height}")));
    }
    let need = width * height;
    let body = &bytes[pos..];
    if body.len() < need {
        return Err(Error::parse(
            "PGM",
            format!("truncated raster: {} of {need} bytes", body.len()),
        ));
    }
    GrayImage::new(width, height, body[..need].to_vec())
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if bytes.get(*pos) == Some(&b'#') {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse("PGM", "truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::parse("PGM", "non-ASCII header"))
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| Error::parse("PGM", format!("invalid {what} {tok:?}")))
}

pub fn write_image(img: &GrayImage, path: &Path, format: ImageFormat) -> Result<()> {
    match format {
        ImageFormat::Pgm => fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e)),
        ImageFormat::Png => {
            let buf = image::GrayImage::from_raw(
                img.width as u32,
                img.height as u32,
                img.pixels.clone(),
            )
            .expect("pixel count matches dimensions");
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            buf.write_to(&mut w, image::ImageFormat::Png)?;
            Ok(())
        }
    }
}

/// Reads a PGM (P5) or PNG file, detected from its leading bytes.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?;
        let gray = match decoded {
            image::DynamicImage::ImageLuma8(g) => g,
            other => {
                return Err(Error::parse(
                    "PNG",
                    format!("expected 8-bit grayscale, found {:?}", other.color()),
                ))
            }
        };
        let (w, h) = gray.dimensions();
        GrayImage::new(w as usize, h as usize, gray.into_raw())
    } else {
        decode_pgm(&bytes)
    }
}
