//! Image loading, saving, resizing and the dataset manifest.
//!
//! Every image in the pipeline is a [`RasterImage`]: a single channel of
//! `f64` samples stored row-major. Decoded 8-bit files land in `[0, 1]`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};

use crate::error::{GsfError, Result};

/// Single-channel real-valued pixel grid.
#[derive(Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GsfError::ZeroSizedImage);
        }
        if pixels.len() != width * height {
            return Err(GsfError::InvalidImage(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(GsfError::InvalidImage(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    // Internal constructor for buffers whose shape is already known to be valid.
    pub(crate) fn from_parts(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with replicate-edge extension outside the grid.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[cy * self.width + cx]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every pixel. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.pixels.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Copies out the rectangle `[x0, x0 + w) x [y0, y0 + h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(GsfError::ZeroSizedImage);
        }
        if x0 + w > self.width || y0 + h > self.height {
            return Err(GsfError::InvalidArgument(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            pixels.extend_from_slice(&self.row(y)[x0..x0 + w]);
        }
        Ok(Self::from_parts(w, h, pixels))
    }
}

/// Decodes a PGM (P5) or PNG file to a raster in `[0, 1]`.
///
/// Colour PNGs are converted to luminance first.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| GsfError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_image(&bytes).map_err(|e| match e {
        GsfError::UnreadableFile { reason, .. } => GsfError::UnreadableFile {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Decodes an in-memory PGM or PNG file.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let format = match image::guess_format(bytes) {
        Ok(f @ (ImageFormat::Pnm | ImageFormat::Png)) => f,
        Ok(other) => return Err(GsfError::UnsupportedFormat(format!("{other:?}"))),
        Err(_) => return Err(GsfError::UnsupportedFormat("unrecognized signature".into())),
    };
    let decoded = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        image::ImageError::Unsupported(u) => GsfError::UnsupportedFormat(u.to_string()),
        other => GsfError::UnreadableFile {
            path: PathBuf::new(),
            reason: other.to_string(),
        },
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(GsfError::ZeroSizedImage);
    }
    let pixels: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        other if other.color().has_color() || other.color().has_alpha() => {
            if other.color().bytes_per_pixel() / other.color().channel_count() > 1 {
                other.to_luma16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect()
            } else {
                other.to_luma8().into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect()
            }
        }
        other => other.to_luma32f().into_raw().into_iter().map(f64::from).collect(),
    };
    RasterImage::new(width, height, pixels)
}

/// Writes an 8-bit binary PGM. Values are clamped to `[0, 1]` and rounded.
pub fn save_pgm(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(img.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.extend(img.pixels().iter().map(|&v| quantize_u8(v)));
    fs::write(path, out)?;
    Ok(())
}

pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    /// Bilinear scaling to cover the target, then a centred crop.
    ScaleAndCrop,
    /// Centred crop only; the source must be at least as large as the target.
    CropOnly,
}

/// Produces an image of exactly `target_w x target_h`.
///
/// In [`ResizeMode::ScaleAndCrop`] the source is scaled by
/// `max(target_w / w, target_h / h)` so that it covers the target, and the
/// overflow along the other axis is cropped symmetrically. Output pixel
/// `(x, y)` samples the source at `((x + ox) / s, (y + oy) / s)` with
/// bilinear weights and replicate-edge clamping.
pub fn resize_crop(img: &RasterImage, target_w: usize, target_h: usize, mode: ResizeMode) -> Result<RasterImage> {
    if target_w == 0 || target_h == 0 {
        return Err(GsfError::InvalidArgument("target dimensions must be positive".into()));
    }
    let (w, h) = (img.width(), img.height());
    if w == target_w && h == target_h {
        return Ok(img.clone());
    }
    match mode {
        ResizeMode::CropOnly => {
            if target_w > w || target_h > h {
                return Err(GsfError::InvalidArgument(format!(
                    "crop target {target_w}x{target_h} larger than source {w}x{h}"
                )));
            }
            img.crop((w - target_w) / 2, (h - target_h) / 2, target_w, target_h)
        }
        ResizeMode::ScaleAndCrop => {
            let scale = f64::max(target_w as f64 / w as f64, target_h as f64 / h as f64);
            let off_x = (w as f64 * scale - target_w as f64) / 2.0;
            let off_y = (h as f64 * scale - target_h as f64) / 2.0;
            let mut pixels = Vec::with_capacity(target_w * target_h);
            for y in 0..target_h {
                let sy = (y as f64 + off_y) / scale;
                for x in 0..target_w {
                    let sx = (x as f64 + off_x) / scale;
                    pixels.push(bilinear_sample(img, sx, sy));
                }
            }
            Ok(RasterImage::from_parts(target_w, target_h, pixels))
        }
    }
}

/// Bilinear interpolation at a fractional source coordinate.
pub fn bilinear_sample(img: &RasterImage, sx: f64, sy: f64) -> f64 {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    if fx == 0.0 && fy == 0.0 {
        return img.get(x0, y0);
    }
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Gallery,
    Probe,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Gallery => "gallery",
            Role::Probe => "probe",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "gallery" => Ok(Role::Gallery),
            "probe" => Ok(Role::Probe),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub subject: String,
    pub role: Role,
}

/// A list of labelled images split into train, gallery and probe roles.
///
/// Text form: one `path,subject,role` entry per line; `#` starts a comment.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| GsfError::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(GsfError::Manifest {
                    line: line_no,
                    reason: format!("expected 3 comma-separated fields, found {}", fields.len()),
                });
            }
            if fields[0].is_empty() {
                return Err(GsfError::Manifest {
                    line: line_no,
                    reason: "empty path".into(),
                });
            }
            if fields[1].is_empty() {
                return Err(GsfError::Manifest {
                    line: line_no,
                    reason: "empty subject label".into(),
                });
            }
            let role = fields[2]
                .parse::<Role>()
                .map_err(|reason| GsfError::Manifest { line: line_no, reason })?;
            let p = Path::new(fields[0]);
            let path = if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
            entries.push(ManifestEntry {
                path,
                subject: fields[1].to_string(),
                role,
            });
        }
        Ok(Self { entries })
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    /// Serializes back to the text form, with paths written as given.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.path.display(), e.subject, e.role.as_str()));
        }
        out
    }
}
