//! Multi-scale, multi-orientation Gabor kernel bank and Gabor magnitude
//! pictures (GMPs).
//!
//! The kernel for scale `v` and orientation `u` is
//!
//! ```text
//! psi(z) = (|k|^2 / sigma^2) exp(-|k|^2 |z|^2 / (2 sigma^2)) [exp(i k.z) - dc]
//! k      = (k_max / f^v) (cos(pi u / n_orient), sin(pi u / n_orient))
//! ```
//!
//! where `dc` cancels the kernel's response to a constant. In the continuum
//! `dc = exp(-sigma^2 / 2)`; on the truncated sampling grid it is computed as
//! the envelope-weighted mean of the carrier so that the taps sum to zero.
//!
//! Convolution uses replicate-edge extension. Two paths are provided: the
//! direct spatial sum (reference) and a zero-padded FFT product.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{GsfError, Result};
use crate::imgio::RasterImage;

/// Largest kernel side length.
pub const MAX_KERNEL_SIDE: usize = 65;

/// Smallest image side accepted by [`compute_gmps`].
pub const MIN_IMAGE_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborBankParams {
    pub num_scales: usize,
    pub num_orientations: usize,
    pub k_max: f64,
    pub spacing_f: f64,
    pub sigma: f64,
}

impl Default for GaborBankParams {
    fn default() -> Self {
        Self {
            num_scales: 5,
            num_orientations: 8,
            k_max: PI / 2.0,
            spacing_f: std::f64::consts::SQRT_2,
            sigma: 2.0 * PI,
        }
    }
}

impl GaborBankParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 || self.num_orientations == 0 {
            return Err(GsfError::InvalidArgument("Gabor bank needs at least one scale and orientation".into()));
        }
        if !(self.k_max > 0.0 && self.spacing_f > 1.0 && self.sigma > 0.0) {
            return Err(GsfError::InvalidArgument(
                "Gabor constants must satisfy k_max > 0, f > 1, sigma > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn num_gmps(&self) -> usize {
        self.num_scales * self.num_orientations
    }

    /// Wave vector of the `(scale, orientation)` kernel.
    pub fn wave_vector(&self, scale: usize, orientation: usize) -> (f64, f64) {
        let magnitude = self.k_max / self.spacing_f.powi(scale as i32);
        let phi = PI * orientation as f64 / self.num_orientations as f64;
        (magnitude * phi.cos(), magnitude * phi.sin())
    }

    /// Uncapped side length `2 ceil(3 sigma / |k|) + 1`.
    pub fn natural_side(&self, scale: usize) -> usize {
        let k = self.k_max / self.spacing_f.powi(scale as i32);
        2 * (3.0 * self.sigma / k).ceil() as usize + 1
    }
}

/// Square complex kernel with odd side, stored row-major. Tap `(dx, dy)`
/// lives at `[(dy + r) * side + (dx + r)]` with `r = side / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub scale_index: usize,
    pub orientation_index: usize,
    pub side: usize,
    pub taps: Vec<Complex64>,
}

impl GaborKernel {
    pub fn radius(&self) -> usize {
        self.side / 2
    }

    pub fn tap(&self, dx: isize, dy: isize) -> Complex64 {
        let r = self.radius() as isize;
        self.taps[((dy + r) as usize) * self.side + (dx + r) as usize]
    }
}

/// Builds the kernel for one `(scale, orientation)` pair.
///
/// `max_side` bounds the side length (typically the smaller image side);
/// the result is additionally capped at [`MAX_KERNEL_SIDE`] and kept odd.
pub fn make_kernel(scale: usize, orientation: usize, params: &GaborBankParams, max_side: usize) -> Result<GaborKernel> {
    params.validate()?;
    if scale >= params.num_scales || orientation >= params.num_orientations {
        return Err(GsfError::IndexOutOfRange(format!(
            "kernel ({scale}, {orientation}) outside a {}x{} bank",
            params.num_scales, params.num_orientations
        )));
    }
    let mut cap = max_side.min(MAX_KERNEL_SIDE).max(1);
    if cap % 2 == 0 {
        cap -= 1;
    }
    let side = params.natural_side(scale).min(cap);
    let r = (side / 2) as isize;

    let (kx, ky) = params.wave_vector(scale, orientation);
    let k2 = kx * kx + ky * ky;
    let s2 = params.sigma * params.sigma;
    let amplitude = k2 / s2;

    let mut envelope = Vec::with_capacity(side * side);
    let mut carrier = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            envelope.push(amplitude * (-k2 * (x * x + y * y) / (2.0 * s2)).exp());
            carrier.push(Complex64::from_polar(1.0, kx * x + ky * y));
        }
    }
    let env_sum: f64 = envelope.iter().sum();
    let dc = envelope.iter().zip(&carrier).map(|(e, c)| c * e).sum::<Complex64>() / env_sum;
    let taps = envelope.iter().zip(&carrier).map(|(e, c)| (c - dc) * e).collect();

    Ok(GaborKernel {
        scale_index: scale,
        orientation_index: orientation,
        side,
        taps,
    })
}

/// One Gabor magnitude picture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmp {
    pub scale_index: usize,
    pub orientation_index: usize,
    pub magnitude: RasterImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    /// Direct double sum over the kernel support.
    Spatial,
    /// Zero-padded 2-D FFT product.
    #[default]
    Fft,
}

/// Kernel bank bound to one image geometry, with FFT plans and kernel
/// spectra prepared up front. Immutable and shareable across threads.
pub struct GaborBank {
    params: GaborBankParams,
    width: usize,
    height: usize,
    kernels: Vec<GaborKernel>,
    fft: FftPlan,
}

struct FftPlan {
    pad: usize,
    padded_w: usize,
    padded_h: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    // Kernel spectra in transposed (column-major) layout.
    spectra: Vec<Vec<Complex64>>,
}

impl std::fmt::Debug for GaborBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaborBank")
            .field("params", &self.params)
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GaborBank {
    pub fn new(params: &GaborBankParams, width: usize, height: usize) -> Result<Self> {
        params.validate()?;
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(GsfError::Undersized {
                width,
                height,
                min_width: MIN_IMAGE_SIDE,
                min_height: MIN_IMAGE_SIDE,
            });
        }
        let max_side = width.min(height);
        let mut kernels = Vec::with_capacity(params.num_gmps());
        for scale in 0..params.num_scales {
            for orientation in 0..params.num_orientations {
                kernels.push(make_kernel(scale, orientation, params, max_side)?);
            }
        }
        let fft = FftPlan::new(&kernels, width, height);
        Ok(Self {
            params: *params,
            width,
            height,
            kernels,
            fft,
        })
    }

    pub fn params(&self) -> &GaborBankParams {
        &self.params
    }

    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// GMPs in scale-major order (index `scale * n_orient + orientation`).
    pub fn apply(&self, img: &RasterImage, path: ConvolutionPath) -> Result<Vec<Gmp>> {
        if (img.width(), img.height()) != (self.width, self.height) {
            return Err(GsfError::DimensionMismatch(format!(
                "bank prepared for {}x{}, image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        let magnitudes: Vec<RasterImage> = match path {
            ConvolutionPath::Spatial => self
                .kernels
                .par_iter()
                .map(|k| spatial_magnitude(img, k))
                .collect(),
            ConvolutionPath::Fft => {
                let spectrum = self.fft.image_spectrum(img);
                (0..self.kernels.len())
                    .into_par_iter()
                    .map(|i| self.fft.magnitude(&spectrum, i, self.width, self.height))
                    .collect()
            }
        };
        Ok(self
            .kernels
            .iter()
            .zip(magnitudes)
            .map(|(k, magnitude)| Gmp {
                scale_index: k.scale_index,
                orientation_index: k.orientation_index,
                magnitude,
            })
            .collect())
    }
}

/// Convenience wrapper: builds a bank for the image and applies it via FFT.
pub fn compute_gmps(img: &RasterImage, params: &GaborBankParams) -> Result<Vec<Gmp>> {
    GaborBank::new(params, img.width(), img.height())?.apply(img, ConvolutionPath::Fft)
}

pub fn compute_gmps_with(img: &RasterImage, params: &GaborBankParams, path: ConvolutionPath) -> Result<Vec<Gmp>> {
    GaborBank::new(params, img.width(), img.height())?.apply(img, path)
}

fn spatial_magnitude(img: &RasterImage, kernel: &GaborKernel) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let r = kernel.radius();
    let side = kernel.side;
    // Replicate-padded copy so the inner loop has no clamping.
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut padded = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        for px in 0..pw {
            padded.push(img.get_clamped(px as isize - r as isize, py as isize - r as isize));
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            // Tap (dx, dy) meets the sample at (x - dx, y - dy), which sits at
            // padded (x + r - dx, y + r - dy).
            for ky in 0..side {
                let prow = &padded[(y + 2 * r - ky) * pw..];
                let krow = &kernel.taps[ky * side..(ky + 1) * side];
                for (kx, tap) in krow.iter().enumerate() {
                    acc += tap * prow[x + 2 * r - kx];
                }
            }
            out.push(acc.norm());
        }
    }
    RasterImage::from_parts(w, h, out)
}

impl FftPlan {
    fn new(kernels: &[GaborKernel], width: usize, height: usize) -> Self {
        let pad = kernels.iter().map(GaborKernel::radius).max().unwrap_or(0);
        let padded_w = width + 2 * pad;
        let padded_h = height + 2 * pad;
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(padded_w);
        let row_inv = planner.plan_fft_inverse(padded_w);
        let col_fwd = planner.plan_fft_forward(padded_h);
        let col_inv = planner.plan_fft_inverse(padded_h);
        let mut plan = Self {
            pad,
            padded_w,
            padded_h,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            spectra: Vec::new(),
        };
        plan.spectra = kernels
            .iter()
            .map(|k| {
                let mut grid = vec![Complex64::new(0.0, 0.0); padded_w * padded_h];
                let r = k.radius() as isize;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let gy = (dy + pad as isize) as usize;
                        let gx = (dx + pad as isize) as usize;
                        grid[gy * padded_w + gx] = k.tap(dx, dy);
                    }
                }
                plan.forward(grid)
            })
            .collect();
        plan
    }

    /// Row FFTs, transpose, column FFTs. Output is column-major.
    fn forward(&self, mut grid: Vec<Complex64>) -> Vec<Complex64> {
        self.row_fwd.process(&mut grid);
        let mut t = transpose(&grid, self.padded_w, self.padded_h);
        self.col_fwd.process(&mut t);
        t
    }

    fn image_spectrum(&self, img: &RasterImage) -> Vec<Complex64> {
        let p = self.pad as isize;
        let mut grid = Vec::with_capacity(self.padded_w * self.padded_h);
        for py in 0..self.padded_h as isize {
            for px in 0..self.padded_w as isize {
                grid.push(Complex64::new(img.get_clamped(px - p, py - p), 0.0));
            }
        }
        self.forward(grid)
    }

    fn magnitude(&self, image_spectrum: &[Complex64], kernel: usize, width: usize, height: usize) -> RasterImage {
        let mut prod: Vec<Complex64> = image_spectrum
            .iter()
            .zip(&self.spectra[kernel])
            .map(|(a, b)| a * b)
            .collect();
        self.col_inv.process(&mut prod);
        let mut grid = transpose(&prod, self.padded_h, self.padded_w);
        self.row_inv.process(&mut grid);
        let norm = 1.0 / (self.padded_w * self.padded_h) as f64;
        let off = 2 * self.pad;
        let mut out = Vec::with_capacity(width * height);
        for y in 0..height {
            let row = &grid[(y + off) * self.padded_w + off..];
            out.extend(row[..width].iter().map(|c| c.norm() * norm));
        }
        RasterImage::from_parts(width, height, out)
    }
}

/// Transposes a row-major `rows x cols` grid given as `cols` wide rows.
fn transpose(data: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}
