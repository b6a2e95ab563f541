//! Illumination normalization: gamma correction, difference-of-Gaussians
//! filtering and contrast equalization, applied in that order.

use crate::error::{GsfError, Result};
use crate::imgio::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    pub gamma: f64,
    pub dog_sigma_inner: f64,
    pub dog_sigma_outer: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            dog_sigma_inner: 1.0,
            dog_sigma_outer: 2.0,
            alpha: 0.1,
            tau: 10.0,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(GsfError::InvalidArgument(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.dog_sigma_inner > 0.0) {
            return bad("inner DoG sigma must be positive");
        }
        if !(self.dog_sigma_outer > self.dog_sigma_inner) {
            return bad("outer DoG sigma must exceed the inner sigma");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        Ok(())
    }
}

pub fn gamma_correct(img: &RasterImage, gamma: f64) -> Result<RasterImage> {
    if let Some((index, &value)) = img.pixels().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(GsfError::NegativePixel { index, value });
    }
    if gamma == 1.0 {
        return Ok(img.clone());
    }
    img.map(|v| v.powf(gamma))
}

/// Unit-sum sampled Gaussian with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / denom).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Convolves rows with `kx` and then columns with `ky` (both odd length,
/// centred), extending the image by edge replication.
pub fn convolve_separable(img: &RasterImage, kx: &[f64], ky: &[f64]) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut horiz = vec![0.0; w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                // Convolution: tap at offset d multiplies the sample at x - d.
                let d = i as isize - rx;
                let sx = (x as isize - d).clamp(0, w as isize - 1) as usize;
                acc += k * row[sx];
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (i, &k) in ky.iter().enumerate() {
            let d = i as isize - ry;
            let sy = (y as isize - d).clamp(0, h as isize - 1) as usize;
            let src = &horiz[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += k * s;
            }
        }
    }
    RasterImage::from_parts(w, h, out)
}

pub fn dog_filter(img: &RasterImage, sigma_inner: f64, sigma_outer: f64) -> Result<RasterImage> {
    if !(sigma_inner > 0.0 && sigma_outer > sigma_inner) {
        return Err(GsfError::InvalidArgument(format!(
            "DoG sigmas must satisfy 0 < inner < outer, got {sigma_inner} and {sigma_outer}"
        )));
    }
    let gi = gaussian_kernel(sigma_inner);
    let go = gaussian_kernel(sigma_outer);
    let inner = convolve_separable(img, &gi, &gi);
    let outer = convolve_separable(img, &go, &go);
    let pixels = inner.pixels().iter().zip(outer.pixels()).map(|(a, b)| a - b).collect();
    Ok(RasterImage::from_parts(img.width(), img.height(), pixels))
}

/// Two-stage robust rescaling followed by `tau * tanh(v / tau)` compression.
pub fn contrast_equalize(img: &RasterImage, alpha: f64, tau: f64) -> Result<RasterImage> {
    if !(alpha > 0.0 && tau > 0.0) {
        return Err(GsfError::InvalidArgument("alpha and tau must be positive".into()));
    }
    if img.pixels().iter().all(|&v| v == 0.0) {
        return Err(GsfError::AllZeroImage);
    }
    let n = img.len() as f64;

    let norm_a = (img.pixels().iter().map(|v| v.abs().powf(alpha)).sum::<f64>() / n).powf(1.0 / alpha);
    let stage_a: Vec<f64> = img.pixels().iter().map(|v| v / norm_a).collect();

    let norm_b = (stage_a.iter().map(|v| v.abs().min(tau).powf(alpha)).sum::<f64>() / n).powf(1.0 / alpha);
    let pixels: Vec<f64> = stage_a.iter().map(|v| tau * (v / norm_b / tau).tanh()).collect();
    RasterImage::new(img.width(), img.height(), pixels)
        .map_err(|_| GsfError::InvalidArgument("contrast equalization produced non-finite values".into()))
}

/// Full chain: gamma, DoG, contrast equalization.
pub fn preprocess(img: &RasterImage, params: &PreprocessParams) -> Result<RasterImage> {
    params.validate()?;
    let g = gamma_correct(img, params.gamma)?;
    let d = dog_filter(&g, params.dog_sigma_inner, params.dog_sigma_outer)?;
    // A flat input leaves only rounding residue after the band-pass.
    let input_peak = g.pixels().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let band_peak = d.pixels().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if band_peak <= FLAT_TOLERANCE * input_peak {
        return Err(GsfError::AllZeroImage);
    }
    contrast_equalize(&d, params.alpha, params.tau)
}

/// Band-pass output below this fraction of the input peak counts as zero.
const FLAT_TOLERANCE: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_image(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut s = seed;
        RasterImage::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap()
    }

    #[test]
    fn gamma_fixed_points_and_value() {
        let img = RasterImage::new(3, 1, vec![0.0, 1.0, 0.25]).unwrap();
        let out = gamma_correct(&img, 0.2).unwrap();
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(1, 0), 1.0);
        assert!((out.get(2, 0) - 0.757858283).abs() < 1e-6);
        assert_eq!(gamma_correct(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn gamma_rejects_negative() {
        let img = RasterImage::new(2, 1, vec![0.5, -0.1]).unwrap();
        assert!(matches!(gamma_correct(&img, 0.5), Err(GsfError::NegativePixel { index: 1, .. })));
    }

    #[test]
    fn gaussian_is_unit_sum_with_3_sigma_radius() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(2.0).len(), 13);
    }

    #[test]
    fn dog_cancels_constants() {
        let img = RasterImage::filled(20, 17, 0.73).unwrap();
        let out = dog_filter(&img, 1.0, 2.0).unwrap();
        assert!(out.pixels().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn dog_impulse_response_is_the_kernel() {
        let n = 41;
        let c = n / 2;
        let img = RasterImage::from_fn(n, n, |x, y| if x == c && y == c { 1.0 } else { 0.0 }).unwrap();
        let out = dog_filter(&img, 1.0, 2.0).unwrap();
        let gi = gaussian_kernel(1.0);
        let go = gaussian_kernel(2.0);
        let (ri, ro) = (gi.len() as isize / 2, go.len() as isize / 2);
        let tap = |k: &[f64], r: isize, d: isize| if d.abs() <= r { k[(d + r) as usize] } else { 0.0 };
        for y in 0..n {
            for x in 0..n {
                let (dx, dy) = (x as isize - c as isize, y as isize - c as isize);
                let expected = tap(&gi, ri, dx) * tap(&gi, ri, dy) - tap(&go, ro, dx) * tap(&go, ro, dy);
                assert!((out.get(x, y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dog_rejects_bad_sigmas() {
        let img = RasterImage::filled(8, 8, 1.0).unwrap();
        assert!(dog_filter(&img, 2.0, 1.0).is_err());
        assert!(dog_filter(&img, 0.0, 1.0).is_err());
    }

    #[test]
    fn contrast_equalize_is_bounded() {
        let img = lcg_image(16, 16, 3).map(|v| (v - 0.5) * 1e3).unwrap();
        let out = contrast_equalize(&img, 0.1, 10.0).unwrap();
        assert!(out.pixels().iter().all(|v| v.abs() < 10.0));
    }

    #[test]
    fn contrast_equalize_on_normalized_input_only_compresses() {
        // Rescale so that mean(|I|^alpha) = 1; if max |I| <= tau both
        // normalizers are then 1 and only the tanh stage remains.
        let (alpha, tau) = (0.1, 10.0);
        let raw = lcg_image(16, 16, 11).map(|v| v - 0.5).unwrap();
        let n = raw.len() as f64;
        let norm = (raw.pixels().iter().map(|v| v.abs().powf(alpha)).sum::<f64>() / n).powf(1.0 / alpha);
        let img = raw.map(|v| v / norm).unwrap();
        assert!(img.pixels().iter().all(|v| v.abs() <= tau));
        let out = contrast_equalize(&img, alpha, tau).unwrap();
        for (o, v) in out.pixels().iter().zip(img.pixels()) {
            assert!((o - tau * (v / tau).tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn contrast_equalize_rejects_all_zero() {
        let img = RasterImage::filled(4, 4, 0.0).unwrap();
        assert!(matches!(contrast_equalize(&img, 0.1, 10.0), Err(GsfError::AllZeroImage)));
    }

    #[test]
    fn preprocess_is_the_stage_composition() {
        let img = lcg_image(24, 20, 5);
        let p = PreprocessParams::default();
        let direct = preprocess(&img, &p).unwrap();
        let g = gamma_correct(&img, p.gamma).unwrap();
        let d = dog_filter(&g, p.dog_sigma_inner, p.dog_sigma_outer).unwrap();
        let staged = contrast_equalize(&d, p.alpha, p.tau).unwrap();
        assert_eq!(direct, staged);
    }

    #[test]
    fn preprocess_of_constant_fails() {
        let img = RasterImage::filled(16, 16, 0.4).unwrap();
        let p = PreprocessParams::default();
        let d = dog_filter(&gamma_correct(&img, p.gamma).unwrap(), 1.0, 2.0).unwrap();
        assert!(d.pixels().iter().all(|v| v.abs() < 1e-10));
        assert!(matches!(preprocess(&img, &p), Err(GsfError::AllZeroImage)));
        let black = RasterImage::filled(16, 16, 0.0).unwrap();
        assert!(matches!(preprocess(&black, &p), Err(GsfError::AllZeroImage)));
    }

    #[test]
    fn params_validation() {
        assert!(PreprocessParams::default().validate().is_ok());
        let mut p = PreprocessParams::default();
        p.dog_sigma_outer = 0.5;
        assert!(p.validate().is_err());
        p = PreprocessParams::default();
        p.tau = 0.0;
        assert!(p.validate().is_err());
    }
}
