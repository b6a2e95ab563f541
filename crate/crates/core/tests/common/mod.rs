//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use gsf_core::gabor::GaborKernel;
use gsf_core::pipeline::LabeledImage;
use gsf_core::RasterImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, rng: &mut impl Rng) -> RasterImage {
    RasterImage::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
}

/// Smooth non-negative surface: a few Gaussian bumps plus a little noise,
/// standing in for a Gabor magnitude picture.
pub fn random_surface(w: usize, h: usize, rng: &mut impl Rng) -> RasterImage {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(1.5..6.0),
                rng.random_range(0.2..2.0),
            )
        })
        .collect();
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..1e-3)).collect();
    RasterImage::from_fn(w, h, |x, y| {
        let v: f64 = bumps
            .iter()
            .map(|(cx, cy, s, a)| {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum();
        v + noise[y * w + x]
    })
    .unwrap()
}

/// A subject's identity: a fixed set of sinusoidal components within a
/// frequency band, plus a smooth vignette shared by all subjects.
pub struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    pub fn random(rng: &mut impl Rng) -> Self {
        let waves = (0..14)
            .map(|_| {
                let freq = rng.random_range(0.12..0.7);
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                (
                    freq * angle.cos(),
                    freq * angle.sin(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.3..1.0),
                )
            })
            .collect();
        Self { waves }
    }

    pub fn render(&self, w: usize, h: usize) -> RasterImage {
        let norm: f64 = self.waves.iter().map(|wv| wv.3).sum();
        RasterImage::from_fn(w, h, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let v: f64 = self
                .waves
                .iter()
                .map(|(kx, ky, ph, a)| a * (kx * xf + ky * yf + ph).cos())
                .sum::<f64>()
                / norm;
            0.5 + 0.35 * v
        })
        .unwrap()
    }
}

/// Noisy, brightness-scaled instance of a rendered texture:
/// `clamp(gain * base + noise, 0, 1)` with `gain` uniform in
/// `[1 - delta, 1 + delta]` and noise standard deviation `sigma`
/// (the base spans roughly `[0.15, 0.85]`).
pub fn perturb(base: &RasterImage, delta: f64, sigma: f64, rng: &mut impl Rng) -> RasterImage {
    let gain = rng.random_range(1.0 - delta..=1.0 + delta);
    let noise = Normal::new(0.0, sigma).unwrap();
    let pixels: Vec<f64> = base
        .pixels()
        .iter()
        .map(|&v| (gain * v + noise.sample(rng)).clamp(0.0, 1.0))
        .collect();
    RasterImage::new(base.width(), base.height(), pixels).unwrap()
}

/// `subjects x instances` synthetic faces, grouped by subject.
pub fn synthetic_faces(
    subjects: usize,
    instances: usize,
    delta: f64,
    sigma: f64,
    seed: u64,
) -> Vec<Vec<LabeledImage>> {
    let mut r = rng(seed);
    (0..subjects)
        .map(|s| {
            let base = Texture::random(&mut r).render(64, 80);
            (0..instances)
                .map(|i| LabeledImage {
                    id: format!("s{s:02}_{i}"),
                    subject: format!("s{s:02}"),
                    image: perturb(&base, delta, sigma, &mut r),
                })
                .collect()
        })
        .collect()
}

/// Direct replicate-edge 2-D convolution of a real image with a complex
/// kernel, returning the modulus.
pub fn brute_gabor_magnitude(img: &RasterImage, k: &GaborKernel) -> RasterImage {
    let r = k.radius() as isize;
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let (mut re, mut im) = (0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let v = img.get_clamped(x as isize - dx, y as isize - dy);
                let t = k.tap(dx, dy);
                re += t.re * v;
                im += t.im * v;
            }
        }
        (re * re + im * im).sqrt()
    })
    .unwrap()
}

/// Direct replicate-edge 2-D convolution with a real square kernel given as
/// a function of the offset.
pub fn brute_convolve(img: &RasterImage, radius: isize, kernel: impl Fn(isize, isize) -> f64) -> RasterImage {
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = 0.0;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                acc += kernel(dx, dy) * img.get_clamped(x as isize - dx, y as isize - dy);
            }
        }
        acc
    })
    .unwrap()
}

pub fn max_abs_diff(a: &RasterImage, b: &RasterImage) -> f64 {
    a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Gabor taps built directly from the kernel definition, as `(re, im)`
/// row-major with side `side`.
pub fn oracle_gabor_taps(scale: usize, orientation: usize, orientations: usize, side: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::{PI, SQRT_2};
    let sigma = 2.0 * PI;
    let k = (PI / 2.0) / SQRT_2.powi(scale as i32);
    let phi = PI * orientation as f64 / orientations as f64;
    let (kx, ky) = (k * phi.cos(), k * phi.sin());
    let r = (side / 2) as isize;
    let mut env = Vec::new();
    let mut phase = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            env.push(k * k / (sigma * sigma) * (-k * k * d2 / (2.0 * sigma * sigma)).exp());
            phase.push(kx * dx as f64 + ky * dy as f64);
        }
    }
    let env_sum: f64 = env.iter().sum();
    let dc_re = env.iter().zip(&phase).map(|(e, p)| e * p.cos()).sum::<f64>() / env_sum;
    let dc_im = env.iter().zip(&phase).map(|(e, p)| e * p.sin()).sum::<f64>() / env_sum;
    env.iter()
        .zip(&phase)
        .map(|(e, p)| (e * (p.cos() - dc_re), e * (p.sin() - dc_im)))
        .collect()
}

/// Replicate-edge convolution magnitude with `(re, im)` taps.
pub fn oracle_complex_magnitude(img: &RasterImage, taps: &[(f64, f64)], side: usize) -> RasterImage {
    let r = (side / 2) as isize;
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let (mut re, mut im) = (0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let v = img.get_clamped(x as isize - dx, y as isize - dy);
                let (tr, ti) = taps[((dy + r) * side as isize + dx + r) as usize];
                re += tr * v;
                im += ti * v;
            }
        }
        re.hypot(im)
    })
    .unwrap()
}

/// Unit-sum sampled Gaussian on `[-ceil(3 sigma), ceil(3 sigma)]`.
pub fn oracle_gaussian(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Splits grouped faces into (train, gallery, probe) by instance index.
pub fn split(faces: &[Vec<LabeledImage>], train: usize, gallery: usize) -> (Vec<LabeledImage>, Vec<LabeledImage>, Vec<LabeledImage>) {
    let mut t = Vec::new();
    let mut g = Vec::new();
    let mut p = Vec::new();
    for f in faces {
        t.extend_from_slice(&f[..train]);
        g.extend_from_slice(&f[train..train + gallery]);
        p.extend_from_slice(&f[train + gallery..]);
    }
    (t, g, p)
}
