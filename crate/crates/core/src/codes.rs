//! Per-pixel code maps computed from a GMP.
//!
//! Gabor surface feature (GSF) codes treat the GMP as a smooth surface:
//! the magnitude, its first derivatives and its second derivatives are each
//! binarized against their own median and the bits are packed into a small
//! integer. The LGBP baseline and a non-binarized down-sampled feature are
//! provided for comparison.

use std::fmt;
use std::str::FromStr;

use crate::error::{GsfError, Result};
use crate::gabor::Gmp;
use crate::imgio::RasterImage;

/// A GMP and its derivative pictures.
///
/// `gx`/`gy` are symmetric differences (`[-1, 0, 1]` horizontally and
/// vertically), `gxx`/`gyy` apply the same operator once more, and
/// `g2 = gxx + gyy`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStack {
    pub g: RasterImage,
    pub gx: RasterImage,
    pub gy: RasterImage,
    pub gxx: RasterImage,
    pub gyy: RasterImage,
    pub g2: RasterImage,
}

/// A binarized picture and the median it was thresholded against.
#[derive(Debug, Clone, PartialEq)]
pub struct BitPlane {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<u8>,
    pub threshold: f64,
}

impl BitPlane {
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMap {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u16>,
    pub alphabet_size: usize,
}

impl CodeMap {
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.codes[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GsfVariant {
    /// `4B + 2Bx + By`, 8 codes.
    Gsf3,
    /// `8B + 4Bx + 2By + B2`, 16 codes.
    Gsf1,
    /// `8Bx + 4By + 2Bxx + Byy`, 16 codes.
    Gsf2,
    /// Quantized LBP on the GMP.
    Lgbp,
    /// Strided real-valued samples of G, Gx, Gy and G2.
    Rawdown,
}

impl GsfVariant {
    pub const ALL: [GsfVariant; 5] = [
        GsfVariant::Gsf3,
        GsfVariant::Gsf1,
        GsfVariant::Gsf2,
        GsfVariant::Lgbp,
        GsfVariant::Rawdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GsfVariant::Gsf3 => "gsf3",
            GsfVariant::Gsf1 => "gsf1",
            GsfVariant::Gsf2 => "gsf2",
            GsfVariant::Lgbp => "lgbp",
            GsfVariant::Rawdown => "rawdown",
        }
    }

    /// Stable numeric tag used in model files.
    pub fn tag(self) -> u32 {
        match self {
            GsfVariant::Gsf3 => 0,
            GsfVariant::Gsf1 => 1,
            GsfVariant::Gsf2 => 2,
            GsfVariant::Lgbp => 3,
            GsfVariant::Rawdown => 4,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn is_surface_code(self) -> bool {
        matches!(self, GsfVariant::Gsf3 | GsfVariant::Gsf1 | GsfVariant::Gsf2)
    }
}

impl fmt::Display for GsfVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GsfVariant {
    type Err = GsfError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| GsfError::WrongVariant(s.to_string()))
    }
}

/// Horizontal symmetric difference `p(x + 1) - p(x - 1)`, replicate edges.
fn diff_x(p: &RasterImage) -> RasterImage {
    let (w, h) = (p.width(), p.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = p.row(y);
        for x in 0..w {
            out.push(row[(x + 1).min(w - 1)] - row[x.saturating_sub(1)]);
        }
    }
    RasterImage::from_parts(w, h, out)
}

/// Vertical symmetric difference `p(y + 1) - p(y - 1)`, replicate edges.
fn diff_y(p: &RasterImage) -> RasterImage {
    let (w, h) = (p.width(), p.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let below = p.row((y + 1).min(h - 1));
        let above = p.row(y.saturating_sub(1));
        out.extend(below.iter().zip(above).map(|(b, a)| b - a));
    }
    RasterImage::from_parts(w, h, out)
}

pub fn derivatives(gmp: &RasterImage) -> Result<DerivativeStack> {
    if gmp.width() < 3 || gmp.height() < 3 {
        return Err(GsfError::Undersized {
            width: gmp.width(),
            height: gmp.height(),
            min_width: 3,
            min_height: 3,
        });
    }
    let gx = diff_x(gmp);
    let gy = diff_y(gmp);
    let gxx = diff_x(&gx);
    let gyy = diff_y(&gy);
    let g2 = RasterImage::from_parts(
        gmp.width(),
        gmp.height(),
        gxx.pixels().iter().zip(gyy.pixels()).map(|(a, b)| a + b).collect(),
    );
    Ok(DerivativeStack {
        g: gmp.clone(),
        gx,
        gy,
        gxx,
        gyy,
        g2,
    })
}

/// Median of the values; the mean of the two middle order statistics for
/// an even count.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

/// Bit is 1 iff the pixel is strictly greater than the picture's median.
pub fn binarize_median(img: &RasterImage) -> BitPlane {
    let threshold = median(img.pixels());
    BitPlane {
        width: img.width(),
        height: img.height(),
        bits: img.pixels().iter().map(|&v| u8::from(v > threshold)).collect(),
        threshold,
    }
}

/// Packs per-plane bits, most significant first.
fn pack(planes: &[BitPlane], width: usize, height: usize) -> CodeMap {
    let n = width * height;
    let mut codes = vec![0u16; n];
    for plane in planes {
        for (c, &b) in codes.iter_mut().zip(&plane.bits) {
            *c = (*c << 1) | u16::from(b);
        }
    }
    CodeMap {
        width,
        height,
        codes,
        alphabet_size: 1 << planes.len(),
    }
}

/// Pictures whose median-binarized bits form the variant's code, from most
/// to least significant bit.
pub fn code_pictures(stack: &DerivativeStack, variant: GsfVariant) -> Result<Vec<&RasterImage>> {
    match variant {
        GsfVariant::Gsf3 => Ok(vec![&stack.g, &stack.gx, &stack.gy]),
        GsfVariant::Gsf1 => Ok(vec![&stack.g, &stack.gx, &stack.gy, &stack.g2]),
        GsfVariant::Gsf2 => Ok(vec![&stack.gx, &stack.gy, &stack.gxx, &stack.gyy]),
        other => Err(GsfError::WrongVariant(format!("{other} is not a surface code"))),
    }
}

pub fn gsf_code_map(stack: &DerivativeStack, variant: GsfVariant) -> Result<CodeMap> {
    let planes: Vec<BitPlane> = code_pictures(stack, variant)?.into_iter().map(binarize_median).collect();
    Ok(pack(&planes, stack.g.width(), stack.g.height()))
}

/// Neighbour offsets for LBP bits 0..8: east first, then counter-clockwise
/// as seen on screen (north is `y - 1`).
pub const LBP_NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Raw 8-neighbour radius-1 LBP code; bit `i` is set iff neighbour `i` is
/// greater than or equal to the centre.
pub fn lbp_code(img: &RasterImage, x: usize, y: usize) -> u8 {
    let centre = img.get(x, y);
    let (x, y) = (x as isize, y as isize);
    LBP_NEIGHBOURS.iter().enumerate().fold(0u8, |acc, (bit, (dx, dy))| {
        acc | (u8::from(img.get_clamped(x + dx, y + dy) >= centre) << bit)
    })
}

pub fn lgbp_code_map(gmp: &RasterImage, levels: usize) -> Result<CodeMap> {
    if levels == 0 || levels > 256 || 256 % levels != 0 {
        return Err(GsfError::InvalidArgument(format!("LBP levels {levels} must divide 256")));
    }
    if gmp.width() < 3 || gmp.height() < 3 {
        return Err(GsfError::Undersized {
            width: gmp.width(),
            height: gmp.height(),
            min_width: 3,
            min_height: 3,
        });
    }
    let bin_width = (256 / levels) as u16;
    let (w, h) = (gmp.width(), gmp.height());
    let mut codes = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            codes.push(u16::from(lbp_code(gmp, x, y)) / bin_width);
        }
    }
    Ok(CodeMap {
        width: w,
        height: h,
        codes,
        alphabet_size: levels,
    })
}

/// Flat-index positions sampled from each picture by [`rawdown_feature`].
pub fn rawdown_indices(pixel_count: usize, target_dim: usize) -> Result<Vec<usize>> {
    if target_dim == 0 || target_dim % 4 != 0 {
        return Err(GsfError::InvalidArgument(format!(
            "target dimension {target_dim} must be a positive multiple of 4"
        )));
    }
    if target_dim > 4 * pixel_count {
        return Err(GsfError::InvalidArgument(format!(
            "target dimension {target_dim} exceeds 4 x {pixel_count} pixels"
        )));
    }
    let quota = target_dim / 4;
    let stride = pixel_count / quota;
    Ok((0..quota).map(|i| i * stride).collect())
}

/// Evenly strided samples of G, Gx, Gy and G2, concatenated in that order.
pub fn rawdown_feature(stack: &DerivativeStack, target_dim: usize) -> Result<Vec<f64>> {
    let idx = rawdown_indices(stack.g.len(), target_dim)?;
    let mut out = Vec::with_capacity(target_dim);
    for pic in [&stack.g, &stack.gx, &stack.gy, &stack.g2] {
        out.extend(idx.iter().map(|&i| pic.pixels()[i]));
    }
    Ok(out)
}

/// Code map for one GMP under any histogram-producing variant.
pub fn code_map_for(gmp: &Gmp, variant: GsfVariant, lgbp_levels: usize) -> Result<CodeMap> {
    match variant {
        GsfVariant::Lgbp => lgbp_code_map(&gmp.magnitude, lgbp_levels),
        GsfVariant::Rawdown => Err(GsfError::WrongVariant("rawdown has no code map".into())),
        surface => gsf_code_map(&derivatives(&gmp.magnitude)?, surface),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, v: &[f64]) -> RasterImage {
        RasterImage::new(w, h, v.to_vec()).unwrap()
    }

    fn plane(bits: Vec<u8>) -> BitPlane {
        BitPlane {
            width: bits.len(),
            height: 1,
            bits,
            threshold: 0.0,
        }
    }

    #[test]
    fn constant_gmp_has_zero_derivatives() {
        let s = derivatives(&RasterImage::filled(6, 5, 2.5).unwrap()).unwrap();
        for p in [&s.gx, &s.gy, &s.gxx, &s.gyy, &s.g2] {
            assert!(p.pixels().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn symmetric_difference_at_centre() {
        let s = derivatives(&img(3, 3, &[0., 0., 0., 1., 2., 4., 0., 0., 0.])).unwrap();
        assert_eq!(s.gx.get(1, 1), 3.0);
    }

    #[test]
    fn ramp_derivatives() {
        let ramp = RasterImage::from_fn(9, 5, |x, _| x as f64).unwrap();
        let s = derivatives(&ramp).unwrap();
        for y in 0..5 {
            for x in 1..8 {
                assert_eq!(s.gx.get(x, y), 2.0);
            }
            for x in 2..7 {
                assert_eq!(s.gxx.get(x, y), 0.0);
            }
            assert_eq!(s.gx.get(0, y), 1.0);
        }
        assert!(s.gy.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_is_sum_of_second_derivatives() {
        let p = RasterImage::from_fn(7, 6, |x, y| ((x * 13 + y * 7) % 5) as f64 * 0.3).unwrap();
        let s = derivatives(&p).unwrap();
        for i in 0..p.len() {
            assert_eq!(s.g2.pixels()[i], s.gxx.pixels()[i] + s.gyy.pixels()[i]);
        }
    }

    #[test]
    fn derivatives_reject_tiny() {
        assert!(derivatives(&RasterImage::filled(2, 5, 1.0).unwrap()).is_err());
    }

    #[test]
    fn median_binarization_examples() {
        let b = binarize_median(&img(4, 1, &[1., 2., 3., 4.]));
        assert_eq!(b.threshold, 2.5);
        assert_eq!(b.bits, vec![0, 0, 1, 1]);

        let b = binarize_median(&img(3, 1, &[5., 1., 3.]));
        assert_eq!(b.threshold, 3.0);
        assert_eq!(b.bits, vec![1, 0, 0]);

        let b = binarize_median(&RasterImage::filled(3, 3, 7.0).unwrap());
        assert!(b.bits.iter().all(|&x| x == 0));
    }

    #[test]
    fn bit_weights() {
        let c = pack(&[plane(vec![1]), plane(vec![0]), plane(vec![1])], 1, 1);
        assert_eq!((c.codes[0], c.alphabet_size), (5, 8));
        let c = pack(&[plane(vec![1]), plane(vec![0]), plane(vec![1]), plane(vec![0])], 1, 1);
        assert_eq!((c.codes[0], c.alphabet_size), (10, 16));
        let c = pack(&[plane(vec![1, 0]), plane(vec![1, 0]), plane(vec![1, 0]), plane(vec![1, 0])], 2, 1);
        assert_eq!(c.codes, vec![15, 0]);
    }

    #[test]
    fn all_bit_combinations_are_distinct_codes() {
        for n in [3usize, 4] {
            let combos = 1usize << n;
            let planes: Vec<BitPlane> = (0..n)
                .map(|bit| plane((0..combos).map(|c| ((c >> (n - 1 - bit)) & 1) as u8).collect()))
                .collect();
            let map = pack(&planes, combos, 1);
            let mut seen: Vec<u16> = map.codes.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), combos);
            assert!(map.codes.iter().all(|&c| (c as usize) < map.alphabet_size));
        }
    }

    #[test]
    fn gsf_rejects_non_surface_variants() {
        let s = derivatives(&RasterImage::filled(4, 4, 1.0).unwrap()).unwrap();
        assert!(matches!(gsf_code_map(&s, GsfVariant::Lgbp), Err(GsfError::WrongVariant(_))));
        assert!(matches!(gsf_code_map(&s, GsfVariant::Rawdown), Err(GsfError::WrongVariant(_))));
    }

    #[test]
    fn lbp_examples() {
        let flat = lgbp_code_map(&RasterImage::filled(4, 4, 3.0).unwrap(), 8).unwrap();
        assert!(flat.codes.iter().all(|&c| c == 7));

        let peak = img(3, 3, &[0., 0., 0., 0., 5., 0., 0., 0., 0.]);
        assert_eq!(lbp_code(&peak, 1, 1), 0);
        assert_eq!(lgbp_code_map(&peak, 8).unwrap().get(1, 1), 0);

        let east = img(3, 3, &[0., 0., 0., 0., 2., 3., 0., 0., 0.]);
        assert_eq!(lbp_code(&east, 1, 1), 1);
        assert_eq!(lgbp_code_map(&east, 8).unwrap().get(1, 1), 0);
    }

    #[test]
    fn lbp_bit_order_is_counter_clockwise_from_east() {
        // Only the north neighbour is bright: bit 2.
        let north = img(3, 3, &[0., 9., 0., 0., 5., 0., 0., 0., 0.]);
        assert_eq!(lbp_code(&north, 1, 1), 1 << 2);
        let south_east = img(3, 3, &[0., 0., 0., 0., 5., 0., 0., 0., 9.]);
        assert_eq!(lbp_code(&south_east, 1, 1), 1 << 7);
    }

    #[test]
    fn lbp_levels_must_divide_256() {
        let g = RasterImage::filled(4, 4, 1.0).unwrap();
        assert!(lgbp_code_map(&g, 7).is_err());
        assert!(lgbp_code_map(&g, 0).is_err());
        assert_eq!(lgbp_code_map(&g, 256).unwrap().alphabet_size, 256);
    }

    #[test]
    fn rawdown_striding() {
        let p = RasterImage::from_fn(8, 8, |x, y| (y * 8 + x) as f64).unwrap();
        let s = derivatives(&p).unwrap();
        let full = rawdown_feature(&s, 4 * 64).unwrap();
        assert_eq!(&full[..64], p.pixels());
        assert_eq!(&full[64..128], s.gx.pixels());

        let v = rawdown_feature(&s, 64).unwrap();
        assert_eq!(v.len(), 64);
        let expected: Vec<f64> = (0..16).map(|i| (i * 4) as f64).collect();
        assert_eq!(&v[..16], expected.as_slice());
    }

    #[test]
    fn rawdown_of_constant_is_flat_per_picture() {
        let s = derivatives(&RasterImage::filled(8, 8, 3.0).unwrap()).unwrap();
        let v = rawdown_feature(&s, 32).unwrap();
        assert!(v[..8].iter().all(|&x| x == 3.0));
        assert!(v[8..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rawdown_rejects_bad_dims() {
        let s = derivatives(&RasterImage::filled(8, 8, 3.0).unwrap()).unwrap();
        assert!(rawdown_feature(&s, 30).is_err());
        assert!(rawdown_feature(&s, 4 * 64 + 4).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in GsfVariant::ALL {
            assert_eq!(v.name().parse::<GsfVariant>().unwrap(), v);
            assert_eq!(GsfVariant::from_tag(v.tag()), Some(v));
        }
        assert!("gsf9".parse::<GsfVariant>().is_err());
    }
}
