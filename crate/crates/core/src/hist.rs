//! Spatial histograms over a grid of regions and sub-regions.
//!
//! Layout of the histogram sequence: regions in row-major order; inside a
//! region, sub-regions outermost, then GMPs in bank order, then `levels`
//! bins.

use rayon::prelude::*;

use crate::codes::CodeMap;
use crate::error::{GsfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConfig {
    pub m_rows: usize,
    pub n_cols: usize,
    /// 1 = whole region, 2 = top/bottom halves, 4 = 2x2 quadrants.
    pub sub_regions: usize,
    /// Histogram bins per code map.
    pub levels: usize,
}

impl PartitionConfig {
    pub const FERET: PartitionConfig = PartitionConfig {
        m_rows: 10,
        n_cols: 4,
        sub_regions: 2,
        levels: 16,
    };

    pub const ORL: PartitionConfig = PartitionConfig {
        m_rows: 5,
        n_cols: 4,
        sub_regions: 1,
        levels: 16,
    };

    pub fn region_count(&self) -> usize {
        self.m_rows * self.n_cols
    }

    pub fn region_len(&self, num_gmps: usize) -> usize {
        num_gmps * self.sub_regions * self.levels
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_rows == 0 || self.n_cols == 0 || self.levels == 0 {
            return Err(GsfError::InvalidArgument("partition counts must be positive".into()));
        }
        if !matches!(self.sub_regions, 1 | 2 | 4) {
            return Err(GsfError::InvalidArgument(format!(
                "sub-region count {} must be 1, 2 or 4",
                self.sub_regions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub index: usize,
    pub rect: Rect,
    pub sub_regions: Vec<Rect>,
}

/// Splits `len` into `parts` contiguous bands of `len / parts`, the last
/// band absorbing the remainder. Returns `(start, size)` pairs.
fn bands(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    (0..parts)
        .map(|i| {
            let start = i * base;
            let size = if i + 1 == parts { len - start } else { base };
            (start, size)
        })
        .collect()
}

pub fn partition(height: usize, width: usize, cfg: &PartitionConfig) -> Result<Vec<Region>> {
    cfg.validate()?;
    let (min_h, min_w) = match cfg.sub_regions {
        1 => (cfg.m_rows, cfg.n_cols),
        2 => (2 * cfg.m_rows, cfg.n_cols),
        _ => (2 * cfg.m_rows, 2 * cfg.n_cols),
    };
    if height < min_h || width < min_w {
        return Err(GsfError::Undersized {
            width,
            height,
            min_width: min_w,
            min_height: min_h,
        });
    }
    let rows = bands(height, cfg.m_rows);
    let cols = bands(width, cfg.n_cols);
    let mut regions = Vec::with_capacity(cfg.region_count());
    for &(y, h) in &rows {
        for &(x, w) in &cols {
            let rect = Rect {
                x,
                y,
                width: w,
                height: h,
            };
            let sub_regions = match cfg.sub_regions {
                1 => vec![rect],
                2 => bands(h, 2)
                    .into_iter()
                    .map(|(sy, sh)| Rect {
                        x,
                        y: y + sy,
                        width: w,
                        height: sh,
                    })
                    .collect(),
                _ => {
                    let mut quads = Vec::with_capacity(4);
                    for (sy, sh) in bands(h, 2) {
                        for (sx, sw) in bands(w, 2) {
                            quads.push(Rect {
                                x: x + sx,
                                y: y + sy,
                                width: sw,
                                height: sh,
                            });
                        }
                    }
                    quads
                }
            };
            regions.push(Region {
                index: regions.len(),
                rect,
                sub_regions,
            });
        }
    }
    Ok(regions)
}

/// Index of the region containing pixel `(x, y)`.
pub fn region_of(regions: &[Region], x: usize, y: usize) -> Option<usize> {
    regions.iter().position(|r| r.rect.contains(x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionHistogram {
    pub region_index: usize,
    pub values: Vec<f64>,
}

/// The concatenated per-region feature vectors of one face.
///
/// For histogram variants each region vector has length
/// `num_gmps * sub_regions * levels` and holds raw counts; the down-sampled
/// real-valued feature reuses the same container with its own region
/// lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSequence {
    pub regions: Vec<RegionHistogram>,
    pub config: PartitionConfig,
    pub num_gmps: usize,
}

impl HistogramSequence {
    pub fn total_len(&self) -> usize {
        self.regions.iter().map(|r| r.values.len()).sum()
    }

    pub fn region_dims(&self) -> Vec<usize> {
        self.regions.iter().map(|r| r.values.len()).collect()
    }

    /// The flat vector V.
    pub fn concatenated(&self) -> Vec<f64> {
        self.regions.iter().flat_map(|r| r.values.iter().copied()).collect()
    }

    pub fn from_region_vectors(vectors: Vec<Vec<f64>>, config: PartitionConfig, num_gmps: usize) -> Self {
        Self {
            regions: vectors
                .into_iter()
                .enumerate()
                .map(|(region_index, values)| RegionHistogram { region_index, values })
                .collect(),
            config,
            num_gmps,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.regions
            .iter_mut()
            .for_each(|r| r.values.iter_mut().for_each(|v| *v *= factor));
        out
    }
}

pub fn region_histograms(code_maps: &[CodeMap], cfg: &PartitionConfig) -> Result<HistogramSequence> {
    let first = code_maps
        .first()
        .ok_or_else(|| GsfError::EmptySet("no code maps".into()))?;
    let (w, h) = (first.width, first.height);
    for (i, m) in code_maps.iter().enumerate() {
        if (m.width, m.height) != (w, h) {
            return Err(GsfError::DimensionMismatch(format!(
                "code map {i} is {}x{}, expected {w}x{h}",
                m.width, m.height
            )));
        }
        if m.alphabet_size != cfg.levels {
            return Err(GsfError::DimensionMismatch(format!(
                "code map {i} has alphabet {}, partition expects {} levels",
                m.alphabet_size, cfg.levels
            )));
        }
    }
    let regions = partition(h, w, cfg)?;
    let levels = cfg.levels;

    let hists: Vec<RegionHistogram> = regions
        .par_iter()
        .map(|region| {
            let mut values = Vec::with_capacity(cfg.region_len(code_maps.len()));
            for sub in &region.sub_regions {
                for map in code_maps {
                    let mut bins = vec![0.0; levels];
                    for y in sub.y..sub.y + sub.height {
                        let row = &map.codes[y * w + sub.x..y * w + sub.x + sub.width];
                        for &c in row {
                            bins[c as usize] += 1.0;
                        }
                    }
                    values.extend(bins);
                }
            }
            RegionHistogram {
                region_index: region.index,
                values,
            }
        })
        .collect();

    Ok(HistogramSequence {
        regions: hists,
        config: *cfg,
        num_gmps: code_maps.len(),
    })
}
