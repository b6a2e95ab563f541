//! Binary model files.
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! "GSFM"  version
//! variant_tag  lgbp_levels
//! gabor:      scales orientations k_max f sigma
//! partition:  m n s levels
//! preprocess: enabled gamma sigma_inner sigma_outer alpha tau
//! image size: width height            (0 0 = no resizing)
//! weighted  region_count
//! per region: input_dim output_dim class_count  projection (row-major)
//! weights:    region_count reals
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::codes::GsfVariant;
use crate::error::{GsfError, Result};
use crate::gabor::GaborBankParams;
use crate::hist::PartitionConfig;
use crate::pipeline::FeatureConfig;
use crate::preprocess::PreprocessParams;
use crate::subspace::{EpfdaModel, FdaRegionModel};

pub const MAGIC: &[u8; 4] = b"GSFM";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| GsfError::ModelFormat(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| GsfError::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }
}

pub fn encode_model(model: &EpfdaModel) -> Result<Vec<u8>> {
    let f = &model.feature;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(f.variant.tag() as usize)?;
    w.u32(f.lgbp_levels)?;

    w.u32(f.gabor.num_scales)?;
    w.u32(f.gabor.num_orientations)?;
    w.f64(f.gabor.k_max);
    w.f64(f.gabor.spacing_f);
    w.f64(f.gabor.sigma);

    w.u32(f.partition.m_rows)?;
    w.u32(f.partition.n_cols)?;
    w.u32(f.partition.sub_regions)?;
    w.u32(f.partition.levels)?;

    let pp = f.preprocess.unwrap_or_default();
    w.u32(usize::from(f.preprocess.is_some()))?;
    for v in [pp.gamma, pp.dog_sigma_inner, pp.dog_sigma_outer, pp.alpha, pp.tau] {
        w.f64(v);
    }

    let (iw, ih) = f.image_size.unwrap_or((0, 0));
    w.u32(iw)?;
    w.u32(ih)?;

    w.u32(usize::from(model.weighted))?;
    w.u32(model.regions.len())?;
    for r in &model.regions {
        w.u32(r.input_dim())?;
        w.u32(r.output_dim())?;
        w.u32(r.class_count)?;
        for row in 0..r.input_dim() {
            for col in 0..r.output_dim() {
                w.f64(r.projection[(row, col)]);
            }
        }
    }
    if model.weights.len() != model.regions.len() {
        return Err(GsfError::ModelFormat(format!(
            "{} weights for {} regions",
            model.weights.len(),
            model.regions.len()
        )));
    }
    for &x in &model.weights {
        w.f64(x);
    }
    Ok(w.0)
}

pub fn decode_model(bytes: &[u8]) -> Result<EpfdaModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(GsfError::ModelFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(GsfError::ModelFormat(format!("unsupported version {version}")));
    }
    let tag = r.u32()?;
    let variant = GsfVariant::from_tag(tag as u32)
        .ok_or_else(|| GsfError::ModelFormat(format!("unknown variant tag {tag}")))?;
    let lgbp_levels = r.u32()?;

    let gabor = GaborBankParams {
        num_scales: r.u32()?,
        num_orientations: r.u32()?,
        k_max: r.f64()?,
        spacing_f: r.f64()?,
        sigma: r.f64()?,
    };
    let partition = PartitionConfig {
        m_rows: r.u32()?,
        n_cols: r.u32()?,
        sub_regions: r.u32()?,
        levels: r.u32()?,
    };
    let pp_enabled = r.u32()? != 0;
    let pp = PreprocessParams {
        gamma: r.f64()?,
        dog_sigma_inner: r.f64()?,
        dog_sigma_outer: r.f64()?,
        alpha: r.f64()?,
        tau: r.f64()?,
    };
    let (iw, ih) = (r.u32()?, r.u32()?);
    let feature = FeatureConfig {
        preprocess: pp_enabled.then_some(pp),
        gabor,
        variant,
        lgbp_levels,
        partition,
        image_size: (iw > 0 && ih > 0).then_some((iw, ih)),
    };
    feature
        .validate()
        .map_err(|e| GsfError::ModelFormat(format!("invalid feature config: {e}")))?;

    let weighted = r.u32()? != 0;
    let count = r.u32()?;
    if count != partition.region_count() {
        return Err(GsfError::ModelFormat(format!(
            "{count} regions stored, partition has {}",
            partition.region_count()
        )));
    }
    let mut regions = Vec::with_capacity(count);
    for region_index in 0..count {
        let input_dim = r.u32()?;
        let output_dim = r.u32()?;
        let class_count = r.u32()?;
        let len = input_dim
            .checked_mul(output_dim)
            .filter(|&n| n.saturating_mul(8) <= bytes.len())
            .ok_or_else(|| GsfError::ModelFormat("projection size overflows the file".into()))?;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(r.f64()?);
        }
        regions.push(FdaRegionModel {
            region_index,
            projection: DMatrix::from_row_slice(input_dim, output_dim, &values),
            pca_basis: None,
            class_count,
        });
    }
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        weights.push(r.f64()?);
    }
    if r.pos != bytes.len() {
        return Err(GsfError::ModelFormat(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(EpfdaModel {
        regions,
        weights,
        feature,
        weighted,
    })
}

pub fn save_model(model: &EpfdaModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EpfdaModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| GsfError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_model(&bytes)
}
