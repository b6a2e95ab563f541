//! `key = value` configuration files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::codes::GsfVariant;
use crate::error::{GsfError, Result};
use crate::gabor::GaborBankParams;
use crate::hist::PartitionConfig;
use crate::preprocess::PreprocessParams;
use crate::subspace::FdaParams;

/// Everything that determines how an image becomes a feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Illumination preprocessing; `None` skips it.
    pub preprocess: Option<PreprocessParams>,
    pub gabor: GaborBankParams,
    pub variant: GsfVariant,
    pub lgbp_levels: usize,
    /// `levels` is kept in sync with the variant by [`FeatureConfig::normalized`].
    pub partition: PartitionConfig,
    /// Optional `(width, height)` every input is resized to first.
    pub image_size: Option<(usize, usize)>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            preprocess: None,
            gabor: GaborBankParams::default(),
            variant: GsfVariant::Gsf1,
            lgbp_levels: 8,
            partition: PartitionConfig::FERET,
            image_size: None,
        }
    }
}

impl FeatureConfig {
    /// Histogram bins per code map implied by the variant. The down-sampled
    /// feature is sized to match a 16-level surface code.
    pub fn levels(&self) -> usize {
        match self.variant {
            GsfVariant::Gsf3 => 8,
            GsfVariant::Gsf1 | GsfVariant::Gsf2 | GsfVariant::Rawdown => 16,
            GsfVariant::Lgbp => self.lgbp_levels,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.partition.levels = self.levels();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.preprocess {
            p.validate()?;
        }
        self.gabor.validate()?;
        self.partition.validate()?;
        if self.partition.levels != self.levels() {
            return Err(GsfError::InvalidArgument(format!(
                "{} needs {} histogram levels, partition has {}",
                self.variant,
                self.levels(),
                self.partition.levels
            )));
        }
        if self.variant == GsfVariant::Lgbp
            && (self.lgbp_levels == 0 || self.lgbp_levels > 256 || 256 % self.lgbp_levels != 0)
        {
            return Err(GsfError::InvalidArgument(format!(
                "LGBP levels {} must divide 256",
                self.lgbp_levels
            )));
        }
        if let Some((w, h)) = self.image_size {
            if w == 0 || h == 0 {
                return Err(GsfError::InvalidArgument("image size must be positive".into()));
            }
        }
        Ok(())
    }

    /// Per-region input dimension for a bank of `num_gmps` pictures.
    pub fn region_dim(&self) -> usize {
        self.partition.region_len(self.gabor.num_gmps())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub feature: FeatureConfig,
    pub fda: FdaParams,
    /// Learn per-region fusion weights.
    pub weighting: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Preset::Feret.config()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 10 x 4 regions, 2 sub-regions, R = 200.
    Feret,
    /// 5 x 4 regions, 1 sub-region, R = 39.
    Orl,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "feret" => Some(Preset::Feret),
            "orl" => Some(Preset::Orl),
            _ => None,
        }
    }

    pub fn config(self) -> PipelineConfig {
        let (partition, r) = match self {
            Preset::Feret => (PartitionConfig::FERET, 200),
            Preset::Orl => (PartitionConfig::ORL, 39),
        };
        PipelineConfig {
            feature: FeatureConfig {
                partition,
                ..FeatureConfig::default()
            }
            .normalized(),
            fda: FdaParams {
                requested_dim: r,
                ..FdaParams::default()
            },
            weighting: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| GsfError::Config {
        line,
        reason: format!("invalid value {value:?} for {key}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(GsfError::Config {
            line,
            reason: format!("invalid boolean {value:?} for {key}"),
        }),
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| GsfError::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines. A `preset` line, wherever it appears,
    /// is applied before the other keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| GsfError::Config {
                line: line_no,
                reason: format!("expected key = value, found {line:?}"),
            })?;
            pairs.push((line_no, key.trim().to_string(), value.trim().to_string()));
        }

        let mut cfg = PipelineConfig::default();
        for (line, _, value) in pairs.iter().filter(|(_, k, _)| k == "preset") {
            let preset = Preset::parse(value).ok_or_else(|| GsfError::Config {
                line: *line,
                reason: format!("unknown preset {value:?}"),
            })?;
            cfg = preset.config();
        }

        let mut pp = cfg.feature.preprocess.unwrap_or_default();
        let mut pp_enabled = cfg.feature.preprocess.is_some();
        let mut width = cfg.feature.image_size.map(|s| s.0);
        let mut height = cfg.feature.image_size.map(|s| s.1);
        for (line, key, value) in &pairs {
            let (line, key, value) = (*line, key.as_str(), value.as_str());
            let f = &mut cfg.feature;
            match key {
                "preset" => {}
                "pp.enabled" => pp_enabled = parse_bool(line, key, value)?,
                "pp.gamma" => pp.gamma = parse_value(line, key, value)?,
                "pp.sigma_inner" => pp.dog_sigma_inner = parse_value(line, key, value)?,
                "pp.sigma_outer" => pp.dog_sigma_outer = parse_value(line, key, value)?,
                "pp.alpha" => pp.alpha = parse_value(line, key, value)?,
                "pp.tau" => pp.tau = parse_value(line, key, value)?,
                "gabor.scales" => f.gabor.num_scales = parse_value(line, key, value)?,
                "gabor.orientations" => f.gabor.num_orientations = parse_value(line, key, value)?,
                "gabor.kmax" => f.gabor.k_max = parse_value(line, key, value)?,
                "gabor.f" => f.gabor.spacing_f = parse_value(line, key, value)?,
                "gabor.sigma" => f.gabor.sigma = parse_value(line, key, value)?,
                "feature.variant" => {
                    f.variant = value.parse().map_err(|_| GsfError::Config {
                        line,
                        reason: format!("unknown feature variant {value:?}"),
                    })?
                }
                "feature.lgbp_levels" => f.lgbp_levels = parse_value(line, key, value)?,
                "part.m" => f.partition.m_rows = parse_value(line, key, value)?,
                "part.n" => f.partition.n_cols = parse_value(line, key, value)?,
                "part.s" => f.partition.sub_regions = parse_value(line, key, value)?,
                "image.width" => width = Some(parse_value(line, key, value)?),
                "image.height" => height = Some(parse_value(line, key, value)?),
                "fda.r" => cfg.fda.requested_dim = parse_value(line, key, value)?,
                "fda.ridge" => cfg.fda.ridge = parse_value(line, key, value)?,
                "fda.pca_var" => cfg.fda.pca_variance = parse_value(line, key, value)?,
                "weights.enabled" => cfg.weighting = parse_bool(line, key, value)?,
                other => {
                    return Err(GsfError::Config {
                        line,
                        reason: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.feature.preprocess = pp_enabled.then_some(pp);
        cfg.feature.image_size = match (width, height) {
            (None, None) => None,
            (Some(w), Some(h)) => Some((w, h)),
            _ => {
                return Err(GsfError::Config {
                    line: 0,
                    reason: "image.width and image.height must be given together".into(),
                })
            }
        };
        cfg.feature = cfg.feature.normalized();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.feature.validate()?;
        self.fda.validate()
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let f = &self.feature;
        let mut s = String::new();
        let pp = f.preprocess.unwrap_or_default();
        let _ = writeln!(s, "pp.enabled = {}", f.preprocess.is_some());
        let _ = writeln!(s, "pp.gamma = {}", pp.gamma);
        let _ = writeln!(s, "pp.sigma_inner = {}", pp.dog_sigma_inner);
        let _ = writeln!(s, "pp.sigma_outer = {}", pp.dog_sigma_outer);
        let _ = writeln!(s, "pp.alpha = {}", pp.alpha);
        let _ = writeln!(s, "pp.tau = {}", pp.tau);
        let _ = writeln!(s, "gabor.scales = {}", f.gabor.num_scales);
        let _ = writeln!(s, "gabor.orientations = {}", f.gabor.num_orientations);
        let _ = writeln!(s, "gabor.kmax = {}", f.gabor.k_max);
        let _ = writeln!(s, "gabor.f = {}", f.gabor.spacing_f);
        let _ = writeln!(s, "gabor.sigma = {}", f.gabor.sigma);
        let _ = writeln!(s, "feature.variant = {}", f.variant);
        let _ = writeln!(s, "feature.lgbp_levels = {}", f.lgbp_levels);
        let _ = writeln!(s, "part.m = {}", f.partition.m_rows);
        let _ = writeln!(s, "part.n = {}", f.partition.n_cols);
        let _ = writeln!(s, "part.s = {}", f.partition.sub_regions);
        if let Some((w, h)) = f.image_size {
            let _ = writeln!(s, "image.width = {w}");
            let _ = writeln!(s, "image.height = {h}");
        }
        let _ = writeln!(s, "fda.r = {}", self.fda.requested_dim);
        let _ = writeln!(s, "fda.ridge = {}", self.fda.ridge);
        let _ = writeln!(s, "fda.pca_var = {}", self.fda.pca_variance);
        let _ = writeln!(s, "weights.enabled = {}", self.weighting);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let feret = PipelineConfig::parse("preset = feret").unwrap();
        assert_eq!(feret.feature.partition, PartitionConfig::FERET);
        assert_eq!(feret.fda.requested_dim, 200);
        let orl = PipelineConfig::parse("fda.ridge = 0.01\npreset = orl\n").unwrap();
        assert_eq!(orl.feature.partition, PartitionConfig::ORL);
        assert_eq!(orl.fda.requested_dim, 39);
        assert_eq!(orl.fda.ridge, 0.01);
    }

    #[test]
    fn levels_follow_variant() {
        let c = PipelineConfig::parse("feature.variant = gsf3").unwrap();
        assert_eq!(c.feature.partition.levels, 8);
        let c = PipelineConfig::parse("feature.variant = lgbp\nfeature.lgbp_levels = 32").unwrap();
        assert_eq!(c.feature.partition.levels, 32);
        let c = PipelineConfig::parse("feature.variant = gsf2").unwrap();
        assert_eq!(c.feature.partition.levels, 16);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(matches!(PipelineConfig::parse("bogus = 1"), Err(GsfError::Config { line: 1, .. })));
        assert!(PipelineConfig::parse("preset = yale").is_err());
        assert!(PipelineConfig::parse("part.m = ten").is_err());
        assert!(PipelineConfig::parse("part.s = 3").is_err());
        assert!(PipelineConfig::parse("no equals sign").is_err());
        assert!(PipelineConfig::parse("image.width = 64").is_err());
        assert!(PipelineConfig::parse("pp.enabled = true\npp.sigma_outer = 0.5").is_err());
    }

    #[test]
    fn comments_and_flags() {
        let c = PipelineConfig::parse("# IP + GSF1 + W\npp.enabled = true # chain\nweights.enabled = false\n").unwrap();
        assert_eq!(c.feature.preprocess, Some(PreprocessParams::default()));
        assert!(!c.weighting);
    }

    #[test]
    fn text_round_trip() {
        let c = PipelineConfig::parse("preset = orl\npp.enabled = yes\npp.gamma = 0.3\nimage.width = 46\nimage.height = 56\nfeature.variant = gsf2").unwrap();
        assert_eq!(PipelineConfig::parse(&c.to_text()).unwrap(), c);
    }
}
