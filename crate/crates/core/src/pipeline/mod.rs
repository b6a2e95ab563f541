//! End-to-end orchestration: feature extraction, training, enrollment and
//! gallery/probe evaluation.

mod config;
mod report;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

pub use config::{FeatureConfig, PipelineConfig, Preset};
pub use report::{Decision, EvalReport};

use crate::codes::{code_map_for, derivatives, rawdown_indices, GsfVariant};
use crate::error::{GsfError, Result};
use crate::gabor::{ConvolutionPath, GaborBank, Gmp};
use crate::hist::{partition, region_histograms, region_of, HistogramSequence};
use crate::imgio::{load_image, resize_crop, DatasetManifest, RasterImage, ResizeMode, Role};
use crate::preprocess::preprocess;
use crate::subspace::{self, learn_weights, project, train_regions, EpfdaModel, ProjectedFace};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "GSF_THREADS";

/// Worker count from `GSF_THREADS`, or the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| GsfError::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// An image with an identifier and a subject label.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub id: String,
    pub subject: String,
    pub image: RasterImage,
}

/// Turns images into histogram sequences under one [`FeatureConfig`].
///
/// Gabor banks are prepared once per image geometry and reused.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    path: ConvolutionPath,
    banks: Mutex<HashMap<(usize, usize), Arc<GaborBank>>>,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            path: ConvolutionPath::Fft,
            banks: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_convolution(mut self, path: ConvolutionPath) -> Self {
        self.path = path;
        self
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    fn bank(&self, width: usize, height: usize) -> Result<Arc<GaborBank>> {
        let mut banks = self.banks.lock().expect("bank cache poisoned");
        if let Some(b) = banks.get(&(width, height)) {
            return Ok(Arc::clone(b));
        }
        let bank = Arc::new(GaborBank::new(&self.cfg.gabor, width, height)?);
        banks.insert((width, height), Arc::clone(&bank));
        Ok(bank)
    }

    /// Resizing and illumination preprocessing, as configured.
    pub fn prepare(&self, img: &RasterImage) -> Result<RasterImage> {
        let img = match self.cfg.image_size {
            Some((w, h)) => resize_crop(img, w, h, ResizeMode::ScaleAndCrop)?,
            None => img.clone(),
        };
        match &self.cfg.preprocess {
            Some(p) => preprocess(&img, p),
            None => Ok(img),
        }
    }

    pub fn gmps(&self, img: &RasterImage) -> Result<Vec<Gmp>> {
        let img = self.prepare(img)?;
        self.bank(img.width(), img.height())?.apply(&img, self.path)
    }

    pub fn extract(&self, img: &RasterImage) -> Result<HistogramSequence> {
        let gmps = self.gmps(img)?;
        self.features_from_gmps(&gmps)
    }

    pub fn features_from_gmps(&self, gmps: &[Gmp]) -> Result<HistogramSequence> {
        let cfg = &self.cfg;
        if cfg.variant == GsfVariant::Rawdown {
            return self.rawdown(gmps);
        }
        let maps = gmps
            .par_iter()
            .map(|g| code_map_for(g, cfg.variant, cfg.lgbp_levels))
            .collect::<Result<Vec<_>>>()?;
        region_histograms(&maps, &cfg.partition)
    }

    /// Down-sampled G, Gx, Gy, G2 routed to the regions their pixels fall
    /// in. Per GMP the sample budget equals the histogram length a
    /// 16-level surface code would spend on it.
    fn rawdown(&self, gmps: &[Gmp]) -> Result<HistogramSequence> {
        let cfg = &self.cfg;
        let first = &gmps
            .first()
            .ok_or_else(|| GsfError::EmptySet("no Gabor pictures".into()))?
            .magnitude;
        let (w, h) = (first.width(), first.height());
        let regions = partition(h, w, &cfg.partition)?;
        let per_gmp = cfg.partition.region_count() * cfg.partition.sub_regions * cfg.partition.levels;
        let indices = rawdown_indices(w * h, per_gmp)?;
        let owner: Vec<usize> = indices
            .iter()
            .map(|&i| region_of(&regions, i % w, i / w).expect("partition covers the image"))
            .collect();

        let stacks = gmps
            .par_iter()
            .map(|g| derivatives(&g.magnitude))
            .collect::<Result<Vec<_>>>()?;
        let mut vectors = vec![Vec::new(); regions.len()];
        for stack in &stacks {
            for pic in [&stack.g, &stack.gx, &stack.gy, &stack.g2] {
                for (&i, &r) in indices.iter().zip(&owner) {
                    vectors[r].push(pic.pixels()[i]);
                }
            }
        }
        Ok(HistogramSequence::from_region_vectors(vectors, cfg.partition, gmps.len()))
    }
}

pub fn extract_features(img: &RasterImage, cfg: &FeatureConfig) -> Result<HistogramSequence> {
    FeatureExtractor::new(cfg)?.extract(img)
}

fn extract_all(extractor: &FeatureExtractor, images: &[&RasterImage]) -> Result<Vec<HistogramSequence>> {
    images.par_iter().map(|img| extractor.extract(img)).collect()
}

/// Maps subject labels to dense class ids in order of first appearance.
fn class_ids(subjects: &[&str]) -> (Vec<usize>, usize) {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let labels = subjects
        .iter()
        .map(|s| {
            let next = ids.len();
            *ids.entry(s).or_insert(next)
        })
        .collect();
    (labels, ids.len())
}

/// Trains region subspaces (and, if enabled, fusion weights) on labelled
/// images.
///
/// Weight learning splits the training set itself: the first image of each
/// subject acts as gallery, the remaining images as probes.
pub fn train_images(images: &[LabeledImage], cfg: &PipelineConfig) -> Result<EpfdaModel> {
    cfg.validate()?;
    let subjects: Vec<&str> = images.iter().map(|i| i.subject.as_str()).collect();
    let (labels, classes) = class_ids(&subjects);
    if classes < 2 {
        return Err(GsfError::InsufficientClasses(format!(
            "training set has {classes} subject(s); at least 2 required"
        )));
    }

    let extractor = FeatureExtractor::new(&cfg.feature)?;
    let refs: Vec<&RasterImage> = images.iter().map(|i| &i.image).collect();
    let features = extract_all(&extractor, &refs)?;

    let region_count = features[0].regions.len();
    let region_samples: Vec<Vec<Vec<f64>>> = (0..region_count)
        .map(|j| features.iter().map(|f| f.regions[j].values.clone()).collect())
        .collect();
    let regions = train_regions(&region_samples, &labels, &cfg.fda)?;

    let mut model = EpfdaModel {
        regions,
        weights: vec![1.0; region_count],
        feature: cfg.feature,
        weighted: cfg.weighting,
    };

    if cfg.weighting {
        let projected = features
            .par_iter()
            .map(|f| project(&model, f))
            .collect::<Result<Vec<_>>>()?;
        let mut seen = vec![false; classes];
        let mut gallery = Vec::new();
        let mut probes = Vec::new();
        for (face, &label) in projected.into_iter().zip(&labels) {
            if seen[label] {
                probes.push((face, label));
            } else {
                seen[label] = true;
                gallery.push((face, label));
            }
        }
        model.weights = learn_weights(&gallery, &probes)?;
    }
    Ok(model)
}

fn load_entries<'a>(entries: impl Iterator<Item = &'a crate::imgio::ManifestEntry>) -> Result<Vec<LabeledImage>> {
    let entries: Vec<_> = entries.collect();
    entries
        .par_iter()
        .map(|e| {
            Ok(LabeledImage {
                id: e.path.display().to_string(),
                subject: e.subject.clone(),
                image: load_image(&e.path)?,
            })
        })
        .collect()
}

pub fn train(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<EpfdaModel> {
    let images = load_entries(manifest.with_role(Role::Train))?;
    if images.is_empty() {
        return Err(GsfError::EmptySet("manifest has no train entries".into()));
    }
    train_images(&images, cfg)
}

/// Projects images through a trained model.
pub fn enroll(model: &EpfdaModel, images: &[&RasterImage]) -> Result<Vec<ProjectedFace>> {
    let extractor = FeatureExtractor::new(&model.feature)?;
    extract_all(&extractor, images)?
        .par_iter()
        .map(|f| project(model, f))
        .collect()
}

/// Rank-1 identification of every probe against the gallery.
///
/// Each probe takes the subject of its highest-scoring gallery image; ties
/// go to the earliest gallery entry.
pub fn evaluate_images(
    model: &EpfdaModel,
    gallery: &[LabeledImage],
    probes: &[LabeledImage],
    weighted: bool,
) -> Result<EvalReport> {
    if gallery.is_empty() {
        return Err(GsfError::EmptySet("gallery split".into()));
    }
    if probes.is_empty() {
        return Err(GsfError::EmptySet("probe split".into()));
    }
    let g_refs: Vec<&RasterImage> = gallery.iter().map(|i| &i.image).collect();
    let p_refs: Vec<&RasterImage> = probes.iter().map(|i| &i.image).collect();
    let g_faces = enroll(model, &g_refs)?;
    let p_faces = enroll(model, &p_refs)?;

    let decisions = probes
        .par_iter()
        .zip(&p_faces)
        .map(|(probe, face)| {
            let scores = g_faces
                .iter()
                .map(|g| subspace::score(model, face, g, weighted))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Decision::from_scores(probe, gallery, &scores))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(decisions, &model.feature))
}

pub fn evaluate(model: &EpfdaModel, manifest: &DatasetManifest, weighted: bool) -> Result<EvalReport> {
    let gallery = load_entries(manifest.with_role(Role::Gallery))?;
    let probes = load_entries(manifest.with_role(Role::Probe))?;
    evaluate_images(model, &gallery, &probes, weighted)
}

/// Score of two images under a model (weighted when the model learned
/// weights and `weighted` is set).
pub fn match_images(model: &EpfdaModel, a: &RasterImage, b: &RasterImage, weighted: bool) -> Result<f64> {
    let faces = enroll(model, &[a, b])?;
    subspace::score(model, &faces[0], &faces[1], weighted)
}
