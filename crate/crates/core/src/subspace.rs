//! Ensemble of piecewise Fisher discriminants.
//!
//! One Fisher subspace is trained per spatial region. A face is projected
//! region by region and two faces are compared by summing (optionally
//! weighting) the per-region cosine similarities.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{GsfError, Result};
use crate::hist::HistogramSequence;
use crate::pipeline::FeatureConfig;

/// Eigenvalues below this fraction of the largest are treated as zero.
const EIGEN_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdaParams {
    /// Requested output dimension R; capped at `classes - 1`.
    pub requested_dim: usize,
    /// Ridge factor: `S_w + ridge * trace(S_w) / k * I`.
    pub ridge: f64,
    /// Fraction of total variance kept by the PCA pre-reduction.
    pub pca_variance: f64,
}

impl Default for FdaParams {
    fn default() -> Self {
        Self {
            requested_dim: 200,
            ridge: 1e-4,
            pca_variance: 0.99,
        }
    }
}

impl FdaParams {
    pub fn validate(&self) -> Result<()> {
        if self.requested_dim == 0 {
            return Err(GsfError::InvalidArgument("requested FDA dimension must be positive".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(GsfError::InvalidArgument("ridge must be non-negative".into()));
        }
        if !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return Err(GsfError::InvalidArgument("PCA variance fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Fisher subspace for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct FdaRegionModel {
    pub region_index: usize,
    /// Composite PCA-then-FLD projection, `input_dim x output_dim`.
    pub projection: DMatrix<f64>,
    /// PCA basis used for pre-reduction. Not persisted in model files.
    pub pca_basis: Option<DMatrix<f64>>,
    pub class_count: usize,
}

impl FdaRegionModel {
    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(GsfError::DimensionMismatch(format!(
                "region {} expects {} inputs, got {}",
                self.region_index,
                self.input_dim(),
                x.len()
            )));
        }
        let v = DVector::from_column_slice(x);
        Ok(self.projection.tr_mul(&v).as_slice().to_vec())
    }
}

/// Per-region projections plus fusion weights and everything needed to
/// reproduce feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct EpfdaModel {
    pub regions: Vec<FdaRegionModel>,
    pub weights: Vec<f64>,
    pub feature: FeatureConfig,
    /// Whether the weights were learned (false means all ones).
    pub weighted: bool,
}

impl EpfdaModel {
    pub fn projected_dim(&self) -> usize {
        self.regions.iter().map(FdaRegionModel::output_dim).sum()
    }
}

/// A face after projection: one part per region.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedFace {
    pub parts: Vec<Vec<f64>>,
}

impl ProjectedFace {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            parts: self.parts.iter().map(|p| p.iter().map(|v| v * factor).collect()).collect(),
        }
    }
}

/// Indices sorting `values` in descending order; ties keep index order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Flips each column so that its largest-magnitude entry is positive.
fn canonicalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn group_by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    classes
}

/// Within- and between-class scatter of the rows of `data`.
pub fn scatter_matrices(data: &DMatrix<f64>, labels: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = data.ncols();
    let n = data.nrows() as f64;
    let mean = data.row_sum().transpose() / n;
    let mut sw = DMatrix::zeros(dim, dim);
    let mut sb = DMatrix::zeros(dim, dim);
    for members in group_by_class(labels).values() {
        let mut class_mean = DVector::zeros(dim);
        for &i in members {
            class_mean += data.row(i).transpose();
        }
        class_mean /= members.len() as f64;
        for &i in members {
            let d = data.row(i).transpose() - &class_mean;
            sw.ger(1.0, &d, &d, 1.0);
        }
        let dm = &class_mean - &mean;
        sb.ger(members.len() as f64, &dm, &dm, 1.0);
    }
    (sw, sb)
}

/// `trace(S_b) / trace(S_w)` of the rows of `data`.
pub fn fisher_trace_ratio(data: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let (sw, sb) = scatter_matrices(data, labels);
    sb.trace() / sw.trace()
}

fn sample_matrix(samples: &[&[f64]]) -> Result<DMatrix<f64>> {
    let dim = samples[0].len();
    if dim == 0 {
        return Err(GsfError::DimensionMismatch("empty feature vectors".into()));
    }
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != dim) {
        return Err(GsfError::DimensionMismatch(format!(
            "sample {i} has length {}, expected {dim}",
            s.len()
        )));
    }
    Ok(DMatrix::from_fn(samples.len(), dim, |r, c| samples[r][c]))
}

/// PCA basis (columns) of the centred rows, keeping `variance` of the total
/// and at most `max_rank` components.
fn pca_basis(centred: &DMatrix<f64>, variance: f64, max_rank: usize) -> DMatrix<f64> {
    let (n, d) = centred.shape();
    let (eigenvalues, vectors, via_gram) = if n <= d {
        let gram = centred * centred.transpose();
        let eig = SymmetricEigen::new(gram);
        (eig.eigenvalues, eig.eigenvectors, true)
    } else {
        let cov = centred.transpose() * centred;
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues, eig.eigenvectors, false)
    };
    let order = descending_order(eigenvalues.as_slice());
    let largest = eigenvalues[order[0]].max(0.0);
    let positive: Vec<usize> = order
        .into_iter()
        .filter(|&i| eigenvalues[i] > largest * EIGEN_REL_TOL && eigenvalues[i] > 0.0)
        .collect();
    let total: f64 = positive.iter().map(|&i| eigenvalues[i]).sum();

    let mut keep = positive.len();
    if variance < 1.0 {
        let mut acc = 0.0;
        for (k, &i) in positive.iter().enumerate() {
            acc += eigenvalues[i];
            if acc >= variance * total {
                keep = k + 1;
                break;
            }
        }
    }
    keep = keep.min(max_rank);

    let mut basis = DMatrix::zeros(d, keep);
    for (col, &i) in positive.iter().take(keep).enumerate() {
        let v = vectors.column(i);
        if via_gram {
            // Right singular vector from a left one: X^T u / sqrt(lambda).
            let p = centred.tr_mul(&v) / eigenvalues[i].sqrt();
            basis.set_column(col, &p);
        } else {
            basis.set_column(col, &v);
        }
    }
    basis
}

/// Trains the Fisher subspace of one region.
///
/// Samples are centred and reduced by PCA to at most `n - c` components
/// (keeping `pca_variance` of the variance); the generalized eigenproblem
/// `S_b v = lambda S_w v` is then solved in the reduced space through a
/// Cholesky factor of the (ridge-regularized) within-class scatter. The top
/// `min(R, c - 1)` directions are kept, normalized so that `v^T S_w v = 1`,
/// and composed with the PCA basis into a single projection.
pub fn train_fda_region(
    region_index: usize,
    samples: &[&[f64]],
    labels: &[usize],
    params: &FdaParams,
) -> Result<FdaRegionModel> {
    params.validate()?;
    if samples.len() != labels.len() {
        return Err(GsfError::DimensionMismatch(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    if samples.is_empty() {
        return Err(GsfError::EmptySet("no training samples".into()));
    }
    let classes = group_by_class(labels);
    let c = classes.len();
    if c < 2 {
        return Err(GsfError::InsufficientClasses(format!("{c} class(es); at least 2 required")));
    }
    let n = samples.len();
    if n <= c {
        return Err(GsfError::InsufficientClasses(
            "at least one class needs two or more samples".into(),
        ));
    }

    let data = sample_matrix(samples)?;
    let mean = data.row_sum() / n as f64;
    let mut centred = data;
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }

    let basis = pca_basis(&centred, params.pca_variance, n - c);
    if basis.ncols() == 0 {
        return Err(GsfError::DegenerateScatter);
    }
    let reduced = &centred * &basis;
    let k = reduced.ncols();
    let (mut sw, sb) = scatter_matrices(&reduced, labels);

    let sb_trace = sb.trace();
    let sw_trace = sw.trace();
    if !(sb_trace > EIGEN_REL_TOL * (sb_trace + sw_trace)) {
        return Err(GsfError::DegenerateScatter);
    }
    if params.ridge > 0.0 {
        let shift = params.ridge * sw_trace / k as f64;
        for i in 0..k {
            sw[(i, i)] += shift;
        }
    }

    let chol = Cholesky::new(sw).ok_or(GsfError::SingularScatter)?;
    let l = chol.l();
    let a = l.solve_lower_triangular(&sb).ok_or(GsfError::SingularScatter)?;
    let m = l.solve_lower_triangular(&a.transpose()).ok_or(GsfError::SingularScatter)?;
    let m = (&m + m.transpose()) * 0.5;

    let eig = SymmetricEigen::new(m);
    let order = descending_order(eig.eigenvalues.as_slice());
    let out_dim = params.requested_dim.min(c - 1).min(k);
    if params.requested_dim > c - 1 {
        log::warn!(
            "region {region_index}: requested dimension {} exceeds classes - 1 = {}; using {out_dim}",
            params.requested_dim,
            c - 1
        );
    }
    let mut u = DMatrix::zeros(k, out_dim);
    for (col, &i) in order.iter().take(out_dim).enumerate() {
        u.set_column(col, &eig.eigenvectors.column(i));
    }
    let v = l
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or(GsfError::SingularScatter)?;

    let mut projection = &basis * v;
    canonicalize_signs(&mut projection);
    if projection.iter().any(|x| !x.is_finite()) {
        return Err(GsfError::SingularScatter);
    }
    Ok(FdaRegionModel {
        region_index,
        projection,
        pca_basis: Some(basis),
        class_count: c,
    })
}

/// Trains every region independently. `region_samples[j][i]` is the region
/// `j` vector of sample `i`.
pub fn train_regions(region_samples: &[Vec<Vec<f64>>], labels: &[usize], params: &FdaParams) -> Result<Vec<FdaRegionModel>> {
    region_samples
        .par_iter()
        .enumerate()
        .map(|(j, samples)| {
            let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
            train_fda_region(j, &refs, labels, params)
        })
        .collect()
}

pub fn project_regions(regions: &[FdaRegionModel], vectors: &[&[f64]]) -> Result<ProjectedFace> {
    if vectors.len() != regions.len() {
        return Err(GsfError::DimensionMismatch(format!(
            "model has {} regions, feature has {}",
            regions.len(),
            vectors.len()
        )));
    }
    let parts = regions
        .iter()
        .zip(vectors)
        .map(|(r, x)| r.project(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectedFace { parts })
}

/// `F_j = W_j^T X_j` for every region.
pub fn project(model: &EpfdaModel, seq: &HistogramSequence) -> Result<ProjectedFace> {
    let vectors: Vec<&[f64]> = seq.regions.iter().map(|r| r.values.as_slice()).collect();
    project_regions(&model.regions, &vectors)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GsfError::DimensionMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(GsfError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine that scores zero-norm parts as 0.
fn part_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    match cosine(a, b) {
        Err(GsfError::ZeroNorm) => Ok(0.0),
        other => other,
    }
}

/// Per-region cosine similarities.
pub fn part_similarities(a: &ProjectedFace, b: &ProjectedFace) -> Result<Vec<f64>> {
    if a.parts.len() != b.parts.len() {
        return Err(GsfError::DimensionMismatch(format!(
            "{} parts against {}",
            a.parts.len(),
            b.parts.len()
        )));
    }
    a.parts.iter().zip(&b.parts).map(|(x, y)| part_similarity(x, y)).collect()
}

/// Sum of per-region cosines, optionally weighted by `weights`.
pub fn fuse(similarities: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    match weights {
        None => Ok(similarities.iter().sum()),
        Some(w) if w.len() == similarities.len() => Ok(similarities.iter().zip(w).map(|(s, w)| w * s).sum()),
        Some(w) => Err(GsfError::DimensionMismatch(format!(
            "{} weights for {} regions",
            w.len(),
            similarities.len()
        ))),
    }
}

pub fn score(model: &EpfdaModel, a: &ProjectedFace, b: &ProjectedFace, weighted: bool) -> Result<f64> {
    let sims = part_similarities(a, b)?;
    fuse(&sims, weighted.then_some(model.weights.as_slice()))
}

/// Per-region recognition rate: each probe is matched to its nearest
/// gallery face using only region `j` (ties go to the earliest gallery
/// entry) and `w_j` is the fraction of probes matched to the right label.
pub fn learn_weights<L: PartialEq>(gallery: &[(ProjectedFace, L)], probes: &[(ProjectedFace, L)]) -> Result<Vec<f64>> {
    if gallery.is_empty() {
        return Err(GsfError::EmptySet("weight-learning gallery".into()));
    }
    if probes.is_empty() {
        return Err(GsfError::EmptySet("weight-learning probes".into()));
    }
    let regions = gallery[0].0.parts.len();
    if gallery.iter().chain(probes).any(|(f, _)| f.parts.len() != regions) {
        return Err(GsfError::DimensionMismatch("faces with differing part counts".into()));
    }
    (0..regions)
        .map(|j| {
            let mut correct = 0usize;
            for (probe, label) in probes {
                let mut best: Option<(f64, usize)> = None;
                for (gi, (g, _)) in gallery.iter().enumerate() {
                    let s = part_similarity(&probe.parts[j], &g.parts[j])?;
                    if best.is_none_or(|(b, _)| s > b) {
                        best = Some((s, gi));
                    }
                }
                if let Some((_, gi)) = best {
                    if gallery[gi].1 == *label {
                        correct += 1;
                    }
                }
            }
            Ok(correct as f64 / probes.len() as f64)
        })
        .collect()
}
