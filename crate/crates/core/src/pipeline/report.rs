use std::fmt::Write as _;

use super::{FeatureConfig, LabeledImage};

/// Outcome for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub probe_id: String,
    pub predicted: String,
    pub truth: String,
    pub score: f64,
    /// 1-based rank of the true subject among gallery subjects ordered by
    /// their best score; `None` when the subject has no gallery image.
    pub true_rank: Option<usize>,
}

impl Decision {
    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }

    pub fn absent(&self) -> bool {
        self.true_rank.is_none()
    }

    pub(crate) fn from_scores(probe: &LabeledImage, gallery: &[LabeledImage], scores: &[f64]) -> Self {
        let mut best = 0usize;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }

        // Best score per subject and the earliest gallery index reaching it.
        let mut subjects: Vec<(&str, f64, usize)> = Vec::new();
        for (i, (g, &s)) in gallery.iter().zip(scores).enumerate() {
            match subjects.iter_mut().find(|(name, _, _)| *name == g.subject) {
                Some(entry) if s > entry.1 => {
                    entry.1 = s;
                    entry.2 = i;
                }
                Some(_) => {}
                None => subjects.push((g.subject.as_str(), s, i)),
            }
        }
        subjects.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)));
        let true_rank = subjects
            .iter()
            .position(|(name, _, _)| *name == probe.subject)
            .map(|p| p + 1);

        Decision {
            probe_id: probe.id.clone(),
            predicted: gallery[best].subject.clone(),
            truth: probe.subject.clone(),
            score: scores[best],
            true_rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rank1_rate: f64,
    pub decisions: Vec<Decision>,
    pub config_echo: String,
}

impl EvalReport {
    pub fn new(decisions: Vec<Decision>, feature: &FeatureConfig) -> Self {
        let correct = decisions.iter().filter(|d| d.correct()).count();
        let rank1_rate = if decisions.is_empty() {
            0.0
        } else {
            correct as f64 / decisions.len() as f64
        };
        let mut echo = String::new();
        let _ = write!(
            echo,
            "variant={} preprocess={} scales={} orientations={} m={} n={} s={} levels={}",
            feature.variant,
            feature.preprocess.is_some(),
            feature.gabor.num_scales,
            feature.gabor.num_orientations,
            feature.partition.m_rows,
            feature.partition.n_cols,
            feature.partition.sub_regions,
            feature.partition.levels,
        );
        Self {
            rank1_rate,
            decisions,
            config_echo: echo,
        }
    }

    pub fn absent_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.absent()).count()
    }

    /// Cumulative match rate at `rank` (1-based).
    pub fn cmc(&self, rank: usize) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        let hits = self
            .decisions
            .iter()
            .filter(|d| d.true_rank.is_some_and(|r| r <= rank))
            .count();
        hits as f64 / self.decisions.len() as f64
    }

    /// Tab-separated table, one probe per line, ending with `rank1 = <value>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.config_echo);
        let _ = writeln!(out, "probe\tpredicted\ttruth\tscore\tresult\ttrue_rank");
        for d in &self.decisions {
            let result = if d.absent() {
                "absent"
            } else if d.correct() {
                "hit"
            } else {
                "miss"
            };
            let rank = d.true_rank.map_or_else(|| "-".to_string(), |r| r.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                d.probe_id, d.predicted, d.truth, d.score, result, rank
            );
        }
        if self.absent_count() > 0 {
            let _ = writeln!(out, "# {} probe(s) have no gallery image of their subject", self.absent_count());
        }
        let _ = writeln!(out, "rank1 = {}", self.rank1_rate);
        out
    }
}
