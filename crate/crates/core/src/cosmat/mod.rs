//! Shared semantic space for text and image features.
//!
//! Each modality is first projected onto its leading canonical-correlation
//! directions ([`corrproj`]), then mapped to class posteriors by a
//! multinomial logistic model ([`logstran`]). Both modalities share the
//! class set, so their posterior vectors live in the same space and can be
//! compared by cosine similarity.

pub mod corrproj;
pub mod logstran;

pub use corrproj::{fit_corr_proj, CorrProjModel, Ridge};
pub use logstran::{fit_logs_tran, LogsTranConfig, LogsTranFit, LogsTranModel};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{Dataset, FeatureVector, Modality, SemanticVector};
use crate::parallel::Parallelism;

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSpaceModel {
    pub corr_proj: CorrProjModel,
    pub text_logs_tran: LogsTranModel,
    pub image_logs_tran: LogsTranModel,
    pub concept_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSpaceConfig {
    pub gamma: usize,
    pub ridge: Ridge,
    pub logs_tran: LogsTranConfig,
}

impl Default for SemanticSpaceConfig {
    fn default() -> Self {
        Self {
            gamma: 16,
            ridge: Ridge::default(),
            logs_tran: LogsTranConfig::default(),
        }
    }
}

/// Convergence details of both logistic fits.
#[derive(Debug, Clone)]
pub struct SpaceFitReport {
    pub text: LogsTranFit,
    pub image: LogsTranFit,
}

impl SemanticSpaceModel {
    pub fn new(
        corr_proj: CorrProjModel,
        text_logs_tran: LogsTranModel,
        image_logs_tran: LogsTranModel,
        concept_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if text_logs_tran.class_count() != image_logs_tran.class_count() {
            return Err(Error::dim(
                text_logs_tran.class_count(),
                image_logs_tran.class_count(),
                "class count of the two logistic transforms",
            ));
        }
        for lt in [&text_logs_tran, &image_logs_tran] {
            if lt.input_dim() != corr_proj.gamma() {
                return Err(Error::dim(
                    corr_proj.gamma(),
                    lt.input_dim(),
                    "logistic input",
                ));
            }
        }
        if let Some(names) = &concept_names {
            if names.len() != text_logs_tran.class_count() {
                return Err(Error::dim(
                    text_logs_tran.class_count(),
                    names.len(),
                    "concept names",
                ));
            }
        }
        Ok(Self {
            corr_proj,
            text_logs_tran,
            image_logs_tran,
            concept_names,
        })
    }

    /// Fits the projection on paired rows, then one logistic transform per
    /// modality on the projected rows with the shared labels.
    pub fn fit(
        text: &Matrix,
        image: &Matrix,
        labels: &[usize],
        class_count: usize,
        config: &SemanticSpaceConfig,
    ) -> Result<(Self, SpaceFitReport)> {
        let corr_proj = fit_corr_proj(text, image, config.gamma, config.ridge)?;
        let text_proj = corr_proj.project_rows(Modality::Text, text)?;
        let image_proj = corr_proj.project_rows(Modality::Image, image)?;
        let text_fit = fit_logs_tran(&text_proj, labels, class_count, &config.logs_tran)?;
        let image_fit = fit_logs_tran(&image_proj, labels, class_count, &config.logs_tran)?;
        let model = Self::new(
            corr_proj,
            text_fit.model.clone(),
            image_fit.model.clone(),
            None,
        )?;
        Ok((
            model,
            SpaceFitReport {
                text: text_fit,
                image: image_fit,
            },
        ))
    }

    pub fn class_count(&self) -> usize {
        self.text_logs_tran.class_count()
    }

    pub fn text_dim(&self) -> usize {
        self.corr_proj.text_dim()
    }

    pub fn image_dim(&self) -> usize {
        self.corr_proj.image_dim()
    }

    pub fn embed_text(&self, feature: &FeatureVector) -> Result<SemanticVector> {
        self.embed(Modality::Text, feature)
    }

    pub fn embed_image(&self, feature: &FeatureVector) -> Result<SemanticVector> {
        self.embed(Modality::Image, feature)
    }

    /// Projects then transforms a feature of either modality.
    pub fn embed(&self, modality: Modality, feature: &FeatureVector) -> Result<SemanticVector> {
        if feature.modality != modality {
            return Err(Error::InvalidArgument(format!(
                "expected a {modality} feature, got {}",
                feature.modality
            )));
        }
        let projected = self.corr_proj.project(modality, &feature.values)?;
        match modality {
            Modality::Text => self.text_logs_tran.to_semantic(&projected),
            Modality::Image => self.image_logs_tran.to_semantic(&projected),
        }
    }
}

impl SemanticSpaceModel {
    /// Copy of `ds` with every object's semantic vector set from its feature.
    pub fn embed_dataset(&self, ds: &Dataset, parallelism: Parallelism) -> Result<Dataset> {
        let semantics =
            parallelism.try_map(&ds.objects, |o| self.embed(o.feature.modality, &o.feature))?;
        let mut out = ds.clone();
        for (o, s) in out.objects.iter_mut().zip(semantics) {
            o.semantic = Some(s);
        }
        out.class_count = Some(self.class_count());
        Ok(out)
    }
}

/// Cosine of the angle between two semantic vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &SemanticVector, b: &SemanticVector) -> Result<f64> {
    cosine(a.as_slice(), b.as_slice())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(a.len(), b.len(), "cosine similarity"));
    }
    let na = dot(a, a);
    let nb = dot(b, b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Paired training rows drawn from two labelled datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPairs {
    pub text: Matrix,
    pub image: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

/// Pairs text and image objects that share an id, in text-file order. Every
/// text object needs an image partner with the same label; unmatched image
/// objects are an error too. The class count is the declared one when both
/// files declare it, otherwise one past the largest label.
pub fn training_pairs(text: &Dataset, image: &Dataset) -> Result<TrainingPairs> {
    if text.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if text.len() != image.len() {
        return Err(Error::InvalidArgument(format!(
            "{} text objects but {} image objects",
            text.len(),
            image.len()
        )));
    }
    let by_id: std::collections::HashMap<_, _> = image.objects.iter().map(|o| (o.id, o)).collect();
    let mut text_rows = Vec::with_capacity(text.len() * text.text_dim);
    let mut image_rows = Vec::with_capacity(image.len() * image.image_dim);
    let mut labels = Vec::with_capacity(text.len());
    for t in &text.objects {
        let i = by_id.get(&t.id).ok_or_else(|| {
            Error::InvalidArgument(format!("text object {} has no image pair", t.id))
        })?;
        if t.feature.modality != Modality::Text || i.feature.modality != Modality::Image {
            return Err(Error::InvalidArgument(format!(
                "pair {} must be one text and one image object",
                t.id
            )));
        }
        let label = match (t.label, i.label) {
            (Some(a), Some(b)) if a == b => a,
            (Some(a), Some(b)) => {
                return Err(Error::InvalidArgument(format!(
                    "pair {} has labels {a} and {b}",
                    t.id
                )))
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "pair {} is unlabelled",
                    t.id
                )))
            }
        };
        text_rows.extend_from_slice(&t.feature.values);
        image_rows.extend_from_slice(&i.feature.values);
        labels.push(label);
    }
    let class_count = match (text.class_count, image.class_count) {
        (Some(a), Some(b)) if a != b => return Err(Error::dim(a, b, "declared class counts")),
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => labels.iter().max().map_or(0, |m| m + 1),
    };
    let n = labels.len();
    Ok(TrainingPairs {
        text: Matrix::from_vec(n, text.text_dim, text_rows)?,
        image: Matrix::from_vec(n, image.image_dim, image_rows)?,
        labels,
        class_count,
    })
}
