//! Deterministic synthetic data with learnable cross-modal structure.
//!
//! A [`SyntheticWorld`] fixes per-class means in a shared latent space and
//! one random linear map per modality. A sample of class `c` draws
//! `z ~ N(mean_c, I)` and emits `A_T z + e_T` as its text feature and
//! `A_I z + e_I` as its image feature, so the two modalities are correlated
//! through `z` and both predict the class. Reusing one world across dataset
//! sizes lets a single trained model serve all of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Dataset, FeatureVector, GeoMultimediaObject, GeoPoint, Modality};

/// Spatial placement of generated objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialLayout {
    /// Uniform over `[0, extent]²`.
    Uniform,
    /// Isotropic Gaussian blobs around `clusters` uniform centres.
    Clustered { clusters: usize, spread: f64 },
}

impl SpatialLayout {
    pub fn clustered_default() -> Self {
        Self::Clustered {
            clusters: 20,
            spread: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub class_count: usize,
    pub text_dim: usize,
    pub image_dim: usize,
    /// Distance between class means, in units of the latent noise. Exact
    /// when there are no more classes than feature dimensions.
    pub separation: f64,
    /// Standard deviation of the per-modality feature noise.
    pub noise: f64,
    /// Side of the square region holding all locations.
    pub extent: f64,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            class_count: 10,
            text_dim: 32,
            image_dim: 48,
            separation: 4.0,
            noise: 0.5,
            extent: 1000.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    spec: WorldSpec,
    class_means: Matrix,
    text_map: Matrix,
    image_map: Matrix,
}

/// Paired training features: row `i` of both matrices is one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairs {
    pub text: Matrix,
    pub image: Matrix,
    pub labels: Vec<usize>,
}

// Stream ids keep each kind of draw independent of the others.
const STREAM_WORLD: u64 = 1;
const STREAM_PAIRS: u64 = 2;
const STREAM_INDEX: u64 = 3;
const STREAM_QUERIES: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl SyntheticWorld {
    pub fn new(spec: WorldSpec) -> Result<Self> {
        if spec.class_count < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        if spec.text_dim == 0 || spec.image_dim == 0 {
            return Err(Error::InvalidArgument(
                "feature dimensions must be positive".into(),
            ));
        }
        if !(spec.separation > 0.0 && spec.noise >= 0.0 && spec.extent > 0.0) {
            return Err(Error::InvalidArgument(
                "separation and extent must be positive, noise nonnegative".into(),
            ));
        }
        let latent = spec
            .class_count
            .min(spec.text_dim)
            .min(spec.image_dim)
            .max(1);
        let mut r = rng(spec.seed, STREAM_WORLD);
        let mut gaussian = |rows: usize, cols: usize, scale: f64| {
            let data = (0..rows * cols).map(|_| normal(&mut r) * scale).collect();
            Matrix::from_vec(rows, cols, data).expect("shape matches")
        };
        // the first `latent` classes sit on scaled axes, exactly `separation`
        // apart; any further classes get random means of the same spread
        let axis = spec.separation / 2f64.sqrt();
        let mut class_means = gaussian(
            spec.class_count,
            latent,
            spec.separation / (2.0 * latent as f64).sqrt(),
        );
        for c in 0..latent.min(spec.class_count) {
            class_means.row_mut(c).fill(0.0);
            class_means[(c, c)] = axis;
        }
        let scale = 1.0 / (latent as f64).sqrt();
        let text_map = gaussian(spec.text_dim, latent, scale);
        let image_map = gaussian(spec.image_dim, latent, scale);
        Ok(Self {
            spec,
            class_means,
            text_map,
            image_map,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn class_count(&self) -> usize {
        self.spec.class_count
    }

    fn latent(&self, rng: &mut impl Rng, class: usize) -> Vec<f64> {
        self.class_means
            .row(class)
            .iter()
            .map(|m| m + normal(rng))
            .collect()
    }

    fn emit(&self, rng: &mut impl Rng, map: &Matrix, z: &[f64]) -> Vec<f64> {
        let mut v = map.matvec(z).expect("latent length matches the map");
        for x in &mut v {
            *x += self.spec.noise * normal(rng);
        }
        v
    }

    fn location(
        &self,
        rng: &mut impl Rng,
        layout: SpatialLayout,
        centres: &[GeoPoint],
    ) -> GeoPoint {
        let e = self.spec.extent;
        match layout {
            SpatialLayout::Uniform => {
                GeoPoint::new(rng.random_range(0.0..e), rng.random_range(0.0..e))
            }
            SpatialLayout::Clustered { spread, .. } => {
                let c = centres[rng.random_range(0..centres.len())];
                GeoPoint::new(c.x + spread * normal(rng), c.y + spread * normal(rng))
            }
        }
    }

    fn centres(&self, rng: &mut impl Rng, layout: SpatialLayout) -> Result<Vec<GeoPoint>> {
        match layout {
            SpatialLayout::Uniform => Ok(Vec::new()),
            SpatialLayout::Clustered { clusters, spread } => {
                if clusters == 0 || !(spread >= 0.0 && spread.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "clustered layout needs at least one cluster and a finite spread".into(),
                    ));
                }
                let e = self.spec.extent;
                Ok((0..clusters)
                    .map(|_| GeoPoint::new(rng.random_range(0.0..e), rng.random_range(0.0..e)))
                    .collect())
            }
        }
    }

    /// `n` labelled pairs, labels `i mod classes` so classes are balanced.
    pub fn pairs(&self, n: usize, seed: u64) -> Pairs {
        let mut r = rng(seed, STREAM_PAIRS);
        let c = self.spec.class_count;
        let mut text = Vec::with_capacity(n * self.spec.text_dim);
        let mut image = Vec::with_capacity(n * self.spec.image_dim);
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        for &l in &labels {
            let z = self.latent(&mut r, l);
            text.extend(self.emit(&mut r, &self.text_map, &z));
            image.extend(self.emit(&mut r, &self.image_map, &z));
        }
        Pairs {
            text: Matrix::from_vec(n, self.spec.text_dim, text).expect("shape"),
            image: Matrix::from_vec(n, self.spec.image_dim, image).expect("shape"),
            labels,
        }
    }

    /// Training split as two datasets sharing ids: one text, one image object per pair.
    pub fn training(
        &self,
        n: usize,
        layout: SpatialLayout,
        seed: u64,
    ) -> Result<(Dataset, Dataset)> {
        let c = self.spec.class_count;
        if n < c * 10 {
            return Err(Error::InvalidArgument(format!(
                "training size {n} below 10 per class ({} needed)",
                c * 10
            )));
        }
        let p = self.pairs(n, seed);
        let mut r = rng(seed, STREAM_PAIRS + 16);
        let centres = self.centres(&mut r, layout)?;
        let mut texts = Vec::with_capacity(n);
        let mut images = Vec::with_capacity(n);
        for i in 0..n {
            let loc = self.location(&mut r, layout, &centres);
            let id = i as u64;
            texts.push(
                GeoMultimediaObject::new(id, loc, FeatureVector::text(p.text.row(i).to_vec()))
                    .with_label(p.labels[i]),
            );
            images.push(
                GeoMultimediaObject::new(id, loc, FeatureVector::image(p.image.row(i).to_vec()))
                    .with_label(p.labels[i]),
            );
        }
        Ok((self.dataset(texts), self.dataset(images)))
    }

    /// Labelled objects of one modality at generated locations.
    pub fn objects(
        &self,
        modality: Modality,
        n: usize,
        layout: SpatialLayout,
        seed: u64,
    ) -> Result<Dataset> {
        let stream = match modality {
            Modality::Image => STREAM_INDEX,
            Modality::Text => STREAM_QUERIES,
        };
        let mut r = rng(seed, stream);
        let centres = self.centres(&mut r, layout)?;
        let c = self.spec.class_count;
        let map = match modality {
            Modality::Text => &self.text_map,
            Modality::Image => &self.image_map,
        };
        let objects = (0..n)
            .map(|i| {
                let label = i % c;
                let z = self.latent(&mut r, label);
                let values = self.emit(&mut r, map, &z);
                let loc = self.location(&mut r, layout, &centres);
                GeoMultimediaObject::new(i as u64, loc, FeatureVector::new(modality, values))
                    .with_label(label)
            })
            .collect();
        Ok(self.dataset(objects))
    }

    fn dataset(&self, objects: Vec<GeoMultimediaObject>) -> Dataset {
        Dataset::new(
            objects,
            self.spec.text_dim,
            self.spec.image_dim,
            Some(self.spec.class_count),
        )
    }
}

/// Sizes and layout for one generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub world: WorldSpec,
    pub train_size: usize,
    pub index_size: usize,
    pub query_count: usize,
    pub layout: SpatialLayout,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            train_size: 2000,
            index_size: 10_000,
            query_count: 100,
            layout: SpatialLayout::Uniform,
        }
    }
}

/// A generated corpus: paired training split, image objects to index, text queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub train_text: Dataset,
    pub train_image: Dataset,
    pub index: Dataset,
    pub queries: Dataset,
}

pub fn synthesize(spec: &SynthSpec) -> Result<Synthetic> {
    let world = SyntheticWorld::new(spec.world.clone())?;
    let seed = spec.world.seed;
    let (train_text, train_image) = world.training(spec.train_size, spec.layout, seed)?;
    Ok(Synthetic {
        train_text,
        train_image,
        index: world.objects(Modality::Image, spec.index_size, spec.layout, seed)?,
        queries: world.objects(Modality::Text, spec.query_count, spec.layout, seed)?,
    })
}
