//! Synthetic remote-sensing style question answering data.
//!
//! A scene is a symbolic list of objects on a square grid. Each sample pairs
//! one scene with one templated question and the answer class computed by
//! [`answer_oracle`].

mod generate;
mod io;
mod oracle;
pub mod vocab;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{allocate, generate_dataset};
pub use io::{export_dataset, import_dataset, read_dataset, write_dataset};
pub use oracle::{answer_oracle, area_bin, area_bin_edges, area_cells, area_distribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Building,
    Road,
    Water,
    Tree,
    Field,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 5] = [
        ObjectClass::Building,
        ObjectClass::Road,
        ObjectClass::Water,
        ObjectClass::Tree,
        ObjectClass::Field,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSize {
    Small,
    Large,
}

impl ObjectSize {
    /// Grid cells covered by an object of this size.
    pub fn cells(self) -> u32 {
        match self {
            ObjectSize::Small => 1,
            ObjectSize::Large => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: ObjectClass,
    pub x: u32,
    pub y: u32,
    pub size: ObjectSize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Rural,
    Urban,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub grid_size: u32,
    pub objects: Vec<SceneObject>,
    pub zone: Zone,
}

impl Scene {
    pub fn count(&self, class: ObjectClass, size: Option<ObjectSize>) -> usize {
        self.objects
            .iter()
            .filter(|o| o.class == class && size.is_none_or(|s| o.size == s))
            .count()
    }

    /// Urban iff the scene holds at least `threshold` buildings.
    pub fn zone_for(objects: &[SceneObject], threshold: usize) -> Zone {
        let buildings = objects
            .iter()
            .filter(|o| o.class == ObjectClass::Building)
            .count();
        if buildings >= threshold {
            Zone::Urban
        } else {
            Zone::Rural
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Count,
    Presence,
    Comparison,
    Area,
    RuralUrban,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Count,
        Category::Presence,
        Category::Comparison,
        Category::Area,
        Category::RuralUrban,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Count => "count",
            Category::Presence => "presence",
            Category::Comparison => "comparison",
            Category::Area => "area",
            Category::RuralUrban => "rural_urban",
        }
    }
}

/// A question template with its slots filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Question {
    Count {
        class: ObjectClass,
        size: Option<ObjectSize>,
    },
    Presence {
        class: ObjectClass,
        size: Option<ObjectSize>,
    },
    Comparison {
        more: ObjectClass,
        than: ObjectClass,
    },
    Area {
        class: ObjectClass,
    },
    RuralUrban,
}

impl Question {
    pub fn category(&self) -> Category {
        match self {
            Question::Count { .. } => Category::Count,
            Question::Presence { .. } => Category::Presence,
            Question::Comparison { .. } => Category::Comparison,
            Question::Area { .. } => Category::Area,
            Question::RuralUrban => Category::RuralUrban,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Count, presence, comparison and rural/urban questions.
    LrLike,
    /// Count, presence, comparison and area questions.
    HrLike,
}

impl Variant {
    pub fn categories(self) -> [Category; 4] {
        match self {
            Variant::LrLike => [
                Category::Count,
                Category::Presence,
                Category::Comparison,
                Category::RuralUrban,
            ],
            Variant::HrLike => [
                Category::Count,
                Category::Presence,
                Category::Comparison,
                Category::Area,
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub grid_size: u32,
    pub t_max: usize,
    pub k_max: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub urban_threshold: usize,
    pub variant: Variant,
    /// Category proportions. Empty means uniform over the variant's categories.
    pub mix: BTreeMap<Category, f64>,
    /// Split names and proportions, in assignment order.
    pub splits: Vec<(String, f64)>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::lr_like()
    }
}

impl DatasetConfig {
    /// 2,000 training and 500 test samples with rural/urban questions.
    pub fn lr_like() -> Self {
        Self {
            n_samples: 2500,
            grid_size: 8,
            t_max: 16,
            k_max: 12,
            min_objects: 8,
            max_objects: 8,
            urban_threshold: 3,
            variant: Variant::LrLike,
            mix: BTreeMap::new(),
            splits: vec![("train".into(), 0.8), ("test".into(), 0.2)],
            seed: 0,
        }
    }

    /// Area questions and a two-test-set split.
    pub fn hr_like() -> Self {
        Self {
            variant: Variant::HrLike,
            splits: vec![
                ("train".into(), 0.615),
                ("test1".into(), 0.317),
                ("test2".into(), 0.068),
            ],
            ..Self::lr_like()
        }
    }

    /// Effective category proportions, in `Category` order.
    pub fn category_mix(&self) -> Vec<(Category, f64)> {
        if self.mix.is_empty() {
            let cats = self.variant.categories();
            let p = 1.0 / cats.len() as f64;
            let mut mix: Vec<_> = cats.iter().map(|&c| (c, p)).collect();
            mix.sort_by_key(|(c, _)| *c);
            mix
        } else {
            self.mix.iter().map(|(&c, &p)| (c, p)).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 {
            return fail("n_samples must be positive".into());
        }
        if self.grid_size == 0 || self.t_max == 0 || self.k_max == 0 {
            return fail("grid_size, t_max and k_max must be positive".into());
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return fail(format!(
                "object range {}..={} is empty or starts at zero",
                self.min_objects, self.max_objects
            ));
        }
        if self.max_objects > self.t_max {
            return fail(format!(
                "max_objects {} exceeds t_max {}",
                self.max_objects, self.t_max
            ));
        }
        let cells = (self.grid_size * self.grid_size) as usize;
        if self.max_objects > cells {
            return fail(format!(
                "{} objects do not fit in {cells} cells",
                self.max_objects
            ));
        }
        let mix = self.category_mix();
        let allowed = self.variant.categories();
        for &(c, p) in &mix {
            if !allowed.contains(&c) && p > 0.0 {
                return fail(format!(
                    "category {} is not part of {:?}",
                    c.name(),
                    self.variant
                ));
            }
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("proportion {p} for {} is outside [0, 1]", c.name()));
            }
        }
        let total: f64 = mix.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("category proportions sum to {total}, not 1"));
        }
        if self.splits.is_empty() {
            return fail("at least one split is required".into());
        }
        let total: f64 = self.splits.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 || self.splits.iter().any(|(_, p)| *p < 0.0) {
            return fail(format!("split proportions sum to {total}, not 1"));
        }
        Ok(())
    }
}

/// Per-object raw descriptors padded to `t_max` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageObjectFeatures {
    /// Row-major `t_max × RAW_FEATURES`.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

/// One-hot class, x, y and normalized size.
pub const RAW_FEATURES: usize = ObjectClass::ALL.len() + 3;

impl ImageObjectFeatures {
    pub fn from_scene(scene: &Scene, t_max: usize) -> Result<Self> {
        if scene.objects.is_empty() || scene.objects.len() > t_max {
            return Err(Error::Dimension(format!(
                "scene with {} objects does not fit t_max {t_max}",
                scene.objects.len()
            )));
        }
        let span = (scene.grid_size.max(2) - 1) as f64;
        let mut values = vec![0.0; t_max * RAW_FEATURES];
        let mut mask = vec![false; t_max];
        for (t, o) in scene.objects.iter().enumerate() {
            let row = &mut values[t * RAW_FEATURES..(t + 1) * RAW_FEATURES];
            row[o.class.index()] = 1.0;
            row[5] = o.x as f64 / span;
            row[6] = o.y as f64 / span;
            row[7] = o.size.cells() as f64 / ObjectSize::Large.cells() as f64;
            mask[t] = true;
        }
        Ok(Self { values, mask })
    }

    pub fn t_max(&self) -> usize {
        self.mask.len()
    }
}

/// Token ids padded with [`vocab::PAD`] to `k_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryTokens {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl QueryTokens {
    pub fn new(tokens: &[usize], k_max: usize) -> Result<Self> {
        if tokens.is_empty() || tokens.len() > k_max {
            return Err(Error::Template(format!(
                "query of {} tokens does not fit k_max {k_max}",
                tokens.len()
            )));
        }
        let mut ids = tokens.to_vec();
        ids.resize(k_max, vocab::PAD);
        let mask = (0..k_max).map(|k| k < tokens.len()).collect();
        Ok(Self { ids, mask })
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaSample {
    pub index: usize,
    pub split: String,
    pub category: Category,
    pub scene: Scene,
    pub question: Question,
    pub tokens: Vec<usize>,
    pub answer: usize,
}

impl VqaSample {
    pub fn image_features(&self, t_max: usize) -> Result<ImageObjectFeatures> {
        ImageObjectFeatures::from_scene(&self.scene, t_max)
    }

    pub fn query_tokens(&self, k_max: usize) -> Result<QueryTokens> {
        QueryTokens::new(&self.tokens, k_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub samples: Vec<VqaSample>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Vec<&VqaSample> {
        self.samples.iter().filter(|s| s.split == name).collect()
    }

    pub fn split_names(&self) -> Vec<String> {
        self.config.splits.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Every split except the first, which is the training split.
    pub fn eval_splits(&self) -> Vec<String> {
        self.split_names().into_iter().skip(1).collect()
    }

    /// Recomputes every answer from its scene and question; returns the
    /// indices of samples whose stored answer disagrees.
    pub fn audit(&self) -> Vec<usize> {
        let edges = area_bin_edges(self.config.min_objects, self.config.max_objects);
        self.samples
            .iter()
            .filter(|s| {
                answer_oracle(&s.scene, &s.question, &edges) != s.answer
                    || s.question.category() != s.category
                    || vocab::encode_question(&s.question) != s.tokens
                    || Scene::zone_for(&s.scene.objects, self.config.urban_threshold)
                        != s.scene.zone
            })
            .map(|s| s.index)
            .collect()
    }
}
