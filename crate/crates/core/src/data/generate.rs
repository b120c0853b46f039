use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{answer_oracle, area_bin_edges};
use super::vocab::encode_question;
use super::{
    Category, Dataset, DatasetConfig, ObjectClass, ObjectSize, Question, Scene, SceneObject,
    VqaSample,
};
use crate::error::{Error, Result};

const CATEGORY_STREAM: u64 = u64::MAX;
const SPLIT_STREAM: u64 = u64::MAX - 1;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Largest-remainder apportionment of `n` items over `proportions`.
/// Ties in the remainder go to the earlier entry.
pub fn allocate(n: usize, proportions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn schedule<T: Clone>(items: &[(T, f64)], n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let props: Vec<f64> = items.iter().map(|(_, p)| *p).collect();
    let mut out = Vec::with_capacity(n);
    for ((item, _), count) in items.iter().zip(allocate(n, &props)) {
        out.extend(std::iter::repeat_n(item.clone(), count));
    }
    out.shuffle(rng);
    out
}

fn random_scene(config: &DatasetConfig, rng: &mut ChaCha8Rng) -> Scene {
    let n = rng.gen_range(config.min_objects..=config.max_objects);
    let g = config.grid_size;
    let cells = index::sample(rng, (g * g) as usize, n);
    let objects: Vec<SceneObject> = cells
        .iter()
        .map(|cell| {
            let class = ObjectClass::ALL[rng.gen_range(0..ObjectClass::ALL.len())];
            let size = if rng.gen_bool(0.5) {
                ObjectSize::Large
            } else {
                ObjectSize::Small
            };
            SceneObject {
                class,
                x: cell as u32 % g,
                y: cell as u32 / g,
                size,
            }
        })
        .collect();
    let zone = Scene::zone_for(&objects, config.urban_threshold);
    Scene {
        grid_size: g,
        objects,
        zone,
    }
}

fn random_class(rng: &mut ChaCha8Rng) -> ObjectClass {
    ObjectClass::ALL[rng.gen_range(0..ObjectClass::ALL.len())]
}

/// Presence slots are drawn so that "yes" and "no" are equally likely
/// whenever the scene allows both.
fn presence_question(scene: &Scene, rng: &mut ChaCha8Rng) -> Question {
    let mut present = Vec::new();
    let mut absent = Vec::new();
    for class in ObjectClass::ALL {
        for size in [None, Some(ObjectSize::Small), Some(ObjectSize::Large)] {
            let slot = (class, size);
            if scene.count(class, size) > 0 {
                present.push(slot);
            } else {
                absent.push(slot);
            }
        }
    }
    let pool = if absent.is_empty() || (!present.is_empty() && rng.gen_bool(0.5)) {
        &present
    } else {
        &absent
    };
    let (class, size) = pool[rng.gen_range(0..pool.len())];
    Question::Presence { class, size }
}

fn random_question(category: Category, scene: &Scene, rng: &mut ChaCha8Rng) -> Question {
    match category {
        // Counts name a class only.
        Category::Count => Question::Count {
            class: random_class(rng),
            size: None,
        },
        Category::Presence => presence_question(scene, rng),
        Category::Comparison => {
            let more = random_class(rng);
            let mut than = random_class(rng);
            while than == more {
                than = random_class(rng);
            }
            Question::Comparison { more, than }
        }
        Category::Area => Question::Area {
            class: random_class(rng),
        },
        Category::RuralUrban => Question::RuralUrban,
    }
}

/// Generates a reproducible dataset. Sample `i` is a pure function of the
/// seed, `i`, and the category and split drawn for `i` from the seeded
/// schedules.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let n = config.n_samples;
    let categories = schedule(
        &config.category_mix(),
        n,
        &mut stream(config.seed, CATEGORY_STREAM),
    );
    let splits = schedule(&config.splits, n, &mut stream(config.seed, SPLIT_STREAM));
    let edges = area_bin_edges(config.min_objects, config.max_objects);

    let mut samples = Vec::with_capacity(n);
    for (i, (category, split)) in categories.into_iter().zip(splits).enumerate() {
        let mut rng = stream(config.seed, i as u64);
        let scene = random_scene(config, &mut rng);
        let question = random_question(category, &scene, &mut rng);
        let tokens = encode_question(&question);
        if tokens.len() > config.k_max {
            return Err(Error::Template(format!(
                "{} question needs {} tokens but k_max is {}",
                category.name(),
                tokens.len(),
                config.k_max
            )));
        }
        let answer = answer_oracle(&scene, &question, &edges);
        samples.push(VqaSample {
            index: i,
            split,
            category,
            scene,
            question,
            tokens,
            answer,
        });
    }
    Ok(Dataset {
        config: config.clone(),
        samples,
    })
}
