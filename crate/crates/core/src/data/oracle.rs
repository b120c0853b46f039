//! Ground-truth answers and area binning.

use super::vocab::{AREA_BASE, COUNT_BINS, NO, RURAL, URBAN, YES};
use super::{ObjectClass, ObjectSize, Question, Scene, Zone};

/// Size-weighted cell count of one class: large objects cover 4 cells,
/// small ones 1.
pub fn area_cells(scene: &Scene, class: ObjectClass) -> u32 {
    scene
        .objects
        .iter()
        .filter(|o| o.class == class)
        .map(|o| o.size.cells())
        .sum()
}

/// Exact distribution of [`area_cells`] for any fixed class under the
/// generator: object count uniform in `min..=max`, class uniform over five
/// classes, size uniform over small/large. Index is the cell count.
pub fn area_distribution(min_objects: usize, max_objects: usize) -> Vec<f64> {
    let classes = ObjectClass::ALL.len() as f64;
    let other = 1.0 - 1.0 / classes;
    let per_size = 0.5 / classes;
    let (small, large) = (
        ObjectSize::Small.cells() as usize,
        ObjectSize::Large.cells() as usize,
    );
    let top = large * max_objects;

    let mut pmf = vec![0.0; top + 1];
    pmf[0] = 1.0;
    let mut mixed = vec![0.0; top + 1];
    let weight = 1.0 / (max_objects - min_objects + 1) as f64;
    for n in 1..=max_objects {
        let mut next = vec![0.0; top + 1];
        for (a, &p) in pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            next[a] += p * other;
            next[a + small] += p * per_size;
            next[a + large] += p * per_size;
        }
        pmf = next;
        if n >= min_objects {
            mixed
                .iter_mut()
                .zip(&pmf)
                .for_each(|(m, p)| *m += weight * p);
        }
    }
    mixed
}

/// Upper edges of the first three area quartile bins: the smallest cell
/// counts whose cumulative probability reaches 1/4, 1/2 and 3/4.
pub fn area_bin_edges(min_objects: usize, max_objects: usize) -> [u32; 3] {
    let pmf = area_distribution(min_objects, max_objects);
    let mut edges = [0u32; 3];
    for (k, edge) in edges.iter_mut().enumerate() {
        let target = (k + 1) as f64 / 4.0;
        let mut cdf = 0.0;
        for (a, p) in pmf.iter().enumerate() {
            cdf += p;
            if cdf >= target - 1e-12 {
                *edge = a as u32;
                break;
            }
        }
    }
    edges
}

/// Bin `0..4` for an area: the number of edges strictly below it.
pub fn area_bin(cells: u32, edges: &[u32; 3]) -> usize {
    edges.iter().filter(|&&e| cells > e).count()
}

/// Answer class for a question about a scene.
pub fn answer_oracle(scene: &Scene, question: &Question, area_edges: &[u32; 3]) -> usize {
    let yes_no = |b: bool| if b { YES } else { NO };
    match *question {
        Question::Count { class, size } => scene.count(class, size).min(COUNT_BINS - 1),
        Question::Presence { class, size } => yes_no(scene.count(class, size) > 0),
        Question::Comparison { more, than } => {
            yes_no(scene.count(more, None) > scene.count(than, None))
        }
        Question::Area { class } => AREA_BASE + area_bin(area_cells(scene, class), area_edges),
        Question::RuralUrban => match scene.zone {
            Zone::Rural => RURAL,
            Zone::Urban => URBAN,
        },
    }
}
