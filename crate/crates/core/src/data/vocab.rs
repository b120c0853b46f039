//! Fixed question vocabulary, answer space and templates.

use super::{Category, ObjectClass, ObjectSize, Question};

/// Reserved padding token.
pub const PAD: usize = 0;

/// Every word a generated question can contain. Index is the token id.
pub const WORDS: &[&str] = &[
    "<pad>",
    "?",
    "how",
    "many",
    "are",
    "there",
    "is",
    "a",
    "in",
    "the",
    "image",
    "more",
    "than",
    "what",
    "area",
    "covered",
    "by",
    "this",
    "rural",
    "or",
    "urban",
    "small",
    "large",
    "building",
    "buildings",
    "road",
    "roads",
    "lake",
    "lakes",
    "tree",
    "trees",
    "field",
    "fields",
    "any",
    "scene",
    "of",
];

pub fn vocab_size() -> usize {
    WORDS.len()
}

pub fn token_id(word: &str) -> Option<usize> {
    WORDS.iter().position(|w| *w == word)
}

pub fn decode(tokens: &[usize]) -> String {
    tokens
        .iter()
        .filter(|&&t| t != PAD)
        .map(|&t| WORDS.get(t).copied().unwrap_or("<unk>"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn singular(class: ObjectClass) -> &'static str {
    match class {
        ObjectClass::Building => "building",
        ObjectClass::Road => "road",
        ObjectClass::Water => "lake",
        ObjectClass::Tree => "tree",
        ObjectClass::Field => "field",
    }
}

fn plural(class: ObjectClass) -> &'static str {
    match class {
        ObjectClass::Building => "buildings",
        ObjectClass::Road => "roads",
        ObjectClass::Water => "lakes",
        ObjectClass::Tree => "trees",
        ObjectClass::Field => "fields",
    }
}

fn size_word(size: ObjectSize) -> &'static str {
    match size {
        ObjectSize::Small => "small",
        ObjectSize::Large => "large",
    }
}

/// Question text as words, following the template of its category.
///
/// Comparison questions use strict "more than" semantics, so equal counts
/// answer "no".
pub fn question_words(q: &Question) -> Vec<&'static str> {
    let mut w = Vec::with_capacity(10);
    match *q {
        Question::Count { class, size } => {
            w.extend(["how", "many"]);
            w.extend(size.map(size_word));
            w.extend([plural(class), "are", "there", "?"]);
        }
        Question::Presence { class, size } => {
            w.extend(["is", "there", "a"]);
            w.extend(size.map(size_word));
            w.extend([singular(class), "in", "the", "image", "?"]);
        }
        Question::Comparison { more, than } => {
            w.extend([
                "are",
                "there",
                "more",
                plural(more),
                "than",
                plural(than),
                "?",
            ]);
        }
        Question::Area { class } => {
            w.extend([
                "what",
                "is",
                "the",
                "area",
                "covered",
                "by",
                plural(class),
                "?",
            ]);
        }
        Question::RuralUrban => {
            w.extend(["is", "this", "a", "rural", "or", "urban", "area", "?"]);
        }
    }
    w
}

pub fn encode_question(q: &Question) -> Vec<usize> {
    question_words(q)
        .into_iter()
        .map(|w| token_id(w).expect("template word missing from vocabulary"))
        .collect()
}

/// Count answers are binned as `0..=9` and `10+`.
pub const COUNT_BINS: usize = 11;
/// Area answers fall into one of four quartile bins.
pub const AREA_BINS: usize = 4;

pub const YES: usize = COUNT_BINS;
pub const NO: usize = COUNT_BINS + 1;
pub const AREA_BASE: usize = COUNT_BINS + 2;
pub const RURAL: usize = AREA_BASE + AREA_BINS;
pub const URBAN: usize = RURAL + 1;

/// Ordered names of every answer class. One classifier covers all categories.
pub fn answer_names() -> Vec<String> {
    let mut names: Vec<String> = (0..COUNT_BINS - 1).map(|i| i.to_string()).collect();
    names.push(format!("{}+", COUNT_BINS - 1));
    names.push("yes".into());
    names.push("no".into());
    names.extend((1..=AREA_BINS).map(|q| format!("area_q{q}")));
    names.push("rural".into());
    names.push("urban".into());
    names
}

pub fn n_answers() -> usize {
    URBAN + 1
}

/// Answer indices that are valid for a category.
pub fn answers_for(category: Category) -> std::ops::Range<usize> {
    match category {
        Category::Count => 0..COUNT_BINS,
        Category::Presence | Category::Comparison => YES..NO + 1,
        Category::Area => AREA_BASE..AREA_BASE + AREA_BINS,
        Category::RuralUrban => RURAL..URBAN + 1,
    }
}
