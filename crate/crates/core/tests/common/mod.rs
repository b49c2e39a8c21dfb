#![allow(dead_code)]

use std::path::PathBuf;

use catgen::{Atom, Category, LabelInventory, Slash, TaggedSentence};
use proptest::prelude::*;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_inventory() -> LabelInventory {
    let text = std::fs::read_to_string(fixture("synthetic_inventory.txt")).unwrap();
    LabelInventory::from_text(&text).unwrap()
}

pub fn cat(s: &str) -> Category {
    s.parse().unwrap()
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// One-sentence-per-category corpus with the given counts.
pub fn corpus_of(counts: &[(&str, usize)]) -> Vec<TaggedSentence> {
    counts
        .iter()
        .flat_map(|&(c, n)| {
            let c = cat(c);
            (0..n).map(move |_| TaggedSentence::new(vec!["w".into()], None, vec![c.clone()]).unwrap())
        })
        .collect()
}

const BASES: [&str; 5] = ["S", "NP", "N", "PP", "conj"];
const FEATURES: [&str; 5] = ["dcl", "b", "ng", "qem", "nb"];

fn atom_from(base: usize, feature: Option<usize>) -> Atom {
    Atom::new(BASES[base], feature.map(|f| FEATURES[f])).unwrap()
}

pub fn random_atom<R: Rng>(rng: &mut R) -> Atom {
    let feature = rng.gen_bool(0.3).then(|| rng.gen_range(0..FEATURES.len()));
    atom_from(rng.gen_range(0..BASES.len()), feature)
}

/// Random category of depth at most `depth` (an atom has depth 0).
pub fn random_category<R: Rng>(rng: &mut R, depth: usize) -> Category {
    if depth == 0 || rng.gen_bool(0.3) {
        return Category::Atom(random_atom(rng));
    }
    let slash = if rng.gen_bool(0.5) {
        Slash::Forward
    } else {
        Slash::Backward
    };
    Category::complex(random_category(rng, depth - 1), slash, random_category(rng, depth - 1))
}

pub fn arb_atom() -> impl Strategy<Value = Atom> {
    (0..BASES.len(), proptest::option::weighted(0.3, 0..FEATURES.len())).prop_map(|(b, f)| atom_from(b, f))
}

pub fn arb_category(depth: u32) -> impl Strategy<Value = Category> {
    arb_atom()
        .prop_map(Category::Atom)
        .prop_recursive(depth, 64, 2, |inner| {
            (inner.clone(), prop::bool::ANY, inner)
                .prop_map(|(l, fwd, r)| Category::complex(l, if fwd { Slash::Forward } else { Slash::Backward }, r))
        })
}
