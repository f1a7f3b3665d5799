//! Synthetic incident narratives with planted crime series.
//!
//! Narratives are strings of template sentences filled from shared word
//! pools. Every series gets its own modus-operandi signature (a short run of
//! distinctive words) that is spliced into a sentence with probability
//! `signature_rate`; background records never carry a signature.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Record, RecordSet};
use crate::error::{Error, Result};
use crate::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_series: usize,
    pub series_sizes: Vec<usize>,
    pub n_random: usize,
    /// Pool sizes for the sentence slots: actors, actions, objects, places, details.
    pub vocab_pool: Vec<usize>,
    pub mo_signature_size: usize,
    pub signature_rate: f64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Five series of 8/7/4/15/22 records plus 441 unrelated ones.
    fn default() -> Self {
        Self {
            n_series: 5,
            series_sizes: vec![8, 7, 4, 15, 22],
            n_random: 441,
            vocab_pool: vec![10, 14, 18, 14, 12],
            mo_signature_size: 3,
            signature_rate: 0.5,
            min_sentences: 8,
            max_sentences: 14,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.series_sizes.len() != self.n_series {
            return Err(Error::config(format!(
                "series_sizes has {} entries but n_series is {}",
                self.series_sizes.len(),
                self.n_series
            )));
        }
        if self.n_series == 0 || self.series_sizes.contains(&0) || self.n_random == 0 {
            return Err(Error::config("series and random counts must all be >= 1"));
        }
        if self.vocab_pool.len() != POOLS.len() || self.vocab_pool.contains(&0) {
            return Err(Error::config(format!("vocab_pool needs {} positive sizes", POOLS.len())));
        }
        if self.mo_signature_size == 0 {
            return Err(Error::config("mo_signature_size must be >= 1"));
        }
        if !(self.signature_rate > 0.0 && self.signature_rate <= 1.0) {
            return Err(Error::config(format!("signature_rate {} not in (0, 1]", self.signature_rate)));
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return Err(Error::config("need 1 <= min_sentences <= max_sentences"));
        }
        Ok(())
    }

    pub fn total_records(&self) -> usize {
        self.series_sizes.iter().sum::<usize>() + self.n_random
    }
}

const ACTORS: &[&str] = &[
    "suspect",
    "offender",
    "male",
    "female",
    "subject",
    "perpetrator",
    "individual",
    "juvenile",
    "driver",
    "passenger",
    "accomplice",
    "person",
    "man",
    "woman",
    "teen",
    "stranger",
];
const ACTIONS: &[&str] = &[
    "entered",
    "approached",
    "took",
    "grabbed",
    "removed",
    "forced",
    "demanded",
    "displayed",
    "fled",
    "broke",
    "pried",
    "threatened",
    "struck",
    "pushed",
    "left",
    "damaged",
    "opened",
    "searched",
    "carried",
    "loaded",
];
const OBJECTS: &[&str] = &[
    "wallet",
    "purse",
    "phone",
    "laptop",
    "television",
    "jewelry",
    "cash",
    "keys",
    "vehicle",
    "bicycle",
    "tablet",
    "handgun",
    "backpack",
    "register",
    "tools",
    "medication",
    "watch",
    "camera",
    "console",
    "speaker",
    "tires",
    "catalytic",
    "radio",
    "documents",
];
const PLACES: &[&str] = &[
    "residence",
    "apartment",
    "parking",
    "store",
    "station",
    "driveway",
    "garage",
    "lot",
    "street",
    "alley",
    "complex",
    "office",
    "restaurant",
    "school",
    "park",
    "motel",
    "bus",
    "church",
    "warehouse",
    "pharmacy",
];
const DETAILS: &[&str] = &[
    "unknown",
    "direction",
    "foot",
    "unit",
    "report",
    "witness",
    "victim",
    "complainant",
    "officer",
    "scene",
    "area",
    "canvass",
    "evidence",
    "statement",
    "description",
    "footage",
    "video",
    "contact",
];
const POOLS: [&[&str]; 5] = [ACTORS, ACTIONS, OBJECTS, PLACES, DETAILS];

/// Distinctive M.O. vocabulary; disjoint from the shared pools.
const SIGNATURE_BANK: &[&str] = &[
    "crowbar",
    "rear",
    "sliding",
    "ski",
    "mask",
    "zip",
    "ties",
    "gloves",
    "screwdriver",
    "brick",
    "ladder",
    "balcony",
    "pillowcase",
    "duct",
    "tape",
    "shotgun",
    "machete",
    "scooter",
    "hoodie",
    "bandana",
    "pepper",
    "spray",
    "taser",
    "rental",
    "van",
    "tow",
    "truck",
    "slim",
    "jim",
    "ruse",
    "utility",
    "worker",
    "delivery",
    "uniform",
    "doggy",
    "door",
    "skylight",
    "vent",
    "chimney",
    "tarp",
    "blowtorch",
    "bolt",
    "cutters",
    "drill",
    "magnet",
    "key",
    "fob",
    "relay",
    "jammer",
    "spark",
    "plug",
    "porcelain",
    "shard",
    "garden",
    "hose",
    "flashlight",
    "headlamp",
    "wig",
    "cane",
    "wheelchair",
];

const CATEGORIES: &[&str] = &[
    "robbery residence",
    "robbery gas station",
    "pedestrian robbery",
    "attempt auto theft",
    "burglary",
    "larceny from vehicle",
    "shoplifting",
    "aggravated assault",
    "auto theft",
    "larceny",
    "fraud",
    "vandalism",
    "simple assault",
    "trespass",
];

/// Sentence shapes over pool indices, with literal filler words.
const TEMPLATES: &[&[Slot]] = &[
    &[
        Slot::Lit("the"),
        Slot::Pool(0),
        Slot::Pool(1),
        Slot::Lit("the"),
        Slot::Pool(2),
        Slot::Lit("from"),
        Slot::Lit("the"),
        Slot::Pool(3),
    ],
    &[Slot::Pool(4), Slot::Lit("stated"), Slot::Lit("the"), Slot::Pool(0), Slot::Pool(1), Slot::Pool(2)],
    &[Slot::Pool(0), Slot::Pool(1), Slot::Pool(3), Slot::Lit("and"), Slot::Pool(1), Slot::Pool(2)],
    &[Slot::Lit("at"), Slot::Time, Slot::Pool(0), Slot::Pool(1), Slot::Pool(3), Slot::Pool(4)],
    &[Slot::Pool(4), Slot::Pool(4), Slot::Lit("near"), Slot::Pool(3), Slot::Address],
    &[Slot::Pool(0), Slot::Pool(1), Slot::Lit("with"), Slot::Pool(2), Slot::Lit("toward"), Slot::Pool(3)],
];

#[derive(Debug, Clone, Copy)]
enum Slot {
    Lit(&'static str),
    Pool(usize),
    Time,
    Address,
}

/// Pool `k` truncated (or extended with numbered variants) to `size` words.
fn pool_words(k: usize, size: usize) -> Vec<String> {
    let base = POOLS[k];
    (0..size)
        .map(
            |i| {
                if i < base.len() {
                    base[i].to_string()
                } else {
                    format!("{}{}", base[i % base.len()], i / base.len())
                }
            },
        )
        .collect()
}

fn signature_words(series: usize, size: usize) -> Vec<String> {
    (0..size)
        .map(|w| {
            let idx = series * size + w;
            if idx < SIGNATURE_BANK.len() {
                SIGNATURE_BANK[idx].to_string()
            } else {
                format!("mo{series}x{w}")
            }
        })
        .collect()
}

struct Generator {
    pools: Vec<Vec<String>>,
    rng: Rng,
}

impl Generator {
    fn sentence(&mut self, signature: Option<&[String]>, rate: f64) -> String {
        let template = *TEMPLATES.choose(&mut self.rng).expect("templates non-empty");
        let mut words: Vec<String> = template
            .iter()
            .map(|slot| match *slot {
                Slot::Lit(w) => w.to_string(),
                Slot::Pool(k) => self.pools[k].choose(&mut self.rng).expect("pool non-empty").clone(),
                Slot::Time => format!("{}:{:02}", self.rng.random_range(1..=12), self.rng.random_range(0..4) * 15),
                Slot::Address => format!("{} block", self.rng.random_range(1..=99) * 100),
            })
            .collect();
        if let Some(sig) = signature {
            if self.rng.random::<f64>() < rate {
                let at = self.rng.random_range(0..=words.len());
                words.splice(at..at, sig.iter().cloned());
            }
        }
        let mut s = words.join(" ");
        s.push('.');
        s
    }

    fn narrative(&mut self, sentences: usize, signature: Option<&[String]>, rate: f64) -> String {
        let mut parts = Vec::with_capacity(sentences);
        for _ in 0..sentences {
            parts.push(self.sentence(signature, rate));
        }
        let mut text = parts.join(" ");
        if let Some(first) = text.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        text
    }
}

/// Generate series records followed by background records, then interleave
/// them in a seeded order. Series labels are `series_1`, `series_2`, ...
pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<RecordSet> {
    config.validate()?;
    let pools = config.vocab_pool.iter().enumerate().map(|(k, &n)| pool_words(k, n)).collect();
    let mut g = Generator { pools, rng: crate::derived_rng(config.seed, 0) };
    let mut records = Vec::with_capacity(config.total_records());

    for (s, &size) in config.series_sizes.iter().enumerate() {
        let sig = signature_words(s, config.mo_signature_size);
        let category = CATEGORIES[s % CATEGORIES.len()];
        for _ in 0..size {
            let n = g.rng.random_range(config.min_sentences..=config.max_sentences);
            records.push((
                g.narrative(n, Some(&sig), config.signature_rate),
                category,
                Some(format!("series_{}", s + 1)),
            ));
        }
    }
    for _ in 0..config.n_random {
        let n = g.rng.random_range(config.min_sentences..=config.max_sentences);
        let category = *CATEGORIES.choose(&mut g.rng).expect("categories non-empty");
        records.push((g.narrative(n, None, config.signature_rate), category, None));
    }

    use rand::seq::SliceRandom;
    records.shuffle(&mut g.rng);
    let records = records
        .into_iter()
        .enumerate()
        .map(|(i, (narrative, category, series))| Record {
            id: format!("INC{:05}", i + 1),
            narrative,
            category: category.to_string(),
            series,
        })
        .collect();
    RecordSet::new(records)
}
