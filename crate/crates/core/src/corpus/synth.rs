use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::textenc::EMOTION_LABELS;

use super::record::{Dataset, Demographics, EssayRecord};
use super::schema::ColumnSchema;

/// Which kind of corpus to synthesize: scored essays for the regression
/// track, labeled essays for the emotion track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTask {
    Track1,
    Track2,
}

/// Trait columns the scored generator fills in.
pub const BIG_FIVE: [&str; 5] =
    ["openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism"];

/// Label counts for the shipped development-style fixture. The source table
/// lists per-label counts summing to 268 against a stated total of 270; the
/// fixture keeps every listed count (sadness stays 96) and assigns the two
/// unaccounted records to the two largest remaining classes.
pub const DEV_FIXTURE_COUNTS: [usize; EMOTION_LABELS.len()] = [96, 77, 32, 25, 14, 14, 12];

/// Seed for the shipped development-style fixture.
pub const DEV_FIXTURE_SEED: u64 = 2021;

const OPENERS: [&str; 6] = [
    "after reading the article",
    "when i finished the story",
    "thinking about the report",
    "having read the essay",
    "once i saw the news piece",
    "while going over the article",
];

const CLOSERS: [&str; 6] = [
    "and i keep thinking about the people involved",
    "and the situation stayed with me for a while",
    "so i talked about it with a friend later",
    "and i wonder how the families are doing now",
    "though the details were hard to take in",
    "and it was difficult to put the story down",
];

/// Three keyword families per label, indexed like `EMOTION_LABELS`. A
/// generated essay draws from exactly one family of its gold label, so a
/// learner must cover nine words per label rather than one.
const LABEL_FAMILIES: [[[&str; 3]; 3]; EMOTION_LABELS.len()] = [
    // sadness
    [
        ["heartbroken", "sorrowful", "grieving"],
        ["tearful", "mournful", "devastated"],
        ["hopeless", "crushed", "bereft"],
    ],
    // anger
    [
        ["furious", "outraged", "enraged"],
        ["resentful", "indignant", "livid"],
        ["seething", "bitter", "irate"],
    ],
    // neutral
    [
        ["ordinary", "routine", "factual"],
        ["unremarkable", "plain", "balanced"],
        ["measured", "impartial", "calm"],
    ],
    // fear
    [
        ["terrified", "frightened", "scared"],
        ["anxious", "alarmed", "panicked"],
        ["dreadful", "menacing", "threatening"],
    ],
    // surprise
    [
        ["astonished", "stunned", "amazed"],
        ["unexpected", "startling", "sudden"],
        ["baffled", "speechless", "blindsided"],
    ],
    // disgust
    [
        ["disgusted", "revolted", "nauseated"],
        ["repulsive", "vile", "foul"],
        ["sickening", "gross", "loathsome"],
    ],
    // joy
    [
        ["happy", "joyful", "delighted"],
        ["uplifting", "heartwarming", "cheerful"],
        ["hopeful", "thrilled", "overjoyed"],
    ],
];

const EMPATHY_MARKERS: [&str; 6] =
    ["moved", "touched", "caring", "tender", "warmth", "compassion"];

const DISTRESS_MARKERS: [&str; 6] =
    ["overwhelmed", "desperate", "strained", "frantic", "drained", "unsettled"];

const GENDERS: [&str; 3] = ["female", "male", "nonbinary"];
const ETHNICITIES: [&str; 5] = ["asian", "black", "hispanic", "mixed", "white"];
const EDUCATIONS: [&str; 5] = ["highschool", "college", "bachelor", "master", "phd"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn round_to(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (x * scale).round() / scale
}

fn labeled_essay(rng: &mut ChaCha8Rng, label_index: usize) -> String {
    let family = &LABEL_FAMILIES[label_index][rng.random_range(0..3)];
    let a = pick(rng, family);
    let b = pick(rng, family);
    let opener = pick(rng, &OPENERS);
    let closer = pick(rng, &CLOSERS);
    let middle = match rng.random_range(0..4u8) {
        0 => format!("i felt {a} and {b} about what happened"),
        1 => format!("the whole account seemed {a} and left me {b}"),
        2 => format!("it was {a} to read and i came away {b}"),
        _ => format!("my first reaction was {a} and then i felt {b}"),
    };
    format!("{opener} {middle} {closer}")
}

fn labeled_records(counts: &[usize; EMOTION_LABELS.len()], rng: &mut ChaCha8Rng) -> Vec<EssayRecord> {
    let mut records = Vec::with_capacity(counts.iter().sum());
    for (label_index, (&label, &count)) in EMOTION_LABELS.iter().zip(counts).enumerate() {
        for _ in 0..count {
            records.push(EssayRecord {
                essay: labeled_essay(rng, label_index),
                emotion: Some(label.to_string()),
                ..Default::default()
            });
        }
    }
    records.shuffle(rng);
    records
}

/// Generates a labeled corpus with an explicit per-label count, indexed like
/// `EMOTION_LABELS`. Deterministic under the seed.
pub fn synthesize_labeled(counts: &[usize; EMOTION_LABELS.len()], seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset {
        records: labeled_records(counts, &mut rng),
        provenance: format!("synthetic(seed={seed}, task=track2, counts={counts:?})"),
    }
}

fn markers(rng: &mut ChaCha8Rng, pool: &[&str], count: usize) -> String {
    (0..count).map(|_| pick(rng, pool)).collect::<Vec<_>>().join(" ")
}

fn scored_record(rng: &mut ChaCha8Rng) -> EssayRecord {
    let age = rng.random_range(18..=70) as f64;
    let gender = pick(rng, &GENDERS).to_string();
    let ethnicity = pick(rng, &ETHNICITIES).to_string();
    let income = (rng.random_range(20..=120) * 1000) as f64;
    let education = pick(rng, &EDUCATIONS).to_string();
    let personality: BTreeMap<String, f64> = BIG_FIVE
        .iter()
        .map(|t| ((*t).to_string(), round_to(1.0 + 6.0 * rng.random::<f64>(), 3)))
        .collect();

    // Shared latent term: both marker counts mix the same z, which plants
    // the empathy/distress correlation the regression experiments rely on.
    let z = rng.random::<f64>();
    let e_mix = 0.8 * z + 0.2 * rng.random::<f64>();
    let d_mix = 0.8 * z + 0.2 * rng.random::<f64>();
    let n_e = (6.0 * e_mix).round() as usize;
    let n_d = (6.0 * d_mix).round() as usize;

    let age01 = (age - 18.0) / 52.0;
    let inc01 = (income - 20_000.0) / 100_000.0;
    let open01 = (personality["openness"] - 1.0) / 6.0;
    let neuro01 = (personality["neuroticism"] - 1.0) / 6.0;
    let noise_e = 2.0 * rng.random::<f64>() - 1.0;
    let noise_d = 2.0 * rng.random::<f64>() - 1.0;
    let emp01 = (0.55 * (n_e as f64 / 6.0) + 0.25 * age01 + 0.15 * open01 + 0.05 * noise_e)
        .clamp(0.0, 1.0);
    let dis01 = (0.55 * (n_d as f64 / 6.0) + 0.25 * inc01 + 0.15 * neuro01 + 0.05 * noise_d)
        .clamp(0.0, 1.0);

    let opener = pick(rng, &OPENERS);
    let empathy_part = if n_e == 0 {
        "i felt little connection to the people".to_string()
    } else {
        format!("i felt {} for the people", markers(rng, &EMPATHY_MARKERS, n_e))
    };
    let distress_part = if n_d == 0 {
        "and i stayed mostly steady".to_string()
    } else {
        format!("and the pressure left me {}", markers(rng, &DISTRESS_MARKERS, n_d))
    };
    let closer = pick(rng, &CLOSERS);

    EssayRecord {
        essay: format!("{opener} {empathy_part} {distress_part} {closer}"),
        empathy: Some(round_to(1.0 + 6.0 * emp01, 4)),
        distress: Some(round_to(1.0 + 6.0 * dis01, 4)),
        emotion: None,
        demographics: Demographics {
            age: Some(age),
            gender: Some(gender),
            ethnicity: Some(ethnicity),
            income: Some(income),
            education: Some(education),
        },
        personality,
    }
}

const TRACK1_PROVENANCE: &str = "empathy=1+6*clip01(0.55*emp_markers/6 + 0.25*age01 + \
     0.15*openness01 + 0.05*noise), distress=1+6*clip01(0.55*dis_markers/6 + 0.25*income01 + \
     0.15*neuroticism01 + 0.05*noise)";

/// Generates a corpus with known structure for experiments.
///
/// Track 1 essays carry planted marker-word counts; empathy and distress
/// are noisy linear functions of those counts and the demographic fields,
/// with the exact formulas recorded in the provenance string. Track 2
/// essays are balanced over the seven labels (remainder spread over the
/// first labels in order).
pub fn synthesize_corpus(n: usize, seed: u64, task: SynthTask) -> Result<Dataset> {
    match task {
        SynthTask::Track1 => {
            if n < 2 {
                return Err(Error::Argument(format!(
                    "scored corpus needs at least 2 records, got {n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let records = (0..n).map(|_| scored_record(&mut rng)).collect();
            Ok(Dataset {
                records,
                provenance: format!(
                    "synthetic(seed={seed}, task=track1, n={n}, {TRACK1_PROVENANCE})"
                ),
            })
        }
        SynthTask::Track2 => {
            let labels = EMOTION_LABELS.len();
            if n < labels {
                return Err(Error::Argument(format!(
                    "labeled corpus needs at least one record per label ({labels}), got {n}"
                )));
            }
            let mut counts = [0usize; EMOTION_LABELS.len()];
            for (i, c) in counts.iter_mut().enumerate() {
                *c = n / labels + usize::from(i < n % labels);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Dataset {
                records: labeled_records(&counts, &mut rng),
                provenance: format!("synthetic(seed={seed}, task=track2, n={n})"),
            })
        }
    }
}

/// Column mapping matching what [`synthesize_corpus`] fills in for a task.
pub fn synth_schema(task: SynthTask) -> ColumnSchema {
    match task {
        SynthTask::Track1 => ColumnSchema {
            empathy: Some("empathy".into()),
            distress: Some("distress".into()),
            age: Some("age".into()),
            gender: Some("gender".into()),
            ethnicity: Some("ethnicity".into()),
            income: Some("income".into()),
            education: Some("education".into()),
            personality: BIG_FIVE
                .iter()
                .map(|t| ((*t).to_string(), format!("personality_{t}")))
                .collect(),
            ..ColumnSchema::essay_only("essay")
        },
        SynthTask::Track2 => ColumnSchema {
            emotion: Some("emotion".into()),
            ..ColumnSchema::essay_only("essay")
        },
    }
}
