//! Deterministic synthetic patent corpora for tests, benchmarks and demos.
//!
//! Records mimic raw patent exports: markup and entities, boilerplate
//! prefixes, figure references, dependent claims, multi-member families,
//! planted near-duplicates across families, a share of German records and a
//! share of degenerate text that the quality filters should reject.

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FieldDoc, FieldKind, PatentRecord};

const NOUNS: &[&str] = &[
    "actuator", "adapter", "amplifier", "antenna", "anode", "assembly", "axle", "battery", "beam", "bearing", "blade",
    "board", "body", "bracket", "buffer", "cable", "camera", "capacitor", "carrier", "cartridge", "casing", "cathode",
    "cell", "chamber", "channel", "chassis", "circuit", "clamp", "coating", "coil", "collar", "compressor", "conductor",
    "connector", "controller", "converter", "coupling", "cover", "crystal", "cylinder", "damper", "decoder", "detector",
    "diaphragm", "diode", "disk", "display", "drive", "electrode", "emitter", "encoder", "engine", "enclosure", "fastener",
    "fiber", "film", "filter", "flange", "frame", "gasket", "gate", "gear", "generator", "grating", "grid", "guide",
    "handle", "heater", "hinge", "housing", "hub", "impeller", "inductor", "inverter", "joint", "lens", "lever", "link",
    "magnet", "manifold", "membrane", "memory", "mirror", "module", "motor", "mount", "nozzle", "oscillator", "panel",
    "piston", "pixel", "plate", "platform", "polymer", "port", "processor", "probe", "pulley", "pump", "rail", "receiver",
    "reflector", "regulator", "relay", "reservoir", "resistor", "resonator", "rotor", "sensor", "separator", "shaft",
    "shield", "shutter", "sleeve", "slider", "socket", "spring", "stator", "substrate", "switch", "terminal",
    "thermistor", "transistor", "transmitter", "tube", "turbine", "valve", "vane", "waveguide", "wheel", "winding",
    "wire", "layer", "interface", "bus", "register", "cache", "scheduler", "network", "node", "server", "packet",
];
const ADJS: &[&str] = &[
    "adjustable", "annular", "auxiliary", "axial", "central", "ceramic", "compact", "conductive", "curved", "cylindrical",
    "digital", "distal", "dynamic", "elastic", "electronic", "external", "first", "flexible", "fluid", "hollow",
    "inner", "insulating", "integrated", "internal", "lateral", "linear", "lower", "magnetic", "main", "mechanical",
    "metallic", "modular", "movable", "optical", "outer", "parallel", "planar", "porous", "primary", "proximal",
    "radial", "rectangular", "removable", "resilient", "rigid", "rotatable", "second", "secondary", "sealed",
    "semiconductor", "slidable", "thermal", "third", "thin", "transparent", "tubular", "upper", "variable", "wireless",
];
const VERBS: &[&str] = &[
    "supports", "receives", "engages", "surrounds", "drives", "controls", "couples", "connects", "encloses", "guides",
    "holds", "measures", "monitors", "regulates", "rotates", "seals", "senses", "stores", "transmits", "converts",
    "detects", "filters", "heats", "cools", "moves", "positions", "protects", "actuates", "adjusts", "amplifies",
];
const PREPS: &[&str] = &[
    "adjacent to", "along", "around", "between", "inside", "near", "on", "over", "through", "under", "within",
    "against", "behind", "beside", "across",
];
const PURPOSES: &[&str] = &[
    "to reduce power consumption", "to improve heat dissipation", "to simplify assembly", "to increase accuracy",
    "to lower manufacturing cost", "to extend service life", "to reduce noise", "to improve signal quality",
    "to prevent leakage", "to increase throughput", "to reduce weight", "to improve reliability",
];

const DE_NOUNS: &[&str] = &[
    "Vorrichtung", "Gehäuse", "Sensor", "Steuerung", "Welle", "Pumpe", "Ventil", "Schaltung", "Elektrode", "Schicht",
    "Platte", "Motor", "Leitung", "Kammer", "Feder", "Halterung", "Anordnung", "Einrichtung", "Verbindung", "Öffnung",
];
const DE_ADJS: &[&str] = &[
    "erste", "zweite", "äußere", "innere", "bewegliche", "elektrische", "optische", "flexible", "obere", "untere",
];
const DE_VERBS: &[&str] = &[
    "umfasst", "verbindet", "trägt", "steuert", "misst", "erzeugt", "enthält", "bewegt", "schützt", "überträgt",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty word list")
}

fn np(rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.6) {
        format!("{} {}", pick(rng, ADJS), pick(rng, NOUNS))
    } else {
        pick(rng, NOUNS).to_string()
    }
}

fn article(word: &str) -> &'static str {
    if word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

fn a_np(rng: &mut ChaCha8Rng) -> String {
    let n = np(rng);
    format!("{} {n}", article(&n))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let s = match rng.random_range(0..5) {
        0 => format!("{} {} {} {} {}", a_np(rng), pick(rng, VERBS), a_np(rng), pick(rng, PREPS), a_np(rng)),
        1 => format!("The {} {} the {} {}", np(rng), pick(rng, VERBS), np(rng), pick(rng, PURPOSES)),
        2 => format!(
            "{} is disposed {} the {} and {} {}",
            a_np(rng),
            pick(rng, PREPS),
            np(rng),
            pick(rng, VERBS),
            a_np(rng)
        ),
        3 => format!(
            "When the {} {} the {}, the {} {} {}",
            np(rng),
            pick(rng, VERBS),
            np(rng),
            np(rng),
            pick(rng, VERBS),
            a_np(rng)
        ),
        _ => format!(
            "{} comprising {} and {} is provided {}",
            a_np(rng),
            a_np(rng),
            a_np(rng),
            pick(rng, PURPOSES)
        ),
    };
    format!("{}.", capitalize(&s))
}

fn paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    (0..sentences).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
}

fn german_sentence(rng: &mut ChaCha8Rng) -> String {
    format!(
        "Die {} {} {} die {} {} und eine {} {} mit der {}.",
        pick(rng, DE_ADJS),
        pick(rng, DE_NOUNS),
        pick(rng, DE_VERBS),
        pick(rng, DE_ADJS),
        pick(rng, DE_NOUNS),
        pick(rng, DE_ADJS),
        pick(rng, DE_NOUNS),
        pick(rng, DE_NOUNS)
    )
}

fn claims(rng: &mut ChaCha8Rng) -> Vec<String> {
    let subject = np(rng);
    let parts: Vec<String> = (0..rng.random_range(3..6))
        .map(|_| format!("{} {} {}", a_np(rng), pick(rng, VERBS), a_np(rng)))
        .collect();
    let mut out = vec![format!(
        "1. {} {subject} comprising: {}.",
        capitalize(article(&subject)),
        parts.join("; ")
    )];
    for i in 2..rng.random_range(3..7) {
        let c = if rng.random_bool(0.8) {
            format!("{i}. The {subject} of claim {}, wherein the {} {} {}.", rng.random_range(1..i), np(rng), pick(rng, VERBS), a_np(rng))
        } else {
            format!("{i}. A method of operating {} comprising {} the {}.", a_np(rng), pick(rng, VERBS), np(rng))
        };
        out.push(c);
    }
    out
}

/// Adds markup, entities, boilerplate and figure references.
fn dirty(rng: &mut ChaCha8Rng, text: &str, prefix: &str) -> String {
    let mut s = text.to_string();
    if rng.random_bool(0.3) {
        s = s.replacen(". ", " (FIG. 2). ", 1);
    }
    if rng.random_bool(0.2) {
        s = s.replacen(" and ", " &amp; ", 1);
    }
    if rng.random_bool(0.3) {
        s = format!("<p>{s}</p>");
    }
    if !prefix.is_empty() && rng.random_bool(0.4) {
        s = format!("{prefix} {s}");
    }
    if rng.random_bool(0.1) {
        s = s.replace(' ', "  ");
    }
    s
}

/// Replaces `k` distinct random word positions with fresh words.
pub fn perturb_words(rng: &mut ChaCha8Rng, text: &str, k: usize) -> String {
    let mut words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if words.is_empty() {
        return String::new();
    }
    let k = k.min(words.len());
    let idx = rand::seq::index::sample(rng, words.len(), k);
    for i in idx {
        words[i] = format!("variant{}", rng.random_range(0..1_000_000u32));
    }
    words.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub docs: usize,
    pub seed: u64,
    /// Share of records that join an earlier record's family.
    pub family_frac: f64,
    /// Share of records whose abstract nearly copies an earlier record outside its family.
    pub near_dup_frac: f64,
    pub german_frac: f64,
    pub junk_frac: f64,
    pub missing_family_frac: f64,
    /// Sentences per abstract.
    pub abstract_sentences: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 1000,
            seed: 42,
            family_frac: 0.15,
            near_dup_frac: 0.05,
            german_frac: 0.03,
            junk_frac: 0.03,
            missing_family_frac: 0.02,
            abstract_sentences: 6,
        }
    }
}

/// Raw records in file order. Publication numbers are unique.
pub fn records(cfg: &SynthConfig) -> Vec<PatentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let mut out: Vec<PatentRecord> = Vec::with_capacity(cfg.docs);
    let mut clean_abstracts: Vec<String> = Vec::with_capacity(cfg.docs);
    for i in 0..cfg.docs {
        let pub_no = format!("US{:08}", 10_000_000 + i * 7 + rng.random_range(0..7));
        let date = epoch + Days::new(rng.random_range(0..8000));
        let roll: f64 = rng.random();
        let mut family_id = Some(format!("F{i:07}"));
        let (abstract_text, claim_list, dwpi);
        if i > 0 && roll < cfg.family_frac {
            let j = rng.random_range(0..i);
            let base: &PatentRecord = &out[j];
            family_id = base.family_id.clone();
            abstract_text = perturb_words(&mut rng, &clean_abstracts[j], 2);
            claim_list = base.claims_raw.clone();
            dwpi = base.dwpi_raw.clone();
        } else if i > 0 && roll < cfg.family_frac + cfg.near_dup_frac {
            let j = rng.random_range(0..i);
            abstract_text = perturb_words(&mut rng, &clean_abstracts[j], 1);
            claim_list = claims(&mut rng);
            dwpi = Some(paragraph(&mut rng, 3));
        } else if roll < cfg.family_frac + cfg.near_dup_frac + cfg.german_frac {
            abstract_text = (0..5).map(|_| german_sentence(&mut rng)).collect::<Vec<_>>().join(" ");
            claim_list = vec![format!("1. {}", german_sentence(&mut rng))];
            dwpi = None;
        } else if roll < cfg.family_frac + cfg.near_dup_frac + cfg.german_frac + cfg.junk_frac {
            let line = sentence(&mut rng);
            abstract_text = vec![line; 12].join("\n");
            claim_list = vec!["1. See description.".into()];
            dwpi = Some(format!("{} {} {}", pick(&mut rng, NOUNS), pick(&mut rng, NOUNS), pick(&mut rng, NOUNS)));
        } else {
            abstract_text = paragraph(&mut rng, cfg.abstract_sentences);
            claim_list = claims(&mut rng);
            dwpi = Some(paragraph(&mut rng, 3));
        }
        if rng.random_bool(cfg.missing_family_frac) {
            family_id = None;
        }
        let raw_abstract = dirty(&mut rng, &abstract_text, "ABSTRACT");
        let raw_claims = claim_list
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { dirty(&mut rng, c, "What is claimed is:") } else { c.clone() })
            .collect();
        clean_abstracts.push(abstract_text);
        out.push(PatentRecord {
            pub_no,
            family_id,
            pub_date: date,
            abstract_raw: Some(raw_abstract),
            claims_raw: raw_claims,
            dwpi_raw: dwpi,
        });
    }
    out
}

/// An abstract-only field corpus of `docs` documents in which `pairs`
/// document pairs are planted near-duplicates: the second member repeats
/// the first with one word replaced. Returns the documents and the planted
/// index pairs.
pub fn planted_field_corpus(docs: usize, pairs: usize, seed: u64) -> (Vec<FieldDoc>, Vec<(usize, usize)>) {
    assert!(2 * pairs <= docs, "not enough documents for the planted pairs");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts: Vec<String> = (0..docs - pairs).map(|_| paragraph(&mut rng, 12)).collect();
    let mut planted = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let src = p * ((docs - pairs) / pairs);
        let copy = perturb_words(&mut rng, &texts[src], 1);
        planted.push((src, texts.len()));
        texts.push(copy);
    }
    let docs = texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| FieldDoc::new(&format!("D{i:06}"), FieldKind::Abstract, t))
        .collect();
    (docs, planted)
}
