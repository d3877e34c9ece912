//! Synthetic summarization corpus.
//!
//! A source is a list of templated fact clauses `<entity> <verb> the <object> .`
//! over a closed lexicon. Its reference keeps the most salient clauses
//! (those whose entity is mentioned most often in the source, earliest
//! first), rewritten through a fixed paraphrase table and joined by commas.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, DocumentPair, Split, Vocabulary};

const ENTITIES: [&str; 24] = [
    "alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy", "mallory", "nina", "oscar",
    "peggy", "quinn", "rupert", "sybil", "trent", "ursula", "victor", "walter", "xena", "yusuf", "zoe",
];

const VERBS: [(&str, &str); 12] = [
    ("bought", "purchased"),
    ("sold", "traded"),
    ("built", "constructed"),
    ("painted", "decorated"),
    ("visited", "toured"),
    ("repaired", "fixed"),
    ("rented", "leased"),
    ("found", "discovered"),
    ("lost", "misplaced"),
    ("cleaned", "washed"),
    ("moved", "relocated"),
    ("ordered", "requested"),
];

const OBJECTS: [(&str, Option<&str>); 24] = [
    ("car", Some("vehicle")),
    ("boat", None),
    ("house", Some("home")),
    ("bike", None),
    ("lamp", None),
    ("desk", Some("table")),
    ("garden", None),
    ("shop", None),
    ("farm", Some("ranch")),
    ("bridge", None),
    ("piano", None),
    ("clock", Some("timepiece")),
    ("tower", None),
    ("barn", None),
    ("kitchen", None),
    ("window", Some("pane")),
    ("fence", None),
    ("truck", None),
    ("painting", Some("artwork")),
    ("sofa", None),
    ("tent", None),
    ("cabin", Some("hut")),
    ("statue", None),
    ("mill", None),
];

/// Shape of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthProfile {
    pub n_entities: usize,
    pub n_verbs: usize,
    pub n_objects: usize,
    pub min_clauses: usize,
    pub max_clauses: usize,
    pub min_summary_clauses: usize,
    pub max_summary_clauses: usize,
    /// Probability that a clause mentions the document's topic entity.
    pub topic_rate: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            n_entities: 16,
            n_verbs: 12,
            n_objects: 24,
            min_clauses: 6,
            max_clauses: 12,
            min_summary_clauses: 2,
            max_summary_clauses: 4,
            topic_rate: 0.4,
        }
    }
}

impl SynthProfile {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::config(format!("synth profile: {m}")));
        if self.n_entities < 2 || self.n_entities > ENTITIES.len() {
            return bad("n_entities out of range");
        }
        if self.n_verbs < 1 || self.n_verbs > VERBS.len() {
            return bad("n_verbs out of range");
        }
        if self.n_objects < 2 || self.n_objects > OBJECTS.len() {
            return bad("n_objects out of range");
        }
        if self.min_clauses < 1 || self.min_clauses > self.max_clauses {
            return bad("clause range");
        }
        if self.min_summary_clauses < 1 || self.min_summary_clauses > self.max_summary_clauses {
            return bad("summary clause range");
        }
        if self.max_clauses > self.n_entities * self.n_verbs * self.n_objects {
            return bad("more clauses than distinct facts");
        }
        if !(0.0..=1.0).contains(&self.topic_rate) {
            return bad("topic_rate must lie in [0,1]");
        }
        Ok(())
    }

    /// The closed lexicon, in a fixed order independent of any seed.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut words: Vec<&str> = vec!["the", ".", ","];
        words.extend(&ENTITIES[..self.n_entities]);
        for (v, p) in &VERBS[..self.n_verbs] {
            words.push(v);
            words.push(p);
        }
        for (o, p) in &OBJECTS[..self.n_objects] {
            words.push(o);
            words.extend(p);
        }
        Vocabulary::from_tokens(words)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Fact {
    entity: usize,
    verb: usize,
    object: usize,
}

/// Generates `n_pairs` document/summary pairs, deterministic in `seed`.
pub fn generate_synthetic_corpus(seed: u64, n_pairs: usize, profile: &SynthProfile) -> crate::Result<Corpus> {
    profile.validate()?;
    if n_pairs == 0 {
        return Err(crate::Error::config("n_pairs must be at least 1"));
    }
    let vocab = Arc::new(profile.vocabulary());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let facts = sample_facts(&mut rng, profile);
        let source = render_source(&facts);
        let reference = summarize(&facts, profile);
        pairs.push(DocumentPair {
            id: format!("syn{seed}-{i:05}"),
            source: vocab.encode(&source),
            reference: vocab.encode(&reference),
        });
    }
    Corpus::new(Split::Train, pairs, vocab)
}

fn sample_facts(rng: &mut ChaCha8Rng, p: &SynthProfile) -> Vec<Fact> {
    let n = rng.gen_range(p.min_clauses..=p.max_clauses);
    let topic = rng.gen_range(0..p.n_entities);
    let mut seen = HashSet::new();
    let mut facts = Vec::with_capacity(n);
    while facts.len() < n {
        let entity = if rng.gen_bool(p.topic_rate) { topic } else { rng.gen_range(0..p.n_entities) };
        let f = Fact { entity, verb: rng.gen_range(0..p.n_verbs), object: rng.gen_range(0..p.n_objects) };
        if seen.insert(f) {
            facts.push(f);
        }
    }
    facts.shuffle(rng);
    facts
}

fn render_source(facts: &[Fact]) -> Vec<&'static str> {
    let mut out = Vec::with_capacity(facts.len() * 5);
    for f in facts {
        out.extend([ENTITIES[f.entity], VERBS[f.verb].0, "the", OBJECTS[f.object].0, "."]);
    }
    out
}

fn paraphrase(f: &Fact) -> [&'static str; 4] {
    let (obj, alt) = OBJECTS[f.object];
    [ENTITIES[f.entity], VERBS[f.verb].1, "the", alt.unwrap_or(obj)]
}

fn summarize(facts: &[Fact], p: &SynthProfile) -> Vec<&'static str> {
    let mut mentions: HashMap<usize, usize> = HashMap::new();
    for f in facts {
        *mentions.entry(f.entity).or_default() += 1;
    }
    let k = (facts.len() / 3).clamp(p.min_summary_clauses, p.max_summary_clauses);

    // Stable sort keeps source order among equally salient clauses.
    let mut order: Vec<usize> = (0..facts.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(mentions[&facts[i].entity]));

    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.len() == k {
            break;
        }
        let mut trial = chosen.clone();
        trial.push(i);
        trial.sort_unstable();
        let text = render_summary(facts, &trial);
        let grams: Vec<&[&str]> = text.windows(3).collect();
        let unique: HashSet<_> = grams.iter().collect();
        if unique.len() == grams.len() {
            chosen = trial;
        }
    }
    render_summary(facts, &chosen)
}

fn render_summary(facts: &[Fact], chosen: &[usize]) -> Vec<&'static str> {
    let mut out = Vec::new();
    for (n, &i) in chosen.iter().enumerate() {
        if n > 0 {
            out.push(",");
        }
        out.extend(paraphrase(&facts[i]));
    }
    out.push(".");
    out
}
