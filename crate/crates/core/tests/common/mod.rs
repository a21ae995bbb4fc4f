//! Seeded generator of small annotated corpora shaped like the target data:
//! conditionals with and without alternatives, two- and three-step
//! sequences, and plain sentences. Only used to exercise the pipeline; it
//! says nothing about accuracy on real data.

#![allow(dead_code)]

use clause_forge::annotation::{AnnotationSet, Provenance, SpanAnnotation, TagType};
use clause_forge::Utterance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONDITIONS: &[&str] = &[
    "I have at least 1000 bucks in my account",
    "it rains tomorrow",
    "my balance is below $200",
    "the flight is delayed",
    "the package arrives today",
    "my card was charged twice",
    "the doctor is available on Monday",
    "the server goes down",
    "my plan expires this month",
    "the game starts at eight",
];

const ACTIONS: &[&str] = &[
    "transfer $400 to Donald",
    "check my account balance",
    "book a table for two",
    "cancel my subscription",
    "send me a reminder",
    "call the help desk",
    "upgrade my data plan",
    "schedule an appointment",
    "restart the database",
    "order a new card",
    "email the report to Sam",
    "pay the electricity bill",
];

const PLAIN: &[&str] = &[
    "the weather is nice today",
    "my phone number changed last week",
    "thanks for the quick answer",
    "the meeting went well",
];

struct Builder {
    words: Vec<String>,
    spans: Vec<SpanAnnotation>,
}

impl Builder {
    fn new() -> Self {
        Builder { words: Vec::new(), spans: Vec::new() }
    }

    fn lit(&mut self, s: &str) -> &mut Self {
        self.words.extend(s.split_whitespace().map(String::from));
        self
    }

    fn span(&mut self, tag: TagType, s: &str) -> &mut Self {
        let start = self.words.len();
        self.lit(s);
        self.spans.push(SpanAnnotation::new(tag, start, self.words.len()));
        self
    }

    fn build(&mut self) -> AnnotationSet {
        let u = Utterance::from_words(&self.words).expect("non-empty words");
        AnnotationSet::new(u, std::mem::take(&mut self.spans), Provenance::Gold).expect("valid spans")
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).copied().expect("non-empty pool")
}

fn distinct_actions<'a>(rng: &mut ChaCha8Rng, k: usize) -> Vec<&'a str> {
    let mut v: Vec<&'a str> = ACTIONS.to_vec();
    v.shuffle(rng);
    v.truncate(k);
    v
}

pub fn example(rng: &mut ChaCha8Rng) -> AnnotationSet {
    use TagType::*;
    let mut b = Builder::new();
    let c = pick(rng, CONDITIONS);
    let a = distinct_actions(rng, 3);
    match rng.gen_range(0..9) {
        0 => b.lit("if").span(Cnd, c).lit(",").span(Csq, a[0]).build(),
        1 => b.lit("provided that").span(Cnd, c).lit(",").span(Csq, a[0]).lit("otherwise").span(Alt, a[1]).build(),
        2 => b.lit("if").span(Cnd, c).lit("then").span(Csq, a[0]).lit("else").span(Alt, a[1]).build(),
        3 => b.lit("please").span(Csq, a[0]).lit("only if").span(Cnd, c).build(),
        4 => b.lit("unless").span(Cnd, c).lit(",").span(Csq, a[0]).build(),
        5 => b.span(Fa, a[0]).lit("and then").span(Sa, a[1]).build(),
        6 => b.lit("first").span(Fa, a[0]).lit(", then").span(Sa, a[1]).lit("and after that").span(Ta, a[2]).build(),
        7 => b.lit("in case").span(Cnd, c).lit(",").span(Csq, a[0]).lit("or else").span(Alt, a[1]).build(),
        _ => b.lit(pick(rng, PLAIN)).build(),
    }
}

pub fn corpus(n: usize, seed: u64) -> Vec<AnnotationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| example(&mut rng)).collect()
}
