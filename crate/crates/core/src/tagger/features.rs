//! Sparse token features. Every key is `<template>` or `<template>=<value>`.

use crate::lexicon;
use crate::text::Token;

/// Bumped whenever the templates change; stored in model files.
pub const FEATURE_VERSION: u32 = 1;

/// Upper bound on features emitted for one position.
pub const MAX_FEATURES: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    keys: Vec<String>,
}

impl FeatureVector {
    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.iter().any(|k| k == key)
    }

    fn push(&mut self, key: String) {
        self.keys.push(key);
    }
}

/// Word shape: `X` upper, `x` lower, `d` digit, other chars kept; runs
/// longer than three are cut to three.
pub fn shape(word: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    let mut run = 0;
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if Some(s) == last {
            run += 1;
        } else {
            run = 1;
            last = Some(s);
        }
        if run <= 3 {
            out.push(s);
        }
    }
    out
}

fn prefix(word: &str, n: usize) -> Option<String> {
    (word.chars().count() > n).then(|| word.chars().take(n).collect())
}

fn suffix(word: &str, n: usize) -> Option<String> {
    let len = word.chars().count();
    (len > n).then(|| word.chars().skip(len - n).collect())
}

/// Marker id covering each position, if any.
fn marker_cover(lower: &[String]) -> Vec<Option<&'static str>> {
    let mut cover = vec![None; lower.len()];
    for (s, e, m) in lexicon::find_markers(lower) {
        for c in &mut cover[s..e] {
            *c = Some(m);
        }
    }
    cover
}

fn distance_bucket(d: usize) -> &'static str {
    match d {
        1 => "1",
        2..=3 => "2-3",
        4..=7 => "4-7",
        _ => "8+",
    }
}

/// Features for every position of a sentence.
pub fn featurize_sentence(tokens: &[Token]) -> Vec<FeatureVector> {
    let lower: Vec<String> = tokens.iter().map(|t| t.lower()).collect();
    let cover = marker_cover(&lower);
    let n = tokens.len();

    // nearest marker phrase strictly before / after each position
    let mut prev_marker = vec![None; n];
    let mut last: Option<(&str, usize)> = None;
    for i in 0..n {
        prev_marker[i] = last;
        if let Some(m) = cover[i] {
            if i + 1 == n || cover[i + 1] != Some(m) {
                last = Some((m, i));
            }
        }
    }
    let mut next_marker = vec![None; n];
    let mut next: Option<&str> = None;
    for i in (0..n).rev() {
        next_marker[i] = next;
        if let Some(m) = cover[i] {
            if i == 0 || cover[i - 1] != Some(m) {
                next = Some(m);
            }
        }
    }

    (0..n)
        .map(|i| {
            let mut fv = FeatureVector::default();
            let word = &lower[i];
            let surface = &tokens[i].surface;
            fv.push("bias".into());
            fv.push(format!("w0={}", word));
            fv.push(format!("shape={}", shape(surface)));
            for (name, v) in [
                ("p2", prefix(word, 2)),
                ("p3", prefix(word, 3)),
                ("s2", suffix(word, 2)),
                ("s3", suffix(word, 3)),
            ] {
                if let Some(v) = v {
                    fv.push(format!("{}={}", name, v));
                }
            }
            if lexicon::is_number(surface) {
                fv.push("is-number".into());
            }
            if lexicon::is_currency(surface) {
                fv.push("is-currency".into());
            }
            if let Some(m) = cover[i] {
                fv.push("marker=true".into());
                fv.push(format!("marker-id={}", m));
            }
            if surface.chars().next().is_some_and(char::is_uppercase) {
                fv.push("cap".into());
            }
            if tokens[i].is_punct() {
                fv.push("punct".into());
            }
            if i == 0 {
                fv.push("first".into());
            }
            if i + 1 == n {
                fv.push("last".into());
            }

            for off in [-2isize, -1, 1, 2] {
                let j = i as isize + off;
                let tag = if off < 0 { format!("{}", off) } else { format!("+{}", off) };
                if j < 0 {
                    fv.push(format!("BOS{}", tag));
                    continue;
                }
                if j as usize >= n {
                    fv.push(format!("EOS{}", tag));
                    continue;
                }
                let j = j as usize;
                fv.push(format!("w{}={}", tag, lower[j]));
                if cover[j].is_some() {
                    fv.push(format!("marker{}", tag));
                }
                if off.abs() == 1 {
                    fv.push(format!("shape{}={}", tag, shape(&tokens[j].surface)));
                }
            }
            let left = if i == 0 { "BOS" } else { lower[i - 1].as_str() };
            let right = if i + 1 == n { "EOS" } else { lower[i + 1].as_str() };
            fv.push(format!("w-1|w0={}|{}", left, word));
            fv.push(format!("w0|w+1={}|{}", word, right));

            let pm = prev_marker[i].map(|(m, _)| m).unwrap_or("none");
            let nm = next_marker[i].unwrap_or("none");
            fv.push(format!("prev-marker={}", pm));
            fv.push(format!("next-marker={}", nm));
            fv.push(format!("markers={}|{}", pm, nm));
            if let Some((m, at)) = prev_marker[i] {
                fv.push(format!("prev-marker-dist={}|{}", m, distance_bucket(i - at)));
            }
            debug_assert!(fv.len() <= MAX_FEATURES);
            fv
        })
        .collect()
}

pub fn featurize(tokens: &[Token], position: usize) -> FeatureVector {
    assert!(position < tokens.len(), "position {} out of range", position);
    featurize_sentence(tokens).swap_remove(position)
}
