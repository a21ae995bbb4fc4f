//! Clause expansion for coordinated phrases with an elided predicate.
//!
//! `Transfer $400 to John and Sam.` becomes
//! `Transfer $400 to John and Transfer $400 to Sam.` so that each conjunct
//! reads as a self-contained action.
//!
//! Syntax comes from a [`SyntaxProvider`]. The bundled [`HeuristicProvider`]
//! uses a lexicon and suffix rules in place of a dependency parser.

use serde::{Deserialize, Serialize};

use crate::annotation::SpanAnnotation;
use crate::lexicon::{self, Category};
use crate::text::{char_slice, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxHints {
    pub categories: Vec<Category>,
    /// Token indices of coordinating `and`/`or` and of list commas.
    pub coordination_sites: Vec<usize>,
}

pub trait SyntaxProvider: Send + Sync {
    fn analyze(&self, utterance: &Utterance) -> SyntaxHints;
}

/// Deterministic lexicon + suffix heuristics.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicProvider;

impl SyntaxProvider for HeuristicProvider {
    fn analyze(&self, utterance: &Utterance) -> SyntaxHints {
        analyze(utterance)
    }
}

pub fn analyze(utterance: &Utterance) -> SyntaxHints {
    let tokens = utterance.tokens();
    let lower: Vec<String> = tokens.iter().map(|t| t.lower()).collect();
    let categories: Vec<Category> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let initial = i == 0 || matches!(lower[i - 1].as_str(), "." | "?" | "!" | "\"" | "(");
            lexicon::categorize(&t.surface, initial)
        })
        .collect();
    let shielded = shielded_regions(&lower);

    let mut sites = Vec::new();
    for i in 0..lower.len() {
        if shielded[i] {
            continue;
        }
        match lower[i].as_str() {
            "and" | "or" => {
                let next = lower.get(i + 1).map(String::as_str);
                // "or else" marks an alternative, "and then" a sequence step
                if !(lower[i] == "or" && next == Some("else")) {
                    sites.push(i);
                }
            }
            "," if is_list_comma(i, &lower, &categories) => sites.push(i),
            _ => {}
        }
    }
    SyntaxHints { categories, coordination_sites: sites }
}

/// Tokens inside quotes, parentheses or brackets.
fn shielded_regions(lower: &[String]) -> Vec<bool> {
    let mut mask = vec![false; lower.len()];
    let mut in_quote = false;
    let mut depth = 0usize;
    for (i, t) in lower.iter().enumerate() {
        match t.as_str() {
            "\"" => {
                in_quote = !in_quote;
                mask[i] = true;
                continue;
            }
            "(" | "[" => depth += 1,
            ")" | "]" => {
                mask[i] = true;
                depth = depth.saturating_sub(1);
                continue;
            }
            _ => {}
        }
        mask[i] = in_quote || depth > 0;
    }
    mask
}

/// A comma between nominal conjuncts, followed later by `and`/`or` with no
/// verb or other punctuation in between.
fn is_list_comma(i: usize, lower: &[String], cats: &[Category]) -> bool {
    if i == 0 || !nominal(cats[i - 1], &lower[i - 1]) {
        return false;
    }
    let mut seen = 0;
    for j in i + 1..lower.len() {
        match lower[j].as_str() {
            "and" | "or" => return seen > 0,
            "," => {
                if seen == 0 {
                    return false;
                }
                seen = 0;
            }
            t if is_hard_punct(t) => return false,
            _ => {
                if cats[j] == Category::Verb || starts_marker(lower, j) {
                    return false;
                }
                seen += 1;
            }
        }
    }
    false
}

fn nominal(cat: Category, lower: &str) -> bool {
    matches!(cat, Category::Noun | Category::Number | Category::Other) && !is_punct(lower)
}

fn is_punct(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| c.is_ascii_punctuation())
}

fn is_hard_punct(t: &str) -> bool {
    matches!(t, "." | ";" | ":" | "?" | "!")
}

/// Markers that open or close a clause, excluding plain `and`.
fn starts_marker(lower: &[String], i: usize) -> bool {
    lexicon::find_markers(&lower[i..])
        .first()
        .is_some_and(|&(s, _, m)| s == 0 && m != "and")
        || matches!(lower[i].as_str(), "when" | "whenever" | "once" | "before" | "after" | "but")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopiedSegment {
    /// Source token range in the original utterance.
    pub source_start: usize,
    pub source_end: usize,
    /// Token index in the expanded utterance where the copy begins.
    pub inserted_at: usize,
}

impl CopiedSegment {
    pub fn len(&self) -> usize {
        self.source_end - self.source_start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Original and expanded utterance plus what was copied where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionTrace {
    pub original: Utterance,
    pub expanded: Utterance,
    pub copied_segments: Vec<CopiedSegment>,
}

impl ExpansionTrace {
    pub fn identity(utterance: Utterance) -> Self {
        ExpansionTrace {
            original: utterance.clone(),
            expanded: utterance,
            copied_segments: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.copied_segments.is_empty()
    }

    /// For each expanded token, its original index, or `None` for copies.
    pub fn origin_map(&self) -> Vec<Option<usize>> {
        let mut map = Vec::with_capacity(self.expanded.len());
        let mut next_original = 0;
        let mut segs = self.copied_segments.iter().peekable();
        let mut i = 0;
        while i < self.expanded.len() {
            if let Some(seg) = segs.next_if(|s| s.inserted_at == i) {
                map.extend(std::iter::repeat_n(None, seg.len()));
                i += seg.len();
                continue;
            }
            map.push(Some(next_original));
            next_original += 1;
            i += 1;
        }
        map
    }

    /// Maps an expanded-space span onto the original tokens it covers.
    /// Returns `None` when the span consists of copied tokens only.
    pub fn project_span(&self, span: &SpanAnnotation) -> Option<SpanAnnotation> {
        let map = self.origin_map();
        let covered: Vec<usize> = map[span.token_start..span.token_end.min(map.len())]
            .iter()
            .flatten()
            .copied()
            .collect();
        let (first, last) = (covered.first()?, covered.last()?);
        Some(SpanAnnotation::new(span.tag, *first, last + 1))
    }

    /// Maps an original-space span into expanded space. A copy inserted
    /// directly before the span belongs to it, since copies always open the
    /// right conjunct.
    pub fn lift_span(&self, span: &SpanAnnotation) -> SpanAnnotation {
        let map = self.origin_map();
        let position = |orig: usize| map.iter().position(|&m| m == Some(orig));
        let (Some(mut start), Some(last)) = (position(span.token_start), position(span.token_end - 1)) else {
            return *span;
        };
        while start > 0 && map[start - 1].is_none() {
            start -= 1;
        }
        SpanAnnotation::new(span.tag, start, last + 1)
    }

    /// Rebuilds the original utterance from the expanded one and the copy
    /// list alone.
    pub fn reconstruct_original(&self) -> Utterance {
        let mut text: Vec<char> = self.expanded.text().chars().collect();
        let toks = self.expanded.tokens();
        for seg in self.copied_segments.iter().rev() {
            if seg.is_empty() || seg.inserted_at == 0 {
                continue;
            }
            let from = toks[seg.inserted_at - 1].end;
            let to = toks[seg.inserted_at + seg.len() - 1].end;
            text.drain(from..to);
        }
        Utterance::new(text.into_iter().collect::<String>())
    }
}

/// Copies the shared predicate prefix after each coordination site whose
/// right conjunct has no verb. Never fails: unusable hints give the identity.
pub fn expand_clauses(utterance: &Utterance, hints: &SyntaxHints) -> ExpansionTrace {
    let n = utterance.len();
    if hints.categories.len() != n || hints.coordination_sites.is_empty() {
        return ExpansionTrace::identity(utterance.clone());
    }
    let lower: Vec<String> = utterance.tokens().iter().map(|t| t.lower()).collect();
    let cats = &hints.categories;
    let sites = &hints.coordination_sites;

    // (site, prefix range)
    let mut insertions: Vec<(usize, usize, usize)> = Vec::new();
    // last site that acted as a clause separator
    let mut clause_floor = 0usize;

    for (k, &site) in sites.iter().enumerate() {
        let next_site = sites.get(k + 1).copied().unwrap_or(n);
        let right_end = (site + 1..next_site)
            .find(|&j| is_punct(&lower[j]) || starts_marker(&lower, j))
            .unwrap_or(next_site);
        let right = site + 1..right_end;
        let right_has_verb = right.clone().any(|j| cats[j] == Category::Verb);
        if right.is_empty() || right_has_verb {
            if lower[site] != "," {
                clause_floor = site + 1;
            }
            continue;
        }

        let mut left_start = site;
        while left_start > 0 {
            let j = left_start - 1;
            let ok = nominal(cats[j], &lower[j]) || lexicon::is_determiner(&lower[j]);
            if !ok || starts_marker(&lower, j) {
                break;
            }
            left_start = j;
        }
        if left_start == site {
            continue;
        }

        // a left conjunct directly after an expanded site shares its prefix
        if let Some(&(prev_site, a, b)) = insertions.last() {
            if prev_site + 1 == left_start {
                insertions.push((site, a, b));
                continue;
            }
        }

        let clause_start = (clause_floor..left_start)
            .rev()
            .find(|&j| {
                let t = lower[j].as_str();
                is_hard_punct(t) || (t == "," && !sites.contains(&j)) || starts_marker(&lower, j)
            })
            .map(|j| marker_end(&lower, j))
            .unwrap_or(clause_floor)
            .max(clause_floor);
        if clause_start >= left_start {
            continue;
        }
        let has_verb = (clause_start..left_start).any(|j| cats[j] == Category::Verb);
        if has_verb {
            insertions.push((site, clause_start, left_start));
        }
    }

    if insertions.is_empty() {
        return ExpansionTrace::identity(utterance.clone());
    }
    build_expanded(utterance, &insertions)
}

/// First token after the boundary that starts at `j`.
fn marker_end(lower: &[String], j: usize) -> usize {
    match lexicon::find_markers(&lower[j..]).first() {
        Some(&(0, len, _)) => j + len,
        _ => j + 1,
    }
}

fn build_expanded(utterance: &Utterance, insertions: &[(usize, usize, usize)]) -> ExpansionTrace {
    let text = utterance.text();
    let toks = utterance.tokens();
    let total_chars = text.chars().count();
    let mut out = String::with_capacity(text.len() * 2);
    let mut cursor = 0usize;
    let mut segments = Vec::with_capacity(insertions.len());
    let mut shift = 0usize;
    for &(site, a, b) in insertions {
        let at = toks[site].end;
        out.push_str(char_slice(text, cursor, at));
        out.push(' ');
        out.push_str(utterance.slice(a, b));
        cursor = at;
        segments.push(CopiedSegment {
            source_start: a,
            source_end: b,
            inserted_at: site + 1 + shift,
        });
        shift += b - a;
    }
    out.push_str(char_slice(text, cursor, total_chars));
    let expanded = Utterance::new(out);
    debug_assert_eq!(expanded.len(), utterance.len() + shift);
    ExpansionTrace {
        original: utterance.clone(),
        expanded,
        copied_segments: segments,
    }
}

/// `analyze` followed by `expand_clauses` with the given provider.
pub fn expand_with(provider: &dyn SyntaxProvider, utterance: &Utterance) -> ExpansionTrace {
    let hints = provider.analyze(utterance);
    expand_clauses(utterance, &hints)
}

pub fn expand(utterance: &Utterance) -> ExpansionTrace {
    expand_with(&HeuristicProvider, utterance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::TagType;

    fn expanded_text(s: &str) -> String {
        expand(&Utterance::new(s)).expanded.text().to_string()
    }

    #[test]
    fn analyze_transfer_example() {
        let u = Utterance::new("Transfer $400 to John and Sam.");
        let h = analyze(&u);
        assert_eq!(h.coordination_sites, vec![4]);
        assert_eq!(h.categories[0], Category::Verb);
        assert_eq!(h.categories[1], Category::Number);
    }

    #[test]
    fn analyze_trivial() {
        let h = analyze(&Utterance::new("hello"));
        assert!(h.coordination_sites.is_empty());
        let h = analyze(&Utterance::new("check my balance and my statement"));
        assert_eq!(h.coordination_sites, vec![3]);
        assert_eq!(h.categories[0], Category::Verb);
    }

    #[test]
    fn gapping_transfer() {
        assert_eq!(
            expanded_text("Transfer $400 to John and Sam."),
            "Transfer $400 to John and Transfer $400 to Sam."
        );
    }

    #[test]
    fn gapping_insurance() {
        assert_eq!(
            expanded_text("I would like to add myself to the insurance policy and my wife's bank account."),
            "I would like to add myself to the insurance policy and I would like to add myself to my wife's bank account."
        );
    }

    #[test]
    fn conditional_unchanged() {
        assert_eq!(expanded_text("If it rains, stay home."), "If it rains, stay home.");
    }

    #[test]
    fn clausal_conjunction_unchanged() {
        let s = "Pay the bill and send the receipt to me";
        assert_eq!(expanded_text(s), s);
    }

    #[test]
    fn clause_floor_after_clausal_and() {
        assert_eq!(
            expanded_text("Pay the bill and send $5 to John and Sam"),
            "Pay the bill and send $5 to John and send $5 to Sam"
        );
    }

    #[test]
    fn lists_chain_the_same_prefix() {
        assert_eq!(
            expanded_text("Transfer $5 to John, Sam and Mary."),
            "Transfer $5 to John, Transfer $5 to Sam and Transfer $5 to Mary."
        );
    }

    #[test]
    fn prefix_starts_after_marker() {
        assert_eq!(
            expanded_text("If I have money, pay John and Sam"),
            "If I have money, pay John and pay Sam"
        );
    }

    #[test]
    fn no_verb_in_prefix_means_no_copy() {
        let s = "John and Sam went home";
        assert_eq!(expanded_text(s), s);
        let s = "good morning and good night";
        assert_eq!(expanded_text(s), s);
    }

    #[test]
    fn quoted_conjunctions_untouched() {
        let s = "search for \"salt and pepper\" recipes";
        assert_eq!(expanded_text(s), s);
        let s = "call (John and Mary) now";
        assert_eq!(expanded_text(s), s);
    }

    #[test]
    fn mismatched_hints_give_identity() {
        let u = Utterance::new("Transfer $400 to John and Sam.");
        let trace = expand_clauses(&u, &SyntaxHints { categories: vec![], coordination_sites: vec![4] });
        assert!(trace.is_identity());
        assert_eq!(trace.expanded, u);
    }

    #[test]
    fn trace_reconstructs_and_projects() {
        let u = Utterance::new("Transfer $400 to John and Sam.");
        let trace = expand(&u);
        assert_eq!(
            trace.copied_segments,
            vec![CopiedSegment { source_start: 0, source_end: 3, inserted_at: 5 }]
        );
        assert_eq!(trace.reconstruct_original(), u);
        // "Transfer $400 to Sam" in expanded space -> "Sam"
        let sa = SpanAnnotation::new(TagType::Sa, 5, 9);
        assert_eq!(trace.project_span(&sa), Some(SpanAnnotation::new(TagType::Sa, 5, 6)));
        let copied_only = SpanAnnotation::new(TagType::Sa, 5, 8);
        assert_eq!(trace.project_span(&copied_only), None);
    }
}
