use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{GuiElement, GuiError};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.55;

/// Verbs and filler that models wrap around element names.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "on", "in", "of", "to", "at", "into", "click", "select", "open", "choose", "press", "tap",
    "button", "tab", "field", "menu", "dropdown", "item", "cell", "cells", "option",
];

/// Match quality, best first. Ranking compares tiers before scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Exact,
    Normalized,
    TokenSubset,
    EditDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    /// Position in the input element list.
    pub index: usize,
    pub element: GuiElement,
    pub tier: MatchTier,
    pub score: f64,
}

/// Case-folds, spells `&` as `and`, turns punctuation into spaces and
/// collapses whitespace.
pub fn normalize_label(s: &str) -> String {
    let spaced = s.to_lowercase().replace('&', " and ");
    let cleaned: String = spaced.chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn content_tokens(normalized: &str) -> BTreeSet<&str> {
    normalized.split(' ').filter(|t| !t.is_empty() && !STOPWORDS.contains(t)).collect()
}

fn score(query: &str, label: &str) -> (MatchTier, f64) {
    if query.trim() == label.trim() {
        return (MatchTier::Exact, 1.0);
    }
    let (nq, nl) = (normalize_label(query), normalize_label(label));
    if !nq.is_empty() && nq == nl {
        return (MatchTier::Normalized, 0.95);
    }
    let (tq, tl) = (content_tokens(&nq), content_tokens(&nl));
    if !tq.is_empty() && !tl.is_empty() && (tl.is_subset(&tq) || tq.is_subset(&tl)) {
        let jaccard = tq.intersection(&tl).count() as f64 / tq.union(&tl).count() as f64;
        return (MatchTier::TokenSubset, 0.55 + 0.35 * jaccard);
    }
    (MatchTier::EditDistance, strsim::normalized_levenshtein(&nq, &nl))
}

/// Ranks `elements` against `query`: by tier, then score, then document
/// order. Returns at most `top_k` matches; fails when the best one scores
/// below `threshold`.
pub fn locate_element(
    query: &str,
    elements: &[GuiElement],
    threshold: f64,
    top_k: usize,
) -> Result<Vec<Match>, GuiError> {
    let mut ranked: Vec<Match> = elements
        .iter()
        .enumerate()
        .map(|(index, e)| {
            let (tier, score) = score(query, &e.label);
            Match { index, element: e.clone(), tier, score }
        })
        .collect();
    ranked.sort_by(|a, b| a.tier.cmp(&b.tier).then(b.score.total_cmp(&a.score)).then(a.index.cmp(&b.index)));
    match ranked.first() {
        Some(best) if best.score >= threshold => {
            ranked.retain(|m| m.score >= threshold);
            ranked.truncate(top_k.max(1));
            Ok(ranked)
        }
        best => Err(GuiError::NoMatch { query: query.to_string(), best: best.map_or(0.0, |m| m.score) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::sim::Role;

    fn els(labels: &[&str]) -> Vec<GuiElement> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| GuiElement::new(format!("e{i}"), *l, Role::Button, Rect::new(i as i32 * 10, 0, 10, 10)))
            .collect()
    }

    #[test]
    fn tiers_rank_before_scores() {
        let e = els(&["Merge", "merge & center", "Merge & Center"]);
        let m = locate_element("Merge & Center", &e, DEFAULT_MATCH_THRESHOLD, 3).unwrap();
        assert_eq!(m[0].index, 2);
        assert_eq!(m[0].tier, MatchTier::Exact);
        assert_eq!(m[1].index, 1);
        assert_eq!(m[1].tier, MatchTier::Normalized);
        assert_eq!(m[2].tier, MatchTier::TokenSubset);
    }

    #[test]
    fn ampersand_is_and() {
        assert_eq!(normalize_label("Merge & Center"), "merge and center");
        assert_eq!(normalize_label("  Merge and   CENTER!"), "merge and center");
        let e = els(&["Wrap Text", "Merge & Center"]);
        let m = locate_element("merge and center", &e, DEFAULT_MATCH_THRESHOLD, 1).unwrap();
        assert_eq!((m[0].index, m[0].tier, m[0].score), (1, MatchTier::Normalized, 0.95));
    }

    #[test]
    fn subtask_phrasing_finds_label() {
        let e = els(&["Night light", "Strength"]);
        let m = locate_element("Turn on Night light", &e, DEFAULT_MATCH_THRESHOLD, 1).unwrap();
        assert_eq!(m[0].index, 0);
        assert_eq!(m[0].tier, MatchTier::TokenSubset);
        // {turn, night, light} vs {night, light}
        assert!((m[0].score - (0.55 + 0.35 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_document_order() {
        let e = els(&["A1", "K1"]);
        let m = locate_element("Select cells A1 to K1", &e, DEFAULT_MATCH_THRESHOLD, 2).unwrap();
        assert_eq!(m[0].index, 0);
        assert_eq!(m[0].score, m[1].score);
    }

    #[test]
    fn unrelated_query_is_no_match() {
        let e = els(&["Home", "Insert", "Merge & Center"]);
        assert!(matches!(locate_element("Quantum Flux", &e, DEFAULT_MATCH_THRESHOLD, 1), Err(GuiError::NoMatch { .. })));
        assert!(matches!(locate_element("Home", &[], DEFAULT_MATCH_THRESHOLD, 1), Err(GuiError::NoMatch { .. })));
    }

    #[test]
    fn edit_distance_tolerates_typos() {
        let e = els(&["Subscribe", "Reset form"]);
        let m = locate_element("Subscrbe", &e, DEFAULT_MATCH_THRESHOLD, 1).unwrap();
        assert_eq!((m[0].index, m[0].tier), (0, MatchTier::EditDistance));
    }
}
