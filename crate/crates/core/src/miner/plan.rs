use std::collections::HashSet;

use crate::error::{Error, Result};

/// Languages used as pivots by default when mining at scale.
pub const DEFAULT_PIVOTS: [&str; 4] = ["en", "hi", "es", "zh"];

/// Ordered mining directions touching at least one pivot.
///
/// Every unordered pair `{a, b}` with `a` or `b` a pivot yields both `(a, b)`
/// and `(b, a)`, emitted in the order languages appear in `langs`.
pub fn mining_plan(langs: &[String], pivots: &[String]) -> Result<Vec<(String, String)>> {
    if pivots.is_empty() {
        return Err(Error::invalid("pivot list is empty"));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = langs.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(Error::invalid(format!("language {dup:?} listed twice")));
    }
    if let Some(p) = pivots.iter().find(|p| !seen.contains(p.as_str())) {
        return Err(Error::invalid(format!(
            "pivot {p:?} is not among the languages"
        )));
    }
    let is_pivot = |l: &String| pivots.contains(l);

    let mut plan = Vec::new();
    for (i, a) in langs.iter().enumerate() {
        for b in &langs[i + 1..] {
            if is_pivot(a) || is_pivot(b) {
                plan.push((a.clone(), b.clone()));
                plan.push((b.clone(), a.clone()));
            }
        }
    }
    Ok(plan)
}
