//! First-independent-claim selection.
//!
//! A claim counts as dependent when it contains a reference to another claim
//! ("according to claim 1", "as claimed in claim", "of claim 3", "any of the
//! preceding claims"). The phrase list is a heuristic and can be replaced.

use regex::{Regex, RegexSet};

use crate::error::{Error, Result};

pub const DEFAULT_DEPENDENCY_PATTERNS: &[&str] = &[
    r"\baccording\s+to\s+(?:any\s+(?:one\s+)?of\s+)?(?:the\s+)?(?:preceding\s+)?claims?\s*\d+",
    r"\bas\s+claimed\s+in\s+(?:any\s+(?:one\s+)?of\s+)?(?:the\s+)?(?:preceding\s+)?claims?\b",
    r"\bas\s+(?:defined|recited|set\s+forth|described|specified)\s+in\s+(?:any\s+(?:one\s+)?of\s+)?claims?\s*\d+",
    r"\b(?:of|in|to|by|under)\s+(?:any\s+(?:one\s+)?of\s+)?claims?\s*\d+",
    r"\b(?:any|one|either)\s+(?:one\s+)?of\s+(?:the\s+)?(?:preceding|previous|foregoing|above)\s+claims\b",
    r"\b(?:preceding|previous|foregoing)\s+claim\b",
];

/// Compiled dependency phrases (matched case-insensitively).
#[derive(Debug, Clone)]
pub struct ClaimRules {
    patterns: Vec<String>,
    set: RegexSet,
}

impl Default for ClaimRules {
    fn default() -> Self {
        ClaimRules::new(DEFAULT_DEPENDENCY_PATTERNS.iter().copied()).expect("default patterns compile")
    }
}

impl ClaimRules {
    pub fn new<'a>(patterns: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let patterns: Vec<String> = patterns.into_iter().map(|p| format!("(?i){p}")).collect();
        for (i, p) in patterns.iter().enumerate() {
            Regex::new(p).map_err(|e| Error::config(format!("claims.patterns[{i}]"), e.to_string()))?;
        }
        let set = RegexSet::new(&patterns).map_err(|e| Error::config("claims.patterns", e.to_string()))?;
        Ok(ClaimRules { patterns, set })
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn is_dependent(&self, claim: &str) -> bool {
        self.set.is_match(claim)
    }
}

/// Index of the first claim with no dependency reference.
pub fn first_independent_index<S: AsRef<str>>(claims: &[S], rules: &ClaimRules) -> Option<usize> {
    claims
        .iter()
        .position(|c| !c.as_ref().trim().is_empty() && !rules.is_dependent(c.as_ref()))
}

/// The first claim, in numbering order, that does not depend on another claim.
pub fn select_first_independent_claim<'a, S: AsRef<str>>(
    claims: &'a [S],
    rules: &ClaimRules,
) -> Option<&'a str> {
    first_independent_index(claims, rules).map(|i| claims[i].as_ref())
}
