use std::collections::BTreeSet;

/// Minimum share of original keywords a rewrite must keep.
pub const MIN_RETENTION: f64 = 0.7;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "across", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at", "be",
    "been", "being", "both", "but", "by", "can", "could", "do", "does", "each", "etc", "every", "for", "from", "had",
    "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "may", "more", "most",
    "must", "no", "not", "of", "on", "or", "other", "our", "out", "over", "per", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
    "to", "under", "up", "us", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "will",
    "with", "within", "would", "you", "your",
];

fn is_stopword(t: &str) -> bool {
    STOPWORDS.binary_search(&t).is_ok()
}

/// Lowercased alphanumeric tokens of two or more characters, minus stopwords, deduplicated.
pub fn keywords(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteCheck {
    pub accepted: bool,
    pub retention: f64,
    pub reason: String,
}

/// Accepts a rewrite iff it keeps at least 70% of the original keywords and
/// is at least as long (in characters) as the original.
pub fn validate_rewrite(original: &str, rewritten: &str) -> RewriteCheck {
    let reject = |retention: f64, reason: String| RewriteCheck { accepted: false, retention, reason };
    let orig = keywords(original);
    if orig.is_empty() {
        return reject(0.0, "original has no keywords".into());
    }
    if rewritten.trim().is_empty() {
        return reject(0.0, "empty rewrite".into());
    }
    let new = keywords(rewritten);
    let kept = orig.iter().filter(|k| new.contains(*k)).count();
    let retention = kept as f64 / orig.len() as f64;
    if retention < MIN_RETENTION {
        return reject(retention, format!("keyword retention {kept}/{} below 0.7", orig.len()));
    }
    let (lo, ln) = (original.chars().count(), rewritten.chars().count());
    if ln < lo {
        return reject(retention, format!("rewrite shorter than original ({ln} < {lo} chars)"));
    }
    RewriteCheck { accepted: true, retention, reason: "accepted".into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tokenizes() {
        let k = keywords("The SQL analyst, and SQL dashboards! A/B tests.");
        let want: BTreeSet<String> = ["sql", "analyst", "dashboards", "tests"].iter().map(|s| s.to_string()).collect();
        assert_eq!(k, want);
    }

    #[test]
    fn identity_is_accepted() {
        let c = validate_rewrite("Backend engineer for payments", "Backend engineer for payments");
        assert!(c.accepted);
        assert_eq!(c.retention, 1.0);
    }

    #[test]
    fn three_of_five_is_rejected() {
        let c = validate_rewrite("alpha bravo charlie delta echo", "alpha bravo charlie plus much longer extra filler text");
        assert!(!c.accepted);
        assert!((c.retention - 0.6).abs() < 1e-12);
    }

    #[test]
    fn shrinking_is_rejected() {
        let c = validate_rewrite("alpha,  bravo,  charlie!", "alpha bravo charlie");
        assert!(!c.accepted && c.retention == 1.0 && c.reason.contains("shorter"));
        assert!(!validate_rewrite("the of and", "anything").accepted);
    }
}
