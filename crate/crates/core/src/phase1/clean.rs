//! Text cleanup rules applied to every raw field.

use std::collections::BTreeMap;
use std::ops::AddAssign;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::FieldKind;
use crate::error::{Error, Result};

/// Which cleanup rules fired and how much text they removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub rules_fired: BTreeMap<String, u64>,
    pub chars_removed: u64,
}

impl CleaningReport {
    fn fire(&mut self, rule: &str, n: u64) {
        if n > 0 {
            *self.rules_fired.entry(rule.to_string()).or_default() += n;
        }
    }

    pub fn count(&self, rule: &str) -> u64 {
        self.rules_fired.get(rule).copied().unwrap_or(0)
    }
}

impl AddAssign<&CleaningReport> for CleaningReport {
    fn add_assign(&mut self, o: &CleaningReport) {
        for (k, v) in &o.rules_fired {
            *self.rules_fired.entry(k.clone()).or_default() += v;
        }
        self.chars_removed += o.chars_removed;
    }
}

// Tags that separate blocks of text; everything else is inline and vanishes
// without leaving a gap.
const BLOCK_TAGS: &[&str] = &[
    "p", "br", "div", "li", "ul", "ol", "tr", "table", "h1", "h2", "h3", "h4", "h5", "h6", "hr",
    "claim", "claim-text", "claims", "abstract", "para", "heading", "section", "blockquote",
    "pre", "description",
];
const CELL_TAGS: &[&str] = &["td", "th"];

/// Removes HTML/XML tags and decodes character entity references.
///
/// Tag removal and entity decoding repeat until neither changes the text, so
/// the result contains no tag syntax even when the input had escaped markup.
/// A `<` that does not open a well-formed tag is kept as a literal.
pub fn strip_markup(text: &str) -> String {
    strip_markup_with(text, &mut CleaningReport::default())
}

pub(crate) fn strip_markup_with(text: &str, report: &mut CleaningReport) -> String {
    let mut cur = text.to_string();
    loop {
        let (untagged, tags) = remove_tags(&cur);
        let (decoded, ents) = decode_entities(&untagged);
        report.fire("markup_tag", tags);
        report.fire("entity", ents);
        if tags == 0 && ents == 0 {
            break;
        }
        cur = decoded;
    }
    let trimmed = cur.trim();
    if trimmed.len() != cur.len() {
        cur = trimmed.to_string();
    }
    cur
}

fn remove_tags(text: &str) -> (String, u64) {
    if !text.contains('<') {
        return (text.to_string(), 0);
    }
    let mut out = String::with_capacity(text.len());
    let mut removed = 0;
    let mut rest = text;
    while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match tag_len(tail) {
            Some((len, sep)) => {
                removed += 1;
                if let Some(c) = sep {
                    out.push(c);
                }
                rest = &tail[len..];
            }
            None => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    (out, removed)
}

/// Length of the tag starting at `s[0] == '<'` and the separator it leaves behind.
fn tag_len(s: &str) -> Option<(usize, Option<char>)> {
    let b = s.as_bytes();
    let next = *b.get(1)?;
    if s.starts_with("<!--") {
        if let Some(end) = s[4..].find("-->") {
            return Some((4 + end + 3, None));
        }
    }
    if s.starts_with("<![CDATA[") {
        // Keep the payload; drop only the opener. The closer `]]>` is handled below.
        return Some((9, None));
    }
    if !(next.is_ascii_alphabetic() || next == b'/' || next == b'!' || next == b'?') {
        return None;
    }
    if next == b'/' && !b.get(2).is_some_and(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    let end = s.find('>')?;
    if s[1..end].contains('<') {
        return None;
    }
    let name: String = s[1..end]
        .trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == ':' || *c == '_')
        .collect::<String>()
        .to_ascii_lowercase();
    let sep = if BLOCK_TAGS.contains(&name.as_str()) {
        Some('\n')
    } else if CELL_TAGS.contains(&name.as_str()) {
        Some(' ')
    } else {
        None
    };
    Some((end + 1, sep))
}

fn decode_entities(text: &str) -> (String, u64) {
    if !text.contains('&') && !text.contains("]]>") {
        return (text.to_string(), 0);
    }
    let mut out = String::with_capacity(text.len());
    let mut n = 0;
    let mut rest = text;
    loop {
        let amp = rest.find('&');
        let cdata = rest.find("]]>");
        let pos = match (amp, cdata) {
            (None, None) => break,
            (Some(a), Some(c)) => a.min(c),
            (Some(a), None) => a,
            (None, Some(c)) => c,
        };
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("]]>") {
            n += 1;
            rest = &tail[3..];
            continue;
        }
        match entity(tail) {
            Some((len, ch)) => {
                out.push(ch);
                n += 1;
                rest = &tail[len..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    (out, n)
}

fn entity(s: &str) -> Option<(usize, char)> {
    let mut lim = s.len().min(12);
    while !s.is_char_boundary(lim) {
        lim -= 1;
    }
    let semi = s[..lim].find(';')?;
    let body = &s[1..semi];
    let ch = if let Some(num) = body.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        char::from_u32(code).unwrap_or('\u{FFFD}')
    } else {
        match body {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            "nbsp" => '\u{00A0}',
            "ndash" => '\u{2013}',
            "mdash" => '\u{2014}',
            "deg" => '\u{00B0}',
            "plusmn" => '\u{00B1}',
            "times" => '\u{00D7}',
            "micro" => '\u{00B5}',
            "lsquo" => '\u{2018}',
            "rsquo" => '\u{2019}',
            "ldquo" => '\u{201C}',
            "rdquo" => '\u{201D}',
            _ => return None,
        }
    };
    Some((semi + 1, ch))
}

fn is_invisible(c: char) -> bool {
    matches!(
        c,
        '\u{00AD}' | '\u{200B}' | '\u{200C}' | '\u{200D}' | '\u{2060}' | '\u{FEFF}'
    )
}

/// Drops replacement and zero-width characters, turns control characters into
/// spaces and collapses whitespace.
///
/// Horizontal whitespace runs become one space; runs containing one line
/// break become `\n` and runs with two or more become `\n\n`, so line and
/// paragraph structure survives for the line-based quality filters. The
/// result has no leading or trailing whitespace.
pub fn normalize_chars(text: &str) -> String {
    normalize_chars_with(text, &mut CleaningReport::default())
}

pub(crate) fn normalize_chars_with(text: &str, report: &mut CleaningReport) -> String {
    let mut out = String::with_capacity(text.len());
    let mut newlines = 0u32;
    let mut space = false;
    let mut replaced = 0;
    let mut controls = 0;
    let mut invisible = 0;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\u{FFFD}' => replaced += 1,
            c if is_invisible(c) => invisible += 1,
            '\n' | '\u{000B}' | '\u{000C}' | '\u{0085}' | '\u{2028}' => newlines += 1,
            '\r' => {
                if chars.peek() != Some(&'\n') {
                    newlines += 1;
                }
            }
            '\u{2029}' => newlines += 2,
            c if c.is_whitespace() => space = true,
            c if c.is_control() => {
                controls += 1;
                space = true;
            }
            c => {
                if !out.is_empty() {
                    match newlines {
                        0 if space => out.push(' '),
                        0 => {}
                        1 => out.push('\n'),
                        _ => out.push_str("\n\n"),
                    }
                }
                newlines = 0;
                space = false;
                out.push(c);
            }
        }
    }
    report.fire("replacement_char", replaced);
    report.fire("control_char", controls);
    report.fire("invisible_char", invisible);
    out
}

/// Leading boilerplate phrases, optionally scoped to one field kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boilerplate {
    prefixes: Vec<(Option<FieldKind>, String)>,
}

impl Default for Boilerplate {
    fn default() -> Self {
        let all = [
            "what is claimed is",
            "what is claimed",
            "the invention claimed is",
            "the claimed invention is",
            "we claim",
            "i claim",
            "claims",
            "abstract of the disclosure",
            "abstract",
        ];
        let mut b = Boilerplate { prefixes: Vec::new() };
        for p in all {
            b.push(None, p);
        }
        b
    }
}

impl Boilerplate {
    pub fn empty() -> Self {
        Boilerplate { prefixes: Vec::new() }
    }

    pub fn push(&mut self, kind: Option<FieldKind>, prefix: &str) {
        let p = prefix.trim().trim_end_matches(':').trim().to_string();
        if !p.is_empty() && !self.prefixes.iter().any(|(k, q)| *k == kind && *q == p) {
            self.prefixes.push((kind, p));
            // Longest first so "what is claimed is" wins over "what is claimed".
            self.prefixes
                .sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.cmp(b)));
        }
    }

    /// Parses a prefix list: one phrase per line, `#` comments, and optional
    /// `[abstract]`, `[first_claim]`, `[dwpi]` or `[all]` section headers.
    pub fn parse(src: &str) -> Result<Self> {
        let mut b = Boilerplate::empty();
        let mut scope = None;
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                scope = match section.trim() {
                    "all" => None,
                    s => Some(FieldKind::parse(s).ok_or_else(|| {
                        Error::config(format!("boilerplate:{}", i + 1), format!("unknown section [{s}]"))
                    })?),
                };
                continue;
            }
            b.push(scope, line);
        }
        Ok(b)
    }

    pub fn prefixes_for(&self, kind: FieldKind) -> impl Iterator<Item = &str> {
        self.prefixes
            .iter()
            .filter(move |(k, _)| k.is_none_or(|k| k == kind))
            .map(|(_, p)| p.as_str())
    }
}

/// Case-insensitive prefix match ending at a word boundary.
fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let mut ti = text.char_indices();
    for pc in prefix.chars() {
        let (_, tc) = ti.next()?;
        if !tc.to_lowercase().eq(pc.to_lowercase()) {
            return None;
        }
    }
    let at = ti.next().map(|(i, _)| i).unwrap_or(text.len());
    let rest = &text[at..];
    let last_alnum = prefix.chars().last().is_some_and(|c| c.is_alphanumeric());
    if last_alnum && rest.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return None;
    }
    Some(rest)
}

static FIG_PAREN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\s*[(\[]\s*(?:see\s+(?:also\s+)?|as\s+shown\s+in\s+|shown\s+in\s+|cf\.\s*)?(?:figs?\.?|figures?|drawings?)\s*\d+[a-z]?(?:\s*(?:,|and|to|or|-|–|&)\s*\d+[a-z]?)*\s*[)\]]",
    )
    .expect("valid regex")
});

static FIG_BARE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\s*\b(?:(?:as\s+)?(?:shown|illustrated|depicted)\s+in\s+|see\s+|refer\s+to\s+)?(?:figs?\.|figures?)\s*\d+[a-z]?(?:\s*(?:,|and|to|or|-|–|&)\s*\d+[a-z]?)*\b",
    )
    .expect("valid regex")
});

static SPACE_BEFORE_PUNCT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[ \t]+([,.;:])").expect("valid regex"));

/// Removes leading boilerplate phrases and excises figure references.
///
/// Prefixes only match at the start of the text (after any earlier prefix
/// has been removed), case-insensitively and on a word boundary.
pub fn remove_boilerplate(text: &str, kind: FieldKind, rules: &Boilerplate) -> String {
    remove_boilerplate_with(text, kind, rules, &mut CleaningReport::default())
}

pub(crate) fn remove_boilerplate_with(
    text: &str,
    kind: FieldKind,
    rules: &Boilerplate,
    report: &mut CleaningReport,
) -> String {
    let mut cur = text.trim_start();
    'outer: loop {
        for p in rules.prefixes_for(kind) {
            if let Some(rest) = strip_prefix_ci(cur, p) {
                report.fire("boilerplate_prefix", 1);
                cur = rest.trim_start_matches(|c: char| {
                    c.is_whitespace() || matches!(c, ':' | ';' | '.' | ',' | '-' | '–' | '—')
                });
                continue 'outer;
            }
        }
        break;
    }

    let paren = FIG_PAREN.find_iter(cur).count() as u64;
    let s = FIG_PAREN.replace_all(cur, "");
    let bare = FIG_BARE.find_iter(&s).count() as u64;
    let s = FIG_BARE.replace_all(&s, "");
    report.fire("figure_ref", paren + bare);
    if paren + bare > 0 {
        SPACE_BEFORE_PUNCT.replace_all(s.trim(), "$1").into_owned()
    } else {
        s.into_owned()
    }
}

/// Full per-field cleanup: markup, characters, boilerplate, repeated until stable.
pub fn clean_text(text: &str, kind: FieldKind, rules: &Boilerplate) -> String {
    clean_text_with(text, kind, rules, &mut CleaningReport::default())
}

pub(crate) fn clean_text_with(
    text: &str,
    kind: FieldKind,
    rules: &Boilerplate,
    report: &mut CleaningReport,
) -> String {
    let mut cur = text.to_string();
    // Each rule only shortens or preserves the text, so this settles fast;
    // the bound is a guard against pathological inputs.
    for _ in 0..16 {
        let s = strip_markup_with(&cur, report);
        let s = normalize_chars_with(&s, report);
        let s = remove_boilerplate_with(&s, kind, rules, report);
        let s = normalize_chars_with(&s, report);
        if s == cur {
            break;
        }
        cur = s;
    }
    report.chars_removed += (text.chars().count() as u64).saturating_sub(cur.chars().count() as u64);
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn markup_examples() {
        assert_eq!(strip_markup("<p>lens &amp; sensor</p>"), "lens & sensor");
        assert_eq!(strip_markup("no tags here"), "no tags here");
        assert_eq!(strip_markup("<b><i>x</i></b>y"), "xy");
        assert_eq!(strip_markup("a < b and c > d"), "a < b and c > d");
        assert_eq!(strip_markup("x<!-- note -->y"), "xy");
        assert_eq!(strip_markup("&#955;=&#x3bb;"), "λ=λ");
        assert_eq!(strip_markup("<p>a</p><p>b</p>"), "a\n\nb");
        // Escaped markup is removed too.
        assert_eq!(strip_markup("&lt;b&gt;bold&lt;/b&gt;"), "bold");
        assert_eq!(strip_markup("unclosed <b tag"), "unclosed <b tag");
        assert_eq!(strip_markup("fish &chips; &unknown;"), "fish &chips; &unknown;");
    }

    #[test]
    fn char_examples() {
        assert_eq!(normalize_chars("a\u{0000}b  c"), "a b c");
        assert_eq!(normalize_chars(""), "");
        assert_eq!(normalize_chars("  x\u{FFFD}y\u{200B}z \r\n w\n\n\n v "), "xyz\nw\n\nv");
        assert_eq!(normalize_chars("a\tb\u{00A0}c"), "a b c");
    }

    #[test]
    fn boilerplate_examples() {
        let b = Boilerplate::default();
        assert_eq!(
            remove_boilerplate("What is claimed is: A lens...", FieldKind::FirstClaim, &b),
            "A lens..."
        );
        assert_eq!(
            remove_boilerplate("A lens (see FIG. 2) with...", FieldKind::FirstClaim, &b),
            "A lens with..."
        );
        assert_eq!(
            remove_boilerplate("A lens with no refs", FieldKind::Abstract, &b),
            "A lens with no refs"
        );
        assert_eq!(
            remove_boilerplate("ABSTRACT A camera as shown in FIGS. 3 and 4, has a lens.", FieldKind::Abstract, &b),
            "A camera, has a lens."
        );
        // Word boundary: "Abstraction" is content.
        assert_eq!(
            remove_boilerplate("Abstraction layer for lenses", FieldKind::Abstract, &b),
            "Abstraction layer for lenses"
        );
        // Prefix only at start.
        assert_eq!(
            remove_boilerplate("A lens. We claim nothing", FieldKind::Abstract, &b),
            "A lens. We claim nothing"
        );
    }

    #[test]
    fn scoped_prefix_file() {
        let b = Boilerplate::parse("# list\n[dwpi]\nNOVELTY -\n[all]\nsummary:\n").unwrap();
        assert_eq!(remove_boilerplate("NOVELTY - A lens", FieldKind::Dwpi, &b), "A lens");
        assert_eq!(
            remove_boilerplate("NOVELTY - A lens", FieldKind::Abstract, &b),
            "NOVELTY - A lens"
        );
        assert_eq!(remove_boilerplate("Summary: A lens", FieldKind::Abstract, &b), "A lens");
        assert!(Boilerplate::parse("[bogus]\nx").is_err());
    }

    #[test]
    fn report_counts_rules() {
        let mut r = CleaningReport::default();
        let out = clean_text_with(
            "<p>What is claimed is: a\u{0}lens (FIG. 1)</p>",
            FieldKind::FirstClaim,
            &Boilerplate::default(),
            &mut r,
        );
        assert_eq!(out, "a lens");
        assert_eq!(r.count("markup_tag"), 2);
        assert_eq!(r.count("boilerplate_prefix"), 1);
        assert_eq!(r.count("figure_ref"), 1);
        assert_eq!(r.count("control_char"), 1);
        assert!(r.chars_removed > 0);
    }

    fn messy() -> impl Strategy<Value = String> {
        let atoms = prop_oneof![
            Just("<p>".to_string()),
            Just("</b>".to_string()),
            Just("&amp;".to_string()),
            Just("&lt;i&gt;".to_string()),
            Just("\u{0}".to_string()),
            Just("\u{FFFD}".to_string()),
            Just("  \n\n ".to_string()),
            Just("FIG. 2".to_string()),
            Just("(see Figure 3)".to_string()),
            Just("What is claimed is:".to_string()),
            Just("abstract".to_string()),
            Just("<".to_string()),
            Just(">".to_string()),
            "[a-zA-Z]{1,8}",
            "[ .,;:]",
            "\\PC{1,3}",
        ];
        proptest::collection::vec(atoms, 0..24).prop_map(|v| v.concat())
    }

    static TAG: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r"</?[A-Za-z][^<>]*>|<[!?][^<>]*>").unwrap());

    proptest! {
        #[test]
        fn cleaning_is_idempotent(s in messy()) {
            for kind in FieldKind::ALL {
                let once = clean_text(&s, kind, &Boilerplate::default());
                let twice = clean_text(&once, kind, &Boilerplate::default());
                prop_assert_eq!(&once, &twice);
            }
        }

        #[test]
        fn normalized_text_is_tidy(s in messy()) {
            let n = normalize_chars(&s);
            prop_assert!(!n.contains("  "));
            prop_assert!(!n.chars().any(|c| c.is_control() && c != '\n'));
            prop_assert!(!n.contains(char::REPLACEMENT_CHARACTER));
            prop_assert!(!n.contains("\n\n\n"));
            prop_assert_eq!(n.trim(), n.as_str());
        }

        #[test]
        fn no_tags_survive(s in messy()) {
            let out = strip_markup(&s);
            prop_assert!(!TAG.is_match(&out), "{:?}", out);
        }
    }
}
