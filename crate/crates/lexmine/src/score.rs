//! Tokenization and lexicon scoring — the inner loop of the miner.
//!
//! A document is reduced to its set of distinct whitespace token *types*
//! (folded, optionally punctuation-normalized), and a lexicon score is the
//! cardinality of the intersection between that set and the lexicon. Scoring
//! is boolean per type: token frequency is deliberately ignored, which makes
//! the score immune to pathological repetition in crawl noise.

use rustc_hash::FxHashSet;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::lexicon::Lexicon;

/// Tokenization settings shared by every scoring site in a run.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ScoreConfig {
    /// Replace punctuation with spaces before splitting. Off by default:
    /// bare whitespace tokenization is the fast path and punctuation-aware
    /// matching buys little recall for the cost.
    pub punct_normalize: bool,
    /// Minimum token length (in Unicode scalar values) for a token to enter
    /// the type set. Must be at least 1.
    pub min_token_len: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            punct_normalize: false,
            min_token_len: 1,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_token_len == 0 {
            return Err("min-token-len must be at least 1".into());
        }
        Ok(())
    }
}

/// The distinct token types of one document (or one line).
///
/// Members are folded, non-empty, and contain no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeSet {
    types: FxHashSet<String>,
}

impl TypeSet {
    pub fn new() -> Self {
        TypeSet::default()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn contains(&self, ty: &str) -> bool {
        self.types.contains(ty)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(String::as_str)
    }

    /// Types in lexicographic order, for persistence and stable output.
    pub fn sorted(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.types.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub(crate) fn as_set(&self) -> &FxHashSet<String> {
        &self.types
    }
}

impl FromIterator<String> for TypeSet {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TypeSet {
            types: iter.into_iter().collect(),
        }
    }
}

impl<'a> FromIterator<&'a str> for TypeSet {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        TypeSet {
            types: iter.into_iter().map(str::to_owned).collect(),
        }
    }
}

/// Characters erased by punctuation normalization: all of Unicode category
/// P* plus the ASCII symbols that web text welds onto tokens.
pub fn is_normalized_punct(c: char) -> bool {
    matches!(c, '`' | '^' | '~' | '|' | '<' | '>' | '=' | '+' | '$')
        || c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// True when lowercasing `token` is the identity, i.e. no fold allocation
/// is needed. ASCII gets a byte-scan fast path; anything else takes the
/// full Unicode check.
fn already_folded(token: &str) -> bool {
    if token.is_ascii() {
        !token.bytes().any(|b| b.is_ascii_uppercase())
    } else {
        token
            .chars()
            .all(|c| c.to_lowercase().eq(std::iter::once(c)))
    }
}

/// Split `text` into its set of distinct folded token types.
///
/// Splits on runs of Unicode whitespace, folds case so matching is
/// case-insensitive, optionally erases punctuation first, and drops tokens
/// shorter than `config.min_token_len` scalar values.
pub fn tokenize(text: &str, config: &ScoreConfig) -> TypeSet {
    let normalized;
    let source = if config.punct_normalize {
        normalized = text
            .chars()
            .map(|c| if is_normalized_punct(c) { ' ' } else { c })
            .collect::<String>();
        normalized.as_str()
    } else {
        text
    };

    // Pre-size for ~one type per 8 bytes of text, capped so a pathological
    // document cannot trigger a giant up-front allocation.
    let mut types: FxHashSet<String> =
        FxHashSet::with_capacity_and_hasher((source.len() / 8).min(1 << 16), Default::default());
    let mut take = |token: &str| {
        if config.min_token_len > 1 && token.chars().count() < config.min_token_len {
            return;
        }
        // Allocate only for tokens not already in the set.
        if already_folded(token) {
            if !types.contains(token) {
                types.insert(token.to_owned());
            }
        } else {
            types.insert(token.to_lowercase());
        }
    };
    // ASCII text can skip char decoding while splitting; the two splitters
    // agree on ASCII input because ASCII whitespace is Unicode whitespace.
    if source.is_ascii() {
        source.split_ascii_whitespace().for_each(&mut take);
    } else {
        source.split_whitespace().for_each(&mut take);
    }
    TypeSet { types }
}

/// Whitelist/blacklist score: `|types ∩ lexicon.types|`.
///
/// Boolean match per type; the smaller set is probed against the larger so
/// the cost is `O(min(|types|, |lexicon|))`.
pub fn score(types: &TypeSet, lexicon: &Lexicon) -> usize {
    let doc = types.as_set();
    let lex = lexicon.types();
    if doc.len() <= lex.len() {
        doc.iter().filter(|t| lex.contains(t.as_str())).count()
    } else {
        lex.iter().filter(|t| doc.contains(t.as_str())).count()
    }
}

/// Length in Unicode scalar values. All length thresholds in the crate count
/// scalars, not bytes, so diacritic-heavy orthographies are not penalized.
pub fn scalar_len(s: &str) -> usize {
    s.chars().count()
}
