//! Sentiment and affect lexicon parsers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Mean intensity increment of a booster word.
pub const B_INCR: f64 = 0.293;
/// Mean intensity decrement of a dampener word.
pub const B_DECR: f64 = -0.293;

const DEFAULT_NEGATIONS: &[&str] = &[
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt", "ain't", "aren't", "can't",
    "couldn't", "daren't", "didn't", "doesn't", "dont", "hadnt", "hasnt", "havent", "isnt", "mightnt", "mustnt",
    "neither", "don't", "hadn't", "hasn't", "haven't", "isn't", "mightn't", "mustn't", "neednt", "needn't",
    "never", "none", "nope", "nor", "not", "nothing", "nowhere", "oughtnt", "shant", "shouldnt", "uhuh",
    "wasnt", "werent", "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't", "without", "wont",
    "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
];

const DEFAULT_BOOSTERS: &[&str] = &[
    "absolutely", "amazingly", "awfully", "completely", "considerable", "considerably", "decidedly", "deeply",
    "effing", "enormous", "enormously", "entirely", "especially", "exceptional", "exceptionally", "extreme",
    "extremely", "fabulously", "flipping", "flippin", "frackin", "fracking", "fricking", "frickin", "frigging",
    "friggin", "fully", "fuckin", "fucking", "fuggin", "fugging", "greatly", "hella", "highly", "hugely",
    "incredible", "incredibly", "intensely", "major", "majorly", "more", "most", "particularly", "purely",
    "quite", "really", "remarkably", "so", "substantially", "thoroughly", "total", "totally", "tremendous",
    "tremendously", "uber", "unbelievably", "unusually", "utter", "utterly", "very",
];

const DEFAULT_DAMPENERS: &[&str] = &[
    "almost", "barely", "hardly", "just enough", "kind of", "kinda", "kindof", "kind-of", "less", "little",
    "marginal", "marginally", "occasional", "occasionally", "partly", "scarce", "scarcely", "slight",
    "slightly", "somewhat", "sort of", "sorta", "sortof", "sort-of",
];

/// Word valence ratings plus the booster and negation word lists used by
/// the sentiment scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    ratings: HashMap<String, f64>,
    boosters: HashMap<String, f64>,
    negations: HashSet<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Ratings,
    Booster,
    Negation,
}

impl SentimentLexicon {
    /// Parse `word<TAB>rating[<TAB>...]` lines. Optional `[booster]`
    /// (`word<TAB>increment`) and `[negation]` (one word per line) sections
    /// replace the default lists; `[lexicon]` switches back to ratings.
    /// Lines starting with `#` that contain no tab are comments.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut ratings = HashMap::new();
        let mut boosters: Option<HashMap<String, f64>> = None;
        let mut negations: Option<HashSet<String>> = None;
        let mut section = Section::Ratings;
        for (idx, raw) in text.lines().enumerate() {
            let row = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || (line.starts_with('#') && !line.contains('\t')) {
                continue;
            }
            match line.trim() {
                "[lexicon]" => {
                    section = Section::Ratings;
                    continue;
                }
                "[booster]" => {
                    section = Section::Booster;
                    boosters.get_or_insert_with(HashMap::new);
                    continue;
                }
                "[negation]" => {
                    section = Section::Negation;
                    negations.get_or_insert_with(HashSet::new);
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Negation => {
                    negations
                        .get_or_insert_with(HashSet::new)
                        .insert(line.trim().to_lowercase());
                }
                Section::Ratings | Section::Booster => {
                    let mut fields = line.trim().split('\t');
                    let word = fields.next().unwrap_or_default();
                    let value = fields
                        .next()
                        .ok_or_else(|| Error::ingest(source_name, row, "expected word<TAB>value"))?;
                    let value: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::ingest(source_name, row, format!("invalid number `{value}`")))?;
                    if !value.is_finite() {
                        return Err(Error::ingest(source_name, row, format!("non-finite value for `{word}`")));
                    }
                    if word.is_empty() {
                        return Err(Error::ingest(source_name, row, "empty word"));
                    }
                    if section == Section::Ratings {
                        ratings.insert(word.to_string(), value);
                    } else {
                        boosters.get_or_insert_with(HashMap::new).insert(word.to_lowercase(), value);
                    }
                }
            }
        }
        if ratings.is_empty() {
            return Err(Error::Empty(format!("{source_name}: sentiment lexicon has no ratings")));
        }
        Ok(SentimentLexicon {
            ratings,
            boosters: boosters.unwrap_or_else(default_boosters),
            negations: negations.unwrap_or_else(default_negations),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The public VADER lexicon shipped with the crate.
    pub fn bundled() -> &'static SentimentLexicon {
        static LEXICON: OnceLock<SentimentLexicon> = OnceLock::new();
        LEXICON.get_or_init(|| {
            Self::parse(include_str!("../../data/vader_lexicon.txt"), "vader_lexicon.txt")
                .expect("bundled lexicon is well formed")
        })
    }

    pub fn rating(&self, word: &str) -> Option<f64> {
        self.ratings.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ratings.contains_key(word)
    }

    pub fn booster(&self, word: &str) -> Option<f64> {
        self.boosters.get(word).copied()
    }

    pub fn is_negation(&self, word: &str) -> bool {
        self.negations.contains(word)
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }
}

fn default_boosters() -> HashMap<String, f64> {
    DEFAULT_BOOSTERS
        .iter()
        .map(|w| (w.to_string(), B_INCR))
        .chain(DEFAULT_DAMPENERS.iter().map(|w| (w.to_string(), B_DECR)))
        .collect()
}

fn default_negations() -> HashSet<String> {
    DEFAULT_NEGATIONS.iter().map(|w| w.to_string()).collect()
}

/// Word-level valence and arousal norms on the 1-9 rating scale.
#[derive(Debug, Clone, PartialEq)]
pub struct AffectLexicon {
    words: Vec<String>,
    valence: Vec<f64>,
    arousal: Vec<f64>,
    index: HashMap<String, usize>,
}

const WORD_COLUMNS: &[&str] = &["word"];
const VALENCE_COLUMNS: &[&str] = &["valence_mean", "v.mean.sum", "valence"];
const AROUSAL_COLUMNS: &[&str] = &["arousal_mean", "a.mean.sum", "arousal"];

impl AffectLexicon {
    /// Build from `(word, valence, arousal)` entries. Words are lowercased and
    /// sorted; the sorted order defines the feature column order.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, f64, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (word, v, a) in entries {
            if !v.is_finite() || !a.is_finite() {
                return Err(Error::NonFinite(format!("affect scores for `{word}`")));
            }
            let word = word.trim().to_lowercase();
            if map.insert(word.clone(), (v, a)).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate affect lexicon word `{word}`")));
            }
        }
        if map.is_empty() {
            return Err(Error::Empty("affect lexicon has no entries".into()));
        }
        let mut lex = AffectLexicon {
            words: Vec::with_capacity(map.len()),
            valence: Vec::with_capacity(map.len()),
            arousal: Vec::with_capacity(map.len()),
            index: HashMap::with_capacity(map.len()),
        };
        for (i, (word, (v, a))) in map.into_iter().enumerate() {
            lex.index.insert(word.clone(), i);
            lex.words.push(word);
            lex.valence.push(v);
            lex.arousal.push(a);
        }
        Ok(lex)
    }

    /// Parse a CSV with a header naming a word column and valence/arousal
    /// mean columns (`word,valence_mean,arousal_mean`, or the XANEW names
    /// `Word,V.Mean.Sum,A.Mean.Sum`). Other columns are ignored.
    pub fn parse<R: std::io::Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(h) => h.map_err(|e| Error::ingest(source_name, 1, e.to_string()))?,
            None => return Err(Error::Empty(format!("{source_name}: affect lexicon is empty"))),
        };
        let names: Vec<String> = header
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').trim().to_lowercase())
            .collect();
        let find = |aliases: &[&str], what: &str| {
            aliases
                .iter()
                .find_map(|a| names.iter().position(|n| n == a))
                .ok_or_else(|| Error::ingest(source_name, 1, format!("missing {what} column")))
        };
        let (wc, vc, ac) = (find(WORD_COLUMNS, "word")?, find(VALENCE_COLUMNS, "valence")?, find(AROUSAL_COLUMNS, "arousal")?);
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (n, rec) in records.enumerate() {
            let row = n + 2;
            let rec = rec.map_err(|e| Error::ingest(source_name, row, e.to_string()))?;
            if rec.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            let field = |c: usize| {
                rec.get(c)
                    .ok_or_else(|| Error::ingest(source_name, row, format!("missing column {}", c + 1)))
            };
            let word = field(wc)?.trim().to_lowercase();
            if word.is_empty() {
                return Err(Error::ingest(source_name, row, "empty word"));
            }
            let number = |c: usize| -> Result<f64> {
                let raw = field(c)?;
                let v: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::ingest(source_name, row, format!("invalid number `{raw}`")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::ingest(source_name, row, format!("non-finite score for `{word}`")))
                }
            };
            let (v, a) = (number(vc)?, number(ac)?);
            if !seen.insert(word.clone()) {
                return Err(Error::ingest(source_name, row, format!("duplicate word `{word}`")));
            }
            entries.push((word, v, a));
        }
        Self::from_entries(entries).map_err(|e| match e {
            Error::Empty(_) => Error::Empty(format!("{source_name}: affect lexicon has no entries")),
            other => other,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), &path.display().to_string())
    }

    /// The 50-word stub lexicon used by tests and the synthetic fixture.
    pub fn stub() -> &'static AffectLexicon {
        static STUB: OnceLock<AffectLexicon> = OnceLock::new();
        STUB.get_or_init(|| {
            Self::parse(include_str!("../../data/affect_stub.csv").as_bytes(), "affect_stub.csv")
                .expect("stub lexicon is well formed")
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Lexicon words in column order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn scores(&self, i: usize) -> (f64, f64) {
        (self.valence[i], self.arousal[i])
    }
}
