//! Word tokenization and a deterministic rule + dictionary lemmatizer.
//!
//! Tokens are lowercased runs of alphabetic characters; an apostrophe is kept
//! only between two letters (`don't`, `rock'n`). Lemmas come from an
//! exception dictionary of irregular forms, a list of protected words, and
//! suffix rules for plural `-s/-es`, `-ing`, `-ed` and comparative
//! `-er/-est`. Rules are re-applied until the form stops changing, so the
//! lemmatizer is idempotent on its own output.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Concatenate two sequences.
    pub fn concat(&self, other: &TokenSequence) -> TokenSequence {
        TokenSequence {
            tokens: self.tokens.iter().chain(&other.tokens).cloned().collect(),
            lemmas: self.lemmas.iter().chain(&other.lemmas).cloned().collect(),
        }
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Split `text` into lowercase word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphabetic() {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn tokenize_lemmatize(text: &str) -> TokenSequence {
    let tokens = tokenize(text);
    let lemmas = tokens.iter().map(|t| lemmatize(t)).collect();
    TokenSequence { tokens, lemmas }
}

const MAX_PASSES: usize = 8;

/// Lemma of a single lowercase token.
pub fn lemmatize(word: &str) -> String {
    let mut current = word.to_string();
    for _ in 0..MAX_PASSES {
        match lemmatize_step(&current) {
            Some(next) if next != current => current = next,
            _ => break,
        }
    }
    current
}

fn lemmatize_step(word: &str) -> Option<String> {
    let tables = tables();
    if let Some(lemma) = tables.exceptions.get(word) {
        return Some((*lemma).to_string());
    }
    if tables.protected.contains(word) || word.contains('\'') || !word.is_ascii() {
        return None;
    }
    comparative(word, tables)
        .or_else(|| strip_ing(word))
        .or_else(|| strip_ed(word))
        .or_else(|| strip_plural(word))
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Consonant test with Porter's treatment of `y`.
fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

/// Porter measure: number of VC sequences.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let v = !is_consonant(w, i);
        if prev_vowel && !v {
            m += 1;
        }
        prev_vowel = v;
    }
    m
}

/// Ends consonant-vowel-consonant with the last consonant not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

/// Repair a stem left by removing `-ing` / `-ed`.
fn repair_stem(stem: &str) -> String {
    let w = stem.as_bytes();
    let n = w.len();
    if n >= 2 && w[n - 1] == w[n - 2] && !is_vowel(w[n - 1]) && !matches!(w[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    let needs_e = (measure(w) == 1 && ends_cvc(w))
        || matches!(w[n - 1], b'c' | b'v' | b'u')
        || stem.ends_with("iz")
        || stem.ends_with("bl")
        || stem.ends_with("dg")
        || (stem.ends_with("at") && n >= 3 && !is_vowel(w[n - 3]));
    if needs_e {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

fn strip_ing(word: &str) -> Option<String> {
    let stem = word.strip_suffix("ing")?;
    if stem.len() < 2 || !has_vowel(stem.as_bytes()) {
        return None;
    }
    if stem.len() == 2 && stem.ends_with('y') {
        // dying, lying, tying
        return Some(format!("{}ie", &stem[..1]));
    }
    Some(repair_stem(stem))
}

fn strip_ed(word: &str) -> Option<String> {
    if let Some(stem) = word.strip_suffix("ied") {
        return Some(if stem.len() <= 1 {
            format!("{stem}ie")
        } else {
            format!("{stem}y")
        });
    }
    if let Some(stem) = word.strip_suffix("eed") {
        // agreed -> agree, but need/feed/speed stay
        return (measure(stem.as_bytes()) > 0).then(|| format!("{stem}ee"));
    }
    let stem = word.strip_suffix("ed")?;
    if stem.len() < 2 || !has_vowel(stem.as_bytes()) {
        return None;
    }
    Some(repair_stem(stem))
}

fn strip_plural(word: &str) -> Option<String> {
    if word.len() < 4 {
        return None;
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return Some(if stem.len() <= 1 {
            format!("{stem}ie")
        } else {
            format!("{stem}y")
        });
    }
    if word.ends_with("sses") {
        return Some(word[..word.len() - 2].to_string());
    }
    for suffix in ["shes", "ches", "xes", "zzes"] {
        if word.ends_with(suffix) {
            return Some(word[..word.len() - 2].to_string());
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return None;
    }
    let stem = word.strip_suffix('s')?;
    Some(stem.to_string())
}

fn comparative(word: &str, tables: &Tables) -> Option<String> {
    for suffix in ["est", "er"] {
        let Some(stem) = word.strip_suffix(suffix) else {
            continue;
        };
        if tables.adjectives.contains(stem) {
            return Some(stem.to_string());
        }
        let b = stem.as_bytes();
        if b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2] && tables.adjectives.contains(&stem[..stem.len() - 1]) {
            return Some(stem[..stem.len() - 1].to_string());
        }
        if let Some(root) = stem.strip_suffix('i') {
            let y = format!("{root}y");
            if tables.adjectives.contains(y.as_str()) {
                return Some(y);
            }
        }
        let e = format!("{stem}e");
        if tables.adjectives.contains(e.as_str()) {
            return Some(e);
        }
    }
    None
}

struct Tables {
    exceptions: HashMap<&'static str, &'static str>,
    protected: HashSet<&'static str>,
    adjectives: HashSet<&'static str>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let exceptions = EXCEPTIONS
            .split_whitespace()
            .filter_map(|pair| pair.split_once(':'))
            .collect();
        Tables {
            exceptions,
            protected: PROTECTED.split_whitespace().collect(),
            adjectives: ADJECTIVES.split_whitespace().collect(),
        }
    })
}

/// Irregular forms, `form:lemma`.
const EXCEPTIONS: &str = "
am:be is:be are:be was:be were:be been:be being:be
has:have had:have having:have does:do did:do done:do doing:do
goes:go went:go gone:go going:go said:say made:make took:take taken:take
came:come saw:see seen:see knew:know known:know got:get gotten:get
gave:give given:give felt:feel left:leave thought:think told:tell
found:find became:become kept:keep held:hold brought:bring began:begin
begun:begin stood:stand heard:hear meant:mean met:meet paid:pay sat:sit
spoke:speak spoken:speak led:lead grew:grow grown:grow lost:lose
fell:fall fallen:fall sent:send built:build understood:understand
broke:break broken:break spent:spend drove:drive driven:drive wrote:write
written:write rose:rise risen:rise ate:eat eaten:eat fought:fight
threw:throw thrown:throw flew:fly flown:fly drew:draw drawn:draw
sang:sing sung:sing rang:ring rung:ring swam:swim wore:wear worn:wear
chose:choose chosen:choose forgot:forget forgotten:forget hid:hide
hidden:hide shook:shake shaken:shake woke:wake woken:wake stole:steal
stolen:steal froze:freeze frozen:freeze bought:buy caught:catch
taught:teach sought:seek slept:sleep wept:weep swept:sweep dreamt:dream
burnt:burn learnt:learn bled:bleed fed:feed fled:flee won:win ran:run
began:begin bit:bite bitten:bite blew:blow blown:blow struck:strike
hung:hang lit:light laid:lay lain:lie shone:shine shot:shoot slid:slide
spun:spin stuck:stick stung:sting swung:swing tore:tear torn:tear
trod:tread wound:wind clung:cling dug:dig sank:sink sunk:sink
children:child men:man women:woman feet:foot teeth:tooth mice:mouse
geese:goose people:person lives:life wives:wife knives:knife wolves:wolf
leaves:leaf selves:self shelves:shelf thieves:thief halves:half
loaves:loaf calves:calf
used:use goes:go shoes:shoe toes:toe heroes:hero echoes:echo
changing:change changed:change ranging:range arranged:arrange
";

/// Words the suffix rules would mangle.
const PROTECTED: &str = "
nothing something anything everything morning evening ceiling during
darling wedding pudding sterling lightning spring string thing king ring
sing bring wing swing sting cling fling sling ding ping
need feed seed speed bleed breed greed indeed freed deed weed heed
bed red shed wed fed led hundred sacred naked wicked beloved blessed
crooked ragged rugged wretched kindred
always perhaps news series species means lens yes gas bus plus this his
its was has does goes thus chaos kudos
never ever over under after water river fever forever whatever whenever
wherever together other mother father brother sister lover power flower
tower summer winter number paper answer silver butter letter matter finger
danger anger hunger thunder wonder murder shoulder soldier rather weather
feather leather either neither whether her per super however member
remember december november october september dinner sinner winner
banner manner corner border order master monster mister poster
interest forest honest modest chest west rest best test guest nest quest
breakfast
";

/// Adjectives with regular comparatives, used by the `-er` / `-est` rules.
const ADJECTIVES: &str = "
fast high strong long deep hard cold dark loud soft bright low slow sweet
young old great rich bold wild kind light tight warm clear small tall
short cheap fresh weak quick smart proud poor near few new cool calm
thick quiet rough sharp high lov bitter tough dear fair
big hot sad thin fat wet mad red dim
happy easy heavy crazy lonely pretty funny angry busy early empty dirty
lucky silly ugly hungry holy tiny sexy dry shy lovely sorry
late close nice wise large safe true simple strange brave pure rare
gentle noble fine free blue wide
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_empty_sequence() {
        let t = tokenize_lemmatize("");
        assert!(t.is_empty());
        assert_eq!(t.lemmas.len(), 0);
    }

    #[test]
    fn dogs_running() {
        let t = tokenize_lemmatize("Dogs running");
        assert_eq!(t.tokens, ["dogs", "running"]);
        assert_eq!(t.lemmas, ["dog", "run"]);
    }

    #[test]
    fn apostrophes_inside_words_are_kept() {
        let t = tokenize_lemmatize("don't stop");
        assert_eq!(t.tokens, ["don't", "stop"]);
        assert_eq!(tokenize("'quoted' rock'n'roll, ya'"), ["quoted", "rock'n'roll", "ya"]);
        assert_eq!(tokenize("I\u{2019}m here"), ["i'm", "here"]);
    }

    #[test]
    fn punctuation_and_digits_split_tokens() {
        assert_eq!(tokenize("Hello, world!! 2night... x-ray"), ["hello", "world", "night", "x", "ray"]);
    }

    #[test]
    fn hand_checked_lemmas() {
        let cases = [
            ("loved", "love"),
            ("loving", "love"),
            ("dancing", "dance"),
            ("making", "make"),
            ("stopped", "stop"),
            ("falling", "fall"),
            ("kissed", "kiss"),
            ("cried", "cry"),
            ("dying", "die"),
            ("died", "die"),
            ("stories", "story"),
            ("wishes", "wish"),
            ("kisses", "kiss"),
            ("hearts", "heart"),
            ("happier", "happy"),
            ("biggest", "big"),
            ("colder", "cold"),
            ("later", "late"),
            ("went", "go"),
            ("children", "child"),
            ("nothing", "nothing"),
            ("need", "need"),
            ("agreed", "agree"),
            ("this", "this"),
            ("always", "always"),
            ("forever", "forever"),
            ("walked", "walk"),
            ("opened", "open"),
            ("hoping", "hope"),
            ("hopping", "hop"),
            ("smiled", "smile"),
            ("bed", "bed"),
            ("sing", "sing"),
        ];
        for (word, lemma) in cases {
            assert_eq!(lemmatize(word), lemma, "lemma of {word}");
        }
    }

    #[test]
    fn exception_targets_are_fixed_points() {
        for pair in EXCEPTIONS.split_whitespace() {
            let (_, lemma) = pair.split_once(':').unwrap();
            assert_eq!(lemmatize(lemma), lemma, "exception target {lemma} is not stable");
        }
    }

    #[test]
    fn idempotent_over_the_sentiment_lexicon_vocabulary() {
        let lexicon = include_str!("../../data/vader_lexicon.txt");
        for line in lexicon.lines() {
            let word = line.split('\t').next().unwrap();
            for token in tokenize(word) {
                let once = lemmatize(&token);
                assert_eq!(lemmatize(&once), once, "{token}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn lemmatizer_is_idempotent(text in "[a-zA-Z' ,.!]{0,60}") {
            let first = tokenize_lemmatize(&text);
            proptest::prop_assert_eq!(first.tokens.len(), first.lemmas.len());
            proptest::prop_assert!(first.tokens.iter().all(|t| !t.is_empty()));
            let second = tokenize_lemmatize(&first.lemmas.join(" "));
            proptest::prop_assert_eq!(&second.lemmas, &first.lemmas);
        }
    }
}
