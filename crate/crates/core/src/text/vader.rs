//! Rule-based sentiment scoring following the published VADER heuristics.
//!
//! Scores follow the reference implementation (vaderSentiment 3.3.2) rule
//! for rule, including its quirks, but return unrounded values and do not
//! translate emoji to text.

use serde::{Deserialize, Serialize};

use super::lexicon::SentimentLexicon;

/// Intensity added to an ALL-CAPS word when the rest of the text is not shouted.
pub const C_INCR: f64 = 0.733;
/// Scale applied to a negated valence.
pub const N_SCALAR: f64 = -0.74;
/// Normalization constant of the compound score.
pub const ALPHA: f64 = 15.0;

const EXCLAMATION_INCR: f64 = 0.292;
const QUESTION_INCR: f64 = 0.18;
const QUESTION_MAX: f64 = 0.96;

const SPECIAL_CASES: &[(&str, f64)] = &[
    ("the shit", 3.0),
    ("the bomb", 3.0),
    ("bad ass", 1.5),
    ("badass", 1.5),
    ("bus stop", 0.0),
    ("yeah right", -2.0),
    ("kiss of death", -1.5),
    ("to die for", 3.0),
    ("beating heart", 3.5),
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentScores {
    pub neg: f64,
    pub neu: f64,
    pub pos: f64,
    pub compound: f64,
}

impl SentimentScores {
    /// `[neg, neu, pos, compound]`, the column order of the sentiment features.
    pub fn to_array(self) -> [f64; 4] {
        [self.neg, self.neu, self.pos, self.compound]
    }
}

/// `x / sqrt(x^2 + alpha)`, clamped to [-1, 1].
pub fn normalize(score: f64) -> f64 {
    (score / (score * score + ALPHA).sqrt()).clamp(-1.0, 1.0)
}

fn is_ascii_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Python `str.isupper`: at least one cased character and none lowercase.
fn is_upper(s: &str) -> bool {
    let mut cased = false;
    for c in s.chars() {
        if c.is_lowercase() {
            return false;
        }
        cased |= c.is_uppercase();
    }
    cased
}

/// Whitespace split, then strip surrounding punctuation unless that leaves
/// two characters or fewer (which keeps emoticons such as `:)`).
fn words_and_emoticons(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|tok| {
            let stripped = tok.trim_matches(is_ascii_punct);
            if stripped.chars().count() <= 2 {
                tok
            } else {
                stripped
            }
        })
        .collect()
}

fn is_negated(lex: &SentimentLexicon, word: &str) -> bool {
    lex.is_negation(word) || word.contains("n't")
}

fn special_case(phrase: &str) -> Option<f64> {
    SPECIAL_CASES.iter().find(|(p, _)| *p == phrase).map(|(_, v)| *v)
}

struct Text<'a> {
    words: Vec<&'a str>,
    lower: Vec<String>,
    cap_diff: bool,
}

pub fn vader_sentiment(text: &str, lex: &SentimentLexicon) -> SentimentScores {
    let words = words_and_emoticons(text);
    let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let caps = words.iter().filter(|w| is_upper(w)).count();
    let cap_diff = caps > 0 && caps < words.len();
    let t = Text { words, lower, cap_diff };

    let mut sentiments = Vec::with_capacity(t.words.len());
    for i in 0..t.words.len() {
        let w = t.lower[i].as_str();
        if lex.booster(w).is_some() || (w == "kind" && t.lower.get(i + 1).is_some_and(|n| n == "of")) {
            sentiments.push(0.0);
            continue;
        }
        sentiments.push(token_valence(&t, lex, i));
    }
    but_check(&t.lower, &mut sentiments);
    score_valence(&sentiments, text)
}

fn scalar_inc_dec(word: &str, lower: &str, valence: f64, cap_diff: bool, lex: &SentimentLexicon) -> f64 {
    let Some(mut scalar) = lex.booster(lower) else {
        return 0.0;
    };
    if valence < 0.0 {
        scalar = -scalar;
    }
    if is_upper(word) && cap_diff {
        scalar += if valence > 0.0 { C_INCR } else { -C_INCR };
    }
    scalar
}

fn token_valence(t: &Text, lex: &SentimentLexicon, i: usize) -> f64 {
    let w = &t.lower;
    let n = w.len();
    let Some(rating) = lex.rating(&w[i]) else {
        return 0.0;
    };
    let mut valence = rating;
    if w[i] == "no" && i != n - 1 && lex.contains(&w[i + 1]) {
        // "no" negates the next lexicon word instead of scoring itself
        valence = 0.0;
    }
    if (i > 0 && w[i - 1] == "no")
        || (i > 1 && w[i - 2] == "no")
        || (i > 2 && w[i - 3] == "no" && (w[i - 1] == "or" || w[i - 1] == "nor"))
    {
        valence = rating * N_SCALAR;
    }
    if is_upper(t.words[i]) && t.cap_diff {
        valence += if valence > 0.0 { C_INCR } else { -C_INCR };
    }
    for start in 0..3 {
        if i > start && !lex.contains(&w[i - (start + 1)]) {
            let j = i - (start + 1);
            let mut s = scalar_inc_dec(t.words[j], &w[j], valence, t.cap_diff, lex);
            if start == 1 && s != 0.0 {
                s *= 0.95;
            }
            if start == 2 && s != 0.0 {
                s *= 0.9;
            }
            valence += s;
            valence = negation_check(valence, w, start, i, lex);
            if start == 2 {
                valence = special_idioms_check(valence, w, i, lex);
            }
        }
    }
    least_check(valence, w, i, lex)
}

fn negation_check(valence: f64, w: &[String], start: usize, i: usize, lex: &SentimentLexicon) -> f64 {
    match start {
        0 => {
            if is_negated(lex, &w[i - 1]) {
                return valence * N_SCALAR;
            }
        }
        1 => {
            if w[i - 2] == "never" && (w[i - 1] == "so" || w[i - 1] == "this") {
                return valence * 1.25;
            } else if w[i - 2] == "without" && w[i - 1] == "doubt" {
                return valence;
            } else if is_negated(lex, &w[i - 2]) {
                return valence * N_SCALAR;
            }
        }
        _ => {
            // grouping follows the reference: (never && so/this two back) || so/this one back
            if (w[i - 3] == "never" && (w[i - 2] == "so" || w[i - 2] == "this"))
                || (w[i - 1] == "so" || w[i - 1] == "this")
            {
                return valence * 1.25;
            } else if w[i - 3] == "without" && (w[i - 2] == "doubt" || w[i - 1] == "doubt") {
                return valence;
            } else if is_negated(lex, &w[i - 3]) {
                return valence * N_SCALAR;
            }
        }
    }
    valence
}

fn special_idioms_check(mut valence: f64, w: &[String], i: usize, lex: &SentimentLexicon) -> f64 {
    let onezero = format!("{} {}", w[i - 1], w[i]);
    let twoonezero = format!("{} {} {}", w[i - 2], w[i - 1], w[i]);
    let twoone = format!("{} {}", w[i - 2], w[i - 1]);
    let threetwoone = format!("{} {} {}", w[i - 3], w[i - 2], w[i - 1]);
    let threetwo = format!("{} {}", w[i - 3], w[i - 2]);
    for seq in [&onezero, &twoonezero, &twoone, &threetwoone, &threetwo] {
        if let Some(v) = special_case(seq) {
            valence = v;
            break;
        }
    }
    if w.len() - 1 > i {
        if let Some(v) = special_case(&format!("{} {}", w[i], w[i + 1])) {
            valence = v;
        }
    }
    if w.len() - 1 > i + 1 {
        if let Some(v) = special_case(&format!("{} {} {}", w[i], w[i + 1], w[i + 2])) {
            valence = v;
        }
    }
    for ngram in [&threetwoone, &threetwo, &twoone] {
        if let Some(b) = lex.booster(ngram) {
            valence += b;
        }
    }
    valence
}

fn least_check(valence: f64, w: &[String], i: usize, lex: &SentimentLexicon) -> f64 {
    if i > 1 && !lex.contains(&w[i - 1]) && w[i - 1] == "least" {
        if w[i - 2] != "at" && w[i - 2] != "very" {
            return valence * N_SCALAR;
        }
    } else if i > 0 && !lex.contains(&w[i - 1]) && w[i - 1] == "least" {
        return valence * N_SCALAR;
    }
    valence
}

/// Halve sentiment before the first "but" and raise it by half after.
///
/// Mirrors the reference loop, which locates each value by its first equal
/// occurrence; repeated values therefore update the earliest slot.
fn but_check(lower: &[String], sentiments: &mut [f64]) {
    let Some(bi) = lower.iter().position(|w| w == "but") else {
        return;
    };
    for k in 0..sentiments.len() {
        let s = sentiments[k];
        let si = sentiments.iter().position(|&x| x == s).unwrap_or(k);
        if si < bi {
            sentiments[si] = s * 0.5;
        } else if si > bi {
            sentiments[si] = s * 1.5;
        }
    }
}

fn punctuation_emphasis(text: &str) -> f64 {
    let ep = text.matches('!').count().min(4) as f64 * EXCLAMATION_INCR;
    let qm_count = text.matches('?').count();
    let qm = match qm_count {
        0 | 1 => 0.0,
        2 | 3 => qm_count as f64 * QUESTION_INCR,
        _ => QUESTION_MAX,
    };
    ep + qm
}

fn score_valence(sentiments: &[f64], text: &str) -> SentimentScores {
    if sentiments.is_empty() {
        return SentimentScores::default();
    }
    let mut sum: f64 = sentiments.iter().fold(0.0, |acc, s| acc + s);
    let emphasis = punctuation_emphasis(text);
    if sum > 0.0 {
        sum += emphasis;
    } else if sum < 0.0 {
        sum -= emphasis;
    }
    let compound = normalize(sum);

    let (mut pos_sum, mut neg_sum, mut neu_count) = (0.0, 0.0, 0.0);
    for &s in sentiments {
        if s > 0.0 {
            pos_sum += s + 1.0;
        }
        if s < 0.0 {
            neg_sum += s - 1.0;
        }
        if s == 0.0 {
            neu_count += 1.0;
        }
    }
    if pos_sum > neg_sum.abs() {
        pos_sum += emphasis;
    } else if pos_sum < neg_sum.abs() {
        neg_sum -= emphasis;
    }
    let total = pos_sum + neg_sum.abs() + neu_count;
    SentimentScores {
        neg: (neg_sum / total).abs(),
        neu: (neu_count / total).abs(),
        pos: (pos_sum / total).abs(),
        compound,
    }
}
