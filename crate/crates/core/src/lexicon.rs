//! Phoneme inventory, pronunciation lexicon and minimal-pair enumeration.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Vowel,
    Consonant,
    Silence,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Vowel => "vowel",
            Kind::Consonant => "consonant",
            Kind::Silence => "silence",
        }
    }
}

/// Consonant place of articulation, front to back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Place {
    Bilabial,
    Labiodental,
    Dental,
    Alveolar,
    Postalveolar,
    Palatal,
    Velar,
    Glottal,
}

impl Place {
    pub const ALL: [Place; 8] = [
        Place::Bilabial,
        Place::Labiodental,
        Place::Dental,
        Place::Alveolar,
        Place::Postalveolar,
        Place::Palatal,
        Place::Velar,
        Place::Glottal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Place::Bilabial => "bilabial",
            Place::Labiodental => "labiodental",
            Place::Dental => "dental",
            Place::Alveolar => "alveolar",
            Place::Postalveolar => "postalveolar",
            Place::Palatal => "palatal",
            Place::Velar => "velar",
            Place::Glottal => "glottal",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Place {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Place::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown place of articulation `{s}`")))
    }
}

struct Entry {
    symbol: &'static str,
    kind: Kind,
    place: Option<Place>,
}

const fn v(symbol: &'static str) -> Entry {
    Entry {
        symbol,
        kind: Kind::Vowel,
        place: None,
    }
}

const fn c(symbol: &'static str, place: Place) -> Entry {
    Entry {
        symbol,
        kind: Kind::Consonant,
        place: Some(place),
    }
}

use Place::*;

/// Alphabetical ARPAbet, then silence. The one-hot index of a phoneme is its
/// position in this table.
///
/// Places: W is grouped with the bilabials (labial-velar glide), R with the
/// alveolars, Y is the only palatal and HH the only glottal.
static ENTRIES: [Entry; 40] = [
    v("AA"),
    v("AE"),
    v("AH"),
    v("AO"),
    v("AW"),
    v("AY"),
    c("B", Bilabial),
    c("CH", Postalveolar),
    c("D", Alveolar),
    c("DH", Dental),
    v("EH"),
    v("ER"),
    v("EY"),
    c("F", Labiodental),
    c("G", Velar),
    c("HH", Glottal),
    v("IH"),
    v("IY"),
    c("JH", Postalveolar),
    c("K", Velar),
    c("L", Alveolar),
    c("M", Bilabial),
    c("N", Alveolar),
    c("NG", Velar),
    v("OW"),
    v("OY"),
    c("P", Bilabial),
    c("R", Alveolar),
    c("S", Alveolar),
    c("SH", Postalveolar),
    c("T", Alveolar),
    c("TH", Dental),
    v("UH"),
    v("UW"),
    c("V", Labiodental),
    c("W", Bilabial),
    c("Y", Palatal),
    c("Z", Alveolar),
    c("ZH", Postalveolar),
    Entry {
        symbol: "SIL",
        kind: Kind::Silence,
        place: None,
    },
];

/// One inventory entry, stored as its inventory index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phoneme(u8);

impl Phoneme {
    pub const SIL: Phoneme = Phoneme(39);

    pub fn from_symbol(symbol: &str) -> Result<Self> {
        ENTRIES
            .iter()
            .position(|e| e.symbol == symbol)
            .map(|i| Phoneme(i as u8))
            .ok_or_else(|| Error::UnknownPhoneme(symbol.to_string()))
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index < ENTRIES.len() {
            Ok(Phoneme(index as u8))
        } else {
            Err(Error::Index {
                index,
                len: ENTRIES.len(),
            })
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn symbol(self) -> &'static str {
        ENTRIES[self.index()].symbol
    }

    pub fn kind(self) -> Kind {
        ENTRIES[self.index()].kind
    }

    pub fn is_vowel(self) -> bool {
        self.kind() == Kind::Vowel
    }

    pub fn place(self) -> Option<Place> {
        ENTRIES[self.index()].place
    }
}

impl fmt::Debug for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Phoneme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phoneme::from_symbol(s)
    }
}

/// Place of articulation of a consonant.
pub fn place_of(p: Phoneme) -> Result<Place> {
    p.place().ok_or(Error::NotConsonant {
        symbol: p.symbol(),
        kind: p.kind().as_str(),
    })
}

/// The fixed 40-entry phoneme inventory.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inventory;

impl Inventory {
    pub const SIZE: usize = 40;

    pub fn len(&self) -> usize {
        Self::SIZE
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn phonemes(&self) -> impl Iterator<Item = Phoneme> {
        (0..Self::SIZE as u8).map(Phoneme)
    }

    /// Speech phonemes only (everything but silence).
    pub fn speech(&self) -> impl Iterator<Item = Phoneme> {
        self.phonemes().filter(|p| p.kind() != Kind::Silence)
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        Phoneme::from_symbol(symbol).map(Phoneme::index)
    }

    pub fn one_hot(&self, p: Phoneme) -> Vec<f64> {
        let mut v = vec![0.0; Self::SIZE];
        v[p.index()] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhonemeSequence {
    tokens: Vec<Phoneme>,
    source_word: Option<String>,
}

impl PhonemeSequence {
    pub fn new(tokens: Vec<Phoneme>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Param("phoneme sequence must not be empty".into()));
        }
        Ok(PhonemeSequence {
            tokens,
            source_word: None,
        })
    }

    pub fn with_word(mut self, word: impl Into<String>) -> Self {
        self.source_word = Some(word.into());
        self
    }

    /// Parses space-separated ARPAbet symbols, stripping stress digits.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .map(|t| Phoneme::from_symbol(strip_stress(t)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens)
    }

    pub fn tokens(&self) -> &[Phoneme] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source_word(&self) -> Option<&str> {
        self.source_word.as_deref()
    }

    pub fn concat(parts: &[&PhonemeSequence]) -> Result<Self> {
        Self::new(parts.iter().flat_map(|s| s.tokens.iter().copied()).collect())
    }
}

impl fmt::Display for PhonemeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(p.symbol())?;
        }
        Ok(())
    }
}

fn strip_stress(token: &str) -> &str {
    token.trim_end_matches(|c: char| c.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexEntry {
    pub word: String,
    pub seq: PhonemeSequence,
}

/// Words with one pronunciation each, in frequency-rank order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    entries: Vec<LexEntry>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    /// Builds a lexicon from `(word, pronunciation)` pairs given in rank
    /// order. Later duplicates of a word are ignored.
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, PhonemeSequence)>,
        S: Into<String>,
    {
        let mut lex = Lexicon::default();
        for (word, seq) in entries {
            let word = word.into();
            if lex.index.contains_key(&word) {
                continue;
            }
            lex.index.insert(word.clone(), lex.entries.len());
            let seq = seq.with_word(word.clone());
            lex.entries.push(LexEntry { word, seq });
        }
        lex
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    pub fn get(&self, word: &str) -> Option<&PhonemeSequence> {
        self.index.get(word).map(|&i| &self.entries[i].seq)
    }

    /// 0-based frequency rank among the lexicon's own words.
    pub fn rank(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Dictionary text in the format accepted by [`parse_lexicon`].
    pub fn to_dict_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.word.to_uppercase());
            out.push_str("  ");
            out.push_str(&e.seq.to_string());
            out.push('\n');
        }
        out
    }

    pub fn to_wordlist_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.word);
            out.push('\n');
        }
        out
    }
}

/// Result of parsing one dictionary line.
enum DictLine<'a> {
    Skip,
    Entry {
        word: String,
        phones: Vec<&'a str>,
    },
}

fn parse_dict_line(line: &str, lineno: usize) -> Result<DictLine<'_>> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let line = line.trim();
    if line.is_empty() || line.starts_with(";;;") {
        return Ok(DictLine::Skip);
    }
    let mut tokens = line.split_whitespace();
    let head = tokens.next().unwrap_or_default();
    let phones: Vec<&str> = tokens.collect();
    let malformed = |msg: String| Error::Parse { line: lineno, msg };
    if phones.is_empty() {
        return Err(malformed(format!("entry `{head}` has no pronunciation")));
    }
    let (word, variant) = match head.find('(') {
        None => (head, 0),
        Some(open) => {
            let suffix = &head[open..];
            let digits = suffix
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                .ok_or_else(|| malformed(format!("bad variant suffix in `{head}`")))?;
            (&head[..open], digits.parse::<u32>().unwrap_or(u32::MAX))
        }
    };
    if word.is_empty() {
        return Err(malformed("empty headword".into()));
    }
    for p in &phones {
        let base = strip_stress(p);
        if base.is_empty() || !base.bytes().all(|b| b.is_ascii_uppercase()) || p.len() - base.len() > 1
        {
            return Err(malformed(format!("bad phoneme token `{p}`")));
        }
    }
    if variant != 0 {
        return Ok(DictLine::Skip);
    }
    Ok(DictLine::Entry {
        word: word.to_lowercase(),
        phones,
    })
}

/// Parses a pronunciation dictionary and a rank-ordered word list into a
/// lexicon of the `top_n` most frequent words that have a usable entry.
///
/// Only the unnumbered pronunciation of each word is kept, stress digits are
/// stripped, and words using symbols outside the inventory are dropped.
pub fn parse_lexicon(dict_text: &str, wordlist: &str, top_n: usize) -> Result<Lexicon> {
    let mut dict: HashMap<String, Option<PhonemeSequence>> = HashMap::new();
    for (i, line) in dict_text.lines().enumerate() {
        if let DictLine::Entry { word, phones } = parse_dict_line(line, i + 1)? {
            if dict.contains_key(&word) {
                continue;
            }
            let seq = phones
                .iter()
                .map(|p| Phoneme::from_symbol(strip_stress(p)))
                .collect::<Result<Vec<_>>>()
                .ok()
                .and_then(|t| PhonemeSequence::new(t).ok());
            dict.insert(word, seq);
        }
    }

    let mut picked = Vec::new();
    let mut seen = HashSet::new();
    for line in wordlist.lines() {
        if picked.len() >= top_n {
            break;
        }
        let word = line.trim().to_lowercase();
        if word.is_empty() || !seen.insert(word.clone()) {
            continue;
        }
        if let Some(Some(seq)) = dict.get(&word) {
            picked.push((word, seq.clone()));
        }
    }
    if picked.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    Ok(Lexicon::from_entries(picked))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MinimalPair {
    pub word_a: String,
    pub word_b: String,
    pub seq_a: PhonemeSequence,
    pub seq_b: PhonemeSequence,
    pub trigger_pos: usize,
}

impl MinimalPair {
    /// Builds a pair in canonical order, checking that the sequences differ
    /// at exactly one position.
    pub fn new(
        word_a: impl Into<String>,
        seq_a: PhonemeSequence,
        word_b: impl Into<String>,
        seq_b: PhonemeSequence,
    ) -> Result<Self> {
        let (word_a, word_b) = (word_a.into(), word_b.into());
        if seq_a.len() != seq_b.len() {
            return Err(Error::Param(format!(
                "`{word_a}` and `{word_b}` differ in length"
            )));
        }
        let diffs: Vec<usize> = (0..seq_a.len())
            .filter(|&i| seq_a.tokens()[i] != seq_b.tokens()[i])
            .collect();
        if diffs.len() != 1 {
            return Err(Error::Param(format!(
                "`{word_a}` and `{word_b}` differ at {} positions",
                diffs.len()
            )));
        }
        let trigger_pos = diffs[0];
        Ok(if word_a <= word_b {
            MinimalPair {
                word_a,
                word_b,
                seq_a,
                seq_b,
                trigger_pos,
            }
        } else {
            MinimalPair {
                word_a: word_b,
                word_b: word_a,
                seq_a: seq_b,
                seq_b: seq_a,
                trigger_pos,
            }
        })
    }

    pub fn len(&self) -> usize {
        self.seq_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq_a.is_empty()
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.word_a, self.word_b, self.trigger_pos, self.seq_a, self.seq_b
        )
    }

    pub fn from_line(line: &str, lineno: usize) -> Result<Self> {
        let bad = |msg: &str| Error::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let trigger: usize = fields[2].parse().map_err(|_| bad("bad trigger_pos"))?;
        let seq_a = PhonemeSequence::parse(fields[3]).map_err(|e| bad(&e.to_string()))?;
        let seq_b = PhonemeSequence::parse(fields[4]).map_err(|e| bad(&e.to_string()))?;
        let pair = MinimalPair::new(
            fields[0],
            seq_a.with_word(fields[0]),
            fields[1],
            seq_b.with_word(fields[1]),
        )
        .map_err(|e| bad(&e.to_string()))?;
        if pair.trigger_pos != trigger || pair.word_a != fields[0] {
            return Err(bad("pair is not in canonical form"));
        }
        Ok(pair)
    }
}

/// All unordered pairs of equal-length words whose pronunciations differ by
/// exactly one substituted phoneme, sorted by `(word_a, word_b)`.
///
/// Homophones are collapsed onto their most frequent spelling first.
pub fn enumerate_minimal_pairs(lex: &Lexicon) -> Vec<MinimalPair> {
    let mut by_seq: HashMap<&[Phoneme], usize> = HashMap::new();
    let mut reps = Vec::new();
    for (i, e) in lex.entries().iter().enumerate() {
        by_seq.entry(e.seq.tokens()).or_insert_with(|| {
            reps.push(i);
            i
        });
    }

    // Words sharing a sequence with one position masked out are exactly the
    // words that differ from each other at that position.
    const MASK: u8 = u8::MAX;
    let mut buckets: HashMap<(usize, Vec<u8>), Vec<usize>> = HashMap::new();
    for &i in &reps {
        let tokens = lex.entries()[i].seq.tokens();
        for pos in 0..tokens.len() {
            let key: Vec<u8> = tokens
                .iter()
                .enumerate()
                .map(|(j, p)| if j == pos { MASK } else { p.0 })
                .collect();
            buckets.entry((pos, key)).or_default().push(i);
        }
    }

    let mut pairs = Vec::new();
    for members in buckets.values() {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                let (a, b) = (&lex.entries()[i], &lex.entries()[j]);
                let pair = MinimalPair::new(a.word.clone(), a.seq.clone(), b.word.clone(), b.seq.clone())
                    .expect("bucket members differ at exactly the masked position");
                pairs.push(pair);
            }
        }
    }
    pairs.sort_by(|p, q| (&p.word_a, &p.word_b).cmp(&(&q.word_a, &q.word_b)));
    pairs
}

pub fn write_pairs(pairs: &[MinimalPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.to_line());
        out.push('\n');
    }
    out
}

pub fn read_pairs(text: &str) -> Result<Vec<MinimalPair>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| MinimalPair::from_line(l, i + 1))
        .collect()
}
