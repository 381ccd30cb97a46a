//! Reference tables shipped with the crate (see `data/README.md`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stats::{correlate, Condition, CorrelationPair, CorrelationResult, DemographicRecord};

const OCCUPATIONS: &str = include_str!("../../data/occupations.json");
const AWARDS: &str = include_str!("../../data/awards.json");
const OASIS: &str = include_str!("../../data/oasis.json");
const STIMULI: &str = include_str!("../../data/weat_stimuli.json");
const PROMPTS: &str = include_str!("../../data/prompts.json");

const PINNED: [(&str, &str, &str); 5] = [
    (
        "occupations.json",
        OCCUPATIONS,
        "4e7bed74ad7d33e4379aa63eac190322ed82b0b0c9a67eec8e755992c56c8605",
    ),
    (
        "awards.json",
        AWARDS,
        "d0d95e7e1a68acce0d6e027b9341b67002841da286d417042e5877db508fff3c",
    ),
    (
        "oasis.json",
        OASIS,
        "fc6655a85f6e09298f24ed4a8bd0106ddfff9bf8b7e64b63c74fad503f3ebb19",
    ),
    (
        "weat_stimuli.json",
        STIMULI,
        "a2cbe6a376c81902db80a093befa4ab3534697a6ad5008a1a3cff4578f2749bd",
    ),
    (
        "prompts.json",
        PROMPTS,
        "377c076ce7f3efb53ad4f570fe8b4b7f72eb2c6af5c31051eebe255bc34b6560",
    ),
];

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lowercase, trimmed, single-spaced join key.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OasisTheme {
    pub theme: String,
    pub valence_mean: f64,
    pub effect_size: f64,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSet {
    pub concept: String,
    pub group: String,
    pub stimuli: Vec<String>,
    pub prompt_template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSet {
    pub templates: BTreeMap<String, String>,
    pub debias: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct Table<T> {
    version: u32,
    #[serde(default)]
    #[allow(dead_code)]
    source: Option<String>,
    records: Vec<T>,
}

#[derive(Deserialize)]
struct StimulusFile {
    version: u32,
    concepts: Vec<StimulusSet>,
}

#[derive(Deserialize)]
struct PromptFile {
    version: u32,
    #[serde(flatten)]
    prompts: PromptSet,
}

/// Which bundled table a correlation joins against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceTable {
    Occupations,
    Awards,
    Oasis,
}

impl ReferenceTable {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceTable::Occupations => "occupations",
            ReferenceTable::Awards => "awards",
            ReferenceTable::Oasis => "oasis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceData {
    pub occupations: Vec<DemographicRecord>,
    pub awards: Vec<DemographicRecord>,
    pub oasis: Vec<OasisTheme>,
    pub stimuli: Vec<StimulusSet>,
    pub prompts: PromptSet,
}

fn parse<T: serde::de::DeserializeOwned>(name: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        context: format!("bundled {name}"),
        source,
    })
}

fn check_version(name: &str, version: u32) -> Result<()> {
    if version != 1 {
        return Err(Error::invalid(format!(
            "bundled {name}: unsupported version {version}"
        )));
    }
    Ok(())
}

impl ReferenceData {
    /// Parses the bundled tables after checking their pinned checksums.
    pub fn bundled() -> Result<Self> {
        verify_checksums()?;
        let occ: Table<DemographicRecord> = parse("occupations.json", OCCUPATIONS)?;
        let awards: Table<DemographicRecord> = parse("awards.json", AWARDS)?;
        let oasis: Table<OasisTheme> = parse("oasis.json", OASIS)?;
        let stimuli: StimulusFile = parse("weat_stimuli.json", STIMULI)?;
        let prompts: PromptFile = parse("prompts.json", PROMPTS)?;
        check_version("occupations.json", occ.version)?;
        check_version("awards.json", awards.version)?;
        check_version("oasis.json", oasis.version)?;
        check_version("weat_stimuli.json", stimuli.version)?;
        check_version("prompts.json", prompts.version)?;
        for r in occ.records.iter().chain(&awards.records) {
            r.validate()?;
        }
        Ok(Self {
            occupations: occ.records,
            awards: awards.records,
            oasis: oasis.records,
            stimuli: stimuli.concepts,
            prompts: prompts.prompts,
        })
    }

    /// First demographic record whose normalized label matches.
    pub fn demographic(&self, table: ReferenceTable, label: &str) -> Option<&DemographicRecord> {
        let key = normalize_label(label);
        let rows = match table {
            ReferenceTable::Occupations => &self.occupations,
            ReferenceTable::Awards => &self.awards,
            ReferenceTable::Oasis => return None,
        };
        rows.iter().find(|r| normalize_label(&r.label) == key)
    }

    pub fn oasis_theme(&self, label: &str) -> Option<&OasisTheme> {
        let key = normalize_label(label);
        self.oasis.iter().find(|t| normalize_label(&t.theme) == key)
    }

    /// Distinct occupation labels in table order.
    pub fn occupation_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.occupations {
            let l = normalize_label(&r.label);
            if !out.contains(&l) {
                out.push(l);
            }
        }
        out
    }

    /// Correlation between the table's valence means and its recorded effect sizes.
    pub fn oasis_baseline(&self) -> Result<CorrelationResult> {
        correlate(
            self.oasis
                .iter()
                .map(|t| CorrelationPair {
                    label: normalize_label(&t.theme),
                    effect_size: t.effect_size,
                    statistic_pct: t.valence_mean,
                })
                .collect(),
        )
    }

    /// Fills a template's `___` slot and appends the debias sentence for `condition`.
    pub fn prompt(&self, template: &str, subject: &str, condition: Condition) -> Result<String> {
        let tmpl = self
            .prompts
            .templates
            .get(template)
            .ok_or_else(|| Error::invalid(format!("unknown prompt template `{template}`")))?;
        let article = match subject.chars().next() {
            Some(c) if "aeiouAEIOU".contains(c) => "an",
            _ => "a",
        };
        let mut text = tmpl.replace("(a/an)", article).replace("___", subject);
        if condition != Condition::Control {
            let sentence = &self.prompts.debias[condition.as_str()];
            text.push(' ');
            text.push_str(sentence);
        }
        Ok(text)
    }
}

/// `(file name, sha256)` for every bundled table.
pub fn checksums() -> Vec<(&'static str, String)> {
    PINNED
        .iter()
        .map(|(name, text, _)| (*name, sha256_hex(text.as_bytes())))
        .collect()
}

pub fn verify_checksums() -> Result<()> {
    for (name, text, pinned) in PINNED {
        let actual = sha256_hex(text.as_bytes());
        if actual != pinned {
            return Err(Error::invalid(format!(
                "bundled {name} checksum {actual} does not match pinned {pinned}"
            )));
        }
    }
    Ok(())
}
