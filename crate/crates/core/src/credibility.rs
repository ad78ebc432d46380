//! Outlet records from the two rating providers and the Questionable/Reliable
//! labeling heuristic.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provider {
    #[serde(rename = "MBFC")]
    Mbfc,
    #[serde(rename = "NG")]
    NewsGuard,
}

/// MBFC category: the five political-bias labels plus the three reliability labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MbfcCategory {
    Right,
    #[serde(rename = "Right-Center")]
    RightCenter,
    #[serde(rename = "Least-Biased")]
    LeastBiased,
    #[serde(rename = "Left-Center")]
    LeftCenter,
    Left,
    Questionable,
    #[serde(rename = "Conspiracy-Pseudoscience")]
    ConspiracyPseudoscience,
    #[serde(rename = "Pro-Science")]
    ProScience,
}

impl MbfcCategory {
    pub const ALL: [MbfcCategory; 8] = [
        MbfcCategory::Right,
        MbfcCategory::RightCenter,
        MbfcCategory::LeastBiased,
        MbfcCategory::LeftCenter,
        MbfcCategory::Left,
        MbfcCategory::Questionable,
        MbfcCategory::ConspiracyPseudoscience,
        MbfcCategory::ProScience,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MbfcCategory::Right => "Right",
            MbfcCategory::RightCenter => "Right-Center",
            MbfcCategory::LeastBiased => "Least-Biased",
            MbfcCategory::LeftCenter => "Left-Center",
            MbfcCategory::Left => "Left",
            MbfcCategory::Questionable => "Questionable",
            MbfcCategory::ConspiracyPseudoscience => "Conspiracy-Pseudoscience",
            MbfcCategory::ProScience => "Pro-Science",
        }
    }
}

impl FromStr for MbfcCategory {
    type Err = RecordError;

    /// Case-insensitive; spaces and underscores are accepted for hyphens.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = |c: char| match c {
            ' ' | '_' => '-',
            c => c.to_ascii_lowercase(),
        };
        let wanted = s.trim().chars().map(norm);
        MbfcCategory::ALL
            .into_iter()
            .find(|c| c.as_str().chars().map(norm).eq(wanted.clone()))
            .ok_or(RecordError::UnknownCategory)
    }
}

impl fmt::Display for MbfcCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// NewsGuard ratings that sit outside the credibility scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NgSpecial {
    Humor,
    Platform,
}

impl FromStr for NgSpecial {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "humor" | "humour" | "satire" => Ok(NgSpecial::Humor),
            "platform" => Ok(NgSpecial::Platform),
            _ => Err(RecordError::UnknownSpecial),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CredibilityLabel {
    Questionable,
    Reliable,
    Unknown,
}

impl CredibilityLabel {
    /// Swap Questionable and Reliable; Unknown is fixed.
    pub fn flipped(self) -> Self {
        match self {
            CredibilityLabel::Questionable => CredibilityLabel::Reliable,
            CredibilityLabel::Reliable => CredibilityLabel::Questionable,
            CredibilityLabel::Unknown => CredibilityLabel::Unknown,
        }
    }

    /// `l_j` of the leaning definition: 1 for Questionable, 0 for Reliable.
    pub fn leaning_bit(self) -> Option<bool> {
        match self {
            CredibilityLabel::Questionable => Some(true),
            CredibilityLabel::Reliable => Some(false),
            CredibilityLabel::Unknown => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CredibilityLabel::Questionable => "questionable",
            CredibilityLabel::Reliable => "reliable",
            CredibilityLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for CredibilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("record carries neither MBFC nor NG fields")]
    NoProvider,
    #[error("record mixes MBFC and NG fields")]
    MixedProviders,
    #[error("provider column disagrees with the populated fields")]
    ProviderMismatch,
    #[error("MBFC record without a bias category")]
    MissingCategory,
    #[error("MBFC bias score outside [0, 10]")]
    BiasScoreRange,
    #[error("NG score outside [0, 100]")]
    NgScoreRange,
    #[error("unknown MBFC category")]
    UnknownCategory,
    #[error("unknown NG special rating")]
    UnknownSpecial,
    #[error("empty domain")]
    EmptyDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutletRecord {
    pub domain: String,
    pub provider: Provider,
    pub mbfc_bias: Option<MbfcCategory>,
    /// Average of the four MBFC bias categories; stored, never used for labels.
    pub mbfc_bias_score: Option<f64>,
    pub ng_score: Option<f64>,
    pub ng_special: Option<NgSpecial>,
}

impl OutletRecord {
    pub fn mbfc(domain: impl Into<String>, bias: MbfcCategory) -> Self {
        OutletRecord {
            domain: domain.into(),
            provider: Provider::Mbfc,
            mbfc_bias: Some(bias),
            mbfc_bias_score: None,
            ng_score: None,
            ng_special: None,
        }
    }

    pub fn newsguard(domain: impl Into<String>, score: f64) -> Self {
        OutletRecord {
            domain: domain.into(),
            provider: Provider::NewsGuard,
            mbfc_bias: None,
            mbfc_bias_score: None,
            ng_score: Some(score),
            ng_special: None,
        }
    }

    pub fn newsguard_special(domain: impl Into<String>, special: NgSpecial) -> Self {
        OutletRecord {
            ng_score: None,
            ng_special: Some(special),
            ..OutletRecord::newsguard(domain, 0.0)
        }
    }

    /// Exactly one provider's fields populated, each within range.
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.domain.is_empty() {
            return Err(RecordError::EmptyDomain);
        }
        let has_mbfc = self.mbfc_bias.is_some() || self.mbfc_bias_score.is_some();
        let has_ng = self.ng_score.is_some() || self.ng_special.is_some();
        match (has_mbfc, has_ng) {
            (false, false) => return Err(RecordError::NoProvider),
            (true, true) => return Err(RecordError::MixedProviders),
            (true, false) if self.provider != Provider::Mbfc => {
                return Err(RecordError::ProviderMismatch)
            }
            (false, true) if self.provider != Provider::NewsGuard => {
                return Err(RecordError::ProviderMismatch)
            }
            _ => {}
        }
        if self.provider == Provider::Mbfc && self.mbfc_bias.is_none() {
            return Err(RecordError::MissingCategory);
        }
        if let Some(s) = self.mbfc_bias_score {
            if !(0.0..=10.0).contains(&s) {
                return Err(RecordError::BiasScoreRange);
            }
        }
        if let Some(s) = self.ng_score {
            if !(0.0..=100.0).contains(&s) {
                return Err(RecordError::NgScoreRange);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// `true`: NG score > 60 is Reliable. `false`: score >= 60 is Reliable.
    pub ng_reliable_strict: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            ng_reliable_strict: true,
        }
    }
}

/// NG credibility threshold in points.
pub const NG_THRESHOLD: f64 = 60.0;

/// MBFC Questionable and Conspiracy-Pseudoscience outlets are Questionable,
/// every other MBFC category Reliable. NG outlets are Reliable above 60
/// points and Questionable at or below; humor and platform sites are Unknown.
pub fn classify_outlet(record: &OutletRecord, config: &ClassifierConfig) -> CredibilityLabel {
    match record.provider {
        Provider::Mbfc => match record.mbfc_bias {
            Some(MbfcCategory::Questionable | MbfcCategory::ConspiracyPseudoscience) => {
                CredibilityLabel::Questionable
            }
            Some(_) => CredibilityLabel::Reliable,
            None => CredibilityLabel::Unknown,
        },
        Provider::NewsGuard => {
            if record.ng_special.is_some() {
                return CredibilityLabel::Unknown;
            }
            let Some(score) = record.ng_score else {
                return CredibilityLabel::Unknown;
            };
            let reliable = if config.ng_reliable_strict {
                score > NG_THRESHOLD
            } else {
                score >= NG_THRESHOLD
            };
            if reliable {
                CredibilityLabel::Reliable
            } else {
                CredibilityLabel::Questionable
            }
        }
    }
}

/// Combine the labels of a post's registered domains: the majority of
/// Questionable/Reliable votes wins, ties and no votes give Unknown.
pub fn majority_label<I: IntoIterator<Item = CredibilityLabel>>(labels: I) -> CredibilityLabel {
    let (mut q, mut r) = (0usize, 0usize);
    for l in labels {
        match l {
            CredibilityLabel::Questionable => q += 1,
            CredibilityLabel::Reliable => r += 1,
            CredibilityLabel::Unknown => {}
        }
    }
    match q.cmp(&r) {
        core::cmp::Ordering::Greater => CredibilityLabel::Questionable,
        core::cmp::Ordering::Less => CredibilityLabel::Reliable,
        core::cmp::Ordering::Equal => CredibilityLabel::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CredibilityLabel::*;

    #[test]
    fn mbfc_path() {
        let cfg = ClassifierConfig::default();
        for cat in MbfcCategory::ALL {
            let expected = match cat {
                MbfcCategory::Questionable | MbfcCategory::ConspiracyPseudoscience => Questionable,
                _ => Reliable,
            };
            assert_eq!(classify_outlet(&OutletRecord::mbfc("x.com", cat), &cfg), expected, "{cat}");
        }
    }

    #[test]
    fn ng_threshold_boundary() {
        let strict = ClassifierConfig::default();
        let lenient = ClassifierConfig {
            ng_reliable_strict: false,
        };
        let at = OutletRecord::newsguard("a.com", 60.0);
        assert_eq!(classify_outlet(&at, &strict), Questionable);
        assert_eq!(classify_outlet(&at, &lenient), Reliable);
        assert_eq!(classify_outlet(&OutletRecord::newsguard("a.com", 80.0), &strict), Reliable);
        assert_eq!(classify_outlet(&OutletRecord::newsguard("a.com", 59.5), &lenient), Questionable);
        assert_eq!(classify_outlet(&OutletRecord::newsguard("a.com", 60.01), &strict), Reliable);
    }

    #[test]
    fn ng_special_is_unknown() {
        let cfg = ClassifierConfig::default();
        for s in [NgSpecial::Humor, NgSpecial::Platform] {
            let rec = OutletRecord::newsguard_special("h.com", s);
            rec.validate().unwrap();
            assert_eq!(classify_outlet(&rec, &cfg), Unknown);
        }
    }

    #[test]
    fn bias_score_does_not_affect_label() {
        let cfg = ClassifierConfig::default();
        let mut rec = OutletRecord::mbfc("x.com", MbfcCategory::LeastBiased);
        for score in [0.0, 5.0, 10.0] {
            rec.mbfc_bias_score = Some(score);
            assert_eq!(classify_outlet(&rec, &cfg), Reliable);
        }
    }

    #[test]
    fn validation() {
        let mut rec = OutletRecord::mbfc("x.com", MbfcCategory::Left);
        assert_eq!(rec.validate(), Ok(()));
        rec.ng_score = Some(50.0);
        assert_eq!(rec.validate(), Err(RecordError::MixedProviders));
        let mut none = OutletRecord::newsguard("x.com", 1.0);
        none.ng_score = None;
        assert_eq!(none.validate(), Err(RecordError::NoProvider));
        assert_eq!(
            OutletRecord::newsguard("x.com", 101.0).validate(),
            Err(RecordError::NgScoreRange)
        );
        let mut score_only = OutletRecord::mbfc("x.com", MbfcCategory::Left);
        score_only.mbfc_bias = None;
        score_only.mbfc_bias_score = Some(3.0);
        assert_eq!(score_only.validate(), Err(RecordError::MissingCategory));
        let mut wrong = OutletRecord::newsguard("x.com", 70.0);
        wrong.provider = Provider::Mbfc;
        assert_eq!(wrong.validate(), Err(RecordError::ProviderMismatch));
    }

    #[test]
    fn category_parsing() {
        assert_eq!("conspiracy-pseudoscience".parse(), Ok(MbfcCategory::ConspiracyPseudoscience));
        assert_eq!("Least Biased".parse(), Ok(MbfcCategory::LeastBiased));
        assert_eq!("PRO_SCIENCE".parse(), Ok(MbfcCategory::ProScience));
        assert_eq!("centre".parse::<MbfcCategory>(), Err(RecordError::UnknownCategory));
        assert_eq!("Humor".parse(), Ok(NgSpecial::Humor));
    }

    #[test]
    fn majority_votes() {
        assert_eq!(majority_label([Questionable]), Questionable);
        assert_eq!(majority_label([Questionable, Reliable]), Unknown);
        assert_eq!(majority_label([Questionable, Reliable, Reliable]), Reliable);
        assert_eq!(majority_label([Unknown, Questionable]), Questionable);
        assert_eq!(majority_label([]), Unknown);
    }

    #[test]
    fn flip_is_an_involution() {
        for l in [Questionable, Reliable, Unknown] {
            assert_eq!(l.flipped().flipped(), l);
        }
        assert_eq!(Unknown.flipped(), Unknown);
    }
}
