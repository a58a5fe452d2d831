//! Difficulty tiers and the merge presets keyed by them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ops::{check_della, check_density};
use crate::labels::TaskId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyTier {
    Hard,
    Medium,
    Easy,
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifficultyTier::Hard => "hard",
            DifficultyTier::Medium => "medium",
            DifficultyTier::Easy => "easy",
        })
    }
}

pub type TierAssignment = BTreeMap<TaskId, DifficultyTier>;

/// hard: FD, AQ, ET; medium: ACC, AR; easy: CD, ED, SD.
pub fn default_tiers() -> TierAssignment {
    use DifficultyTier::*;
    use TaskId::*;
    [
        (Acc, Medium),
        (Cd, Easy),
        (Ed, Easy),
        (Ar, Medium),
        (Et, Hard),
        (Sd, Easy),
        (Fd, Hard),
        (Aq, Hard),
    ]
    .into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierThresholds {
    pub easy_floor: f64,
    pub medium_floor: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        TierThresholds {
            easy_floor: 0.60,
            medium_floor: 0.50,
        }
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Tier by median F1 across models, then manual overrides.
pub fn classify_difficulty(
    scores: &BTreeMap<TaskId, Vec<f64>>,
    thresholds: TierThresholds,
    overrides: &TierAssignment,
) -> Result<TierAssignment> {
    if !(0.0 < thresholds.medium_floor
        && thresholds.medium_floor < thresholds.easy_floor
        && thresholds.easy_floor < 1.0)
    {
        return Err(Error::InvalidParam(format!("thresholds {thresholds:?} out of order")));
    }
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut out = TierAssignment::new();
    for (task, xs) in scores {
        if xs.is_empty() {
            return Err(Error::EmptyScores);
        }
        let m = median(xs);
        let tier = if m >= thresholds.easy_floor {
            DifficultyTier::Easy
        } else if m >= thresholds.medium_floor {
            DifficultyTier::Medium
        } else {
            DifficultyTier::Hard
        };
        out.insert(*task, tier);
    }
    for (task, tier) in overrides {
        out.insert(*task, *tier);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeMethod {
    #[serde(rename = "DARE")]
    Dare,
    #[serde(rename = "DELLA")]
    Della,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePreset {
    pub name: String,
    pub method: MergeMethod,
    pub hard: TierParams,
    pub medium: TierParams,
    pub easy: TierParams,
}

impl MergePreset {
    pub fn tier(&self, tier: DifficultyTier) -> TierParams {
        match tier {
            DifficultyTier::Hard => self.hard,
            DifficultyTier::Medium => self.medium,
            DifficultyTier::Easy => self.easy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in [self.hard, self.medium, self.easy] {
            if t.w.is_nan() || t.w < 0.0 {
                return Err(Error::InvalidParam(format!("{}: negative weight {}", self.name, t.w)));
            }
            match (self.method, t.eps) {
                (MergeMethod::Dare, None) => check_density(t.rho)?,
                (MergeMethod::Della, Some(eps)) => check_della(t.rho, eps)?,
                (MergeMethod::Dare, Some(_)) => {
                    return Err(Error::InvalidParam(format!("{}: DARE takes no eps", self.name)))
                }
                (MergeMethod::Della, None) => {
                    return Err(Error::InvalidParam(format!("{}: DELLA needs eps", self.name)))
                }
            }
        }
        Ok(())
    }
}

pub const PRESET_NAMES: [&str; 8] = [
    "DARE I",
    "DARE II",
    "DARE III",
    "DARE IV",
    "DARE V",
    "DELLA I",
    "DELLA II",
    "DELLA III",
];

fn row(name: &str, method: MergeMethod, rho: [f64; 3], eps: Option<[f64; 3]>, w: [f64; 3]) -> MergePreset {
    let p = |i: usize| TierParams {
        rho: rho[i],
        eps: eps.map(|e| e[i]),
        w: w[i],
    };
    MergePreset {
        name: name.to_string(),
        method,
        hard: p(0),
        medium: p(1),
        easy: p(2),
    }
}

/// The shipped configurations; arrays are (hard, medium, easy).
pub fn emit_preset(name: &str) -> Result<MergePreset> {
    use MergeMethod::*;
    const FLAT: [f64; 3] = [0.125, 0.125, 0.125];
    const TIERED: [f64; 3] = [0.2, 0.15, 0.03];
    let key = name
        .trim()
        .to_ascii_uppercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let name = PRESET_NAMES
        .iter()
        .find(|n| **n == key)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    Ok(match *name {
        "DARE I" => row(name, Dare, [0.5, 0.5, 0.5], None, FLAT),
        "DARE II" => row(name, Dare, [0.7, 0.7, 0.7], None, FLAT),
        "DARE III" => row(name, Dare, [0.85, 0.8, 0.5], None, FLAT),
        "DARE IV" => row(name, Dare, [0.8, 0.8, 0.8], None, TIERED),
        "DARE V" => row(name, Dare, [0.85, 0.8, 0.5], None, TIERED),
        "DELLA I" => row(name, Della, [0.85, 0.8, 0.5], Some([0.1, 0.1, 0.4]), FLAT),
        "DELLA II" => row(name, Della, [0.9, 0.7, 0.5], Some([0.1, 0.15, 0.4]), TIERED),
        "DELLA III" => row(name, Della, [0.9, 0.85, 0.8], Some([0.05, 0.1, 0.1]), TIERED),
        _ => unreachable!(),
    })
}

impl FromStr for MergePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        emit_preset(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_valid() {
        for n in PRESET_NAMES {
            let p = emit_preset(n).unwrap();
            p.validate().unwrap();
            assert_eq!(p.name, n);
        }
        assert!(matches!(emit_preset("DARE VI"), Err(Error::UnknownPreset(_))));
        assert_eq!(emit_preset("della  ii").unwrap().name, "DELLA II");
    }

    #[test]
    fn della_ii_hard() {
        let p = emit_preset("DELLA II").unwrap();
        assert_eq!(
            p.tier(DifficultyTier::Hard),
            TierParams {
                rho: 0.9,
                eps: Some(0.1),
                w: 0.2
            }
        );
    }

    #[test]
    fn median_rule() {
        let s: BTreeMap<TaskId, Vec<f64>> = [
            (TaskId::Sd, vec![0.9; 4]),
            (TaskId::Cd, vec![0.55, 0.52, 0.58]),
            (TaskId::Fd, vec![0.1, 0.7]),
        ]
        .into();
        let t = classify_difficulty(&s, TierThresholds::default(), &TierAssignment::new()).unwrap();
        assert_eq!(t[&TaskId::Sd], DifficultyTier::Easy);
        assert_eq!(t[&TaskId::Cd], DifficultyTier::Medium);
        assert_eq!(t[&TaskId::Fd], DifficultyTier::Hard);
        assert!(matches!(
            classify_difficulty(&BTreeMap::new(), TierThresholds::default(), &TierAssignment::new()),
            Err(Error::EmptyScores)
        ));
        let bad = TierThresholds {
            easy_floor: 0.4,
            medium_floor: 0.5,
        };
        assert!(classify_difficulty(&s, bad, &TierAssignment::new()).is_err());
    }
}
