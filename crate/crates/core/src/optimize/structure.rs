use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::propagate::SegmentKind;

/// Ordered sequence of segment kinds written over `{X, Y, S}`, e.g. `XSY`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProtocolStructure {
    kinds: Vec<SegmentKind>,
}

/// Structures tried by a default search.
pub const DEFAULT_CATALOG: [&str; 12] = [
    "X", "Y", "XY", "YX", "XYX", "YXY", "XSY", "YSX", "YSXY", "XSXY", "XYSXY", "XYSYX",
];

/// Relative distance from the bound within which a sample counts as saturated.
const SATURATION_SLACK: f64 = 1e-6;

impl ProtocolStructure {
    pub fn new(kinds: Vec<SegmentKind>) -> Result<Self> {
        let label: String = kinds.iter().map(|k| k.letter()).collect();
        if kinds.is_empty() {
            return Err(Error::InvalidStructure {
                label,
                reason: "empty".into(),
            });
        }
        if let Some(w) = kinds
            .windows(2)
            .find(|w| w[0] == w[1] && w[0] != SegmentKind::Singular)
        {
            return Err(Error::InvalidStructure {
                reason: format!("repeated bang {}{}", w[0].letter(), w[1].letter()),
                label,
            });
        }
        Ok(Self { kinds })
    }

    pub fn kinds(&self) -> &[SegmentKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn label(&self) -> String {
        self.kinds.iter().map(|k| k.letter()).collect()
    }

    pub fn has_singular(&self) -> bool {
        self.kinds.contains(&SegmentKind::Singular)
    }

    pub fn default_catalog() -> Vec<Self> {
        DEFAULT_CATALOG
            .iter()
            .map(|s| s.parse().expect("catalog labels are valid"))
            .collect()
    }

    /// Reads a structure and segment durations off a zero-order-hold control
    /// with `u.len()` samples on `[0, t_f]`. Saturated samples are bangs and
    /// the rest singular; a lone unsaturated sample between two bangs is a
    /// switching transient and is split between them.
    pub fn from_samples(u: &[f64], tf: f64, u_bound: f64) -> Result<(Self, Vec<f64>)> {
        if u.is_empty() || !(tf > 0.0) {
            return Err(Error::InvalidSchedule("need samples and t_f > 0".into()));
        }
        let dt = tf / u.len() as f64;
        let kind = |x: f64| {
            if x >= u_bound * (1.0 - SATURATION_SLACK) {
                SegmentKind::BangPlus
            } else if x <= -u_bound * (1.0 - SATURATION_SLACK) {
                SegmentKind::BangMinus
            } else {
                SegmentKind::Singular
            }
        };
        let mut runs: Vec<(SegmentKind, f64)> = Vec::new();
        for &x in u {
            let k = kind(x);
            match runs.last_mut() {
                Some((last, d)) if *last == k => *d += dt,
                _ => runs.push((k, dt)),
            }
        }
        let mut i = 0;
        while i < runs.len() {
            let lone = runs[i].0 == SegmentKind::Singular && runs[i].1 < 1.5 * dt;
            if lone && (i == 0 || i + 1 == runs.len()) {
                let d = runs.remove(i).1;
                let j = if i == 0 { 0 } else { i - 1 };
                if let Some(r) = runs.get_mut(j) {
                    r.1 += d;
                }
                continue;
            }
            if lone && runs[i - 1].0 != runs[i + 1].0 {
                let d = runs.remove(i).1;
                runs[i - 1].1 += d / 2.0;
                runs[i].1 += d / 2.0;
                continue;
            }
            i += 1;
        }
        let mut kinds: Vec<SegmentKind> = Vec::new();
        let mut durations: Vec<f64> = Vec::new();
        for (k, d) in runs {
            if kinds.last() == Some(&k) {
                *durations.last_mut().unwrap() += d;
            } else {
                kinds.push(k);
                durations.push(d);
            }
        }
        Ok((Self::new(kinds)?, durations))
    }

    /// Parses a comma-separated list of labels.
    pub fn parse_catalog(s: &str) -> Result<Vec<Self>> {
        let out: Vec<Self> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(Error::Parse("empty catalog".into()));
        }
        Ok(out)
    }
}

impl FromStr for ProtocolStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = s.trim();
        let kinds = label
            .chars()
            .map(|c| {
                SegmentKind::from_letter(c.to_ascii_uppercase()).ok_or_else(|| {
                    Error::InvalidStructure {
                        label: label.to_string(),
                        reason: format!("unknown letter {c:?}"),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(kinds)
    }
}

impl fmt::Display for ProtocolStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for ProtocolStructure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for ProtocolStructure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
