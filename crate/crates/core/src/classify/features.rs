use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One feature family. Declaration order is the canonical concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturePart {
    Text,
    Principal,
    Metric,
    Position,
}

impl FeaturePart {
    pub const ALL: [FeaturePart; 4] = [
        FeaturePart::Text,
        FeaturePart::Principal,
        FeaturePart::Metric,
        FeaturePart::Position,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeaturePart::Text => "text",
            FeaturePart::Principal => "principal",
            FeaturePart::Metric => "metric",
            FeaturePart::Position => "position",
        }
    }
}

/// Non-empty set of feature families.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureSelector(BTreeSet<FeaturePart>);

impl FeatureSelector {
    pub fn new(parts: impl IntoIterator<Item = FeaturePart>) -> Result<Self> {
        let set: BTreeSet<_> = parts.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidArgument("feature selector must not be empty".into()));
        }
        Ok(FeatureSelector(set))
    }

    pub fn all() -> Self {
        FeatureSelector(FeaturePart::ALL.into_iter().collect())
    }

    pub fn only(part: FeaturePart) -> Self {
        FeatureSelector([part].into_iter().collect())
    }

    pub fn contains(&self, p: FeaturePart) -> bool {
        self.0.contains(&p)
    }

    /// Parts in canonical order.
    pub fn parts(&self) -> impl Iterator<Item = FeaturePart> + '_ {
        self.0.iter().copied()
    }

    /// The eight rows of the embedding ablation: each family alone, text
    /// paired with each swarm family, and everything.
    pub fn ablation_rows() -> Vec<FeatureSelector> {
        use FeaturePart::*;
        let mut rows: Vec<FeatureSelector> = FeaturePart::ALL.iter().map(|&p| Self::only(p)).collect();
        for p in [Principal, Metric, Position] {
            rows.push(FeatureSelector([Text, p].into_iter().collect()));
        }
        rows.push(Self::all());
        rows
    }
}

impl fmt::Display for FeatureSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == FeaturePart::ALL.len() {
            return f.write_str("all");
        }
        let names: Vec<&str> = self.parts().map(FeaturePart::name).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for FeatureSelector {
    type Err = Error;

    /// Accepts `all` or `+`/`,`-separated family names.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_lowercase();
        if s == "all" {
            return Ok(Self::all());
        }
        let parts = s
            .split(['+', ','])
            .map(|t| match t.trim() {
                "text" => Ok(FeaturePart::Text),
                "principal" => Ok(FeaturePart::Principal),
                "metric" => Ok(FeaturePart::Metric),
                "position" => Ok(FeaturePart::Position),
                other => Err(Error::InvalidArgument(format!("unknown feature family '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parts)
    }
}

impl TryFrom<String> for FeatureSelector {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSelector> for String {
    fn from(s: FeatureSelector) -> String {
        s.to_string()
    }
}

/// Per-article features from every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub article_id: u64,
    pub text: Vec<f64>,
    pub principal: Option<Vec<f64>>,
    pub metric: Option<Vec<f64>>,
    pub position: Option<Vec<f64>>,
}

impl FeatureBundle {
    pub fn part(&self, p: FeaturePart) -> Option<&[f64]> {
        match p {
            FeaturePart::Text => Some(&self.text),
            FeaturePart::Principal => self.principal.as_deref(),
            FeaturePart::Metric => self.metric.as_deref(),
            FeaturePart::Position => self.position.as_deref(),
        }
    }

    /// Raw (unstandardized) concatenation in canonical order.
    pub fn raw_concat(&self, sel: &FeatureSelector) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for p in sel.parts() {
            let v = self
                .part(p)
                .ok_or_else(|| Error::InvalidArgument(format!("feature family '{}' missing", p.name())))?;
            out.extend_from_slice(v);
        }
        Ok(out)
    }
}

/// Feature families for a batch of articles, one matrix per family.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub ids: Vec<u64>,
    pub text: Matrix,
    pub principal: Option<Matrix>,
    pub metric: Option<Matrix>,
    pub position: Option<Matrix>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn part(&self, p: FeaturePart) -> Option<&Matrix> {
        match p {
            FeaturePart::Text => Some(&self.text),
            FeaturePart::Principal => self.principal.as_ref(),
            FeaturePart::Metric => self.metric.as_ref(),
            FeaturePart::Position => self.position.as_ref(),
        }
    }

    pub fn bundle(&self, i: usize) -> FeatureBundle {
        let row = |m: &Option<Matrix>| m.as_ref().map(|m| m.row(i).to_vec());
        FeatureBundle {
            article_id: self.ids[i],
            text: self.text.row(i).to_vec(),
            principal: row(&self.principal),
            metric: row(&self.metric),
            position: row(&self.position),
        }
    }

    /// Raw concatenation of the selected families.
    pub fn raw(&self, sel: &FeatureSelector) -> Result<Matrix> {
        let parts = sel
            .parts()
            .map(|p| {
                self.part(p)
                    .ok_or_else(|| Error::InvalidArgument(format!("feature family '{}' missing", p.name())))
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::hstack(&parts)
    }
}

/// Column z-scores with statistics frozen from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant columns store 1 and a zero
    /// mean so they pass through unchanged.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (n, p) = (x.rows().max(1) as f64, x.cols());
        let mut mean = vec![0.0; p];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut scale = Vec::with_capacity(p);
        for j in 0..p {
            let sd = (var[j] / n).sqrt();
            if sd > 1e-12 * mean[j].abs().max(1.0) {
                scale.push(sd);
            } else {
                mean[j] = 0.0;
                scale.push(1.0);
            }
        }
        Standardizer { mean, scale }
    }

    pub fn apply_row(&self, v: &mut [f64]) -> Result<()> {
        if v.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: v.len(),
            });
        }
        for ((x, m), s) in v.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i))?;
        }
        Ok(out)
    }
}

/// Standardized concatenation of one article's selected families.
pub fn concat_features(
    bundle: &FeatureBundle,
    sel: &FeatureSelector,
    scaler: &Standardizer,
) -> Result<Vec<f64>> {
    let mut v = bundle.raw_concat(sel)?;
    scaler.apply_row(&mut v)?;
    Ok(v)
}
