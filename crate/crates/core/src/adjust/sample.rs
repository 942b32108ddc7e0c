use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::GrowConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullProvenance {
    /// Permutations of the data under analysis.
    #[default]
    SelfPermutation,
    /// Permutations of separate reference data.
    HistoricalPermutation,
}

impl fmt::Display for NullProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullProvenance::SelfPermutation => "self-permutation",
            NullProvenance::HistoricalPermutation => "historical-permutation",
        })
    }
}

impl FromStr for NullProvenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self-permutation" | "self" => Ok(NullProvenance::SelfPermutation),
            "historical-permutation" | "historical" => Ok(NullProvenance::HistoricalPermutation),
            other => Err(Error::NullFile(format!("unknown provenance `{other}`"))),
        }
    }
}

/// How a single replicate's p-value is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Estimator {
    #[default]
    Tree,
    /// Median over `b` bootstrap trees.
    Bagged { b: usize },
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Tree => f.write_str("tree"),
            Estimator::Bagged { b } => write!(f, "bagged:{b}"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "tree" {
            return Ok(Estimator::Tree);
        }
        s.strip_prefix("bagged:")
            .and_then(|b| b.parse().ok())
            .filter(|&b| b >= 1)
            .map(|b| Estimator::Bagged { b })
            .ok_or_else(|| Error::NullFile(format!("unknown estimator `{s}`")))
    }
}

/// Which p-value of a tree is carried into the permutation step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `min(m p, 1)`.
    #[default]
    Bonferroni,
    /// The minimum p itself.
    Raw,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Bonferroni => "bonferroni",
            Statistic::Raw => "raw",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bonferroni" => Ok(Statistic::Bonferroni),
            "raw" => Ok(Statistic::Raw),
            other => Err(Error::NullFile(format!("unknown statistic `{other}`"))),
        }
    }
}

/// Sorted replicate p-values under random reallocation of group tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSample {
    values: Vec<f64>,
    pub seed: u64,
    pub provenance: NullProvenance,
    pub estimator: Estimator,
    pub statistic: Statistic,
    /// Grow settings the replicates were built with, when known.
    pub grow: Option<GrowConfig>,
}

impl NullSample {
    /// Sorts `values`; each must lie in `[0, 1]`.
    pub fn new(
        mut values: Vec<f64>,
        seed: u64,
        provenance: NullProvenance,
        estimator: Estimator,
        statistic: Statistic,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::precondition(
                "a null sample needs at least one value",
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::precondition(format!(
                "null value {v} outside [0, 1]"
            )));
        }
        values.sort_by(f64::total_cmp);
        Ok(NullSample {
            values,
            seed,
            provenance,
            estimator,
            statistic,
            grow: None,
        })
    }

    pub fn with_grow(mut self, grow: GrowConfig) -> Self {
        self.grow = Some(grow);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn r(&self) -> usize {
        self.values.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# difftree null sample\n");
        out.push_str(&format!("# R={}\n", self.r()));
        out.push_str(&format!("# seed={}\n", self.seed));
        out.push_str(&format!("# provenance={}\n", self.provenance));
        out.push_str(&format!("# estimator={}\n", self.estimator));
        out.push_str(&format!("# statistic={}\n", self.statistic));
        if let Some(g) = &self.grow {
            let json = serde_json::to_string(g).expect("config serializes");
            out.push_str(&format!("# grow={json}\n"));
        }
        for v in &self.values {
            out.push_str(&format!("{v:e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::NullFile(format!("line {line}: {msg}"));
        let mut declared_r = None;
        let mut seed = 0;
        let mut provenance = NullProvenance::default();
        let mut estimator = Estimator::default();
        let mut statistic = Statistic::default();
        let mut grow = None;
        let mut values = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let Some((key, value)) = header.trim().split_once('=') else {
                    continue;
                };
                let value = value.trim();
                match key.trim() {
                    "R" => {
                        declared_r = Some(
                            value
                                .parse::<usize>()
                                .map_err(|e| bad(lineno, format!("R: {e}")))?,
                        )
                    }
                    "seed" => {
                        seed = value
                            .parse()
                            .map_err(|e| bad(lineno, format!("seed: {e}")))?
                    }
                    "provenance" => provenance = value.parse()?,
                    "estimator" => estimator = value.parse()?,
                    "statistic" => statistic = value.parse()?,
                    "grow" => {
                        grow = Some(
                            serde_json::from_str(value)
                                .map_err(|e| bad(lineno, format!("grow: {e}")))?,
                        )
                    }
                    _ => {}
                }
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| bad(lineno, format!("`{line}`: {e}")))?;
            values.push(v);
        }
        if let Some(r) = declared_r {
            if r != values.len() {
                return Err(Error::NullFile(format!(
                    "header declares R={r} but {} values follow",
                    values.len()
                )));
            }
        }
        let mut sample = NullSample::new(values, seed, provenance, estimator, statistic)
            .map_err(|e| Error::NullFile(e.to_string()))?;
        sample.grow = grow;
        Ok(sample)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
