use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::percolation::{bernoulli_cluster, PercolationParams};
use super::profiles::{
    automaton_profile, canopy_profile, line_profile, perron_growth, regular_profile, singleton_profile,
    subtree_profile, TransferAutomaton,
};
use crate::error::{invalid, Error, Result};
use crate::tree::{parse_tree, sphere_sizes, SphereProfile};

/// A profile source named on the command line, e.g. `subtree:d=4,dp=3`.
///
/// Kinds: `regular:d`, `subtree:d,dp`, `line:d`, `single:d`,
/// `canopy:d,level`, `automaton:file`, `bernoulli:d,p,r,seed` and
/// `tree:file` (a window in the tree interchange format).
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Regular { d: usize },
    Subtree { d: usize, dp: usize },
    Line { d: usize },
    Single { d: usize },
    Canopy { d: usize, level: usize },
    Automaton { file: PathBuf },
    Bernoulli { d: usize, p: f64, r: usize, seed: u64 },
    Tree { file: PathBuf },
}

impl ProfileSpec {
    /// Sphere profile out to `n` levels. Finite sources (single vertex,
    /// sampled clusters, windows from files) keep their own horizon.
    pub fn build(&self, n: usize) -> Result<SphereProfile> {
        match self {
            Self::Regular { d } => regular_profile(*d, n),
            Self::Subtree { d, dp } => subtree_profile(*dp, *d, n),
            Self::Line { d } => line_profile(*d, n),
            Self::Single { d } => singleton_profile(*d),
            Self::Canopy { d, level } => canopy_profile(*d, *level, n),
            Self::Automaton { file } => automaton_profile(&self.automaton(file)?, n),
            Self::Bernoulli { d, p, r, seed } => {
                Ok(sphere_sizes(&bernoulli_cluster(&PercolationParams::new(*d, *p, *r, *seed))?))
            }
            Self::Tree { file } => Ok(sphere_sizes(&parse_tree(&std::fs::read_to_string(file)?)?)),
        }
    }

    /// Exact log-growth where the source has one in closed form.
    pub fn log_growth(&self) -> Result<Option<f64>> {
        Ok(match self {
            Self::Regular { d } => Some(((d - 1) as f64).ln()),
            Self::Subtree { dp, .. } => Some(((dp - 1) as f64).ln()),
            Self::Line { .. } => Some(0.0),
            Self::Automaton { file } => Some(perron_growth(&self.automaton(file)?)?),
            _ => None,
        })
    }

    fn automaton(&self, file: &PathBuf) -> Result<TransferAutomaton> {
        TransferAutomaton::parse(&std::fs::read_to_string(file)?)
    }
}

impl FromStr for ProfileSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = BTreeMap::new();
        for item in rest.split(',').filter(|t| !t.is_empty()) {
            let (k, v) =
                item.split_once('=').ok_or_else(|| invalid(format!("profile field `{item}` is not key=value")))?;
            if fields.insert(k.trim(), v.trim()).is_some() {
                return Err(invalid(format!("profile field `{k}` given twice")));
            }
        }
        let mut take = Fields { kind, fields };
        let spec = match kind {
            "regular" => Self::Regular { d: take.num("d")? },
            "subtree" => Self::Subtree { d: take.num("d")?, dp: take.num("dp")? },
            "line" => Self::Line { d: take.num("d")? },
            "single" => Self::Single { d: take.num("d")? },
            "canopy" => Self::Canopy { d: take.num("d")?, level: take.num_or("level", 0)? },
            "automaton" => Self::Automaton { file: take.text("file")?.into() },
            "bernoulli" => Self::Bernoulli {
                d: take.num("d")?,
                p: take.num("p")?,
                r: take.num("r")?,
                seed: take.num_or("seed", 0)?,
            },
            "tree" => Self::Tree { file: take.text("file")?.into() },
            other => return Err(invalid(format!("unknown profile kind `{other}`"))),
        };
        take.finish()?;
        Ok(spec)
    }
}

struct Fields<'a> {
    kind: &'a str,
    fields: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn text(&mut self, key: &str) -> Result<&'a str> {
        self.fields.remove(key).ok_or_else(|| invalid(format!("profile `{}` needs `{key}=`", self.kind)))
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.text(key)?;
        raw.parse().map_err(|_| invalid(format!("profile field `{key}={raw}` is not a valid number")))
    }

    fn num_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        if self.fields.contains_key(key) {
            self.num(key)
        } else {
            Ok(default)
        }
    }

    fn finish(self) -> Result<()> {
        match self.fields.keys().next() {
            Some(k) => Err(invalid(format!("profile `{}` does not take `{k}=`", self.kind))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Regular { d } => write!(f, "regular:d={d}"),
            Self::Subtree { d, dp } => write!(f, "subtree:d={d},dp={dp}"),
            Self::Line { d } => write!(f, "line:d={d}"),
            Self::Single { d } => write!(f, "single:d={d}"),
            Self::Canopy { d, level } => write!(f, "canopy:d={d},level={level}"),
            Self::Automaton { file } => write!(f, "automaton:file={}", file.display()),
            Self::Bernoulli { d, p, r, seed } => write!(f, "bernoulli:d={d},p={p},r={r},seed={seed}"),
            Self::Tree { file } => write!(f, "tree:file={}", file.display()),
        }
    }
}
