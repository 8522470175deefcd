//! Two-sample semicontinuous data, basis functions and zero proportions.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("negative value at row {row}")]
    NegativeValue { row: usize },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("unknown group label '{label}' at row {row}")]
    UnknownGroup { row: usize, label: String },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("missing header: expected columns `group,value`")]
    MissingHeader,
    #[error("group {group} has {positives} positive observations; at least 2 are required")]
    TooFewPositives { group: usize, positives: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e.to_string())
    }
}

/// Observations of the two groups. Group 0 is the baseline of the density
/// ratio model.
///
/// Values equal to `0` form the point mass at zero; strictly positive values
/// belong to the continuous part.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleData<T> {
    groups: [Vec<T>; 2],
    zeros: [usize; 2],
}

impl<T: Real> TwoSampleData<T> {
    /// Validates and wraps the two groups. Input order is preserved.
    pub fn new(x0: Vec<T>, x1: Vec<T>) -> Result<Self, DataError> {
        let mut row = 0;
        for x in x0.iter().chain(&x1) {
            row += 1;
            if !x.is_finite() {
                return Err(DataError::NonFinite { row });
            }
            if *x < T::zero() {
                return Err(DataError::NegativeValue { row });
            }
        }
        let zeros = [count_zeros(&x0), count_zeros(&x1)];
        let data = Self {
            groups: [x0, x1],
            zeros,
        };
        for g in 0..2 {
            let positives = data.n_positive(g);
            if positives < 2 {
                return Err(DataError::TooFewPositives { group: g, positives });
            }
        }
        Ok(data)
    }

    pub fn group(&self, g: usize) -> &[T] {
        &self.groups[g]
    }

    /// Group size `n_i`.
    pub fn n(&self, g: usize) -> usize {
        self.groups[g].len()
    }

    /// Number of zeros `n_i0`.
    pub fn n_zero(&self, g: usize) -> usize {
        self.zeros[g]
    }

    /// Number of positives `n_i1`.
    pub fn n_positive(&self, g: usize) -> usize {
        self.groups[g].len() - self.zeros[g]
    }

    /// Total sample size `n = n_0 + n_1`.
    pub fn total(&self) -> usize {
        self.n(0) + self.n(1)
    }

    /// Positive values of group `g` with their within-group indices.
    pub fn positives(&self, g: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.groups[g]
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, x)| *x > T::zero())
    }

    /// Same data with the group labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            groups: [self.groups[1].clone(), self.groups[0].clone()],
            zeros: [self.zeros[1], self.zeros[0]],
        }
    }

    /// Multiplies every observation by `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        let scale = |g: &Vec<T>| g.iter().map(|&x| x * c).collect::<Vec<_>>();
        Self {
            groups: [scale(&self.groups[0]), scale(&self.groups[1])],
            zeros: self.zeros,
        }
    }

    pub fn zero_proportions(&self) -> ZeroProportions<T> {
        ZeroProportions::from_counts([self.n(0), self.n(1)], self.zeros)
    }

    /// Writes the data as long-form CSV with header `group,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), DataError> {
        writeln!(out, "group,value")?;
        for g in 0..2 {
            for x in &self.groups[g] {
                writeln!(out, "{g},{x}")?;
            }
        }
        Ok(())
    }
}

fn count_zeros<T: Real>(xs: &[T]) -> usize {
    xs.iter().filter(|&&x| x == T::zero()).count()
}

/// Closed-form maximum empirical likelihood estimates tied to the zero counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroProportions<T> {
    /// `nu_i = n_i0 / n_i`.
    pub nu: [T; 2],
    /// `w_i = n_i / n`.
    pub w: [T; 2],
    /// `Delta = sum_i w_i (1 - nu_i)`, the overall fraction of positives.
    pub delta: T,
    /// `rho = n_11 / (n_01 + n_11)`.
    pub rho: T,
}

impl<T: Real> ZeroProportions<T> {
    /// From group sizes `n_i` and zero counts `n_i0`. Needs at least one
    /// positive observation overall.
    pub fn from_counts(n: [usize; 2], zeros: [usize; 2]) -> Self {
        let total = T::from_count(n[0] + n[1]);
        let nu = [0, 1].map(|g| T::from_count(zeros[g]) / T::from_count(n[g]));
        let w = [0, 1].map(|g| T::from_count(n[g]) / total);
        let pos0 = n[0] - zeros[0];
        let pos1 = n[1] - zeros[1];
        let delta = T::from_count(pos0 + pos1) / total;
        let rho = T::from_count(pos1) / T::from_count(pos0 + pos1);
        Self { nu, w, delta, rho }
    }
}

/// Layout of a tabular input stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// CSV with header `group,value` and labels 0/1.
    Long,
    /// One value per line; an optional non-numeric header line is skipped.
    SingleColumn,
}

/// Reads long-form CSV (`group,value`) into validated two-sample data.
pub fn load_two_samples<T: Real + FromStr, R: Read>(source: R) -> Result<TwoSampleData<T>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let group_col = headers.iter().position(|h| h.eq_ignore_ascii_case("group"));
    let value_col = headers.iter().position(|h| h.eq_ignore_ascii_case("value"));
    let (Some(gc), Some(vc)) = (group_col, value_col) else {
        return Err(DataError::MissingHeader);
    };
    let mut groups: [Vec<T>; 2] = [Vec::new(), Vec::new()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Parse {
            row,
            message: e.to_string(),
        })?;
        let label = record.get(gc).unwrap_or("");
        let g = match label {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DataError::UnknownGroup {
                    row,
                    label: other.to_string(),
                })
            }
        };
        let x = parse_value::<T>(record.get(vc).unwrap_or(""), row)?;
        groups[g].push(x);
    }
    let [x0, x1] = groups;
    TwoSampleData::new(x0, x1)
}

/// Reads the two groups from separate single-column streams.
pub fn load_two_files<T: Real + FromStr, R0: Read, R1: Read>(
    group0: R0,
    group1: R1,
) -> Result<TwoSampleData<T>, DataError> {
    let x0 = read_single_column(group0)?;
    let x1 = read_single_column(group1)?;
    TwoSampleData::new(x0, x1)
}

/// Dispatches on [`InputFormat`]; `Long` ignores `second`.
pub fn load_with_format<T: Real + FromStr, R: Read>(
    format: InputFormat,
    first: R,
    second: Option<R>,
) -> Result<TwoSampleData<T>, DataError> {
    match (format, second) {
        (InputFormat::Long, _) => load_two_samples(first),
        (InputFormat::SingleColumn, Some(second)) => load_two_files(first, second),
        (InputFormat::SingleColumn, None) => Err(DataError::Io(
            "single-column format needs one stream per group".into(),
        )),
    }
}

fn read_single_column<T: Real + FromStr, R: Read>(mut source: R) -> Result<Vec<T>, DataError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 && line.parse::<f64>().is_err() {
            continue;
        }
        let x = parse_value::<T>(line, i + 1)?;
        out.push(x);
    }
    Ok(out)
}

fn parse_value<T: Real + FromStr>(field: &str, row: usize) -> Result<T, DataError> {
    let x: T = field.parse().map_err(|_| DataError::Parse {
        row,
        message: format!("'{field}' is not a number"),
    })?;
    if !x.is_finite() {
        return Err(DataError::NonFinite { row });
    }
    if x < T::zero() {
        return Err(DataError::NegativeValue { row });
    }
    Ok(x)
}

/// Kind tag of a basis function `q(x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasisKind {
    Log,
    Identity,
    LogIdentity,
    Custom { name: String, dim: usize },
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Log => f.write_str("log"),
            BasisKind::Identity => f.write_str("identity"),
            BasisKind::LogIdentity => f.write_str("log+identity"),
            BasisKind::Custom { name, .. } => f.write_str(name),
        }
    }
}

impl FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "log" => Ok(BasisKind::Log),
            "identity" | "id" | "x" => Ok(BasisKind::Identity),
            "log+identity" | "identity+log" => Ok(BasisKind::LogIdentity),
            other => Err(format!(
                "unknown basis '{other}' (expected log, identity or log+identity)"
            )),
        }
    }
}

type Evaluator<T> = Arc<dyn Fn(T, &mut [T]) + Send + Sync>;

/// Basis function `q(x)` of the density ratio model; `Q(x) = (1, q(x))`.
#[derive(Clone)]
pub struct Basis<T> {
    kind: BasisKind,
    custom: Option<Evaluator<T>>,
}

impl<T> fmt::Debug for Basis<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Basis").field("kind", &self.kind).finish()
    }
}

impl<T: Real> Basis<T> {
    pub fn log() -> Self {
        Self::from_kind(BasisKind::Log)
    }

    pub fn identity() -> Self {
        Self::from_kind(BasisKind::Identity)
    }

    pub fn log_identity() -> Self {
        Self::from_kind(BasisKind::LogIdentity)
    }

    /// Built-in bases only; `Custom` kinds need [`Basis::custom`].
    pub fn from_kind(kind: BasisKind) -> Self {
        assert!(
            !matches!(kind, BasisKind::Custom { .. }),
            "custom bases need an evaluator"
        );
        Self { kind, custom: None }
    }

    /// User-supplied `q`, writing `dim` components into the output slice.
    pub fn custom<F>(name: impl Into<String>, dim: usize, q: F) -> Self
    where
        F: Fn(T, &mut [T]) + Send + Sync + 'static,
    {
        Self {
            kind: BasisKind::Custom {
                name: name.into(),
                dim,
            },
            custom: Some(Arc::new(q)),
        }
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Dimension `d` of `q(x)`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            BasisKind::Log | BasisKind::Identity => 1,
            BasisKind::LogIdentity => 2,
            BasisKind::Custom { dim, .. } => *dim,
        }
    }

    /// Writes `Q(x) = (1, q(x))` into `out` (length `d + 1`).
    pub fn design_into(&self, x: T, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.dim() + 1);
        out[0] = T::one();
        match &self.kind {
            BasisKind::Log => out[1] = x.ln(),
            BasisKind::Identity => out[1] = x,
            BasisKind::LogIdentity => {
                out[1] = x.ln();
                out[2] = x;
            }
            BasisKind::Custom { .. } => {
                let f = self.custom.as_ref().expect("custom evaluator");
                f(x, &mut out[1..]);
            }
        }
    }

    pub fn design(&self, x: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim() + 1];
        self.design_into(x, &mut out);
        out
    }
}
