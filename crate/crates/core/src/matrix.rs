//! Level × module-kind tables with exact fractional weights.
//!
//! Weights are stored as integer units over a shared denominator (the least
//! common multiple of every contribution's divisor), so column sums are
//! exact even when single items are split across several levels.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{BloomLevel, ModuleKind};

/// A table row: one Bloom level, or the bucket for items with no level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRow {
    Level(BloomLevel),
    Unclassified(UnclassifiedTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnclassifiedTag {
    Unclassified,
}

impl MatrixRow {
    pub const UNCLASSIFIED: MatrixRow = MatrixRow::Unclassified(UnclassifiedTag::Unclassified);

    /// Level rows in rank order, then the unclassified row.
    pub fn all() -> impl Iterator<Item = MatrixRow> {
        BloomLevel::ALL
            .into_iter()
            .map(MatrixRow::Level)
            .chain(std::iter::once(MatrixRow::UNCLASSIFIED))
    }
}

impl fmt::Display for MatrixRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixRow::Level(level) => write!(f, "{level}"),
            MatrixRow::Unclassified(_) => f.write_str("Unclassified"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub level: MatrixRow,
    pub kind: ModuleKind,
    pub units: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "SerializedMatrix", try_from = "SerializedMatrix")]
pub struct LevelKindMatrix {
    denominator: u64,
    units: BTreeMap<(MatrixRow, ModuleKind), u64>,
}

#[derive(Serialize, Deserialize)]
struct SerializedMatrix {
    denominator: u64,
    cells: Vec<MatrixCell>,
}

impl From<LevelKindMatrix> for SerializedMatrix {
    fn from(matrix: LevelKindMatrix) -> Self {
        SerializedMatrix {
            denominator: matrix.denominator,
            cells: matrix.cells(true),
        }
    }
}

impl TryFrom<SerializedMatrix> for LevelKindMatrix {
    type Error = String;

    fn try_from(raw: SerializedMatrix) -> Result<Self, String> {
        if raw.denominator == 0 {
            return Err("matrix denominator is zero".into());
        }
        let units = raw
            .cells
            .into_iter()
            .filter(|c| c.units > 0)
            .map(|c| ((c.level, c.kind), c.units))
            .collect();
        Ok(LevelKindMatrix {
            denominator: raw.denominator,
            units,
        })
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Collects weighted contributions, then fixes the common denominator.
#[derive(Debug, Default)]
pub struct MatrixBuilder {
    contributions: Vec<(MatrixRow, ModuleKind, u64)>,
}

impl MatrixBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `1 / divisor` to the cell.
    pub fn add_fraction(&mut self, row: MatrixRow, kind: ModuleKind, divisor: u64) {
        assert!(divisor > 0, "divisor must be positive");
        self.contributions.push((row, kind, divisor));
    }

    pub fn add_one(&mut self, row: MatrixRow, kind: ModuleKind) {
        self.add_fraction(row, kind, 1);
    }

    pub fn build(self) -> LevelKindMatrix {
        let denominator = self
            .contributions
            .iter()
            .fold(1, |acc, (_, _, divisor)| lcm(acc, *divisor));
        let mut units = BTreeMap::new();
        for (row, kind, divisor) in self.contributions {
            *units.entry((row, kind)).or_insert(0) += denominator / divisor;
        }
        LevelKindMatrix { denominator, units }
    }
}

impl LevelKindMatrix {
    pub fn units(&self, row: MatrixRow, kind: ModuleKind) -> u64 {
        self.units.get(&(row, kind)).copied().unwrap_or(0)
    }

    pub fn value(&self, row: MatrixRow, kind: ModuleKind) -> f64 {
        self.units(row, kind) as f64 / self.denominator as f64
    }

    pub fn get(&self, level: BloomLevel, kind: ModuleKind) -> f64 {
        self.value(MatrixRow::Level(level), kind)
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    /// Column total as an exact ratio `(units, denominator)`.
    pub fn column_units(&self, kind: ModuleKind) -> u64 {
        MatrixRow::all().map(|row| self.units(row, kind)).sum()
    }

    pub fn column_sum(&self, kind: ModuleKind) -> f64 {
        self.column_units(kind) as f64 / self.denominator as f64
    }

    pub fn total(&self) -> f64 {
        let units: u64 = self.units.values().sum();
        units as f64 / self.denominator as f64
    }

    /// Every cell in row-major order: level rank (unclassified last), then
    /// kind.
    pub fn cells(&self, include_unclassified: bool) -> Vec<MatrixCell> {
        MatrixRow::all()
            .filter(|row| include_unclassified || *row != MatrixRow::UNCLASSIFIED)
            .flat_map(|row| {
                ModuleKind::ALL.into_iter().map(move |kind| MatrixCell {
                    level: row,
                    kind,
                    units: self.units(row, kind),
                    value: self.value(row, kind),
                })
            })
            .collect()
    }
}
