//! Inter-rater agreement: Cohen's κ, pairwise and one-vs-rest summaries,
//! majority votes, human-vs-automatic agreement on the Lower/Higher split,
//! and the annotation matrix normalized by annotator count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{LevelKindMatrix, MatrixBuilder, MatrixRow};
use crate::model::{bloom_group_of, AnnotationRecord, BloomAssignment, BloomGroup, BloomLevel, ModuleKind};

/// Labels of one rater over an ordered item set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector<L> {
    items: Vec<(String, L)>,
}

impl<L> LabelVector<L> {
    pub fn new(items: Vec<(String, L)>) -> Self {
        LabelVector { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &L> {
        self.items.iter().map(|(_, l)| l)
    }
}

impl<L> FromIterator<(String, L)> for LabelVector<L> {
    fn from_iter<I: IntoIterator<Item = (String, L)>>(iter: I) -> Self {
        LabelVector::new(iter.into_iter().collect())
    }
}

/// Cohen's κ for two raters over the same, identically ordered items.
/// `None` when chance agreement is 1 (both raters constant on one label).
pub fn cohen_kappa<L: Ord>(a: &LabelVector<L>, b: &LabelVector<L>) -> Result<Option<f64>> {
    if a.len() != b.len() || a.items.iter().zip(&b.items).any(|(x, y)| x.0 != y.0) {
        return Err(Error::MisalignedVectors);
    }
    kappa_of_labels(a.labels(), b.labels())
}

/// κ over two parallel label sequences, computed from integer counts:
/// κ = (n·agree − Σ a_c·b_c) / (n² − Σ a_c·b_c).
pub fn kappa_of_labels<'a, L: Ord + 'a>(
    a: impl IntoIterator<Item = &'a L>,
    b: impl IntoIterator<Item = &'a L>,
) -> Result<Option<f64>> {
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    let mut n: i128 = 0;
    let mut agree: i128 = 0;
    let mut marginals: BTreeMap<&L, (i128, i128)> = BTreeMap::new();
    loop {
        match (a.next(), b.next()) {
            (Some(x), Some(y)) => {
                n += 1;
                if x == y {
                    agree += 1;
                }
                marginals.entry(x).or_default().0 += 1;
                marginals.entry(y).or_default().1 += 1;
            }
            (None, None) => break,
            _ => return Err(Error::MisalignedVectors),
        }
    }
    if n == 0 {
        return Err(Error::EmptyVectors);
    }
    let chance: i128 = marginals.values().map(|(ca, cb)| ca * cb).sum();
    let denominator = n * n - chance;
    if denominator == 0 {
        return Ok(None);
    }
    Ok(Some((n * agree - chance) as f64 / denominator as f64))
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Annotations indexed by annotator, then by item.
struct AnnotationIndex<'a> {
    by_rater: BTreeMap<&'a str, BTreeMap<&'a str, BloomLevel>>,
}

impl<'a> AnnotationIndex<'a> {
    fn new(annotations: &'a [AnnotationRecord]) -> Result<Self> {
        let mut by_rater: BTreeMap<&str, BTreeMap<&str, BloomLevel>> = BTreeMap::new();
        for record in annotations {
            let previous = by_rater
                .entry(record.annotator_id.as_str())
                .or_default()
                .insert(record.lo_id.as_str(), record.level);
            if previous.is_some() {
                return Err(Error::Format {
                    line: None,
                    detail: format!(
                        "annotator `{}` labeled `{}` twice",
                        record.annotator_id, record.lo_id
                    ),
                });
            }
        }
        Ok(AnnotationIndex { by_rater })
    }

    fn require_pairs(&self) -> Result<()> {
        match self.by_rater.len() {
            n if n < 2 => Err(Error::FewerThanTwoRaters(n)),
            _ => Ok(()),
        }
    }

    fn pairs(&self) -> Vec<(&'a str, &'a str)> {
        let raters: Vec<&str> = self.by_rater.keys().copied().collect();
        let mut pairs = Vec::new();
        for (i, a) in raters.iter().enumerate() {
            for b in &raters[i + 1..] {
                pairs.push((*a, *b));
            }
        }
        pairs
    }

    /// Items labeled by both raters, in lo_id order, with both labels.
    fn shared(&self, a: &str, b: &str) -> Vec<(&'a str, BloomLevel, BloomLevel)> {
        let left = &self.by_rater[a];
        let right = &self.by_rater[b];
        left.iter()
            .filter_map(|(id, la)| right.get(id).map(|lb| (*id, *la, *lb)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub rater_a: String,
    pub rater_b: String,
    pub items: usize,
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub pairs: Vec<PairAgreement>,
    pub average: Option<f64>,
    pub defined_pairs: usize,
    pub undefined_pairs: usize,
}

fn pair_agreement<L: Ord>(rater_a: &str, rater_b: &str, labels: &[(L, L)]) -> PairAgreement {
    let (kappa, undefined_reason) = if labels.is_empty() {
        (None, Some("no items labeled by both raters".to_string()))
    } else {
        match kappa_of_labels(labels.iter().map(|p| &p.0), labels.iter().map(|p| &p.1)) {
            Ok(Some(k)) => (Some(k), None),
            _ => (
                None,
                Some("chance agreement is 1: both raters used a single identical label".to_string()),
            ),
        }
    };
    PairAgreement {
        rater_a: rater_a.to_string(),
        rater_b: rater_b.to_string(),
        items: labels.len(),
        kappa,
        undefined_reason,
    }
}

fn summarize(pairs: Vec<PairAgreement>) -> PairwiseSummary {
    let defined: Vec<f64> = pairs.iter().filter_map(|p| p.kappa).collect();
    PairwiseSummary {
        average: mean(defined.iter().copied()),
        defined_pairs: defined.len(),
        undefined_pairs: pairs.len() - defined.len(),
        pairs,
    }
}

/// Multi-class κ for every rater pair over the items both labeled, and the
/// mean of the defined values.
pub fn pairwise_and_average(annotations: &[AnnotationRecord]) -> Result<PairwiseSummary> {
    let index = AnnotationIndex::new(annotations)?;
    index.require_pairs()?;
    let pairs = index
        .pairs()
        .into_iter()
        .map(|(a, b)| {
            let labels: Vec<(BloomLevel, BloomLevel)> =
                index.shared(a, b).into_iter().map(|(_, x, y)| (x, y)).collect();
            pair_agreement(a, b, &labels)
        })
        .collect();
    Ok(summarize(pairs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelAgreement {
    pub level: BloomLevel,
    pub pairs: Vec<PairAgreement>,
    pub average: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
}

/// The three ways of collapsing the (level, pair) κ grid to one number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneVsRestAggregates {
    /// Mean over levels of the per-level mean over pairs.
    pub levels_then_pairs: Option<f64>,
    /// Mean over pairs of the per-pair mean over levels.
    pub pairs_then_levels: Option<f64>,
    /// Mean over every defined (level, pair) cell.
    pub pooled: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneVsRestSummary {
    pub levels: Vec<LevelAgreement>,
    pub aggregates: OneVsRestAggregates,
}

impl OneVsRestSummary {
    pub fn level(&self, level: BloomLevel) -> &LevelAgreement {
        &self.levels[level.rank() as usize - 1]
    }
}

/// Binarizes labels into "is `level`" versus "is not" for each level and
/// computes pairwise κ per level.
pub fn per_level_one_vs_rest(annotations: &[AnnotationRecord]) -> Result<OneVsRestSummary> {
    let index = AnnotationIndex::new(annotations)?;
    index.require_pairs()?;
    let pairs = index.pairs();
    let shared: Vec<_> = pairs.iter().map(|(a, b)| index.shared(a, b)).collect();

    let mut levels = Vec::with_capacity(BloomLevel::ALL.len());
    for level in BloomLevel::ALL {
        let level_pairs: Vec<PairAgreement> = pairs
            .iter()
            .zip(&shared)
            .map(|((a, b), items)| {
                let binary: Vec<(bool, bool)> = items
                    .iter()
                    .map(|(_, x, y)| (*x == level, *y == level))
                    .collect();
                pair_agreement(a, b, &binary)
            })
            .collect();
        let average = mean(level_pairs.iter().filter_map(|p| p.kappa));
        let undefined_reason = average.is_none().then(|| {
            format!("κ is undefined for every rater pair: no pair shows variation on {level}")
        });
        levels.push(LevelAgreement {
            level,
            pairs: level_pairs,
            average,
            undefined_reason,
        });
    }

    let levels_then_pairs = mean(levels.iter().filter_map(|l| l.average));
    let pairs_then_levels = mean(
        (0..pairs.len()).filter_map(|p| mean(levels.iter().filter_map(|l| l.pairs[p].kappa))),
    );
    let pooled = mean(levels.iter().flat_map(|l| l.pairs.iter().filter_map(|p| p.kappa)));
    Ok(OneVsRestSummary {
        levels,
        aggregates: OneVsRestAggregates {
            levels_then_pairs,
            pairs_then_levels,
            pooled,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoMajority {
    NoMajority,
}

/// Consensus label of one item: a level with a strict majority, or none.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MajorityLabel {
    Level(BloomLevel),
    NoMajority(NoMajority),
}

impl MajorityLabel {
    pub const NONE: MajorityLabel = MajorityLabel::NoMajority(NoMajority::NoMajority);

    pub fn level(self) -> Option<BloomLevel> {
        match self {
            MajorityLabel::Level(level) => Some(level),
            MajorityLabel::NoMajority(_) => None,
        }
    }
}

/// Strict-majority label per item; ties and splits yield no majority.
pub fn majority_vote(annotations: &[AnnotationRecord]) -> BTreeMap<String, MajorityLabel> {
    let mut tallies: BTreeMap<&str, BTreeMap<BloomLevel, usize>> = BTreeMap::new();
    for record in annotations {
        *tallies
            .entry(record.lo_id.as_str())
            .or_default()
            .entry(record.level)
            .or_default() += 1;
    }
    tallies
        .into_iter()
        .map(|(lo_id, votes)| {
            let total: usize = votes.values().sum();
            let winner = votes
                .into_iter()
                .find(|(_, count)| 2 * count > total)
                .map_or(MajorityLabel::NONE, |(level, _)| MajorityLabel::Level(level));
            (lo_id.to_string(), winner)
        })
        .collect()
}

/// How a multi-level automatic assignment is reduced to one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupMapping {
    /// Group of the highest-ranked level.
    #[default]
    Highest,
    /// Higher if any level is Higher.
    AnyHigher,
    /// Group holding more of the levels; a tie goes to Higher.
    Majority,
}

impl FromStr for GroupMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "highest" => Ok(GroupMapping::Highest),
            "any-higher" => Ok(GroupMapping::AnyHigher),
            "majority" => Ok(GroupMapping::Majority),
            other => Err(Error::Format {
                line: None,
                detail: format!("unknown mapping `{other}` (expected highest, any-higher or majority)"),
            }),
        }
    }
}

impl fmt::Display for GroupMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupMapping::Highest => "highest",
            GroupMapping::AnyHigher => "any-higher",
            GroupMapping::Majority => "majority",
        })
    }
}

impl GroupMapping {
    /// `None` for an empty level set.
    pub fn group_of(self, levels: &BTreeSet<BloomLevel>) -> Option<BloomGroup> {
        let highest = *levels.iter().next_back()?;
        Some(match self {
            GroupMapping::Highest => bloom_group_of(highest),
            GroupMapping::AnyHigher => {
                if levels.iter().any(|l| bloom_group_of(*l) == BloomGroup::Higher) {
                    BloomGroup::Higher
                } else {
                    BloomGroup::Lower
                }
            }
            GroupMapping::Majority => {
                let higher = levels
                    .iter()
                    .filter(|l| bloom_group_of(**l) == BloomGroup::Higher)
                    .count();
                if 2 * higher >= levels.len() {
                    BloomGroup::Higher
                } else {
                    BloomGroup::Lower
                }
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExclusionReason {
    NoMajority,
    AutoUnclassified,
    AutoMissing,
    UnresolvedLoId,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub lo_id: String,
    pub reason: ExclusionReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryAgreement {
    pub mapping: GroupMapping,
    pub kappa: Option<f64>,
    pub included_items: Vec<String>,
    pub excluded: Vec<Exclusion>,
    /// Counts of (human group, automatic group) over included items.
    pub table: BTreeMap<String, usize>,
}

/// κ between the human majority and an automatic classification after both
/// are reduced to Lower/Higher.
pub fn binary_group_agreement(
    majority: &BTreeMap<String, MajorityLabel>,
    auto: &[BloomAssignment],
    mapping: GroupMapping,
) -> Result<BinaryAgreement> {
    let auto_by_id: BTreeMap<&str, &BloomAssignment> =
        auto.iter().map(|a| (a.lo_id.as_str(), a)).collect();
    let mut human = Vec::new();
    let mut machine = Vec::new();
    let mut included_items = Vec::new();
    let mut excluded = Vec::new();
    let mut table = BTreeMap::new();

    for (lo_id, label) in majority {
        let exclude = |reason| Exclusion {
            lo_id: lo_id.clone(),
            reason,
        };
        let Some(level) = label.level() else {
            excluded.push(exclude(ExclusionReason::NoMajority));
            continue;
        };
        let Some(assignment) = auto_by_id.get(lo_id.as_str()) else {
            excluded.push(exclude(ExclusionReason::AutoMissing));
            continue;
        };
        let Some(auto_group) = mapping.group_of(&assignment.levels) else {
            excluded.push(exclude(ExclusionReason::AutoUnclassified));
            continue;
        };
        let human_group = bloom_group_of(level);
        *table.entry(format!("{human_group}/{auto_group}")).or_insert(0) += 1;
        human.push(human_group);
        machine.push(auto_group);
        included_items.push(lo_id.clone());
    }

    if human.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let kappa = kappa_of_labels(&human, &machine)?;
    Ok(BinaryAgreement {
        mapping,
        kappa,
        included_items,
        excluded,
        table,
    })
}

/// Level × kind matrix where each annotation weighs 1 / (number of
/// annotators of that item), so every item contributes 1 in total.
pub fn normalized_annotation_matrix(
    annotations: &[AnnotationRecord],
    kind_of: impl Fn(&str) -> Option<ModuleKind>,
) -> Result<LevelKindMatrix> {
    let mut per_item: BTreeMap<&str, u64> = BTreeMap::new();
    for record in annotations {
        *per_item.entry(record.lo_id.as_str()).or_default() += 1;
    }
    let mut builder = MatrixBuilder::new();
    for record in annotations {
        let kind = kind_of(&record.lo_id)
            .ok_or_else(|| Error::UnknownModuleKind(record.lo_id.clone()))?;
        builder.add_fraction(MatrixRow::Level(record.level), kind, per_item[record.lo_id.as_str()]);
    }
    Ok(builder.build())
}

/// Everything computed from one annotation set and one automatic source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    pub annotated_items: usize,
    pub auto_source: String,
    pub pairwise: PairwiseSummary,
    pub per_level_one_vs_rest: OneVsRestSummary,
    pub majority: BTreeMap<String, MajorityLabel>,
    pub human_vs_auto: BinaryAgreement,
    pub normalized_matrix: LevelKindMatrix,
    /// Items left out of the human-vs-automatic κ, plus annotation rows whose
    /// lo_id did not resolve.
    pub excluded_items: Vec<Exclusion>,
}

impl AgreementReport {
    pub fn average_pairwise(&self) -> Option<f64> {
        self.pairwise.average
    }

    pub fn human_vs_auto_binary_kappa(&self) -> Option<f64> {
        self.human_vs_auto.kappa
    }
}

pub fn agreement_report(
    annotations: &[AnnotationRecord],
    auto: &[BloomAssignment],
    auto_source: &str,
    mapping: GroupMapping,
    kind_of: impl Fn(&str) -> Option<ModuleKind>,
) -> Result<AgreementReport> {
    let pairwise = pairwise_and_average(annotations)?;
    let per_level_one_vs_rest = per_level_one_vs_rest(annotations)?;
    let majority = majority_vote(annotations);
    let human_vs_auto = binary_group_agreement(&majority, auto, mapping)?;
    let normalized_matrix = normalized_annotation_matrix(annotations, kind_of)?;
    let annotators: BTreeSet<String> = annotations.iter().map(|a| a.annotator_id.clone()).collect();
    Ok(AgreementReport {
        annotators: annotators.into_iter().collect(),
        annotated_items: majority.len(),
        auto_source: auto_source.to_string(),
        excluded_items: human_vs_auto.excluded.clone(),
        pairwise,
        per_level_one_vs_rest,
        majority,
        human_vs_auto,
        normalized_matrix,
    })
}

/// Reads `lo_id,annotator_id,Level` rows; a leading header row and `#`
/// comments are skipped. A repeated `(lo_id, annotator_id)` is an error.
pub fn import_annotations(reader: impl std::io::Read) -> Result<Vec<AnnotationRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            line: e.position().map(|p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(index + 1);
        if index == 0 && record.get(0) == Some("lo_id") {
            continue;
        }
        let fail = |detail: String| Error::Format {
            line: Some(line),
            detail,
        };
        if record.len() != 3 {
            return Err(fail(format!(
                "expected 3 fields `lo_id,annotator_id,Level`, found {}",
                record.len()
            )));
        }
        let (lo_id, annotator_id) = (record[0].to_string(), record[1].to_string());
        if lo_id.is_empty() || annotator_id.is_empty() {
            return Err(fail("empty lo_id or annotator_id".into()));
        }
        let level: BloomLevel = record[2].parse().map_err(|e: Error| e.at_line(line))?;
        if !seen.insert((lo_id.clone(), annotator_id.clone())) {
            return Err(fail(format!(
                "duplicate annotation of `{lo_id}` by `{annotator_id}`"
            )));
        }
        out.push(AnnotationRecord {
            lo_id,
            annotator_id,
            level,
        });
    }
    Ok(out)
}
