use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::ranker::{InputAssembler, Ranker};
use super::{RankingError, RankingExample};
use crate::graph::{EdgeType, HeteroGraph, NodeRef, Relation};
use crate::metrics;
use crate::nearline::EmbeddingStore;
use crate::scalar::Scalar;

pub const OVERALL: &str = "overall";
/// Members with no engagement edge in the snapshot graph.
pub const COLD_START: &str = "cold-start";
pub const ENGAGED: &str = "engaged";

/// Cold-start vs engaged, by the member's engagement degree in `graph`.
pub fn engagement_segments(graph: &HeteroGraph) -> impl Fn(NodeRef) -> String + Sync + '_ {
    move |m| {
        if graph.degree(m, EdgeType::Forward(Relation::SeekerEngagement)) == 0 {
            COLD_START.to_string()
        } else {
            ENGAGED.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRow {
    pub segment: String,
    pub n: usize,
    pub positives: usize,
    /// `None` when the segment lacks a class.
    pub auc: Option<f64>,
    /// `None` when the segment has no positives.
    pub recall_at_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub k: usize,
    /// `overall` first, then the segments in the order requested.
    pub rows: Vec<SegmentRow>,
    pub warnings: Vec<String>,
    pub fallbacks: usize,
}

impl SegmentReport {
    pub fn row(&self, segment: &str) -> Option<&SegmentRow> {
        self.rows.iter().find(|r| r.segment == segment)
    }

    pub fn overall(&self) -> &SegmentRow {
        &self.rows[0]
    }

    /// `segment,n,auc,recall_at_k`; omitted metrics are empty fields.
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::from("segment,n,auc,recall_at_k\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.segment, r.n, f(r.auc), f(r.recall_at_k)));
        }
        s
    }
}

/// Hit rate of positives ranked within the top `k` of their member's
/// examples: a positive's rank is the number of that member's negatives
/// scored strictly higher.
fn member_recall(idx: &[usize], examples: &[RankingExample], scores: &[f64], k: usize) -> Option<f64> {
    let mut negatives: HashMap<NodeRef, Vec<f64>> = HashMap::new();
    for &i in idx {
        if !examples[i].is_positive() {
            negatives.entry(examples[i].member).or_default().push(scores[i]);
        }
    }
    let ranks: Vec<usize> = idx
        .iter()
        .filter(|&&i| examples[i].is_positive())
        .map(|&i| {
            let neg = negatives.get(&examples[i].member).map_or(&[][..], |v| v.as_slice());
            metrics::rank_against(scores[i], neg)
        })
        .collect();
    metrics::recall_at_k(&ranks, k)
}

fn row(name: &str, idx: &[usize], examples: &[RankingExample], scores: &[f64], k: usize) -> SegmentRow {
    let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let l: Vec<bool> = idx.iter().map(|&i| examples[i].is_positive()).collect();
    SegmentRow {
        segment: name.to_string(),
        n: idx.len(),
        positives: l.iter().filter(|x| **x).count(),
        auc: metrics::auc(&s, &l),
        recall_at_k: member_recall(idx, examples, scores, k),
    }
}

/// Per-segment AUC and recall@k, plus the overall row.
///
/// Each requested segment appears in the report; a segment with no
/// examples, or with a single class, gets a warning and omitted metrics.
/// Segments produced by `segment_fn` but not requested are appended.
pub fn evaluate_segments<T: Scalar, S: Scalar>(
    examples: &[RankingExample],
    ranker: &Ranker<T>,
    store: &EmbeddingStore<S>,
    segment_fn: impl Fn(NodeRef) -> String + Sync,
    segments: &[&str],
    k: usize,
) -> Result<SegmentReport, RankingError> {
    if examples.is_empty() {
        return Err(RankingError::EmptyDataset);
    }
    let assembler = InputAssembler::new(store, ranker.shape());
    let scores: Vec<f64> = examples
        .par_iter()
        .map(|e| ranker.probability(&assembler.assemble_example(e)))
        .collect::<Result<_, _>>()?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        groups.entry(segment_fn(e.member)).or_default().push(i);
    }
    let all: Vec<usize> = (0..examples.len()).collect();
    let mut rows = vec![row(OVERALL, &all, examples, &scores, k)];
    let mut names: Vec<String> = segments.iter().map(|s| s.to_string()).collect();
    names.extend(groups.keys().filter(|g| !segments.contains(&g.as_str())).cloned());
    let mut warnings = Vec::new();
    for name in names {
        let idx = groups.get(&name).map_or(&[][..], |v| v.as_slice());
        let r = row(&name, idx, examples, &scores, k);
        if r.auc.is_none() {
            let w = format!("segment `{name}` has {} examples and {} positives; metrics omitted", r.n, r.positives);
            tracing::warn!("{w}");
            warnings.push(w);
            rows.push(SegmentRow {
                auc: None,
                recall_at_k: None,
                ..r
            });
        } else {
            rows.push(r);
        }
    }
    Ok(SegmentReport {
        k,
        rows,
        warnings,
        fallbacks: assembler.fallbacks(),
    })
}
