use std::fmt::Write as _;

use super::EvalMetrics;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Summed loss divided by the number of scored (member, job) entries.
    pub mean_loss: f64,
    pub batches: usize,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub eval: Option<EvalMetrics>,
    pub wall_clock_secs: f64,
    /// `key = value` echo of the configuration.
    pub config: Vec<(String, String)>,
    pub gnn_pairs: usize,
    pub ranking_pairs: usize,
    pub skipped_pairs: usize,
    pub dropped_pairs: usize,
    /// Labeled pairs after the cutoff that reached a gradient; always 0
    /// unless the leakage guard is bypassed.
    pub post_cutoff_pairs_used: usize,
    pub parameter_count: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epochs: {}", self.epochs.len());
        for e in &self.epochs {
            let _ = writeln!(s, "epoch_{}_loss: {}", e.epoch, e.mean_loss);
        }
        if let Some(l) = self.final_loss() {
            let _ = writeln!(s, "final_loss: {l}");
        }
        if let Some(m) = &self.eval {
            let _ = writeln!(s, "eval_queries: {}", m.queries);
            let _ = writeln!(s, "eval_auc: {}", m.auc);
            let _ = writeln!(s, "eval_recall_at_{}: {}", m.k, m.recall_at_k);
        }
        let _ = writeln!(s, "wall_clock_secs: {:.3}", self.wall_clock_secs);
        let _ = writeln!(s, "gnn_pairs: {}", self.gnn_pairs);
        let _ = writeln!(s, "ranking_pairs_excluded: {}", self.ranking_pairs);
        let _ = writeln!(s, "skipped_pairs: {}", self.skipped_pairs);
        let _ = writeln!(s, "dropped_pairs: {}", self.dropped_pairs);
        let _ = writeln!(s, "post_cutoff_pairs_used: {}", self.post_cutoff_pairs_used);
        let _ = writeln!(s, "parameter_count: {}", self.parameter_count);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}: {v}");
        }
        s
    }

    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,batches,entries\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", e.epoch, e.mean_loss, e.batches, e.entries);
        }
        s
    }
}
