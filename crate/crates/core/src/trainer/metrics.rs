use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,lr,ce,kl,total,top1,top5,eff_classes,seconds";

/// One row per completed epoch. Losses are batch means over the epoch; errors
/// are test-set percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
    pub top1: f64,
    pub top5: f64,
    pub eff_classes: f64,
    pub seconds: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch, self.lr, self.ce, self.kl, self.total, self.top1, self.top5, self.eff_classes, self.seconds
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<EpochMetrics>,
}

impl RunMetrics {
    pub fn final_top1(&self) -> Option<f64> {
        self.rows.last().map(|r| r.top1)
    }

    /// Lowest test top-1 error over all epochs.
    pub fn best_top1(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.top1).min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
