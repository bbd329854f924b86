use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::models::{Modality, Variant};

/// Outcome of one cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub variant: Variant,
    pub modality: Modality,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub per_fold_vocab: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub config_fingerprint: String,
    pub fold_sizes: Vec<usize>,
    pub epochs_run: Vec<usize>,
    pub final_losses: Vec<Option<f64>>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Not serialized, so reruns produce identical report files.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl FoldReport {
    pub fn assumptions(&self) -> String {
        format!(
            "assumptions: {} folds; vocabulary {}",
            if self.stratified { "stratified by G-Score class" } else { "unstratified" },
            if self.per_fold_vocab { "rebuilt from each training split" } else { "global" }
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ =
            writeln!(out, "{} / {}: {}-fold cross-validation, seed {}", self.variant, self.modality, self.k, self.seed);
        let _ = writeln!(out, "{}", self.assumptions());
        let _ = writeln!(out, "config {} ({} epochs, batch {})", self.config_fingerprint, self.epochs, self.batch_size);
        let _ = writeln!(out, "{:>4}  {:>5}  {:>8}  {:>10}", "fold", "size", "accuracy", "final loss");
        for (i, acc) in self.fold_accuracies.iter().enumerate() {
            let loss = self.final_losses[i].map_or_else(|| "-".to_string(), |l| format!("{l:.4}"));
            let _ = writeln!(out, "{:>4}  {:>5}  {:>7.1}%  {:>10}", i + 1, self.fold_sizes[i], acc * 100.0, loss);
        }
        let _ = writeln!(out, "mean accuracy {:.1}%", self.mean_accuracy * 100.0);
        out
    }
}

/// Both modalities of one variant under identical folds and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variant: Variant,
    pub trailer_only: FoldReport,
    pub trailer_and_summary: FoldReport,
    /// Multimodal minus trailer-only mean accuracy, in percentage points.
    pub improvement_points: f64,
}

impl AblationReport {
    pub fn new(trailer_only: FoldReport, trailer_and_summary: FoldReport) -> Self {
        let improvement_points = (trailer_and_summary.mean_accuracy - trailer_only.mean_accuracy) * 100.0;
        Self { variant: trailer_only.variant, trailer_only, trailer_and_summary, improvement_points }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Accuracy table with one row per variant, in percent.
pub fn render_ablation_table(reports: &[AblationReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10}| {:>12} | {:>19} | {:>11}",
        "Model", "Trailer Only", "Trailer and Summary", "Improvement"
    );
    let _ = writeln!(out, "{:-<10}|{:-<14}|{:-<21}|{:-<12}", "", "", "", "");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10}| {:>12.1} | {:>19.1} | {:>+11.1}",
            r.variant.label(),
            r.trailer_only.mean_accuracy * 100.0,
            r.trailer_and_summary.mean_accuracy * 100.0,
            r.improvement_points
        );
    }
    if let Some(first) = reports.first() {
        let _ = writeln!(out, "{}", first.trailer_only.assumptions());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(modality: Modality, accs: Vec<f64>) -> FoldReport {
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        FoldReport {
            variant: Variant::M1,
            modality,
            k: accs.len(),
            seed: 7,
            stratified: true,
            per_fold_vocab: true,
            epochs: 25,
            batch_size: 32,
            config_fingerprint: "deadbeef".into(),
            fold_sizes: vec![5; accs.len()],
            epochs_run: vec![25; accs.len()],
            final_losses: vec![Some(0.5); accs.len()],
            fold_accuracies: accs,
            mean_accuracy: mean,
            wall_time_secs: 1.5,
        }
    }

    #[test]
    fn json_omits_wall_time() {
        let mut a = report(Modality::TrailerOnly, vec![0.5, 0.7]);
        let json = a.to_json();
        assert!(!json.contains("wall"));
        a.wall_time_secs = 99.0;
        assert_eq!(a.to_json(), json);
        let back: FoldReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.mean_accuracy, 0.6);
    }

    #[test]
    fn table_layout() {
        let r = AblationReport::new(
            report(Modality::TrailerOnly, vec![0.652]),
            report(Modality::TrailerAndSummary, vec![0.705]),
        );
        assert!((r.improvement_points - 5.3).abs() < 1e-9);
        let t = render_ablation_table(&[r]);
        assert!(t.contains("Trailer Only"));
        assert!(t.contains("Model-1"));
        assert!(t.contains("65.2"));
        assert!(t.contains("70.5"));
        assert!(t.contains("+5.3"));
    }
}
