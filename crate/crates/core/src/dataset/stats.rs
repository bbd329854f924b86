use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AgeRating, Dataset, DatasetError, GenreClass, NUM_CLASSES};

/// Distribution of a dataset over genre groups, G-Score classes and age ratings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub genre_counts: Vec<(GenreClass, usize)>,
    pub gscore_counts: [usize; NUM_CLASSES],
    pub age_rating_counts: Vec<(AgeRating, usize)>,
}

pub fn dataset_stats(ds: &Dataset) -> Result<StatsReport, DatasetError> {
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut genre_counts: Vec<_> = GenreClass::ALL.iter().map(|&g| (g, 0)).collect();
    let mut age_rating_counts: Vec<_> = AgeRating::ALL.iter().map(|&a| (a, 0)).collect();
    let mut gscore_counts = [0; NUM_CLASSES];
    for r in &ds.records {
        genre_counts.iter_mut().find(|(g, _)| *g == r.genre_class).unwrap().1 += 1;
        age_rating_counts.iter_mut().find(|(a, _)| *a == r.age_rating).unwrap().1 += 1;
        gscore_counts[r.gscore()?.class_index] += 1;
    }
    Ok(StatsReport { total: ds.len(), genre_counts, gscore_counts, age_rating_counts })
}

impl StatsReport {
    pub fn gscore_bin_label(class: usize) -> String {
        if class == 0 {
            "0-10".to_string()
        } else {
            format!("{}-{}", class * 10 + 1, (class + 1) * 10)
        }
    }

    /// Three two-column tables, as plain text.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let mut table = |title: &str, rows: Vec<(String, usize)>| {
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(title.len());
            let _ = writeln!(out, "{title:<width$} | Entries");
            let _ = writeln!(out, "{}-+--------", "-".repeat(width));
            for (k, v) in rows {
                let _ = writeln!(out, "{k:<width$} | {v:>7}");
            }
            let _ = writeln!(out, "{:<width$} | {:>7}", "Total", self.total);
            out.push('\n');
        };
        table("Genre", self.genre_counts.iter().map(|(g, n)| (g.label().to_string(), *n)).collect());
        table(
            "G-Score (S)",
            self.gscore_counts.iter().enumerate().map(|(k, n)| (Self::gscore_bin_label(k), *n)).collect(),
        );
        table("Age Rating", self.age_rating_counts.iter().map(|(a, n)| (a.label().to_string(), *n)).collect());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{map_genre, GameRecord};

    fn record(id: &str, score: f64, genre: &str, age: AgeRating) -> GameRecord {
        GameRecord {
            id: id.into(),
            title: String::new(),
            developer: String::new(),
            age_rating: age,
            genre_raw: genre.into(),
            genre_class: map_genre(genre),
            user_score: score,
            critic_score: score,
            summary: String::new(),
            trailer_ref: None,
            feature_ref: None,
        }
    }

    #[test]
    fn single_record() {
        let ds = Dataset::new(vec![record("a", 93.0, "Action", AgeRating::Teen)]).unwrap();
        let s = dataset_stats(&ds).unwrap();
        let nonzero = |v: Vec<usize>| v.into_iter().filter(|&n| n > 0).collect::<Vec<_>>();
        assert_eq!(nonzero(s.genre_counts.iter().map(|x| x.1).collect()), vec![1]);
        assert_eq!(nonzero(s.age_rating_counts.iter().map(|x| x.1).collect()), vec![1]);
        assert_eq!(nonzero(s.gscore_counts.to_vec()), vec![1]);
        assert_eq!(s.gscore_counts[9], 1);
    }

    #[test]
    fn two_record_histogram() {
        let ds = Dataset::new(vec![
            record("a", 81.0, "Racing", AgeRating::Everyone),
            record("b", 93.0, "Action", AgeRating::Mature),
        ])
        .unwrap();
        let s = dataset_stats(&ds).unwrap();
        let mut expected = [0; NUM_CLASSES];
        expected[8] = 1;
        expected[9] = 1;
        assert_eq!(s.gscore_counts, expected);
        assert_eq!(s.gscore_counts.iter().sum::<usize>(), 2);
        assert_eq!(s.genre_counts.iter().map(|x| x.1).sum::<usize>(), 2);
        assert_eq!(s.age_rating_counts.iter().map(|x| x.1).sum::<usize>(), 2);
        let table = s.render_table();
        assert!(table.contains("81-90"));
        assert!(table.contains("91-100"));
        let back: StatsReport = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(dataset_stats(&Dataset::default()), Err(DatasetError::EmptyDataset));
    }

    #[test]
    fn bin_labels() {
        let labels: Vec<_> = (0..NUM_CLASSES).map(StatsReport::gscore_bin_label).collect();
        assert_eq!(labels[0], "0-10");
        assert_eq!(labels[1], "11-20");
        assert_eq!(labels[9], "91-100");
    }
}
