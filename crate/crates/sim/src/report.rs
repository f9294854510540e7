use std::io::Write;

use serde::Serialize;
use steerpath_core::MasteryBand;

/// One simulated answer; the rows of the per-step CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub learner_id: String,
    pub step: usize,
    pub series: usize,
    pub slider: f64,
    pub exercise_id: String,
    pub true_difficulty: f64,
    pub estimated_difficulty: f64,
    pub p_true: f64,
    pub correct: bool,
    pub rating_after: f64,
    pub score_after: f64,
    pub band_after: MasteryBand,
    pub true_skill: f64,
    pub rating_error: f64,
}

/// End-of-run numbers for one learner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerMetrics {
    pub learner_id: String,
    pub true_skill: f64,
    pub final_rating: f64,
    pub attempts: usize,
    /// `|final rating - true skill|`.
    pub rating_error: f64,
    /// `|final score - logistic(true skill)|`.
    pub score_error: f64,
    /// Share correct over the last `window` attempts; `None` without attempts.
    pub success_rate: Option<f64>,
    pub window: usize,
    /// Band before the first series and after each completed series.
    pub band_trajectory: Vec<MasteryBand>,
}

impl LearnerMetrics {
    /// Run-length form of the trajectory, e.g. `Competent:4|Proficient:12`.
    pub fn trajectory_string(&self) -> String {
        let mut runs: Vec<(MasteryBand, usize)> = Vec::new();
        for &band in &self.band_trajectory {
            match runs.last_mut() {
                Some((b, n)) if *b == band => *n += 1,
                _ => runs.push((band, 1)),
            }
        }
        runs.iter()
            .map(|(b, n)| format!("{b:?}:{n}"))
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Serialize)]
struct MetricsCsvRow<'a> {
    learner_id: &'a str,
    true_skill: f64,
    final_rating: f64,
    attempts: usize,
    rating_error: f64,
    score_error: f64,
    success_rate: Option<f64>,
    band_trajectory: String,
}

/// Population aggregates. Every field is a symmetric function of the
/// per-learner metrics, so learner order does not matter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub learners: usize,
    pub attempts: usize,
    pub median_rating_error: f64,
    pub mean_rating_error: f64,
    pub median_score_error: f64,
    pub mean_success_rate: Option<f64>,
    /// Share of learners whose windowed success rate lies in `calibration_band`.
    pub calibrated_fraction: f64,
    pub calibration_band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub learners: Vec<LearnerMetrics>,
    pub steps: Vec<StepRow>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Mean that does not depend on input order: values are summed sorted.
pub fn mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

impl SimReport {
    pub fn summary(&self, calibration_band: (f64, f64)) -> Summary {
        let n = self.learners.len();
        let mut rating_errors: Vec<f64> = self.learners.iter().map(|m| m.rating_error).collect();
        let mut score_errors: Vec<f64> = self.learners.iter().map(|m| m.score_error).collect();
        let rates: Vec<f64> = self.learners.iter().filter_map(|m| m.success_rate).collect();
        let (lo, hi) = calibration_band;
        let calibrated = rates.iter().filter(|r| (lo..=hi).contains(*r)).count();
        Summary {
            learners: n,
            attempts: self.learners.iter().map(|m| m.attempts).sum(),
            mean_rating_error: mean(&rating_errors),
            median_rating_error: median(&mut rating_errors),
            median_score_error: median(&mut score_errors),
            mean_success_rate: (!rates.is_empty()).then(|| mean(&rates)),
            calibrated_fraction: calibrated as f64 / n as f64,
            calibration_band,
        }
    }

    pub fn write_steps_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.steps {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_metrics_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for m in &self.learners {
            out.serialize(MetricsCsvRow {
                learner_id: &m.learner_id,
                true_skill: m.true_skill,
                final_rating: m.final_rating,
                attempts: m.attempts,
                rating_error: m.rating_error,
                score_error: m.score_error,
                success_rate: m.success_rate,
                band_trajectory: m.trajectory_string(),
            })?;
        }
        out.flush()?;
        Ok(())
    }
}
