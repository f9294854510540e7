use steerpath_core::{Exercise64, ExerciseBank64, Rating, TopicId};

/// `count` exercises on an even difficulty grid from `lo` to `hi` inclusive.
///
/// Ids are `<topic>-0000`, `<topic>-0001`, ...; the answer key of item `i` is `i`.
pub fn grid_bank(topic: &str, count: usize, lo: f64, hi: f64) -> ExerciseBank64 {
    let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
    let topic_id = TopicId::from(topic);
    let exercises = (0..count).map(|i| Exercise64 {
        id: format!("{topic}-{i:04}").into(),
        topic_id: topic_id.clone(),
        difficulty: Rating::new(lo + step * i as f64).expect("finite grid"),
        prompt: format!("{topic} item {i}"),
        answer_key: i.to_string(),
    });
    ExerciseBank64::new(exercises).expect("grid ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_ids() {
        let bank = grid_bank("t", 401, -5.0, 5.0);
        assert_eq!(bank.len(), 401);
        assert_eq!(bank.get(&"t-0000".into()).unwrap().difficulty.value(), -5.0);
        assert_eq!(bank.get(&"t-0400".into()).unwrap().difficulty.value(), 5.0);
        assert_eq!(bank.get(&"t-0200".into()).unwrap().difficulty.value(), 0.0);
        assert_eq!(grid_bank("x", 1, 2.0, 3.0).len(), 1);
    }
}
