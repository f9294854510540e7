use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use steerpath_core::{BankError, ExerciseBank64, IngestReport};

/// Reads and validates a JSONL bank file.
pub fn ingest_bank(path: &Path) -> Result<(ExerciseBank64, IngestReport), BankError> {
    let file = File::open(path)?;
    ExerciseBank64::read_jsonl(BufReader::new(file))
}
