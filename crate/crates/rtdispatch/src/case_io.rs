//! System cases as JSON documents.

use std::fs;
use std::path::Path;

use rtdispatch_core::model::{validate_case, SystemCase, ValidatedCase};

use crate::Error;

pub fn parse_case(text: &str, path: &Path) -> Result<SystemCase, Error> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates a case file.
pub fn load_case(path: &Path) -> Result<ValidatedCase, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(validate_case(parse_case(&text, path)?)?)
}

pub fn case_to_json(case: &SystemCase) -> String {
    serde_json::to_string_pretty(case).expect("cases serialize")
}

pub fn save_case(path: &Path, case: &SystemCase) -> Result<(), Error> {
    fs::write(path, case_to_json(case) + "\n").map_err(|e| Error::io(path, e))
}
