//! Versioned file formats: response matrices (CSV), item banks and session
//! logs (JSON lines behind a manifest line).
//!
//! Banks and logs start with a manifest line naming the format, its
//! version, the writing tool and a checksum of every byte that follows the
//! manifest. Reals are written in scientific notation with 17 significant
//! digits so that every `f64` round-trips exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::ability::{AbilityEstimate, Method};
use crate::calibration::{validate_matrix, FindingKind, ResponseMatrix};
use crate::error::{Error, Result};
use crate::irt::ItemParams;
use crate::session::{Administered, EvalSession, SessionConfig, StopReason};

pub const ITEM_BANK_FORMAT: &str = "fluid.item_bank";
pub const SESSION_LOG_FORMAT: &str = "fluid.session_log";
pub const FORMAT_VERSION: u32 = 1;
pub const CREATED_BY: &str = concat!("fluid-core ", env!("CARGO_PKG_VERSION"));

const MATRIX_CORNER: &str = "model_id";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileManifest {
    pub format_name: String,
    pub format_version: u32,
    pub created_by: String,
    /// First 64 bits of the SHA-256 of the payload, as 16 hex digits.
    pub checksum: String,
}

impl FileManifest {
    pub fn for_payload(format_name: &str, payload: &str) -> Self {
        Self {
            format_name: format_name.to_string(),
            format_version: FORMAT_VERSION,
            created_by: CREATED_BY.to_string(),
            checksum: checksum(payload.as_bytes()),
        }
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Scientific notation with 17 significant digits; `null` for non-finite
/// values (JSON has no infinity).
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Response matrices
// ---------------------------------------------------------------------------

/// CSV with item ids in the first row and model ids in the first column;
/// cells are `1`, `0`, or empty for missing. LF line endings.
pub fn response_matrix_to_string(matrix: &ResponseMatrix) -> Result<String> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(std::iter::once(MATRIX_CORNER).chain(matrix.item_ids().iter().map(String::as_str)))?;
    for (i, row) in matrix.rows().enumerate() {
        let cells = row.iter().map(|c| match c {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        });
        writer.write_record(std::iter::once(matrix.model_ids()[i].as_str()).chain(cells))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_response_matrix(text: &str, path: &Path) -> Result<ResponseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(record) => record.map_err(|e| csv_err(path, e))?,
        None => return Err(parse_err(path, 1, "empty response matrix file")),
    };
    let item_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();

    let mut model_ids = Vec::new();
    let mut cells = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut fields = record.iter();
        model_ids.push(fields.next().unwrap_or_default().to_string());
        for (j, value) in fields.enumerate() {
            cells.push(match value {
                "1" => Some(true),
                "0" => Some(false),
                "" => None,
                other => {
                    return Err(parse_err(
                        path,
                        line,
                        format!(
                            "row {}, column {} (item `{}`): invalid cell `{other}`, expected 1, 0 or empty",
                            model_ids.len(),
                            j + 1,
                            item_ids[j]
                        ),
                    ))
                }
            });
        }
    }

    let matrix = ResponseMatrix::new(model_ids, item_ids, cells)?;
    let duplicates: Vec<String> = validate_matrix(&matrix)
        .into_iter()
        .filter(|f| matches!(f.kind, FindingKind::DuplicateItemId | FindingKind::DuplicateModelId))
        .map(|f| f.to_string())
        .collect();
    if !duplicates.is_empty() {
        return Err(format_err(path, duplicates.join("; ")));
    }
    Ok(matrix)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(path, line, e.to_string())
}

pub fn write_response_matrix(matrix: &ResponseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, response_matrix_to_string(matrix)?)?;
    Ok(())
}

pub fn read_response_matrix(path: impl AsRef<Path>) -> Result<ResponseMatrix> {
    let path = path.as_ref();
    parse_response_matrix(&fs::read_to_string(path)?, path)
}

// ---------------------------------------------------------------------------
// Manifest framing
// ---------------------------------------------------------------------------

fn with_manifest(format_name: &str, payload: String) -> String {
    let m = FileManifest::for_payload(format_name, &payload);
    format!(
        "{{\"format_name\":{},\"format_version\":{},\"created_by\":{},\"checksum\":{}}}\n{payload}",
        json_str(&m.format_name),
        m.format_version,
        json_str(&m.created_by),
        json_str(&m.checksum),
    )
}

/// Splits off and checks the manifest line; returns the payload lines with
/// their 1-based line numbers, and the raw payload for the checksum.
fn open_framed<'a>(text: &'a str, format_name: &str, path: &Path) -> Result<(FileManifest, &'a str)> {
    let (first, payload) = text.split_once('\n').unwrap_or((text, ""));
    let manifest: FileManifest =
        serde_json::from_str(first).map_err(|e| parse_err(path, 1, format!("bad manifest: {e}")))?;
    if manifest.format_name != format_name {
        return Err(format_err(
            path,
            format!("expected format `{format_name}`, found `{}`", manifest.format_name),
        ));
    }
    if manifest.format_version > FORMAT_VERSION {
        return Err(format_err(
            path,
            format!(
                "format version {} is newer than the supported version {FORMAT_VERSION}",
                manifest.format_version
            ),
        ));
    }
    Ok((manifest, payload))
}

fn verify_checksum(manifest: &FileManifest, payload: &str, path: &Path) -> Result<()> {
    let actual = checksum(payload.as_bytes());
    if actual != manifest.checksum {
        return Err(format_err(
            path,
            format!("checksum mismatch: manifest {}, payload {actual}", manifest.checksum),
        ));
    }
    Ok(())
}

fn payload_lines(payload: &str) -> impl Iterator<Item = (usize, &str)> {
    payload.lines().enumerate().map(|(i, l)| (i + 2, l))
}

fn take_f64(obj: &mut Map<String, Value>, key: &str, path: &Path, line: usize) -> Result<f64> {
    match obj.remove(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| parse_err(path, line, format!("`{key}` is not a real number"))),
        Some(Value::Null) => Ok(f64::INFINITY),
        Some(_) => Err(parse_err(path, line, format!("`{key}` is not a number"))),
        None => Err(parse_err(path, line, format!("missing field `{key}`"))),
    }
}

fn take_string(obj: &mut Map<String, Value>, key: &str, path: &Path, line: usize) -> Result<String> {
    match obj.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(parse_err(path, line, format!("`{key}` is not a string"))),
        None => Err(parse_err(path, line, format!("missing field `{key}`"))),
    }
}

fn parse_object(line_text: &str, path: &Path, line: usize) -> Result<Map<String, Value>> {
    match serde_json::from_str(line_text) {
        Ok(Value::Object(obj)) => Ok(obj),
        Ok(_) => Err(parse_err(path, line, "expected a JSON object")),
        Err(e) => Err(parse_err(path, line, e.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Item banks
// ---------------------------------------------------------------------------

pub fn item_bank_to_string(bank: &[ItemParams]) -> String {
    let payload: String = bank
        .iter()
        .map(|q| {
            format!(
                "{{\"item_id\":{},\"discrimination\":{},\"difficulty\":{}}}\n",
                json_str(&q.item_id),
                real(q.discrimination),
                real(q.difficulty)
            )
        })
        .collect();
    with_manifest(ITEM_BANK_FORMAT, payload)
}

pub fn parse_item_bank(text: &str, path: &Path) -> Result<Vec<ItemParams>> {
    let (manifest, payload) = open_framed(text, ITEM_BANK_FORMAT, path)?;
    let mut bank = Vec::new();
    for (line, line_text) in payload_lines(payload) {
        if line_text.trim().is_empty() {
            continue;
        }
        let mut obj = parse_object(line_text, path, line)?;
        let item = ItemParams {
            item_id: take_string(&mut obj, "item_id", path, line)?,
            discrimination: take_f64(&mut obj, "discrimination", path, line)?,
            difficulty: take_f64(&mut obj, "difficulty", path, line)?,
        };
        for key in obj.keys() {
            log::warn!("{}:{line}: ignoring unknown field `{key}`", path.display());
        }
        item.validate().map_err(|e| parse_err(path, line, e.to_string()))?;
        bank.push(item);
    }
    verify_checksum(&manifest, payload, path)?;
    Ok(bank)
}

pub fn write_item_bank(bank: &[ItemParams], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, item_bank_to_string(bank))?;
    Ok(())
}

pub fn read_item_bank(path: impl AsRef<Path>) -> Result<Vec<ItemParams>> {
    let path = path.as_ref();
    parse_item_bank(&fs::read_to_string(path)?, path)
}

// ---------------------------------------------------------------------------
// Session logs
// ---------------------------------------------------------------------------

fn optional_real(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), real)
}

pub fn session_log_to_string(session: &EvalSession) -> String {
    let c = &session.config;
    let mut payload = format!(
        "{{\"config\":{{\"strategy\":{},\"budget\":{},\"se_threshold\":{},\"seed\":{},\"prior_mean\":{},\"prior_sd\":{}}},\"steps\":{},\"final_score\":{},\"stop_reason\":{}}}\n",
        json_str(c.strategy.name()),
        c.budget.map_or_else(|| "null".to_string(), |b| b.to_string()),
        optional_real(c.se_threshold),
        c.seed,
        real(c.prior_mean),
        real(c.prior_sd),
        session.len(),
        real(session.final_score),
        json_str(&session.stop_reason.to_string()),
    );
    for (t, (step, estimate)) in session.administered.iter().zip(&session.trajectory).enumerate() {
        payload.push_str(&format!(
            "{{\"step\":{},\"item_id\":{},\"discrimination\":{},\"difficulty\":{},\"correct\":{},\"theta\":{},\"standard_error\":{},\"clamped\":{}}}\n",
            t + 1,
            json_str(&step.item.item_id),
            real(step.item.discrimination),
            real(step.item.difficulty),
            u8::from(step.correct),
            real(estimate.theta),
            real(estimate.standard_error),
            estimate.clamped,
        ));
    }
    with_manifest(SESSION_LOG_FORMAT, payload)
}

#[derive(Deserialize)]
struct SessionHeader {
    config: SessionConfig,
    steps: usize,
    final_score: f64,
    stop_reason: StopReason,
}

#[derive(Deserialize)]
struct StepRecord {
    step: usize,
    item_id: String,
    discrimination: f64,
    difficulty: f64,
    correct: u8,
    theta: f64,
    standard_error: Option<f64>,
    clamped: bool,
}

pub fn parse_session_log(text: &str, path: &Path) -> Result<EvalSession> {
    let (manifest, payload) = open_framed(text, SESSION_LOG_FORMAT, path)?;
    let mut lines = payload_lines(payload);
    let header: SessionHeader = match lines.next() {
        Some((line, t)) => serde_json::from_str(t).map_err(|e| parse_err(path, line, format!("bad session header: {e}")))?,
        None => return Err(parse_err(path, 2, "missing session header")),
    };

    let mut administered = Vec::with_capacity(header.steps);
    let mut trajectory = Vec::with_capacity(header.steps);
    let mut last_line = 2;
    for (line, t) in lines {
        last_line = line;
        let record: StepRecord = serde_json::from_str(t).map_err(|e| parse_err(path, line, e.to_string()))?;
        let expected = administered.len() + 1;
        if record.step != expected {
            return Err(parse_err(
                path,
                line,
                format!("step {} out of order, expected {expected}", record.step),
            ));
        }
        if record.correct > 1 {
            return Err(parse_err(path, line, format!("response must be 0 or 1, got {}", record.correct)));
        }
        let item = ItemParams {
            item_id: record.item_id,
            discrimination: record.discrimination,
            difficulty: record.difficulty,
        };
        item.validate().map_err(|e| parse_err(path, line, e.to_string()))?;
        administered.push(Administered {
            item,
            correct: record.correct == 1,
        });
        trajectory.push(AbilityEstimate {
            theta: record.theta,
            standard_error: record.standard_error.unwrap_or(f64::INFINITY),
            method: Method::Map,
            response_count: record.step,
            clamped: record.clamped,
        });
    }
    if administered.len() != header.steps {
        return Err(parse_err(
            path,
            last_line + 1,
            format!(
                "truncated log: header announces {} steps, found {}",
                header.steps,
                administered.len()
            ),
        ));
    }
    verify_checksum(&manifest, payload, path)?;

    Ok(EvalSession {
        config: header.config,
        administered,
        trajectory,
        final_score: header.final_score,
        stop_reason: header.stop_reason,
    })
}

pub fn write_session_log(session: &EvalSession, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, session_log_to_string(session))?;
    Ok(())
}

pub fn read_session_log(path: impl AsRef<Path>) -> Result<EvalSession> {
    let path = path.as_ref();
    parse_session_log(&fs::read_to_string(path)?, path)
}

/// Placeholder path used when parsing in-memory text.
pub fn memory_path() -> PathBuf {
    PathBuf::from("<memory>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irt::Ability;
    use crate::session::{run_session, SessionConfig, Strategy};
    use crate::simulation::{generate_bank, simulated_oracle, SyntheticBankSpec};
    use proptest::prelude::*;

    fn p() -> PathBuf {
        memory_path()
    }

    fn small_matrix() -> ResponseMatrix {
        ResponseMatrix::from_rows(
            vec!["m0".into(), "m,1".into()],
            vec!["q0".into(), "q \"1\"".into()],
            vec![vec![Some(true), None], vec![Some(false), Some(true)]],
        )
        .unwrap()
    }

    #[test]
    fn matrix_round_trip_keeps_missing_cells() {
        let m = small_matrix();
        let text = response_matrix_to_string(&m).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("model_id,q0,"));
        assert_eq!(parse_response_matrix(&text, &p()).unwrap(), m);
    }

    #[test]
    fn bad_cell_is_located() {
        let text = "model_id,q0,q1\nm0,1,0\nm1,2,1\n";
        let err = parse_response_matrix(text, &p()).unwrap_err().to_string();
        assert!(err.contains(":3:") && err.contains("column 1") && err.contains("`2`"), "{err}");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = "model_id,q0,q0\nm0,1,0\n";
        let err = parse_response_matrix(text, &p()).unwrap_err().to_string();
        assert!(err.contains("q0"), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(parse_response_matrix("model_id,q0,q1\nm0,1\n", &p()).is_err());
    }

    fn bank() -> Vec<ItemParams> {
        vec![
            ItemParams::new("a", 0.1 + 0.2, -1.0 / 3.0).unwrap(),
            ItemParams::new("b", std::f64::consts::PI, 1e-300).unwrap(),
            ItemParams::new("c\u{e9}", 1.0, 0.0).unwrap(),
        ]
    }

    #[test]
    fn bank_round_trip_is_exact() {
        let text = item_bank_to_string(&bank());
        assert!(text.contains("3.0000000000000004e-1"));
        assert_eq!(parse_item_bank(&text, &p()).unwrap(), bank());
        assert_eq!(text, item_bank_to_string(&bank()));
    }

    #[test]
    fn nonpositive_discrimination_is_rejected() {
        let payload = "{\"item_id\":\"x\",\"discrimination\":-1,\"difficulty\":0}\n".to_string();
        let text = with_manifest(ITEM_BANK_FORMAT, payload);
        let err = parse_item_bank(&text, &p()).unwrap_err().to_string();
        assert!(err.contains("`x`") && err.contains("positive"), "{err}");
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let payload = "{\"item_id\":\"x\",\"discrimination\":1.5,\"difficulty\":0.25,\"topic\":\"math\"}\n".to_string();
        let text = with_manifest(ITEM_BANK_FORMAT, payload);
        let bank = parse_item_bank(&text, &p()).unwrap();
        assert_eq!(bank, vec![ItemParams::new("x", 1.5, 0.25).unwrap()]);
    }

    #[test]
    fn newer_versions_and_wrong_formats_are_rejected() {
        let text = item_bank_to_string(&bank()).replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(parse_item_bank(&text, &p()).unwrap_err().to_string().contains("newer"));
        let log_as_bank = item_bank_to_string(&bank()).replacen(ITEM_BANK_FORMAT, SESSION_LOG_FORMAT, 1);
        assert!(parse_item_bank(&log_as_bank, &p()).is_err());
    }

    fn session(steps: usize) -> EvalSession {
        let bank = generate_bank(&SyntheticBankSpec {
            item_count: 60,
            seed: 4,
            ..SyntheticBankSpec::default()
        })
        .unwrap();
        let oracle = simulated_oracle(Ability(0.4), &bank, 2);
        run_session(&bank, &oracle, &SessionConfig::new(Strategy::Fluid, Some(steps), Some(1e-6), 3)).unwrap()
    }

    #[test]
    fn session_round_trip() {
        let s = session(5);
        let text = session_log_to_string(&s);
        assert_eq!(text.lines().count(), 7);
        assert_eq!(parse_session_log(&text, &p()).unwrap(), s);
    }

    #[test]
    fn out_of_order_steps_are_rejected() {
        let text = session_log_to_string(&session(3)).replacen("{\"step\":2,", "{\"step\":3,", 1);
        let err = parse_session_log(&text, &p()).unwrap_err().to_string();
        assert!(err.contains(":4:") && err.contains("out of order"), "{err}");
    }

    #[test]
    fn truncated_log_reports_line() {
        let text = session_log_to_string(&session(4));
        let cut = &text[..text.len() - 20];
        let err = parse_session_log(cut, &p()).unwrap_err().to_string();
        assert!(err.contains(":6:"), "{err}");

        let dropped: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        let err = parse_session_log(&dropped, &p()).unwrap_err().to_string();
        assert!(err.contains(":6:") && err.contains("truncated"), "{err}");
    }

    #[test]
    fn replayed_log_matches() {
        let s = parse_session_log(&session_log_to_string(&session(12)), &p()).unwrap();
        assert!(crate::session::replay_discrepancy(&s).unwrap() <= 1e-9);
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_matrix();
        write_response_matrix(&m, dir.path().join("m.csv")).unwrap();
        assert_eq!(read_response_matrix(dir.path().join("m.csv")).unwrap(), m);
        write_item_bank(&bank(), dir.path().join("b.jsonl")).unwrap();
        assert_eq!(read_item_bank(dir.path().join("b.jsonl")).unwrap(), bank());
        let s = session(3);
        write_session_log(&s, dir.path().join("s.jsonl")).unwrap();
        assert_eq!(read_session_log(dir.path().join("s.jsonl")).unwrap(), s);
    }

    proptest! {
        #[test]
        fn single_bit_corruption_is_detected(pos in any::<prop::sample::Index>(), bit in 0u8..8) {
            let text = item_bank_to_string(&bank());
            let header_len = text.find('\n').unwrap() + 1;
            let mut bytes = text.into_bytes();
            let i = header_len + pos.index(bytes.len() - header_len);
            bytes[i] ^= 1 << bit;
            let corrupted = String::from_utf8(bytes);
            if let Ok(corrupted) = corrupted {
                prop_assert!(parse_item_bank(&corrupted, &p()).is_err());
            }
        }

        #[test]
        fn reals_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }
}
