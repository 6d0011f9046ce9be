use std::path::Path;

use crate::error::{Error, Result};
use crate::window::TaskOutcome;

/// Parses a JSON Lines ledger, one [`TaskOutcome`] per line. Blank lines
/// are skipped; any other malformed line fails with its line number.
pub fn parse_ledger_str(text: &str) -> Result<Vec<TaskOutcome>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let outcome: TaskOutcome = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        outcome
            .check_fields()
            .map_err(|(field, message)| Error::FieldValidation {
                line: line_no,
                field: field.to_string(),
                message,
            })?;
        out.push(outcome);
    }
    Ok(out)
}

pub fn parse_ledger(path: impl AsRef<Path>) -> Result<Vec<TaskOutcome>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_ledger_str(&text)
}

pub fn ledger_to_jsonl(ledger: &[TaskOutcome]) -> String {
    let mut out = String::new();
    for o in ledger {
        out.push_str(&serde_json::to_string(o).expect("outcomes serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conservation::PhaseTimes;

    fn outcome() -> TaskOutcome {
        TaskOutcome::new(
            "t1",
            4.0,
            PhaseTimes {
                t_planning: 0.5,
                t_interrupts: vec![0.1],
                t_review: 0.25,
            },
            2.0,
            3.0,
        )
    }

    #[test]
    fn empty_file_is_an_empty_ledger() {
        assert!(parse_ledger_str("").unwrap().is_empty());
        assert!(parse_ledger_str("\n\n").unwrap().is_empty());
    }

    #[test]
    fn one_line_round_trips_byte_for_byte() {
        let line = ledger_to_jsonl(&[outcome()]);
        let parsed = parse_ledger_str(&line).unwrap();
        assert_eq!(parsed, vec![outcome()]);
        assert_eq!(ledger_to_jsonl(&parsed), line);
    }

    #[test]
    fn negative_agent_time_names_line_and_field() {
        let mut bad = outcome();
        bad.t_agent = -1.0;
        let text = format!("{}{}", ledger_to_jsonl(&[outcome()]), ledger_to_jsonl(&[bad]));
        match parse_ledger_str(&text) {
            Err(Error::FieldValidation { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "t_agent");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_the_line() {
        let text = "{\"task_id\":\"a\"}\n";
        assert!(matches!(parse_ledger_str(text), Err(Error::Parse { line: 1, .. })));
        let good = ledger_to_jsonl(&[outcome()]);
        let extra = good.replace("\"t_agent\"", "\"surprise\":1,\"t_agent\"");
        let text = format!("{good}{extra}");
        match parse_ledger_str(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("surprise"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_ledger(dir.path().join("none.jsonl")),
            Err(Error::Io(_))
        ));
    }
}
