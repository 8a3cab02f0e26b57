//! CSV input with `time`, `event` and covariate columns.

use std::io::Read;

use cenbar::SurvivalDataset;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

/// Parsed input rows, kept verbatim for echoing back.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub covariate_names: Vec<String>,
    pub data: SurvivalDataset,
}

fn column(headers: &[String], name: &str) -> CliResult<usize> {
    let hits: Vec<usize> = (0..headers.len()).filter(|&i| headers[i] == name).collect();
    match hits.as_slice() {
        [i] => Ok(*i),
        [] => Err(CliError::Input(format!("header has no '{name}' column"))),
        _ => Err(CliError::Input(format!(
            "header has more than one '{name}' column"
        ))),
    }
}

fn number(cell: &str, row: usize, col: &str) -> CliResult<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Err(CliError::Input(format!(
            "row {row}, column {col}: missing value"
        )));
    }
    let v: f64 = cell.parse().map_err(|_| {
        CliError::Input(format!("row {row}, column {col}: '{cell}' is not a number"))
    })?;
    if !v.is_finite() {
        return Err(CliError::Input(format!(
            "row {row}, column {col}: value is not finite"
        )));
    }
    Ok(v)
}

/// Reads a comma-separated table. Row numbers in messages count data rows from 1.
pub fn read_table<R: Read>(input: R) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("malformed CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let time_col = column(&headers, "time")?;
    let event_col = column(&headers, "event")?;
    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != time_col && i != event_col)
        .collect();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => CliError::Input(format!(
                "row {}: expected {expected_len} fields, found {len}",
                i + 1
            )),
            _ => CliError::Input(format!("row {}: malformed CSV: {e}", i + 1)),
        })?;
        rows.push(record.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if rows.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }

    let n = rows.len();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let mut x = DMatrix::zeros(n, covariate_cols.len());
    for (i, row) in rows.iter().enumerate() {
        times.push(number(&row[time_col], i + 1, "time")?);
        let e = number(&row[event_col], i + 1, "event")?;
        if e != 0.0 && e != 1.0 {
            return Err(CliError::Input(format!(
                "row {}, column event: must be 0 or 1, got {}",
                i + 1,
                row[event_col].trim()
            )));
        }
        events.push(e == 1.0);
        for (c, &col) in covariate_cols.iter().enumerate() {
            x[(i, c)] = number(&row[col], i + 1, &headers[col])?;
        }
    }
    let data = SurvivalDataset::new(times, events, x)?;
    Ok(Table {
        covariate_names: covariate_cols.iter().map(|&c| headers[c].clone()).collect(),
        headers,
        rows,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<Table> {
        read_table(s.as_bytes())
    }

    #[test]
    fn reads_columns_in_any_order() {
        let t = parse("a,event,time,b\n1,1,2.5,3\n4,0,1.5,6\n").unwrap();
        assert_eq!(t.covariate_names, vec!["a", "b"]);
        assert_eq!(t.data.times(), &[2.5, 1.5]);
        assert_eq!(t.data.events(), &[true, false]);
        assert_eq!(t.data.covariates()[(1, 1)], 6.0);
    }

    #[test]
    fn rejects_bad_event_with_row() {
        let err = parse("time,event,x\n1,1,0\n2,2,1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn rejects_missing_and_ragged() {
        assert!(parse("time,event,x\n1,,0\n")
            .unwrap_err()
            .to_string()
            .contains("missing"));
        assert!(parse("time,event,x\n1,1\n")
            .unwrap_err()
            .to_string()
            .contains("row 1"));
        assert!(parse("time,event,x\n")
            .unwrap_err()
            .to_string()
            .contains("no data"));
        assert!(parse("tim,event\n1,1\n").is_err());
        assert!(parse("time,event,x\n1,1,abc\n")
            .unwrap_err()
            .to_string()
            .contains("column x"));
    }
}
