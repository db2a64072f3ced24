//! Dataset file formats and JSON output.
//!
//! * `canonical-json`: `{"questions": [{"id", "votes", "predictions",
//!   "confidences"?, "key"?}]}` with votes `"A"`/`"B"`/`null`.
//! * `csv-triple`: a directory holding `votes.csv`, `predictions.csv` and
//!   optionally `confidences.csv`; question rows, respondent columns, the
//!   first column is the question id and an empty cell is missing. A trailing
//!   `key` column in `votes.csv` carries the answer key.
//!
//! Floats are written losslessly and with at least nine significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::dataset::{Answer, DatasetError, Polarity, ResponseDataset, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    CanonicalJson,
    CsvTriple,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical-json" | "json" => Ok(Format::CanonicalJson),
            "csv-triple" | "csv" => Ok(Format::CsvTriple),
            other => Err(format!("unknown dataset format '{other}'")),
        }
    }
}

const MIN_SIGNIFICANT_DIGITS: usize = 9;

/// Shortest round-trip decimal, zero-padded to at least nine significant
/// digits (`0.7` becomes `0.700000000`).
pub fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if !v.is_finite() {
        return s;
    }
    let digits: String = s.chars().filter(char::is_ascii_digit).collect();
    let significant = digits.trim_start_matches('0').len();
    let significant = if significant == 0 { 1 } else { significant };
    if significant >= MIN_SIGNIFICANT_DIGITS {
        return s;
    }
    let pad = MIN_SIGNIFICANT_DIGITS - significant;
    let mut out = s;
    if !out.contains('.') {
        out.push('.');
    }
    out.extend(std::iter::repeat_n('0', pad));
    out
}

/// serde_json formatter that writes floats through [`format_float`].
struct PrecisionFormatter<F> {
    inner: F,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(writer $(, $arg)*)
        })*
    };
}

impl<F: Formatter> Formatter for PrecisionFormatter<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if !value.is_finite() {
            return self.inner.write_null(writer);
        }
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate!(
        write_null(),
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

/// Serializes `value` as JSON with the float policy above. Non-finite floats
/// become `null`.
pub fn to_json_string<T: Serialize>(value: &T, pretty: bool) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    if pretty {
        let fmt = PrecisionFormatter { inner: PrettyFormatter::with_indent(b"  ") };
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
        value.serialize(&mut ser)?;
    } else {
        let fmt = PrecisionFormatter { inner: serde_json::ser::CompactFormatter };
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
        value.serialize(&mut ser)?;
    }
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

#[derive(Serialize, Deserialize)]
struct CanonicalFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
    questions: Vec<CanonicalQuestion>,
}

#[derive(Serialize, Deserialize)]
struct CanonicalQuestion {
    id: String,
    votes: Vec<Option<String>>,
    predictions: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidences: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    key: Option<String>,
    #[serde(default, skip_serializing_if = "is_original")]
    polarity: Polarity,
}

fn is_original(p: &Polarity) -> bool {
    *p == Polarity::Original
}

fn parse_answer(sym: &str) -> Option<Answer> {
    match sym {
        "A" => Some(Answer::A),
        "B" => Some(Answer::B),
        _ => None,
    }
}

fn invalid(location: String, rule: String) -> DatasetError {
    let mut report = ValidationReport::default();
    report.errors.push(crate::dataset::ValidationIssue { location, rule });
    DatasetError::Invalid(report)
}

pub fn dataset_from_json(text: &str) -> Result<ResponseDataset, DatasetError> {
    let file: CanonicalFile =
        serde_json::from_str(text).map_err(|e| DatasetError::Parse(e.to_string()))?;
    let mut ids = Vec::new();
    let mut votes = Vec::new();
    let mut preds = Vec::new();
    let mut conf_rows = Vec::new();
    let mut keys = Vec::new();
    let mut polarity = Vec::new();
    for q in file.questions {
        let mut row = Vec::with_capacity(q.votes.len());
        for (r, v) in q.votes.iter().enumerate() {
            row.push(match v {
                None => None,
                Some(sym) => Some(parse_answer(sym).ok_or_else(|| {
                    invalid(format!("votes[{}][{r}]", q.id), format!("unknown vote symbol '{sym}'"))
                })?),
            });
        }
        let key = match &q.key {
            None => None,
            Some(sym) => Some(parse_answer(sym).ok_or_else(|| {
                invalid(format!("key[{}]", q.id), format!("unknown answer symbol '{sym}'"))
            })?),
        };
        ids.push(q.id);
        votes.push(row);
        preds.push(q.predictions);
        conf_rows.push(q.confidences);
        keys.push(key);
        polarity.push(q.polarity);
    }
    let confidences = if conf_rows.iter().any(Option::is_some) {
        Some(
            conf_rows
                .into_iter()
                .zip(&votes)
                .map(|(c, v)| c.unwrap_or_else(|| vec![None; v.len()]))
                .collect(),
        )
    } else {
        None
    };
    let answer_key = collect_key(&ids, keys)?;
    ResponseDataset::with_polarity(ids, votes, preds, confidences, answer_key, polarity)
}

fn collect_key(ids: &[String], keys: Vec<Option<Answer>>) -> Result<Option<Vec<Answer>>, DatasetError> {
    let present = keys.iter().filter(|k| k.is_some()).count();
    if present == 0 {
        return Ok(None);
    }
    if present < keys.len() {
        let missing = keys.iter().position(Option::is_none).unwrap();
        return Err(invalid(
            format!("key[{}]", ids[missing]),
            "answer key must be given for every question or none".into(),
        ));
    }
    Ok(Some(keys.into_iter().map(Option::unwrap).collect()))
}

/// Canonical JSON text; `manifest` names the run manifest that produced it.
pub fn dataset_to_json(ds: &ResponseDataset, manifest: Option<&str>) -> String {
    let questions = (0..ds.n_questions())
        .map(|q| CanonicalQuestion {
            id: ds.question_ids()[q].clone(),
            votes: ds.votes()[q].iter().map(|v| v.map(|a| a.to_string())).collect(),
            predictions: ds.predictions()[q].clone(),
            confidences: ds.confidences().map(|c| c[q].clone()),
            key: ds.answer_key().map(|k| k[q].to_string()),
            polarity: ds.polarity()[q],
        })
        .collect();
    let file = CanonicalFile { manifest: manifest.map(str::to_owned), questions };
    to_json_string(&file, false).expect("dataset serialization cannot fail")
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_string(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_dataset(path: &Path, format: Format) -> Result<ResponseDataset, DatasetError> {
    match format {
        Format::CanonicalJson => dataset_from_json(&read_to_string(path)?),
        Format::CsvTriple => load_csv_triple(path),
    }
}

pub fn save_dataset(
    ds: &ResponseDataset,
    path: &Path,
    format: Format,
    manifest: Option<&str>,
) -> Result<(), DatasetError> {
    match format {
        Format::CanonicalJson => write_string(path, &dataset_to_json(ds, manifest)),
        Format::CsvTriple => save_csv_triple(ds, path),
    }
}

struct CsvTable {
    ids: Vec<String>,
    cells: Vec<Vec<String>>,
    key: Option<Vec<String>>,
}

fn read_csv_table(path: &Path, allow_key: bool) -> Result<CsvTable, DatasetError> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let key_col = if allow_key && headers.iter().last() == Some("key") {
        Some(headers.len() - 1)
    } else {
        None
    };
    let n_cols = headers.len() - 1 - usize::from(key_col.is_some());
    let mut table = CsvTable { ids: Vec::new(), cells: Vec::new(), key: key_col.map(|_| Vec::new()) };
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Parse(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(DatasetError::Parse(format!(
                "{}: row has {} cells, header has {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        table.ids.push(record[0].to_string());
        table.cells.push((1..=n_cols).map(|i| record[i].trim().to_string()).collect());
        if let (Some(col), Some(keys)) = (key_col, table.key.as_mut()) {
            keys.push(record[col].trim().to_string());
        }
    }
    Ok(table)
}

fn parse_float_cells(table: &CsvTable, name: &str) -> Result<Vec<Vec<Option<f64>>>, DatasetError> {
    table
        .cells
        .iter()
        .zip(&table.ids)
        .map(|(row, id)| {
            row.iter()
                .enumerate()
                .map(|(r, cell)| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| {
                            invalid(format!("{name}[{id}][{r}]"), format!("not a number: '{cell}'"))
                        })
                    }
                })
                .collect()
        })
        .collect()
}

fn load_csv_triple(dir: &Path) -> Result<ResponseDataset, DatasetError> {
    let votes_t = read_csv_table(&dir.join("votes.csv"), true)?;
    let preds_t = read_csv_table(&dir.join("predictions.csv"), false)?;
    let conf_path = dir.join("confidences.csv");
    let conf_t = if conf_path.exists() { Some(read_csv_table(&conf_path, false)?) } else { None };

    for other in std::iter::once(&preds_t).chain(conf_t.as_ref()) {
        if other.ids != votes_t.ids {
            return Err(DatasetError::Parse("csv files list different question rows".into()));
        }
    }
    let votes = votes_t
        .cells
        .iter()
        .zip(&votes_t.ids)
        .map(|(row, id)| {
            row.iter()
                .enumerate()
                .map(|(r, cell)| match cell.as_str() {
                    "" => Ok(None),
                    sym => parse_answer(sym).map(Some).ok_or_else(|| {
                        invalid(format!("votes[{id}][{r}]"), format!("unknown vote symbol '{sym}'"))
                    }),
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let predictions = parse_float_cells(&preds_t, "predictions")?;
    let confidences = conf_t.as_ref().map(|t| parse_float_cells(t, "confidences")).transpose()?;
    let key = match &votes_t.key {
        None => None,
        Some(cells) => {
            let parsed = cells
                .iter()
                .zip(&votes_t.ids)
                .map(|(c, id)| match c.as_str() {
                    "" => Ok(None),
                    sym => parse_answer(sym).map(Some).ok_or_else(|| {
                        invalid(format!("key[{id}]"), format!("unknown answer symbol '{sym}'"))
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            collect_key(&votes_t.ids, parsed)?
        }
    };
    ResponseDataset::new(votes_t.ids, votes, predictions, confidences, key)
}

fn save_csv_triple(ds: &ResponseDataset, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let n = ds.n_respondents();
    let header = |with_key: bool| {
        let mut h = vec!["id".to_string()];
        h.extend((0..n).map(|r| format!("r{r}")));
        if with_key {
            h.push("key".into());
        }
        h
    };
    let write = |name: &str, rows: Vec<Vec<String>>, with_key: bool| -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| DatasetError::Parse(e.to_string());
        w.write_record(header(with_key)).map_err(io_err)?;
        for row in rows {
            w.write_record(row).map_err(io_err)?;
        }
        let bytes = w.into_inner().map_err(|e| DatasetError::Parse(e.to_string()))?;
        write_string(&dir.join(name), &String::from_utf8_lossy(&bytes))
    };
    let float_rows = |m: &[Vec<Option<f64>>]| -> Vec<Vec<String>> {
        m.iter()
            .zip(ds.question_ids())
            .map(|(row, id)| {
                std::iter::once(id.clone())
                    .chain(row.iter().map(|v| v.map(format_float).unwrap_or_default()))
                    .collect()
            })
            .collect()
    };
    let vote_rows = ds
        .votes()
        .iter()
        .enumerate()
        .map(|(q, row)| {
            let mut out = vec![ds.question_ids()[q].clone()];
            out.extend(row.iter().map(|v| v.map(|a| a.to_string()).unwrap_or_default()));
            if let Some(key) = ds.answer_key() {
                out.push(key[q].to_string());
            }
            out
        })
        .collect();
    write("votes.csv", vote_rows, ds.answer_key().is_some())?;
    write("predictions.csv", float_rows(ds.predictions()), false)?;
    if let Some(conf) = ds.confidences() {
        write("confidences.csv", float_rows(conf), false)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_pads_to_nine_digits() {
        assert_eq!(format_float(0.7), "0.700000000");
        assert_eq!(format_float(1.0), "1.00000000");
        assert_eq!(format_float(0.0), "0.00000000");
        assert_eq!(format_float(0.123456789123), "0.123456789123");
        assert_eq!(format_float(-0.25), "-0.250000000");
        for v in [0.1, 1.0 / 3.0, 1e-7, 12345.678] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn unknown_vote_symbol_is_rejected() {
        let text = r#"{"questions":[{"id":"q","votes":["A","C"],"predictions":[0.5,null]}]}"#;
        match dataset_from_json(text) {
            Err(DatasetError::Invalid(r)) => assert_eq!(r.errors[0].location, "votes[q][1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partial_key_is_rejected() {
        let text = r#"{"questions":[
            {"id":"q0","votes":["A"],"predictions":[0.5],"key":"A"},
            {"id":"q1","votes":["B"],"predictions":[0.5]}]}"#;
        assert!(matches!(dataset_from_json(text), Err(DatasetError::Invalid(_))));
    }
}
