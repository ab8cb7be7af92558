use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Corpus, CorpusError, CorpusKind, CorpusRecord, SkippedRow};

/// BIRD prediction dumps append the database id after this marker.
const BIRD_DB_MARKER: &str = "\t----- bird -----\t";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Container {
    /// A JSON array of objects, or an object mapping ids to SQL strings.
    Json,
    JsonLines,
    /// CSV with a header row.
    Csv,
    /// Plain text, one SQL query per line.
    Lines,
}

impl Container {
    pub fn from_extension(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "json" => Some(Container::Json),
            "jsonl" | "ndjson" => Some(Container::JsonLines),
            "csv" => Some(Container::Csv),
            "sql" | "txt" => Some(Container::Lines),
            _ => None,
        }
    }
}

impl FromStr for Container {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Container::Json),
            "jsonl" | "ndjson" => Ok(Container::JsonLines),
            "csv" => Ok(Container::Csv),
            "lines" | "sql" | "txt" => Ok(Container::Lines),
            other => Err(format!("unknown input format '{other}'")),
        }
    }
}

/// Field mapping for one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    /// `None` picks the container from the file extension.
    pub container: Option<Container>,
    pub sql_field: String,
    /// Missing question fields load as empty strings.
    pub question_field: String,
    /// When set, every row must carry it.
    pub group_field: Option<String>,
    pub skip_bad_rows: bool,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            container: None,
            sql_field: "sql".to_string(),
            question_field: "question".to_string(),
            group_field: None,
            skip_bad_rows: false,
        }
    }
}

pub fn load_corpus(
    path: &Path,
    spec: &FormatSpec,
    kind: CorpusKind,
) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let container = spec
        .container
        .or_else(|| Container::from_extension(path))
        .unwrap_or(Container::JsonLines);
    parse_corpus(&text, container, spec, &path.display().to_string(), kind)
}

/// Parses corpus text already in memory.
pub fn parse_corpus(
    text: &str,
    container: Container,
    spec: &FormatSpec,
    name: &str,
    kind: CorpusKind,
) -> Result<Corpus, CorpusError> {
    let rows = match container {
        Container::Json => json_rows(text)?,
        Container::JsonLines => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<Value>(l).map_err(|e| (i + 1, format!("invalid JSON: {e}")))
            })
            .collect(),
        Container::Csv => csv_rows(text)?,
        Container::Lines => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let mut m = Map::new();
                m.insert(spec.sql_field.clone(), Value::String(l.trim().to_string()));
                Ok(Value::Object(m))
            })
            .collect(),
    };

    let mut records = Vec::with_capacity(rows.len());
    let mut skipped = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        match row.and_then(|v| to_record(v, spec).map_err(|m| (i + 1, m))) {
            Ok(r) => records.push(r),
            Err((row, message)) if spec.skip_bad_rows => {
                log::warn!("{name}: skipping row {row}: {message}");
                skipped.push(SkippedRow { row, message });
            }
            Err((row, message)) => return Err(CorpusError::Format { row, message }),
        }
    }
    Ok(Corpus::new(name, kind, records)?.with_skipped(skipped))
}

type RowResult = Result<Value, (usize, String)>;

fn json_rows(text: &str) -> Result<Vec<RowResult>, CorpusError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CorpusError::Container {
        container: "JSON".to_string(),
        message: e.to_string(),
    })?;
    match value {
        Value::Array(items) => Ok(items.into_iter().map(Ok).collect()),
        // {"0": "SELECT ...", "1": "..."}: prediction dump keyed by question id
        Value::Object(map) => Ok(map
            .into_iter()
            .map(|(id, v)| {
                let Value::String(s) = v else {
                    return Err((0, format!("entry '{id}' is not a string")));
                };
                let mut row = Map::new();
                row.insert("id".to_string(), Value::String(id));
                match s.split_once(BIRD_DB_MARKER) {
                    Some((sql, db)) => {
                        row.insert("sql".to_string(), Value::String(sql.to_string()));
                        row.insert("db_id".to_string(), Value::String(db.trim().to_string()));
                    }
                    None => {
                        row.insert("sql".to_string(), Value::String(s));
                    }
                }
                Ok(Value::Object(row))
            })
            .collect()),
        _ => Err(CorpusError::Container {
            container: "JSON".to_string(),
            message: "expected an array of objects".to_string(),
        }),
    }
}

fn csv_rows(text: &str) -> Result<Vec<RowResult>, CorpusError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Container {
            container: "CSV".to_string(),
            message: e.to_string(),
        })?
        .clone();
    Ok(reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| (i + 1, e.to_string()))?;
            let map: Map<String, Value> = headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), Value::String(v.to_string())))
                .collect();
            Ok(Value::Object(map))
        })
        .collect())
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn to_record(row: Value, spec: &FormatSpec) -> Result<CorpusRecord, String> {
    let Value::Object(mut obj) = row else {
        return Err("row is not an object".to_string());
    };
    let sql = match obj.remove(&spec.sql_field) {
        Some(Value::String(s)) if !s.trim().is_empty() => s,
        Some(Value::String(_)) => return Err(format!("field '{}' is empty", spec.sql_field)),
        Some(_) => return Err(format!("field '{}' is not a string", spec.sql_field)),
        None => return Err(format!("missing field '{}'", spec.sql_field)),
    };
    let question = obj
        .remove(&spec.question_field)
        .and_then(|v| scalar(&v))
        .unwrap_or_default();
    let group_id = match &spec.group_field {
        Some(field) => obj
            .remove(field)
            .as_ref()
            .and_then(scalar)
            .ok_or_else(|| format!("missing field '{field}'"))?,
        None => String::new(),
    };
    Ok(CorpusRecord {
        question,
        sql,
        group_id,
        meta: obj.into_iter().collect(),
    })
}

fn to_row(record: &CorpusRecord, spec: &FormatSpec) -> BTreeMap<String, Value> {
    let mut row = record.meta.clone();
    row.insert(spec.sql_field.clone(), Value::String(record.sql.clone()));
    if !record.question.is_empty() {
        row.insert(
            spec.question_field.clone(),
            Value::String(record.question.clone()),
        );
    }
    if let Some(field) = &spec.group_field {
        row.insert(field.clone(), Value::String(record.group_id.clone()));
    }
    row
}

/// Serializes a corpus back to `container`, using the spec's field names.
/// Keys are written in sorted order.
pub fn write_corpus(
    corpus: &Corpus,
    container: Container,
    spec: &FormatSpec,
) -> Result<String, CorpusError> {
    let rows: Vec<_> = corpus.records().iter().map(|r| to_row(r, spec)).collect();
    let out = match container {
        Container::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            s
        }
        Container::JsonLines => rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
            .collect(),
        Container::Lines => corpus
            .records()
            .iter()
            .map(|r| r.sql.replace('\n', " ") + "\n")
            .collect(),
        Container::Csv => {
            let header: BTreeSet<&String> = rows.iter().flat_map(|r| r.keys()).collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| CorpusError::Container {
                container: "CSV".to_string(),
                message: e.to_string(),
            };
            w.write_record(header.iter().map(|h| h.as_str()))
                .map_err(csv_err)?;
            for r in &rows {
                w.write_record(header.iter().map(|h| match r.get(*h) {
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                    None => String::new(),
                }))
                .map_err(csv_err)?;
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 input")
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bird_spec() -> FormatSpec {
        FormatSpec {
            sql_field: "SQL".to_string(),
            group_field: Some("db_id".to_string()),
            ..FormatSpec::default()
        }
    }

    #[test]
    fn json_lines_with_field_mapping() {
        let text = r#"{"question": "q1", "SQL": "SELECT 1", "db_id": "a"}
{"question": "q2", "SQL": "SELECT 2", "db_id": "a", "evidence": "x"}

{"question": "q3", "SQL": "SELECT 3", "db_id": "b"}
"#;
        let c = parse_corpus(
            text,
            Container::JsonLines,
            &bird_spec(),
            "dev",
            CorpusKind::Target,
        )
        .unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.records()[1].question, "q2");
        assert_eq!(c.records()[2].group_id, "b");
        assert_eq!(c.records()[1].meta["evidence"], Value::String("x".into()));
    }

    #[test]
    fn csv_with_header() {
        let mut text = String::from("sql,domain\n");
        for i in 0..100 {
            text.push_str(&format!(
                "\"SELECT a, b FROM t WHERE x = {i}\",d{}\n",
                i % 7
            ));
        }
        let spec = FormatSpec {
            group_field: Some("domain".to_string()),
            ..FormatSpec::default()
        };
        let c = parse_corpus(&text, Container::Csv, &spec, "g", CorpusKind::Train).unwrap();
        assert_eq!(c.len(), 100);
        let groups: BTreeSet<_> = c.records().iter().map(|r| r.group_id.as_str()).collect();
        assert_eq!(groups.len(), 7);
    }

    #[test]
    fn missing_sql_names_the_row() {
        let text = r#"[{"sql": "SELECT 1"}, {"query": "SELECT 2"}, {"sql": "SELECT 3"}]"#;
        let err = parse_corpus(
            text,
            Container::Json,
            &FormatSpec::default(),
            "x",
            CorpusKind::Train,
        )
        .unwrap_err();
        match err {
            CorpusError::Format { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("sql"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skip_bad_rows_counts() {
        let text = "{\"sql\": \"SELECT 1\"}\nnot json\n{\"sql\": 5}\n{\"sql\": \"SELECT 2\"}\n";
        let spec = FormatSpec {
            skip_bad_rows: true,
            ..FormatSpec::default()
        };
        let c = parse_corpus(text, Container::JsonLines, &spec, "x", CorpusKind::Train).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(
            c.skipped().iter().map(|s| s.row).collect::<Vec<_>>(),
            [2, 3]
        );
    }

    #[test]
    fn bird_prediction_dump() {
        let text = r#"{"0": "SELECT a FROM t\t----- bird -----\tcalifornia_schools", "1": "SELECT b FROM u\t----- bird -----\tfinancial"}"#;
        let spec = FormatSpec {
            group_field: Some("db_id".to_string()),
            ..FormatSpec::default()
        };
        let c = parse_corpus(text, Container::Json, &spec, "p", CorpusKind::Prediction).unwrap();
        assert_eq!(c.records()[0].sql, "SELECT a FROM t");
        assert_eq!(c.records()[1].group_id, "financial");
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = parse_corpus(
            "",
            Container::Lines,
            &FormatSpec::default(),
            "e",
            CorpusKind::Train,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Empty(_)));
    }

    #[test]
    fn write_then_read_back() {
        let text = r#"[{"SQL": "SELECT 1", "db_id": "a", "question": "q", "n": 3}]"#;
        let c = parse_corpus(text, Container::Json, &bird_spec(), "x", CorpusKind::Train).unwrap();
        for container in [Container::Json, Container::JsonLines, Container::Csv] {
            let out = write_corpus(&c, container, &bird_spec()).unwrap();
            let back = parse_corpus(&out, container, &bird_spec(), "x", CorpusKind::Train).unwrap();
            assert_eq!(back.records()[0].sql, "SELECT 1");
            assert_eq!(back.records()[0].group_id, "a");
            assert_eq!(back.records()[0].question, "q");
        }
    }
}
