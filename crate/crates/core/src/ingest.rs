//! CSV ingestion and operator categorization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header names of the three columns the pipeline reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub operator: String,
    pub narrative: String,
    pub date: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            operator: "Operator".to_string(),
            narrative: "Summary".to_string(),
            date: "Date".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorCategory {
    Military,
    Commercial,
    Private,
    Unknown,
}

impl OperatorCategory {
    pub const ALL: [OperatorCategory; 4] = [
        OperatorCategory::Military,
        OperatorCategory::Commercial,
        OperatorCategory::Private,
        OperatorCategory::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorCategory::Military => "military",
            OperatorCategory::Commercial => "commercial",
            OperatorCategory::Private => "private",
            OperatorCategory::Unknown => "unknown",
        }
    }
}

impl fmt::Display for OperatorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "military" => Ok(OperatorCategory::Military),
            "commercial" => Ok(OperatorCategory::Commercial),
            "private" => Ok(OperatorCategory::Private),
            "unknown" => Ok(OperatorCategory::Unknown),
            other => Err(Error::invalid(format!("unknown operator category `{other}`"))),
        }
    }
}

/// Keyword lists for [`categorize_operator`]. Matching is case-insensitive
/// substring search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRules {
    military_keywords: Vec<String>,
    private_keywords: Vec<String>,
}

impl CategoryRules {
    pub fn new<S: AsRef<str>>(military: &[S], private: &[S]) -> Result<Self> {
        let norm = |list: &[S], which: &str| -> Result<Vec<String>> {
            let out: Vec<String> = list
                .iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect();
            if out.is_empty() {
                return Err(Error::Config(format!("{which} keyword list is empty")));
            }
            Ok(out)
        };
        Ok(CategoryRules {
            military_keywords: norm(military, "military")?,
            private_keywords: norm(private, "private")?,
        })
    }

    pub fn military_keywords(&self) -> &[String] {
        &self.military_keywords
    }

    pub fn private_keywords(&self) -> &[String] {
        &self.private_keywords
    }
}

impl Default for CategoryRules {
    fn default() -> Self {
        CategoryRules::new(
            &["military", "air force", "navy", "army", "marine", "royal air"],
            &["private"],
        )
        .expect("default rules are non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccidentRecord {
    pub record_id: usize,
    pub date: Option<NaiveDate>,
    pub operator_raw: String,
    pub narrative: String,
    pub category: OperatorCategory,
}

/// Military > Private > Commercial; blank operators are Unknown.
pub fn categorize_operator(operator_raw: &str, rules: &CategoryRules) -> OperatorCategory {
    let op = operator_raw.to_lowercase();
    if rules.military_keywords.iter().any(|k| op.contains(k.as_str())) {
        OperatorCategory::Military
    } else if rules.private_keywords.iter().any(|k| op.contains(k.as_str())) {
        OperatorCategory::Private
    } else if !op.trim().is_empty() {
        OperatorCategory::Commercial
    } else {
        OperatorCategory::Unknown
    }
}

const DATE_FORMATS: &[&str] = &["%m/%d/%Y", "%Y-%m-%d", "%d/%m/%Y", "%m/%d/%y", "%Y/%m/%d"];

/// Lenient date parsing; `None` for anything unrecognised.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    // Socrata exports sometimes carry a timestamp suffix.
    let day = raw.split(['T', ' ']).next().unwrap_or(raw);
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(day, fmt).ok())
}

/// Parses records with the default [`CategoryRules`].
pub fn parse_records<R: Read>(source: R, columns: &ColumnMap) -> Result<Vec<AccidentRecord>> {
    parse_records_with(source, columns, &CategoryRules::default())
}

/// Parses a header-first, comma-delimited CSV into one record per data row.
///
/// Rows with the wrong number of fields are rejected with their 1-based data
/// row number. Unparseable dates are kept as `None`.
pub fn parse_records_with<R: Read>(
    source: R,
    columns: &ColumnMap,
    rules: &CategoryRules,
) -> Result<Vec<AccidentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let op_col = find(&columns.operator)?;
    let narrative_col = find(&columns.narrative)?;
    let date_col = find(&columns.date)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Csv {
            row: i + 1,
            message: match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => format!("expected {expected_len} fields, found {len}"),
                _ => e.to_string(),
            },
        })?;
        let operator_raw = row.get(op_col).unwrap_or_default().to_string();
        records.push(AccidentRecord {
            record_id: i,
            date: parse_date(row.get(date_col).unwrap_or_default()),
            category: categorize_operator(&operator_raw, rules),
            operator_raw,
            narrative: row.get(narrative_col).unwrap_or_default().to_string(),
        });
    }
    Ok(records)
}

/// Writes records back out using the given column names (dates as `MM/DD/YYYY`).
pub fn write_records<W: Write>(
    sink: W,
    records: &[AccidentRecord],
    columns: &ColumnMap,
) -> Result<()> {
    let to_err = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([&columns.date, &columns.operator, &columns.narrative])
        .map_err(to_err)?;
    for r in records {
        let date = r
            .date
            .map(|d| d.format("%m/%d/%Y").to_string())
            .unwrap_or_default();
        w.write_record([date.as_str(), &r.operator_raw, &r.narrative])
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv sink>", e))
}

/// Groups records by category. All four buckets are always present.
pub fn partition_by_category(
    records: Vec<AccidentRecord>,
) -> BTreeMap<OperatorCategory, Vec<AccidentRecord>> {
    let mut buckets: BTreeMap<_, Vec<_>> =
        OperatorCategory::ALL.iter().map(|&c| (c, Vec::new())).collect();
    for r in records {
        buckets.entry(r.category).or_default().push(r);
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Vec<AccidentRecord>> {
        parse_records(s.as_bytes(), &ColumnMap::default())
    }

    #[test]
    fn single_military_row() {
        let csv = "Date,Operator,Summary\n09/17/1908,Military - U.S. Army,\"During a demonstration flight, the plane nose-dived.\"\n";
        let recs = parse(csv).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].operator_raw, "Military - U.S. Army");
        assert_eq!(recs[0].category, OperatorCategory::Military);
        assert_eq!(recs[0].date, NaiveDate::from_ymd_opt(1908, 9, 17));
    }

    #[test]
    fn header_only_gives_no_records() {
        assert!(parse("Date,Operator,Summary\n").unwrap().is_empty());
    }

    #[test]
    fn empty_summary_is_kept() {
        let recs = parse("Date,Operator,Summary\n01/02/1950,Private,\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].narrative, "");
    }

    #[test]
    fn bad_date_is_tolerated() {
        let recs = parse("Date,Operator,Summary\nsometime,Private,x\n").unwrap();
        assert_eq!(recs[0].date, None);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse("Date,Operator,Narrative\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "Summary"), "{err}");
    }

    #[test]
    fn ragged_row_reports_row_number() {
        let err = parse("Date,Operator,Summary\n1/1/1950,A,b\n1/1/1950,A\n").unwrap_err();
        assert!(matches!(err, Error::Csv { row: 2, .. }), "{err}");
    }

    #[test]
    fn column_map_override() {
        let cols = ColumnMap {
            operator: "op".into(),
            narrative: "text".into(),
            date: "when".into(),
        };
        let recs = parse_records("when,text,op\n,engine fire,Navy\n".as_bytes(), &cols).unwrap();
        assert_eq!(recs[0].category, OperatorCategory::Military);
        assert_eq!(recs[0].narrative, "engine fire");
    }

    #[test]
    fn categorization_examples() {
        let rules = CategoryRules::default();
        assert_eq!(categorize_operator("Military - U.S. Navy", &rules), OperatorCategory::Military);
        assert_eq!(categorize_operator("Private", &rules), OperatorCategory::Private);
        assert_eq!(
            categorize_operator("Pan American World Airways", &rules),
            OperatorCategory::Commercial
        );
        assert_eq!(categorize_operator("   ", &rules), OperatorCategory::Unknown);
        assert_eq!(
            categorize_operator("Private charter - Army contract", &rules),
            OperatorCategory::Military
        );
    }

    #[test]
    fn empty_keyword_list_rejected() {
        let empty: [&str; 0] = [];
        assert!(CategoryRules::new(&empty, &["private"]).is_err());
    }

    fn rec(id: usize, category: OperatorCategory) -> AccidentRecord {
        AccidentRecord {
            record_id: id,
            date: None,
            operator_raw: String::new(),
            narrative: String::new(),
            category,
        }
    }

    #[test]
    fn partition_examples() {
        let recs = vec![
            rec(0, OperatorCategory::Military),
            rec(1, OperatorCategory::Commercial),
            rec(2, OperatorCategory::Private),
        ];
        let parts = partition_by_category(recs);
        for c in [OperatorCategory::Military, OperatorCategory::Commercial, OperatorCategory::Private] {
            assert_eq!(parts[&c].len(), 1);
        }
        assert!(parts[&OperatorCategory::Unknown].is_empty());

        let parts = partition_by_category((0..4).map(|i| rec(i, OperatorCategory::Unknown)).collect());
        assert_eq!(parts[&OperatorCategory::Unknown].len(), 4);

        let parts = partition_by_category(Vec::new());
        assert!(parts.values().all(Vec::is_empty));
        assert_eq!(parts.len(), 4);
    }

    fn category() -> impl Strategy<Value = OperatorCategory> {
        prop::sample::select(OperatorCategory::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn partition_is_total(cats in prop::collection::vec(category(), 0..50)) {
            let n = cats.len();
            let recs = cats.into_iter().enumerate().map(|(i, c)| rec(i, c)).collect();
            let parts = partition_by_category(recs);
            prop_assert_eq!(parts.values().map(Vec::len).sum::<usize>(), n);
        }

        #[test]
        fn categorization_is_deterministic(op in ".{0,40}") {
            let rules = CategoryRules::default();
            prop_assert_eq!(categorize_operator(&op, &rules), categorize_operator(&op, &rules));
        }

        #[test]
        fn csv_round_trip(
            rows in prop::collection::vec(
                ("[A-Za-z ,.\"-]{0,20}", "[A-Za-z0-9 ,.\"'\n-]{0,60}", prop::option::of(0i64..40000)),
                0..8,
            )
        ) {
            let base = NaiveDate::from_ymd_opt(1908, 1, 1).unwrap();
            let rules = CategoryRules::default();
            let records: Vec<_> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (op, text, days))| AccidentRecord {
                    record_id: i,
                    date: days.map(|d| base + chrono::Duration::days(d)),
                    category: categorize_operator(&op, &rules),
                    operator_raw: op,
                    narrative: text,
                })
                .collect();
            let cols = ColumnMap::default();
            let mut buf = Vec::new();
            write_records(&mut buf, &records, &cols).unwrap();
            let back = parse_records_with(buf.as_slice(), &cols, &rules).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
