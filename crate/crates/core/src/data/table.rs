use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::FeatureKind;
use crate::error::{Error, Result};

/// Returns true for the tokens treated as a missing cell.
pub fn is_missing_token(token: &str) -> bool {
    let t = token.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("null")
}

/// Parses an event indicator cell.
pub fn parse_bool(token: &str) -> Option<bool> {
    match token.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "t" | "yes" => Some(true),
        "0" | "0.0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

/// A single column. Numeric when every non-missing cell parses as a number.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Text(v) => v[row].is_none(),
        }
    }

    pub fn n_missing(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    /// Builds a column from raw tokens, typing it numeric when possible.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Column {
        let mut numeric = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let tok = tok.as_ref();
            if is_missing_token(tok) {
                numeric.push(None);
                continue;
            }
            match tok.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => numeric.push(Some(v)),
                _ => {
                    return Column::Text(
                        tokens
                            .iter()
                            .map(|t| {
                                let t = t.as_ref();
                                (!is_missing_token(t)).then(|| t.trim().to_string())
                            })
                            .collect(),
                    )
                }
            }
        }
        Column::Numeric(numeric)
    }

    /// Coerces to a numeric column; unparseable tokens are an error.
    pub fn to_numeric(&self, name: &str) -> Result<Column> {
        match self {
            Column::Numeric(_) => Ok(self.clone()),
            Column::Text(cells) => cells
                .iter()
                .map(|c| match c {
                    None => Ok(None),
                    Some(s) => match s.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(Some(v)),
                        _ => Err(Error::Parse {
                            column: name.to_string(),
                            token: s.clone(),
                        }),
                    },
                })
                .collect::<Result<Vec<_>>>()
                .map(Column::Numeric),
        }
    }

    /// Canonical category key for a cell; numbers use their shortest round-trip form.
    pub fn category_key(&self, row: usize) -> Option<String> {
        match self {
            Column::Numeric(v) => v[row].map(|x| format!("{x}")),
            Column::Text(v) => v[row].clone(),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl Table {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Table> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::DuplicateColumn(n.clone()));
            }
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Dimension("columns differ in length".into()));
            }
        }
        Ok(Table { names, columns })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .delimiter(b',')
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for record in rdr.records() {
            let record = record?;
            if record.len() != names.len() {
                return Err(Error::Data(format!(
                    "row has {} fields, header has {}",
                    record.len(),
                    names.len()
                )));
            }
            for (col, field) in raw.iter_mut().zip(record.iter()) {
                col.push(field.to_string());
            }
        }
        let columns = raw.iter().map(|c| Column::from_tokens(c)).collect();
        Table::new(names, columns)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Table> {
        Table::read_csv(std::fs::File::open(path)?)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.position(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Table restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
                Column::Text(v) => Column::Text(rows.iter().map(|&r| v[r].clone()).collect()),
            })
            .collect();
        Table {
            names: self.names.clone(),
            columns,
        }
    }

    /// Table without the named columns.
    pub fn without(&self, drop: &[&str]) -> Table {
        let (names, columns) = self
            .names
            .iter()
            .zip(&self.columns)
            .filter(|(n, _)| !drop.contains(&n.as_str()))
            .map(|(n, c)| (n.clone(), c.clone()))
            .unzip();
        Table { names, columns }
    }
}

/// Optional JSON override for column kinds and label column roles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaOverride {
    #[serde(default)]
    pub columns: BTreeMap<String, FeatureKind>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub time: Option<String>,
    #[serde(default)]
    pub event: Option<String>,
    #[serde(default)]
    pub ignore: Vec<String>,
}

impl SchemaOverride {
    pub fn from_path(path: impl AsRef<Path>) -> Result<SchemaOverride> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("schema override: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tokens() {
        for t in ["", " ", "NA", "na", "NaN", "nan", "null", "NULL"] {
            assert!(is_missing_token(t), "{t:?}");
        }
        assert!(!is_missing_token("0"));
        assert!(!is_missing_token("none"));
    }

    #[test]
    fn csv_typing_and_quoting() {
        let data = "a,b,c\n1,\"x, y\",NA\n2.5,z,3\n";
        let t = Table::read_csv(data.as_bytes()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.column("a").unwrap(), &Column::Numeric(vec![Some(1.0), Some(2.5)]));
        assert_eq!(
            t.column("b").unwrap(),
            &Column::Text(vec![Some("x, y".into()), Some("z".into())])
        );
        assert_eq!(t.column("c").unwrap(), &Column::Numeric(vec![None, Some(3.0)]));
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = Table::read_csv("a,a\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(ref n) if n == "a"));
    }

    #[test]
    fn forced_numeric_rejects_garbage() {
        let c = Column::from_tokens(&["1", "abc", ""]);
        let err = c.to_numeric("x").unwrap_err();
        assert!(matches!(err, Error::Parse { ref token, .. } if token == "abc"));
    }

    #[test]
    fn numeric_category_keys_are_canonical() {
        let c = Column::from_tokens(&["1.0", "0", "2.50"]);
        assert_eq!(c.category_key(0).as_deref(), Some("1"));
        assert_eq!(c.category_key(1).as_deref(), Some("0"));
        assert_eq!(c.category_key(2).as_deref(), Some("2.5"));
    }
}
