//! Reports are named tables of flat records. JSON puts each table under
//! its name; CSV writes one block per table, separated by a blank line,
//! with the table name as the first column. Field order is fixed by the
//! producing command, so both encodings are stable across runs.

use serde_json::{Map, Value};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub records: Vec<Map<String, Value>>,
}

impl Table {
    pub fn new(name: &str) -> Self {
        Table { name: name.to_string(), records: Vec::new() }
    }

    /// Appends a record. `record` must be a JSON object.
    pub fn push(&mut self, record: Value) {
        match record {
            Value::Object(map) => self.records.push(map),
            other => panic!("table records are objects, got {other}"),
        }
    }

    /// Column names, taken from the first record.
    pub fn columns(&self) -> Vec<&str> {
        self.records.first().map(|r| r.keys().map(String::as_str).collect()).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub tables: Vec<Table>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// How a value appears in a CSV cell: strings verbatim, null as empty,
/// arrays and objects as compact JSON.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.to_string(), tables: Vec::new() }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut root = Map::new();
        root.insert("command".into(), Value::String(self.command.clone()));
        for t in &self.tables {
            let records = t.records.iter().cloned().map(Value::Object).collect();
            root.insert(t.name.clone(), Value::Array(records));
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut blocks = Vec::new();
        for t in &self.tables {
            let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
            let cols = t.columns();
            let mut header = vec!["table"];
            header.extend(&cols);
            w.write_record(&header).expect("writes to memory");
            for r in &t.records {
                let mut row = vec![t.name.clone()];
                row.extend(cols.iter().map(|c| r.get(*c).map(cell).unwrap_or_default()));
                w.write_record(&row).expect("writes to memory");
            }
            blocks.push(String::from_utf8(w.into_inner().expect("flushes to memory")).expect("utf-8 cells"));
        }
        blocks.join("\n")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}
