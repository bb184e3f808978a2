//! Artifact writers: JSON reports with a schema version, RFC-4180 CSV tables.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Version tag carried by every JSON document.
pub const SCHEMA_VERSION: &str = "ctlab/1";

/// A JSON document wrapped with its schema version and producing command.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: &'static str,
    pub command: &'a str,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn to_json<T: Serialize>(command: &str, body: &T) -> String {
    let env = Envelope { schema_version: SCHEMA_VERSION, command, body };
    let mut s = serde_json::to_string_pretty(&env).expect("reports serialize");
    s.push('\n');
    s
}

/// A CSV table, rendered with RFC-4180 quoting.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// Where the artifacts of one run go.
pub struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    pub fn new(out: Option<PathBuf>) -> io::Result<Self> {
        if let Some(dir) = &out {
            fs::create_dir_all(dir)?;
        }
        Ok(Sink { out })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    /// Write `<stem>.json` into the output directory, or print it to stdout.
    pub fn json<T: Serialize>(&self, stem: &str, command: &str, body: &T) -> io::Result<()> {
        let text = to_json(command, body);
        match &self.out {
            Some(dir) => fs::write(dir.join(format!("{stem}.json")), text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Write `<name>.csv` into the output directory; without one, print the
    /// table to stdout only when `primary` is set.
    pub fn csv(&self, table: &Table, primary: bool) -> io::Result<()> {
        match &self.out {
            Some(dir) => fs::write(dir.join(format!("{}.csv", table.name)), table.render()),
            None if primary => {
                print!("{}", table.render());
                Ok(())
            }
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_per_rfc4180() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(["1".to_string(), "x, \"y\"".to_string()]);
        assert_eq!(t.render(), "a,b\r\n1,\"x, \"\"y\"\"\"\r\n");
    }

    #[test]
    fn envelope_carries_schema_version() {
        #[derive(Serialize)]
        struct Body {
            value: u32,
        }
        let s = to_json("demo", &Body { value: 3 });
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["command"], "demo");
        assert_eq!(v["value"], 3);
    }
}
