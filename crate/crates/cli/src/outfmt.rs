//! Output sink: CSV at full precision (17 significant digits) or JSON,
//! to stdout or a file, assembled deterministically.

use std::fs::File;
use std::io::{self, BufWriter, Write};

pub enum Sink {
    Stdout(BufWriter<io::Stdout>),
    File(BufWriter<File>),
}

impl Sink {
    pub fn open(path: Option<&str>) -> io::Result<Self> {
        Ok(match path {
            None => Sink::Stdout(BufWriter::new(io::stdout())),
            Some(p) => Sink::File(BufWriter::new(File::create(p)?)),
        })
    }

    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Stdout(w) => w,
            Sink::File(w) => w,
        }
    }

    pub fn line(&mut self, text: &str) {
        let _ = writeln!(self.writer(), "{text}");
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.writer(), "# {text}");
    }

    pub fn csv_header(&mut self, cols: &[&str]) {
        let _ = writeln!(self.writer(), "{}", cols.join(","));
    }

    pub fn csv_row(&mut self, vals: &[f64]) {
        let row = vals
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(self.writer(), "{row}");
    }

    pub fn json(&mut self, value: &serde_json::Value) {
        let _ = writeln!(self.writer(), "{}", serde_json::to_string_pretty(value).unwrap());
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.writer().flush()
    }
}
