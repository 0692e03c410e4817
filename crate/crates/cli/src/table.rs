//! CSV tables: one header row, then numeric rows written with 17
//! significant digits so that parsing a value back gives the same `f64`.

use std::io::{Read, Write};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        let mut buf = Vec::with_capacity(self.header.len());
        for row in &self.rows {
            buf.clear();
            buf.extend(row.iter().map(|&x| format_value(x)));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<(), CliError> {
        let f = std::fs::File::create(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.write(std::io::BufWriter::new(f))
    }
}

/// `x` with 17 significant digits.
pub fn format_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Header and rows of a CSV document.
pub fn read<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| CliError::Io(format!("bad number `{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
