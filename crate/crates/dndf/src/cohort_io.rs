//! Comma-separated cohort files.

use std::io::{Read, Write};
use std::path::Path;

use dndf_core::dataset::{Cohort, Provenance, RecordLayout};

use crate::error::{Result, RunError};

pub fn load_cohort(path: &Path) -> Result<Cohort> {
    let file = std::fs::File::open(path).map_err(RunError::io(path))?;
    read_cohort(file, path)
}

/// Reads a cohort from any reader; `label` names the source in errors.
pub fn read_cohort(reader: impl Read, label: &Path) -> Result<Cohort> {
    let csv_err = |source| RunError::Csv { path: label.to_path_buf(), source };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let layout = RecordLayout::from_header(&header)?;
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let fields: Vec<&str> = row.iter().collect();
        records.push(layout.parse_row(&fields, i + 1)?);
    }
    Ok(Cohort::new(records, Provenance::Loaded, None)?)
}

/// Required columns first, then extra symptoms alphabetically.
pub fn write_cohort_to(c: &Cohort, writer: impl Write) -> Result<()> {
    let layout = RecordLayout::for_extras(c.extra_symptom_names());
    let mut w = csv::Writer::from_writer(writer);
    let as_io = |e: csv::Error| RunError::Csv { path: "<output>".into(), source: e };
    w.write_record(layout.header()).map_err(as_io)?;
    for r in c.records() {
        w.write_record(layout.format_row(r)?).map_err(as_io)?;
    }
    w.flush().map_err(RunError::io("<output>"))?;
    Ok(())
}

pub fn cohort_to_bytes(c: &Cohort) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_cohort_to(c, &mut buf)?;
    Ok(buf)
}

pub fn write_cohort(c: &Cohort, path: &Path) -> Result<()> {
    let bytes = cohort_to_bytes(c)?;
    std::fs::write(path, bytes).map_err(RunError::io(path))
}
