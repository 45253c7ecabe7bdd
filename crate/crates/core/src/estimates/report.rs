use std::io::Write;

use crate::error::Result;

/// Version stamped into every JSON and CSV report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One CSV row per report.
pub trait CsvRecord {
    fn header() -> Vec<&'static str>;
    fn record(&self) -> Vec<String>;
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn fmt_o(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// Writes `schema_version` as the first column of a header plus one line per record.
pub fn write_csv<T: CsvRecord>(records: &[T], mut out: impl Write) -> Result<()> {
    let mut header = vec!["schema_version"];
    header.extend(T::header());
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![REPORT_SCHEMA_VERSION.to_string()];
        row.extend(r.record());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
