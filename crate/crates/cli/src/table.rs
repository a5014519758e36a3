//! CSV output with a leading `#` schema comment.

use std::io::Write;

use crate::error::CliError;

pub struct TableWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TableWriter<W> {
    /// Writes `# <comment>` followed by the header row.
    pub fn new(mut sink: W, comment: &str, header: &[&str]) -> Result<Self, CliError> {
        write!(sink, "# {comment}\r\n")?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(sink);
        inner.write_record(header)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.inner.write_record(fields)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, CliError> {
        self.inner
            .into_inner()
            .map_err(|e| CliError::Io(e.into_error()))
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
