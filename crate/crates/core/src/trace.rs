//! Per-iteration convergence traces.
//!
//! CSV schema: `iter,gap,radius,alpha,event`.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEvent {
    /// A pivot step was taken.
    Pivot,
    /// The iterate admits no pivot at the current radius.
    Witness,
    /// The radius was enlarged after a witness.
    Radius,
    /// Terminal event of a run.
    Done,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceEvent::Pivot => "pivot",
            TraceEvent::Witness => "witness",
            TraceEvent::Radius => "radius",
            TraceEvent::Done => "done",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: u64,
    /// `|p - p'|` after the event.
    pub gap: f64,
    /// Radius in effect after the event.
    pub radius: f64,
    /// Step size for pivot events, 0 otherwise.
    pub alpha: f64,
    pub event: TraceEvent,
}

pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord);
}

/// Discards every record.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTrace;

impl TraceSink for NoTrace {
    #[inline]
    fn record(&mut self, _rec: &TraceRecord) {}
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) {
        self.push(*rec);
    }
}

impl<T: TraceSink + ?Sized> TraceSink for &mut T {
    fn record(&mut self, rec: &TraceRecord) {
        (**self).record(rec)
    }
}

/// Streams records as CSV. Write errors are latched and surfaced by
/// [`CsvTrace::finish`].
pub struct CsvTrace<W: Write> {
    writer: csv::Writer<W>,
    error: Option<csv::Error>,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(inner: W) -> Self {
        CsvTrace {
            writer: csv::Writer::from_writer(inner),
            error: None,
        }
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.writer.flush().map_err(csv::Error::from)?;
        self.writer
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()).into())
    }
}

impl<W: Write> TraceSink for CsvTrace<W> {
    fn record(&mut self, rec: &TraceRecord) {
        if self.error.is_none() {
            if let Err(e) = self.writer.serialize(rec) {
                self.error = Some(e);
            }
        }
    }
}
