//! Machine-readable report emission.
//!
//! Reports are JSON with every float printed in scientific notation with 17
//! significant digits, enough to reproduce the exact f64 bit pattern on
//! re-parse. Regression tooling can therefore compare report files byte for
//! byte.

use std::io::{self, Write};

use bimc::estimators::EstimateReport;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::config::SCHEMA_VERSION;

/// Pretty JSON with exact floats: `write_f64` is the only formatting change
/// from the stock pretty printer.
struct SigFigFormatter<'a>(PrettyFormatter<'a>);

impl Default for SigFigFormatter<'_> {
    fn default() -> Self {
        Self(PrettyFormatter::new())
    }
}

impl Formatter for SigFigFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// The versioned envelope around a single estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliReport {
    pub schema_version: u32,
    pub report: EstimateReport,
}

impl CliReport {
    pub fn new(report: EstimateReport) -> Self {
        Self { schema_version: SCHEMA_VERSION, report }
    }
}

/// The versioned envelope around a failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliErrorReport {
    pub schema_version: u32,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub exit_code: u8,
    pub message: String,
}

impl CliErrorReport {
    pub fn new(exit_code: u8, message: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            error: ErrorBody { exit_code, message: message.into() },
        }
    }
}

/// Serialize any value in the report dialect, with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigFigFormatter::default());
    value.serialize(&mut ser).expect("report serializes");
    out.push(b'\n');
    String::from_utf8(out).expect("report is UTF-8")
}

/// Format one float the way report files do.
pub fn sig(value: f64) -> String {
    format!("{value:.16e}")
}
