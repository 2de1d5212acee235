//! Instance-file formats and report rendering for the `fpdm` binary; a
//! library target so integration tests can drive the same parsers and
//! printers.

pub mod formats;
pub mod report;
