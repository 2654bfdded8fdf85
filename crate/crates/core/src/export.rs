//! CSV writers for traces, gain sweeps and comparison tables.
//!
//! Numbers use Rust's shortest round-trip formatting, so identical inputs give
//! byte-identical files.

use std::io::Write;

use crate::comparison::GainRow;
use crate::scalar::Scalar;
use crate::simulator::{CompareRow, Trace};

pub const TRACE_HEADER: [&str; 10] = [
    "t", "mode", "i_l1", "i_lk", "i_lm", "v_c1", "v_c2", "v_c3", "v_c4", "v_o",
];
pub const GAINS_HEADER: [&str; 3] = ["duty", "topology", "gain"];
pub const COMPARE_HEADER: [&str; 4] = ["quantity", "analytic", "measured", "rel_error"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn num<T: Scalar>(v: T) -> String {
    v.as_f64().to_string()
}

/// One row per sample. `mode` is 1..=5, or 0 for a conduction pattern
/// outside the five modes. Events appear as two rows at the same time.
pub fn write_trace_csv<W: Write, T: Scalar>(w: W, trace: &Trace<T>) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(TRACE_HEADER)?;
    for s in &trace.samples {
        let x = &s.state;
        out.write_record([
            num(x.t),
            s.mode.number().to_string(),
            num(x.i_l1),
            num(x.i_lk),
            num(x.i_lm),
            num(x.v_c1),
            num(x.v_c2),
            num(x.v_c3),
            num(x.v_c4),
            num(x.v_o()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_gains_csv<W: Write, T: Scalar>(w: W, rows: &[GainRow<T>]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(GAINS_HEADER)?;
    for r in rows {
        out.write_record([num(r.duty), r.topology.id().to_string(), num(r.gain)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_compare_csv<W: Write>(w: W, rows: &[CompareRow]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(COMPARE_HEADER)?;
    for r in rows {
        out.write_record([
            r.quantity.to_string(),
            r.analytic.to_string(),
            r.measured.to_string(),
            r.rel_error.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
