//! CSV emission and parsing. Comment lines starting with `#` precede the
//! header and carry column docs and run metadata such as wall time.

use std::io::{Read, Write};

use crate::error::Result;
use crate::experiments::bench::SummaryRow;
use crate::outer::OuterRecord;

pub const TRACE_HEADER: [&str; 9] = ["k", "J_k", "residual", "eps_abs", "eps_rel", "F", "alpha", "B", "L"];
pub const SUMMARY_HEADER: [&str; 8] = ["i", "eps", "min", "q1", "median", "q3", "max", "censored_count"];
pub const SIGNALS_HEADER: [&str; 4] = ["index", "ground_truth", "observed", "recovered"];

const TRACE_DOC: &str = "\
# k: outer iteration
# J_k: inner iterations at k, summed over line-search retries
# residual: |x_k - y_k|
# eps_abs: absolute inner tolerance
# eps_rel: (rho_k / 2) |x_k - y_k|^2
# F: f(x_k) + omega(A x_k)
# alpha, B, L: momentum coefficient, Armijo constant, step constant";

const SUMMARY_DOC: &str = "\
# i: tolerance index, eps = 2^(-32 + i/4)
# min..max: five-number summary of the first inner iteration j with gap <= eps
# censored_count: trials that hit the inner iteration limit first (recorded as the limit)";

/// One trace row, the CSV view of an [`OuterRecord`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub j_k: usize,
    pub residual: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub f: f64,
    pub alpha: f64,
    pub b: f64,
    pub l: f64,
}

impl From<&OuterRecord> for TraceRow {
    fn from(r: &OuterRecord) -> Self {
        Self {
            k: r.k,
            j_k: r.inner_iters,
            residual: r.residual,
            eps_abs: r.eps_abs,
            eps_rel: r.eps_rel,
            f: r.objective,
            alpha: r.alpha,
            b: r.b,
            l: r.l,
        }
    }
}

fn write_comments<W: Write>(w: &mut W, doc: &str, meta: &[String]) -> Result<()> {
    for m in meta {
        writeln!(w, "# {m}")?;
    }
    writeln!(w, "{doc}")?;
    Ok(())
}

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow], meta: &[String]) -> Result<()> {
    write_comments(&mut w, TRACE_DOC, meta)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in rows {
        out.write_record([
            r.k.to_string(),
            r.j_k.to_string(),
            r.residual.to_string(),
            r.eps_abs.to_string(),
            r.eps_rel.to_string(),
            r.f.to_string(),
            r.alpha.to_string(),
            r.b.to_string(),
            r.l.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| crate::Error::Parse(format!("bad number {:?}: {e}", &rec[i])))
        };
        let int = |i: usize| -> Result<usize> {
            rec[i].parse::<usize>().map_err(|e| crate::Error::Parse(format!("bad integer {:?}: {e}", &rec[i])))
        };
        rows.push(TraceRow {
            k: int(0)?,
            j_k: int(1)?,
            residual: num(2)?,
            eps_abs: num(3)?,
            eps_rel: num(4)?,
            f: num(5)?,
            alpha: num(6)?,
            b: num(7)?,
            l: num(8)?,
        });
    }
    Ok(rows)
}

pub fn write_summary<W: Write>(mut w: W, rows: &[SummaryRow], meta: &[String]) -> Result<()> {
    write_comments(&mut w, SUMMARY_DOC, meta)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let s = &r.stats;
        out.write_record([
            r.i.to_string(),
            r.eps.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
            r.censored_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `(i, eps, min, q1, median, q3, max, censored_count)` per row.
pub fn read_summary<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| crate::Error::Parse(format!("bad number {f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_signals<W: Write>(
    mut w: W,
    ground_truth: &[f64],
    observed: &[f64],
    recovered: &[f64],
    meta: &[String],
) -> Result<()> {
    for m in meta {
        writeln!(w, "# {m}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SIGNALS_HEADER)?;
    for (i, ((g, o), x)) in ground_truth.iter().zip(observed).zip(recovered).enumerate() {
        out.write_record([i.to_string(), g.to_string(), o.to_string(), x.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_vector<W: Write>(mut w: W, x: &[f64], meta: &[String]) -> Result<()> {
    for m in meta {
        writeln!(w, "# {m}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "x"])?;
    for (i, v) in x.iter().enumerate() {
        out.write_record([i.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(0.0), Just(-0.0), Just(1e-300)]
    }

    #[test]
    fn header_order() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[], &["wall_time_s = 1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "k,J_k,residual,eps_abs,eps_rel,F,alpha,B,L");
        assert!(text.starts_with("# wall_time_s = 1\n"));
    }

    proptest! {
        #[test]
        fn trace_round_trip(rows in prop::collection::vec(
            (0usize..10_000, 0usize..10_000_000, finite(), finite(), finite(), finite(), finite(), finite(), finite()),
            0..20,
        )) {
            let rows: Vec<TraceRow> = rows.into_iter().map(|(k, j_k, residual, eps_abs, eps_rel, f, alpha, b, l)| {
                TraceRow { k, j_k, residual, eps_abs, eps_rel, f, alpha, b, l }
            }).collect();
            let mut buf = Vec::new();
            write_trace(&mut buf, &rows, &[]).unwrap();
            let back = read_trace(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in back.iter().zip(&rows) {
                prop_assert_eq!(a.k, b.k);
                prop_assert_eq!(a.j_k, b.j_k);
                for (x, y) in [(a.residual, b.residual), (a.eps_abs, b.eps_abs), (a.eps_rel, b.eps_rel),
                               (a.f, b.f), (a.alpha, b.alpha), (a.b, b.b), (a.l, b.l)] {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
