//! CSV output with a metadata block, grid-range parsing, and readers for the
//! files this crate writes.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::sim::{CycleSample, PathRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("invalid range {text:?}: {reason}")]
    InvalidRange { text: String, reason: String },
    #[error("malformed CSV at line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Leading `# key: value` lines of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub config_json: String,
    pub seed: Option<u64>,
    /// Command-specific summary values, written after the fixed keys.
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# mtphase {VERSION}")?;
        writeln!(w, "# command: {}", self.command)?;
        writeln!(w, "# config_sha256: {}", self.config_hash)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed: {s}")?,
            None => writeln!(w, "# seed: none")?,
        }
        writeln!(w, "# config: {}", self.config_json)?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// Formats a float with the shortest representation that round-trips,
/// switching to exponent notation for very small or large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Writes the metadata block, then `header` and `rows` as CSV with LF line
/// endings. Fields containing commas or quotes are quoted.
pub fn write_table<W: Write>(
    w: &mut W,
    meta: &Metadata,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), IoError> {
    meta.write_to(w)?;
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub const CYCLE_HEADER: [&str; 3] = ["dx", "dtau", "jumps"];
pub const PATH_HEADER: [&str; 4] = ["t", "x", "head_len", "head_norm"];

pub fn cycle_row(c: &CycleSample) -> Vec<String> {
    vec![c.dx.to_string(), fmt_f64(c.dtau), c.jumps.to_string()]
}

pub fn path_row(r: &PathRecord) -> Vec<String> {
    vec![
        fmt_f64(r.t),
        r.x.to_string(),
        r.head_len.to_string(),
        r.head_norm.to_string(),
    ]
}

pub const MAX_RANGE_POINTS: usize = 1_000_000;

/// Parses `"a"`, `"a,b,c"` or `"start:stop:count"` (inclusive, evenly
/// spaced, `count ≥ 2` unless `start == stop`). Values must be finite.
pub fn parse_range(text: &str) -> Result<Vec<f64>, IoError> {
    let bad = |reason: &str| IoError::InvalidRange {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let num = |s: &str| -> Result<f64, IoError> {
        let v: f64 = s.trim().parse().map_err(|_| bad(&format!("{:?} is not a number", s.trim())))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("values must be finite"))
        }
    };
    let t = text.trim();
    if t.is_empty() {
        return Err(bad("empty"));
    }
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(bad("expected start:stop:count"));
        };
        let (a, b) = (num(start)?, num(stop)?);
        let n: usize = count.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
        if !(b - a).is_finite() {
            return Err(bad("span is not finite"));
        }
        return match n {
            0 => Err(bad("count must be positive")),
            n if n > MAX_RANGE_POINTS => Err(bad(&format!("count exceeds {MAX_RANGE_POINTS}"))),
            1 if a == b => Ok(vec![a]),
            1 => Err(bad("count 1 needs start == stop")),
            _ => Ok((0..n)
                .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
                .collect()),
        };
    }
    t.split(',').map(num).collect()
}

fn data_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(r)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), IoError> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(IoError::Malformed {
            line: h.position().map_or(0, |p| p.line()),
            reason: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, IoError> {
    let line = rec.position().map_or(0, |p| p.line());
    let s = rec.get(i).ok_or_else(|| IoError::Malformed {
        line,
        reason: format!("missing column {i}"),
    })?;
    s.parse().map_err(|_| IoError::Malformed {
        line,
        reason: format!("cannot parse {s:?} in column {i}"),
    })
}

/// Reads a cycle file written by `simulate --what cycles`.
pub fn read_cycles_csv<R: Read>(r: R) -> Result<Vec<CycleSample>, IoError> {
    let mut rdr = data_reader(r);
    check_header(&mut rdr, &CYCLE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let c = CycleSample {
            dx: field(&rec, 0)?,
            dtau: field(&rec, 1)?,
            jumps: field(&rec, 2)?,
        };
        if !(c.dtau >= 0.0 && c.dtau.is_finite()) || c.jumps == 0 {
            return Err(IoError::Malformed {
                line: rec.position().map_or(0, |p| p.line()),
                reason: "dtau must be finite and non-negative, jumps positive".into(),
            });
        }
        out.push(c);
    }
    Ok(out)
}

/// Reads a trajectory file written by `simulate --what path`.
pub fn read_path_csv<R: Read>(r: R) -> Result<Vec<PathRecord>, IoError> {
    let mut rdr = data_reader(r);
    check_header(&mut rdr, &PATH_HEADER)?;
    let mut out: Vec<PathRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let p = PathRecord {
            t: field(&rec, 0)?,
            x: field(&rec, 1)?,
            head_len: field(&rec, 2)?,
            head_norm: field(&rec, 3)?,
        };
        let line = rec.position().map_or(0, |p| p.line());
        if p.head_norm > p.head_len || !p.t.is_finite() {
            return Err(IoError::Malformed {
                line,
                reason: "head_norm exceeds head_len or t not finite".into(),
            });
        }
        if out.last().is_some_and(|q| !(p.t >= q.t)) {
            return Err(IoError::Malformed {
                line,
                reason: "time must be non-decreasing".into(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> Metadata {
        Metadata {
            command: "test".into(),
            config_hash: "00".into(),
            config_json: "{}".into(),
            seed: Some(7),
            extra: vec![("note".into(), "x".into())],
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1").unwrap(), vec![1.0]);
        assert_eq!(parse_range("1, 2.5,3").unwrap(), vec![1.0, 2.5, 3.0]);
        assert_eq!(parse_range("0:1:5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_range("2:2:1").unwrap(), vec![2.0]);
        for bad in ["", "a", "1,,2", "0:1", "0:1:0", "0:1:1", "0:1:x", "1:2:3:4", "inf", "NaN", "0:1:99999999999", "-1e308:1e308:3"] {
            assert!(parse_range(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_table(
            &mut buf,
            &meta(),
            &["a", "status"],
            [vec!["1".into(), "error: x, y".into()]],
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(!s.contains('\r'));
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# mtphase "));
        assert_eq!(lines[3], "# seed: 7");
        assert_eq!(lines[5], "# note: x");
        assert_eq!(&lines[6..], ["a,status", "1,\"error: x, y\""]);
    }

    #[test]
    fn floats_round_trip() {
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1e-10), "1e-10");
        assert_eq!(fmt_f64(-2.5e20), "-2.5e20");
        for x in [1.0 / 3.0, 8.717804256264117e-12, 6.02e23, -0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn cycles_reject_bad_rows() {
        let ok = "# c\ndx,dtau,jumps\n1,0.5,2\n-1,0.25,1\n";
        assert_eq!(read_cycles_csv(ok.as_bytes()).unwrap().len(), 2);
        for bad in [
            "dx,dtau\n1,0.5\n",
            "dx,dtau,jumps\n1,-0.5,2\n",
            "dx,dtau,jumps\n1,0.5,0\n",
            "dx,dtau,jumps\n1,0.5\n",
            "dx,dtau,jumps\nx,0.5,1\n",
        ] {
            assert!(read_cycles_csv(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn paths_require_monotone_time() {
        let bad = "t,x,head_len,head_norm\n0,0,0,0\n1,1,1,1\n0.5,0,0,0\n";
        assert!(read_path_csv(bad.as_bytes()).is_err());
        let bad = "t,x,head_len,head_norm\n0,0,1,2\n";
        assert!(read_path_csv(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn cycles_round_trip(rows in prop::collection::vec((-50i64..50, 0.0f64..1e6, 1u64..1_000_000), 0..50)) {
            let cs: Vec<CycleSample> = rows.iter().map(|&(dx, dtau, jumps)| CycleSample { dx, dtau, jumps }).collect();
            let mut buf = Vec::new();
            write_table(&mut buf, &meta(), &CYCLE_HEADER, cs.iter().map(cycle_row)).unwrap();
            prop_assert_eq!(read_cycles_csv(buf.as_slice()).unwrap(), cs);
        }

        #[test]
        fn linspace_endpoints(a in -10.0f64..10.0, b in -10.0f64..10.0, n in 2usize..50) {
            let v = parse_range(&format!("{a}:{b}:{n}")).unwrap();
            prop_assert_eq!(v.len(), n);
            prop_assert_eq!(v[0], a);
            prop_assert_eq!(v[n - 1], b);
        }

        #[test]
        fn parse_range_never_panics(s in "\\PC{0,20}") {
            let _ = parse_range(&s);
        }
    }
}
