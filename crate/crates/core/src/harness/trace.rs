//! Signal traces: one CSV row `time,signal,value` per flip, time with six
//! decimals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub signal: String,
    pub value: bool,
}

pub fn write_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "signal", "value"])?;
    for r in rows {
        w.write_record([format!("{:.6}", r.time).as_str(), &r.signal, if r.value { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[derive(Deserialize)]
struct RawRow {
    time: f64,
    signal: String,
    value: u8,
}

pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<TraceRow>> {
    csv::Reader::from_reader(input)
        .deserialize::<RawRow>()
        .map(|r| {
            r.map(|r| TraceRow {
                time: r.time,
                signal: r.signal,
                value: r.value != 0,
            })
        })
        .collect()
}

/// First position where two CSV texts differ, as (1-based line, left, right).
pub fn first_difference<'a>(a: &'a str, b: &'a str) -> Option<(usize, &'a str, &'a str)> {
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut n = 0;
    loop {
        n += 1;
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x != y => return Some((n, x.unwrap_or("<end>"), y.unwrap_or("<end>"))),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            TraceRow {
                time: 0.0,
                signal: "ivar_a".into(),
                value: true,
            },
            TraceRow {
                time: 1.0 / 3.0,
                signal: "dvar_b".into(),
                value: false,
            },
        ];
        let text = to_csv_string(&rows);
        assert_eq!(text, "time,signal,value\n0.000000,ivar_a,1\n0.333333,dvar_b,0\n");
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!((back[1].time - 0.333333).abs() < 1e-12);
        assert_eq!(first_difference(&text, &text), None);
        assert_eq!(first_difference("a\nb\n", "a\nc\n"), Some((2, "b", "c")));
    }
}
