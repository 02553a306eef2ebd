//! Reading and writing the documented Level-I CSV schema.
//!
//! Header: `ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side` with `ts`
//! in decimal seconds (six or more fractional digits on output) and
//! `trade_side` one of `bid`, `ask`, `none`. All numbers are plain
//! decimal, locale-independent.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{RawRecord, TradeSide};

pub const CSV_HEADER: &str = "ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side";

/// Parse a Level-I CSV file into time-ordered records.
pub fn parse_l1_csv(path: &Path) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path)?;
    parse_l1_reader(BufReader::new(file))
}

/// Parse from any reader; errors carry 1-based line numbers.
pub fn parse_l1_reader<R: BufRead>(reader: R) -> Result<Vec<RawRecord>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Schema {
                line: 1,
                msg: "empty file, expected header".into(),
            })
        }
    };
    if header.trim() != CSV_HEADER {
        return Err(Error::Schema {
            line: 1,
            msg: format!("header `{}` does not match `{CSV_HEADER}`", header.trim()),
        });
    }

    let mut records = Vec::new();
    let mut prev_ts = f64::NEG_INFINITY;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec = parse_line(trimmed, line_no)?;
        if rec.ts < prev_ts {
            return Err(Error::Ordering {
                line: line_no,
                msg: format!("timestamp {} after {}", rec.ts, prev_ts),
            });
        }
        if rec.ask_px <= rec.bid_px {
            return Err(Error::CrossedBook {
                line: line_no,
                bid_px: rec.bid_px,
                ask_px: rec.ask_px,
            });
        }
        prev_ts = rec.ts;
        records.push(rec);
    }
    Ok(records)
}

fn parse_line(line: &str, line_no: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(Error::Schema {
            line: line_no,
            msg: format!("expected 7 columns, got {}", fields.len()),
        });
    }
    let err = |field: &str, value: &str| Error::Schema {
        line: line_no,
        msg: format!("invalid {field} value `{value}`"),
    };
    let ts: f64 = fields[0].parse().map_err(|_| err("ts", fields[0]))?;
    let bid_px: i64 = fields[1].parse().map_err(|_| err("bid_px", fields[1]))?;
    let bid_sz: u64 = fields[2].parse().map_err(|_| err("bid_sz", fields[2]))?;
    let ask_px: i64 = fields[3].parse().map_err(|_| err("ask_px", fields[3]))?;
    let ask_sz: u64 = fields[4].parse().map_err(|_| err("ask_sz", fields[4]))?;
    let trade_sz: u64 = fields[5].parse().map_err(|_| err("trade_sz", fields[5]))?;
    let trade_side = match fields[6] {
        "bid" => TradeSide::Bid,
        "ask" => TradeSide::Ask,
        "none" => TradeSide::None,
        other => return Err(err("trade_side", other)),
    };
    if (trade_side == TradeSide::None) != (trade_sz == 0) {
        return Err(Error::Schema {
            line: line_no,
            msg: "trade_side must be `none` exactly when trade_sz is 0".into(),
        });
    }
    if bid_px <= 0 || ask_px <= 0 {
        return Err(Error::Schema {
            line: line_no,
            msg: "prices must be positive tick counts".into(),
        });
    }
    Ok(RawRecord {
        ts,
        bid_px,
        bid_sz,
        ask_px,
        ask_sz,
        trade_sz,
        trade_side,
    })
}

/// Write records in the same dialect; `ts` with six fractional digits.
pub fn write_l1_csv<W: Write>(mut w: W, records: &[RawRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let side = match r.trade_side {
            TradeSide::Bid => "bid",
            TradeSide::Ask => "ask",
            TradeSide::None => "none",
        };
        writeln!(
            w,
            "{:.6},{},{},{},{},{},{}",
            r.ts, r.bid_px, r.bid_sz, r.ask_px, r.ask_sz, r.trade_sz, side
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_well_formed_file() {
        let data = "ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side\n\
                    0.000001,200,10,201,5,0,none\n\
                    0.000002,200,12,201,5,0,none\n\
                    0.000003,200,12,201,3,2,ask\n";
        let recs = parse_l1_reader(data.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].trade_side, TradeSide::Ask);
        assert_eq!(recs[1].bid_sz, 12);
    }

    #[test]
    fn rejects_crossed_book_with_line_number() {
        let data = "ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side\n\
                    0.1,200,10,201,5,0,none\n\
                    0.2,201,10,201,5,0,none\n";
        match parse_l1_reader(data.as_bytes()) {
            Err(Error::CrossedBook { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected crossed book, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotone_ts_and_bad_schema() {
        let data = "ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side\n\
                    0.2,200,10,201,5,0,none\n\
                    0.1,200,10,201,5,0,none\n";
        match parse_l1_reader(data.as_bytes()) {
            Err(Error::Ordering { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected ordering error, got {other:?}"),
        }

        let bad_header = "time,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side\n";
        assert!(matches!(
            parse_l1_reader(bad_header.as_bytes()),
            Err(Error::Schema { line: 1, .. })
        ));

        let bad_side = "ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side\n\
                        0.1,200,10,201,5,2,none\n";
        assert!(matches!(
            parse_l1_reader(bad_side.as_bytes()),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn roundtrip_write_then_parse() {
        let recs = vec![
            RawRecord {
                ts: 0.123456,
                bid_px: 200,
                bid_sz: 7,
                ask_px: 202,
                ask_sz: 9,
                trade_sz: 0,
                trade_side: TradeSide::None,
            },
            RawRecord {
                ts: 1.5,
                bid_px: 200,
                bid_sz: 5,
                ask_px: 202,
                ask_sz: 9,
                trade_sz: 2,
                trade_side: TradeSide::Bid,
            },
        ];
        let mut buf = Vec::new();
        write_l1_csv(&mut buf, &recs).unwrap();
        let parsed = parse_l1_reader(buf.as_slice()).unwrap();
        assert_eq!(parsed, recs);
    }
}
