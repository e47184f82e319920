//! Data readers and writers.
//!
//! Text input is CSV with one observation per row and one coordinate per
//! column. Binary input is little-endian: a `u64` row count, a `u64` column
//! count, then the values as `f64` in row-major order.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

/// Parses CSV text. Rows and columns in errors are 1-based and count the header.
pub fn parse_csv<R: Read>(reader: R, has_header: bool) -> Result<Observations> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let offset = usize::from(has_header);
    let mut dim = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1 + offset;
        let rec = rec.map_err(|e| Error::InputFormat {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        let expected = *dim.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::InputFormat {
                row,
                column: expected.min(rec.len()) + 1,
                message: format!("expected {expected} columns, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::InputFormat {
                row,
                column: j + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::InputFormat {
                    row,
                    column: j + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let dim = dim.unwrap_or(0);
    if rows == 0 || dim == 0 {
        return Err(Error::InputFormat {
            row: 1,
            column: 1,
            message: "no observations".into(),
        });
    }
    Ok(Observations { rows, dim, data })
}

/// Parses the binary layout described in the module docs.
pub fn parse_binary(bytes: &[u8]) -> Result<Observations> {
    let header_err = |message: &str| Error::InputFormat {
        row: 0,
        column: 0,
        message: message.to_string(),
    };
    if bytes.len() < 16 {
        return Err(header_err("binary input shorter than its 16-byte header"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    let rows = usize::try_from(word(0)).map_err(|_| header_err("row count overflows"))?;
    let dim = usize::try_from(word(1)).map_err(|_| header_err("column count overflows"))?;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| header_err("size overflows"))?;
    if bytes.len() - 16 != expected {
        return Err(header_err(&format!(
            "header announces {rows} x {dim} values but the payload has {} bytes",
            bytes.len() - 16
        )));
    }
    let data: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InputFormat {
            row: k / dim + 1,
            column: k % dim + 1,
            message: "value is not finite".into(),
        });
    }
    Ok(Observations { rows, dim, data })
}

/// Encodes observations in the binary layout.
pub fn encode_binary(obs: &Observations) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * obs.data.len());
    out.extend_from_slice(&(obs.rows as u64).to_le_bytes());
    out.extend_from_slice(&(obs.dim as u64).to_le_bytes());
    for v in &obs.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads a file in either format.
pub fn read_observations(path: &Path, binary: bool, has_header: bool) -> Result<Observations> {
    if binary {
        parse_binary(&std::fs::read(path)?)
    } else {
        parse_csv(std::fs::File::open(path)?, has_header)
    }
}

/// Writes observations as headerless CSV with 17 significant digits.
pub fn write_csv(obs: &Observations) -> String {
    let mut out = String::new();
    for row in obs.data.chunks(obs.dim) {
        let cells: Vec<String> = row.iter().map(|v| crate::sim::format_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_csv() {
        let o = parse_csv("1,2\n3,4\n".as_bytes(), false).unwrap();
        assert_eq!(o, Observations { rows: 2, dim: 2, data: vec![1.0, 2.0, 3.0, 4.0] });
        let o = parse_csv("x,y\n1, 2\n".as_bytes(), true).unwrap();
        assert_eq!(o.data, vec![1.0, 2.0]);
    }

    #[test]
    fn ragged_rows_name_position() {
        match parse_csv("1,2\n3\n".as_bytes(), false) {
            Err(Error::InputFormat { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_names_position() {
        match parse_csv("a,b\n1,2\n3,x\n".as_bytes(), true) {
            Err(Error::InputFormat { row, column, message }) => {
                assert_eq!((row, column), (3, 2));
                assert!(message.contains("'x'"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("1,nan\n".as_bytes(), false).is_err());
        assert!(parse_csv("".as_bytes(), false).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let o = Observations { rows: 3, dim: 1, data: vec![0.1, -2.5, 1e300] };
        assert_eq!(parse_binary(&encode_binary(&o)).unwrap(), o);
        let mut bad = encode_binary(&o);
        bad.pop();
        assert!(parse_binary(&bad).is_err());
        assert!(parse_binary(&[0u8; 3]).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let o = Observations { rows: 2, dim: 2, data: vec![0.1 + 0.2, 1.0 / 3.0, -7e-300, 2.0] };
        assert_eq!(parse_csv(write_csv(&o).as_bytes(), false).unwrap(), o);
    }
}
