//! Matrix CSV files and grayscale PGM images.
//!
//! CSV: comma-separated decimals, one matrix row per line, no header. Values
//! are written with shortest round-trip formatting.
//!
//! PGM: P2 and P5 are read with intensities scaled by `maxval` into `[0, 1]`;
//! writes are binary P5 with `maxval = 255`, clamped to `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, ExtendedColorType, ImageDecoder};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub fn parse_matrix_csv<T: Scalar, R: Read>(reader: R) -> Result<Matrix<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut entries: Vec<T> = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {c} fields, found {}", record.len()),
                });
            }
            Some(_) => {}
        }
        for field in record.iter() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("'{field}' is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value '{field}'"),
                });
            }
            entries.push(T::lit(value));
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(Error::Parse {
            line: 1,
            message: "empty matrix file".into(),
        });
    };
    Matrix::from_row_slice(rows, cols, &entries)
}

pub fn read_matrix_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    parse_matrix_csv(BufReader::new(File::open(path)?))
}

pub fn format_matrix_csv<T: Scalar, W: Write>(m: &Matrix<T>, mut out: W) -> Result<()> {
    for r in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|c| m[(r, c)].to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix_csv<T: Scalar>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    format_matrix_csv(m, BufWriter::new(File::create(path)?))
}

fn pgm_error(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Pgm(other.to_string()),
    }
}

pub fn parse_pgm<T: Scalar, R: std::io::BufRead>(reader: R) -> Result<Matrix<T>> {
    let decoder = PnmDecoder::new(reader).map_err(pgm_error)?;
    let header = decoder.header();
    if !matches!(header.subtype(), PnmSubtype::Graymap(_)) {
        return Err(Error::Pgm("not a P2/P5 graymap".into()));
    }
    let maxval = header.maximal_sample();
    let (width, height) = (header.width() as usize, header.height() as usize);
    let color = decoder.color_type();
    let mut buf = vec![0u8; decoder.total_bytes() as usize];
    decoder.read_image(&mut buf).map_err(pgm_error)?;
    // The decoder stretches samples to the full 8- or 16-bit range; undo
    // that to recover the stored integers.
    let (stretched, full): (Vec<u32>, u32) = match color {
        ColorType::L8 => (buf.iter().map(|&b| u32::from(b)).collect(), 255),
        ColorType::L16 => (
            buf.chunks_exact(2)
                .map(|c| u32::from(u16::from_ne_bytes([c[0], c[1]])))
                .collect(),
            65535,
        ),
        other => return Err(Error::Pgm(format!("unsupported sample layout {other:?}"))),
    };
    let samples: Vec<u32> = stretched
        .iter()
        .map(|&s| (f64::from(s) * f64::from(maxval) / f64::from(full)).round() as u32)
        .collect();
    if samples.len() != width * height {
        return Err(Error::Pgm("truncated payload".into()));
    }
    let scale = T::from_count(maxval as usize);
    let entries: Vec<T> = samples
        .iter()
        .map(|&s| T::from_count(s.min(maxval) as usize) / scale)
        .collect();
    Matrix::from_row_slice(height, width, &entries)
}

pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    parse_pgm(BufReader::new(File::open(path)?))
}

pub fn format_pgm<T: Scalar, W: Write>(m: &Matrix<T>, out: W) -> Result<()> {
    let bytes: Vec<u8> = m
        .to_row_major()
        .into_iter()
        .map(|v| {
            let clamped = v.as_f64().clamp(0.0, 1.0);
            (clamped * 255.0).round() as u8
        })
        .collect();
    PnmEncoder::new(out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .encode(bytes.as_slice(), m.cols() as u32, m.rows() as u32, ExtendedColorType::L8)
        .map_err(pgm_error)
}

pub fn write_pgm<T: Scalar>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    format_pgm(m, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_csv() {
        let m: Matrix<f64> = parse_matrix_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m.to_row_major(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!((m.rows(), m.cols()), (2, 2));
    }

    #[test]
    fn ragged_csv_names_line() {
        let err = parse_matrix_csv::<f64, _>("1,2\n3\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_line_2_message());
    }

    fn err_line_2_message() -> bool {
        parse_matrix_csv::<f64, _>("1,2\n3\n".as_bytes())
            .unwrap_err()
            .to_string()
            .starts_with("line 2:")
    }

    #[test]
    fn bad_csv_inputs() {
        assert!(matches!(parse_matrix_csv::<f64, _>("".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_matrix_csv::<f64, _>("1,x\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_matrix_csv::<f64, _>("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let vals: Vec<f64> = (0..35).map(|k| (k as f64 * 0.7311).sin() / 3.0 + 1e-17 * k as f64).collect();
        let m = Matrix::from_row_slice(7, 5, &vals).unwrap();
        let mut buf = Vec::new();
        format_matrix_csv(&m, &mut buf).unwrap();
        let back: Matrix<f64> = parse_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ascii_pgm() {
        let m: Matrix<f64> = parse_pgm("P2\n2 2\n255\n0 255\n255 0\n".as_bytes()).unwrap();
        assert_eq!(m.to_row_major(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn pgm_scales_by_maxval() {
        let m: Matrix<f64> = parse_pgm("P2\n3 1\n15\n0 5 15\n".as_bytes()).unwrap();
        assert_eq!(m.to_row_major(), vec![0.0, 1.0 / 3.0, 1.0]);
        let mut wide = b"P5\n2 1\n65535\n".to_vec();
        wide.extend_from_slice(&[0x00, 0x00, 0xff, 0xff]);
        let m: Matrix<f64> = parse_pgm(wide.as_slice()).unwrap();
        assert_eq!(m.to_row_major(), vec![0.0, 1.0]);
    }

    #[test]
    fn pgm_round_trip_within_quantization() {
        let vals: Vec<f64> = (0..12).map(|k| k as f64 / 11.0).collect();
        let m = Matrix::from_row_slice(3, 4, &vals).unwrap();
        let mut buf = Vec::new();
        format_pgm(&m, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5"));
        let back: Matrix<f64> = parse_pgm(buf.as_slice()).unwrap();
        assert_eq!((back.rows(), back.cols()), (3, 4));
        assert!((back.as_dmatrix() - m.as_dmatrix()).amax() <= 1.0 / 255.0);
    }

    #[test]
    fn malformed_pgm() {
        assert!(parse_pgm::<f64, _>("P2\n2 2\n".as_bytes()).is_err());
        assert!(parse_pgm::<f64, _>("P5\n2 2\n255\n\x01".as_bytes()).is_err());
        assert!(parse_pgm::<f64, _>("P3\n1 1\n255\n0 0 0\n".as_bytes()).is_err());
    }
}
