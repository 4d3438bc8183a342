//! PGM image I/O, plain (P2) and binary (P5), 8- and 16-bit.
//!
//! Reading keeps raw sample values as intensities; writing quantizes by
//! rounding and clamping to the format's maxval. Canonical files written
//! by this module round-trip byte for byte.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BeamImage, BinaryMask, DEFAULT_PITCH_UM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// ASCII samples (magic P2).
    Plain { maxval: u16 },
    /// Big-endian binary samples (magic P5).
    Binary { maxval: u16 },
}

impl PgmFormat {
    pub fn maxval(&self) -> u16 {
        match *self {
            PgmFormat::Plain { maxval } | PgmFormat::Binary { maxval } => maxval,
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of file"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token()?;
        let s = std::str::from_utf8(tok).map_err(|_| self.err(format!("{what} is not ASCII")))?;
        s.parse::<u32>()
            .map_err(|_| self.err(format!("bad {what} '{s}'")))
    }
}

/// Reads a PGM file with an explicit pixel pitch tag.
pub fn read_pgm_with_pitch(path: impl AsRef<Path>, pitch_um: f64) -> Result<(BeamImage, PgmFormat)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, pitch_um)
}

/// Reads a PGM file; the image gets the default micromirror pitch.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(BeamImage, PgmFormat)> {
    read_pgm_with_pitch(path, DEFAULT_PITCH_UM)
}

pub fn parse_pgm(bytes: &[u8], pitch_um: f64) -> Result<(BeamImage, PgmFormat)> {
    let mut p = Parser { bytes, pos: 0 };
    let magic = p.token()?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::Parse {
                offset: 0,
                message: format!(
                    "bad magic '{}', expected P2 or P5",
                    String::from_utf8_lossy(other)
                ),
            })
        }
    };
    let width = p.number("width")? as usize;
    let height = p.number("height")? as usize;
    let maxval_raw = p.number("maxval")?;
    if maxval_raw == 0 || maxval_raw > 65535 {
        return Err(p.err(format!("maxval {maxval_raw} out of range 1..=65535")));
    }
    let maxval = maxval_raw as u16;
    if width == 0 || height == 0 {
        return Err(p.err("image dimensions must be positive"));
    }
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        if p.pos >= p.bytes.len() || !p.bytes[p.pos].is_ascii_whitespace() {
            return Err(p.err("expected whitespace before binary payload"));
        }
        p.pos += 1;
        let sample_bytes = if maxval > 255 { 2 } else { 1 };
        let need = count * sample_bytes;
        let have = bytes.len() - p.pos;
        if have < need {
            return Err(Error::Parse {
                offset: p.pos,
                message: format!("truncated payload: expected {need} bytes, found {have}"),
            });
        }
        let payload = &bytes[p.pos..p.pos + need];
        if sample_bytes == 2 {
            for pair in payload.chunks_exact(2) {
                data.push(u16::from_be_bytes([pair[0], pair[1]]) as f64);
            }
        } else {
            data.extend(payload.iter().map(|&b| b as f64));
        }
    } else {
        for i in 0..count {
            let v = p
                .number("sample")
                .map_err(|e| match e {
                    Error::Parse { offset, message } => Error::Parse {
                        offset,
                        message: format!("sample {i}: {message}"),
                    },
                    other => other,
                })?;
            data.push(v as f64);
        }
    }
    for (i, v) in data.iter().enumerate() {
        if *v > maxval as f64 {
            return Err(Error::Parse {
                offset: 0,
                message: format!("sample {i} = {v} exceeds maxval {maxval}"),
            });
        }
    }
    let image = BeamImage::new(width, height, pitch_um, data)?;
    let format = if binary {
        PgmFormat::Binary { maxval }
    } else {
        PgmFormat::Plain { maxval }
    };
    Ok((image, format))
}

/// Writes an image in the given format, rounding and clamping samples to
/// `[0, maxval]`.
pub fn write_pgm(image: &BeamImage, format: PgmFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(image, format);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes an image scaled so its maximum maps to maxval; all-zero images
/// stay zero.
pub fn write_pgm_normalized(
    image: &BeamImage,
    format: PgmFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let max = image.max_value();
    let scaled = if max > 0.0 {
        image.scaled(format.maxval() as f64 / max)?
    } else {
        image.clone()
    };
    write_pgm(&scaled, format, path)
}

pub fn encode_pgm(image: &BeamImage, format: PgmFormat) -> Vec<u8> {
    let maxval = format.maxval();
    let quantize = |v: f64| -> u16 { v.round().clamp(0.0, maxval as f64) as u16 };
    let mut out = Vec::new();
    match format {
        PgmFormat::Plain { .. } => {
            out.extend_from_slice(
                format!("P2\n{} {}\n{}\n", image.width(), image.height(), maxval).as_bytes(),
            );
            for y in 0..image.height() {
                let row: Vec<String> = (0..image.width())
                    .map(|x| quantize(image.get(x, y)).to_string())
                    .collect();
                out.extend_from_slice(row.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmFormat::Binary { .. } => {
            out.extend_from_slice(
                format!("P5\n{} {}\n{}\n", image.width(), image.height(), maxval).as_bytes(),
            );
            for y in 0..image.height() {
                for x in 0..image.width() {
                    let q = quantize(image.get(x, y));
                    if maxval > 255 {
                        out.extend_from_slice(&q.to_be_bytes());
                    } else {
                        out.push(q as u8);
                    }
                }
            }
        }
    }
    out
}

/// Reads a PGM as a binary mask: nonzero samples are on.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let (image, _) = read_pgm(path)?;
    Ok(BinaryMask::from_fn(image.width(), image.height(), |x, y| {
        image.get(x, y) > 0.0
    }))
}

/// Writes a binary mask as an 8-bit plain PGM (on = maxval).
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let image = mask.to_image(DEFAULT_PITCH_UM)?.scaled(255.0)?;
    write_pgm(&image, PgmFormat::Plain { maxval: 255 }, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_p2_round_trip_is_byte_identical() {
        let bytes = b"P2\n3 2\n255\n0 10 20\n200 255 5\n";
        let (img, fmt) = parse_pgm(bytes, 1.0).unwrap();
        assert_eq!(fmt, PgmFormat::Plain { maxval: 255 });
        assert_eq!(img.as_slice(), &[0.0, 10.0, 20.0, 200.0, 255.0, 5.0]);
        let out = encode_pgm(&img, fmt);
        assert_eq!(out.as_slice(), bytes);
    }

    #[test]
    fn binary_16_bit_round_trip() {
        let img = BeamImage::new(2, 2, 1.0, vec![0.0, 65535.0, 1000.0, 42.0]).unwrap();
        let fmt = PgmFormat::Binary { maxval: 65535 };
        let bytes = encode_pgm(&img, fmt);
        let (back, fmt2) = parse_pgm(&bytes, 1.0).unwrap();
        assert_eq!(fmt2, fmt);
        assert_eq!(back.as_slice(), img.as_slice());
        let again = encode_pgm(&back, fmt2);
        assert_eq!(again, bytes);
    }

    #[test]
    fn sixteen_bit_values_span_full_range() {
        let bytes = [
            b"P5\n2 1\n65535\n".to_vec(),
            vec![0xff, 0xff, 0x00, 0x01],
        ]
        .concat();
        let (img, _) = parse_pgm(&bytes, 1.0).unwrap();
        assert_eq!(img.as_slice(), &[65535.0, 1.0]);
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        let bytes = [b"P5\n4 4\n255\n".to_vec(), vec![1, 2, 3]].concat();
        match parse_pgm(&bytes, 1.0) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("expected 16 bytes"), "{message}");
                assert!(message.contains("found 3"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_reports_offset() {
        let bytes = b"P2\n3 x\n255\n";
        match parse_pgm(bytes, 1.0) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_are_skipped() {
        let bytes = b"P2\n# a comment\n2 1\n# another\n8\n3 8\n";
        let (img, fmt) = parse_pgm(bytes, 1.0).unwrap();
        assert_eq!(img.as_slice(), &[3.0, 8.0]);
        assert_eq!(fmt.maxval(), 8);
    }

    #[test]
    fn sample_above_maxval_rejected() {
        let bytes = b"P2\n2 1\n10\n3 11\n";
        assert!(parse_pgm(bytes, 1.0).is_err());
    }

    #[test]
    fn mask_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.pgm");
        let mask = crate::image::phantoms::checkerboard_mask(8, 8, 2);
        write_mask(&mask, &path).unwrap();
        let back = read_mask(&path).unwrap();
        assert_eq!(back.as_slice(), mask.as_slice());
    }
}
