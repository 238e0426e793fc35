//! Binary PGM (P5) masks: zero is background, any nonzero value foreground.

use crate::error::{Error, Result};
use crate::feature::BinaryMask;

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_uint(bytes: &[u8], pos: usize, what: &str) -> Result<(usize, usize)> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Format(format!("pgm header: missing {what}")));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let value = text
        .parse()
        .map_err(|_| Error::Format(format!("pgm header: bad {what} {text:?}")))?;
    Ok((value, end))
}

pub fn decode(bytes: &[u8]) -> Result<BinaryMask> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("not a binary PGM (expected P5 magic)".into()));
    }
    let (width, pos) = read_uint(bytes, 2, "width")?;
    let (height, pos) = read_uint(bytes, pos, "height")?;
    let (maxval, pos) = read_uint(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!(
            "pgm has empty size {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("pgm maxval {maxval} out of range")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format(
            "pgm header not terminated by whitespace".into(),
        ));
    }
    let payload = &bytes[pos + 1..];
    let sample = if maxval > 255 { 2 } else { 1 };
    let need = width * height * sample;
    if payload.len() < need {
        return Err(Error::Format(format!(
            "pgm payload truncated: {} of {need} bytes",
            payload.len()
        )));
    }
    let values: Vec<u8> = payload[..need]
        .chunks_exact(sample)
        .map(|c| u8::from(c.iter().any(|&b| b != 0)))
        .collect();
    BinaryMask::new(height, width, values)
}

pub fn encode(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b == 1 { 255 } else { 0 }));
    out
}
