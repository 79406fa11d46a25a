//! `SMF1` score maps and `SEG1` segment rasters.
//!
//! ```text
//! SMF1 <width> <height> <num_classes>\n
//! <id_0> ... <id_{n-1}>\n
//! n planes of width*height little-endian f32, plane-major, row-major
//!
//! SEG1 <width> <height>\n
//! width*height little-endian u32
//! ```

use std::path::Path;

use perimeterfit_core::superpixels::SegmentMap;
use perimeterfit_core::ScoreMap;

use crate::error::{Error, Result};
use crate::fsio;

/// Splits off one `\n`-terminated ASCII line starting at `start`.
fn line(bytes: &[u8], start: usize) -> Result<(&str, usize)> {
    let rest = &bytes[start.min(bytes.len())..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(bytes.len(), "truncated header"))?;
    let text = std::str::from_utf8(&rest[..end])
        .ok()
        .filter(|s| s.is_ascii())
        .ok_or_else(|| Error::format(start, "header is not ASCII"))?;
    Ok((text, start + end + 1))
}

fn fields<const N: usize>(text: &str, magic: &str, offset: usize) -> Result<[usize; N]> {
    let mut it = text.split_ascii_whitespace();
    if it.next() != Some(magic) {
        return Err(Error::format(offset, format!("wrong magic: expected {magic}")));
    }
    let values: Vec<&str> = it.collect();
    if values.len() != N {
        return Err(Error::format(
            offset,
            format!("expected {N} header fields, found {}", values.len()),
        ));
    }
    let mut out = [0usize; N];
    for (o, v) in out.iter_mut().zip(values) {
        if !v.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::format(offset, format!("bad header field {v:?}")));
        }
        *o = v
            .parse()
            .map_err(|_| Error::format(offset, format!("bad header field {v:?}")))?;
    }
    Ok(out)
}

fn payload(bytes: &[u8], start: usize, len: Option<usize>) -> Result<&[u8]> {
    let len = len.ok_or_else(|| Error::format(0, "dimensions overflow"))?;
    let got = bytes.len() - start;
    if got < len {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: {got} of {len} bytes"),
        ));
    }
    if got > len {
        return Err(Error::format(
            start + len,
            format!("{} bytes of trailing data", got - len),
        ));
    }
    Ok(&bytes[start..])
}

pub fn decode_smf(bytes: &[u8]) -> Result<ScoreMap> {
    let (header, ids_at) = line(bytes, 0)?;
    let [w, h, n] = fields::<3>(header, "SMF1", 0)?;
    let (ids_line, data_at) = line(bytes, ids_at)?;
    let ids = ids_line
        .split_ascii_whitespace()
        .map(|t| {
            t.parse::<u8>()
                .map_err(|_| Error::format(ids_at, format!("bad class id {t:?}")))
        })
        .collect::<Result<Vec<u8>>>()?;
    if ids.len() != n {
        return Err(Error::format(
            ids_at,
            format!("{} class ids for {n} classes", ids.len()),
        ));
    }
    let data = payload(
        bytes,
        data_at,
        w.checked_mul(h).and_then(|p| p.checked_mul(n)).and_then(|p| p.checked_mul(4)),
    )?;
    let plane_len = w * h;
    let planes = (0..n)
        .map(|i| {
            data[i * plane_len * 4..(i + 1) * plane_len * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect()
        })
        .collect();
    Ok(ScoreMap::new(w, h, ids, planes)?)
}

pub fn encode_smf(map: &ScoreMap) -> Vec<u8> {
    let ids: Vec<String> = map.class_ids().iter().map(u8::to_string).collect();
    let mut out = format!(
        "SMF1 {} {} {}\n{}\n",
        map.width(),
        map.height(),
        map.num_classes(),
        ids.join(" ")
    )
    .into_bytes();
    for plane in map.planes() {
        for s in plane {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

pub fn decode_seg(bytes: &[u8]) -> Result<SegmentMap> {
    let (header, data_at) = line(bytes, 0)?;
    let [w, h] = fields::<2>(header, "SEG1", 0)?;
    let data = payload(bytes, data_at, w.checked_mul(h).and_then(|p| p.checked_mul(4)))?;
    let ids = data
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(SegmentMap::new(w, h, ids)?)
}

pub fn encode_seg(seg: &SegmentMap) -> Vec<u8> {
    let mut out = format!("SEG1 {} {}\n", seg.width(), seg.height()).into_bytes();
    for s in seg.segments() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn load_smf(path: &Path) -> Result<ScoreMap> {
    decode_smf(&fsio::read(path)?).map_err(|e| e.in_file(path))
}

pub fn save_smf(map: &ScoreMap, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_smf(map))
}
