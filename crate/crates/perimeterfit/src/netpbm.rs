//! Binary Netpbm: P6 for RGB images, P5 for label, perimeter, and segment maps.
//!
//! Decoding accepts any header the format allows (arbitrary whitespace and
//! `#` comments) but requires `maxval` 255 and a payload of exactly the
//! declared size. Encoding always emits the canonical header
//! `P6\n<w> <h>\n255\n`.

use std::path::Path;

use perimeterfit_core::edges::PerimeterMap;
use perimeterfit_core::superpixels::SegmentMap;
use perimeterfit_core::{LabelMap, RasterImage};

use crate::error::{Error, Result};
use crate::fsio;
use crate::smf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// P5
    Gray,
    /// P6
    Rgb,
}

impl Kind {
    fn magic(self) -> &'static [u8; 2] {
        match self {
            Kind::Gray => b"P5",
            Kind::Rgb => b"P6",
        }
    }

    fn channels(self) -> usize {
        match self {
            Kind::Gray => 1,
            Kind::Rgb => 3,
        }
    }
}

struct Header {
    width: usize,
    height: usize,
    payload_start: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_separators(&mut self) -> Result<()> {
        let start = self.pos;
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), None | Some(b'\n' | b'\r')) {
                        self.pos += 1;
                    }
                }
                Some(_) if self.pos > start => return Ok(()),
                Some(_) => return Err(Error::format(self.pos, "expected whitespace")),
                None => return Err(Error::format(self.pos, "truncated header")),
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::format(start, format!("{what} too large")))
    }
}

fn parse_header(bytes: &[u8], kind: Kind) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::format(0, "truncated header"));
    }
    if &bytes[..2] != kind.magic() {
        return Err(Error::format(
            0,
            format!(
                "wrong magic: expected {}",
                std::str::from_utf8(kind.magic()).expect("ascii")
            ),
        ));
    }
    let mut c = Cursor { bytes, pos: 2 };
    c.skip_separators()?;
    let width_at = c.pos;
    let width = c.number("width")?;
    c.skip_separators()?;
    let height_at = c.pos;
    let height = c.number("height")?;
    c.skip_separators()?;
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if width == 0 {
        return Err(Error::format(width_at, "width must be at least 1"));
    }
    if height == 0 {
        return Err(Error::format(height_at, "height must be at least 1"));
    }
    if maxval != 255 {
        return Err(Error::format(maxval_at, format!("maxval {maxval} is not 255")));
    }
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        Some(_) => return Err(Error::format(c.pos, "expected whitespace after maxval")),
        None => return Err(Error::format(c.pos, "truncated header")),
    }
    Ok(Header {
        width,
        height,
        payload_start: c.pos + 1,
    })
}

/// Decodes a P5 or P6 file into `(width, height, payload)`.
pub fn decode(bytes: &[u8], kind: Kind) -> Result<(usize, usize, Vec<u8>)> {
    let h = parse_header(bytes, kind)?;
    let len = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(kind.channels()))
        .ok_or_else(|| Error::format(0, "dimensions overflow"))?;
    let payload = &bytes[h.payload_start..];
    if payload.len() < len {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: {} of {len} bytes", payload.len()),
        ));
    }
    if payload.len() > len {
        return Err(Error::format(
            h.payload_start + len,
            format!("{} bytes of trailing data", payload.len() - len),
        ));
    }
    Ok((h.width, h.height, payload.to_vec()))
}

pub fn encode(kind: Kind, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    debug_assert_eq!(payload.len(), width * height * kind.channels());
    let mut out = format!(
        "{}\n{width} {height}\n255\n",
        std::str::from_utf8(kind.magic()).expect("ascii")
    )
    .into_bytes();
    out.extend_from_slice(payload);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RasterImage> {
    let (w, h, data) = decode(bytes, Kind::Rgb)?;
    Ok(RasterImage::new(w, h, data)?)
}

pub fn encode_ppm(image: &RasterImage) -> Vec<u8> {
    encode(Kind::Rgb, image.width(), image.height(), image.as_bytes())
}

pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    let (w, h, data) = decode(bytes, Kind::Gray)?;
    Ok(LabelMap::new(w, h, data)?)
}

pub fn encode_label_map(map: &LabelMap) -> Vec<u8> {
    encode(Kind::Gray, map.width(), map.height(), map.labels())
}

pub fn decode_perimeter_map(bytes: &[u8]) -> Result<PerimeterMap> {
    let (w, h, data) = decode(bytes, Kind::Gray)?;
    Ok(PerimeterMap::new(w, h, data)?)
}

pub fn encode_perimeter_map(map: &PerimeterMap) -> Vec<u8> {
    encode(Kind::Gray, map.width(), map.height(), map.values())
}

fn load_with<T>(path: &Path, decode: impl FnOnce(&[u8]) -> Result<T>) -> Result<T> {
    decode(&fsio::read(path)?).map_err(|e| e.in_file(path))
}

pub fn load_ppm(path: &Path) -> Result<RasterImage> {
    load_with(path, decode_ppm)
}

pub fn save_ppm(image: &RasterImage, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_ppm(image))
}

pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    load_with(path, decode_label_map)
}

pub fn save_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_label_map(map))
}

pub fn load_perimeter_map(path: &Path) -> Result<PerimeterMap> {
    load_with(path, decode_perimeter_map)
}

pub fn save_perimeter_map(map: &PerimeterMap, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_perimeter_map(map))
}

/// P5 when every id fits in a byte, the `SEG1` raster otherwise.
pub fn encode_segment_map(seg: &SegmentMap) -> Vec<u8> {
    if seg.num_segments() <= 255 {
        let ids: Vec<u8> = seg.segments().iter().map(|&s| s as u8).collect();
        encode(Kind::Gray, seg.width(), seg.height(), &ids)
    } else {
        smf::encode_seg(seg)
    }
}

pub fn decode_segment_map(bytes: &[u8]) -> Result<SegmentMap> {
    if bytes.starts_with(b"SEG1") {
        return smf::decode_seg(bytes);
    }
    let (w, h, data) = decode(bytes, Kind::Gray)?;
    Ok(SegmentMap::new(
        w,
        h,
        data.into_iter().map(u32::from).collect(),
    )?)
}

pub fn load_segment_map(path: &Path) -> Result<SegmentMap> {
    load_with(path, decode_segment_map)
}

pub fn save_segment_map(seg: &SegmentMap, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_segment_map(seg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_pixel() {
        let img = decode_ppm(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(img.dims(), (1, 1));
        assert_eq!(img.as_bytes(), &[255, 0, 0]);
    }

    #[test]
    fn zero_label_map_is_fifteen_bytes() {
        let bytes = encode_label_map(&LabelMap::filled(2, 2, 0).unwrap());
        assert_eq!(bytes.len(), 15);
        assert_eq!(&bytes, b"P5\n2 2\n255\n\0\0\0\0");
    }

    #[test]
    fn gray_file_is_not_rgb() {
        let err = decode_ppm(b"P5\n1 1\n255\n\0").unwrap_err();
        assert!(err.to_string().contains("wrong magic"), "{err}");
    }

    #[test]
    fn comments_and_odd_whitespace_are_accepted() {
        let img = decode_ppm(b"P6 # made by hand\n  2\t1\r\n# depth\n255\n\x01\x02\x03\x04\x05\x06").unwrap();
        assert_eq!(img.as_bytes(), &[1, 2, 3, 4, 5, 6]);
        assert_eq!(encode_ppm(&img), b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06");
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let cases: [(&[u8], usize, &str); 7] = [
            (b"P6\n1 1\n65535\n\0\0\0", 7, "maxval"),
            (b"P6\n1 1\n255\n\0\0", 13, "truncated payload"),
            (b"P6\n1 1\n255\n\0\0\0\0", 14, "trailing"),
            (b"P6\n0 1\n255\n", 3, "width"),
            (b"P6\nx 1\n255\n", 3, "expected width"),
            (b"P6\n1 1\n255", 10, "truncated header"),
            (b"P", 0, "truncated header"),
        ];
        for (bytes, offset, what) in cases {
            match decode_ppm(bytes).unwrap_err() {
                Error::Format { offset: o, message } => {
                    assert_eq!(o, offset, "{message}");
                    assert!(message.contains(what), "{message}");
                }
                e => panic!("unexpected {e}"),
            }
        }
    }

    #[test]
    fn perimeter_values_are_checked() {
        assert!(decode_perimeter_map(b"P5\n2 1\n255\n\x00\xff").is_ok());
        assert!(decode_perimeter_map(b"P5\n2 1\n255\n\x00\x07").is_err());
    }

    #[test]
    fn ignore_label_round_trips() {
        let map = LabelMap::new(3, 1, vec![0, 255, 4]).unwrap();
        assert_eq!(decode_label_map(&encode_label_map(&map)).unwrap(), map);
    }

    #[test]
    fn segment_maps_switch_format_above_255() {
        let small = SegmentMap::new(2, 1, vec![0, 1]).unwrap();
        assert!(encode_segment_map(&small).starts_with(b"P5"));
        let big = SegmentMap::new(300, 1, (0..300).collect()).unwrap();
        let bytes = encode_segment_map(&big);
        assert!(bytes.starts_with(b"SEG1 300 1\n"));
        assert_eq!(decode_segment_map(&bytes).unwrap(), big);
        assert_eq!(decode_segment_map(&encode_segment_map(&small)).unwrap(), small);
    }
}
