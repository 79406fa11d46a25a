use std::collections::BTreeMap;
use std::path::Path;

use perimeterfit_core::Palette;

use crate::error::{Error, Result};
use crate::fsio;

/// The PASCAL VOC colormap: bits of the class id spread over the high bits
/// of the three channels.
pub fn voc_palette(num_classes: usize) -> Palette {
    (0..num_classes.min(256))
        .map(|id| {
            let mut rgb = [0u8; 3];
            let mut c = id;
            for shift in (0..8).rev() {
                for (ch, v) in rgb.iter_mut().enumerate() {
                    *v |= (((c >> ch) & 1) as u8) << shift;
                }
                c >>= 3;
            }
            (id as u8, rgb)
        })
        .collect()
}

/// Reads a JSON object mapping decimal class ids to `[r, g, b]`.
pub fn load_palette(path: &Path) -> Result<Palette> {
    let raw: BTreeMap<String, [u8; 3]> = fsio::read_json(path)?;
    raw.into_iter()
        .map(|(k, rgb)| {
            let id = k
                .parse::<u8>()
                .ok()
                .filter(|id| id.to_string() == k)
                .ok_or_else(|| {
                    Error::Usage(format!("{}: bad class id key {k:?}", path.display()))
                })?;
            Ok((id, rgb))
        })
        .collect()
}

pub fn save_palette(palette: &Palette, path: &Path) -> Result<()> {
    let raw: BTreeMap<String, [u8; 3]> = palette.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    fsio::write_json(path, &raw)
}
