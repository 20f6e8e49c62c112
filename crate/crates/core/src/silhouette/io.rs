//! Sequence-on-disk format: a directory of binary PGM frames
//! (`frame_000.pgm`, ...) plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Dims, SequenceMeta, SilhouetteSequence};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "L")]
    pub frames: usize,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(flatten)]
    pub meta: SequenceMeta,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:03}.pgm")
}

/// Encodes one frame as binary PGM (P5, maxval 255).
pub fn encode_pgm<S: Scalar>(frame: &[S], height: usize, width: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(frame.iter().map(|v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

/// Decodes a binary PGM frame into intensities in [0, 1].
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::format(path, format!("expected P5 magic, got {}", fields[0])));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad PGM header field {s:?}")))
    };
    let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(Error::format(path, format!("expected maxval 255, got {maxval}")));
    }
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() != width * height {
        return Err(Error::format(
            path,
            format!("expected {} raster bytes, got {}", width * height, raster.len()),
        ));
    }
    Ok((height, width, raster.iter().map(|&b| b as f64 / 255.0).collect()))
}

pub fn write_sequence<S: Scalar>(seq: &SilhouetteSequence<S>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dims = seq.dims();
    for (i, frame) in seq.frames().enumerate() {
        let path = dir.join(frame_file_name(i));
        fs::write(&path, encode_pgm(frame, dims.height, dims.width)).map_err(|e| Error::io(&path, e))?;
    }
    let manifest = Manifest {
        frames: dims.frames,
        height: dims.height,
        width: dims.width,
        meta: seq.meta.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

pub fn read_sequence(dir: &Path) -> Result<SilhouetteSequence> {
    let manifest = read_manifest(dir)?;
    let dims = Dims::new(manifest.frames, manifest.height, manifest.width);
    let mut data = Vec::with_capacity(dims.numel());
    for i in 0..dims.frames {
        let path = dir.join(frame_file_name(i));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let (h, w, frame) = decode_pgm(&bytes, &path)?;
        if (h, w) != (dims.height, dims.width) {
            return Err(Error::format(
                &path,
                format!("frame is {h}x{w}, manifest says {}x{}", dims.height, dims.width),
            ));
        }
        data.extend(frame);
    }
    Ok(SilhouetteSequence::new(dims, data)?.with_meta(manifest.meta))
}

/// Sequence directories directly under `root` (those holding a manifest),
/// sorted by path.
pub fn list_sequence_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() && path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}
