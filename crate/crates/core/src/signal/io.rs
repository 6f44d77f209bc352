//! On-disk formats for scenes, signals, and spectra.
//!
//! Scenes are JSON:
//!
//! ```json
//! { "format": "swinfreq-scenes", "version": 1,
//!   "scenes": [ { "freqs": [0.1, -0.3], "amps": [[1.0, 0.0], [0.0, 0.5]] } ] }
//! ```
//!
//! Signals and spectra are flat little-endian records:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"SSRR"`                         |
//! | 4      | 2    | version (`u16`, currently 1)            |
//! | 6      | 1    | dtype: 0 = real f64, 1 = complex f64    |
//! | 7      | 1    | reserved, 0                             |
//! | 8      | 8    | length (`u64`, element count)           |
//! | 16     | ...  | payload: `f64` values, complex as re,im |
//!
//! A dataset file is a plain concatenation of records alternating
//! signal, target, signal, target, ...

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexSignal, FrequencyScene, RealSpectrum};
use crate::error::{Error, Result};

pub const RECORD_MAGIC: [u8; 4] = *b"SSRR";
pub const RECORD_VERSION: u16 = 1;
pub const SCENES_FORMAT: &str = "swinfreq-scenes";
pub const SCENES_VERSION: u32 = 1;

const DTYPE_REAL: u8 = 0;
const DTYPE_COMPLEX: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Signal(ComplexSignal),
    Spectrum(RealSpectrum),
}

pub fn write_signal<W: Write + ?Sized>(w: &mut W, signal: &ComplexSignal) -> Result<()> {
    write_header(w, DTYPE_COMPLEX, signal.len())?;
    for s in &signal.samples {
        w.write_all(&s.re.to_le_bytes())?;
        w.write_all(&s.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_spectrum<W: Write + ?Sized>(w: &mut W, spectrum: &RealSpectrum) -> Result<()> {
    write_header(w, DTYPE_REAL, spectrum.len())?;
    for v in &spectrum.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_header<W: Write + ?Sized>(w: &mut W, dtype: u8, len: usize) -> Result<()> {
    w.write_all(&RECORD_MAGIC)?;
    w.write_all(&RECORD_VERSION.to_le_bytes())?;
    w.write_all(&[dtype, 0])?;
    w.write_all(&(len as u64).to_le_bytes())?;
    Ok(())
}

/// Read the next record; `Ok(None)` on a clean end of stream.
pub fn read_record<R: Read>(r: &mut R, path: &Path) -> Result<Option<Record>> {
    let corrupt = |reason: String| Error::Corrupt { path: path.to_path_buf(), reason };
    let mut header = [0u8; 16];
    match read_full(r, &mut header)? {
        0 => return Ok(None),
        16 => {}
        n => return Err(corrupt(format!("truncated record header ({n} of 16 bytes)"))),
    }
    if header[0..4] != RECORD_MAGIC {
        return Err(corrupt("bad record magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != RECORD_VERSION {
        return Err(Error::Version { expected: RECORD_VERSION as u32, found: version as u32 });
    }
    let dtype = header[6];
    let len = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let scalars = match dtype {
        DTYPE_REAL => len,
        DTYPE_COMPLEX => 2 * len,
        d => return Err(corrupt(format!("unknown dtype {d}"))),
    };
    let mut payload = vec![0u8; scalars * 8];
    if read_full(r, &mut payload)? != payload.len() {
        return Err(corrupt("truncated record payload".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rec = if dtype == DTYPE_REAL {
        Record::Spectrum(RealSpectrum::new(values).map_err(|e| corrupt(e.to_string()))?)
    } else {
        let samples = values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        Record::Signal(ComplexSignal::new(samples).map_err(|e| corrupt(e.to_string()))?)
    };
    Ok(Some(rec))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

/// One training/evaluation item: model input and ground-truth spectrum.
pub type Example = (ComplexSignal, RealSpectrum);

pub fn write_dataset(path: &Path, items: &[Example]) -> Result<()> {
    crate::fsutil::write_atomic(path, |w| {
        for (s, t) in items {
            write_signal(w, s)?;
            write_spectrum(w, t)?;
        }
        Ok(())
    })
}

pub fn read_dataset(path: &Path) -> Result<Vec<Example>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    loop {
        let signal = match read_record(&mut r, path)? {
            None => break,
            Some(Record::Signal(s)) => s,
            Some(Record::Spectrum(_)) => {
                return Err(Error::Corrupt {
                    path: path.to_path_buf(),
                    reason: format!("record {} should be a signal", 2 * out.len()),
                })
            }
        };
        let target = match read_record(&mut r, path)? {
            Some(Record::Spectrum(t)) => t,
            _ => {
                return Err(Error::Corrupt {
                    path: path.to_path_buf(),
                    reason: format!("signal {} has no target spectrum", out.len()),
                })
            }
        };
        out.push((signal, target));
    }
    Ok(out)
}

pub fn write_signal_file(path: &Path, signal: &ComplexSignal) -> Result<()> {
    crate::fsutil::write_atomic(path, |w| write_signal(w, signal))
}

pub fn write_spectrum_file(path: &Path, spectrum: &RealSpectrum) -> Result<()> {
    crate::fsutil::write_atomic(path, |w| write_spectrum(w, spectrum))
}

pub fn read_signal_file(path: &Path) -> Result<ComplexSignal> {
    let mut r = BufReader::new(File::open(path)?);
    match read_record(&mut r, path)? {
        Some(Record::Signal(s)) => Ok(s),
        _ => Err(Error::Corrupt { path: path.to_path_buf(), reason: "expected a complex signal record".into() }),
    }
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format: String,
    version: u32,
    scenes: Vec<FrequencyScene>,
}

pub fn scenes_to_json(scenes: &[FrequencyScene]) -> Result<String> {
    let file = SceneFile {
        format: SCENES_FORMAT.into(),
        version: SCENES_VERSION,
        scenes: scenes.to_vec(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn scenes_from_json(text: &str) -> Result<Vec<FrequencyScene>> {
    let file: SceneFile = serde_json::from_str(text)?;
    if file.format != SCENES_FORMAT {
        return Err(Error::invalid(format!("not a scene file (format `{}`)", file.format)));
    }
    if file.version != SCENES_VERSION {
        return Err(Error::Version { expected: SCENES_VERSION, found: file.version });
    }
    file.scenes
        .into_iter()
        .map(|s| FrequencyScene::new(s.freqs, s.amps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_layout_is_stable() {
        let s = ComplexSignal::new(vec![Complex64::new(1.0, -2.0)]).unwrap();
        let mut buf = Vec::new();
        write_signal(&mut buf, &s).unwrap();
        assert_eq!(&buf[0..4], b"SSRR");
        assert_eq!(&buf[4..8], &[1, 0, 1, 0]);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), -2.0);
        assert_eq!(buf.len(), 32);
    }

    #[test]
    fn truncated_record_is_corrupt() {
        let t = RealSpectrum::new(vec![0.5; 10]).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 3);
        let err = read_record(&mut buf.as_slice(), Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Corrupt { .. }));
        assert!(read_record(&mut &[][..], Path::new("x")).unwrap().is_none());
    }

    #[test]
    fn scene_json_round_trip() {
        let scenes = vec![FrequencyScene::new(
            vec![0.1, -0.3],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)],
        )
        .unwrap()];
        let text = scenes_to_json(&scenes).unwrap();
        assert!(text.contains("\"format\": \"swinfreq-scenes\""));
        assert_eq!(scenes_from_json(&text).unwrap(), scenes);
    }
}
