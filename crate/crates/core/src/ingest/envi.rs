//! ENVI raster reader and writer.
//!
//! Headers are the usual `key = value` text with `{ ... }` list values that
//! may span lines. The binary payload is raw samples in BSQ, BIL or BIP
//! order. Supported sample types are unsigned byte (1), signed 16-bit (2)
//! and 32-bit float (4); byte order 0 is little endian, 1 is big endian.
//! The writer always emits little-endian data and a canonical header layout
//! so that write -> read -> write round-trips are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array3, ArrayView2};

use super::{HyperspectralCube, Unit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleave {
    Bsq,
    Bil,
    Bip,
}

impl Interleave {
    pub fn as_str(self) -> &'static str {
        match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        }
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "bsq" => Ok(Interleave::Bsq),
            "bil" => Ok(Interleave::Bil),
            "bip" => Ok(Interleave::Bip),
            other => Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("unknown interleave `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    F32,
}

impl DataType {
    fn code(self) -> i64 {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::F32 => 4,
        }
    }

    fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::F32 => 4,
        }
    }

    fn from_code(code: i64) -> Result<Self> {
        match code {
            1 => Ok(DataType::U8),
            2 => Ok(DataType::I16),
            4 => Ok(DataType::F32),
            other => Err(Error::UnsupportedDataType { code: other }),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

// ---- header parsing ----

struct Header {
    samples: usize,
    lines: usize,
    bands: usize,
    interleave: Interleave,
    dtype: DataType,
    big_endian: bool,
    offset: usize,
    wavelengths_um: Option<Vec<f64>>,
    unit: Unit,
}

fn parse_header_text(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut fields = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    while let Some((_, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() || line.eq_ignore_ascii_case("envi") {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("line without `=`: `{line}`"),
            });
        };
        let key = line[..eq].trim().to_ascii_lowercase();
        let mut value = line[eq + 1..].trim().to_string();
        if value.starts_with('{') && !value.contains('}') {
            for (_, cont) in lines.by_ref() {
                value.push(' ');
                value.push_str(cont.trim());
                if cont.contains('}') {
                    break;
                }
            }
            if !value.contains('}') {
                return Err(Error::MalformedHeader {
                    path: path.to_path_buf(),
                    reason: format!("unterminated list for key `{key}`"),
                });
            }
        }
        fields.insert(key, value);
    }
    Ok(fields)
}

fn header_usize(fields: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<usize> {
    let raw = fields.get(key).ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: format!("missing required key `{key}`"),
    })?;
    raw.parse().map_err(|_| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: format!("key `{key}`: `{raw}` is not a non-negative integer"),
    })
}

fn parse_header(text: &str, path: &Path) -> Result<Header> {
    let fields = parse_header_text(text, path)?;
    let samples = header_usize(&fields, "samples", path)?;
    let lines = header_usize(&fields, "lines", path)?;
    let bands = header_usize(&fields, "bands", path)?;
    if samples == 0 || lines == 0 || bands == 0 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "zero-sized dimension".into(),
        });
    }
    let dtype = DataType::from_code(header_usize(&fields, "data type", path)? as i64)?;
    let interleave = Interleave::parse(
        fields.get("interleave").ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "missing required key `interleave`".into(),
        })?,
        path,
    )?;
    let big_endian = match header_usize(&fields, "byte order", path)? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("byte order must be 0 or 1, got {other}"),
            })
        }
    };
    let offset = match fields.get("header offset") {
        Some(raw) => raw.parse().map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("header offset `{raw}` is not an integer"),
        })?,
        None => 0,
    };

    let mut wavelengths_um = match fields.get("wavelength") {
        Some(raw) => Some(parse_float_list(raw, path, bands)?),
        None => None,
    };
    // Sensors commonly publish band centers in nanometers; normalize.
    if let (Some(wl), Some(units)) = (&mut wavelengths_um, fields.get("wavelength units")) {
        if units.eq_ignore_ascii_case("nanometers") {
            for w in wl.iter_mut() {
                *w /= 1000.0;
            }
        }
    }

    let unit = match fields.get("data units").map(|s| s.to_ascii_lowercase()) {
        Some(ref s) if s == "reflectance" => Unit::Reflectance,
        _ => Unit::Radiance,
    };

    Ok(Header {
        samples,
        lines,
        bands,
        interleave,
        dtype,
        big_endian,
        offset,
        wavelengths_um,
        unit,
    })
}

fn parse_float_list(raw: &str, path: &Path, expect: usize) -> Result<Vec<f64>> {
    let inner = raw
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "list value must be wrapped in { }".into(),
        })?;
    let mut out = Vec::with_capacity(expect);
    for item in inner.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        out.push(item.parse().map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("`{item}` is not a number"),
        })?);
    }
    if out.len() != expect {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("wavelength list has {} entries for {expect} bands", out.len()),
        });
    }
    Ok(out)
}

// ---- reading ----

/// Resolve a user-supplied path to the `(header, data)` pair of a stored
/// raster. Either half may be named: the partner is looked up next to it,
/// covering both the `cube.hdr`/`cube.img` and the `cube.img.hdr` sidecar
/// conventions.
pub fn locate_envi(path: &Path) -> Result<(PathBuf, PathBuf)> {
    let missing = |what: &str| Error::IoFailure {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, what.to_string()),
    };
    if !path.exists() {
        // Bare basename of a written pair: resolve through its header.
        let mut appended = path.as_os_str().to_os_string();
        appended.push(".hdr");
        let appended = PathBuf::from(appended);
        if appended.is_file() {
            return locate_envi(&appended);
        }
        return Err(missing("file not found"));
    }
    let is_hdr = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("hdr"));
    if is_hdr {
        let stripped = path.with_extension("");
        if stripped.extension().is_some() && stripped.is_file() {
            return Ok((path.to_path_buf(), stripped));
        }
        for ext in ["img", "dat", "raw", "bsq", "bil", "bip"] {
            let cand = path.with_extension(ext);
            if cand.is_file() {
                return Ok((path.to_path_buf(), cand));
            }
        }
        if stripped.is_file() {
            return Ok((path.to_path_buf(), stripped));
        }
        Err(missing("no data file next to this header"))
    } else {
        let mut appended = path.as_os_str().to_os_string();
        appended.push(".hdr");
        let appended = PathBuf::from(appended);
        if appended.is_file() {
            return Ok((appended, path.to_path_buf()));
        }
        let replaced = path.with_extension("hdr");
        if replaced.is_file() {
            return Ok((replaced, path.to_path_buf()));
        }
        Err(missing("no header next to this data file"))
    }
}

/// Read an ENVI cube from a header file and its binary payload.
pub fn read_envi(header_path: &Path, data_path: &Path) -> Result<HyperspectralCube> {
    let text = std::fs::read_to_string(header_path).map_err(|e| io_err(header_path, e))?;
    let hdr = parse_header(&text, header_path)?;
    let bytes = std::fs::read(data_path).map_err(|e| io_err(data_path, e))?;

    let n = hdr.samples * hdr.lines * hdr.bands;
    let expected = hdr.offset as u64 + (n * hdr.dtype.size()) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: data_path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    let payload = &bytes[hdr.offset..];

    let mut flat = vec![0.0f64; n];
    decode_samples(payload, hdr.dtype, hdr.big_endian, &mut flat);

    let (rows, cols, bands) = (hdr.lines, hdr.samples, hdr.bands);
    let mut data = Array3::zeros((rows, cols, bands));
    match hdr.interleave {
        Interleave::Bsq => {
            for b in 0..bands {
                for r in 0..rows {
                    for c in 0..cols {
                        data[[r, c, b]] = flat[(b * rows + r) * cols + c];
                    }
                }
            }
        }
        Interleave::Bil => {
            for r in 0..rows {
                for b in 0..bands {
                    for c in 0..cols {
                        data[[r, c, b]] = flat[(r * bands + b) * cols + c];
                    }
                }
            }
        }
        Interleave::Bip => {
            for r in 0..rows {
                for c in 0..cols {
                    for b in 0..bands {
                        data[[r, c, b]] = flat[(r * cols + c) * bands + b];
                    }
                }
            }
        }
    }

    HyperspectralCube::new(data, hdr.wavelengths_um, hdr.unit)
}

fn decode_samples(payload: &[u8], dtype: DataType, big_endian: bool, out: &mut [f64]) {
    match dtype {
        DataType::U8 => {
            for (dst, &b) in out.iter_mut().zip(payload) {
                *dst = b as f64;
            }
        }
        DataType::I16 => {
            for (dst, ch) in out.iter_mut().zip(payload.chunks_exact(2)) {
                let raw = [ch[0], ch[1]];
                let v = if big_endian {
                    i16::from_be_bytes(raw)
                } else {
                    i16::from_le_bytes(raw)
                };
                *dst = v as f64;
            }
        }
        DataType::F32 => {
            for (dst, ch) in out.iter_mut().zip(payload.chunks_exact(4)) {
                let raw = [ch[0], ch[1], ch[2], ch[3]];
                let v = if big_endian {
                    f32::from_be_bytes(raw)
                } else {
                    f32::from_le_bytes(raw)
                };
                *dst = v as f64;
            }
        }
    }
}

// ---- writing ----

fn encode_sample(value: f64, dtype: DataType, out: &mut Vec<u8>) {
    match dtype {
        DataType::U8 => out.push(value.round().clamp(0.0, 255.0) as u8),
        DataType::I16 => out.extend_from_slice(
            &(value.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16).to_le_bytes(),
        ),
        DataType::F32 => out.extend_from_slice(&(value as f32).to_le_bytes()),
    }
}

fn format_header(
    rows: usize,
    cols: usize,
    bands: usize,
    dtype: DataType,
    interleave: Interleave,
    wavelengths_um: Option<&[f64]>,
    unit: Unit,
) -> String {
    let mut hdr = String::from("ENVI\n");
    hdr.push_str(&format!("samples = {cols}\n"));
    hdr.push_str(&format!("lines = {rows}\n"));
    hdr.push_str(&format!("bands = {bands}\n"));
    hdr.push_str("header offset = 0\nfile type = ENVI Standard\n");
    hdr.push_str(&format!("data type = {}\n", dtype.code()));
    hdr.push_str(&format!("interleave = {}\n", interleave.as_str()));
    hdr.push_str("byte order = 0\n");
    hdr.push_str(&format!(
        "data units = {}\n",
        match unit {
            Unit::Radiance => "radiance",
            Unit::Reflectance => "reflectance",
        }
    ));
    if let Some(wl) = wavelengths_um {
        hdr.push_str("wavelength units = Micrometers\n");
        let items: Vec<String> = wl.iter().map(|w| format!("{w}")).collect();
        hdr.push_str(&format!("wavelength = {{ {} }}\n", items.join(", ")));
    }
    hdr
}

/// Write a cube as `<base>.hdr` + `<base>.img`; returns the two paths.
///
/// The full band set is written; band masks are pipeline state, not a
/// property of the stored raster.
pub fn write_envi_cube(
    base: &Path,
    cube: &HyperspectralCube,
    dtype: DataType,
    interleave: Interleave,
) -> Result<(PathBuf, PathBuf)> {
    let (rows, cols, bands) = cube.data.dim();
    let header = format_header(
        rows,
        cols,
        bands,
        dtype,
        interleave,
        cube.wavelengths_um.as_deref(),
        cube.unit,
    );
    let mut payload = Vec::with_capacity(rows * cols * bands * dtype.size());
    match interleave {
        Interleave::Bsq => {
            for b in 0..bands {
                for r in 0..rows {
                    for c in 0..cols {
                        encode_sample(cube.data[[r, c, b]], dtype, &mut payload);
                    }
                }
            }
        }
        Interleave::Bil => {
            for r in 0..rows {
                for b in 0..bands {
                    for c in 0..cols {
                        encode_sample(cube.data[[r, c, b]], dtype, &mut payload);
                    }
                }
            }
        }
        Interleave::Bip => {
            for r in 0..rows {
                for c in 0..cols {
                    for b in 0..bands {
                        encode_sample(cube.data[[r, c, b]], dtype, &mut payload);
                    }
                }
            }
        }
    }
    write_pair(base, &header, &payload)
}

/// Write a single-band raster (class maps, availability and abundance grids).
pub fn write_envi_band(
    base: &Path,
    values: ArrayView2<'_, f64>,
    dtype: DataType,
) -> Result<(PathBuf, PathBuf)> {
    let (rows, cols) = values.dim();
    let header = format_header(rows, cols, 1, dtype, Interleave::Bsq, None, Unit::Reflectance);
    let mut payload = Vec::with_capacity(rows * cols * dtype.size());
    for r in 0..rows {
        for c in 0..cols {
            encode_sample(values[[r, c]], dtype, &mut payload);
        }
    }
    write_pair(base, &header, &payload)
}

fn write_pair(base: &Path, header: &str, payload: &[u8]) -> Result<(PathBuf, PathBuf)> {
    let hdr_path = base.with_extension("hdr");
    let img_path = base.with_extension("img");
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    let mut f = std::fs::File::create(&hdr_path).map_err(|e| io_err(&hdr_path, e))?;
    f.write_all(header.as_bytes()).map_err(|e| io_err(&hdr_path, e))?;
    let mut f = std::fs::File::create(&img_path).map_err(|e| io_err(&img_path, e))?;
    f.write_all(payload).map_err(|e| io_err(&img_path, e))?;
    Ok((hdr_path, img_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn sample_cube() -> HyperspectralCube {
        let data = Array3::from_shape_fn((3, 4, 5), |(r, c, b)| {
            (r as f64) * 100.0 + (c as f64) * 10.0 + b as f64 * 0.25
        });
        HyperspectralCube::new(
            data,
            Some(vec![0.4, 0.5, 0.6, 0.7, 0.8]),
            Unit::Reflectance,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_all_interleaves() {
        let cube = sample_cube();
        let dir = tempfile::tempdir().unwrap();
        for (i, ileave) in [Interleave::Bsq, Interleave::Bil, Interleave::Bip]
            .into_iter()
            .enumerate()
        {
            let base = dir.path().join(format!("c{i}"));
            let (hdr, img) = write_envi_cube(&base, &cube, DataType::F32, ileave).unwrap();
            let back = read_envi(&hdr, &img).unwrap();
            assert_eq!(back.unit, Unit::Reflectance);
            assert_eq!(back.wavelengths_um, cube.wavelengths_um);
            assert_eq!(back.data, cube.data);
        }
    }

    #[test]
    fn i16_values_survive() {
        let data = Array3::from_shape_fn((2, 2, 3), |(r, c, b)| ((r + c + b) as f64) * 7.0 - 5.0);
        let cube = HyperspectralCube::new(data, None, Unit::Radiance).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ints");
        let (hdr, img) = write_envi_cube(&base, &cube, DataType::I16, Interleave::Bil).unwrap();
        let back = read_envi(&hdr, &img).unwrap();
        assert_eq!(back.data, cube.data);
        assert_eq!(back.unit, Unit::Radiance);
    }

    #[test]
    fn size_mismatch_detected() {
        let cube = sample_cube();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        let (hdr, img) = write_envi_cube(&base, &cube, DataType::F32, Interleave::Bsq).unwrap();
        let mut bytes = std::fs::read(&img).unwrap();
        bytes.pop();
        std::fs::write(&img, &bytes).unwrap();
        assert!(matches!(
            read_envi(&hdr, &img),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_unknown_data_type() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = dir.path().join("c.hdr");
        std::fs::write(
            &hdr,
            "ENVI\nsamples = 1\nlines = 1\nbands = 1\ninterleave = bsq\ndata type = 12\nbyte order = 0\n",
        )
        .unwrap();
        let img = dir.path().join("c.img");
        std::fs::write(&img, [0u8, 0]).unwrap();
        assert!(matches!(
            read_envi(&hdr, &img),
            Err(Error::UnsupportedDataType { code: 12 })
        ));
    }

    #[test]
    fn missing_key_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = dir.path().join("c.hdr");
        std::fs::write(&hdr, "ENVI\nsamples = 1\nlines = 1\n").unwrap();
        let img = dir.path().join("c.img");
        std::fs::write(&img, [0u8]).unwrap();
        assert!(matches!(
            read_envi(&hdr, &img),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn multiline_wavelength_list() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = dir.path().join("c.hdr");
        std::fs::write(
            &hdr,
            "ENVI\nsamples = 1\nlines = 1\nbands = 2\ninterleave = bip\ndata type = 4\nbyte order = 0\nwavelength = { 400.0,\n 500.0 }\nwavelength units = Nanometers\n",
        )
        .unwrap();
        let img = dir.path().join("c.img");
        let mut payload = Vec::new();
        payload.extend_from_slice(&1.0f32.to_le_bytes());
        payload.extend_from_slice(&2.0f32.to_le_bytes());
        std::fs::write(&img, payload).unwrap();
        let cube = read_envi(&hdr, &img).unwrap();
        assert_eq!(cube.wavelengths_um, Some(vec![0.4, 0.5]));
    }

    #[test]
    fn big_endian_payload_decodes() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = dir.path().join("c.hdr");
        std::fs::write(
            &hdr,
            "ENVI\nsamples = 2\nlines = 1\nbands = 1\ninterleave = bsq\ndata type = 2\nbyte order = 1\n",
        )
        .unwrap();
        let img = dir.path().join("c.img");
        let mut payload = Vec::new();
        payload.extend_from_slice(&(-300i16).to_be_bytes());
        payload.extend_from_slice(&(1234i16).to_be_bytes());
        std::fs::write(&img, payload).unwrap();
        let cube = read_envi(&hdr, &img).unwrap();
        assert_eq!(cube.data[[0, 0, 0]], -300.0);
        assert_eq!(cube.data[[0, 1, 0]], 1234.0);
    }
}
