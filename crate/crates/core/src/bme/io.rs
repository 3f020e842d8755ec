//! PGM images and the text archive of a fitted template model.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;

use super::params::BmeParams;
use super::spec::TemplateSpec;
use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};

/// Gray levels of the model live in `[0, 2]`; 8-bit files map that range
/// linearly onto `0..=255`.
const GRAY_RANGE: f64 = 2.0;
const ARCHIVE_HEADER: &str = "amala-saem-template";
const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Binary (P5) 8-bit PGM, row-major with the first row at the top. Values
/// outside `[0, 2]` are clamped.
pub fn write_pgm<W: Write>(mut out: W, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            got: values.len(),
        });
    }
    write!(out, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (v / GRAY_RANGE * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Reads P5 or P2 files with `maxval <= 255`.
pub fn read_pgm<R: Read>(mut input: R) -> Result<Pgm> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut pos = 0;
    let mut token = |data: &[u8]| -> Result<String> {
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    let magic = token(&data)?;
    let num = |s: String| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let width = num(token(&data)?)?;
    let height = num(token(&data)?)?;
    let maxval = num(token(&data)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    let scale = GRAY_RANGE / maxval as f64;
    let n = width * height;
    let values = match magic.as_str() {
        "P5" => {
            let start = pos + 1;
            let raw = data
                .get(start..start + n)
                .ok_or_else(|| Error::Format("truncated PGM data".into()))?;
            raw.iter().map(|b| *b as f64 * scale).collect()
        }
        "P2" => (0..n)
            .map(|_| token(&data).and_then(num).map(|v| v as f64 * scale))
            .collect::<Result<_>>()?,
        other => return Err(Error::Format(format!("not a PGM file (magic {other:?})"))),
    };
    Ok(Pgm {
        width,
        height,
        values,
    })
}

/// A template model ready for sampling or classification.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: TemplateSpec,
    pub params: BmeParams,
}

impl FittedModel {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.spec;
        writeln!(out, "{ARCHIVE_HEADER} {ARCHIVE_VERSION}")?;
        writeln!(out, "grid_side {}", s.grid_side)?;
        writeln!(out, "photo_side {}", s.photo_side)?;
        writeln!(out, "geo_side {}", s.geo_side)?;
        writeln!(out, "photo_bandwidth {}", fmt_f64(s.photo_bandwidth))?;
        writeln!(out, "geo_bandwidth {}", fmt_f64(s.geo_bandwidth))?;
        writeln!(out, "sigma2 {}", fmt_f64(self.params.sigma2))?;
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(fmt_f64).collect::<Vec<_>>().join(" ");
        writeln!(
            out,
            "alpha {}",
            join(&mut self.params.alpha.iter().cloned())
        )?;
        writeln!(
            out,
            "gamma {}",
            join(&mut self.params.gamma().transpose().iter().cloned())
        )?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let expected = format!("{ARCHIVE_HEADER} {ARCHIVE_VERSION}");
        if header.trim() != expected {
            return Err(Error::Format(format!(
                "expected archive header {expected:?}, found {header:?}"
            )));
        }
        let mut fields = std::collections::BTreeMap::new();
        for line in lines {
            let line = line?;
            let mut parts = line.splitn(2, ' ');
            if let (Some(k), Some(v)) = (parts.next(), parts.next()) {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| Error::Format(format!("archive is missing {k:?}")))
        };
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {s:?}")))
        };
        let int = |k: &str| {
            get(k)?
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("bad integer for {k}")))
        };
        let floats = |k: &str| {
            get(k)?
                .split_whitespace()
                .map(float)
                .collect::<Result<Vec<f64>>>()
        };

        let spec = TemplateSpec::new(
            int("grid_side")?,
            int("photo_side")?,
            int("geo_side")?,
            float(get("photo_bandwidth")?.trim())?,
            float(get("geo_bandwidth")?.trim())?,
        )?;
        let alpha = floats("alpha")?;
        let gamma = floats("gamma")?;
        let d = spec.latent_dim();
        if alpha.len() != spec.k_p() {
            return Err(Error::DimensionMismatch {
                expected: spec.k_p(),
                got: alpha.len(),
            });
        }
        if gamma.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: gamma.len(),
            });
        }
        let params = BmeParams::new(
            alpha,
            float(get("sigma2")?.trim())?,
            DMatrix::from_row_slice(d, d, &gamma),
        )?;
        Ok(Self { spec, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_on_the_byte_lattice() {
        let values: Vec<f64> = (0..12).map(|i| (i * 20) as f64 * 2.0 / 255.0).collect();
        let mut buf = Vec::new();
        write_pgm(&mut buf, 4, 3, &values).unwrap();
        assert!(buf.starts_with(b"P5\n4 3\n255\n"));
        let back = read_pgm(&buf[..]).unwrap();
        assert_eq!((back.width, back.height), (4, 3));
        for (a, b) in back.values.iter().zip(&values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pgm_clamps_and_reads_ascii() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 3, 1, &[-1.0, 1.0, 5.0]).unwrap();
        assert_eq!(&buf[buf.len() - 3..], &[0, 128, 255]);
        let ascii = b"P2\n# comment\n2 1\n255\n0 255\n";
        assert_eq!(read_pgm(&ascii[..]).unwrap().values, vec![0.0, 2.0]);
        assert!(read_pgm(&b"P6\n1 1\n255\n\0"[..]).is_err());
        assert!(read_pgm(&b"P5\n4 4\n255\n\0"[..]).is_err());
    }

    #[test]
    fn archive_round_trip() {
        let spec = TemplateSpec::default();
        let gamma = DMatrix::from_fn(
            18,
            18,
            |r, c| if r == c { 0.01 + r as f64 * 1e-3 } else { 1e-4 },
        );
        let params =
            BmeParams::new((0..25).map(|j| j as f64 / 7.0).collect(), 0.0391, gamma).unwrap();
        let m = FittedModel { spec, params };
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(FittedModel::read(&buf[..]).unwrap(), m);
        let bad = String::from_utf8(buf)
            .unwrap()
            .replace("template 1", "template 9");
        assert!(FittedModel::read(bad.as_bytes()).is_err());
    }
}
