//! The AWF1 grid-field file format and its CSV variant.
//!
//! Binary: one ASCII header line
//! `AWF1 N=3 dims=<d1>,<d2>,<d3> L=<halfwidth> alpha=<a> s=<s>\n`
//! followed by little-endian `f64` values, `i3` fastest.
//!
//! CSV: an optional `# AWF1 ...` metadata comment, a header row
//! `i1,i2,i3,value`, then one row per cell. Values are written in shortest
//! round-trip form so both variants reproduce the samples bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{DelabError, Result};
use crate::wgrid::{GridField, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwfHeader {
    pub dims: [usize; 3],
    pub half_width: f64,
    pub alpha: f64,
    pub s: f64,
}

impl AwfHeader {
    pub fn for_field(field: &GridField, alpha: f64, s: f64) -> Self {
        AwfHeader { dims: field.spec.dims, half_width: field.spec.half_width, alpha, s }
    }

    pub fn line(&self) -> String {
        let [a, b, c] = self.dims;
        format!("AWF1 N=3 dims={a},{b},{c} L={} alpha={} s={}", self.half_width, self.alpha, self.s)
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = |why: &str| DelabError::Format(format!("malformed AWF1 header ({why}): {line:?}"));
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("AWF1") {
            return Err(bad("missing magic"));
        }
        let mut dims = None;
        let (mut l, mut alpha, mut s, mut n) = (None, None, None, None);
        for tok in tokens {
            let (key, val) = tok.split_once('=').ok_or_else(|| bad("token without '='"))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad("bad number"));
            match key {
                "N" => n = Some(val.parse::<usize>().map_err(|_| bad("bad N"))?),
                "dims" => {
                    let parts: Vec<usize> = val
                        .split(',')
                        .map(|d| d.parse::<usize>().map_err(|_| bad("bad dims")))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(bad("dims needs three entries"));
                    }
                    dims = Some([parts[0], parts[1], parts[2]]);
                }
                "L" => l = Some(num(val)?),
                "alpha" => alpha = Some(num(val)?),
                "s" => s = Some(num(val)?),
                _ => return Err(bad("unknown key")),
            }
        }
        if n != Some(3) {
            return Err(bad("N must be 3"));
        }
        Ok(AwfHeader {
            dims: dims.ok_or_else(|| bad("missing dims"))?,
            half_width: l.ok_or_else(|| bad("missing L"))?,
            alpha: alpha.ok_or_else(|| bad("missing alpha"))?,
            s: s.ok_or_else(|| bad("missing s"))?,
        })
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.dims, self.half_width)
    }
}

pub fn write_awf1<W: Write>(mut w: W, field: &GridField, alpha: f64, s: f64) -> Result<()> {
    writeln!(w, "{}", AwfHeader::for_field(field, alpha, s).line())?;
    let mut buf = Vec::with_capacity(8 * field.values.len());
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_awf1<R: Read>(r: R) -> Result<(AwfHeader, GridField)> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(DelabError::Format("AWF1 header line is not terminated".into()));
    }
    let text = std::str::from_utf8(&line[..line.len() - 1])
        .map_err(|_| DelabError::Format("AWF1 header is not UTF-8".into()))?;
    let header = AwfHeader::parse(text)?;
    let spec = header.spec()?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * spec.len() {
        return Err(DelabError::Format(format!(
            "expected {} payload bytes, found {}",
            8 * spec.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, GridField::new(spec, values)?))
}

pub fn write_csv<W: Write>(mut w: W, field: &GridField, alpha: f64, s: f64) -> Result<()> {
    writeln!(w, "# {}", AwfHeader::for_field(field, alpha, s).line())?;
    writeln!(w, "i1,i2,i3,value")?;
    for (idx, v) in field.values.iter().enumerate() {
        let [i, j, k] = field.spec.unravel(idx);
        writeln!(w, "{i},{j},{k},{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV variant. Without a metadata comment the grid shape is
/// inferred from the largest indices and `fallback` supplies `L`, `alpha`, `s`.
pub fn read_csv<R: Read>(r: R, fallback: Option<(f64, f64, f64)>) -> Result<(AwfHeader, GridField)> {
    let mut header: Option<AwfHeader> = None;
    let mut rows: Vec<([usize; 3], f64)> = Vec::new();
    let mut saw_columns = false;
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            header = Some(AwfHeader::parse(meta.trim())?);
            continue;
        }
        if !saw_columns {
            if line.replace(' ', "") != "i1,i2,i3,value" {
                return Err(DelabError::Format(format!("expected header row i1,i2,i3,value, got {line:?}")));
            }
            saw_columns = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || DelabError::Format(format!("bad CSV row {}: {line:?}", lineno + 1));
        if cols.len() != 4 {
            return Err(bad());
        }
        let ix = |c: &str| c.parse::<usize>().map_err(|_| bad());
        rows.push(([ix(cols[0])?, ix(cols[1])?, ix(cols[2])?], cols[3].parse::<f64>().map_err(|_| bad())?));
    }
    let header = match header {
        Some(h) => h,
        None => {
            let (l, alpha, s) = fallback
                .ok_or_else(|| DelabError::Format("CSV without metadata needs L, alpha, s".into()))?;
            let mut dims = [0usize; 3];
            for (ijk, _) in &rows {
                for a in 0..3 {
                    dims[a] = dims[a].max(ijk[a] + 1);
                }
            }
            AwfHeader { dims, half_width: l, alpha, s }
        }
    };
    let spec = header.spec()?;
    let mut values = vec![f64::NAN; spec.len()];
    for ([i, j, k], v) in rows {
        if i >= spec.dims[0] || j >= spec.dims[1] || k >= spec.dims[2] {
            return Err(DelabError::Format(format!("index ({i},{j},{k}) outside dims {:?}", spec.dims)));
        }
        values[spec.index(i, j, k)] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(DelabError::Format("CSV does not cover every cell".into()));
    }
    Ok((header, GridField::new(spec, values)?))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads AWF1 or, for a `.csv` extension, the CSV variant.
pub fn read_field_file(path: &Path, fallback: Option<(f64, f64, f64)>) -> Result<(AwfHeader, GridField)> {
    let file = File::open(path).map_err(|e| DelabError::Io(format!("{}: {e}", path.display())))?;
    if is_csv(path) {
        read_csv(file, fallback)
    } else {
        read_awf1(file)
    }
}

pub fn write_field_file(path: &Path, field: &GridField, alpha: f64, s: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| DelabError::Io(format!("{}: {e}", path.display())))?;
    let w = BufWriter::new(file);
    if is_csv(path) {
        write_csv(w, field, alpha, s)
    } else {
        write_awf1(w, field, alpha, s)
    }
}
