//! Text and binary formats for cell sets, grid functions, measures and cube families.
//!
//! Text files start with a header line `d n L [origin…]`; `#` starts a comment.
//! Binary files start with a four-byte magic followed by the same header in
//! little-endian 64-bit fields.

use std::fs;
use std::path::Path;

use crate::choquet::GridFunction;
use crate::error::{HctError, Result};
use crate::grid::{CellSet, DyadicCube, RootSpec, ShiftId};
use crate::riesz::{Atom, DiscreteMeasure};

const SET_MAGIC: &[u8; 4] = b"HCTS";
const FN_MAGIC: &[u8; 4] = b"HCTF";

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim())).filter(|(_, l)| !l.is_empty())
}

fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| HctError::parse(line, format!("cannot parse `{tok}`")))
}

fn parse_header(line: usize, text: &str) -> Result<RootSpec> {
    let toks: Vec<&str> = tokens(text).collect();
    if toks.len() < 3 {
        return Err(HctError::parse(line, "header must be `d n L [origin…]`"));
    }
    let dim: usize = num(line, toks[0])?;
    let levels: u32 = num(line, toks[1])?;
    let side: f64 = num(line, toks[2])?;
    let origin = match toks.len() - 3 {
        0 => vec![0.0; dim],
        k if k == dim => toks[3..].iter().map(|t| num(line, t)).collect::<Result<_>>()?,
        _ => return Err(HctError::parse(line, format!("expected {dim} origin coordinates"))),
    };
    RootSpec::with_origin(dim, side, origin, levels)
}

fn format_header(spec: &RootSpec) -> String {
    let mut out = format!("{} {} {}", spec.dim, spec.levels, spec.side);
    if spec.origin.iter().any(|&o| o != 0.0) {
        for o in &spec.origin {
            out.push_str(&format!(" {o}"));
        }
    }
    out
}

fn split_header(text: &str) -> Result<(RootSpec, impl Iterator<Item = (usize, &str)>)> {
    let mut lines = content_lines(text);
    let (n, header) = lines.next().ok_or_else(|| HctError::parse(1, "missing header"))?;
    Ok((parse_header(n, header)?, lines))
}

/// Members as `k i1 … id` lines; `k < n` lines add every cell of the cube.
pub fn parse_cellset(text: &str) -> Result<CellSet> {
    let (spec, lines) = split_header(text)?;
    let mut set = CellSet::empty(&spec);
    for (n, line) in lines {
        let toks: Vec<&str> = tokens(line).collect();
        if toks.len() != spec.dim + 1 {
            return Err(HctError::parse(n, format!("expected level and {} indices", spec.dim)));
        }
        let level: u32 = num(n, toks[0])?;
        let index: Vec<i64> = toks[1..].iter().map(|t| num(n, t)).collect::<Result<_>>()?;
        if level > spec.levels || index.iter().any(|&i| i < 0 || i >= 1i64 << level) {
            return Err(HctError::parse(n, format!("cube {level}:{index:?} outside the root")));
        }
        for c in spec.base_cube_cells(level, &index) {
            set.insert(c);
        }
    }
    Ok(set)
}

pub fn format_cellset(set: &CellSet) -> String {
    let spec = set.spec();
    let mut out = format_header(spec);
    out.push('\n');
    for c in set.iter() {
        out.push_str(&spec.levels.to_string());
        for i in spec.cell_coords(c) {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let out = self.bytes.get(self.pos..end).ok_or_else(|| HctError::parse(0, format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(HctError::parse(0, format!("missing magic {}", String::from_utf8_lossy(magic))));
        }
        Ok(())
    }

    fn header(&mut self) -> Result<RootSpec> {
        let dim = self.u64()? as usize;
        let levels = u32::try_from(self.u64()?).map_err(|_| HctError::parse(0, "level count too large"))?;
        let side = self.f64()?;
        if dim > 64 {
            return Err(HctError::parse(0, format!("dimension {dim} too large")));
        }
        let origin = (0..dim).map(|_| self.f64()).collect::<Result<_>>()?;
        RootSpec::with_origin(dim, side, origin, levels)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(HctError::parse(0, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn push_header(out: &mut Vec<u8>, magic: &[u8; 4], spec: &RootSpec) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(spec.dim as u64).to_le_bytes());
    out.extend_from_slice(&u64::from(spec.levels).to_le_bytes());
    out.extend_from_slice(&spec.side.to_le_bytes());
    for o in &spec.origin {
        out.extend_from_slice(&o.to_le_bytes());
    }
}

/// Run lengths alternate absent/present, starting with an absent run.
pub fn encode_cellset(set: &CellSet) -> Vec<u8> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut length = 0u64;
    for &m in set.mask() {
        if m != current {
            runs.push(length);
            current = m;
            length = 0;
        }
        length += 1;
    }
    runs.push(length);
    let mut out = Vec::with_capacity(44 + 8 * runs.len());
    push_header(&mut out, SET_MAGIC, set.spec());
    out.extend_from_slice(&(runs.len() as u64).to_le_bytes());
    for r in runs {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

pub fn decode_cellset(bytes: &[u8]) -> Result<CellSet> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(SET_MAGIC)?;
    let spec = r.header()?;
    spec.check_capacity(crate::grid::DEFAULT_CELL_CAP)?;
    let count = r.u64()?;
    let mut mask = Vec::with_capacity(spec.cell_count());
    let mut member = false;
    for _ in 0..count {
        let run = r.u64()? as usize;
        if mask.len() + run > spec.cell_count() {
            return Err(HctError::parse(0, "runs exceed the cell count"));
        }
        mask.resize(mask.len() + run, member);
        member = !member;
    }
    r.finish()?;
    CellSet::from_mask(&spec, mask)
}

/// Values in row-major order, one row of `2^n` values per line.
pub fn parse_function(text: &str) -> Result<GridFunction> {
    let (spec, lines) = split_header(text)?;
    let mut values = Vec::with_capacity(spec.cell_count());
    for (n, line) in lines {
        for t in tokens(line) {
            values.push(num(n, t)?);
        }
    }
    GridFunction::new(&spec, values)
}

pub fn format_function(f: &GridFunction) -> String {
    format_values(f.spec(), f.values())
}

pub(crate) fn format_values(spec: &RootSpec, values: &[f64]) -> String {
    let mut out = format_header(spec);
    out.push('\n');
    for row in values.chunks(spec.cells_per_axis()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_function(f: &GridFunction) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + 8 * (f.spec().dim + f.values().len()));
    push_header(&mut out, FN_MAGIC, f.spec());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_function(bytes: &[u8]) -> Result<GridFunction> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(FN_MAGIC)?;
    let spec = r.header()?;
    spec.check_capacity(crate::grid::DEFAULT_CELL_CAP)?;
    let values = (0..spec.cell_count()).map(|_| r.f64()).collect::<Result<_>>()?;
    r.finish()?;
    GridFunction::new(&spec, values)
}

/// `index,mass` lines for cell masses and `atom,x1,…,xd,mass` lines for atoms.
pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    let (spec, lines) = split_header(text)?;
    let mut cells = vec![0.0; spec.cell_count()];
    let mut atoms = Vec::new();
    for (n, line) in lines {
        let toks: Vec<&str> = tokens(line).collect();
        if toks.first() == Some(&"atom") {
            if toks.len() != spec.dim + 2 {
                return Err(HctError::parse(n, format!("atom needs {} coordinates and a mass", spec.dim)));
            }
            let position = toks[1..=spec.dim].iter().map(|t| num(n, t)).collect::<Result<_>>()?;
            atoms.push(Atom { position, mass: num(n, toks[spec.dim + 1])? });
        } else {
            if toks.len() != 2 {
                return Err(HctError::parse(n, "expected `index,mass`"));
            }
            let idx: usize = num(n, toks[0])?;
            let slot = cells.get_mut(idx).ok_or_else(|| HctError::parse(n, format!("cell {idx} outside the grid")))?;
            *slot += num::<f64>(n, toks[1])?;
        }
    }
    DiscreteMeasure::new(&spec, cells, atoms)
}

pub fn format_measure(mu: &DiscreteMeasure) -> String {
    let mut out = format_header(mu.spec());
    out.push('\n');
    for (i, &m) in mu.cell_mass().iter().enumerate() {
        if m != 0.0 {
            out.push_str(&format!("{i},{m}\n"));
        }
    }
    for a in mu.atoms() {
        out.push_str("atom");
        for x in &a.position {
            out.push_str(&format!(",{x}"));
        }
        out.push_str(&format!(",{}\n", a.mass));
    }
    out
}

/// Cube family as `k i1 … id [shift]` lines; levels may be negative on shifted lattices.
pub fn parse_family(text: &str) -> Result<(RootSpec, Vec<DyadicCube>)> {
    let (spec, lines) = split_header(text)?;
    let mut family = Vec::new();
    for (n, line) in lines {
        let toks: Vec<&str> = tokens(line).collect();
        let shift = match toks.len() {
            k if k == spec.dim + 1 => ShiftId::BASE,
            k if k == spec.dim + 2 => ShiftId(num(n, toks[spec.dim + 1])?),
            _ => return Err(HctError::parse(n, format!("expected level, {} indices and optional shift", spec.dim))),
        };
        let level: i32 = num(n, toks[0])?;
        let index = toks[1..=spec.dim].iter().map(|t| num(n, t)).collect::<Result<_>>()?;
        family.push(DyadicCube { level, index, shift });
    }
    Ok((spec, family))
}

pub fn format_family(spec: &RootSpec, family: &[DyadicCube]) -> String {
    let mut out = format_header(spec);
    out.push('\n');
    for c in family {
        out.push_str(&c.level.to_string());
        for i in &c.index {
            out.push_str(&format!(" {i}"));
        }
        if !c.shift.is_base() {
            out.push_str(&format!(" {}", c.shift.0));
        }
        out.push('\n');
    }
    out
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| HctError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HctError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| HctError::io(path, e))
}

fn is_binary_path(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("bin" | "hcts" | "hctf"))
}

/// Reads either format, recognising binary files by their magic.
pub fn read_cellset(path: &Path) -> Result<CellSet> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(SET_MAGIC) {
        decode_cellset(&bytes)
    } else {
        parse_cellset(&String::from_utf8_lossy(&bytes))
    }
}

/// Binary when the extension is `bin` or `hcts`, text otherwise.
pub fn write_cellset(path: &Path, set: &CellSet) -> Result<()> {
    if is_binary_path(path) {
        write_bytes(path, &encode_cellset(set))
    } else {
        write_bytes(path, format_cellset(set).as_bytes())
    }
}

pub fn read_function(path: &Path) -> Result<GridFunction> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(FN_MAGIC) {
        decode_function(&bytes)
    } else {
        parse_function(&String::from_utf8_lossy(&bytes))
    }
}

/// Binary when the extension is `bin` or `hctf`, CSV otherwise.
pub fn write_function(path: &Path, f: &GridFunction) -> Result<()> {
    if is_binary_path(path) {
        write_bytes(path, &encode_function(f))
    } else {
        write_bytes(path, format_function(f).as_bytes())
    }
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    parse_measure(&read_text(path)?)
}

pub fn write_measure(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    write_bytes(path, format_measure(mu).as_bytes())
}

pub fn read_family(path: &Path) -> Result<(RootSpec, Vec<DyadicCube>)> {
    parse_family(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cellset_text_with_coarse_lines() {
        let set = parse_cellset("2 2 1\n# two cells and a quadrant\n2 0 0\n2 3,3\n1 1 0\n").unwrap();
        assert_eq!(set.len(), 6);
        assert!(set.contains(set.spec().cell_index(&[2, 1])));
        assert_eq!(parse_cellset(&format_cellset(&set)).unwrap(), set);
    }

    #[test]
    fn cellset_binary_round_trip() {
        let spec = RootSpec::with_origin(2, 2.0, vec![-1.0, 0.5], 3).unwrap();
        let set = CellSet::from_cells(&spec, [0, 1, 2, 17, 63]);
        let bytes = encode_cellset(&set);
        assert_eq!(&bytes[..4], b"HCTS");
        assert_eq!(decode_cellset(&bytes).unwrap(), set);
        assert!(decode_cellset(&bytes[..bytes.len() - 1]).is_err());
        assert_eq!(decode_cellset(&encode_cellset(&CellSet::full(&spec))).unwrap(), CellSet::full(&spec));
    }

    #[test]
    fn function_round_trips() {
        let spec = RootSpec::unit(2, 2).unwrap();
        let f = GridFunction::new(&spec, (0..16).map(|i| i as f64 / 3.0).collect()).unwrap();
        assert_eq!(parse_function(&format_function(&f)).unwrap(), f);
        assert_eq!(decode_function(&encode_function(&f)).unwrap(), f);
        assert!(parse_function("2 2 1\n1,2,3\n").is_err());
    }

    #[test]
    fn measure_and_family_round_trips() {
        let spec = RootSpec::unit(2, 2).unwrap();
        let mu = DiscreteMeasure::new(&spec, (0..16).map(|i| (i % 3) as f64).collect(), vec![Atom { position: vec![0.25, 0.5], mass: 2.0 }]).unwrap();
        assert_eq!(parse_measure(&format_measure(&mu)).unwrap(), mu);

        let family = vec![DyadicCube::base(1, vec![0, 1]), DyadicCube { level: -1, index: vec![-1, 0], shift: ShiftId(3) }];
        let (s, back) = parse_family(&format_family(&spec, &family)).unwrap();
        assert_eq!((s, back), (spec, family));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_cellset("1 2 1\n\n2 7\n") {
            Err(HctError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
