//! Line-oriented text dumps.
//!
//! Every format starts with a `#` header line followed by one record per
//! line. Values are written with `f64`'s shortest round-trip
//! representation, so reading a dump back reproduces the exact bits.

use std::io::{self, BufRead, Write};

use stc_core::collapse::CollapsedMatrix;
use stc_core::nn_estimator::Estimate;
use stc_core::spectral_distance::DistanceMatrix;
use stc_core::tensor_model::{Shape, SparseObservations};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] stc_core::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, FormatError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

fn parse_flag(tok: Option<&str>, line: usize, what: &str) -> Result<bool, FormatError> {
    match tok {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        Some(other) => Err(parse_err(line, format!("bad {what} `{other}`"))),
        None => Err(parse_err(line, format!("missing {what}"))),
    }
}

/// Header tokens after `#` and the expected tag, plus the remaining lines.
fn read_header<R: BufRead>(reader: R, tag: &str) -> Result<(Vec<String>, io::Lines<R>), FormatError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty input"))??;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("#") || toks.next() != Some(tag) {
        return Err(parse_err(1, format!("expected `# {tag}` header")));
    }
    Ok((toks.map(str::to_owned).collect(), lines))
}

fn write_shape<W: Write>(w: &mut W, shape: &Shape) -> io::Result<()> {
    write!(w, "{}", shape.order())?;
    for n in shape.dims() {
        write!(w, " {n}")?;
    }
    Ok(())
}

fn parse_shape(toks: &[String]) -> Result<(Shape, usize), FormatError> {
    let t: usize = field(toks.first().map(String::as_str), 1, "order")?;
    if toks.len() < 1 + t {
        return Err(parse_err(1, "header shorter than the tensor order"));
    }
    let dims = (0..t)
        .map(|l| field(Some(toks[1 + l].as_str()), 1, "mode size"))
        .collect::<Result<Vec<usize>, _>>()?;
    Ok((Shape::new(dims)?, 1 + t))
}

fn parse_index<'a>(toks: &mut impl Iterator<Item = &'a str>, t: usize, line: usize) -> Result<Vec<usize>, FormatError> {
    (0..t).map(|_| field(toks.next(), line, "index")).collect()
}

fn no_trailing<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<(), FormatError> {
    match toks.next() {
        None => Ok(()),
        Some(extra) => Err(parse_err(line, format!("unexpected trailing `{extra}`"))),
    }
}

/// `# shape t n_1 … n_t p seed`, then `i_1 … i_t value` per entry.
pub fn write_observations<W: Write>(mut w: W, obs: &SparseObservations) -> io::Result<()> {
    write!(w, "# shape ")?;
    write_shape(&mut w, obs.shape())?;
    writeln!(w, " {} {}", obs.density(), obs.seed())?;
    for (idx, v) in obs.iter() {
        for i in idx {
            write!(w, "{i} ")?;
        }
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_observations<R: BufRead>(r: R) -> Result<SparseObservations, FormatError> {
    let (header, lines) = read_header(r, "shape")?;
    let (shape, used) = parse_shape(&header)?;
    let density: f64 = field(header.get(used).map(String::as_str), 1, "density")?;
    let seed: u64 = field(header.get(used + 1).map(String::as_str), 1, "seed")?;
    let t = shape.order();
    let mut entries = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let no = k + 2;
        let mut toks = line.split_whitespace();
        let idx = parse_index(&mut toks, t, no)?;
        let v: f64 = field(toks.next(), no, "value")?;
        no_trailing(toks, no)?;
        entries.push((idx, v));
    }
    let (obs, dups) = SparseObservations::from_entries(shape, entries, density, seed)?;
    if dups > 0 {
        return Err(parse_err(0, format!("{dups} duplicate entries")));
    }
    Ok(obs)
}

/// `# collapsed y z n_y n_z`, then `a b count value` per observed cell.
pub fn write_collapsed<W: Write>(mut w: W, m: &CollapsedMatrix) -> io::Result<()> {
    let (y, z) = m.mode_pair();
    writeln!(w, "# collapsed {y} {z} {} {}", m.rows(), m.cols())?;
    for (a, b, count, v) in m.cells() {
        writeln!(w, "{a} {b} {count} {v}")?;
    }
    Ok(())
}

pub fn read_collapsed<R: BufRead>(r: R) -> Result<CollapsedMatrix, FormatError> {
    let (header, lines) = read_header(r, "collapsed")?;
    let h = |i: usize, what| field::<usize>(header.get(i).map(String::as_str), 1, what);
    let (y, z, n_y, n_z) = (h(0, "y")?, h(1, "z")?, h(2, "n_y")?, h(3, "n_z")?);
    let mut cells = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let no = k + 2;
        let mut toks = line.split_whitespace();
        let a: usize = field(toks.next(), no, "row")?;
        let b: usize = field(toks.next(), no, "column")?;
        let c: u32 = field(toks.next(), no, "count")?;
        let v: f64 = field(toks.next(), no, "value")?;
        no_trailing(toks, no)?;
        cells.push((a, b, c, v));
    }
    Ok(CollapsedMatrix::from_cells((y, z), (n_y, n_z), cells)?)
}

/// `# distances mode n`, then `a b value valid` per pair `a < b`.
pub fn write_distances<W: Write>(mut w: W, d: &DistanceMatrix) -> io::Result<()> {
    writeln!(w, "# distances {} {}", d.mode(), d.len())?;
    for (a, b, v, ok) in d.pairs() {
        writeln!(w, "{a} {b} {v} {}", u8::from(ok))?;
    }
    Ok(())
}

pub fn read_distances<R: BufRead>(r: R) -> Result<DistanceMatrix, FormatError> {
    let (header, lines) = read_header(r, "distances")?;
    let mode: usize = field(header.first().map(String::as_str), 1, "mode")?;
    let n: usize = field(header.get(1).map(String::as_str), 1, "size")?;
    let mut pairs = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let no = k + 2;
        let mut toks = line.split_whitespace();
        let a: usize = field(toks.next(), no, "row")?;
        let b: usize = field(toks.next(), no, "column")?;
        let v: f64 = field(toks.next(), no, "value")?;
        let ok = parse_flag(toks.next(), no, "valid flag")?;
        no_trailing(toks, no)?;
        pairs.push((a, b, v, ok));
    }
    Ok(DistanceMatrix::from_pairs(mode, n, pairs)?)
}

/// Estimate as read back from a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateDump {
    pub shape: Shape,
    pub eta: f64,
    pub values: Vec<f64>,
    pub fallback: Vec<bool>,
}

impl EstimateDump {
    pub fn matches(&self, e: &Estimate) -> bool {
        self.shape == *e.shape()
            && self.eta.to_bits() == e.eta().to_bits()
            && self.fallback == e.fallback_mask()
            && self.values.iter().zip(e.values()).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// `# estimate t n_1 … n_t eta`, then `i_1 … i_t value fallback` for every
/// entry in row-major order.
pub fn write_estimate<W: Write>(mut w: W, e: &Estimate) -> io::Result<()> {
    let shape = e.shape();
    write!(w, "# estimate ")?;
    write_shape(&mut w, shape)?;
    writeln!(w, " {}", e.eta())?;
    let mut idx = vec![0usize; shape.order()];
    for (lin, (&v, &f)) in e.values().iter().zip(e.fallback_mask()).enumerate() {
        shape.unravel_into(lin, &mut idx);
        for i in &idx {
            write!(w, "{i} ")?;
        }
        writeln!(w, "{v} {}", u8::from(f))?;
    }
    Ok(())
}

pub fn read_estimate<R: BufRead>(r: R) -> Result<EstimateDump, FormatError> {
    let (header, lines) = read_header(r, "estimate")?;
    let (shape, used) = parse_shape(&header)?;
    let eta: f64 = field(header.get(used).map(String::as_str), 1, "eta")?;
    let numel = shape.numel();
    let mut values = vec![f64::NAN; numel];
    let mut fallback = vec![false; numel];
    let mut seen = vec![false; numel];
    for (k, line) in lines.enumerate() {
        let line = line?;
        let no = k + 2;
        let mut toks = line.split_whitespace();
        let idx = parse_index(&mut toks, shape.order(), no)?;
        shape.check_index(&idx)?;
        let v: f64 = field(toks.next(), no, "value")?;
        let f = parse_flag(toks.next(), no, "fallback flag")?;
        no_trailing(toks, no)?;
        let lin = shape.linear_index(&idx);
        if seen[lin] {
            return Err(parse_err(no, "duplicate entry"));
        }
        seen[lin] = true;
        values[lin] = v;
        fallback[lin] = f;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(parse_err(0, format!("entry {missing} missing")));
    }
    Ok(EstimateDump {
        shape,
        eta,
        values,
        fallback,
    })
}
