//! Matrix Market I/O.
//!
//! Matrices use the `coordinate real symmetric` format with 1-based indices
//! and lower-triangle entries; vectors use `array real general` with a single
//! column. Values are written with 17 significant digits, so a write/read
//! cycle reproduces every f64 bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dense::DenseVector;
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

pub fn write_matrix(w: &mut impl Write, a: &SparseSymMatrix) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.stored_nnz())?;
    let mut lower: Vec<(usize, usize, f64)> = a
        .triplets()
        .iter()
        .map(|&(i, j, v)| (j + 1, i + 1, v))
        .collect();
    lower.sort_unstable_by_key(|&(r, c, _)| (r, c));
    for (r, c, v) in lower {
        writeln!(w, "{r} {c} {v:.16e}")?;
    }
    Ok(())
}

pub fn write_vector(w: &mut impl Write, v: &DenseVector) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v.iter() {
        writeln!(w, "{x:.16e}")?;
    }
    Ok(())
}

pub fn write_matrix_file(path: impl AsRef<Path>, a: &SparseSymMatrix) -> Result<()> {
    let path = path.as_ref();
    let ctx = || path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    write_matrix(&mut w, a).map_err(|e| Error::io(ctx(), e))?;
    w.flush().map_err(|e| Error::io(ctx(), e))
}

pub fn write_vector_file(path: impl AsRef<Path>, v: &DenseVector) -> Result<()> {
    let path = path.as_ref();
    let ctx = || path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    write_vector(&mut w, v).map_err(|e| Error::io(ctx(), e))?;
    w.flush().map_err(|e| Error::io(ctx(), e))
}

struct Lines<R> {
    reader: R,
    origin: String,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is neither blank nor a `%` comment (header excluded).
    fn next_content(&mut self) -> Result<Option<String>> {
        loop {
            let mut line = String::new();
            let n = self
                .reader
                .read_line(&mut line)
                .map_err(|e| Error::io(self.origin.clone(), e))?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            return Ok(Some(trimmed.to_string()));
        }
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::malformed(
            &self.origin,
            format!("line {}: {}", self.line_no, reason.into()),
        )
    }
}

fn parse_header(line: &str, origin: &str) -> Result<(String, String, String)> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::malformed(origin, "missing MatrixMarket header"));
    }
    Ok((tokens[2].clone(), tokens[3].clone(), tokens[4].clone()))
}

fn read_header<R: BufRead>(lines: &mut Lines<R>) -> Result<(String, String, String)> {
    let mut first = String::new();
    let n = lines
        .reader
        .read_line(&mut first)
        .map_err(|e| Error::io(lines.origin.clone(), e))?;
    if n == 0 {
        return Err(Error::malformed(&lines.origin, "empty file"));
    }
    lines.line_no += 1;
    parse_header(first.trim(), &lines.origin)
}

/// Reads a `coordinate real symmetric` matrix. Entries may sit in either
/// triangle; the same coefficient appearing twice is an error.
pub fn read_matrix(reader: impl BufRead, origin: &str) -> Result<SparseSymMatrix> {
    let mut lines = Lines {
        reader,
        origin: origin.to_string(),
        line_no: 0,
    };
    let (format, field, symmetry) = read_header(&mut lines)?;
    if format != "coordinate" {
        return Err(lines.fail(format!("expected coordinate format, got {format}")));
    }
    if field != "real" {
        return Err(lines.fail(format!("expected real field, got {field}")));
    }
    if symmetry != "symmetric" {
        return Err(lines.fail(format!("expected symmetric symmetry, got {symmetry}")));
    }

    let size = lines
        .next_content()?
        .ok_or_else(|| lines.fail("missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(lines.fail("size line must be 'rows cols nnz'"));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| lines.fail("bad row count"))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| lines.fail("bad column count"))?;
    let nnz: usize = dims[2].parse().map_err(|_| lines.fail("bad nnz"))?;
    if rows != cols {
        return Err(lines.fail(format!("matrix must be square, got {rows} x {cols}")));
    }

    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let line = lines
            .next_content()?
            .ok_or_else(|| lines.fail("fewer entries than the size line promised"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(lines.fail("entry must be 'i j value'"));
        }
        let i: usize = toks[0].parse().map_err(|_| lines.fail("bad row index"))?;
        let j: usize = toks[1].parse().map_err(|_| lines.fail("bad column index"))?;
        let v: f64 = toks[2].parse().map_err(|_| lines.fail("bad value"))?;
        if i == 0 || j == 0 || i > rows || j > rows {
            return Err(lines.fail(format!("index ({i}, {j}) outside 1..={rows}")));
        }
        entries.push((i - 1, j - 1, v));
    }
    if lines.next_content()?.is_some() {
        return Err(lines.fail("trailing data after the promised entries"));
    }
    SparseSymMatrix::from_triplets(rows, entries)
}

/// Reads an `array real general` single-column vector.
pub fn read_vector(reader: impl BufRead, origin: &str) -> Result<DenseVector> {
    let mut lines = Lines {
        reader,
        origin: origin.to_string(),
        line_no: 0,
    };
    let (format, field, symmetry) = read_header(&mut lines)?;
    if format != "array" || field != "real" || symmetry != "general" {
        return Err(lines.fail(format!(
            "expected 'array real general', got '{format} {field} {symmetry}'"
        )));
    }
    let size = lines
        .next_content()?
        .ok_or_else(|| lines.fail("missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(lines.fail("size line must be 'rows cols'"));
    }
    let rows: usize = dims[0].parse().map_err(|_| lines.fail("bad row count"))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| lines.fail("bad column count"))?;
    if cols != 1 {
        return Err(lines.fail(format!("expected a single column, got {cols}")));
    }

    let mut data = Vec::with_capacity(rows);
    while data.len() < rows {
        let line = lines
            .next_content()?
            .ok_or_else(|| lines.fail("fewer values than the size line promised"))?;
        for tok in line.split_whitespace() {
            if data.len() == rows {
                return Err(lines.fail("trailing data after the promised values"));
            }
            let v: f64 = tok.parse().map_err(|_| lines.fail("bad value"))?;
            if !v.is_finite() {
                return Err(lines.fail(format!("non-finite value {tok}")));
            }
            data.push(v);
        }
    }
    if lines.next_content()?.is_some() {
        return Err(lines.fail("trailing data after the promised values"));
    }
    Ok(DenseVector::from_vec(data))
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<SparseSymMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_matrix(BufReader::new(file), &path.display().to_string())
}

pub fn read_vector_file(path: impl AsRef<Path>) -> Result<DenseVector> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_vector(BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{five_node_matrix, random_system, random_vector};
    use proptest::prelude::*;
    use std::io::Cursor;

    fn matrix_roundtrip(a: &SparseSymMatrix) -> SparseSymMatrix {
        let mut buf = Vec::new();
        write_matrix(&mut buf, a).unwrap();
        read_matrix(Cursor::new(buf), "buffer").unwrap()
    }

    #[test]
    fn matrix_roundtrips_bitwise() {
        let a = five_node_matrix();
        let back = matrix_roundtrip(&a);
        assert_eq!(back.n(), a.n());
        assert_eq!(back.triplets().len(), a.triplets().len());
        for (x, y) in a.triplets().iter().zip(back.triplets()) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1, y.1);
            assert_eq!(x.2.to_bits(), y.2.to_bits());
        }
    }

    #[test]
    fn vector_roundtrips_bitwise() {
        let v = DenseVector::from_vec(vec![
            std::f64::consts::PI,
            1.0 / 3.0,
            -1e-300,
            4.9e-324,
            0.0,
            -123456.789e101,
        ]);
        let mut buf = Vec::new();
        write_vector(&mut buf, &v).unwrap();
        let back = read_vector(Cursor::new(buf), "buffer").unwrap();
        assert_eq!(back.len(), v.len());
        for (a, b) in v.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn written_matrix_is_one_based_lower_triangle() {
        let mut buf = Vec::new();
        write_matrix(&mut buf, &five_node_matrix()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real symmetric");
        assert_eq!(lines[1], "5 5 10");
        assert_eq!(lines[2], "1 1 1.0000000000000000e0");
        assert_eq!(lines[3], "2 1 5.0000000000000000e-1");
        for line in &lines[2..] {
            let t: Vec<usize> = line
                .split_whitespace()
                .take(2)
                .map(|x| x.parse().unwrap())
                .collect();
            assert!(t[0] >= t[1], "entry above diagonal: {line}");
        }
    }

    #[test]
    fn reader_accepts_comments_and_either_triangle() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n\
                    % a comment\n\
                    \n\
                    3 3 3\n\
                    2 1 -1.5\n\
                    % interleaved comment\n\
                    3 3 2.0\n\
                    1 3 0.25\n";
        let a = read_matrix(Cursor::new(text), "inline").unwrap();
        assert_eq!(a.get(0, 1), -1.5);
        assert_eq!(a.get(2, 2), 2.0);
        assert_eq!(a.get(2, 0), 0.25);
    }

    #[test]
    fn reader_rejects_malformed_input() {
        let cases = [
            "garbage\n",
            "%%MatrixMarket matrix coordinate complex symmetric\n2 2 1\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n0 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1.0\n1 2 2.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 2 1.0\n2 1 2.0\n",
        ];
        for text in cases {
            assert!(read_matrix(Cursor::new(text), "inline").is_err(), "{text}");
        }
        assert!(read_vector(Cursor::new("%%MatrixMarket matrix array real general\n2 2\n1.0\n2.0\n"), "inline").is_err());
        assert!(read_vector(Cursor::new("%%MatrixMarket matrix array real general\n3 1\n1.0\n2.0\n"), "inline").is_err());
    }

    #[test]
    fn file_roundtrip_and_missing_file_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        write_matrix_file(&path, &five_node_matrix()).unwrap();
        let back = read_matrix_file(&path).unwrap();
        assert_eq!(back, five_node_matrix());
        assert!(matches!(
            read_matrix_file(dir.path().join("missing.mtx")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn random_roundtrips_are_exact(seed in 0u64..200) {
            let (a, _) = random_system(seed, 14);
            let back = matrix_roundtrip(&a);
            prop_assert_eq!(&back, &a);

            let v = random_vector(seed, 9);
            let mut buf = Vec::new();
            write_vector(&mut buf, &v).unwrap();
            let vb = read_vector(Cursor::new(buf), "buffer").unwrap();
            for (x, y) in v.iter().zip(vb.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
