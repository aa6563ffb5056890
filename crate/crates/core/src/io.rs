//! File formats: Matrix Market coordinate files for sparse symmetric
//! operators, headerless CSV for dense matrices.
//!
//! Parse failures carry the 1-based line number of the offending line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linops::SparseSymmetricMatrix;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a Matrix Market coordinate file (`real`, `general` or
/// `symmetric`) into a symmetric sparse operator.
///
/// Symmetric-kind files list one triangle; off-diagonal entries are
/// mirrored on load. Duplicate coordinates (after mirroring) are summed.
/// General-kind files must list a symmetric matrix explicitly.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymmetricMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    // Header: %%MatrixMarket matrix coordinate real {general|symmetric}.
    let (header_idx, header) = match lines.next() {
        Some((i, l)) => (i, l?),
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(path, header_idx + 1, "expected '%%MatrixMarket matrix coordinate real <symmetry>' header"));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(
            path,
            header_idx + 1,
            format!("unsupported object/format '{} {}' (only 'matrix coordinate')", tokens[1], tokens[2]),
        ));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(
            path,
            header_idx + 1,
            format!("unsupported field '{}' (only real or integer)", tokens[3]),
        ));
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(parse_err(
                path,
                header_idx + 1,
                format!("unsupported symmetry '{other}' (only general or symmetric)"),
            ))
        }
    };

    // Size line: rows cols nnz (comments may precede it).
    let mut size: Option<(usize, usize, usize)> = None;
    let mut size_line = 0;
    for (i, line) in lines.by_ref() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(path, i + 1, "size line must be 'rows cols nnz'"));
        }
        let mut nums = [0usize; 3];
        for (slot, tok) in nums.iter_mut().zip(parts.iter()) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("invalid size value '{tok}'")))?;
        }
        size = Some((nums[0], nums[1], nums[2]));
        size_line = i + 1;
        break;
    }
    let (rows, cols, declared) = size.ok_or_else(|| parse_err(path, header_idx + 2, "missing size line"))?;
    if rows != cols {
        return Err(parse_err(
            path,
            size_line,
            format!("operator must be square, got {rows}×{cols}"),
        ));
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(declared * 2);
    let mut seen = 0usize;
    let mut last_line = size_line;
    for (i, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        last_line = i + 1;
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if seen == declared {
            return Err(parse_err(
                path,
                i + 1,
                format!("more than the declared {declared} entries"),
            ));
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(path, i + 1, "entry must be 'row col value'"));
        }
        let r: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("invalid row index '{}'", parts[0])))?;
        let c: usize = parts[1]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("invalid column index '{}'", parts[1])))?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("invalid value '{}'", parts[2])))?;
        if !v.is_finite() {
            return Err(parse_err(path, i + 1, format!("non-finite value '{}'", parts[2])));
        }
        if r == 0 || r > rows || c == 0 || c > cols {
            return Err(parse_err(
                path,
                i + 1,
                format!("index ({r}, {c}) outside 1..={rows} (indices are 1-based)"),
            ));
        }
        triplets.push((r - 1, c - 1, v));
        if symmetric && r != c {
            triplets.push((c - 1, r - 1, v));
        }
        seen += 1;
    }
    if seen != declared {
        return Err(parse_err(
            path,
            last_line,
            format!("expected {declared} entries, found {seen}"),
        ));
    }
    SparseSymmetricMatrix::from_triplets(rows, &triplets)
}

/// Writes a symmetric sparse operator as Matrix Market coordinate
/// `real symmetric`, listing the lower triangle.
pub fn write_matrix_market(path: impl AsRef<Path>, m: &SparseSymmetricMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    let csr = m.csr();
    let n = csr.nrows();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        let lo = csr.row_ptr()[i];
        let hi = csr.row_ptr()[i + 1];
        for idx in lo..hi {
            let j = csr.col_idx()[idx];
            if j <= i {
                entries.push((i, j, csr.values()[idx]));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{n} {n} {}", entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless CSV file (one row per line, comma-separated) into a
/// dense matrix. Blank lines are skipped; ragged rows are rejected.
pub fn read_dense_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in trimmed.split(',') {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("invalid number '{tok}'")))?;
            if !v.is_finite() {
                return Err(parse_err(path, i + 1, format!("non-finite value '{tok}'")));
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("row has {} values, previous rows have {w}", row.len()),
                ));
            }
            _ => {}
        }
        rows.push(row);
    }
    let ncols = width.ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let nrows = rows.len();
    let mut out = Array2::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Writes a dense matrix as headerless CSV, one row per line. Values use
/// the shortest representation that round-trips exactly.
pub fn write_dense_csv(path: impl AsRef<Path>, m: ArrayView2<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    for row in m.rows() {
        let mut first = true;
        for v in row.iter() {
            if first {
                first = false;
            } else {
                write!(w, ",")?;
            }
            write!(w, "{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::random_gaussian_matrix;
    use std::path::PathBuf;

    fn temp_path(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("geneig-io-{}-{name}", std::process::id()));
        p
    }

    fn write_text(path: &Path, text: &str) {
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn matrix_market_symmetric_expands_off_diagonals() {
        let p = temp_path("sym.mtx");
        write_text(
            &p,
            "%%MatrixMarket matrix coordinate real symmetric\n\
             % planted 3x3\n\
             3 3 4\n\
             1 1 2.0\n\
             2 1 -1.0\n\
             2 2 3.0\n\
             3 3 5.0\n",
        );
        let m = read_matrix_market(&p).unwrap();
        let d = m.csr().to_dense();
        let want = [
            [2.0, -1.0, 0.0],
            [-1.0, 3.0, 0.0],
            [0.0, 0.0, 5.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[[i, j]], want[i][j], "entry ({i}, {j})");
            }
        }
        let _ = std::fs::remove_file(&p);
    }

    #[test]
    fn matrix_market_round_trips_exactly() {
        let g = random_gaussian_matrix(6, 6, 17);
        let sym = &g + &g.t();
        let m = SparseSymmetricMatrix::from_dense(&sym).unwrap();
        let p = temp_path("roundtrip.mtx");
        write_matrix_market(&p, &m).unwrap();
        let back = read_matrix_market(&p).unwrap();
        let d0 = m.csr().to_dense();
        let d1 = back.csr().to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(d0[[i, j]], d1[[i, j]], "entry ({i}, {j}) drifted");
            }
        }
        let _ = std::fs::remove_file(&p);
    }

    #[test]
    fn matrix_market_reports_offending_line() {
        let p = temp_path("badindex.mtx");
        write_text(
            &p,
            "%%MatrixMarket matrix coordinate real general\n\
             3 3 1\n\
             5 1 1.0\n",
        );
        match read_matrix_market(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let _ = std::fs::remove_file(&p);
    }

    #[test]
    fn matrix_market_checks_entry_count() {
        let p = temp_path("short.mtx");
        write_text(
            &p,
            "%%MatrixMarket matrix coordinate real general\n\
             2 2 3\n\
             1 1 1.0\n\
             2 2 1.0\n",
        );
        match read_matrix_market(&p) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("expected 3 entries"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let _ = std::fs::remove_file(&p);
    }

    #[test]
    fn matrix_market_rejects_rectangular() {
        let p = temp_path("rect.mtx");
        write_text(
            &p,
            "%%MatrixMarket matrix coordinate real general\n\
             2 3 1\n\
             1 1 1.0\n",
        );
        assert!(matches!(read_matrix_market(&p), Err(Error::Parse { .. })));
        let _ = std::fs::remove_file(&p);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let m = random_gaussian_matrix(5, 3, 18);
        let p = temp_path("dense.csv");
        write_dense_csv(&p, m.view()).unwrap();
        let back = read_dense_csv(&p).unwrap();
        assert_eq!(back.dim(), (5, 3));
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(m[[i, j]], back[[i, j]], "entry ({i}, {j}) drifted");
            }
        }
        let _ = std::fs::remove_file(&p);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let p = temp_path("ragged.csv");
        write_text(&p, "1,2\n3\n");
        match read_dense_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let _ = std::fs::remove_file(&p);
    }
}
