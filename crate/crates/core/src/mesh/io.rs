//! Field files: CSV (one value per line, node order) and 8-bit ASCII PGM images.

use std::fmt::Write as _;
use std::path::Path;

use super::grid::{Grid, NodalField};
use crate::error::{Error, Result};

pub fn field_to_csv(field: &NodalField) -> String {
    let mut s = String::with_capacity(24 * field.len() + 16);
    let _ = writeln!(s, "# grid_n={}", field.grid_n());
    for v in field.values() {
        // Debug formatting is the shortest string that parses back to the same bits.
        let _ = writeln!(s, "{v:?}");
    }
    s
}

/// Parse a field CSV. `expect_n` rejects files written for another grid.
pub fn field_from_csv(text: &str, expect_n: Option<usize>) -> Result<NodalField> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))?;
    let n: usize = header
        .trim()
        .strip_prefix("# grid_n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line 1: expected `# grid_n=<n>`, got `{header}`")))?;
    if let Some(want) = expect_n {
        if want != n {
            return Err(Error::Parse(format!(
                "field header says grid_n={n}, expected grid_n={want}"
            )));
        }
    }
    let grid = Grid::new(n)?;
    let mut values = Vec::with_capacity(grid.node_count());
    for (lineno, line) in lines {
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}: `{line}`", lineno + 1)))?;
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(Error::Parse(format!(
            "grid_n={n} needs {} values, file has {}",
            grid.node_count(),
            values.len()
        )));
    }
    NodalField::new(&grid, values)
}

/// ASCII PGM, min mapped to 0 and max to 255, top image row = largest y.
pub fn field_to_pgm(field: &NodalField) -> String {
    let n = field.grid_n();
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let mut s = String::with_capacity(4 * field.len() + 64);
    let _ = writeln!(s, "P2");
    let _ = writeln!(s, "# min={lo:?} max={hi:?}");
    let _ = writeln!(s, "{n} {n}");
    let _ = writeln!(s, "255");
    for j in (0..n).rev() {
        let row: Vec<String> = (0..n)
            .map(|i| {
                let v = field[j * n + i];
                let g = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 0.0 };
                format!("{}", g as u8)
            })
            .collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn write_field_csv(path: &Path, field: &NodalField) -> Result<()> {
    std::fs::write(path, field_to_csv(field))?;
    Ok(())
}

pub fn read_field_csv(path: &Path, expect_n: Option<usize>) -> Result<NodalField> {
    let text = std::fs::read_to_string(path)?;
    field_from_csv(&text, expect_n).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_field_pgm(path: &Path, field: &NodalField) -> Result<()> {
    std::fs::write(path, field_to_pgm(field))?;
    Ok(())
}
