//! CSV output with a pinned byte format: header line, floats at 17
//! significant digits, LF line endings, UTF-8.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// One CSV cell.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => out.push_str(&v.to_string()),
            // 1 leading + 16 fractional digits = 17 significant digits.
            Cell::Float(v) => out.push_str(&format!("{v:.16e}")),
        }
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            cell.render(&mut text);
        }
        text.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
