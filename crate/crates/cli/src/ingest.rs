use std::path::Path;

use copent_core::error::Error;
use copent_core::ranks::BivariateSample;
use copent_core::Result;

/// Loads a two-column numeric CSV. The header row names the columns;
/// extra columns are ignored once `col_x` / `col_y` pick the two of
/// interest (defaults: first and second column).
pub fn load_csv(path: &Path, col_x: Option<&str>, col_y: Option<&str>) -> Result<BivariateSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::ParseError {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::ParseError {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let find = |name: Option<&str>, default_idx: usize| -> Result<usize> {
        match name {
            Some(n) => headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::MissingColumn(n.to_string())),
            None => {
                if headers.len() > default_idx {
                    Ok(default_idx)
                } else {
                    Err(Error::MissingColumn(format!("column {}", default_idx + 1)))
                }
            }
        }
    };
    let ix = find(col_x, 0)?;
    let iy = find(col_y, 1)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::ParseError {
            line,
            msg: e.to_string(),
        })?;
        let parse = |idx: usize| -> Result<f64> {
            let field = record.get(idx).ok_or(Error::ParseError {
                line,
                msg: format!("missing field {}", idx + 1),
            })?;
            field.parse().map_err(|_| Error::ParseError {
                line,
                msg: format!("not a number: {field:?}"),
            })
        };
        rows.push((parse(ix)?, parse(iy)?));
    }
    if rows.is_empty() {
        return Err(Error::ParseError {
            line: 2,
            msg: "empty data section".into(),
        });
    }
    let mut sample = BivariateSample::new(rows)?;
    sample.labels = Some((
        headers.get(ix).unwrap_or("x").to_string(),
        headers.get(iy).unwrap_or("y").to_string(),
    ));
    Ok(sample)
}
