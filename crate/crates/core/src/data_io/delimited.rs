//! CSV feature files.
//!
//! The first record is a header when any of its fields is not a number. If the
//! header's first field is `id`, that column holds sample ids; otherwise ids are
//! row indices.

use nalgebra::DMatrix;

use super::{DataError, FeatureMatrix};

pub(super) fn parse_features(text: &str) -> Result<(DMatrix<f64>, Vec<String>), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| DataError::MalformedCsv {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(DataError::MalformedCsv {
            line: 1,
            message: "empty file".into(),
        });
    }

    let is_header = records[0].1.iter().any(|f| f.parse::<f64>().is_err());
    let has_id = is_header && records[0].1.get(0) == Some("id");
    let body = if is_header { &records[1..] } else { &records[..] };
    let skip = usize::from(has_id);

    let mut ids = Vec::with_capacity(body.len());
    let mut values = Vec::new();
    let mut width = None;
    for (row, (line, rec)) in body.iter().enumerate() {
        let cols = rec.len().saturating_sub(skip);
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(DataError::MalformedCsv {
                    line: *line,
                    message: format!("expected {w} feature columns, found {cols}"),
                })
            }
            _ => {}
        }
        ids.push(if has_id {
            rec[0].to_string()
        } else {
            row.to_string()
        });
        for field in rec.iter().skip(skip) {
            let v = field.parse::<f64>().map_err(|_| DataError::MalformedCsv {
                line: *line,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            values.push(v);
        }
    }
    let cols = width.unwrap_or(0);
    Ok((DMatrix::from_row_slice(ids.len(), cols, &values), ids))
}

pub(super) fn format_features(features: &FeatureMatrix) -> String {
    let mut out = String::from("id");
    for c in 0..features.dim() {
        out.push_str(&format!(",f{c}"));
    }
    out.push('\n');
    for (r, id) in features.sample_ids().iter().enumerate() {
        out.push_str(id);
        for c in 0..features.dim() {
            out.push_str(&format!(",{:?}", features.data()[(r, c)]));
        }
        out.push('\n');
    }
    out
}
