//! CSV feature import/export.
//!
//! One row per vector, comma-separated coordinates, optional trailing label
//! column with the tokens `id`, `ood` or `unlabeled`. Either every row has
//! the label column or none does. Values are written from their f32
//! narrowing with the shortest round-trip formatting, so CSV/ODDF
//! conversion is lossless for values representable in 32-bit floats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::FeatureVector;
use crate::io::oddf::SampleLabel;

fn label_token(label: SampleLabel) -> &'static str {
    match label {
        SampleLabel::Id => "id",
        SampleLabel::Ood => "ood",
        SampleLabel::Unlabeled => "unlabeled",
    }
}

fn parse_label(token: &str) -> Option<SampleLabel> {
    match token.trim() {
        "id" => Some(SampleLabel::Id),
        "ood" => Some(SampleLabel::Ood),
        "unlabeled" => Some(SampleLabel::Unlabeled),
        _ => None,
    }
}

/// Parses CSV text into vectors and (when a label column is present) labels.
pub fn parse_csv(text: &str) -> Result<(Vec<FeatureVector>, Option<Vec<SampleLabel>>)> {
    let mut vectors: Vec<FeatureVector> = Vec::new();
    let mut labels: Vec<SampleLabel> = Vec::new();
    let mut labeled: Option<bool> = None;
    let mut dim: Option<usize> = None;

    for (line_idx, raw_line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let (value_fields, label) = match parse_label(fields[fields.len() - 1]) {
            Some(label) if fields.len() > 1 => (&fields[..fields.len() - 1], Some(label)),
            _ => (&fields[..], None),
        };
        match (labeled, label.is_some()) {
            (None, has) => labeled = Some(has),
            (Some(expected), has) if expected != has => {
                return Err(Error::CsvParse {
                    line: line_no,
                    reason: "mixed labeled and unlabeled rows".into(),
                });
            }
            _ => {}
        }
        let mut values = Vec::with_capacity(value_fields.len());
        for field in value_fields {
            let v: f64 = field.trim().parse().map_err(|e| Error::CsvParse {
                line: line_no,
                reason: format!("bad number {field:?}: {e}"),
            })?;
            values.push(v);
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: values.len(),
                });
            }
            _ => {}
        }
        vectors.push(FeatureVector::new(values)?);
        if let Some(label) = label {
            labels.push(label);
        }
    }
    let labels = if labeled == Some(true) {
        Some(labels)
    } else {
        None
    };
    Ok((vectors, labels))
}

/// Renders vectors to CSV, narrowing coordinates to f32 first so the text
/// matches what an ODDF round trip would preserve.
pub fn render_csv(vectors: &[FeatureVector], labels: Option<&[SampleLabel]>) -> Result<String> {
    if let Some(labels) = labels {
        if labels.len() != vectors.len() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                vectors: vectors.len(),
            });
        }
    }
    let mut out = String::new();
    for (i, v) in vectors.iter().enumerate() {
        let row: Vec<String> = v
            .values()
            .iter()
            .map(|&x| format!("{}", x as f32))
            .collect();
        out.push_str(&row.join(","));
        if let Some(labels) = labels {
            out.push(',');
            out.push_str(label_token(labels[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_csv_features(
    path: impl AsRef<Path>,
) -> Result<(Vec<FeatureVector>, Option<Vec<SampleLabel>>)> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn write_csv_features(
    path: impl AsRef<Path>,
    vectors: &[FeatureVector],
    labels: Option<&[SampleLabel]>,
) -> Result<()> {
    let text = render_csv(vectors, labels)?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::oddf::{decode_features, encode_features};

    #[test]
    fn parse_plain_rows() {
        let (v, l) = parse_csv("1,0,0\n0,1,0\n").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].values(), &[1.0, 0.0, 0.0]);
        assert!(l.is_none());
    }

    #[test]
    fn parse_labeled_rows() {
        let (v, l) = parse_csv("1.5,2.5,id\n-1,0.25,ood\n").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(
            l.unwrap(),
            vec![SampleLabel::Id, SampleLabel::Ood]
        );
    }

    #[test]
    fn mixed_label_presence_rejected() {
        let err = parse_csv("1,2,id\n3,4\n").unwrap_err();
        assert!(matches!(err, Error::CsvParse { line: 2, .. }));
    }

    #[test]
    fn bad_number_rejected() {
        let err = parse_csv("1,notanumber\n").unwrap_err();
        assert!(matches!(err, Error::CsvParse { line: 1, .. }));
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_csv("1,2\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn csv_oddf_round_trip_lossless_for_f32_values() {
        let text = "0.5,-2.25,3.125,id\n1,0,7.75,ood\n0.1,0.2,0.3,unlabeled\n";
        let (v, l) = parse_csv(text).unwrap();
        let bytes = encode_features(&v, l.as_deref()).unwrap();
        let (v2, l2) = decode_features(&bytes).unwrap();
        // Exactly representable coordinates survive; 0.1 etc. narrow to the
        // nearest f32 and then stay fixed.
        let rendered = render_csv(&v2, l2.as_deref()).unwrap();
        let (v3, l3) = parse_csv(&rendered).unwrap();
        let bytes2 = encode_features(&v3, l3.as_deref()).unwrap();
        assert_eq!(bytes, bytes2);
        assert_eq!(v2[0].values(), &[0.5, -2.25, 3.125]);
    }
}
