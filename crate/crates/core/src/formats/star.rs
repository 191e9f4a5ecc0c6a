//! Single-block STAR particle tables as written by RELION pickers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StarError {
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error("no data_ block with a loop_ found")]
    NoLoop,
    #[error("missing required column {0}")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PickRecord {
    pub x: f64,
    pub y: f64,
    /// `(rot, tilt, psi)` in degrees.
    pub euler: Option<[f64; 3]>,
    pub confidence: f64,
}

const COL_X: &str = "_rlnCoordinateX";
const COL_Y: &str = "_rlnCoordinateY";
const COL_ROT: &str = "_rlnAngleRot";
const COL_TILT: &str = "_rlnAngleTilt";
const COL_PSI: &str = "_rlnAnglePsi";
const COL_FOM: &str = "_rlnAutopickFigureOfMerit";

/// Parses the first `loop_` of the first `data_` block.
///
/// Euler angles are read only when all three angle columns are present.
/// The figure of merit, when present, is clamped to `[0, 1]`.
pub fn parse_pick_table(input: &[u8]) -> Result<Vec<PickRecord>, StarError> {
    let text = std::str::from_utf8(input).map_err(|_| StarError::Encoding)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let mut in_block = false;
    let mut labels: Vec<&str> = Vec::new();
    let mut first_row = None;
    for (n, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("data_") {
            in_block = true;
            continue;
        }
        if !in_block {
            continue;
        }
        if line == "loop_" {
            labels.clear();
            continue;
        }
        if line.starts_with('_') {
            if let Some(label) = line.split_whitespace().next() {
                labels.push(label);
            }
            continue;
        }
        if !labels.is_empty() {
            first_row = Some((n, line));
            break;
        }
    }
    if labels.is_empty() {
        return Err(StarError::NoLoop);
    }

    let col = |name: &str| labels.iter().position(|l| *l == name);
    let cx = col(COL_X).ok_or(StarError::MissingColumn(COL_X))?;
    let cy = col(COL_Y).ok_or(StarError::MissingColumn(COL_Y))?;
    let angles = match (col(COL_ROT), col(COL_TILT), col(COL_PSI)) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let cfom = col(COL_FOM);

    let mut picks = Vec::new();
    let rows = first_row.into_iter().chain(lines);
    for (n, line) in rows {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("data_") || line == "loop_" || line.starts_with('_') {
            break;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != labels.len() {
            return Err(StarError::Row {
                line: n,
                message: format!("expected {} values, found {}", labels.len(), tokens.len()),
            });
        }
        let value = |c: usize| -> Result<f64, StarError> {
            let v: f64 = tokens[c].parse().map_err(|_| StarError::Row {
                line: n,
                message: format!("cannot parse {:?} in column {}", tokens[c], labels[c]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(StarError::Row { line: n, message: format!("{} is not finite", labels[c]) })
            }
        };
        let x = value(cx)?;
        let y = value(cy)?;
        if x < 0.0 || y < 0.0 {
            return Err(StarError::Row { line: n, message: "negative pixel coordinate".into() });
        }
        let euler = angles.map(|[a, b, c]| Ok::<_, StarError>([value(a)?, value(b)?, value(c)?])).transpose()?;
        let confidence = cfom.map(value).transpose()?.map_or(1.0, |v| v.clamp(0.0, 1.0));
        picks.push(PickRecord { x, y, euler, confidence });
    }
    Ok(picks)
}

/// Writes picks as a single-loop STAR table readable by [`parse_pick_table`].
pub fn write_pick_table(picks: &[PickRecord]) -> String {
    let with_angles = picks.iter().any(|p| p.euler.is_some());
    let mut out = String::from("\ndata_\n\nloop_\n_rlnCoordinateX #1\n_rlnCoordinateY #2\n");
    if with_angles {
        out.push_str("_rlnAngleRot #3\n_rlnAngleTilt #4\n_rlnAnglePsi #5\n_rlnAutopickFigureOfMerit #6\n");
    } else {
        out.push_str("_rlnAutopickFigureOfMerit #3\n");
    }
    for p in picks {
        out.push_str(&format!("{} {}", p.x, p.y));
        if with_angles {
            let [a, b, c] = p.euler.unwrap_or([0.0; 3]);
            out.push_str(&format!(" {a} {b} {c}"));
        }
        out.push_str(&format!(" {}\n", p.confidence));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_only() {
        let t = "data_\nloop_\n_rlnCoordinateX #1\n_rlnCoordinateY #2\n10.5 20.5\n";
        let p = parse_pick_table(t.as_bytes()).unwrap();
        assert_eq!(p, vec![PickRecord { x: 10.5, y: 20.5, euler: None, confidence: 1.0 }]);
    }

    #[test]
    fn euler_columns() {
        let t = "data_particles\n\nloop_\n_rlnCoordinateX\n_rlnCoordinateY\n_rlnAngleRot\n_rlnAngleTilt\n_rlnAnglePsi\n0 0 30 60 90\n";
        let p = parse_pick_table(t.as_bytes()).unwrap();
        assert_eq!(p[0].euler, Some([30.0, 60.0, 90.0]));
        assert_eq!(p[0].confidence, 1.0);
    }

    #[test]
    fn missing_y_column() {
        let t = "data_\nloop_\n_rlnCoordinateX\n_rlnAngleRot\n1 2\n";
        assert_eq!(parse_pick_table(t.as_bytes()), Err(StarError::MissingColumn("_rlnCoordinateY")));
    }

    #[test]
    fn arity_mismatch_names_row() {
        let t = "data_\nloop_\n_rlnCoordinateX\n_rlnCoordinateY\n1 2\n3\n";
        assert!(matches!(parse_pick_table(t.as_bytes()), Err(StarError::Row { line: 6, .. })));
    }

    #[test]
    fn figure_of_merit_and_order() {
        let t = "# comment\ndata_\nloop_\n_rlnCoordinateX\n_rlnCoordinateY\n_rlnAutopickFigureOfMerit\n5 5 0.25\n1 1 2.0\n3 3 -1\n";
        let p = parse_pick_table(t.as_bytes()).unwrap();
        let xs: Vec<f64> = p.iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![5.0, 1.0, 3.0]);
        assert_eq!(p.iter().map(|r| r.confidence).collect::<Vec<_>>(), vec![0.25, 1.0, 0.0]);
    }

    #[test]
    fn no_loop() {
        assert_eq!(parse_pick_table(b"data_\n_rlnFoo 1\n"), Err(StarError::MissingColumn(COL_X)));
        assert_eq!(parse_pick_table(b""), Err(StarError::NoLoop));
    }

    #[test]
    fn writer_round_trip() {
        let picks = vec![
            PickRecord { x: 1.5, y: 2.25, euler: Some([10.0, 20.0, 30.0]), confidence: 0.5 },
            PickRecord { x: 0.0, y: 7.0, euler: None, confidence: 1.0 },
        ];
        let back = parse_pick_table(write_pick_table(&picks).as_bytes()).unwrap();
        assert_eq!(back[0], picks[0]);
        assert_eq!(back[1].euler, Some([0.0; 3]));
    }
}
