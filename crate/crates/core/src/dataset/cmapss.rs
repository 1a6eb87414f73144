//! Whitespace-separated trajectory files (`unit cycle setting×3 sensor×21`)
//! and their companion RUL files.

use std::fmt::Write as _;
use std::path::Path;

use super::{DatasetError, Result, Sample, Split, Subset, SubsetId, Trajectory, N_FEATURES};

const N_COLUMNS: usize = N_FEATURES + 2;

/// Parses a trajectory file. Lines must be grouped by unit with cycles
/// numbered 1, 2, ... inside each group.
pub fn parse_cmapss(text: &str) -> Result<Vec<Trajectory>> {
    let mut out: Vec<Trajectory> = Vec::new();
    let mut current: Option<(u32, Vec<Sample>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != N_COLUMNS {
            return Err(DatasetError::Parse {
                line: line_no,
                reason: format!("expected {N_COLUMNS} fields, found {}", tokens.len()),
            });
        }
        let unit = parse_index(tokens[0], line_no, "unit id")?;
        let cycle = parse_index(tokens[1], line_no, "cycle")?;
        if unit == 0 {
            return Err(DatasetError::Parse {
                line: line_no,
                reason: "unit id must be positive".into(),
            });
        }
        let mut values = [0.0; N_FEATURES];
        for (slot, tok) in values.iter_mut().zip(&tokens[2..]) {
            *slot = parse_value(tok, line_no)?;
        }
        let sample = Sample(values);

        match current.as_mut() {
            Some((u, samples)) if *u == unit => {
                let expected = samples.len() as u32 + 1;
                if cycle != expected {
                    return Err(DatasetError::Structure {
                        unit,
                        reason: format!("cycle {cycle} at line {line_no}, expected {expected}"),
                    });
                }
                samples.push(sample);
            }
            _ => {
                if let Some((u, samples)) = current.take() {
                    out.push(Trajectory::new(u, samples)?);
                }
                if out.iter().any(|t| t.unit_id == unit) {
                    return Err(DatasetError::Structure {
                        unit,
                        reason: format!("unit reappears at line {line_no} after other units"),
                    });
                }
                if cycle != 1 {
                    return Err(DatasetError::Structure {
                        unit,
                        reason: format!("first cycle is {cycle} at line {line_no}, expected 1"),
                    });
                }
                current = Some((unit, vec![sample]));
            }
        }
    }
    if let Some((u, samples)) = current {
        out.push(Trajectory::new(u, samples)?);
    }
    Ok(out)
}

fn parse_index(tok: &str, line: usize, what: &str) -> Result<u32> {
    tok.parse::<u32>().map_err(|_| DatasetError::Parse {
        line,
        reason: format!("{what} '{tok}' is not a nonnegative integer"),
    })
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    // `f64::from_str` accepts "inf"/"NaN", which never occur in valid files.
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DatasetError::Parse {
            line,
            reason: format!("'{tok}' is not a finite number"),
        }),
    }
}

/// Canonical text encoding: one line per cycle, floats in shortest
/// round-trip form. `parse_cmapss(write_cmapss(x)) == x` bit for bit.
pub fn write_cmapss(trajectories: &[Trajectory]) -> String {
    let mut out = String::new();
    for t in trajectories {
        for (i, s) in t.samples().iter().enumerate() {
            write!(out, "{} {}", t.unit_id, i + 1).unwrap();
            for v in s.values() {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// One integer per line, file order = unit order. Sign is checked later by
/// [`attach_censored_rul`].
pub fn parse_rul_file(text: &str) -> Result<Vec<i64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<i64>().map_err(|_| DatasetError::Parse {
                line: i + 1,
                reason: format!("'{}' is not an integer", l.trim()),
            })
        })
        .collect()
}

pub fn write_rul_file(ruls: &[u32]) -> String {
    ruls.iter().map(|r| format!("{r}\n")).collect()
}

/// Pairs censored RUL values with trajectories by position.
pub fn attach_censored_rul(trajectories: Vec<Trajectory>, ruls: &[i64]) -> Result<Vec<Trajectory>> {
    if ruls.len() != trajectories.len() {
        return Err(DatasetError::RulCountMismatch {
            ruls: ruls.len(),
            trajectories: trajectories.len(),
        });
    }
    trajectories
        .into_iter()
        .zip(ruls)
        .map(|(t, &r)| {
            let rul = u32::try_from(r).map_err(|_| DatasetError::NegativeRul {
                unit: t.unit_id,
                value: r,
            })?;
            Ok(t.with_censored_rul(rul))
        })
        .collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Loads `train_FD00x.txt`, or `test_FD00x.txt` plus `RUL_FD00x.txt`, from
/// a data directory.
pub fn load_subset(root: &Path, id: SubsetId, split: Split) -> Result<Subset> {
    let trajectories = match split {
        Split::Alpha => parse_cmapss(&read(&root.join(id.train_file()))?)?,
        Split::Beta => {
            let trajs = parse_cmapss(&read(&root.join(id.test_file()))?)?;
            let ruls = parse_rul_file(&read(&root.join(id.rul_file()))?)?;
            attach_censored_rul(trajs, &ruls)?
        }
    };
    Subset::new(id, split, trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_line(unit: u32, cycle: u32) -> String {
        let mut s = format!("{unit} {cycle}");
        for _ in 0..N_FEATURES {
            s.push_str(" 0");
        }
        s
    }

    #[test]
    fn minimal_input() {
        let text = format!("{}\n{}\n", zero_line(1, 1), zero_line(1, 2));
        let trajs = parse_cmapss(&text).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 2);
        assert!(trajs[0].is_run_to_failure());
    }

    #[test]
    fn tolerates_blank_lines_and_trailing_whitespace() {
        let text = format!(
            "\n{}  \t\n\n{} \n{}\n\n",
            zero_line(1, 1),
            zero_line(1, 2),
            zero_line(2, 1)
        );
        let trajs = parse_cmapss(&text).unwrap();
        assert_eq!(trajs.iter().map(|t| t.len()).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let text = format!("{}\n1 2 0 0\n", zero_line(1, 1));
        match parse_cmapss(&text) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_reports_line() {
        let bad = zero_line(1, 2).replacen(" 0", " x1", 3);
        let text = format!("{}\n{}\n", zero_line(1, 1), bad);
        assert!(matches!(parse_cmapss(&text), Err(DatasetError::Parse { line: 2, .. })));
        let nan = zero_line(1, 1).replacen(" 0", " NaN", 1);
        assert!(matches!(parse_cmapss(&nan), Err(DatasetError::Parse { line: 1, .. })));
    }

    #[test]
    fn locale_separators_rejected() {
        let comma = zero_line(1, 1).replacen(" 0", " 0,5", 1);
        assert!(parse_cmapss(&comma).is_err());
    }

    #[test]
    fn gap_in_cycles_names_unit() {
        let text = format!("{}\n{}\n", zero_line(7, 1), zero_line(7, 3));
        assert!(matches!(
            parse_cmapss(&text),
            Err(DatasetError::Structure { unit: 7, .. })
        ));
        let late_start = zero_line(2, 2);
        assert!(matches!(
            parse_cmapss(&late_start),
            Err(DatasetError::Structure { unit: 2, .. })
        ));
        let split = format!("{}\n{}\n{}\n", zero_line(1, 1), zero_line(2, 1), zero_line(1, 2));
        assert!(matches!(
            parse_cmapss(&split),
            Err(DatasetError::Structure { unit: 1, .. })
        ));
    }

    #[test]
    fn attach_rul() {
        let text = (1..=5).map(|c| zero_line(1, c)).collect::<Vec<_>>().join("\n");
        let trajs = parse_cmapss(&text).unwrap();
        let with = attach_censored_rul(trajs.clone(), &[7]).unwrap();
        let y = with[0].targets(130);
        assert_eq!(y.at_cycle(5), Some(7));
        assert_eq!(y.at_cycle(1), Some(11));

        let eol = attach_censored_rul(trajs.clone(), &[0]).unwrap();
        assert_eq!(eol[0].targets(130).at_cycle(5), Some(0));

        assert_eq!(
            attach_censored_rul(trajs.clone(), &[]),
            Err(DatasetError::RulCountMismatch { ruls: 0, trajectories: 1 })
        );
        assert_eq!(
            attach_censored_rul(trajs, &[-1]),
            Err(DatasetError::NegativeRul { unit: 1, value: -1 })
        );
    }

    #[test]
    fn rul_file_parsing() {
        assert_eq!(parse_rul_file("112\n98 \n\n69\n").unwrap(), vec![112, 98, 69]);
        assert!(parse_rul_file("12\n1.5\n").is_err());
        assert_eq!(write_rul_file(&[3, 0]), "3\n0\n");
    }

    #[test]
    fn published_format_line() {
        // first line of the public FD001 training file
        let line = "1 1 -0.0007 -0.0004 100.0 518.67 641.82 1589.70 1400.60 14.62 21.61 554.36 \
                    2388.06 9046.19 1.30 47.47 521.66 2388.02 8138.62 8.4195 0.03 392 2388 \
                    100.00 39.06 23.4190";
        let t = parse_cmapss(line).unwrap();
        assert_eq!(t[0].samples()[0][0], -0.0007);
        assert_eq!(t[0].samples()[0][23], 23.419);
        let again = parse_cmapss(&write_cmapss(&t)).unwrap();
        assert_eq!(again, t);
    }
}
