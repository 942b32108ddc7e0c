use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use super::{Frame, FrameConfig, Schema, VariableKind};
use crate::error::{Error, Result};

struct RawRows {
    columns: Vec<Vec<f64>>,
    response: Vec<u32>,
    tags: Vec<String>,
    file_of_row: Vec<usize>,
}

/// Loads one or more CSV files into a grouped frame.
///
/// Groups come from `config.groups`: a tag column, time cutoffs, or (when
/// neither is set) one group per file in the order given.
pub fn load_csv<P: AsRef<Path>>(paths: &[P], config: &FrameConfig) -> Result<Frame> {
    config.validate()?;
    if paths.is_empty() {
        return Err(Error::precondition("no input files"));
    }
    let schema = Schema::new(config.variables.clone())?;
    let mut raw = RawRows {
        columns: vec![Vec::new(); schema.variables().len()],
        response: Vec::new(),
        tags: Vec::new(),
        file_of_row: Vec::new(),
    };
    for (file_idx, path) in paths.iter().enumerate() {
        read_file(path.as_ref(), file_idx, config, &schema, &mut raw)?;
    }

    let g = &config.groups;
    let (groups, labels) = if let Some(col) = &g.column {
        assign_by_tag(&raw.tags, col, g.labels.as_deref())?
    } else if let Some(cuts) = &g.time_cutoffs {
        return finish_by_cutoffs(
            schema,
            raw,
            cuts,
            g.start,
            g.rebase_time,
            g.labels.as_deref(),
        );
    } else {
        let labels = match &g.labels {
            Some(l) if l.len() == paths.len() => l.clone(),
            Some(l) => {
                return Err(Error::Config(format!(
                    "groups.labels lists {} groups but {} files were given",
                    l.len(),
                    paths.len()
                )))
            }
            None => paths.iter().map(|p| file_label(p.as_ref())).collect(),
        };
        (raw.file_of_row.iter().map(|&f| f as u32).collect(), labels)
    };
    check_nonempty(&groups, &labels)?;
    Frame::new(schema, raw.columns, raw.response, groups, labels)
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_file(
    path: &Path,
    file_idx: usize,
    config: &FrameConfig,
    schema: &Schema,
    raw: &mut RawRows,
) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(PathBuf::from(path), io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if index.insert(h.trim(), i).is_some() {
            return Err(Error::DuplicateColumn(h.trim().to_string()));
        }
    }
    // Exact header match first, then a unique case-insensitive one.
    let find = |name: &str| -> Result<usize> {
        if let Some(&i) = index.get(name) {
            return Ok(i);
        }
        let mut hits = index.iter().filter(|(h, _)| h.eq_ignore_ascii_case(name));
        match (hits.next(), hits.next()) {
            (Some((_, &i)), None) => Ok(i),
            _ => Err(Error::MissingColumn(name.to_string())),
        }
    };
    let positions: Vec<usize> = schema
        .variables()
        .iter()
        .map(|v| find(&v.name))
        .collect::<Result<_>>()?;
    let tag_pos = match &config.groups.column {
        Some(c) => Some(find(c)?),
        None => None,
    };
    let is_missing = |s: &str| config.missing_tokens.iter().any(|t| t == s);
    let response_idx = schema.response_index();

    for record in reader.records() {
        let record = record?;
        let row = raw.response.len();
        for (var_idx, (&pos, var)) in positions.iter().zip(schema.variables()).enumerate() {
            let cell = record.get(pos).unwrap_or("").trim();
            let missing = is_missing(cell);
            if var_idx == response_idx {
                if missing {
                    return Err(Error::MissingResponse { row });
                }
                let code = var.code_of(cell).ok_or_else(|| Error::UnknownLevel {
                    row,
                    column: var.name.clone(),
                    value: cell.to_string(),
                })?;
                raw.response.push(code as u32 - 1);
                continue;
            }
            let value = if missing {
                f64::NAN
            } else {
                match &var.kind {
                    VariableKind::Numeric => {
                        let v: f64 = cell.parse().map_err(|_| Error::InvalidNumber {
                            row,
                            column: var.name.clone(),
                            value: cell.to_string(),
                        })?;
                        if v.is_infinite() {
                            return Err(Error::InvalidNumber {
                                row,
                                column: var.name.clone(),
                                value: cell.to_string(),
                            });
                        }
                        v
                    }
                    VariableKind::Ordinal { .. } => {
                        var.code_of(cell).ok_or_else(|| Error::UnknownLevel {
                            row,
                            column: var.name.clone(),
                            value: cell.to_string(),
                        })?
                    }
                }
            };
            raw.columns[var_idx].push(value);
        }
        if let Some(p) = tag_pos {
            raw.tags
                .push(record.get(p).unwrap_or("").trim().to_string());
        }
        raw.file_of_row.push(file_idx);
    }
    Ok(())
}

fn assign_by_tag(
    tags: &[String],
    column: &str,
    labels: Option<&[String]>,
) -> Result<(Vec<u32>, Vec<String>)> {
    let labels: Vec<String> = match labels {
        Some(l) => l.to_vec(),
        None => tags
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .cloned()
            .collect(),
    };
    let lookup: HashMap<&str, u32> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let groups = tags
        .iter()
        .enumerate()
        .map(|(row, t)| {
            lookup
                .get(t.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownLevel {
                    row,
                    column: column.to_string(),
                    value: t.clone(),
                })
        })
        .collect::<Result<_>>()?;
    Ok((groups, labels))
}

fn finish_by_cutoffs(
    schema: Schema,
    raw: RawRows,
    cuts: &[f64],
    start: Option<f64>,
    rebase: bool,
    labels: Option<&[String]>,
) -> Result<Frame> {
    let t_idx = schema.time_index().expect("validated");
    let time = &raw.columns[t_idx];
    let lower = start.unwrap_or(f64::NEG_INFINITY);
    let mut keep = Vec::with_capacity(time.len());
    let mut groups = Vec::with_capacity(time.len());
    for (row, &t) in time.iter().enumerate() {
        if t.is_nan() {
            return Err(Error::precondition(format!(
                "row {row}: time is missing but groups are defined by time cutoffs"
            )));
        }
        if t < lower {
            continue;
        }
        keep.push(row);
        groups.push(cuts.partition_point(|&c| c <= t) as u32);
    }
    if keep.len() < time.len() {
        log::info!(
            "dropped {} rows before groups.start",
            time.len() - keep.len()
        );
    }
    let d = cuts.len() + 1;
    let labels = match labels {
        Some(l) if l.len() == d => l.to_vec(),
        Some(l) => {
            return Err(Error::Config(format!(
                "groups.labels lists {} groups but cutoffs define {d}",
                l.len()
            )))
        }
        None => (0..d)
            .map(|k| {
                let lo = if k == 0 { lower } else { cuts[k - 1] };
                let hi = cuts.get(k).copied().unwrap_or(f64::INFINITY);
                format!("[{lo},{hi})")
            })
            .collect(),
    };
    let columns = raw
        .columns
        .iter()
        .enumerate()
        .map(|(var, col)| {
            if col.is_empty() {
                return Vec::new();
            }
            keep.iter()
                .zip(&groups)
                .map(|(&r, &g)| {
                    let v = col[r];
                    if rebase && var == t_idx && g > 0 {
                        v - (cuts[g as usize - 1] - lower)
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let response = keep.iter().map(|&r| raw.response[r]).collect();
    check_nonempty(&groups, &labels)?;
    Frame::new(schema, columns, response, groups, labels)
}

fn check_nonempty(groups: &[u32], labels: &[String]) -> Result<()> {
    let mut sizes = vec![0usize; labels.len()];
    for &g in groups {
        sizes[g as usize] += 1;
    }
    match sizes.iter().position(|&s| s == 0) {
        Some(k) => Err(Error::EmptyGroup(labels[k].clone())),
        None => Ok(()),
    }
}

/// Writes every schema column plus a group tag column.
///
/// Missing cells are written as `NA`; reload with
/// [`Frame::roundtrip_config`] to get an identical frame.
pub fn write_csv(frame: &Frame, path: impl AsRef<Path>, group_column: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    })?;
    let schema = frame.schema();
    let mut header: Vec<&str> = schema.variables().iter().map(|v| v.name.as_str()).collect();
    header.push(group_column);
    w.write_record(&header)?;
    let levels = schema.response_levels();
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for row in 0..frame.n_rows() {
        record.clear();
        for (var_idx, var) in schema.variables().iter().enumerate() {
            if var_idx == schema.response_index() {
                record.push(levels[frame.responses()[row] as usize].clone());
                continue;
            }
            let v = frame.value(row, var_idx);
            record.push(if v.is_nan() {
                "NA".to_string()
            } else {
                match var.label_of(v) {
                    Some(label) => label.to_string(),
                    None => v.to_string(),
                }
            });
        }
        record.push(frame.group_labels()[frame.groups()[row] as usize].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
