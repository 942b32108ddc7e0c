//! Schema guessing for inputs given without `--schema`.

use std::collections::BTreeSet;
use std::path::Path;

use difftree::data::GroupSpec;
use difftree::{FrameConfig, Role, VariableSpec};

const MISSING: [&str; 2] = ["", "NA"];

/// Numeric when every non-missing cell parses as a finite number, ordinal
/// otherwise (levels sorted). The response is always ordinal.
pub fn infer_config(
    paths: &[&Path],
    response: &str,
    time: Option<&str>,
    skip: Option<&str>,
) -> Result<FrameConfig, String> {
    let mut names: Vec<String> = Vec::new();
    let mut numeric: Vec<bool> = Vec::new();
    let mut labels: Vec<BTreeSet<String>> = Vec::new();
    for path in paths {
        let mut reader =
            csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| format!("{}: {e}", path.display()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if names.is_empty() {
            numeric = vec![true; headers.len()];
            labels = vec![BTreeSet::new(); headers.len()];
            names = headers;
        } else if headers != names {
            return Err(format!(
                "{}: header differs from the first input",
                path.display()
            ));
        }
        for rec in reader.records() {
            let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
            for (i, cell) in rec.iter().enumerate().take(names.len()) {
                let cell = cell.trim();
                if MISSING.contains(&cell) {
                    continue;
                }
                if numeric[i] && !cell.parse::<f64>().is_ok_and(f64::is_finite) {
                    numeric[i] = false;
                }
                labels[i].insert(cell.to_string());
            }
        }
    }
    let pick = |want: &str| -> Result<usize, String> {
        names
            .iter()
            .position(|n| n == want)
            .or_else(|| names.iter().position(|n| n.eq_ignore_ascii_case(want)))
            .ok_or_else(|| format!("column `{want}` not found in the input header"))
    };
    let r = pick(response)?;
    let t = time.map(pick).transpose()?;
    let s = skip.map(pick).transpose()?;
    if t == Some(r) {
        return Err("the response cannot also be the time column".into());
    }
    if let Some(t) = t {
        if !numeric[t] {
            return Err(format!("time column `{}` is not numeric", names[t]));
        }
    }

    let mut variables = Vec::new();
    for (i, name) in names.iter().enumerate() {
        if Some(i) == s {
            continue;
        }
        let role = if i == r {
            Role::Response
        } else if Some(i) == t {
            Role::Time
        } else {
            Role::Predictor
        };
        let v = if i == r || !numeric[i] {
            VariableSpec::ordinal(name.clone(), labels[i].iter().cloned(), role)
        } else {
            VariableSpec::numeric(name.clone(), role)
        };
        variables.push(v);
    }
    let config = FrameConfig {
        missing_tokens: MISSING.iter().map(|s| s.to_string()).collect(),
        variables,
        groups: GroupSpec::default(),
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}
