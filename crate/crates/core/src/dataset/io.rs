//! Canonical on-disk layout: a directory holding `labels.csv` (`index,label`,
//! label in `+1/-1/0`, 0-based indices) plus one `view_<name>.csv` per view
//! with a header row of column names.

use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use super::{Label, MultiviewDataset};
use crate::{Error, Result};

pub fn load_dataset(root: &Path) -> Result<MultiviewDataset> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!("not found: {}", root.display())));
    }
    let labels = read_labels(&root.join("labels.csv"))?;

    let mut view_files: Vec<(String, std::path::PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| {
            let file_name = entry.file_name().to_string_lossy().into_owned();
            let name = file_name
                .strip_prefix("view_")?
                .strip_suffix(".csv")?
                .to_string();
            Some((name, entry.path()))
        })
        .collect();
    view_files.sort();
    if view_files.is_empty() {
        return Err(Error::Dataset(format!(
            "no view_<name>.csv files in {}",
            root.display()
        )));
    }

    let mut views = Vec::with_capacity(view_files.len());
    let mut names = Vec::with_capacity(view_files.len());
    let mut columns = Vec::with_capacity(view_files.len());
    for (name, path) in view_files {
        let (cols, matrix) = read_view(&path)?;
        if matrix.nrows() != labels.len() {
            return Err(Error::Dataset(format!(
                "row count mismatch: labels.csv has {} rows, {} has {}",
                labels.len(),
                path.file_name().unwrap_or_default().to_string_lossy(),
                matrix.nrows()
            )));
        }
        views.push(matrix);
        names.push(name);
        columns.push(cols);
    }

    let dataset =
        MultiviewDataset::from_parts(views, names, columns, labels.clone(), labels, None)?;
    for message in dataset.diagnostics() {
        warn!("{}: {message}", root.display());
    }
    Ok(dataset)
}

fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(Error::Dataset(format!(
                "labels.csv row {row}: expected 2 columns, found {}",
                record.len()
            )));
        }
        let index: usize = record[0].trim().parse().map_err(|_| {
            Error::Dataset(format!(
                "labels.csv row {row}: non-numeric index {:?}",
                &record[0]
            ))
        })?;
        let code: i64 = record[1].trim().parse().map_err(|_| {
            Error::Dataset(format!(
                "labels.csv row {row}: non-numeric label {:?}",
                &record[1]
            ))
        })?;
        entries.push((index, Label::from_code(code)?));
    }
    let n = entries.len();
    let mut labels = vec![None; n];
    for (index, label) in entries {
        match labels.get_mut(index) {
            Some(slot @ None) => *slot = Some(label),
            Some(Some(_)) => {
                return Err(Error::Dataset(format!(
                    "labels.csv: duplicate index {index}"
                )))
            }
            None => {
                return Err(Error::Dataset(format!(
                    "labels.csv: index {index} out of range for {n} rows"
                )))
            }
        }
    }
    Ok(labels
        .into_iter()
        .map(|l| l.expect("every slot filled"))
        .collect())
}

fn read_view(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let display = path
        .file_name()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Dataset(format!("{display}: {e}")))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Dataset(format!("{display}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Dataset(format!("{display}: empty view")));
    }
    let width = header.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(format!("{display}: {e}")))?;
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::Dataset(format!(
                    "{display} row {row} column {col}: non-numeric cell {cell:?}"
                ))
            })?;
            values.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Dataset(format!("{display}: empty view")));
    }
    Ok((header, DMatrix::from_row_slice(rows, width, &values)))
}

/// Write `dataset` in the canonical layout. Rows are written in the order the
/// examples had in their source, so load → save reproduces the input files.
pub fn save_dataset(dataset: &MultiviewDataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut rows: Vec<usize> = (0..dataset.n()).collect();
    rows.sort_by_key(|&i| dataset.order()[i]);

    let mut labels = String::from("index,label\n");
    for (out_index, &i) in rows.iter().enumerate() {
        labels.push_str(&format!("{out_index},{}\n", dataset.labels()[i].code()));
    }
    let path = root.join("labels.csv");
    fs::write(&path, labels).map_err(|e| Error::io(path, e))?;

    for (v, name) in dataset.view_names().iter().enumerate() {
        let view = dataset.view(v);
        let mut text = dataset.columns()[v].join(",");
        text.push('\n');
        for &i in &rows {
            let line: Vec<String> = view.row(i).iter().map(|x| format!("{x:?}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        let path = root.join(format!("view_{name}.csv"));
        fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
