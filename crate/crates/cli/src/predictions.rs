//! Prediction CSV: frame, true_label, pred_label, then one mean-probability
//! column per condition.

use std::path::Path;

use vwt_core::pipeline::Prediction;

use crate::error::{CliError, Result};

pub struct PredictionTable {
    pub conditions: Vec<String>,
    pub true_labels: Vec<usize>,
    pub pred_labels: Vec<usize>,
    /// Row-major T×K mean probabilities.
    pub mean_probs: Vec<f64>,
}

pub fn write_predictions(
    path: &Path,
    prediction: &Prediction,
    true_labels: &[usize],
    conditions: &[String],
) -> Result<()> {
    let k = conditions.len();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut header = vec!["frame".to_string(), "true_label".into(), "pred_label".into()];
    header.extend(conditions.iter().map(|c| format!("prob_{c}")));
    w.write_record(&header)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    for (i, (&t, &p)) in true_labels.iter().zip(&prediction.labels).enumerate() {
        let mut row = vec![i.to_string(), t.to_string(), p.to_string()];
        for c in 0..k {
            row.push(format!("{:.10}", prediction.mean_probs.data()[i * k + c]));
        }
        w.write_record(&row)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn read_predictions(path: &Path) -> Result<PredictionTable> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 4
        || &headers[0] != "frame"
        || &headers[1] != "true_label"
        || &headers[2] != "pred_label"
    {
        return Err(CliError::data(format!(
            "{}: unexpected header {:?}",
            path.display(),
            headers
        )));
    }
    let conditions: Vec<String> = headers
        .iter()
        .skip(3)
        .map(|h| {
            h.strip_prefix("prob_")
                .map(str::to_string)
                .ok_or_else(|| {
                    CliError::data(format!("{}: bad probability column {h}", path.display()))
                })
        })
        .collect::<Result<_>>()?;
    let k = conditions.len();

    let mut true_labels = Vec::new();
    let mut pred_labels = Vec::new();
    let mut mean_probs = Vec::new();
    for (row_idx, record) in r.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let parse_usize = |field: usize| -> Result<usize> {
            record[field].parse().map_err(|_| {
                CliError::data(format!(
                    "{}: row {}: bad integer {:?}",
                    path.display(),
                    row_idx,
                    &record[field]
                ))
            })
        };
        let frame = parse_usize(0)?;
        if frame != row_idx {
            return Err(CliError::data(format!(
                "{}: row {} has frame index {frame}",
                path.display(),
                row_idx
            )));
        }
        true_labels.push(parse_usize(1)?);
        pred_labels.push(parse_usize(2)?);
        for c in 0..k {
            let v: f64 = record[3 + c].parse().map_err(|_| {
                CliError::data(format!(
                    "{}: row {}: bad probability {:?}",
                    path.display(),
                    row_idx,
                    &record[3 + c]
                ))
            })?;
            mean_probs.push(v);
        }
    }
    if true_labels.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    Ok(PredictionTable {
        conditions,
        true_labels,
        pred_labels,
        mean_probs,
    })
}

/// Peak-voxel series CSV: frame, harvested value, ideal response, stimulus
/// indicator.
pub fn write_series(
    path: &Path,
    frame_offset: usize,
    series: &[f64],
    ideal: &[f64],
    stimulus: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    w.write_record(["frame", "value", "ideal", "stimulus"])
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    for (j, &v) in series.iter().enumerate() {
        w.write_record(&[
            (frame_offset + j).to_string(),
            format!("{v:.10e}"),
            format!("{:.10}", ideal[j]),
            format!("{}", stimulus[j]),
        ])
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Series CSV columns used by the report overlays.
pub struct SeriesTable {
    pub frames: Vec<usize>,
    pub value: Vec<f64>,
    pub ideal: Vec<f64>,
    pub stimulus: Vec<f64>,
}

pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .clone();
    let want = ["frame", "value", "ideal", "stimulus"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(CliError::data(format!(
            "{}: unexpected header {:?}",
            path.display(),
            headers
        )));
    }
    let mut out = SeriesTable {
        frames: Vec::new(),
        value: Vec::new(),
        ideal: Vec::new(),
        stimulus: Vec::new(),
    };
    for record in r.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::data(format!("{}: bad {what}", path.display()));
        out.frames
            .push(record[0].parse().map_err(|_| bad("frame"))?);
        out.value.push(record[1].parse().map_err(|_| bad("value"))?);
        out.ideal.push(record[2].parse().map_err(|_| bad("ideal"))?);
        out.stimulus
            .push(record[3].parse().map_err(|_| bad("stimulus"))?);
    }
    if out.frames.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vwt_core::Tensor;

    #[test]
    fn predictions_round_trip() {
        let k = 3;
        let t = 5;
        let mean = Tensor::from_vec(
            &[t, k],
            (0..t * k).map(|i| i as f64 / (t * k) as f64).collect(),
        )
        .unwrap();
        let pred = Prediction {
            labels: vec![0, 1, 2, 1, 0],
            mean_probs: mean,
            tallies: vec![1; t * k],
            coverage: vec![3; t],
        };
        let truth = vec![0, 1, 2, 2, 0];
        let conditions = vec!["rest".to_string(), "a".into(), "b".into()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.csv");
        write_predictions(&path, &pred, &truth, &conditions).unwrap();
        let table = read_predictions(&path).unwrap();
        assert_eq!(table.conditions, conditions);
        assert_eq!(table.true_labels, truth);
        assert_eq!(table.pred_labels, pred.labels);
        for (a, b) in table.mean_probs.iter().zip(pred.mean_probs.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
