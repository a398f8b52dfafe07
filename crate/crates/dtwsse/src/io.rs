//! File formats and the 1-NN evaluator.
//!
//! Datasets use the UCR archive layout: one sample per row, a class label
//! token followed by the flattened series values in time-major order,
//! tab- or comma-delimited. Models persist as a single JSON document with
//! full-precision weights; a fixed `format_version` gates loading.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{TrainedAutoencoder, TrainingReport};
use crate::dataset::{Dataset, LabeledSample, TimeSeries};
use crate::error::{Error, Result};
use crate::mlp::{Activation, DenseLayer, Mlp};
use crate::neighbors::Metric;

/// Model files this build writes and accepts.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Reads a UCR-style file into a dataset. `vars` is the number of variables
/// per time step; each row must carry a label plus a multiple of `vars`
/// values. With no explicit delimiter the first row picks tab, comma, or
/// general whitespace, in that order.
pub fn read_ucr(path: &Path, vars: usize, delimiter: Option<char>) -> Result<Dataset> {
    if vars == 0 {
        return Err(Error::InvalidConfig {
            reason: "vars must be at least 1".into(),
        });
    }
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let content = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut detected = delimiter;
    let mut expected_fields: Option<usize> = None;
    let mut samples = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if detected.is_none() {
            detected = if line.contains('\t') {
                Some('\t')
            } else if line.contains(',') {
                Some(',')
            } else {
                None // plain whitespace
            };
            if delimiter.is_none() && detected.is_none() && !line.contains(char::is_whitespace) {
                return Err(parse_err(
                    line_no,
                    "expected a label and at least one value".into(),
                ));
            }
        }
        let fields: Vec<&str> = match detected {
            Some(d) => line.split(d).map(str::trim).collect(),
            None => line.split_whitespace().collect(),
        };
        if fields.len() < 2 {
            return Err(parse_err(
                line_no,
                "expected a label and at least one value".into(),
            ));
        }
        match expected_fields {
            None => expected_fields = Some(fields.len()),
            Some(expected) if expected != fields.len() => {
                return Err(parse_err(
                    line_no,
                    format!("row has {} fields, previous rows have {}", fields.len(), expected),
                ));
            }
            Some(_) => {}
        }
        let label = fields[0];
        if label.is_empty() {
            return Err(parse_err(line_no, "empty label".into()));
        }
        let value_count = fields.len() - 1;
        if !value_count.is_multiple_of(vars) {
            return Err(parse_err(
                line_no,
                format!("{value_count} value fields are not divisible by {vars} variables"),
            ));
        }
        let mut values = Vec::with_capacity(value_count);
        for token in &fields[1..] {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_err(line_no, format!("cannot parse {token:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value {token:?}")));
            }
            values.push(v);
        }
        let series = TimeSeries::from_flat(values, value_count / vars, vars)?;
        samples.push(LabeledSample::new(series, label));
    }
    if samples.is_empty() {
        return Err(parse_err(1, "file contains no samples".into()));
    }
    Dataset::new(samples)
}

/// Writes a dataset in the UCR layout. Values are printed with 18
/// significant digits, enough for an exact f64 round trip through
/// [`read_ucr`]. Byte output is deterministic for a fixed dataset.
pub fn write_ucr(dataset: &Dataset, path: &Path, delimiter: char) -> Result<()> {
    if delimiter != '\t' && delimiter != ',' {
        return Err(Error::InvalidConfig {
            reason: format!("delimiter must be tab or comma, got {delimiter:?}"),
        });
    }
    let mut out = String::new();
    for sample in dataset.iter() {
        if sample.label.contains(delimiter) || sample.label.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig {
                reason: format!("label {:?} contains the delimiter", sample.label),
            });
        }
        out.push_str(&sample.label);
        for &v in sample.series.values().iter() {
            out.push(delimiter);
            out.push_str(&format!("{v:.17e}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    shape: ShapeRecord,
    latent_dim: usize,
    encoder: Vec<LayerRecord>,
    decoder: Vec<LayerRecord>,
    training_report: TrainingReport,
}

#[derive(Serialize, Deserialize)]
struct ShapeRecord {
    len: usize,
    vars: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    fan_in: usize,
    fan_out: usize,
    activation: String,
    /// Row-major `(fan_out, fan_in)`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

fn layer_records(net: &Mlp) -> Vec<LayerRecord> {
    net.layers()
        .iter()
        .map(|l| LayerRecord {
            fan_in: l.fan_in(),
            fan_out: l.fan_out(),
            activation: l.activation.as_str().to_string(),
            weights: l.weights.iter().copied().collect(),
            biases: l.biases.to_vec(),
        })
        .collect()
}

fn rebuild_network(records: Vec<LayerRecord>, what: &str) -> Result<Mlp> {
    let bad = |reason: String| Error::InvalidModel { reason };
    if records.is_empty() {
        return Err(bad(format!("{what} has no layers")));
    }
    let mut layers = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        if rec.weights.len() != rec.fan_in * rec.fan_out {
            return Err(bad(format!(
                "{what} layer {i}: {} weights for declared shape {}x{}",
                rec.weights.len(),
                rec.fan_out,
                rec.fan_in
            )));
        }
        if rec.biases.len() != rec.fan_out {
            return Err(bad(format!(
                "{what} layer {i}: {} biases for fan_out {}",
                rec.biases.len(),
                rec.fan_out
            )));
        }
        let weights = ndarray::Array2::from_shape_vec((rec.fan_out, rec.fan_in), rec.weights)
            .expect("length checked above");
        let activation = Activation::parse(&rec.activation)?;
        let layer = DenseLayer::new(weights, ndarray::Array1::from_vec(rec.biases), activation)
            .map_err(|e| bad(format!("{what} layer {i}: {e}")))?;
        layers.push(layer);
    }
    Mlp::from_layers(layers).map_err(|e| bad(format!("{what}: {e}")))
}

/// Persists a trained model as JSON. Weights are written with full
/// precision: a save/load round trip reproduces inference bit for bit.
pub fn save_model(model: &TrainedAutoencoder, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        shape: ShapeRecord {
            len: model.shape.0,
            vars: model.shape.1,
        },
        latent_dim: model.latent_dim(),
        encoder: layer_records(&model.encoder),
        decoder: layer_records(&model.decoder),
        training_report: model.report.clone(),
    };
    let mut bytes = serde_json::to_vec(&file).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a model written by [`save_model`], validating the format version
/// and every declared dimension.
pub fn load_model(path: &Path) -> Result<TrainedAutoencoder> {
    let content = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelFile = serde_json::from_slice(&content).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedFormatVersion {
            found: file.format_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let encoder = rebuild_network(file.encoder, "encoder")?;
    let decoder = rebuild_network(file.decoder, "decoder")?;
    let input = file.shape.len * file.shape.vars;
    let consistent = encoder.input_dim() == input
        && encoder.output_dim() == file.latent_dim
        && decoder.input_dim() == file.latent_dim
        && decoder.output_dim() == input;
    if !consistent {
        return Err(Error::InvalidModel {
            reason: format!(
                "declared shape {}x{} and latent_dim {} do not match the layer dimensions",
                file.shape.len, file.shape.vars, file.latent_dim
            ),
        });
    }
    Ok(TrainedAutoencoder {
        encoder,
        decoder,
        shape: (file.shape.len, file.shape.vars),
        report: file.training_report,
    })
}

/// Accuracy tally for one class of the test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAccuracy {
    pub label: String,
    pub correct: usize,
    pub total: usize,
}

impl ClassAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Per-class and overall 1-NN accuracy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    /// One entry per test-set class, in lexicographic label order.
    pub classes: Vec<ClassAccuracy>,
    pub correct: usize,
    pub total: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Labels every test sample with its nearest training sample under `metric`
/// (distance ties keep the lowest training index) and tallies accuracy.
pub fn eval_1nn(train: &Dataset, test: &Dataset, metric: Metric) -> Result<EvalReport> {
    if train.shape() != test.shape() {
        return Err(Error::IncompatibleSeries {
            op: "1-NN evaluation",
            left_len: train.shape().0,
            left_vars: train.shape().1,
            right_len: test.shape().0,
            right_vars: test.shape().1,
        });
    }
    let predictions: Vec<&str> = test
        .samples()
        .par_iter()
        .map(|sample| {
            let mut best = (f64::INFINITY, 0usize);
            for (idx, candidate) in train.iter().enumerate() {
                let d = metric.distance(&sample.series, &candidate.series)?;
                if d < best.0 {
                    best = (d, idx);
                }
            }
            Ok(train.samples()[best.1].label.as_str())
        })
        .collect::<Result<_>>()?;
    let mut tally: std::collections::BTreeMap<&str, (usize, usize)> =
        std::collections::BTreeMap::new();
    let mut correct = 0;
    for (sample, predicted) in test.iter().zip(&predictions) {
        let entry = tally.entry(sample.label.as_str()).or_insert((0, 0));
        entry.1 += 1;
        if sample.label == *predicted {
            entry.0 += 1;
            correct += 1;
        }
    }
    Ok(EvalReport {
        classes: tally
            .into_iter()
            .map(|(label, (correct, total))| ClassAccuracy {
                label: label.to_string(),
                correct,
                total,
            })
            .collect(),
        correct,
        total: test.size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{AeConfig, GeneratorParams, encode, generate_pairs, train_siamese};
    use crate::rng::seed_stream;
    use std::io::Write;
    use tempfile::TempDir;

    fn write_file(dir: &TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn reads_tab_separated_univariate_rows() {
        let dir = TempDir::new().unwrap();
        let path = write_file(&dir, "a.tsv", "2\t0.1\t0.2\t0.3\n1\t-1.0\t0.0\t1.0\n");
        let ds = read_ucr(&path, 1, None).unwrap();
        assert_eq!(ds.size(), 2);
        assert_eq!(ds.shape(), (3, 1));
        assert_eq!(ds.samples()[0].label, "2");
        assert_eq!(ds.samples()[0].series.flatten(), vec![0.1, 0.2, 0.3]);
        assert_eq!(ds.samples()[1].label, "1");
    }

    #[test]
    fn reads_comma_and_whitespace_delimiters() {
        let dir = TempDir::new().unwrap();
        let by_comma = write_file(&dir, "a.csv", "1,0.5,0.25\n2,0.1,0.9\n");
        let ds = read_ucr(&by_comma, 1, None).unwrap();
        assert_eq!(ds.shape(), (2, 1));
        assert_eq!(ds.samples()[0].series.flatten(), vec![0.5, 0.25]);
        let by_space = write_file(&dir, "a.txt", "1 0.5 0.25\n2 0.1 0.9\n");
        let ds2 = read_ucr(&by_space, 1, None).unwrap();
        assert_eq!(ds2.samples(), ds.samples());
        // An explicit delimiter overrides detection.
        let ds3 = read_ucr(&by_comma, 1, Some(',')).unwrap();
        assert_eq!(ds3.samples(), ds.samples());
    }

    #[test]
    fn multivariate_rows_split_time_major() {
        let dir = TempDir::new().unwrap();
        // L=2, M=2: (t1v1, t1v2, t2v1, t2v2).
        let path = write_file(&dir, "m.tsv", "x\t1.0\t2.0\t3.0\t4.0\n");
        let ds = read_ucr(&path, 2, None).unwrap();
        assert_eq!(ds.shape(), (2, 2));
        let v = ds.samples()[0].series.values().to_owned();
        assert_eq!(v[[0, 0]], 1.0);
        assert_eq!(v[[0, 1]], 2.0);
        assert_eq!(v[[1, 0]], 3.0);
        assert_eq!(v[[1, 1]], 4.0);
    }

    #[test]
    fn rejects_value_count_not_divisible_by_vars() {
        let dir = TempDir::new().unwrap();
        let path = write_file(&dir, "bad.tsv", "x\t1.0\t2.0\t3.0\t4.0\t5.0\n");
        match read_ucr(&path, 2, None) {
            Err(Error::Parse { line, reason, .. }) => {
                assert_eq!(line, 1);
                assert!(reason.contains("divisible"), "{reason}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows_with_line_number() {
        let dir = TempDir::new().unwrap();
        let path = write_file(&dir, "ragged.tsv", "a\t1.0\t2.0\nb\t1.0\n");
        match read_ucr(&path, 1, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_junk_values() {
        let dir = TempDir::new().unwrap();
        let nan = write_file(&dir, "nan.tsv", "a\t1.0\nb\tNaN\n");
        match read_ucr(&nan, 1, None) {
            Err(Error::Parse { line, reason, .. }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("non-finite"), "{reason}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let junk = write_file(&dir, "junk.tsv", "a\tpotato\n");
        assert!(matches!(
            read_ucr(&junk, 1, None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_empty_and_label_only_files() {
        let dir = TempDir::new().unwrap();
        let empty = write_file(&dir, "empty.tsv", "\n\n");
        assert!(matches!(read_ucr(&empty, 1, None), Err(Error::Parse { .. })));
        let label_only = write_file(&dir, "label.tsv", "justalabel\n");
        assert!(matches!(
            read_ucr(&label_only, 1, None),
            Err(Error::Parse { .. })
        ));
        let missing = dir.path().join("nope.tsv");
        assert!(matches!(read_ucr(&missing, 1, None), Err(Error::Io { .. })));
    }

    #[test]
    fn ucr_round_trip_is_bit_exact() {
        let dir = TempDir::new().unwrap();
        let samples = vec![
            LabeledSample::new(
                TimeSeries::univariate(vec![0.1, -0.2, 1.0 / 3.0, 1e-15]).unwrap(),
                "1",
            ),
            LabeledSample::new(
                TimeSeries::univariate(vec![std::f64::consts::PI, 2.5e8, -0.0, 7.0]).unwrap(),
                "2",
            ),
        ];
        let ds = Dataset::new(samples).unwrap();
        for delim in ['\t', ','] {
            let path = dir.path().join(format!("rt-{}.txt", delim as u32));
            write_ucr(&ds, &path, delim).unwrap();
            let back = read_ucr(&path, 1, None).unwrap();
            assert_eq!(back.samples(), ds.samples());
        }
    }

    #[test]
    fn write_is_deterministic_and_rejects_bad_delimiters() {
        let dir = TempDir::new().unwrap();
        let ds = Dataset::new(vec![LabeledSample::new(
            TimeSeries::univariate(vec![0.5]).unwrap(),
            "a",
        )])
        .unwrap();
        let p1 = dir.path().join("w1.tsv");
        let p2 = dir.path().join("w2.tsv");
        write_ucr(&ds, &p1, '\t').unwrap();
        write_ucr(&ds, &p2, '\t').unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert!(write_ucr(&ds, &p1, ';').is_err());
    }

    fn tiny_trained_model() -> TrainedAutoencoder {
        let cfg = AeConfig {
            pair_count: 24,
            latent_mult: 2,
            hidden_mult: 2,
            max_epochs: 12,
            ..AeConfig::default()
        };
        let params = GeneratorParams {
            mean: 0.0,
            std_dev: 1.0,
        };
        let mut rng = seed_stream(31, 1);
        let pairs = generate_pairs((4, 1), cfg.pair_count, &params, &mut rng).unwrap();
        let mut rng = seed_stream(31, 2);
        train_siamese(&pairs, (4, 1), &cfg, &mut rng).unwrap()
    }

    #[test]
    fn model_round_trip_preserves_inference_bits() {
        let dir = TempDir::new().unwrap();
        let model = tiny_trained_model();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.encoder, model.encoder);
        assert_eq!(loaded.decoder, model.decoder);
        assert_eq!(loaded.shape, model.shape);
        assert_eq!(loaded.report, model.report);
        let probe = TimeSeries::univariate(vec![0.3, -1.7, 0.0, 2.2]).unwrap();
        let h0 = encode(&model, &probe).unwrap();
        let h1 = encode(&loaded, &probe).unwrap();
        assert_eq!(h0, h1);
    }

    #[test]
    fn model_loading_rejects_bad_files() {
        let dir = TempDir::new().unwrap();
        let model = tiny_trained_model();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();

        let versioned = write_file(
            &dir,
            "v9.json",
            &text.replace("\"format_version\":1", "\"format_version\":9"),
        );
        assert!(matches!(
            load_model(&versioned),
            Err(Error::UnsupportedFormatVersion { found: 9, .. })
        ));

        let truncated = write_file(&dir, "trunc.json", &text[..text.len() / 2]);
        assert!(matches!(load_model(&truncated), Err(Error::Json { .. })));

        // Tamper a declared dimension so layers no longer line up.
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["latent_dim"] = serde_json::json!(999);
        let mismatched = write_file(&dir, "dim.json", &doc.to_string());
        assert!(matches!(
            load_model(&mismatched),
            Err(Error::InvalidModel { .. })
        ));

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["encoder"][0]["weights"].as_array_mut().unwrap().pop();
        let short = write_file(&dir, "short.json", &doc.to_string());
        assert!(matches!(load_model(&short), Err(Error::InvalidModel { .. })));
    }

    fn separated_classes() -> (Dataset, Dataset) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for i in 0..5 {
            let low = i as f64 * 0.01;
            train.push(LabeledSample::new(
                TimeSeries::univariate(vec![low, low, low]).unwrap(),
                "low",
            ));
            train.push(LabeledSample::new(
                TimeSeries::univariate(vec![9.0 + low, 9.0 - low, 9.0]).unwrap(),
                "high",
            ));
            test.push(LabeledSample::new(
                TimeSeries::univariate(vec![low + 0.002, low, low]).unwrap(),
                "low",
            ));
            test.push(LabeledSample::new(
                TimeSeries::univariate(vec![9.0, 9.0 + low, 9.0]).unwrap(),
                "high",
            ));
        }
        (Dataset::new(train).unwrap(), Dataset::new(test).unwrap())
    }

    #[test]
    fn separated_classes_classify_perfectly() {
        let (train, test) = separated_classes();
        for metric in [Metric::Dtw, Metric::Euclidean] {
            let report = eval_1nn(&train, &test, metric).unwrap();
            assert_eq!(report.accuracy(), 1.0);
            assert_eq!(report.total, 10);
            assert_eq!(report.classes.len(), 2);
            assert_eq!(report.classes[0].label, "high");
            assert_eq!(report.classes[0].total, 5);
            assert_eq!(report.classes[0].accuracy(), 1.0);
        }
    }

    #[test]
    fn test_subset_of_train_is_perfect() {
        let (train, _) = separated_classes();
        let subset = Dataset::new(train.samples()[..4].to_vec()).unwrap();
        let report = eval_1nn(&train, &subset, Metric::Dtw).unwrap();
        assert_eq!(report.accuracy(), 1.0);
    }

    #[test]
    fn single_train_sample_predicts_its_label_everywhere() {
        let train = Dataset::new(vec![LabeledSample::new(
            TimeSeries::univariate(vec![1.0, 2.0]).unwrap(),
            "only",
        )])
        .unwrap();
        let test = Dataset::new(vec![
            LabeledSample::new(TimeSeries::univariate(vec![9.0, 9.0]).unwrap(), "only"),
            LabeledSample::new(TimeSeries::univariate(vec![0.0, 0.0]).unwrap(), "other"),
        ])
        .unwrap();
        let report = eval_1nn(&train, &test, Metric::Euclidean).unwrap();
        assert_eq!(report.correct, 1);
        assert_eq!(report.total, 2);
        assert_eq!(report.accuracy(), 0.5);
    }

    #[test]
    fn distance_ties_keep_the_lowest_train_index() {
        let train = Dataset::new(vec![
            LabeledSample::new(TimeSeries::univariate(vec![1.0]).unwrap(), "first"),
            LabeledSample::new(TimeSeries::univariate(vec![3.0]).unwrap(), "second"),
        ])
        .unwrap();
        let test = Dataset::new(vec![LabeledSample::new(
            TimeSeries::univariate(vec![2.0]).unwrap(),
            "first",
        )])
        .unwrap();
        let report = eval_1nn(&train, &test, Metric::Euclidean).unwrap();
        assert_eq!(report.correct, 1);
    }

    #[test]
    fn eval_rejects_shape_mismatch() {
        let (train, _) = separated_classes();
        let test = Dataset::new(vec![LabeledSample::new(
            TimeSeries::univariate(vec![0.0, 0.0]).unwrap(),
            "low",
        )])
        .unwrap();
        assert!(matches!(
            eval_1nn(&train, &test, Metric::Dtw),
            Err(Error::IncompatibleSeries { .. })
        ));
    }
}
