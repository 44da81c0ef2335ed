//! Samples, datasets with stable indices, subset views and loaders.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub features: Vec<T>,
    pub label: usize,
}

/// An immutable, ordered collection of samples. A sample's index is its
/// position and never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    id: String,
    num_classes: usize,
    feature_dim: usize,
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        id: impl Into<String>,
        num_classes: usize,
        feature_dim: usize,
        samples: Vec<Sample<T>>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid(format!("num_classes must be >= 2, got {num_classes}")));
        }
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be >= 1"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::invalid(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.label >= num_classes {
                return Err(Error::invalid(format!(
                    "sample {i} has label {} >= num_classes {num_classes}",
                    s.label
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sample {i} has a non-finite feature")));
            }
        }
        Ok(Dataset {
            id: id.into(),
            num_classes,
            feature_dim,
            samples,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Content digest over shape, features and labels. The id is not hashed.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_classes as u64).to_le_bytes());
        h.update((self.feature_dim as u64).to_le_bytes());
        h.update((self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            for &f in &s.features {
                h.update(f.as_f64().to_le_bytes());
            }
            h.update((s.label as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Index set over a parent dataset. Indices are strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetView {
    parent_id: String,
    indices: Vec<usize>,
}

impl SubsetView {
    pub fn new(parent_id: impl Into<String>, indices: Vec<usize>) -> Result<Self> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidView(format!(
                "indices not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(SubsetView {
            parent_id: parent_id.into(),
            indices,
        })
    }

    /// View over every sample of `parent`.
    pub fn full<T: Scalar>(parent: &Dataset<T>) -> Self {
        SubsetView {
            parent_id: parent.id.clone(),
            indices: (0..parent.len()).collect(),
        }
    }

    pub fn parent_id(&self) -> &str {
        &self.parent_id
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate<T: Scalar>(&self, parent: &Dataset<T>) -> Result<()> {
        if self.parent_id != parent.id {
            return Err(Error::InvalidView(format!(
                "view belongs to dataset '{}', not '{}'",
                self.parent_id, parent.id
            )));
        }
        if let Some(&last) = self.indices.last() {
            if last >= parent.len() {
                return Err(Error::InvalidView(format!(
                    "index {last} out of range for {} samples",
                    parent.len()
                )));
            }
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &SubsetView) -> bool {
        if self.parent_id != other.parent_id {
            return false;
        }
        // Both sorted: linear merge.
        let mut it = other.indices.iter().peekable();
        self.indices.iter().all(|i| {
            while let Some(&&j) = it.peek() {
                if j < *i {
                    it.next();
                } else {
                    break;
                }
            }
            it.peek() == Some(&i)
        })
    }

    /// Digest of the index list.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for &i in &self.indices {
            h.update((i as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Newline-delimited index list.
    pub fn to_index_file(&self) -> String {
        let mut s = String::with_capacity(self.indices.len() * 6);
        for i in &self.indices {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_index_file(parent_id: impl Into<String>, text: &str) -> Result<Self> {
        let mut indices = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            indices.push(line.parse().map_err(|e| Error::Parse {
                source_name: "index file".into(),
                location: format!("line {}", n + 1),
                message: format!("{e}"),
            })?);
        }
        SubsetView::new(parent_id, indices)
    }
}

/// Copies the samples a view selects, in index order.
pub fn materialize<T: Scalar>(view: &SubsetView, parent: &Dataset<T>) -> Result<Dataset<T>> {
    view.validate(parent)?;
    let samples = view.indices.iter().map(|&i| parent.samples[i].clone()).collect();
    Ok(Dataset {
        id: format!("{}#{}", parent.id, &view.digest()[..12]),
        num_classes: parent.num_classes,
        feature_dim: parent.feature_dim,
        samples,
    })
}

/// Gaussian class clusters whose centers move closer as `overlap` grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of each cluster.
    pub spread: f64,
    /// In `[0, 1)`. Adjacent centers sit `6 * spread * (1 - overlap)` apart.
    pub overlap: f64,
    pub seed: u64,
}

impl BlobConfig {
    pub fn dataset_id(&self) -> String {
        format!(
            "blobs-c{}-n{}-d{}-s{}-o{}-seed{}",
            self.num_classes, self.per_class, self.dim, self.spread, self.overlap, self.seed
        )
    }
}

pub fn generate_blobs<T: Scalar>(cfg: &BlobConfig) -> Result<Dataset<T>> {
    if cfg.num_classes < 2 || cfg.per_class == 0 || cfg.dim == 0 {
        return Err(Error::invalid(
            "blobs need num_classes >= 2, per_class >= 1 and dim >= 1",
        ));
    }
    if !(cfg.spread > 0.0 && cfg.spread.is_finite()) {
        return Err(Error::invalid(format!("spread must be > 0, got {}", cfg.spread)));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::invalid(format!("overlap must be in [0, 1), got {}", cfg.overlap)));
    }

    let separation = 6.0 * cfg.spread * (1.0 - cfg.overlap);
    let centers: Vec<Vec<f64>> = (0..cfg.num_classes)
        .map(|c| {
            let mut center = vec![0.0; cfg.dim];
            if cfg.dim == 1 {
                center[0] = c as f64 * separation;
            } else {
                // Regular polygon in the first two coordinates with side `separation`.
                let n = cfg.num_classes as f64;
                let radius = separation / (2.0 * (std::f64::consts::PI / n).sin());
                let angle = 2.0 * std::f64::consts::PI * c as f64 / n;
                center[0] = radius * angle.cos();
                center[1] = radius * angle.sin();
            }
            center
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.spread).map_err(|e| Error::invalid(e.to_string()))?;
    let mut samples = Vec::with_capacity(cfg.num_classes * cfg.per_class);
    // Classes are interleaved so every prefix of the dataset is balanced.
    for _ in 0..cfg.per_class {
        for (label, center) in centers.iter().enumerate() {
            let features = center.iter().map(|&c| T::of(c + noise.sample(&mut rng))).collect();
            samples.push(Sample { features, label });
        }
    }
    Dataset::new(cfg.dataset_id(), cfg.num_classes, cfg.dim, samples)
}

/// How to interpret a CSV file's label column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Class count; inferred as `max label + 1` (at least 2) when absent.
    #[serde(default)]
    pub num_classes: Option<usize>,
}

/// Reads a CSV with a header naming the feature columns followed by a final
/// `label` column.
pub fn load_csv<T: Scalar>(path: &Path, schema: &CsvSchema) -> Result<Dataset<T>> {
    let name = path.display().to_string();
    let parse_err = |location: String, message: String| Error::Parse {
        source_name: name.clone(),
        location,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| parse_err("line 1".into(), e.to_string()))?
        .clone();
    if headers.len() < 2 || headers.get(headers.len() - 1) != Some("label") {
        return Err(parse_err(
            "line 1".into(),
            "header must list feature columns followed by 'label'".into(),
        ));
    }
    let dim = headers.len() - 1;

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let here = || format!("line {line}");
        if record.len() != dim + 1 {
            return Err(parse_err(
                here(),
                format!("expected {} fields, found {}", dim + 1, record.len()),
            ));
        }
        let mut features = Vec::with_capacity(dim);
        for (col, field) in record.iter().take(dim).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(here(), format!("column {col}: '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(here(), format!("column {col} is not finite")));
            }
            features.push(T::of(v));
        }
        let label_field = &record[dim];
        let label: usize = label_field
            .parse()
            .map_err(|_| parse_err(here(), format!("label '{label_field}' is not a class index")))?;
        if let Some(n) = schema.num_classes {
            if label >= n {
                return Err(parse_err(here(), format!("label {label} >= num_classes {n}")));
            }
        }
        samples.push(Sample { features, label });
    }

    let num_classes = schema
        .num_classes
        .unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(2).max(2));
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.clone());
    Dataset::new(id, num_classes, dim, samples)
}

/// Writes `data` in the format `load_csv` reads. Reals use the shortest
/// representation that parses back to the same value.
pub fn save_csv<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = (0..data.feature_dim)
        .map(|i| format!("f{i}"))
        .collect::<Vec<_>>()
        .join(",");
    line.push_str(",label\n");
    w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    for s in &data.samples {
        let mut line = String::new();
        for f in &s.features {
            line.push_str(&f.to_string());
            line.push(',');
        }
        line.push_str(&s.label.to_string());
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Reads an image/label pair in the big-endian IDX ubyte container.
/// Pixels are scaled to `[0, 1]`. The class count is `max label + 1`.
pub fn load_idx<T: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<T>> {
    let images = read_all(images_path)?;
    let labels = read_all(labels_path)?;
    let img_err = |location: String, message: String| Error::Parse {
        source_name: images_path.display().to_string(),
        location,
        message,
    };
    let lbl_err = |location: String, message: String| Error::Parse {
        source_name: labels_path.display().to_string(),
        location,
        message,
    };

    match be_u32(&images, 0) {
        Some(IDX_IMAGES_MAGIC) => {}
        Some(m) => return Err(img_err("header".into(), format!("bad magic 0x{m:08x}"))),
        None => return Err(img_err("header".into(), "file too short".into())),
    }
    let (count, rows, cols) = match (be_u32(&images, 4), be_u32(&images, 8), be_u32(&images, 12)) {
        (Some(n), Some(r), Some(c)) => (n as usize, r as usize, c as usize),
        _ => return Err(img_err("header".into(), "truncated dimensions".into())),
    };
    let dim = rows * cols;
    if dim == 0 {
        return Err(img_err("header".into(), "zero-sized images".into()));
    }
    let pixels = &images[16..];
    if pixels.len() != count * dim {
        return Err(img_err(
            format!("record {}", pixels.len() / dim),
            format!("expected {} pixel bytes, found {}", count * dim, pixels.len()),
        ));
    }

    match be_u32(&labels, 0) {
        Some(IDX_LABELS_MAGIC) => {}
        Some(m) => return Err(lbl_err("header".into(), format!("bad magic 0x{m:08x}"))),
        None => return Err(lbl_err("header".into(), "file too short".into())),
    }
    let label_count = be_u32(&labels, 4)
        .ok_or_else(|| lbl_err("header".into(), "truncated count".into()))? as usize;
    let label_bytes = &labels[8..];
    if label_count != count || label_bytes.len() != count {
        return Err(lbl_err(
            format!("record {}", label_bytes.len().min(label_count)),
            format!(
                "{} labels (header says {label_count}) for {count} images",
                label_bytes.len()
            ),
        ));
    }

    let scale = T::of(255.0);
    let samples: Vec<Sample<T>> = pixels
        .chunks_exact(dim)
        .zip(label_bytes)
        .map(|(px, &label)| Sample {
            features: px.iter().map(|&b| T::of(b as f64) / scale).collect(),
            label: label as usize,
        })
        .collect();
    let num_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(2).max(2);
    let id = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(id, num_classes, dim, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> Dataset<f64> {
        let samples = (0..3)
            .map(|i| Sample {
                features: vec![i as f64, -(i as f64)],
                label: i % 2,
            })
            .collect();
        Dataset::new("tiny", 2, 2, samples).unwrap()
    }

    fn blobs(seed: u64) -> BlobConfig {
        BlobConfig {
            num_classes: 3,
            per_class: 100,
            dim: 4,
            spread: 0.5,
            overlap: 0.3,
            seed,
        }
    }

    #[test]
    fn blobs_are_deterministic_and_sized() {
        let a: Dataset<f64> = generate_blobs(&blobs(7)).unwrap();
        let b: Dataset<f64> = generate_blobs(&blobs(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        assert_eq!(a.feature_dim(), 4);
        let c: Dataset<f64> = generate_blobs(&blobs(8)).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn blob_parameters_are_validated() {
        let mut cfg = blobs(1);
        cfg.num_classes = 1;
        assert!(generate_blobs::<f64>(&cfg).is_err());
        let mut cfg = blobs(1);
        cfg.spread = 0.0;
        assert!(generate_blobs::<f64>(&cfg).is_err());
        let mut cfg = blobs(1);
        cfg.overlap = 1.0;
        assert!(generate_blobs::<f64>(&cfg).is_err());
    }

    #[test]
    fn dataset_rejects_bad_samples() {
        let bad_label = vec![Sample { features: vec![0.0f64], label: 2 }];
        assert!(Dataset::new("x", 2, 1, bad_label).is_err());
        let bad_dim = vec![Sample { features: vec![0.0f64, 1.0], label: 0 }];
        assert!(Dataset::new("x", 2, 1, bad_dim).is_err());
    }

    #[test]
    fn materialize_examples() {
        let d = tiny();
        let all = materialize(&SubsetView::full(&d), &d).unwrap();
        assert_eq!(all.samples(), d.samples());

        let none = materialize(&SubsetView::new("tiny", vec![]).unwrap(), &d).unwrap();
        assert!(none.is_empty());

        let some = materialize(&SubsetView::new("tiny", vec![0, 2]).unwrap(), &d).unwrap();
        assert_eq!(some.samples(), &[d.samples()[0].clone(), d.samples()[2].clone()]);
    }

    #[test]
    fn stale_or_bad_views_are_rejected() {
        let d = tiny();
        let stale = SubsetView::new("other", vec![0]).unwrap();
        assert!(matches!(materialize(&stale, &d), Err(Error::InvalidView(_))));
        let out_of_range = SubsetView::new("tiny", vec![3]).unwrap();
        assert!(matches!(materialize(&out_of_range, &d), Err(Error::InvalidView(_))));
        assert!(SubsetView::new("tiny", vec![1, 1]).is_err());
        assert!(SubsetView::new("tiny", vec![2, 1]).is_err());
    }

    #[test]
    fn subset_inclusion() {
        let a = SubsetView::new("p", vec![1, 3, 5]).unwrap();
        let b = SubsetView::new("p", vec![0, 1, 2, 3, 4, 5]).unwrap();
        let c = SubsetView::new("p", vec![1, 4]).unwrap();
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(!a.is_subset_of(&c));
        assert!(SubsetView::new("p", vec![]).unwrap().is_subset_of(&c));
        assert!(!a.is_subset_of(&SubsetView::new("q", vec![1, 3, 5]).unwrap()));
    }

    #[test]
    fn index_file_roundtrip() {
        let v = SubsetView::new("p", vec![0, 4, 17]).unwrap();
        let text = v.to_index_file();
        assert_eq!(text, "0\n4\n17\n");
        assert_eq!(SubsetView::from_index_file("p", &text).unwrap(), v);
    }

    #[test]
    fn csv_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "f0,f1,label\n0.5,1.0,0\n-2,3e-1,1\n7,8,2\n").unwrap();
        let d: Dataset<f64> = load_csv(&path, &CsvSchema::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_dim(), 2);
        assert_eq!(d.num_classes(), 3);
        assert_eq!(d.samples()[1].features, vec![-2.0, 0.3]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "f0,label\n1,0\nx,1\n").unwrap();
        let err = load_csv::<f64>(&path, &CsvSchema::default()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        std::fs::write(&path, "f0,label\n1,0\n2,5\n").unwrap();
        let schema = CsvSchema { num_classes: Some(2) };
        let err = load_csv::<f64>(&path, &schema).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("label 5"), "{err}");

        std::fs::write(&path, "f0,f1,label\n1,2,0\n1,0\n").unwrap();
        assert!(load_csv::<f64>(&path, &CsvSchema::default()).is_err());

        std::fs::write(&path, "f0,f1,cls\n1,2,0\n").unwrap();
        assert!(load_csv::<f64>(&path, &CsvSchema::default()).is_err());
    }

    fn write_idx(dir: &Path, n_images: u32, n_labels: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let img = dir.join("img-idx3-ubyte");
        let lbl = dir.join("lbl-idx1-ubyte");
        let mut f = File::create(&img).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&n_images.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        for i in 0..n_images * 784 {
            f.write_all(&[(i % 256) as u8]).unwrap();
        }
        let mut f = File::create(&lbl).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&n_labels.to_be_bytes()).unwrap();
        for i in 0..n_labels {
            f.write_all(&[(i % 10) as u8]).unwrap();
        }
        (img, lbl)
    }

    #[test]
    fn idx_ten_images() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = write_idx(dir.path(), 10, 10);
        let d: Dataset<f32> = load_idx(&img, &lbl).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.feature_dim(), 784);
        assert_eq!(d.num_classes(), 10);
        assert!(d
            .samples()
            .iter()
            .flat_map(|s| &s.features)
            .all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(d.samples()[0].features[255], 1.0);
        assert_eq!(d.samples()[3].label, 3);
    }

    #[test]
    fn idx_label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = write_idx(dir.path(), 10, 9);
        assert!(matches!(load_idx::<f64>(&img, &lbl), Err(Error::Parse { .. })));
        // Swapped files carry the wrong magics.
        assert!(load_idx::<f64>(&lbl, &img).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn csv_roundtrip(seed in any::<u64>(), dim in 1usize..5, classes in 2usize..5) {
            let cfg = BlobConfig { num_classes: classes, per_class: 7, dim, spread: 1.3, overlap: 0.2, seed };
            let d: Dataset<f64> = generate_blobs(&cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            save_csv(&d, &path).unwrap();
            let back: Dataset<f64> = load_csv(&path, &CsvSchema { num_classes: Some(classes) }).unwrap();
            prop_assert_eq!(back.samples(), d.samples());
        }

        #[test]
        fn materialize_picks_indexed_samples(mask in prop::collection::vec(any::<bool>(), 12)) {
            let cfg = BlobConfig { num_classes: 2, per_class: 6, dim: 2, spread: 1.0, overlap: 0.0, seed: 3 };
            let d: Dataset<f64> = generate_blobs(&cfg).unwrap();
            let idx: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
            let view = SubsetView::new(d.id(), idx.clone()).unwrap();
            let m = materialize(&view, &d).unwrap();
            for (k, &i) in idx.iter().enumerate() {
                prop_assert_eq!(&m.samples()[k], &d.samples()[i]);
            }
        }
    }
}
