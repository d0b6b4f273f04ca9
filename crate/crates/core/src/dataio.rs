//! Feature datasets: the FMX interchange format, CSV ingest, splitting and
//! synthetic stand-in data.
//!
//! FMX layout (little-endian throughout):
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `FMX1` |
//! | 4 | 1 | version, `0x01` |
//! | 5 | 4 | `u32` row count |
//! | 9 | 4 | `u32` column count |
//! | 13 | 1 | `u8` has_labels (0/1) |
//! | 14 | 4·rows·cols | IEEE-754 binary32 values, row-major |
//! | .. | rows | `u8` labels, present iff has_labels = 1 |
//! | .. | 2 | `u16` tag length |
//! | .. | tag length | UTF-8 source tag |

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::{seed, Error, Matrix, Result, DEFECT, OK};

pub const FMX_MAGIC: &[u8; 4] = b"FMX1";
pub const FMX_VERSION: u8 = 1;
const FMX_HEADER_LEN: usize = 14;

/// A labeled feature matrix: one row per sample, one column per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    features: Matrix<f32>,
    labels: Vec<u8>,
    source_tag: String,
}

impl FeatureDataset {
    /// Validates and wraps a feature matrix with its labels.
    pub fn new(features: Matrix<f32>, labels: Vec<u8>, source_tag: impl Into<String>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::validation(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if features.cols() == 0 {
            return Err(Error::validation("feature dimension must be at least 1"));
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(Error::validation(format!(
                "label {} at row {pos} is not 0 or 1",
                labels[pos]
            )));
        }
        if !features.all_finite() {
            return Err(Error::validation("feature matrix contains NaN or infinite values"));
        }
        Ok(FeatureDataset {
            features,
            labels,
            source_tag: source_tag.into(),
        })
    }

    pub fn features(&self) -> &Matrix<f32> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(non-defect count, defect count)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let defects = self.labels.iter().filter(|&&l| l == DEFECT).count();
        (self.labels.len() - defects, defects)
    }

    pub fn has_both_classes(&self) -> bool {
        let (ok, defect) = self.class_counts();
        ok > 0 && defect > 0
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        FeatureDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source_tag: self.source_tag.clone(),
        }
    }

    /// Returns a copy with a different feature matrix (same labels and tag).
    pub fn with_features(&self, features: Matrix<f32>) -> Result<FeatureDataset> {
        FeatureDataset::new(features, self.labels.clone(), self.source_tag.clone())
    }
}

/// Header fields of an FMX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FmxHeader {
    pub version: u8,
    pub rows: u32,
    pub cols: u32,
    pub has_labels: bool,
}

/// Contents of an FMX file whose labels may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct FmxContents {
    pub header: FmxHeader,
    pub features: Matrix<f32>,
    pub labels: Option<Vec<u8>>,
    pub source_tag: String,
}

/// Serializes a dataset to FMX bytes.
pub fn encode_fmx(dataset: &FeatureDataset) -> Result<Vec<u8>> {
    let m = &dataset.features;
    if !m.all_finite() {
        return Err(Error::validation("feature matrix contains NaN or infinite values"));
    }
    let rows = u32::try_from(m.rows()).map_err(|_| Error::validation("too many rows for FMX"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::validation("too many columns for FMX"))?;
    let tag = dataset.source_tag.as_bytes();
    let tag_len =
        u16::try_from(tag.len()).map_err(|_| Error::validation("source tag longer than 65535 bytes"))?;

    let mut out = Vec::with_capacity(FMX_HEADER_LEN + 4 * m.as_slice().len() + m.rows() + 2 + tag.len());
    out.extend_from_slice(FMX_MAGIC);
    out.push(FMX_VERSION);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.push(1);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&dataset.labels);
    out.extend_from_slice(&tag_len.to_le_bytes());
    out.extend_from_slice(tag);
    Ok(out)
}

/// Writes a dataset as an FMX file. Nothing is written if validation fails.
pub fn write_fmx(dataset: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_fmx(dataset)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))
}

/// Parses FMX bytes. `path` is used only for error messages.
pub fn decode_fmx(bytes: &[u8], path: &Path) -> Result<FmxContents> {
    if bytes.len() < 4 || &bytes[..4] != FMX_MAGIC {
        return Err(Error::NotFmx { path: path.into() });
    }
    let corrupt = |detail: String| Error::CorruptFmx {
        path: path.into(),
        detail,
    };
    if bytes.len() < FMX_HEADER_LEN {
        return Err(corrupt(format!("header needs {FMX_HEADER_LEN} bytes, file has {}", bytes.len())));
    }
    let version = bytes[4];
    if version != FMX_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
    let has_labels = match bytes[13] {
        0 => false,
        1 => true,
        other => return Err(corrupt(format!("has_labels byte is {other}"))),
    };
    let n_values = (rows as usize)
        .checked_mul(cols as usize)
        .ok_or_else(|| corrupt("row × column count overflows".into()))?;
    let payload_end = n_values
        .checked_mul(4)
        .and_then(|b| b.checked_add(FMX_HEADER_LEN))
        .ok_or_else(|| corrupt("payload size overflows".into()))?;
    let labels_end = payload_end + if has_labels { rows as usize } else { 0 };
    let tag_len_end = labels_end + 2;
    if bytes.len() < tag_len_end {
        return Err(corrupt(format!(
            "header declares {rows}x{cols} but file has only {} bytes",
            bytes.len()
        )));
    }
    let tag_len = u16::from_le_bytes(bytes[labels_end..tag_len_end].try_into().unwrap()) as usize;
    if bytes.len() != tag_len_end + tag_len {
        return Err(corrupt(format!(
            "expected {} bytes, found {}",
            tag_len_end + tag_len,
            bytes.len()
        )));
    }
    let data: Vec<f32> = bytes[FMX_HEADER_LEN..payload_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let features = Matrix::from_vec(rows as usize, cols as usize, data)?;
    let labels = has_labels.then(|| bytes[payload_end..labels_end].to_vec());
    let source_tag = std::str::from_utf8(&bytes[tag_len_end..])
        .map_err(|_| corrupt("source tag is not UTF-8".into()))?
        .to_string();
    Ok(FmxContents {
        header: FmxHeader {
            version,
            rows,
            cols,
            has_labels,
        },
        features,
        labels,
        source_tag,
    })
}

/// Reads an FMX file without requiring labels.
pub fn read_fmx_contents(path: impl AsRef<Path>) -> Result<FmxContents> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fmx(&bytes, path)
}

/// Reads a labeled FMX file into a validated dataset.
pub fn read_fmx(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let contents = read_fmx_contents(path)?;
    let labels = contents
        .labels
        .ok_or_else(|| Error::validation(format!("{}: FMX file carries no labels", path.display())))?;
    FeatureDataset::new(contents.features, labels, contents.source_tag)
}

/// Reads a headed CSV; `label_column` holds 0/1 labels and every other
/// column becomes a feature, in file order. Row numbers in errors count
/// data rows from 1.
pub fn read_csv(path: impl AsRef<Path>, label_column: &str) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let csv_err = |detail: String| Error::Csv {
        path: path.into(),
        detail,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| csv_err(format!("missing label column \"{label_column}\"")))?;
    let n_features = headers.len() - 1;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_err(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(csv_err(format!(
                "row {row}: {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if j == label_idx {
                let label = match cell {
                    "0" => OK,
                    "1" => DEFECT,
                    _ => {
                        return Err(csv_err(format!(
                            "row {row}: label \"{cell}\" in column \"{label_column}\" is not 0 or 1"
                        )))
                    }
                };
                labels.push(label);
            } else {
                let v: f32 = cell.parse().map_err(|_| {
                    csv_err(format!(
                        "row {row}, column \"{}\": cannot parse \"{cell}\" as a number",
                        &headers[j]
                    ))
                })?;
                data.push(v);
            }
        }
    }
    let features = Matrix::from_vec(labels.len(), n_features, data)?;
    let tag = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    FeatureDataset::new(features, labels, tag)
}

/// How to divide a dataset into train and test parts.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::validation(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn rounded_share(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 + 0.5).floor() as usize).min(n)
}

/// Train/test row indices (each sorted ascending) for a split.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if spec.stratified {
        for class in [OK, DEFECT] {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if idx.is_empty() {
                continue;
            }
            if idx.len() < 2 {
                return Err(Error::validation(format!(
                    "class {class} has {} sample(s); stratified splitting needs at least 2",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            let k = rounded_share(spec.train_fraction, idx.len());
            train.extend_from_slice(&idx[..k]);
            test.extend_from_slice(&idx[k..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        let k = rounded_share(spec.train_fraction, idx.len());
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits into `(train, test)`. Per-class train counts are
/// `floor(train_fraction · n_class + 0.5)` when stratified.
pub fn split_dataset(dataset: &FeatureDataset, spec: &SplitSpec) -> Result<(FeatureDataset, FeatureDataset)> {
    let (train, test) = split_indices(&dataset.labels, spec)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Parameters of the synthetic two-cluster generator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_per_class: usize,
    pub dim: usize,
    /// Distance between the two class means.
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_class: 200,
            dim: 20,
            class_separation: 8.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::validation(format!("synthetic dim must be at least 2, got {}", self.dim)));
        }
        if self.n_per_class < 1 {
            return Err(Error::validation("n_per_class must be at least 1"));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::validation("class_separation must be a nonnegative finite number"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::validation("noise_sigma must be positive"));
        }
        Ok(())
    }
}

/// Generates two isotropic Gaussian clusters whose means sit at
/// `±separation/2` along a seeded random unit direction. Rows
/// `0..n_per_class` are non-defect, the rest defect.
///
/// Each row draws from its own ChaCha stream, so the output does not depend
/// on generation order.
pub fn gen_synth(spec: &SynthSpec) -> Result<FeatureDataset> {
    spec.validate()?;
    let mut dir_rng = seed::rng(spec.seed);
    let mut direction: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut dir_rng)).collect();
    let nrm = crate::linalg::norm(&direction);
    direction.iter_mut().for_each(|v| *v /= nrm);

    let n = 2 * spec.n_per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let label = if row < spec.n_per_class { OK } else { DEFECT };
        let sign = if label == DEFECT { 0.5 } else { -0.5 };
        let mut rng = seed::rng(spec.seed);
        rng.set_stream(row as u64 + 1);
        for &d in &direction {
            let noise: f64 = StandardNormal.sample(&mut rng);
            data.push((sign * spec.class_separation * d + spec.noise_sigma * noise) as f32);
        }
        labels.push(label);
    }
    FeatureDataset::new(Matrix::from_vec(n, spec.dim, data)?, labels, "synth")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FeatureDataset {
        let m = Matrix::from_rows(&[[1.0f32, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        FeatureDataset::new(m, vec![1, 0], "").unwrap()
    }

    #[test]
    fn fmx_byte_layout_of_small_matrix() {
        // header 14 + payload 2*3*4 + labels 2 + tag length 2 + empty tag
        let bytes = encode_fmx(&small()).unwrap();
        assert_eq!(bytes.len(), 14 + 24 + 2 + 2);
        assert_eq!(&bytes[..5], b"FMX1\x01");
        assert_eq!(&bytes[5..9], &2u32.to_le_bytes());
        assert_eq!(&bytes[9..13], &3u32.to_le_bytes());
        assert_eq!(bytes[13], 1);
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[38..40], &[1, 0]);
        assert_eq!(&bytes[40..], &[0, 0]);
    }

    #[test]
    fn fmx_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.fmx");
        let ds = small();
        write_fmx(&ds, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 42);
        assert_eq!(read_fmx(&path).unwrap(), ds);

        let tagged = FeatureDataset::new(ds.features().clone(), vec![0, 1], "VGG16 ünïcode").unwrap();
        write_fmx(&tagged, &path).unwrap();
        assert_eq!(read_fmx(&path).unwrap(), tagged);
    }

    #[test]
    fn nan_is_rejected_and_nothing_written() {
        let m = Matrix::from_vec(1, 2, vec![1.0f32, f32::NAN]).unwrap();
        assert!(matches!(FeatureDataset::new(m.clone(), vec![1], ""), Err(Error::Validation(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.fmx");
        // bypass the constructor to exercise the writer's own check
        let ds = FeatureDataset {
            features: m,
            labels: vec![1],
            source_tag: String::new(),
        };
        assert!(matches!(write_fmx(&ds, &path), Err(Error::Validation(_))));
        assert!(!path.exists());
    }

    #[test]
    fn bad_magic_is_not_fmx() {
        let mut bytes = encode_fmx(&small()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        let err = decode_fmx(&bytes, Path::new("x.fmx")).unwrap_err();
        assert!(err.to_string().contains("not an FMX file"), "{err}");
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let ds = FeatureDataset::new(Matrix::zeros(10, 4), vec![0; 10], "t").unwrap();
        let mut bytes = encode_fmx(&ds).unwrap();
        bytes[5..9].copy_from_slice(&1000u32.to_le_bytes());
        let err = decode_fmx(&bytes, Path::new("t.fmx")).unwrap_err();
        assert!(err.to_string().contains("truncated/corrupt"), "{err}");

        let short = encode_fmx(&ds).unwrap();
        let err = decode_fmx(&short[..short.len() - 5], Path::new("t.fmx")).unwrap_err();
        assert!(matches!(err, Error::CorruptFmx { .. }));
    }

    #[test]
    fn label_outside_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.fmx");
        let mut bytes = encode_fmx(&small()).unwrap();
        bytes[38] = 2;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_fmx(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_fmx("/definitely/not/here.fmx").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.fmx"));
    }

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_ingest() {
        let f = write_csv("f1,f2,y\n1,2,1\n3,4,0\n5,6,1");
        let ds = read_csv(f.path(), "y").unwrap();
        assert_eq!(ds.features().rows(), 3);
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.features().row(1), &[3.0, 4.0]);

        // label column need not be last
        let f = write_csv("y,a,b\n0,1.5,2\n1,3,4.25\n");
        let ds = read_csv(f.path(), "y").unwrap();
        assert_eq!(ds.features().row(1), &[3.0, 4.25]);
    }

    #[test]
    fn csv_errors() {
        let f = write_csv("f1,f2,z\n1,2,1\n");
        let err = read_csv(f.path(), "y").unwrap_err().to_string();
        assert!(err.contains("\"y\""), "{err}");

        let f = write_csv("f1,f2,y\n1,2,1\nabc,4,0\n");
        let err = read_csv(f.path(), "y").unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("abc"), "{err}");
    }

    #[test]
    fn thirteen_hundred_sample_stratified_split() {
        let labels: Vec<u8> = (0..1300).map(|i| u8::from(i < 781)).collect();
        let m = Matrix::zeros(1300, 1);
        let ds = FeatureDataset::new(m, labels, "").unwrap();
        let (train, test) = split_dataset(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(train.class_counts(), (389, 586));
        assert_eq!(train.len(), 975);
        assert_eq!(test.len(), 325);
    }

    #[test]
    fn half_split_of_four_balanced() {
        let (train, test) = split_indices(
            &[0, 1, 0, 1],
            &SplitSpec {
                train_fraction: 0.5,
                seed: 3,
                stratified: true,
            },
        )
        .unwrap();
        let labels = [0u8, 1, 0, 1];
        for part in [&train, &test] {
            assert_eq!(part.len(), 2);
            assert_eq!(part.iter().map(|&i| labels[i] as usize).sum::<usize>(), 1);
        }
    }

    #[test]
    fn split_determinism_and_partition() {
        let labels: Vec<u8> = (0..57).map(|i| u8::from(i % 3 == 0)).collect();
        let spec = SplitSpec {
            seed: 99,
            ..SplitSpec::default()
        };
        let a = split_indices(&labels, &spec).unwrap();
        let b = split_indices(&labels, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_split_needs_two_per_class() {
        assert!(split_indices(&[0, 0, 0, 1], &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(split_indices(&[0, 0, 1, 1], &bad).is_err());
    }

    #[test]
    fn synth_is_deterministic_and_balanced() {
        let spec = SynthSpec {
            n_per_class: 50,
            dim: 10,
            ..SynthSpec::default()
        };
        let a = gen_synth(&spec).unwrap();
        let b = gen_synth(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), (50, 50));
        let c = gen_synth(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn synth_validation() {
        for bad in [
            SynthSpec { dim: 0, ..SynthSpec::default() },
            SynthSpec { dim: 1, ..SynthSpec::default() },
            SynthSpec { n_per_class: 0, ..SynthSpec::default() },
            SynthSpec { noise_sigma: 0.0, ..SynthSpec::default() },
        ] {
            assert!(gen_synth(&bad).is_err());
        }
    }

    #[test]
    fn synth_class_means_are_separated() {
        let spec = SynthSpec {
            n_per_class: 400,
            dim: 5,
            class_separation: 6.0,
            noise_sigma: 1.0,
            seed: 11,
        };
        let ds = gen_synth(&spec).unwrap();
        let mean = |cls: u8| -> Vec<f64> {
            let rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == cls).collect();
            (0..spec.dim)
                .map(|j| rows.iter().map(|&i| f64::from(ds.features().get(i, j))).sum::<f64>() / rows.len() as f64)
                .collect()
        };
        let gap = crate::linalg::squared_distance(&mean(0), &mean(1)).sqrt();
        assert!((gap - 6.0).abs() < 0.35, "gap {gap}");
    }
}
