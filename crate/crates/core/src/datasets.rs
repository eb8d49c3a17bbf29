//! Datasets: the double-spiral benchmark, the UCI echocardiogram file, the
//! CSV interchange format and per-feature min-max rescaling to `[-1, 1]`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{OrcaError, Result};

/// Per-feature `(min, max)` pairs of an affine map onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RescaleMap(pub Vec<(f64, f64)>);

impl RescaleMap {
    /// A map that leaves `[-1, 1]` in place (up to rounding).
    pub fn identity(d: usize) -> Self {
        Self(vec![(-1.0, 1.0); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dim() {
            return Err(OrcaError::DimensionMismatch {
                expected: self.dim(),
                actual: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .zip(&self.0)
            .map(|(&x, &(lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect())
    }

    pub fn invert(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        if scaled.len() != self.dim() {
            return Err(OrcaError::DimensionMismatch {
                expected: self.dim(),
                actual: scaled.len(),
            });
        }
        Ok(scaled
            .iter()
            .zip(&self.0)
            .map(|(&u, &(lo, hi))| lo + (u + 1.0) * (hi - lo) / 2.0)
            .collect())
    }
}

/// Min-max rescaling of every column of `raw` onto `[-1, 1]`.
///
/// A constant column is sent to 0 and recorded as `(c - 1, c + 1)`, which is
/// the affine map that does exactly that.
pub fn rescale(raw: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, RescaleMap)> {
    let first = raw
        .first()
        .ok_or_else(|| OrcaError::InvalidConfig("cannot rescale an empty matrix".into()))?;
    let d = first.len();
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for row in raw {
        if row.len() != d {
            return Err(OrcaError::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        for (b, &x) in bounds.iter_mut().zip(row) {
            if !x.is_finite() {
                return Err(OrcaError::InvalidConfig(format!(
                    "non-finite feature value {x}"
                )));
            }
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
        }
    }
    for (j, b) in bounds.iter_mut().enumerate() {
        if b.1 <= b.0 {
            log::warn!("feature {} is constant ({}); mapping it to 0", j + 1, b.0);
            *b = (b.0 - 1.0, b.0 + 1.0);
        }
    }
    let map = RescaleMap(bounds);
    let scaled = raw
        .iter()
        .map(|row| map.apply(row))
        .collect::<Result<_>>()?;
    Ok((scaled, map))
}

/// Labelled samples with both the raw features and their image in
/// `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    raw: Vec<Vec<f64>>,
    rescaled: Vec<Vec<f64>>,
    labels: Vec<f64>,
    rescale_map: RescaleMap,
}

impl Dataset {
    /// Builds a dataset, fitting the rescaling map on all rows.
    pub fn new(name: impl Into<String>, raw: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        Self::check_labels(&raw, &labels)?;
        let (rescaled, rescale_map) = rescale(&raw)?;
        Ok(Self {
            name: name.into(),
            raw,
            rescaled,
            labels,
            rescale_map,
        })
    }

    /// Builds a dataset whose points already live in `[-1, 1]^d`; the
    /// rescaling map is the identity.
    pub fn prescaled(
        name: impl Into<String>,
        points: Vec<Vec<f64>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        Self::check_labels(&points, &labels)?;
        let d = points[0].len();
        for row in &points {
            if row.len() != d {
                return Err(OrcaError::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            for &x in row {
                crate::orthopoly::OrthonormalBasis::check_domain(x)?;
            }
        }
        Ok(Self {
            name: name.into(),
            raw: points.clone(),
            rescaled: points,
            labels,
            rescale_map: RescaleMap::identity(d),
        })
    }

    fn check_labels(raw: &[Vec<f64>], labels: &[f64]) -> Result<()> {
        if raw.is_empty() {
            return Err(OrcaError::InvalidConfig("dataset has no samples".into()));
        }
        if raw.len() != labels.len() {
            return Err(OrcaError::DimensionMismatch {
                expected: raw.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(OrcaError::InvalidLabel(bad));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.raw[0].len()
    }

    pub fn raw(&self) -> &[Vec<f64>] {
        &self.raw
    }

    pub fn rescaled(&self) -> &[Vec<f64>] {
        &self.rescaled
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn rescale_map(&self) -> &RescaleMap {
        &self.rescale_map
    }

    /// Writes the interchange CSV (`x1,...,xd,label`, raw features).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, &y) in self.raw.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            rec.push(if y > 0.0 { "1".into() } else { "-1".into() });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the interchange CSV and rescales it.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = open(path)?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let header = rdr.headers()?.clone();
        let width = header.len();
        if width < 2 || header.get(width - 1) != Some("label") {
            return Err(OrcaError::MalformedRow {
                row: 1,
                reason: "header must be x1,...,xd,label".into(),
            });
        }
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let row = idx + 2;
            let rec = rec.map_err(|e| OrcaError::MalformedRow {
                row,
                reason: e.to_string(),
            })?;
            if rec.len() != width {
                return Err(OrcaError::MalformedRow {
                    row,
                    reason: format!("expected {width} fields, found {}", rec.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| OrcaError::MalformedRow {
                    row,
                    reason: format!("not a number: {s:?}"),
                })
            };
            let values: Vec<f64> = rec.iter().map(parse).collect::<Result<_>>()?;
            let (label, feats) = values.split_last().expect("width >= 2");
            if *label != 1.0 && *label != -1.0 {
                return Err(OrcaError::MalformedRow {
                    row,
                    reason: format!("label {label} not in {{-1, 1}}"),
                });
            }
            raw.push(feats.to_vec());
            labels.push(*label);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(name, raw, labels)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => OrcaError::FileNotFound(path.to_path_buf()),
        _ => OrcaError::Io(e),
    })
}

/// Shape of the double spiral. The defaults (inner radius 0.15, noise 0.02)
/// give an arm spacing at which the Legendre separator is nearly odd and its
/// spectral peak settles by `n = 8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralConfig {
    pub points_per_class: usize,
    /// Number of full turns each arm makes.
    pub turns: f64,
    pub noise_sd: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub seed: u64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        Self {
            points_per_class: 150,
            turns: 1.5,
            noise_sd: 0.02,
            inner_radius: 0.15,
            outer_radius: 1.0,
            seed: 42,
        }
    }
}

impl SpiralConfig {
    fn validate(&self) -> Result<()> {
        if self.points_per_class == 0 {
            return Err(OrcaError::InvalidConfig(
                "points_per_class must be at least 1".into(),
            ));
        }
        if !(self.inner_radius > 0.0 && self.outer_radius > self.inner_radius) {
            return Err(OrcaError::InvalidConfig(
                "radii must satisfy outer > inner > 0".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() || !self.turns.is_finite() {
            return Err(OrcaError::InvalidConfig(
                "noise_sd must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free point `t` of the `+1` arm.
    fn curve(&self, t: usize) -> (f64, f64) {
        let frac = if self.points_per_class > 1 {
            t as f64 / (self.points_per_class - 1) as f64
        } else {
            0.0
        };
        let theta = self.turns * 2.0 * PI * frac;
        let r = self.inner_radius + (self.outer_radius - self.inner_radius) * frac;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Two interleaved spiral arms. The `+1` arm comes first, then the `-1` arm,
/// which is the `+1` curve rotated by pi. Each coordinate gets independent
/// Gaussian noise.
pub fn generate_spiral(config: &SpiralConfig) -> Result<Dataset> {
    config.validate()?;
    let p = config.points_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise =
        Normal::new(0.0, config.noise_sd).map_err(|e| OrcaError::InvalidConfig(e.to_string()))?;
    let mut jitter = || {
        if config.noise_sd > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        }
    };
    let mut raw = Vec::with_capacity(2 * p);
    let mut labels = Vec::with_capacity(2 * p);
    for sign in [1.0, -1.0] {
        for t in 0..p {
            let (x, y) = config.curve(t);
            raw.push(vec![sign * x + jitter(), sign * y + jitter()]);
            labels.push(sign);
        }
    }
    Dataset::new("spiral", raw, labels)
}

/// Row count the echocardiogram experiment is expected to retain.
pub const ECHO_EXPECTED_ROWS: usize = 61;

const ECHO_COLUMNS: usize = 13;
const ECHO_LABEL: usize = 1;
/// age-at-heart-attack, fractional-shortening, epss, lvdd, wall-motion-index
const ECHO_FEATURES: [usize; 5] = [2, 4, 5, 6, 8];

/// Outcome of reading the raw UCI echocardiogram file.
#[derive(Debug, Clone)]
pub struct EchoLoad {
    pub dataset: Dataset,
    /// Data lines read (blank lines excluded).
    pub total_rows: usize,
    /// Rows dropped because one of the six used columns was missing.
    pub dropped_missing: usize,
    /// 1-based line numbers skipped for a wrong field count (lenient mode only).
    pub skipped_malformed: Vec<usize>,
}

/// Loads the UCI echocardiogram file, failing on any row whose field count
/// is not 13.
pub fn load_echocardiogram(path: &Path) -> Result<Dataset> {
    Ok(read_echocardiogram(path, false)?.dataset)
}

/// Loads the UCI echocardiogram file.
///
/// Trailing empty fields are ignored when counting columns. With `lenient`,
/// rows that still have the wrong field count are skipped and reported
/// instead of aborting the load.
pub fn read_echocardiogram(path: &Path, lenient: bool) -> Result<EchoLoad> {
    let reader = BufReader::new(open(path)?);
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    let mut total_rows = 0;
    let mut dropped_missing = 0;
    let mut skipped_malformed = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total_rows += 1;
        let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
        while fields.len() > ECHO_COLUMNS && fields.last() == Some(&"") {
            fields.pop();
        }
        if fields.len() != ECHO_COLUMNS {
            if lenient {
                log::warn!("skipping row {row}: {} fields", fields.len());
                skipped_malformed.push(row);
                continue;
            }
            return Err(OrcaError::MalformedRow {
                row,
                reason: format!("expected {ECHO_COLUMNS} fields, found {}", fields.len()),
            });
        }
        let parse = |col: usize| -> Result<Option<f64>> {
            let s = fields[col];
            if s.is_empty() || s == "?" {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| OrcaError::MalformedRow {
                    row,
                    reason: format!("column {}: not a number: {s:?}", col + 1),
                })
        };
        let label = parse(ECHO_LABEL)?;
        let feats: Vec<Option<f64>> = ECHO_FEATURES
            .iter()
            .map(|&c| parse(c))
            .collect::<Result<_>>()?;
        let (Some(label), Some(feats)) = (label, feats.into_iter().collect::<Option<Vec<f64>>>())
        else {
            dropped_missing += 1;
            continue;
        };
        let y = match label {
            1.0 => 1.0,
            0.0 => -1.0,
            other => {
                return Err(OrcaError::MalformedRow {
                    row,
                    reason: format!("still-alive must be 0 or 1, found {other}"),
                })
            }
        };
        raw.push(feats);
        labels.push(y);
    }
    if raw.len() != ECHO_EXPECTED_ROWS {
        log::warn!(
            "echocardiogram: {} complete rows retained, expected {}",
            raw.len(),
            ECHO_EXPECTED_ROWS
        );
    }
    let dataset = Dataset::new("echocardiogram", raw, labels)?;
    Ok(EchoLoad {
        dataset,
        total_rows,
        dropped_missing,
        skipped_malformed,
    })
}
