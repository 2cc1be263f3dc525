//! Batch generation of ground-truth training datasets and their disk format.
//!
//! A dataset directory holds `manifest.json`, one `sample_%06d.csv` per
//! generated PDF (`x0,...,x{d-1},p_true` in unit-range coordinates, 17
//! significant digits) and one `pdf_%06d.json` with the serialized expression
//! tree, domain and normalization constant.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::child_rng;
use crate::synthpdf::base::{Tag, TagFilter};
use crate::synthpdf::expr::{compose_1d, compose_highdim, CompositionRules, CompositionScheme};
use crate::synthpdf::normalize::{normalize, Interval, SyntheticPdf};
use crate::synthpdf::sample::{rejection_sample, AxisScale, SampleSet};

/// Dimensionality at which the high-dimensional constraints activate.
pub const HIGH_DIM_THRESHOLD: usize = 50;

/// Minimum base-function maximum enforced in the high-dimensional regime.
pub const HIGH_DIM_MIN_BASE_MAX: f64 = 0.01;

/// Domain extents are drawn per axis from this range before unit scaling.
pub const EXTENT_RANGE: (f64, f64) = (1.0, 10.0);

/// Attempts per PDF before a generation error is considered fatal.
const MAX_GENERATION_ATTEMPTS: u64 = 64;

/// Configuration of one dataset generation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub dim: usize,
    /// Number of independent PDFs to generate.
    pub n_functions: usize,
    /// Points drawn from each PDF.
    pub points_per_sample: usize,
    /// High-dimensional composition scheme (ignored for `dim == 1`).
    pub composition_scheme: CompositionScheme,
    #[serde(default)]
    pub include_tags: Vec<Tag>,
    #[serde(default)]
    pub exclude_tags: Vec<Tag>,
    pub seed: u64,
    /// Minimum base-function maximum; raised to 0.01 for `dim >= 50`.
    #[serde(default)]
    pub min_base_max: f64,
}

impl GenerationConfig {
    pub fn new(dim: usize, n_functions: usize, points_per_sample: usize, seed: u64) -> Self {
        GenerationConfig {
            dim,
            n_functions,
            points_per_sample,
            composition_scheme: CompositionScheme::PerAxisThenCombine,
            include_tags: Vec::new(),
            exclude_tags: Vec::new(),
            seed,
            min_base_max: 0.0,
        }
    }

    pub fn filter(&self) -> TagFilter {
        TagFilter {
            include: self.include_tags.clone(),
            exclude: self.exclude_tags.clone(),
        }
    }

    /// Composition rules after applying the high-dimensional constraints.
    pub fn rules(&self) -> CompositionRules {
        let high = self.dim >= HIGH_DIM_THRESHOLD;
        CompositionRules {
            add_only: high,
            min_base_max: if high {
                self.min_base_max.max(HIGH_DIM_MIN_BASE_MAX)
            } else {
                self.min_base_max
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_functions == 0 || self.points_per_sample == 0 {
            return Err(Error::Format(
                "dim, n_functions and points_per_sample must be positive".into(),
            ));
        }
        if !self.filter().is_consistent() {
            return Err(Error::Format(
                "include and exclude tag sets must be disjoint".into(),
            ));
        }
        Ok(())
    }
}

/// Number of validation PDFs for a dataset of `n_functions`: a held-out
/// quarter, taken from the tail of the index range.
pub fn validation_count(n_functions: usize) -> usize {
    n_functions / 4
}

/// One generated PDF with its sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSample {
    pub pdf: SyntheticPdf,
    pub sample: SampleSet,
    /// Regeneration attempts that were discarded (degenerate or near-spike).
    pub retries: u32,
}

/// An in-memory dataset of ground-truth samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: GenerationConfig,
    pub samples: Vec<GeneratedSample>,
}

impl Dataset {
    pub fn train_indices(&self) -> Vec<usize> {
        let start = self.samples.len() - validation_count(self.samples.len());
        (0..start).collect()
    }

    pub fn validation_indices(&self) -> Vec<usize> {
        let start = self.samples.len() - validation_count(self.samples.len());
        (start..self.samples.len()).collect()
    }
}

fn generate_one(config: &GenerationConfig, index: usize) -> Result<GeneratedSample> {
    let filter = config.filter();
    let rules = config.rules();
    let mut last_err = None;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = child_rng(config.seed, index as u64, attempt);
        let extents: Vec<f64> = (0..config.dim)
            .map(|_| EXTENT_RANGE.0 + rng.gen::<f64>() * (EXTENT_RANGE.1 - EXTENT_RANGE.0))
            .collect();
        let n_c = rng.gen_range(2..=7usize);
        let expr = if config.dim == 1 {
            compose_1d(&mut rng, n_c, extents[0], &filter, &rules)?
        } else {
            compose_highdim(
                &mut rng,
                n_c,
                config.composition_scheme,
                &extents,
                &filter,
                &rules,
            )?
        };
        let domain: Vec<Interval> = extents.iter().map(|&s| Interval { a: 0.0, b: s }).collect();
        let pdf = match normalize(expr, domain, &mut rng) {
            Ok(pdf) => pdf,
            Err(Error::DegeneratePdf { .. }) => {
                last_err = Some(Error::DegeneratePdf { z: 0.0 });
                continue;
            }
            Err(e) => return Err(e),
        };
        match rejection_sample(&pdf, config.points_per_sample, &mut rng) {
            Ok(sample) => {
                return Ok(GeneratedSample {
                    pdf,
                    sample,
                    retries: attempt as u32,
                })
            }
            Err(Error::LowAcceptance { rate, proposals }) => {
                last_err = Some(Error::LowAcceptance { rate, proposals });
                continue;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::RetryExhausted {
        attempts: MAX_GENERATION_ATTEMPTS as usize,
    }))
}

/// Generate all PDFs of the configuration.
///
/// Each PDF owns an RNG derived from `(seed, index, attempt)`, so the result
/// is independent of scheduling; degenerate or near-degenerate draws are
/// regenerated under the next attempt stream.
pub fn generate_dataset(config: &GenerationConfig) -> Result<Dataset> {
    config.validate()?;
    let samples: Vec<GeneratedSample> = (0..config.n_functions)
        .into_par_iter()
        .map(|i| generate_one(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: config.clone(),
        samples,
    })
}

/// `manifest.json` contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub config: GenerationConfig,
    pub n_samples: usize,
    pub dim: usize,
    pub points_per_sample: usize,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub retries: Vec<u32>,
}

pub const DATASET_FORMAT: &str = "dde-dataset-v1";

fn sample_file(index: usize) -> String {
    format!("sample_{index:06}.csv")
}

fn pdf_file(index: usize) -> String {
    format!("pdf_{index:06}.json")
}

/// Serialize one point set as CSV with 17-significant-digit decimal text.
pub fn write_sample_csv<W: Write>(out: &mut W, sample: &SampleSet) -> Result<()> {
    let dim = sample.dim();
    let header: Vec<String> = (0..dim).map(|d| format!("x{d}")).collect();
    writeln!(out, "{},p_true", header.join(","))?;
    let truth = sample
        .density_truth
        .as_ref()
        .ok_or_else(|| Error::Format("sample is missing ground-truth densities".into()))?;
    for (row, &t) in sample.iter_points().zip(truth) {
        for x in row {
            write!(out, "{x:.16e},")?;
        }
        writeln!(out, "{t:.16e}")?;
    }
    Ok(())
}

/// Parse a sample CSV. `p_true` is optional so externally produced query
/// files can be read with the same routine.
pub fn read_sample_csv<R: BufRead>(input: R) -> Result<(usize, Vec<f64>, Option<Vec<f64>>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty sample file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let has_truth = cols.last() == Some(&"p_true");
    let dim = if has_truth { cols.len() - 1 } else { cols.len() };
    if dim == 0 || !cols.iter().take(dim).enumerate().all(|(i, c)| *c == format!("x{i}")) {
        return Err(Error::Format(format!("unrecognized sample header `{header}`")));
    }
    let mut points = Vec::new();
    let mut truth = if has_truth { Some(Vec::new()) } else { None };
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.trim().split(',');
        for d in 0..dim {
            let field = fields.next().ok_or_else(|| {
                Error::Format(format!("row {}: missing column x{d}", lineno + 2))
            })?;
            points.push(parse_float(field, lineno + 2)?);
        }
        if let Some(truth) = truth.as_mut() {
            let field = fields
                .next()
                .ok_or_else(|| Error::Format(format!("row {}: missing p_true", lineno + 2)))?;
            truth.push(parse_float(field, lineno + 2)?);
        }
        if fields.next().is_some() {
            return Err(Error::Format(format!("row {}: too many columns", lineno + 2)));
        }
    }
    Ok((dim, points, truth))
}

fn parse_float(field: &str, lineno: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("row {lineno}: bad float `{field}`")))
}

/// Write a dataset directory (manifest, per-sample CSVs, per-PDF JSON).
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.to_string(),
        config: dataset.config.clone(),
        n_samples: dataset.samples.len(),
        dim: dataset.config.dim,
        points_per_sample: dataset.config.points_per_sample,
        train_indices: dataset.train_indices(),
        validation_indices: dataset.validation_indices(),
        retries: dataset.samples.iter().map(|s| s.retries).collect(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for (i, gs) in dataset.samples.iter().enumerate() {
        let mut out = BufWriter::new(fs::File::create(dir.join(sample_file(i)))?);
        write_sample_csv(&mut out, &gs.sample)?;
        out.flush()?;
        fs::write(dir.join(pdf_file(i)), serde_json::to_string_pretty(&gs.pdf)?)?;
    }
    Ok(())
}

/// A dataset read back from disk. Ground-truth PDFs are loaded on demand via
/// [`load_pdf`].
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<SampleSet>,
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::Format(format!(
            "unsupported dataset format `{}`",
            manifest.format
        )));
    }
    Ok(manifest)
}

pub fn load_pdf(dir: &Path, index: usize) -> Result<SyntheticPdf> {
    Ok(serde_json::from_str(&fs::read_to_string(
        dir.join(pdf_file(index)),
    )?)?)
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let manifest = load_manifest(dir)?;
    let mut samples = Vec::with_capacity(manifest.n_samples);
    for i in 0..manifest.n_samples {
        let file = fs::File::open(dir.join(sample_file(i)))?;
        let (dim, points, truth) = read_sample_csv(BufReader::new(file))?;
        if dim != manifest.dim {
            return Err(Error::Format(format!(
                "sample {i} has dim {dim}, manifest says {}",
                manifest.dim
            )));
        }
        let truth =
            truth.ok_or_else(|| Error::Format(format!("sample {i} is missing p_true")))?;
        // Recover the stored-to-original scale from the PDF file when present.
        let scale = match load_pdf(dir, i) {
            Ok(pdf) => pdf
                .domain
                .iter()
                .map(|iv| AxisScale {
                    offset: iv.a,
                    width: iv.width(),
                })
                .collect(),
            Err(_) => vec![AxisScale::IDENTITY; dim],
        };
        samples.push(SampleSet::from_scaled_rows(dim, points, scale, Some(truth)));
    }
    Ok(LoadedDataset { manifest, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GenerationConfig {
        GenerationConfig::new(1, 16, 64, 7)
    }

    #[test]
    fn quarter_split() {
        assert_eq!(validation_count(1000), 250);
        assert_eq!(validation_count(300), 75);
        let ds = generate_dataset(&small_config()).unwrap();
        assert_eq!(ds.train_indices().len(), 12);
        assert_eq!(ds.validation_indices(), vec![12, 13, 14, 15]);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_dataset(&small_config()).unwrap();
        let b = generate_dataset(&small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_densities_integrate_to_one() {
        let config = GenerationConfig::new(1, 10, 16, 99);
        let ds = generate_dataset(&config).unwrap();
        for gs in &ds.samples {
            let iv = gs.pdf.domain[0];
            let n = 16384;
            let h = iv.width() / (n - 1) as f64;
            let mut acc = 0.5 * (gs.pdf.density(&[iv.a]) + gs.pdf.density(&[iv.b]));
            for i in 1..n - 1 {
                acc += gs.pdf.density(&[iv.a + i as f64 * h]);
            }
            let mass = acc * h;
            assert!((mass - 1.0).abs() < 0.01, "mass = {mass}");
        }
    }

    #[test]
    fn filters_are_recorded_and_respected() {
        let mut config = GenerationConfig::new(1, 6, 32, 3);
        config.include_tags = vec![Tag::Sinusoidal];
        let ds = generate_dataset(&config).unwrap();
        fn all_leaves_sinusoidal(node: &crate::synthpdf::expr::ExprNode) -> bool {
            use crate::synthpdf::expr::ExprNode;
            match node {
                ExprNode::Leaf { spec, .. } => spec.tags().contains(&Tag::Sinusoidal),
                ExprNode::Combine { left, right, .. } => {
                    all_leaves_sinusoidal(left) && all_leaves_sinusoidal(right)
                }
            }
        }
        for gs in &ds.samples {
            assert!(all_leaves_sinusoidal(&gs.pdf.expr.node));
        }
    }

    #[test]
    fn inconsistent_filter_rejected() {
        let mut config = small_config();
        config.include_tags = vec![Tag::Step];
        config.exclude_tags = vec![Tag::Step];
        assert!(generate_dataset(&config).is_err());
    }

    #[test]
    fn disk_round_trip() {
        let dir = std::env::temp_dir().join(format!("dde-ds-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let ds = generate_dataset(&small_config()).unwrap();
        write_dataset(&dir, &ds).unwrap();
        let loaded = load_dataset(&dir).unwrap();
        assert_eq!(loaded.manifest.n_samples, 16);
        assert_eq!(loaded.samples.len(), 16);
        for (gs, ls) in ds.samples.iter().zip(&loaded.samples) {
            assert_eq!(gs.sample.points(), ls.points());
            assert_eq!(
                gs.sample.density_truth.as_ref().unwrap(),
                ls.density_truth.as_ref().unwrap()
            );
        }
        let pdf0 = load_pdf(&dir, 0).unwrap();
        assert_eq!(pdf0, ds.samples[0].pdf);
        fs::remove_dir_all(&dir).unwrap();
    }
}
