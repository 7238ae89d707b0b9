//! Dataset download, caching and loading.
//!
//! Datasets are pulled from the LIBSVM binary-classification repository and
//! cached (decompressed) in a local directory. Datasets with official
//! train/test files use those; the rest are split 75/25 with a fixed seed.

use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::data::{self, DatasetSplit, SparseDataset};
use crate::error::{Error, Result};

const BASE_URL: &str = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary";

/// Default seed for the 75/25 splits, fixed so split-derived statistics are
/// stable across invocations.
pub const DEFAULT_SPLIT_SEED: u64 = 20210503;

/// Fraction of rows assigned to training for datasets without official
/// train/test files.
pub const SPLIT_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy)]
pub struct DatasetSpec {
    pub name: &'static str,
    /// Remote file name of the training (or full) set.
    train_file: &'static str,
    /// Remote file name of the official test set, when one exists.
    test_file: Option<&'static str>,
    /// Default budgets in effective passes (regularized, non-regularized).
    pub budget: (f64, f64),
}

pub const DATASETS: &[DatasetSpec] = &[
    DatasetSpec {
        name: "ijcnn1",
        train_file: "ijcnn1.bz2",
        test_file: Some("ijcnn1.t.bz2"),
        budget: (20.0, 20.0),
    },
    DatasetSpec {
        name: "rcv1",
        train_file: "rcv1_train.binary.bz2",
        test_file: Some("rcv1_test.binary.bz2"),
        budget: (30.0, 40.0),
    },
    DatasetSpec {
        name: "news20",
        train_file: "news20.binary.bz2",
        test_file: None,
        budget: (40.0, 50.0),
    },
    DatasetSpec {
        name: "covtype",
        train_file: "covtype.libsvm.binary.bz2",
        test_file: None,
        budget: (20.0, 20.0),
    },
    DatasetSpec {
        name: "real-sim",
        train_file: "real-sim.bz2",
        test_file: None,
        budget: (20.0, 30.0),
    },
    DatasetSpec {
        name: "a1a",
        train_file: "a1a",
        test_file: Some("a1a.t"),
        budget: (30.0, 40.0),
    },
    DatasetSpec {
        name: "gisette",
        train_file: "gisette_scale.bz2",
        test_file: Some("gisette_scale.t.bz2"),
        budget: (30.0, 40.0),
    },
    DatasetSpec {
        name: "w1a",
        train_file: "w1a",
        test_file: Some("w1a.t"),
        budget: (40.0, 50.0),
    },
    DatasetSpec {
        name: "w8a",
        train_file: "w8a",
        test_file: Some("w8a.t"),
        budget: (30.0, 40.0),
    },
    DatasetSpec {
        name: "mushrooms",
        train_file: "mushrooms",
        test_file: None,
        budget: (30.0, 40.0),
    },
];

impl DatasetSpec {
    /// Whether the dataset ships an official test file (otherwise callers
    /// split the training file 75/25).
    pub fn has_official_test(&self) -> bool {
        self.test_file.is_some()
    }
}

pub fn dataset_spec(name: &str) -> Result<&'static DatasetSpec> {
    DATASETS.iter().find(|s| s.name == name).ok_or_else(|| {
        let valid = DATASETS
            .iter()
            .map(|s| s.name)
            .collect::<Vec<_>>()
            .join(", ");
        Error::UnknownDataset {
            name: name.to_string(),
            valid,
        }
    })
}

/// Cache directory: explicit flag value, else `DATA_DIR`, else `./data`.
pub fn resolve_data_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Ok(dir) = std::env::var("DATA_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("data")
}

fn cached_name(remote: &str) -> &str {
    remote.strip_suffix(".bz2").unwrap_or(remote)
}

fn download(url: &str, dest: &Path, compressed: bool) -> Result<()> {
    let resp = ureq::get(url).call().map_err(|e| Error::Download {
        url: url.to_string(),
        msg: e.to_string(),
    })?;
    let mut body = resp.into_body();
    let reader = body.as_reader();
    let tmp = dest.with_extension("part");
    {
        let mut out = fs::File::create(&tmp)?;
        let mut buf = Vec::new();
        if compressed {
            let mut dec = bzip2::read::BzDecoder::new(reader);
            dec.read_to_end(&mut buf).map_err(|e| Error::Download {
                url: url.to_string(),
                msg: format!("bzip2 decompression failed: {e}"),
            })?;
        } else {
            let mut r = reader;
            r.read_to_end(&mut buf).map_err(|e| Error::Download {
                url: url.to_string(),
                msg: e.to_string(),
            })?;
        }
        out.write_all(&buf)?;
    }
    fs::rename(&tmp, dest)?;
    Ok(())
}

fn fetch_file(remote: &str, cache_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(cache_dir).map_err(|_| Error::CacheDir(cache_dir.to_path_buf()))?;
    let dest = cache_dir.join(cached_name(remote));
    if dest.is_file() {
        return Ok(dest);
    }
    let url = format!("{BASE_URL}/{remote}");
    log::info!("downloading {url}");
    download(&url, &dest, remote.ends_with(".bz2"))?;
    Ok(dest)
}

/// Downloads (and decompresses) the named dataset's training file into the
/// cache directory, reusing a cached copy when present. Returns the local
/// path of the training file.
pub fn fetch(name: &str, cache_dir: &Path) -> Result<PathBuf> {
    let spec = dataset_spec(name)?;
    let train = fetch_file(spec.train_file, cache_dir)?;
    if let Some(test) = spec.test_file {
        fetch_file(test, cache_dir)?;
    }
    Ok(train)
}

fn parse_file(path: &Path) -> Result<SparseDataset> {
    let file = fs::File::open(path)?;
    data::parse_libsvm(BufReader::new(file))
}

/// Fetches, parses, preprocesses, and splits the named dataset into its
/// train/test pair. Official pairs are preprocessed against the larger of
/// the two raw dimensions; the rest are split 75/25 with `split_seed`.
pub fn load_dataset(name: &str, cache_dir: &Path, split_seed: u64) -> Result<DatasetSplit> {
    let spec = dataset_spec(name)?;
    fetch(name, cache_dir)?;
    let raw_train = parse_file(&cache_dir.join(cached_name(spec.train_file)))?;
    match spec.test_file {
        Some(test_remote) => {
            let raw_test = parse_file(&cache_dir.join(cached_name(test_remote)))?;
            let d_raw = raw_train.d().max(raw_test.d());
            Ok(DatasetSplit {
                train: data::preprocess_with_dim(&raw_train, d_raw)?,
                test: data::preprocess_with_dim(&raw_test, d_raw)?,
                split_seed: 0,
                fraction: 1.0,
            })
        }
        None => {
            let full = data::preprocess(&raw_train)?;
            data::split(&full, SPLIT_FRACTION, split_seed)
        }
    }
}

/// Parses and preprocesses just the training file of a cached dataset.
pub fn load_train(name: &str, cache_dir: &Path) -> Result<SparseDataset> {
    let path = fetch(name, cache_dir)?;
    data::preprocess(&parse_file(&path)?)
}
