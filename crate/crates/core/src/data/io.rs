//! Line-delimited JSON dataset files.
//!
//! Line 1 is a header carrying the format name, version, seed and the full
//! generator configuration. Every following line is one sample.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{vocab, Dataset, DatasetConfig, VqaSample};
use crate::error::{Error, Result};

const FORMAT: &str = "cavqa-dataset";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    seed: u64,
    n_samples: usize,
    config: DatasetConfig,
}

#[derive(Serialize, Deserialize)]
struct Record {
    #[serde(flatten)]
    sample: VqaSample,
    n_objects: usize,
    query_len: usize,
}

pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        seed: dataset.config.seed,
        n_samples: dataset.samples.len(),
        config: dataset.config.clone(),
    };
    let io_err = |e: std::io::Error| Error::io("<dataset writer>", e);
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Config(e.to_string()))?;
    w.write_all(b"\n").map_err(io_err)?;
    for s in &dataset.samples {
        let record = Record {
            sample: s.clone(),
            n_objects: s.scene.objects.len(),
            query_len: s.tokens.len(),
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::Config(e.to_string()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn export_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a whole dataset. Either every record parses and validates, or an
/// error naming the first bad line is returned.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut lines = BufReader::new(reader).lines();
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?
        .map_err(|e| parse_err(1, e.to_string()))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(parse_err(1, format!("unknown format `{}`", header.format)));
    }
    if header.version != VERSION {
        return Err(parse_err(
            1,
            format!(
                "unsupported version {} (expected {VERSION})",
                header.version
            ),
        ));
    }
    if header.seed != header.config.seed || header.n_samples != header.config.n_samples {
        return Err(parse_err(1, "header disagrees with its config echo"));
    }
    let config = header.config;
    config.validate().map_err(|e| parse_err(1, e.to_string()))?;

    let mut samples = Vec::with_capacity(header.n_samples);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| parse_err(lineno, format!("record {i}: {e}")))?;
        let s = record.sample;
        let invalid = |m: &str| parse_err(lineno, format!("record {i}: {m}"));
        if s.index != i {
            return Err(invalid("index out of sequence"));
        }
        if record.n_objects != s.scene.objects.len() || record.query_len != s.tokens.len() {
            return Err(invalid("mask lengths disagree with contents"));
        }
        if s.scene.objects.is_empty() || s.scene.objects.len() > config.t_max {
            return Err(invalid("object count outside 1..=t_max"));
        }
        if s.tokens.is_empty() || s.tokens.len() > config.k_max {
            return Err(invalid("query length outside 1..=k_max"));
        }
        if s.tokens
            .iter()
            .any(|&t| t == vocab::PAD || t >= vocab::vocab_size())
        {
            return Err(invalid("token id outside the vocabulary"));
        }
        if s.answer >= vocab::n_answers() {
            return Err(invalid("answer index outside the answer space"));
        }
        if !config.splits.iter().any(|(name, _)| *name == s.split) {
            return Err(invalid("unknown split"));
        }
        samples.push(s);
    }
    if samples.len() != header.n_samples {
        return Err(parse_err(
            samples.len() + 2,
            format!(
                "truncated: header promises {} records, found {}",
                header.n_samples,
                samples.len()
            ),
        ));
    }
    Ok(Dataset { config, samples })
}

pub fn import_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file)
}
