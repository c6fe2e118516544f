//! File formats: CSV tables, run metadata as JSON, and a binary ancestry dump.
//!
//! Binary ancestry layout (all integers little-endian):
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 8         | magic `b"SMCGANC\0"`                    |
//! | 8      | 4         | format version, `u32` = 1               |
//! | 12     | 4         | reserved, `u32` = 0                     |
//! | 16     | 8         | particles `N`, `u64`                    |
//! | 24     | 8         | horizon `T`, `u64`                      |
//! | 32     | `4 * T * N` | parents, `u32` zero-based, row `t` = `a_t` |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use smc_genealogy::{Ancestry, AncestorVector, Partition, RunMeta, SquareMatrix};

use crate::error::{HarnessError, Result};

pub const ANCESTRY_MAGIC: &[u8; 8] = b"SMCGANC\0";
pub const ANCESTRY_VERSION: u32 = 1;

/// One row of `heights.csv`. Height fields are empty for censored rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightRow {
    pub replicate: usize,
    pub scheme: String,
    #[serde(rename = "N")]
    pub particles: usize,
    pub n: usize,
    pub height_generations: Option<usize>,
    pub height_rescaled: Option<f64>,
    pub censored: u8,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    #[serde(rename = "N")]
    pub particles: usize,
    pub n: usize,
    pub mean_height: f64,
    pub var_height: f64,
    pub mean_rescaled: f64,
    pub var_rescaled: f64,
    pub censor_rate: f64,
    pub replicates: usize,
}

/// Block count of a genealogy trace at each generation where it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replicate: usize,
    pub n: usize,
    pub generation: usize,
    pub num_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub case: String,
    pub analytic: f64,
    pub brute_force: f64,
    pub abs_diff: f64,
}

/// Particle `i` of generation `t + 1` descends from `parent` of generation
/// `t`; `i` and `parent` are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncestorRow {
    pub t: usize,
    pub i: usize,
    pub parent: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub t: usize,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub t: usize,
    pub ess: f64,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| HarnessError::csv(path, e))?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::csv(path, e))
}

pub fn write_ancestors_csv(path: &Path, ancestry: &Ancestry) -> Result<()> {
    let rows = (0..ancestry.horizon()).flat_map(|t| {
        ancestry.forward(t).iter().enumerate().map(move |(i, &p)| AncestorRow {
            t,
            i: i + 1,
            parent: p as usize + 1,
        })
    });
    write_csv(path, rows)
}

/// Reads `t,i,parent` rows back into an ancestry; rows must be complete and
/// ordered by `t`, then `i`.
pub fn read_ancestors_csv(path: &Path) -> Result<Ancestry> {
    let rows: Vec<AncestorRow> = read_csv(path)?;
    let bad = |message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let particles = rows.iter().take_while(|r| r.t == 0).count();
    if particles == 0 || !rows.len().is_multiple_of(particles) {
        return Err(bad("ancestor rows do not form a full T x N table".into()));
    }
    let mut vectors = Vec::with_capacity(rows.len() / particles);
    for (t, chunk) in rows.chunks(particles).enumerate() {
        let mut parents = Vec::with_capacity(particles);
        for (i, r) in chunk.iter().enumerate() {
            if r.t != t || r.i != i + 1 {
                return Err(bad(format!("unexpected row t={} i={}", r.t, r.i)));
            }
            parents.push(r.parent);
        }
        vectors.push(AncestorVector::from_one_based(&parents)?);
    }
    Ok(Ancestry::from_rows(&vectors)?)
}

pub fn write_observations_csv(path: &Path, observations: &[f64]) -> Result<()> {
    write_csv(path, observations.iter().enumerate().map(|(t, &y)| ObservationRow { t, y }))
}

pub fn write_weights_csv(path: &Path, ess: &[f64]) -> Result<()> {
    write_csv(path, ess.iter().enumerate().map(|(t, &ess)| WeightRow { t, ess }))
}

pub fn meta_json(meta: &RunMeta, extra: serde_json::Value) -> serde_json::Value {
    let mut value = serde_json::json!({
        "particles": meta.particles,
        "horizon": meta.horizon,
        "scheme": meta.scheme.name(),
        "permuted": meta.permuted,
        "seed": meta.seed,
        "model": meta.model,
        "rng": meta.rng,
    });
    if let (Some(target), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        target.extend(more);
    }
    value
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_ancestry_bin(path: &Path, ancestry: &Ancestry) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| HarnessError::io(path, e);
    out.write_all(ANCESTRY_MAGIC).map_err(io)?;
    out.write_all(&ANCESTRY_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&0u32.to_le_bytes()).map_err(io)?;
    out.write_all(&(ancestry.particles() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(ancestry.horizon() as u64).to_le_bytes()).map_err(io)?;
    for t in 0..ancestry.horizon() {
        for &p in ancestry.forward(t) {
            out.write_all(&p.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_ancestry_bin(path: &Path) -> Result<Ancestry> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(path, e))?;
    let bad = |message: &str| HarnessError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    if bytes.len() < 32 || &bytes[..8] != ANCESTRY_MAGIC {
        return Err(bad("not an ancestry dump"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(8) != ANCESTRY_VERSION {
        return Err(bad("unsupported ancestry dump version"));
    }
    let particles = u64_at(16) as usize;
    let horizon = u64_at(24) as usize;
    if particles == 0 || bytes.len() != 32 + 4 * particles * horizon {
        return Err(bad("ancestry dump size does not match its header"));
    }
    let rows = (0..horizon)
        .map(|t| {
            let parents = (0..particles).map(|i| u32_at(32 + 4 * (t * particles + i))).collect();
            AncestorVector::new(parents)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ancestry::from_rows(&rows)?)
}

/// Square matrix over partitions: a `from` column with row labels, then one
/// column per partition.
pub fn write_partition_matrix(path: &Path, states: &[Partition], matrix: &SquareMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let labels: Vec<String> = states.iter().map(Partition::to_string).collect();
    let header = std::iter::once("from".to_string()).chain(labels.iter().cloned());
    writer.write_record(header).map_err(|e| HarnessError::csv(path, e))?;
    for (i, label) in labels.iter().enumerate() {
        let record = std::iter::once(label.clone()).chain(matrix.row(i).iter().map(|v| v.to_string()));
        writer.write_record(record).map_err(|e| HarnessError::csv(path, e))?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn sample_ancestry() -> Ancestry {
        let rows = [vec![1, 1, 3], vec![2, 3, 3]]
            .iter()
            .map(|r| AncestorVector::from_one_based(r).unwrap())
            .collect::<Vec<_>>();
        Ancestry::from_rows(&rows).unwrap()
    }

    #[test]
    fn ancestors_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ancestors.csv");
        let a = sample_ancestry();
        write_ancestors_csv(&path, &a).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,i,parent\n0,1,1\n0,2,1\n0,3,3\n1,1,2\n"));
        assert_eq!(read_ancestors_csv(&path).unwrap(), a);
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        let a = sample_ancestry();
        write_ancestry_bin(&path, &a).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 32 + 4 * 6);
        assert_eq!(&bytes[..8], ANCESTRY_MAGIC);
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[32..36], &0u32.to_le_bytes());
        assert_eq!(&bytes[40..44], &2u32.to_le_bytes());
        assert_eq!(read_ancestry_bin(&path).unwrap(), a);
        std::fs::write(&path, &bytes[..40]).unwrap();
        assert!(matches!(read_ancestry_bin(&path), Err(HarnessError::Parse { .. })));
    }

    #[test]
    fn censored_height_fields_are_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let row = HeightRow {
            replicate: 0,
            scheme: "systematic".into(),
            particles: 8,
            n: 2,
            height_generations: None,
            height_rescaled: None,
            censored: 1,
        };
        write_csv(&path, [row.clone()]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "replicate,scheme,N,n,height_generations,height_rescaled,censored\n0,systematic,8,2,,,1\n"
        );
        assert_eq!(read_csv::<HeightRow>(&path).unwrap(), [row]);
    }

    #[test]
    fn partition_matrix_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let g = smc_genealogy::build_generator(2).unwrap();
        write_partition_matrix(&path, g.partitions(), g.matrix()).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "from,{1}{2},\"{1,2}\"\n{1}{2},-1,1\n\"{1,2}\",0,0\n");
    }
}
