//! Line-delimited JSON datasets.
//!
//! A dataset file holds a header line followed by one `{"a":…,"b":…,"x":…}`
//! record per observation. The realized utilities are unobservable, so they
//! live in a separate sidecar file (header with the ground truth, then one
//! `{"u":…}` line per observation) used only by tests and evaluation.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use revpref_core::consistency::Observation;
use serde::{Deserialize, Serialize};

pub const DATASET_FORMAT: &str = "revpref-dataset/1";
pub const SIDECAR_FORMAT: &str = "revpref-sidecar/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub n: usize,
    /// Setting and price law, e.g. `gaussian_mcmc/i`.
    pub scenario: String,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub a: Vec<f64>,
    pub b: f64,
    pub x: Vec<f64>,
}

impl Record {
    pub fn from_observation(obs: &Observation<f64>) -> Self {
        Self { a: obs.prices().to_vec(), b: obs.budget(), x: obs.bundle().to_vec() }
    }

    pub fn to_observation(&self) -> anyhow::Result<Observation<f64>> {
        Ok(Observation::new(self.x.clone(), self.a.clone(), self.b)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(scenario: String, seed: u64, n: usize, observations: &[Observation<f64>]) -> Self {
        let header = DatasetHeader { format: DATASET_FORMAT.into(), n, scenario, seed, count: observations.len() };
        Self { header, records: observations.iter().map(Record::from_observation).collect() }
    }

    pub fn observations(&self) -> anyhow::Result<Vec<Observation<f64>>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| r.to_observation().with_context(|| format!("record {i}")))
            .collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> anyhow::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        writeln!(w)?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads and validates every record.
    pub fn read<R: BufRead>(r: R) -> anyhow::Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().context("empty dataset")??;
        let header: DatasetHeader = serde_json::from_str(&first).context("dataset header")?;
        if header.format != DATASET_FORMAT {
            bail!("unsupported dataset format {:?}", header.format);
        }
        let mut records = Vec::with_capacity(header.count);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).with_context(|| format!("record {i}"))?;
            if rec.a.len() != header.n || rec.x.len() != header.n {
                bail!("record {i}: expected dimension {}", header.n);
            }
            rec.to_observation().with_context(|| format!("record {i}"))?;
            records.push(rec);
        }
        if records.len() != header.count {
            bail!("header announces {} records, found {}", header.count, records.len());
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
    }

    /// CSV with columns `a_1..a_n, b, x_1..x_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> anyhow::Result<()> {
        let n = self.header.n;
        let mut cols: Vec<String> = (1..=n).map(|i| format!("a_{i}")).collect();
        cols.push("b".into());
        cols.extend((1..=n).map(|i| format!("x_{i}")));
        writeln!(w, "{}", cols.join(","))?;
        for r in &self.records {
            let fields: Vec<String> =
                r.a.iter().chain(std::iter::once(&r.b)).chain(&r.x).map(|v| v.to_string()).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Ground truth behind a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    Vmf { mu: Vec<f64>, kappa: f64 },
    DeltaCorrupt { u_star: Vec<f64>, delta: f64, corruption: String, corruption_kappa: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarHeader {
    pub format: String,
    pub truth: Truth,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityLine {
    u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub truth: Truth,
    pub utilities: Vec<Vec<f64>>,
}

impl Sidecar {
    pub fn write<W: Write>(&self, mut w: W) -> anyhow::Result<()> {
        let header =
            SidecarHeader { format: SIDECAR_FORMAT.into(), truth: self.truth.clone(), count: self.utilities.len() };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for u in &self.utilities {
            serde_json::to_writer(&mut w, &UtilityLine { u: u.clone() })?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> anyhow::Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().context("empty sidecar")??;
        let header: SidecarHeader = serde_json::from_str(&first).context("sidecar header")?;
        if header.format != SIDECAR_FORMAT {
            bail!("unsupported sidecar format {:?}", header.format);
        }
        let mut utilities = Vec::with_capacity(header.count);
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                utilities.push(serde_json::from_str::<UtilityLine>(&line)?.u);
            }
        }
        if utilities.len() != header.count {
            bail!("sidecar announces {} utilities, found {}", header.count, utilities.len());
        }
        Ok(Self { truth: header.truth, utilities })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
    }
}
