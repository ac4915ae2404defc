//! Labeled datasets for binary classification and their distribution over
//! nodes.
//!
//! CSV format: header `label,x_1,...,x_d`, one sample per line, labels in
//! {-1, +1}. Ingestion can remap arbitrary textual labels (say digit
//! classes) onto the two signs.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<DVector<f64>>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<DVector<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows vs {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        let d = features[0].len();
        if features.iter().any(|x| x.len() != d) {
            return Err(Error::DimensionMismatch("ragged feature rows".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter("labels must be -1 or +1".into()));
        }
        Ok(Dataset { features, labels })
    }

    /// Two spherical Gaussian clouds with means `+-(separation/2) * u` along
    /// the normalized all-ones direction. The first half of the samples is
    /// labeled +1 (odd remainders go to +1).
    pub fn synthetic_gaussians(samples: usize, dim: usize, separation: f64, seed: u64) -> Self {
        assert!(samples >= 2 && dim >= 1, "need at least two samples and one feature");
        let mut rng = seeding::stream(seed, seeding::DOMAIN_DATA, 0, 0);
        let shift = separation / 2.0 / (dim as f64).sqrt();
        let n_plus = samples - samples / 2;
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for s in 0..samples {
            let y = if s < n_plus { 1.0 } else { -1.0 };
            let x = DVector::from_fn(dim, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g + y * shift
            });
            features.push(x);
            labels.push(y);
        }
        Dataset { features, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn feature(&self, s: usize) -> &DVector<f64> {
        &self.features[s]
    }

    pub fn label(&self, s: usize) -> f64 {
        self.labels[s]
    }

    /// Shift every feature column to mean zero and scale to unit standard
    /// deviation. Constant columns are only centered: their deviation is
    /// zero and has no scale to normalize away.
    pub fn standardize(&mut self) {
        let n = self.len() as f64;
        let d = self.dim();
        for j in 0..d {
            let mean: f64 = self.features.iter().map(|x| x[j]).sum::<f64>() / n;
            let var: f64 = self
                .features
                .iter()
                .map(|x| (x[j] - mean) * (x[j] - mean))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            for x in &mut self.features {
                x[j] -= mean;
                if sd > 1e-12 {
                    x[j] /= sd;
                }
            }
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim();
        let header: Vec<String> = std::iter::once("label".to_string())
            .chain((1..=d).map(|j| format!("x_{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for s in 0..self.len() {
            let mut fields = Vec::with_capacity(d + 1);
            fields.push(format!("{}", self.labels[s]));
            for j in 0..d {
                fields.push(format!("{}", self.features[s][j]));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Read a labeled CSV. `label_map` sends raw label strings to signs;
    /// pass `None` to accept literal `-1` / `1` / `+1` labels.
    pub fn read_csv<R: BufRead>(r: R, label_map: Option<&BTreeMap<String, f64>>) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, message: "empty dataset file".into() })?;
        let header = header?;
        if !header.trim_start().starts_with("label") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected `label,...` header, got {header:?}"),
            });
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut parts = t.split(',');
            let raw = parts.next().unwrap().trim();
            let y = match label_map {
                Some(map) => *map.get(raw).ok_or_else(|| Error::Parse {
                    line: idx + 1,
                    message: format!("label {raw:?} missing from label map"),
                })?,
                None => match raw {
                    "-1" | "-1.0" => -1.0,
                    "1" | "+1" | "1.0" => 1.0,
                    _ => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            message: format!("label {raw:?} is not -1/+1 and no map given"),
                        })
                    }
                },
            };
            if y != 1.0 && y != -1.0 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("label map sends {raw:?} to {y}, want -1 or +1"),
                });
            }
            let row: Vec<f64> = parts
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: idx + 1,
                        message: format!("bad feature value {v:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.is_empty() {
                return Err(Error::Parse { line: idx + 1, message: "row has no features".into() });
            }
            features.push(DVector::from_vec(row));
            labels.push(y);
        }
        Dataset::new(features, labels)
    }
}

/// How samples are dealt out to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// Every node receives samples of a single class. Nodes are split
    /// evenly between the classes (an odd node count gives the extra node
    /// to +1), and each class's samples are shuffled and dealt in quota
    /// chunks. This is the maximally heterogeneous split.
    OneClassPerNode,
    /// One global shuffle, then equal consecutive chunks.
    IidShuffle,
}

/// Assign sample indices to `n` nodes with equal quotas `len / n`.
///
/// Requires the sample count to be divisible by `n`. In one-class-per-node
/// mode a class whose sample count cannot fill its nodes' quotas is an
/// error; surplus samples of an over-represented class are left unassigned
/// (dropped from the distributed problem).
pub fn partition(
    ds: &Dataset,
    n: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::InvalidParameter("cannot partition over zero nodes".into()));
    }
    if ds.len() % n != 0 {
        return Err(Error::Partition(format!(
            "{} samples do not split evenly over {n} nodes",
            ds.len()
        )));
    }
    let quota = ds.len() / n;
    match mode {
        PartitionMode::IidShuffle => {
            let mut order: Vec<usize> = (0..ds.len()).collect();
            let mut rng = seeding::stream(seed, seeding::DOMAIN_PARTITION, 0, 0);
            order.shuffle(&mut rng);
            Ok(order.chunks(quota).map(|c| c.to_vec()).collect())
        }
        PartitionMode::OneClassPerNode => {
            let nodes_plus = n - n / 2;
            let mut pools: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
            for s in 0..ds.len() {
                pools[if ds.label(s) > 0.0 { 0 } else { 1 }].push(s);
            }
            let [pool_plus, pool_minus] = &mut pools;
            for (class, pool, nodes) in
                [(1.0, pool_plus, nodes_plus), (-1.0, pool_minus, n - nodes_plus)]
            {
                if pool.len() < nodes * quota {
                    return Err(Error::Partition(format!(
                        "class {class} has {} samples but its {nodes} nodes need {}",
                        pool.len(),
                        nodes * quota
                    )));
                }
                let mut rng =
                    seeding::stream(seed, seeding::DOMAIN_PARTITION, (class < 0.0) as u64, 1);
                pool.shuffle(&mut rng);
            }
            let mut assignment = Vec::with_capacity(n);
            for i in 0..n {
                let (pool, offset) = if i < nodes_plus {
                    (&pools[0], i)
                } else {
                    (&pools[1], i - nodes_plus)
                };
                assignment.push(pool[offset * quota..(offset + 1) * quota].to_vec());
            }
            Ok(assignment)
        }
    }
}
