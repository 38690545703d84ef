//! Seeded generator of block-structured log records, a desk-scale stand-in
//! for real operator logs.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Cohort, LogRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("blocks must partition 0..{n}: {reason}")]
    Blocks { n: usize, reason: String },
    #[error("weights must be finite, non-negative and not both zero")]
    Weights,
    #[error("planted structure needs within_weight >= cross_weight")]
    Inverted,
    #[error("record size range {min}..={max} is invalid for {n} nodes")]
    RecordSize { min: usize, max: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSize {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub blocks: Vec<Vec<usize>>,
    pub within_weight: f64,
    pub cross_weight: f64,
    pub records: usize,
    /// Parameters per record, drawn uniformly from the range.
    pub record_size: RecordSize,
    pub cohort: Cohort,
    /// Timestamp of the first record; later records follow one second apart.
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
}

fn default_start() -> DateTime<Utc> {
    DateTime::from_timestamp(1_577_836_800, 0).expect("2020-01-01 is representable")
}

impl SyntheticSpec {
    /// `blocks` equal consecutive blocks of the given sizes.
    pub fn planted(
        sizes: &[usize],
        within_weight: f64,
        cross_weight: f64,
        records: usize,
        cohort: Cohort,
    ) -> Self {
        let mut blocks = Vec::new();
        let mut next = 0;
        for &s in sizes {
            blocks.push((next..next + s).collect());
            next += s;
        }
        Self {
            n: next,
            blocks,
            within_weight,
            cross_weight,
            records,
            record_size: RecordSize { min: 2, max: 4 },
            cohort,
            start: default_start(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let mut seen = vec![false; self.n];
        for block in &self.blocks {
            for &v in block {
                if v >= self.n {
                    return Err(SynthError::Blocks {
                        n: self.n,
                        reason: format!("node {v} out of range"),
                    });
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(SynthError::Blocks {
                        n: self.n,
                        reason: format!("node {v} appears twice"),
                    });
                }
            }
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(SynthError::Blocks {
                n: self.n,
                reason: format!("node {v} is not in any block"),
            });
        }
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.within_weight)
            || !ok(self.cross_weight)
            || self.within_weight + self.cross_weight == 0.0
        {
            return Err(SynthError::Weights);
        }
        if self.within_weight < self.cross_weight {
            return Err(SynthError::Inverted);
        }
        let RecordSize { min, max } = self.record_size;
        if min < 2 || min > max || max > self.n {
            return Err(SynthError::RecordSize { min, max, n: self.n });
        }
        Ok(())
    }

    fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &v in block {
                out[v] = b;
            }
        }
        out
    }
}

/// Samples an index with probability proportional to `weights`.
fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut target = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return Some(i);
            }
            target -= w;
            last = Some(i);
        }
    }
    last
}

/// Generates `spec.records` records. Each record opens with one pair drawn
/// with probability proportional to its pair weight (`within_weight` inside a
/// block, `cross_weight` across), then grows to its drawn size by adding nodes
/// with probability proportional to their summed pair weight to the nodes
/// already present. Output depends only on `spec` and `seed`.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Vec<LogRecord>, SynthError> {
    spec.validate()?;
    let n = spec.n;
    let block = spec.block_of();
    let pair_weight = |i: usize, j: usize| {
        if block[i] == block[j] {
            spec.within_weight
        } else {
            spec.cross_weight
        }
    };
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let pair_weights: Vec<f64> = pairs.iter().map(|&(i, j)| pair_weight(i, j)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.records);
    let mut pull = vec![0.0; n];
    for r in 0..spec.records {
        let size = rng.gen_range(spec.record_size.min..=spec.record_size.max);
        let (a, b) = pairs[sample(&mut rng, &pair_weights).expect("validated weights")];
        let mut params = BTreeSet::from([a, b]);
        for (k, p) in pull.iter_mut().enumerate() {
            *p = if params.contains(&k) {
                0.0
            } else {
                pair_weight(a, k) + pair_weight(b, k)
            };
        }
        while params.len() < size {
            let Some(next) = sample(&mut rng, &pull) else {
                break;
            };
            params.insert(next);
            pull[next] = 0.0;
            for (k, p) in pull.iter_mut().enumerate() {
                if !params.contains(&k) {
                    *p += pair_weight(next, k);
                }
            }
        }
        out.push(LogRecord {
            timestamp: spec.start + Duration::seconds(r as i64),
            cohort: spec.cohort,
            params,
            session: None,
        });
    }
    Ok(out)
}

/// JSONL text of [`generate`]'s records, newline-terminated.
pub fn generate_jsonl(spec: &SyntheticSpec, seed: u64) -> Result<String, SynthError> {
    let mut text = String::new();
    for record in generate(spec, seed)? {
        text.push_str(&record.to_json_line());
        text.push('\n');
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_cohort_graph, IngestConfig};

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec::planted(&[3, 3], 5.0, 1.0, 200, Cohort::Novice);
        assert_eq!(generate_jsonl(&spec, 7).unwrap(), generate_jsonl(&spec, 7).unwrap());
        assert_ne!(generate_jsonl(&spec, 7).unwrap(), generate_jsonl(&spec, 8).unwrap());
    }

    #[test]
    fn records_respect_size_range() {
        let mut spec = SyntheticSpec::planted(&[4, 4], 3.0, 1.0, 500, Cohort::Expert);
        spec.record_size = RecordSize { min: 2, max: 5 };
        for r in generate(&spec, 1).unwrap() {
            assert!((2..=5).contains(&r.params.len()));
            assert!(r.params.iter().all(|&p| p < 8));
        }
    }

    #[test]
    fn zero_cross_weight_never_mixes_blocks() {
        let mut spec = SyntheticSpec::planted(&[3, 3], 1.0, 0.0, 300, Cohort::Expert);
        spec.record_size = RecordSize { min: 2, max: 6 };
        for r in generate(&spec, 3).unwrap() {
            let first = *r.params.iter().next().unwrap() / 3;
            assert!(r.params.iter().all(|&p| p / 3 == first));
            assert!(r.params.len() <= 3);
        }
    }

    #[test]
    fn pair_records_follow_weights() {
        let mut spec = SyntheticSpec::planted(&[2, 2], 9.0, 1.0, 20_000, Cohort::Expert);
        spec.record_size = RecordSize { min: 2, max: 2 };
        let recs = generate(&spec, 11).unwrap();
        let cfg = IngestConfig { universe_size: 4, ..Default::default() };
        let g = build_cohort_graph(&recs, Cohort::Expert, &cfg).unwrap();
        // 2 within pairs of weight 9, 4 cross pairs of weight 1
        let within = (g.weight(0, 1) + g.weight(2, 3)) / 20_000.0;
        assert!((within - 18.0 / 22.0).abs() < 0.02, "{within}");
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SyntheticSpec::planted(&[3, 3], 5.0, 1.0, 10, Cohort::Novice);
        spec.blocks[1].pop();
        assert!(matches!(spec.validate(), Err(SynthError::Blocks { .. })));
        let spec = SyntheticSpec::planted(&[3, 3], 1.0, 5.0, 10, Cohort::Novice);
        assert_eq!(spec.validate(), Err(SynthError::Inverted));
        let spec = SyntheticSpec::planted(&[3, 3], 0.0, 0.0, 10, Cohort::Novice);
        assert_eq!(spec.validate(), Err(SynthError::Weights));
        let mut spec = SyntheticSpec::planted(&[3, 3], 5.0, 1.0, 10, Cohort::Novice);
        spec.record_size = RecordSize { min: 1, max: 3 };
        assert!(matches!(spec.validate(), Err(SynthError::RecordSize { .. })));
    }
}
