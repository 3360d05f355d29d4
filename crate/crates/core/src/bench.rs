// SPDX-License-Identifier: Apache-2.0

//! Synthetic traces and timing of the monitoring algorithms.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compile::CompiledSpec;
use crate::engine::{Algorithm, EngineConfig, Session};
use crate::trace::{DeathRecord, EventRecord, TraceReader, TraceRecord};

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub events: usize,
    /// Live objects per parameter at any time.
    pub objects: usize,
    pub seed: u64,
    /// Chance of a death record after each event.
    pub death_rate: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            events: 100_000,
            objects: 10_000,
            seed: 7,
            death_rate: 0.0,
        }
    }
}

/// A random trace over the spec's events. Objects that die are replaced by
/// fresh ones and never reappear.
pub fn generate(spec: &CompiledSpec, cfg: &GenConfig) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = &spec.spec.parameters;
    let mut next_id = vec![0usize; params.len()];
    let mut pools: Vec<Vec<String>> = params
        .iter()
        .enumerate()
        .map(|(p, (_, ty))| {
            (0..cfg.objects.max(1))
                .map(|_| {
                    next_id[p] += 1;
                    format!("{ty}#{}{}", p, next_id[p])
                })
                .collect()
        })
        .collect();
    let alphabet = spec.template.alphabet();
    let mut out = Vec::with_capacity(cfg.events + cfg.events / 8);
    let mut seq = 0u64;
    for _ in 0..cfg.events {
        seq += 1;
        let e = rng.gen_range(0..alphabet.len());
        let mut rec = EventRecord::new(seq, alphabet.name(e));
        rec.pos = Some(spec.positions[e]);
        for &p in &spec.event_params[e] {
            let token = pools[p][rng.gen_range(0..pools[p].len())].clone();
            rec.params.insert(params[p].0.clone(), token);
        }
        out.push(TraceRecord::Event(rec));
        if cfg.death_rate > 0.0 && !params.is_empty() && rng.gen_bool(cfg.death_rate.min(1.0)) {
            let p = rng.gen_range(0..params.len());
            let slot = rng.gen_range(0..pools[p].len());
            next_id[p] += 1;
            let fresh = format!("{}#{}{}", params[p].1, p, next_id[p]);
            let dead = std::mem::replace(&mut pools[p][slot], fresh);
            seq += 1;
            out.push(TraceRecord::Death(DeathRecord {
                seq,
                objects: vec![dead],
            }));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub mgc: bool,
    pub median_ms: f64,
    pub events_per_sec: f64,
    pub peak_live: u64,
    pub monitors_created: u64,
    pub records: usize,
    /// Ratio of monitored to parse-only replay time.
    pub overhead: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchResult {
    pub events: u64,
    pub baseline_ms: f64,
    pub rows: Vec<BenchRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn parse_only(text: &str) -> u64 {
    TraceReader::new(text.as_bytes())
        .map(|r| r.filter(|x| x.is_ok()).count() as u64)
        .unwrap_or(0)
}

/// Replays `text` once per repetition and algorithm; timings include
/// parsing, as does the baseline.
pub fn run_bench(specs: &[Arc<CompiledSpec>], text: &str, algorithms: &[Algorithm], mgc: bool, repetitions: usize) -> BenchResult {
    let reps = repetitions.max(1);
    let mut events = 0;
    let baseline_ms = median(
        (0..reps)
            .map(|_| {
                let t = Instant::now();
                events = std::hint::black_box(parse_only(text));
                t.elapsed().as_secs_f64() * 1e3
            })
            .collect(),
    );
    let rows = algorithms
        .iter()
        .map(|&algorithm| {
            let config = EngineConfig {
                algorithm,
                mgc,
                slice_cap: None,
            };
            let mut times = Vec::with_capacity(reps);
            let mut last = None;
            for _ in 0..reps {
                let t = Instant::now();
                let mut session = Session::new(specs.to_vec(), config.clone());
                if let Ok(reader) = TraceReader::new(text.as_bytes()) {
                    for r in reader {
                        match r {
                            Ok(rec) => session.process(&rec),
                            Err(_) => session.note_malformed(),
                        }
                    }
                }
                let report = session.finish();
                times.push(t.elapsed().as_secs_f64() * 1e3);
                last = Some(report);
            }
            let report = last.expect("at least one repetition");
            let median_ms = median(times);
            BenchRow {
                algorithm: algorithm.to_string(),
                mgc,
                median_ms,
                events_per_sec: if median_ms > 0.0 { report.summary.events as f64 / (median_ms / 1e3) } else { 0.0 },
                peak_live: report.summary.specs.iter().map(|s| s.peak_live).sum(),
                monitors_created: report.summary.specs.iter().map(|s| s.monitors_created).sum(),
                records: report.records.len(),
                overhead: if baseline_ms > 0.0 { median_ms / baseline_ms } else { 1.0 },
            }
        })
        .collect();
    BenchResult {
        events,
        baseline_ms,
        rows,
    }
}

impl BenchResult {
    pub fn row(&self, algorithm: Algorithm) -> Option<&BenchRow> {
        let name = algorithm.to_string();
        self.rows.iter().find(|r| r.algorithm == name)
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{} records replayed; parse-only baseline {:.2} ms\n{:<5} {:>4} {:>12} {:>14} {:>10} {:>10} {:>8} {:>10}\n",
            self.events, self.baseline_ms, "algo", "mgc", "median_ms", "events/s", "peak_live", "created", "records", "overhead"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<5} {:>4} {:>12.2} {:>14.0} {:>10} {:>10} {:>8} {:>9.1}x\n",
                r.algorithm,
                if r.mgc { "on" } else { "off" },
                r.median_ms,
                r.events_per_sec,
                r.peak_live,
                r.monitors_created,
                r.records,
                r.overhead
            ));
        }
        out
    }

    pub fn render_json(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
            .collect()
    }
}
