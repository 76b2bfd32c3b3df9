//! Sequential vs rayon execution of the data-parallel kernels.
//! With the `parallel` feature disabled both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use patcorp::bpe::{self, TrainConfig};
use patcorp::corpus::{FieldDoc, PatentRecord};
use patcorp::filters::{filter_docs, FilterConfig, Filters};
use patcorp::minhash::{dedupe_field, MinHashConfig, MinHashSeeds};
use patcorp::mlm::{build_examples, MlmConfig};
use patcorp::par::{self, Execution};
use patcorp::phase1::{clean_record, CleaningReport, Phase1Config};
use patcorp::synth::{self, SynthConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn records() -> Vec<PatentRecord> {
    synth::records(&SynthConfig { docs: 2000, seed: 7, ..Default::default() })
}

fn field_docs(recs: &[PatentRecord]) -> Vec<FieldDoc> {
    let cfg = Phase1Config::default();
    let mut rep = CleaningReport::default();
    recs.iter().flat_map(|r| clean_record(r, &cfg, &mut rep).record.fields()).collect()
}

fn cleaning(c: &mut Criterion) {
    let recs = records();
    let cfg = Phase1Config::default();
    let mut g = c.benchmark_group("phase1_clean");
    g.throughput(Throughput::Elements(recs.len() as u64));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::map(&recs, exec, |r| clean_record(r, &cfg, &mut CleaningReport::default())))
        });
    }
    g.finish();
}

fn filtering(c: &mut Criterion) {
    let docs = field_docs(&records());
    let filters = Filters::new(FilterConfig::default()).unwrap();
    let mut g = c.benchmark_group("filter_cascade");
    g.throughput(Throughput::Elements(docs.len() as u64));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| filter_docs(&docs, &filters, exec)));
    }
    g.finish();
}

fn dedup(c: &mut Criterion) {
    let (docs, _) = synth::planted_field_corpus(5000, 500, 8);
    let cfg = MinHashConfig::default();
    let seeds = MinHashSeeds::from_master(cfg.seed);
    let mut g = c.benchmark_group("minhash_dedup");
    g.sample_size(20);
    g.throughput(Throughput::Elements(docs.len() as u64));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| dedupe_field(&docs, &cfg, &seeds, exec).unwrap()));
    }
    g.finish();
}

fn bpe_training(c: &mut Criterion) {
    let texts: Vec<String> = field_docs(&records()).into_iter().map(|d| d.text).collect();
    let cfg = TrainConfig { vocab_size: 4000, min_freq: 2 };
    let mut g = c.benchmark_group("bpe_train");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| bpe::train_detailed(&texts, &cfg, exec).unwrap()));
    }
    g.finish();
}

fn masking(c: &mut Criterion) {
    let bodies: Vec<Vec<u32>> = (0..5000u32).map(|i| (0..200).map(|k| 5 + (i * 7919 + k * 104_729) % 30_000).collect()).collect();
    let cfg = MlmConfig { max_len: 256, ..Default::default() };
    let mut g = c.benchmark_group("mlm_mask");
    g.throughput(Throughput::Elements(bodies.len() as u64));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| build_examples(&bodies, 30_005, &cfg, 8, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, cleaning, filtering, dedup, bpe_training, masking);
criterion_main!(benches);
