use std::path::{Path, PathBuf};

use patcorp::corpus::write_jsonl;
use patcorp::pipeline::{self, paths, report_from_work_dir, RunManifest, RunOptions, Stage, MANIFEST_FILE};
use patcorp::synth::{self, SynthConfig};
use patcorp::Error;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(docs: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth::records(&SynthConfig { docs, seed: 61, ..Default::default() });
        write_jsonl(&dir.path().join("raw.jsonl"), &recs).unwrap();
        let f = Fixture { dir };
        f.write_config("work", "");
        f
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("pipeline.toml")
    }

    fn work(&self) -> PathBuf {
        self.dir.path().join("work")
    }

    fn write_config(&self, work: &str, extra: &str) {
        let src = format!(
            "[run]\ninput = \"raw.jsonl\"\nwork_dir = \"{work}\"\nshards = 4\n\n[tokenizer]\nvocab_size = 1500\n\n[mlm]\nmax_len = 64\n{extra}"
        );
        std::fs::write(self.config(), src).unwrap();
    }

    fn run(&self, stages: &[Stage], resume: bool, force: bool) -> patcorp::Result<pipeline::RunSummary> {
        pipeline::run(
            &self.config(),
            &RunOptions {
                stages: stages.to_vec(),
                resume,
                force,
                ..Default::default()
            },
        )
    }
}

fn manifest(work: &Path) -> RunManifest {
    RunManifest::load(&work.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn full_run_records_every_stage() {
    let f = Fixture::new(100);
    let s = f.run(&[], false, false).unwrap();
    assert_eq!(s.executed, Stage::ALL.to_vec());
    let m = manifest(&f.work());
    let names: Vec<&str> = m.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["phase1", "filter", "dedup", "tok", "mlm-prep"]);
    let outs: Vec<u64> = m.stages.iter().map(|s| s.stats.docs_out).collect();
    assert_eq!(m.stages[0].stats.docs_in, 100);
    assert!(outs.windows(2).all(|w| w[1] <= w[0]), "{outs:?}");
    assert!(outs[4] > 0);
    for st in &m.stages {
        st.stats.check_conservation().unwrap();
    }
    // chained stages consume what the previous stage emitted
    for w in m.stages.windows(2).take(2) {
        assert_eq!(w[1].stats.docs_in, w[0].stats.docs_out);
    }
}

#[test]
fn report_equals_hand_computation() {
    let f = Fixture::new(100);
    f.run(&[], false, false).unwrap();
    let m = manifest(&f.work());
    let r = report_from_work_dir(&f.work()).unwrap();
    let pct = |b: u64, a: u64| ((b - a) as f64 / b as f64 * 10_000.0).round() / 100.0;
    let (p1, filter, dedup) = (&m.stages[0].stats, &m.stages[1].stats, &m.stages[2].stats);
    assert_eq!((r.rows[0].before, r.rows[0].after), (p1.docs_in, p1.docs_out));
    assert_eq!(r.rows[0].reduction_pct, pct(p1.docs_in, p1.docs_out));
    assert_eq!((r.rows[1].before, r.rows[1].after), (filter.tokens_in, dedup.tokens_out));
    assert_eq!(r.rows[1].reduction_pct, pct(filter.tokens_in, dedup.tokens_out));
}

#[test]
fn resume_skips_completed_stages() {
    let f = Fixture::new(100);
    f.run(&[], false, false).unwrap();
    let before = std::fs::read(f.work().join(MANIFEST_FILE)).unwrap();
    let s = f.run(&[], true, false).unwrap();
    assert!(s.executed.is_empty());
    assert_eq!(s.skipped, Stage::ALL.to_vec());
    assert_eq!(std::fs::read(f.work().join(MANIFEST_FILE)).unwrap(), before);
}

#[test]
fn corrupted_output_is_refused_with_stage_name() {
    let f = Fixture::new(100);
    f.run(&[], false, false).unwrap();
    let target = f.work().join(paths::UNIQUE);
    let mut bytes = std::fs::read(&target).unwrap();
    bytes[10] ^= 0x01;
    std::fs::write(&target, bytes).unwrap();

    match f.run(&[], true, false) {
        Err(Error::DigestMismatch { stage }) => assert_eq!(stage, "dedup"),
        other => panic!("expected a digest mismatch, got {other:?}"),
    }
    let s = f.run(&[], true, true).unwrap();
    assert_eq!(s.executed, vec![Stage::Dedup]);
    assert_eq!(f.run(&[], true, false).unwrap().executed, Vec::<Stage>::new());
}

#[test]
fn stage_by_stage_equals_composed_run() {
    let f = Fixture::new(100);
    f.run(&[], false, false).unwrap();
    f.write_config("stepwise", "");
    for st in Stage::ALL {
        assert_eq!(f.run(&[st], false, false).unwrap().executed, vec![st]);
    }
    let (a, b) = (f.work(), f.dir.path().join("stepwise"));
    assert_eq!(std::fs::read(a.join(MANIFEST_FILE)).unwrap(), std::fs::read(b.join(MANIFEST_FILE)).unwrap());
    for st in manifest(&a).stages {
        for rel in st.outputs.keys() {
            assert_eq!(std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{rel}");
        }
    }
}

#[test]
fn downstream_stage_needs_upstream_output() {
    let f = Fixture::new(20);
    assert!(matches!(f.run(&[Stage::Dedup], false, false), Err(Error::Data(_))));
}

#[test]
fn failed_stage_is_never_marked_complete() {
    let f = Fixture::new(100);
    f.run(&[], false, false).unwrap();
    let text = std::fs::read_to_string(f.config()).unwrap().replace("vocab_size = 1500", "vocab_size = 12");
    std::fs::write(f.config(), text).unwrap();
    assert!(f.run(&[], true, false).is_err());
    let m = manifest(&f.work());
    assert!(m.stage("tok").is_none());
    assert!(m.stage("dedup").is_some());
}

#[test]
fn changed_settings_rerun_only_affected_stages() {
    let f = Fixture::new(100);
    f.run(&[], false, false).unwrap();
    f.write_config("work", "mask_rate = 0.15\n");
    let s = f.run(&[], true, false).unwrap();
    assert_eq!(s.executed, vec![Stage::MlmPrep]);
    assert_eq!(s.skipped.len(), 4);
}

#[test]
fn example_config_spells_out_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../pipeline.example.toml");
    let cfg = patcorp::pipeline::PipelineConfig::load(&path).unwrap();
    let defaults = patcorp::pipeline::PipelineConfig::from_toml_str("").unwrap();
    assert_eq!(cfg.config_hash().unwrap(), defaults.config_hash().unwrap());
    assert!(cfg.run.input.ends_with("raw.jsonl"));
}
