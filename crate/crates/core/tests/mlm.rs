use patcorp::bpe::{CLS, MASK, PAD, SEP, SPECIALS};
use patcorp::mlm::{self, build_examples, lr_at_step, pack_or_truncate, read_shard, write_shards, MaskStrategy, MlmConfig, ShardSidecar, IGNORE};
use patcorp::par::Execution;
use proptest::prelude::*;

fn bodies() -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(5u32..1000, 0..50), 1..20)
}

proptest! {
    #[test]
    fn packed_sequences_are_well_formed(body in prop::collection::vec(0u32..1000, 0..80), max_len in 3usize..64, pad in any::<bool>()) {
        let seq = pack_or_truncate(&body, max_len, pad).unwrap();
        prop_assert_eq!(seq[0], CLS);
        let unpadded = seq.iter().rposition(|&t| t != PAD).unwrap() + 1;
        prop_assert_eq!(seq[unpadded - 1], SEP);
        prop_assert!(seq[unpadded..].iter().all(|&t| t == PAD));
        prop_assert_eq!(seq.len(), if pad { max_len } else { unpadded });
        let kept = body.len().min(max_len - 2);
        prop_assert_eq!(&seq[1..unpadded - 1], &body[..kept]);
    }

    #[test]
    fn masked_examples_keep_structure(bodies in bodies(), max_len in 3usize..40, seed in any::<u64>(), all_mask in any::<bool>()) {
        let cfg = MlmConfig {
            max_len,
            seed,
            strategy: if all_mask { MaskStrategy::AllMask } else { MaskStrategy::Bert },
            ..Default::default()
        };
        let ex = build_examples(&bodies, 1000, &cfg, 3, Execution::Parallel).unwrap();
        prop_assert_eq!(ex.len(), bodies.len());
        for (b, e) in bodies.iter().zip(&ex) {
            let orig = pack_or_truncate(b, max_len, true).unwrap();
            prop_assert_eq!(e.input_ids[0], CLS);
            prop_assert_eq!(e.input_ids.iter().filter(|&&t| t == SEP).count(), 1);
            prop_assert_eq!(e.seq_len as usize, b.len().min(max_len - 2) + 2);
            for (k, &o) in orig.iter().enumerate() {
                let (inp, lab) = (e.input_ids[k], e.labels[k]);
                if (o as usize) < SPECIALS.len() {
                    prop_assert_eq!((inp, lab), (o, IGNORE));
                } else if lab == IGNORE {
                    prop_assert_eq!(inp, o);
                } else {
                    prop_assert_eq!(lab, o);
                    prop_assert!(inp as usize >= SPECIALS.len() || inp == MASK);
                    prop_assert!(!all_mask || inp == MASK);
                }
            }
        }
    }
}

#[test]
fn sharding_does_not_change_examples() {
    let bodies: Vec<Vec<u32>> = (0..500u32).map(|i| (0..i % 37).map(|k| 5 + (i * 31 + k) % 900).collect()).collect();
    let cfg = MlmConfig { max_len: 32, ..Default::default() };
    let one = build_examples(&bodies, 1000, &cfg, 1, Execution::Sequential).unwrap();
    for shards in [2, 7, 64] {
        assert_eq!(build_examples(&bodies, 1000, &cfg, shards, Execution::Parallel).unwrap(), one);
    }
}

#[test]
fn shard_files_round_trip() {
    let bodies: Vec<Vec<u32>> = (0..250u32).map(|i| (0..i % 20).map(|k| 5 + k).collect()).collect();
    let cfg = MlmConfig {
        max_len: 24,
        examples_per_file: 100,
        ..Default::default()
    };
    let ex = build_examples(&bodies, 1000, &cfg, 4, Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, side) = write_shards(dir.path(), "train", &ex, cfg.examples_per_file, &ShardSidecar::for_config(&cfg)).unwrap();
    let mut back = Vec::new();
    for f in &side.files {
        let (max_len, part) = read_shard(&dir.path().join(&f.name)).unwrap();
        assert_eq!(max_len, 24);
        back.extend(part);
    }
    assert_eq!(side.files.len(), 3);
    assert_eq!(back, ex);
}

#[test]
fn schedule_and_batch_geometry_of_presets() {
    for name in mlm::PRESET_NAMES {
        let p = mlm::preset(name).unwrap();
        assert_eq!(p.mask_rate, 0.30);
        let workers = p.valid_worker_counts();
        assert!(!workers.is_empty());
        for w in workers {
            assert_eq!(p.micro_batch * p.accumulation_steps(w).unwrap() * w, p.global_batch);
        }
        let s = p.schedule(10_000);
        assert_eq!(lr_at_step(&s, 0).unwrap(), 0.0);
        assert_eq!(lr_at_step(&s, 600).unwrap(), p.peak_lr);
        let end = lr_at_step(&s, 10_000).unwrap();
        assert!((end - 0.02 * p.peak_lr).abs() <= 1e-12 * p.peak_lr, "{name}: {end}");
    }
    assert!(mlm::preset("bert-tiny").is_err());
}
