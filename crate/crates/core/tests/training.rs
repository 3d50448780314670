use sincfront::audio::{synth_class_corpus, write_corpus, ClassSignature, Resonance};
use sincfront::nn::{ConvBlockConfig, FrontendConfig};
use sincfront::train::{
    evaluate_utterances, prepare_dataset, records_csv, run_training, train, TrainRun, CHECKPOINT_DIR,
    FINAL_CHECKPOINT, TRAIN_LOG,
};
use sincfront::{Checkpoint, CorpusSpec, FrontendKind, NetworkConfig, TrainSettings, WindowKind};

fn two_speakers() -> CorpusSpec {
    let res = |c: [f64; 2]| c.iter().map(|&hz| Resonance { center_hz: hz, bandwidth_hz: 120.0 }).collect();
    CorpusSpec {
        sample_rate: 8000.0,
        classes: vec![
            ClassSignature { f0_hz: 115.0, resonances: res([600.0, 1500.0]) },
            ClassSignature { f0_hz: 210.0, resonances: res([900.0, 2600.0]) },
        ],
        train_utterances: 5,
        train_total_s: [4.0, 5.0],
        test_utterances: 2,
        test_duration_s: [1.0, 1.5],
        seed: 17,
        ..CorpusSpec::default()
    }
}

fn small_net(kind: FrontendKind) -> NetworkConfig {
    NetworkConfig {
        frontend: FrontendConfig { kind, filters: 8, length: 31, window: WindowKind::Hamming, pool: 3 },
        conv_blocks: vec![ConvBlockConfig { filters: 6, kernel: 5, pool: 3 }],
        fc_layers: vec![16],
        ..NetworkConfig::default()
    }
}

fn settings(epochs: usize) -> TrainSettings {
    TrainSettings { epochs, batch_size: 16, ..TrainSettings::default() }
}

#[test]
fn separable_pair_is_learned() {
    let corpus = synth_class_corpus(&two_speakers()).unwrap();
    let s = settings(20);
    let framing = s.framing(8000.0).unwrap();
    let data = prepare_dataset(&corpus.train, framing, 0.2, 1).unwrap();
    for kind in [FrontendKind::Sinc, FrontendKind::Conv] {
        let out = train(&small_net(kind), &data, &s, 1, false, &mut |_| Ok(())).unwrap();
        let last = out.records.last().unwrap();
        assert!(last.heldout_fer < 5.0, "{kind}: held-out FER {}", last.heldout_fer);
        assert!(last.train_loss < out.records[0].train_loss);
        let test = evaluate_utterances(&out.checkpoint.model, &data.class_ids, &corpus.test, framing).unwrap();
        assert_eq!(test.n_utterances, 4);
        assert!(test.cer_pct <= 25.0, "{kind}: test CER {}", test.cer_pct);
    }
}

#[test]
fn epoch_observer_sees_every_epoch() {
    let corpus = synth_class_corpus(&two_speakers()).unwrap();
    let s = settings(3);
    let data = prepare_dataset(&corpus.train, s.framing(8000.0).unwrap(), 0.2, 2).unwrap();
    let mut seen = Vec::new();
    let out = train(&small_net(FrontendKind::Sinc), &data, &s, 2, true, &mut |e| {
        seen.push((e.record.epoch, e.step, e.total_steps));
        Ok(())
    })
    .unwrap();
    let per_epoch = seen[0].1;
    assert!(per_epoch > 0);
    assert_eq!(seen, vec![(1, per_epoch, 3 * per_epoch), (2, 2 * per_epoch, 3 * per_epoch), (3, 3 * per_epoch, 3 * per_epoch)]);
    assert_eq!(out.checkpoint.step, 3 * per_epoch);
}

fn run(dir: &std::path::Path, name: &str, epochs: usize, every: usize) -> TrainRun {
    TrainRun {
        network: small_net(FrontendKind::Sinc),
        manifest: dir.join("corpus/manifest.jsonl"),
        settings: TrainSettings { checkpoint_every: every, ..settings(epochs) },
        out_dir: dir.join(name),
        seed: 5,
        timing: false,
        expected_classes: Some(2),
    }
}

#[test]
fn file_runs_are_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus"), &synth_class_corpus(&two_speakers()).unwrap()).unwrap();
    let a = run_training(&run(dir.path(), "a", 2, 1)).unwrap();
    let b = run_training(&run(dir.path(), "b", 2, 1)).unwrap();
    assert_eq!(a.records, b.records);
    for f in [TRAIN_LOG.to_string(), FINAL_CHECKPOINT.to_string(), format!("{CHECKPOINT_DIR}/epoch_0001.ckpt")] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(&f)).unwrap(),
            std::fs::read(dir.path().join("b").join(&f)).unwrap(),
            "{f}"
        );
    }
    let log = std::fs::read_to_string(dir.path().join("a").join(TRAIN_LOG)).unwrap();
    assert_eq!(log, records_csv(&a.records));
    let mid = Checkpoint::load(&dir.path().join("a/checkpoints/epoch_0001.ckpt")).unwrap();
    assert_eq!(mid.epoch, 1);
    assert_eq!(mid.step * 2, a.checkpoint.step);
}

#[test]
fn zero_epochs_keeps_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus"), &synth_class_corpus(&two_speakers()).unwrap()).unwrap();
    let out = run_training(&run(dir.path(), "z", 0, 0)).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.checkpoint.step, 0);
    let ck = Checkpoint::load(&dir.path().join("z").join(FINAL_CHECKPOINT)).unwrap();
    let fresh = sincfront::Model::new(&small_net(FrontendKind::Sinc), ck.model.shape(), 5).unwrap();
    assert_eq!(ck.model, fresh);
    assert_eq!(ck.class_ids, vec![0, 1]);
    assert!(!dir.path().join("z").join(CHECKPOINT_DIR).exists());
}

#[test]
fn class_count_must_match() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus"), &synth_class_corpus(&two_speakers()).unwrap()).unwrap();
    let mut r = run(dir.path(), "m", 1, 0);
    r.expected_classes = Some(3);
    assert_eq!(run_training(&r).unwrap_err().kind(), "config");
    r.manifest = dir.path().join("missing.jsonl");
    assert_eq!(run_training(&r).unwrap_err().kind(), "io");
}
