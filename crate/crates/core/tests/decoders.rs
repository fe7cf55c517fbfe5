//! The fuzz target bodies, run on stable over the checked-in corpus and
//! random mutations of it.

use std::path::PathBuf;

use beliefrl::checkpoint::Checkpoint;
use beliefrl::config::RunConfig;
use beliefrl::metrics::{read_metrics, MetricsWriter};
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn config_parse(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(cfg) = RunConfig::parse(text, &[]) else { return false };
    let again = RunConfig::parse(&cfg.to_toml(), &[]).expect("round trip");
    assert_eq!(again.to_toml(), cfg.to_toml());
    true
}

fn checkpoint_decode(data: &[u8]) -> bool {
    let Ok(ckpt) = Checkpoint::decode(data) else { return false };
    let bytes = ckpt.encode();
    assert_eq!(Checkpoint::decode(&bytes).expect("re-decode").encode(), bytes);
    true
}

fn metrics_read(data: &[u8]) -> bool {
    let Ok(rows) = read_metrics(data) else { return false };
    let mut w = MetricsWriter::new(Vec::new()).unwrap();
    for r in &rows {
        w.write(r).unwrap();
    }
    let out = w.into_inner().unwrap();
    assert_eq!(read_metrics(out.as_slice()).expect("re-read").len(), rows.len());
    true
}

#[test]
fn corpus_seeds_decode() {
    for seed in corpus("config_parse") {
        assert!(config_parse(&seed));
    }
    for seed in corpus("checkpoint_decode") {
        assert!(checkpoint_decode(&seed));
    }
    for seed in corpus("metrics_read") {
        assert!(metrics_read(&seed));
    }
}

fn mutate(mut data: Vec<u8>, edits: &[(usize, u8)], cut: usize) -> Vec<u8> {
    for &(at, b) in edits {
        if !data.is_empty() {
            let i = at % data.len();
            data[i] = b;
        }
    }
    data.truncate(cut.min(data.len()));
    data
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mutated_configs_never_panic(which in 0usize..8, edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..6), cut in any::<usize>()) {
        let seeds = corpus("config_parse");
        config_parse(&mutate(seeds[which % seeds.len()].clone(), &edits, cut));
    }

    #[test]
    fn mutated_checkpoints_never_panic(which in 0usize..8, edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..6), cut in any::<usize>()) {
        let seeds = corpus("checkpoint_decode");
        checkpoint_decode(&mutate(seeds[which % seeds.len()].clone(), &edits, cut));
    }

    #[test]
    fn mutated_metrics_never_panic(which in 0usize..8, edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..6), cut in any::<usize>()) {
        let seeds = corpus("metrics_read");
        metrics_read(&mutate(seeds[which % seeds.len()].clone(), &edits, cut));
    }

    #[test]
    fn arbitrary_bytes_never_panic(data in prop::collection::vec(any::<u8>(), 0..256)) {
        config_parse(&data);
        checkpoint_decode(&data);
        metrics_read(&data);
    }
}
