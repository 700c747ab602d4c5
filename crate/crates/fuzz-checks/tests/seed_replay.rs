//! Replays every checked-in corpus seed through its target, plus a batch
//! of deterministic mutations of each seed.

use std::path::PathBuf;

use mer_fuzz_checks::TARGETS;

fn corpus_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus")
}

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = corpus_root().join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn every_target_has_seeds_and_a_fuzz_binary() {
    let targets_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/fuzz_targets");
    for (name, _) in TARGETS {
        assert!(!seeds(name).is_empty(), "{name} has no seeds");
        assert!(targets_dir.join(format!("{name}.rs")).is_file(), "{name} has no fuzz target");
    }
    let files = std::fs::read_dir(&targets_dir).unwrap().count();
    assert_eq!(files, TARGETS.len());
}

#[test]
fn seeds_replay_without_panics() {
    for (name, check) in TARGETS {
        for (file, bytes) in seeds(name) {
            let r = std::panic::catch_unwind(|| check(&bytes));
            assert!(r.is_ok(), "{name}/{file} panicked");
        }
    }
}

#[test]
fn truncations_and_byte_flips_do_not_panic() {
    for (name, check) in TARGETS {
        for (file, bytes) in seeds(name) {
            // Cap the work on large seeds.
            let step = (bytes.len() / 64).max(1);
            for cut in (0..bytes.len()).step_by(step) {
                let r = std::panic::catch_unwind(|| check(&bytes[..cut]));
                assert!(r.is_ok(), "{name}/{file} truncated at {cut} panicked");
                let mut flipped = bytes.clone();
                flipped[cut] ^= 0x20;
                let r = std::panic::catch_unwind(|| check(&flipped));
                assert!(r.is_ok(), "{name}/{file} flipped at {cut} panicked");
            }
        }
    }
}
