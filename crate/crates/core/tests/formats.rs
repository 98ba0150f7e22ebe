mod support;

use attenmia_core::data::{
    read_logprob_dump, write_attention_dump, write_logprob_dump, AttentionDump, AttentionStack, DataError, DumpEntry,
    LogProbRecord,
};
use attenmia_core::features::{read_feature_cache, write_feature_cache, FeatureMatrix, FeatureSchema};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn three_entries(rng: &mut ChaCha8Rng) -> Vec<DumpEntry> {
    [3usize, 1, 5]
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            DumpEntry::new(format!("id-{i}"), support::random_stack(rng, 2, 3, t, true), (i % 2) as u8)
                .with_group((i == 2).then(|| "g".to_string()))
        })
        .collect()
}

#[test]
fn atnd_three_samples_byte_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let entries = three_entries(&mut rng);
    let a = dir.path().join("a.atnd");
    write_attention_dump(&entries, "m", &a).unwrap();
    let dump = AttentionDump::open(&a).unwrap();
    assert_eq!((dump.len(), dump.layers(), dump.heads(), dump.model_tag()), (3, 2, 3, "m"));
    let back = dump.read_all().unwrap();
    assert_eq!(back, entries);
    for e in &entries {
        assert_eq!(dump.read(&e.id).unwrap(), e.stack);
    }
    let b = dir.path().join("b.atnd");
    write_attention_dump(&back, "m", &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dump.read("missing").is_err());
}

#[test]
fn atnd_rejects_damage() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let path = dir.path().join("a.atnd");
    write_attention_dump(&three_entries(&mut rng), "m", &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let mut magic = bytes.clone();
    magic[0] = b'X';
    std::fs::write(&path, &magic).unwrap();
    assert!(matches!(AttentionDump::open(&path), Err(DataError::BadMagic { .. })));

    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(AttentionDump::open(&path).and_then(|d| d.read_all()).is_err());
}

#[test]
fn atnd_rejects_mixed_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let entries = vec![
        DumpEntry::new("a", support::random_stack(&mut rng, 2, 2, 3, true), 0),
        DumpEntry::new("b", support::random_stack(&mut rng, 3, 2, 3, true), 1),
    ];
    assert!(write_attention_dump(&entries, "m", dir.path().join("x.atnd")).is_err());
}

#[test]
fn empty_dump_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.atnd");
    write_attention_dump(&[], "m", &path).unwrap();
    let dump = AttentionDump::open(&path).unwrap();
    assert!(dump.is_empty());
    assert!(dump.read_all().unwrap().is_empty());
}

#[test]
fn lgpd_thousand_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let records: Vec<LogProbRecord> = (0..1000)
        .map(|i| {
            let n = rng.gen_range(0..40);
            let lp = (0..n).map(|_| -rng.gen_range(0.0f32..12.0)).collect();
            let r = LogProbRecord::new(format!("r{i}"), lp, "tiny");
            if i % 3 == 0 {
                r
            } else {
                r.with_label((i % 2) as u8)
            }
        })
        .collect();
    let path = dir.path().join("l.lgpd");
    write_logprob_dump(&records, &path).unwrap();
    let back = read_logprob_dump(&path).unwrap();
    assert_eq!(back, records);
    let again = dir.path().join("m.lgpd");
    write_logprob_dump(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn lgpd_rejects_positive_logprob() {
    let dir = tempfile::tempdir().unwrap();
    let rec = LogProbRecord::new("x", vec![-1.0, 0.5], "m");
    assert!(write_logprob_dump(&[rec], dir.path().join("x.lgpd")).is_err());
}

#[test]
fn feature_cache_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let schema = FeatureSchema::transitional(3, 2, true);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..schema.len()).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
    let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
    let m = FeatureMatrix::from_rows(schema, ids, rows).unwrap();
    let path = dir.path().join("f.feat");
    write_feature_cache(&m, Some(&[0, 1, 1, 0]), &path).unwrap();
    let (back, labels) = read_feature_cache(&path).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.schema.hash(), m.schema.hash());
    assert_eq!(labels, Some(vec![0, 1, 1, 0]));
}

proptest! {
    #[test]
    fn atnd_preserves_f32_bits(seed: u64, layers in 1usize..4, heads in 1usize..4, t in 1usize..8, causal: bool) {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = support::random_stack(&mut rng, layers, heads, t, causal);
        let entries = vec![DumpEntry::new("only", stack.clone(), 1)];
        let path = dir.path().join("p.atnd");
        write_attention_dump(&entries, "m", &path).unwrap();
        let back = AttentionDump::open(&path).unwrap().read("only").unwrap();
        let shape = |s: &AttentionStack| (s.layers(), s.heads(), s.seq_len(), s.is_causal());
        prop_assert_eq!(shape(&back), shape(&stack));
        let bits = |s: &AttentionStack| s.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&stack));
    }

    #[test]
    fn lgpd_preserves_f32_bits(values in prop::collection::vec(-30.0f32..=0.0, 0..64), label in prop::option::of(0u8..2)) {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = LogProbRecord::new("x", values, "m");
        rec.label = label;
        let path = dir.path().join("p.lgpd");
        write_logprob_dump(std::slice::from_ref(&rec), &path).unwrap();
        let back = read_logprob_dump(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        let bits = |r: &LogProbRecord| r.token_logprobs.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back[0]), bits(&rec));
        prop_assert_eq!(back[0].label, rec.label);
    }
}
