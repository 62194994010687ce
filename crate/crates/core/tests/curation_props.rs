mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use symkit::curation::{self, CurationConfig, LinkMode};
use symkit::{BBox, Error};

fn record(video: &str, frame: u32, instance: &str, b: &BBox) -> String {
    format!(
        "{{\"video_id\":\"{video}\",\"frame_id\":{frame},\"instance_id\":\"{instance}\",\"polygon\":[[{},{}],[{},{}],[{},{}],[{},{}]]}}\n",
        b.x,
        b.y,
        b.right(),
        b.y,
        b.right(),
        b.bottom(),
        b.x,
        b.bottom()
    )
}

fn box_for(frame: u32, inst: usize) -> BBox {
    BBox::new(frame as f64 * 2.0, inst as f64 * 30.0, 20.0 + inst as f64, 8.0)
}

type Instances = Vec<BTreeSet<u32>>;

fn annotations(instances: &Instances) -> String {
    // interleave records so the pipeline has to sort
    let mut lines = Vec::new();
    for (i, frames) in instances.iter().enumerate() {
        for &f in frames.iter().rev() {
            lines.push(record("vid", f, &format!("i{i}"), &box_for(f, i)));
        }
    }
    lines.sort_by_key(|l| l.len() % 3);
    lines.concat()
}

fn runs(frames: &BTreeSet<u32>) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    for &f in frames {
        match out.last_mut() {
            Some(run) if *run.last().unwrap() + 1 == f => run.push(f),
            _ => out.push(vec![f]),
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn curated_samples_round_trip(instances in prop::collection::vec(prop::collection::btree_set(1u32..25, 1..15), 1..4), min_length in 1usize..5) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CurationConfig { min_length, output_root: dir.path().join("out"), ..CurationConfig::default() };
        let report = curation::curate(&annotations(&instances), &cfg).unwrap();

        let mut expected: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut discarded = 0;
        for (i, frames) in instances.iter().enumerate() {
            for (k, run) in runs(frames).into_iter().enumerate() {
                if run.len() >= min_length {
                    expected.insert(format!("vid-i{i}-{k}"), run);
                } else {
                    discarded += 1;
                }
            }
        }
        prop_assert_eq!(report.summary.tracklets, expected.len());
        prop_assert_eq!(report.summary.discarded, discarded);

        let samples = if expected.is_empty() { vec![] } else { curation::load_sot_tree(&cfg.output_root).unwrap() };
        prop_assert_eq!(samples.len(), expected.len());
        for s in samples {
            let frames = &expected[&s.name];
            prop_assert_eq!(&s.frame_ids, frames);
            prop_assert_eq!(s.video.as_str(), "vid");
            let inst: usize = s.name.split('-').nth(1).unwrap()[1..].parse().unwrap();
            let want: Vec<BBox> = frames.iter().map(|&f| box_for(f, inst)).collect();
            prop_assert_eq!(s.boxes, want);
        }
    }

    #[test]
    fn split_segments_are_gap_free(frames in prop::collection::btree_set(1u32..60, 0..30)) {
        let sorted: Vec<(u32, ())> = frames.iter().map(|&f| (f, ())).collect();
        let segments = curation::split_continuity(&sorted);
        let flat: Vec<u32> = segments.iter().flatten().map(|(f, _)| *f).collect();
        prop_assert_eq!(flat, frames.iter().copied().collect::<Vec<_>>());
        for seg in &segments {
            prop_assert!(!seg.is_empty());
            prop_assert!(seg.windows(2).all(|w| w[1].0 == w[0].0 + 1));
        }
        for pair in segments.windows(2) {
            prop_assert!(pair[1][0].0 > pair[0].last().unwrap().0 + 1);
        }
    }
}

#[test]
fn curation_is_deterministic() {
    let input = std::fs::read_to_string(common::fixture("curation/two_instances.jsonl")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let cfg = CurationConfig {
            min_length: 2,
            output_root: dir.path().join(name),
            ..CurationConfig::default()
        };
        curation::curate(&input, &cfg).unwrap();
        trees.push(common::snapshot(&cfg.output_root));
    }
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0].len(), 4);
}

#[test]
fn schema_errors_abort_with_every_line() {
    let input = "{\"video_id\":\"v\",\"frame_id\":1,\"instance_id\":\"a\",\"polygon\":[[0,0],[1,0],[1,1]]}\n\
                 {\"video_id\":\"v\",\"frame_id\":0,\"instance_id\":\"a\",\"polygon\":[[0,0],[1,0],[1,1]]}\n\
                 not json\n\
                 {\"video_id\":\"v\",\"frame_id\":3,\"instance_id\":\"a\",\"polygon\":[[0,0],[1,0]]}\n";
    let dir = tempfile::tempdir().unwrap();
    let cfg = CurationConfig {
        output_root: dir.path().join("out"),
        ..CurationConfig::default()
    };
    match curation::curate(input, &cfg) {
        Err(Error::Schema { count, details }) => {
            assert_eq!(count, 3);
            assert!(details.contains("line 2") && details.contains("line 3") && details.contains("line 4"));
            assert!(details.contains("degenerate polygon"));
        }
        other => panic!("expected schema error, got {other:?}"),
    }
    assert!(!cfg.output_root.exists());
}

#[test]
fn collisions_need_force() {
    let input = std::fs::read_to_string(common::fixture("curation/split.jsonl")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CurationConfig {
        min_length: 2,
        output_root: dir.path().to_path_buf(),
        ..CurationConfig::default()
    };
    curation::curate(&input, &cfg).unwrap();
    let stale = dir.path().join("v1-7-0/stale.txt");
    std::fs::write(&stale, "x").unwrap();
    let err = curation::curate(&input, &cfg).unwrap_err();
    assert!(matches!(err, Error::Collision(_)));
    assert!(!err.is_data_error());
    cfg.force = true;
    curation::curate(&input, &cfg).unwrap();
    assert!(!stale.exists());
    assert_eq!(
        common::snapshot(dir.path()),
        common::snapshot(&common::fixture("curation/golden"))
    );
}

#[test]
fn copy_mode_copies_frames() {
    let input = std::fs::read_to_string(common::fixture("curation/split.jsonl")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("frames");
    std::fs::create_dir_all(images.join("v1")).unwrap();
    for f in [1, 2, 3, 5, 6] {
        std::fs::write(images.join(format!("v1/{f:06}.jpg")), format!("frame {f}")).unwrap();
    }
    let cfg = CurationConfig {
        min_length: 2,
        output_root: dir.path().join("out"),
        link_mode: LinkMode::Copy,
        image_root: Some(images),
        ..CurationConfig::default()
    };
    curation::curate(&input, &cfg).unwrap();
    let copied = std::fs::read_to_string(cfg.output_root.join("v1-7-1/img/000002.jpg")).unwrap();
    assert_eq!(copied, "frame 6");
}
