//! Independent reference implementations and fixture helpers shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symkit::tensor::AttentionWeights;
use symkit::{BBox, Tensor};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

fn get(t: &Tensor, r: usize, c: usize) -> f64 {
    t.data()[r * t.shape()[1] + c]
}

/// Textbook multi-head attention written with explicit loops.
pub fn naive_attention(q: &Tensor, k: &Tensor, v: &Tensor, w: &AttentionWeights) -> Vec<Vec<f64>> {
    let d = w.wq.shape()[0];
    let proj = |x: &Tensor, m: &Tensor| -> Vec<Vec<f64>> {
        (0..x.shape()[0])
            .map(|i| (0..d).map(|j| (0..d).map(|t| get(x, i, t) * get(m, t, j)).sum()).collect())
            .collect()
    };
    let (qp, kp, vp) = (proj(q, &w.wq), proj(k, &w.wk), proj(v, &w.wv));
    let dh = d / w.heads;
    let nq = qp.len();
    let nk = kp.len();
    let mut concat = vec![vec![0.0; d]; nq];
    for h in 0..w.heads {
        for i in 0..nq {
            let mut s = vec![0.0; nk];
            for (j, sj) in s.iter_mut().enumerate() {
                let mut dot = 0.0;
                for t in h * dh..(h + 1) * dh {
                    dot += qp[i][t] * kp[j][t];
                }
                *sj = dot / (dh as f64).sqrt();
            }
            let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = s.iter().map(|x| (x - m).exp()).sum();
            for t in h * dh..(h + 1) * dh {
                concat[i][t] = (0..nk).map(|j| (s[j] - m).exp() / z * vp[j][t]).sum();
            }
        }
    }
    (0..nq)
        .map(|i| (0..d).map(|j| (0..d).map(|t| concat[i][t] * get(&w.wo, t, j)).sum()).collect())
        .collect()
}

/// IoU by counting unit pixels covered by integer-aligned boxes.
pub fn raster_iou(a: &BBox, b: &BBox) -> f64 {
    let covers = |bx: &BBox, x: i64, y: i64| {
        (x as f64) >= bx.x && ((x + 1) as f64) <= bx.x + bx.w && (y as f64) >= bx.y && ((y + 1) as f64) <= bx.y + bx.h
    };
    let x0 = a.x.min(b.x) as i64;
    let y0 = a.y.min(b.y) as i64;
    let x1 = (a.x + a.w).max(b.x + b.w) as i64;
    let y1 = (a.y + a.h).max(b.y + b.h) as i64;
    let (mut inter, mut union) = (0u64, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let (ia, ib) = (covers(a, x, y), covers(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn random_int_box(rng: &mut ChaCha8Rng) -> BBox {
    BBox::new(
        rng.random_range(0..64) as f64,
        rng.random_range(0..64) as f64,
        rng.random_range(0..=64) as f64,
        rng.random_range(0..=64) as f64,
    )
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn symkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symkit"))
        .args(args)
        .env_remove("SYMKIT_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}
