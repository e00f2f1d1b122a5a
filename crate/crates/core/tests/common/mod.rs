#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use driftscope::text::TokenStream;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `words` tokens drawn from cluster `prefix0..prefix{size-1}`.
pub fn cluster_tokens(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    size: usize,
    words: usize,
) -> Vec<String> {
    (0..words)
        .map(|_| format!("{prefix}{}", rng.random_range(0..size)))
        .collect()
}

fn insert_random(rng: &mut ChaCha8Rng, tokens: &mut Vec<String>, word: &str, times: usize) {
    for _ in 0..times {
        let p = rng.random_range(0..=tokens.len());
        tokens.insert(p, word.to_string());
    }
}

/// Spreads `total` items over `slots` as evenly as possible.
fn spread(total: usize, slots: usize, i: usize) -> usize {
    total / slots + usize::from(i < total % slots)
}

pub const DRIFT_UNIT: usize = 150;

/// Six snapshots of 200 documents, half on cluster `a`, half on cluster `b`.
/// "alpha" appears twice in every document. "beta" lives in cluster-`a`
/// documents with rising frequency for four snapshots, then moves to
/// cluster-`b` documents.
pub fn drift_fixture(seed: u64) -> Vec<(String, Vec<TokenStream>)> {
    let in_a = [2, 4, 6, 8, 0, 0];
    let in_b = [0, 0, 0, 0, 9, 11];
    let per = 200;
    let half = per / 2;
    let mut rng = rng(seed);
    (0..6)
        .map(|t| {
            let docs = (0..per)
                .map(|i| {
                    let (prefix, total) = if i % 2 == 0 {
                        ("a", in_a[t] * DRIFT_UNIT)
                    } else {
                        ("b", in_b[t] * DRIFT_UNIT)
                    };
                    let mut toks = cluster_tokens(&mut rng, prefix, 20, 30);
                    insert_random(&mut rng, &mut toks, "alpha", 2);
                    insert_random(&mut rng, &mut toks, "beta", spread(total, half, i / 2));
                    TokenStream::new(toks)
                })
                .collect();
            (format!("s{t}"), docs)
        })
        .collect()
}

/// Snapshots that all share one two-cluster distribution.
pub fn stationary_fixture(
    seed: u64,
    snapshots: usize,
    docs: usize,
) -> Vec<(String, Vec<TokenStream>)> {
    let mut rng = rng(seed);
    (0..snapshots)
        .map(|t| {
            let d = (0..docs)
                .map(|i| {
                    let prefix = if i % 2 == 0 { "a" } else { "b" };
                    let mut toks = cluster_tokens(&mut rng, prefix, 20, 30);
                    insert_random(&mut rng, &mut toks, "alpha", 2);
                    TokenStream::new(toks)
                })
                .collect();
            (format!("s{t}"), d)
        })
        .collect()
}

/// Planted candidate and its mentions per week.
pub struct Plant {
    pub name: &'static str,
    pub weekly: [usize; 6],
    pub eligible: bool,
}

pub const PLANTS: [Plant; 10] = [
    Plant {
        name: "remdesivir",
        weekly: [4, 6, 9, 12, 16, 20],
        eligible: true,
    },
    Plant {
        name: "folic acid",
        weekly: [4, 5, 6, 5, 7, 6],
        eligible: true,
    },
    Plant {
        name: "lopinavir",
        weekly: [3, 5, 8, 11, 15, 19],
        eligible: true,
    },
    Plant {
        name: "ritonavir",
        weekly: [3, 5, 8, 11, 15, 19],
        eligible: true,
    },
    Plant {
        name: "favipiravir",
        weekly: [5, 0, 5, 6, 7, 5],
        eligible: true,
    },
    Plant {
        name: "nitazoxanide",
        weekly: [0, 0, 6, 7, 5, 8],
        eligible: true,
    },
    Plant {
        name: "hydroxychloroquine",
        weekly: [0, 5, 5, 5, 0, 0],
        eligible: false,
    },
    Plant {
        name: "ivermectin",
        weekly: [2, 2, 2, 2, 2, 2],
        eligible: false,
    },
    Plant {
        name: "tocilizumab",
        weekly: [0, 0, 0, 0, 0, 0],
        eligible: false,
    },
    Plant {
        name: "baricitinib",
        weekly: [5, 5, 0, 5, 5, 0],
        eligible: false,
    },
];

pub fn background_word(rng: &mut ChaCha8Rng) -> String {
    // Roughly Zipfian over 300 words.
    let u: f64 = rng.random();
    let idx = ((300f64).powf(u) - 1.0) as usize;
    format!("w{idx}")
}

fn document(rng: &mut ChaCha8Rng, words: usize) -> Vec<String> {
    (0..words).map(|_| background_word(rng)).collect()
}

fn jsonl_line(id: &str, title: &str, text: &str) -> String {
    let mut s = serde_json::json!({ "id": id, "title": title, "text": text }).to_string();
    s.push('\n');
    s
}

/// Writes one JSONL dump per week for the planted candidates and returns
/// `(path, iso date)` pairs. Mentions go to distinct documents so document
/// frequency varies with the plan.
pub fn write_planted_dumps(dir: &Path, docs_per_week: usize, seed: u64) -> Vec<(PathBuf, String)> {
    fs::create_dir_all(dir).unwrap();
    let mut rng = rng(seed);
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 13).unwrap();
    (0..6)
        .map(|week| {
            let mut docs: Vec<Vec<String>> =
                (0..docs_per_week).map(|_| document(&mut rng, 40)).collect();
            for plant in &PLANTS {
                let mut order: Vec<usize> = (0..docs_per_week).collect();
                order.shuffle(&mut rng);
                for &d in order.iter().take(plant.weekly[week]) {
                    let p = rng.random_range(0..=docs[d].len());
                    docs[d].insert(p, plant.name.to_string());
                }
            }
            let path = dir.join(format!("week{week}.jsonl"));
            let body: String = docs
                .iter()
                .enumerate()
                .map(|(i, toks)| jsonl_line(&format!("w{week}-d{i}"), "report", &toks.join(" ")))
                .collect();
            fs::write(&path, body).unwrap();
            let date = start + chrono::Duration::days(7 * week as i64);
            (path, date.format("%Y-%m-%d").to_string())
        })
        .collect()
}

pub fn write_candidates(path: &Path) {
    let list: String = PLANTS.iter().map(|p| format!("{}\n", p.name)).collect();
    fs::write(path, list).unwrap();
}

pub fn write_seeds(path: &Path) {
    fs::write(path, "folic acid\nfluticasone propionate\n").unwrap();
}

/// Small, fast training settings for pipeline tests.
pub fn write_fast_config(path: &Path, seeds: Option<&Path>) {
    let seeds = seeds
        .map(|p| format!("seeds = {:?}\n", p.display().to_string()))
        .unwrap_or_default();
    fs::write(
        path,
        format!(
            "seed = 7\n\n[phrases]\n{seeds}\n[training]\ndimension = 16\nepochs = 3\n\n[analysis]\nk = 5\n"
        ),
    )
    .unwrap();
}

/// Weekly scale fixture: `weeks` dumps of `docs` documents with `words` tokens.
pub fn write_scale_dumps(
    dir: &Path,
    weeks: usize,
    docs: usize,
    words: usize,
    seed: u64,
) -> Vec<(PathBuf, String)> {
    fs::create_dir_all(dir).unwrap();
    let mut rng = rng(seed);
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 13).unwrap();
    (0..weeks)
        .map(|week| {
            let path = dir.join(format!("week{week:02}.jsonl"));
            let body: String = (0..docs)
                .map(|i| {
                    let mut toks = document(&mut rng, words);
                    for (j, plant) in PLANTS.iter().enumerate().take(6) {
                        if (i + j + week) % 7 == 0 {
                            let p = rng.random_range(0..=toks.len());
                            toks.insert(p, plant.name.to_string());
                        }
                    }
                    jsonl_line(&format!("w{week}-d{i}"), "weekly", &toks.join(" "))
                })
                .collect();
            fs::write(&path, body).unwrap();
            let date = start + chrono::Duration::days(7 * week as i64);
            (path, date.format("%Y-%m-%d").to_string())
        })
        .collect()
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    if dir.exists() {
        walk(dir, dir, &mut out);
    }
    out.sort();
    out
}

/// Spearman rank correlation; ties get average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    driftscope::diachrony::pearson(&ranks(x), &ranks(y)).unwrap()
}
