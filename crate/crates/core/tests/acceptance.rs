//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use driftscope::cli::run_from;
use driftscope::diachrony::{classify_candidate, eligible_candidates, pearson, CandidateClass};
use driftscope::embed::{
    cbow_loss_and_gradients, cosine_distance, decode_model, encode_model, load_model,
    read_text_vectors, save_model, train_compass, train_slices, write_text_vectors, CbowExample,
    CbowGradients, CompassModel, MatrixKind, SliceModel, TrainingConfig,
};
use driftscope::freq::TfidfTable;
use driftscope::text::{detect_phrases, PhraseParams, TokenStream};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let t = started.elapsed();
    check(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn random_corpus(rng: &mut impl Rng) -> Vec<TokenStream> {
    let docs = rng.random_range(1..=100);
    let vocab = rng.random_range(2..60);
    (0..docs)
        .map(|_| {
            let len = rng.random_range(1..40);
            (0..len)
                .map(|_| format!("t{}", rng.random_range(0..vocab)))
                .collect::<Vec<_>>()
                .into()
        })
        .collect()
}

fn tfidf_oracle(docs: &[TokenStream]) -> BTreeMap<String, (u64, u64, f64)> {
    let mut terms = BTreeSet::new();
    for d in docs {
        for t in d.iter() {
            terms.insert(t.clone());
        }
    }
    let n = docs.len() as f64;
    terms
        .into_iter()
        .map(|term| {
            let raw = docs
                .iter()
                .map(|d| d.iter().filter(|t| **t == term).count() as u64)
                .sum::<u64>();
            let df = docs.iter().filter(|d| d.iter().any(|t| *t == term)).count() as u64;
            let w = (1.0 + (raw as f64).ln()) * (n / df as f64).ln();
            (term, (raw, df, w))
        })
        .collect()
}

fn a1_tfidf() -> Outcome {
    let started = Instant::now();
    let mut rng = common::rng(101);
    let mut entries = 0;
    for c in 0..10 {
        let docs = random_corpus(&mut rng);
        let table = TfidfTable::build_all("c", &docs);
        let oracle = tfidf_oracle(&docs);
        check(table.len() == oracle.len(), || {
            format!("corpus {c}: {} rows, oracle {}", table.len(), oracle.len())
        })?;
        for (term, &(raw, df, w)) in &oracle {
            let e = table
                .get(term)
                .ok_or_else(|| format!("corpus {c}: {term} missing"))?;
            check(e.raw_count == raw && e.doc_freq == df, || {
                format!(
                    "corpus {c} {term}: counts ({}, {}) vs ({raw}, {df})",
                    e.raw_count, e.doc_freq
                )
            })?;
            check((e.tfidf - w).abs() <= 1e-9, || {
                format!("corpus {c} {term}: {} vs {w}", e.tfidf)
            })?;
            entries += 1;
        }
    }
    within(Duration::from_secs(10), started)?;
    Ok(format!("{entries} entries over 10 corpora"))
}

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let z = |v: &[f64]| -> Vec<f64> {
        let m = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
        v.iter().map(|a| (a - m) / sd).collect()
    };
    let (zx, zy) = (z(x), z(y));
    zx.iter().zip(&zy).map(|(a, b)| a * b).sum::<f64>() / n
}

fn a2_pearson() -> Outcome {
    let mut rng = common::rng(202);
    let mut worst = 0f64;
    for i in 0..1000 {
        let len = rng.random_range(4..=50);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?;
        let o = pearson_oracle(&x, &y);
        worst = worst.max((r - o).abs());
        check((r - o).abs() <= 1e-12, || {
            format!("pair {i}: {r} vs oracle {o}")
        })?;

        let rxx = pearson(&x, &x).unwrap();
        check((rxx - 1.0).abs() <= 1e-12, || {
            format!("pair {i}: r(x, x) = {rxx}")
        })?;
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let rneg = pearson(&x, &neg).unwrap();
        check((rneg + 1.0).abs() <= 1e-12, || {
            format!("pair {i}: r(x, -x) = {rneg}")
        })?;

        let mut a: f64 = rng.random_range(0.1..5.0);
        if rng.random() {
            a = -a;
        }
        let b = rng.random_range(-10.0..10.0);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let rab = pearson(&ax, &y).unwrap();
        check((rab - a.signum() * r).abs() <= 1e-12, || {
            format!(
                "pair {i}: r(ax+b, y) = {rab}, sign(a) r(x, y) = {}",
                a.signum() * r
            )
        })?;
    }
    Ok(format!("1000 pairs, max oracle gap {worst:.1e}"))
}

struct GradConfig {
    vocab: usize,
    dim: usize,
    center: u32,
    context: Vec<u32>,
    negatives: Vec<u32>,
    target: Vec<f64>,
    ctx: Vec<f64>,
}

fn loss_at(cfg: &GradConfig, target: &[f64], ctx: &[f64]) -> f64 {
    let mut g = CbowGradients::new(cfg.dim);
    cbow_loss_and_gradients(
        target,
        ctx,
        cfg.dim,
        CbowExample {
            center: cfg.center,
            context: &cfg.context,
            negatives: &cfg.negatives,
        },
        &mut g,
    )
}

fn a3_gradients() -> Outcome {
    let started = Instant::now();
    let mut rng = common::rng(303);
    let h = 1e-4;
    let mut worst = 0f64;
    let configs = 200;
    for c in 0..configs {
        let vocab = rng.random_range(2..=20);
        let dim = rng.random_range(1..=8);
        let n_ctx = rng.random_range(1..=6);
        let n_neg = rng.random_range(1..=5);
        let cfg = GradConfig {
            vocab,
            dim,
            center: rng.random_range(0..vocab as u32),
            context: (0..n_ctx)
                .map(|_| rng.random_range(0..vocab as u32))
                .collect(),
            negatives: (0..n_neg)
                .map(|_| rng.random_range(0..vocab as u32))
                .collect(),
            target: (0..vocab * dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            ctx: (0..vocab * dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        };

        let mut g = CbowGradients::new(dim);
        cbow_loss_and_gradients(
            &cfg.target,
            &cfg.ctx,
            dim,
            CbowExample {
                center: cfg.center,
                context: &cfg.context,
                negatives: &cfg.negatives,
            },
            &mut g,
        );
        let mut analytic_u = vec![0.0; vocab * dim];
        let ids = std::iter::once(cfg.center).chain(cfg.negatives.iter().copied());
        for (slot, id) in ids.enumerate() {
            for (k, v) in g.target_slot(slot).iter().enumerate() {
                analytic_u[id as usize * dim + k] += v;
            }
        }
        let mut analytic_c = vec![0.0; vocab * dim];
        let scale = g.context_scale(cfg.context.len());
        for &j in &cfg.context {
            for k in 0..dim {
                analytic_c[j as usize * dim + k] += g.hidden[k] * scale;
            }
        }

        let mut numeric_u = vec![0.0; vocab * dim];
        let mut numeric_c = vec![0.0; vocab * dim];
        for i in 0..vocab * dim {
            let mut t = cfg.target.clone();
            t[i] += h;
            let up = loss_at(&cfg, &t, &cfg.ctx);
            t[i] -= 2.0 * h;
            let down = loss_at(&cfg, &t, &cfg.ctx);
            numeric_u[i] = (up - down) / (2.0 * h);

            let mut x = cfg.ctx.clone();
            x[i] += h;
            let up = loss_at(&cfg, &cfg.target, &x);
            x[i] -= 2.0 * h;
            let down = loss_at(&cfg, &cfg.target, &x);
            numeric_c[i] = (up - down) / (2.0 * h);
        }

        let a: Vec<f64> = analytic_u.iter().chain(&analytic_c).copied().collect();
        let n: Vec<f64> = numeric_u.iter().chain(&numeric_c).copied().collect();
        let diff = a
            .iter()
            .zip(&n)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm_n = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = diff / norm_a.max(norm_n).max(1e-12);
        worst = worst.max(rel);
        check(rel < 1e-4, || {
            format!(
                "config {c} (V={}, d={dim}): relative error {rel:.2e}",
                cfg.vocab
            )
        })?;
    }
    within(Duration::from_secs(30), started)?;
    Ok(format!("{configs} configs, max relative error {worst:.2e}"))
}

fn small_config() -> TrainingConfig {
    TrainingConfig {
        dimension: 20,
        epochs: 3,
        seed: 11,
        ..Default::default()
    }
}

fn concat(snaps: &[(String, Vec<TokenStream>)]) -> Vec<TokenStream> {
    snaps.iter().flat_map(|(_, d)| d.iter().cloned()).collect()
}

fn a4_compass_freeze() -> Outcome {
    let snaps = common::stationary_fixture(404, 5, 60);
    let cfg = small_config();
    let compass = train_compass(&concat(&snaps), &cfg).map_err(|e| e.to_string())?;
    let before = compass.target().checksum();
    let before_c = compass.context().checksum();
    let slices = train_slices(&snaps, &compass, &cfg).map_err(|e| e.to_string())?;
    check(slices.len() == 5, || format!("{} slices", slices.len()))?;
    check(compass.target().checksum() == before, || {
        "compass U changed".into()
    })?;
    check(compass.context().checksum() == before_c, || {
        "compass C changed".into()
    })?;
    for s in &slices {
        for (i, e) in s.vocabulary().entries().iter().enumerate() {
            let cid = compass.vocabulary().id(&e.term).unwrap();
            check(s.model.target.row(i) == compass.target().row(cid), || {
                format!(
                    "slice {} holds a modified U row for {}",
                    s.snapshot_id, e.term
                )
            })?;
        }
    }
    Ok(format!(
        "U checksum {} unchanged after 5 slices",
        &before[..12]
    ))
}

fn a5_zero_drift() -> Outcome {
    let snaps = common::stationary_fixture(505, 4, 60);
    let cfg = small_config();
    let compass = train_compass(&concat(&snaps), &cfg).map_err(|e| e.to_string())?;
    let zero = TrainingConfig { epochs: 0, ..cfg };
    let slices = train_slices(&snaps, &compass, &zero).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    let mut terms = 0;
    for s in &slices {
        for e in s.vocabulary().entries() {
            let z = cosine_distance(
                s.vector_of(&e.term).unwrap(),
                compass.vector_of(&e.term).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            worst = worst.max(z.abs());
            terms += 1;
        }
    }
    check(worst <= 1e-6, || format!("max |Z| = {worst:e}"))?;
    Ok(format!("{terms} slice terms, max |Z| = {worst:.1e}"))
}

fn z_series(term: &str, slices: &[SliceModel], compass: &CompassModel) -> Vec<f64> {
    slices
        .iter()
        .map(|s| {
            cosine_distance(s.vector_of(term).unwrap(), compass.vector_of(term).unwrap()).unwrap()
        })
        .collect()
}

fn a6_drift() -> Outcome {
    let started = Instant::now();
    let snaps = common::drift_fixture(606);
    let cfg = TrainingConfig {
        dimension: 20,
        seed: 606,
        threads: 1,
        ..Default::default()
    };
    let compass = train_compass(&concat(&snaps), &cfg).map_err(|e| e.to_string())?;
    let slices = train_slices(&snaps, &compass, &cfg).map_err(|e| e.to_string())?;
    let alpha = z_series("alpha", &slices, &compass);
    let beta = z_series("beta", &slices, &compass);
    let time: Vec<f64> = (0..beta.len()).map(|t| t as f64).collect();
    let rho = common::spearman(&time, &beta);
    let gap = beta[5] - alpha[5];
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|z| format!("{z:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check(rho > 0.8 && gap >= 0.1, || {
        format!(
            "rho {rho:.3}, gap {gap:.3}; beta Z [{}], alpha Z [{}]",
            fmt(&beta),
            fmt(&alpha)
        )
    })?;
    within(Duration::from_secs(120), started)?;
    Ok(format!(
        "Spearman {rho:.3}, final gap {gap:.3}, beta Z [{}]",
        fmt(&beta)
    ))
}

fn a7_bands() -> Outcome {
    use CandidateClass::*;
    let cases = [
        (0.87, Positive),
        (-0.82, Negative),
        (0.53, Uncorrelated),
        (-0.53, Uncorrelated),
        (0.0, Uncorrelated),
    ];
    for (r, want) in cases {
        let got = classify_candidate(r, 0.53);
        check(got == want, || format!("r = {r}: {got}, expected {want}"))?;
    }
    Ok("0.87, -0.82, 0.53, -0.53, 0 banded as expected".into())
}

fn run_oracle(mask: &[bool], min_run: usize) -> bool {
    (0..mask.len()).any(|i| i + min_run <= mask.len() && mask[i..i + min_run].iter().all(|&b| b))
}

fn a8_eligibility() -> Outcome {
    let mut rng = common::rng(808);
    let mut presence = BTreeMap::new();
    for i in 0..10_000 {
        let len = rng.random_range(0..=24);
        let density: f64 = rng.random();
        let mask: Vec<bool> = (0..len).map(|_| rng.random::<f64>() < density).collect();
        presence.insert(format!("c{i:05}"), mask);
    }
    let got = eligible_candidates(&presence, 4);
    let want: BTreeSet<String> = presence
        .iter()
        .filter(|(_, m)| run_oracle(m, 4))
        .map(|(t, _)| t.clone())
        .collect();
    check(got == want, || {
        let diff: Vec<_> = got.symmetric_difference(&want).take(5).collect();
        format!(
            "{} disagreements, e.g. {diff:?}",
            got.symmetric_difference(&want).count()
        )
    })?;
    Ok(format!(
        "10000 masks, {} eligible, oracle agrees",
        got.len()
    ))
}

fn bigram_counts(stream: &[String]) -> HashMap<(String, String), u64> {
    let mut m = HashMap::new();
    for w in stream.windows(2) {
        *m.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
    }
    m
}

fn a9_phrases() -> Outcome {
    // 1000 tokens: "spike protein" 50 times, "spike" 55, "protein" 60,
    // "rare pair" 3 times, "common_x common_y" 6 times among 100 of each.
    let mut units: Vec<Vec<&str>> = Vec::new();
    units.extend(std::iter::repeat_n(vec!["spike", "protein"], 50));
    units.extend(std::iter::repeat_n(vec!["spike"], 5));
    units.extend(std::iter::repeat_n(vec!["protein"], 10));
    units.extend(std::iter::repeat_n(vec!["rare", "pair"], 3));
    units.extend(std::iter::repeat_n(vec!["commonx", "commony"], 6));
    units.extend(std::iter::repeat_n(vec!["commonx"], 94));
    units.extend(std::iter::repeat_n(vec!["commony"], 94));
    let unit_tokens: usize = units.iter().map(|u| u.len()).sum();
    let fillers = 1000 - unit_tokens;
    let mut rng = common::rng(909);
    use rand::seq::SliceRandom;
    units.shuffle(&mut rng);
    let mut tokens: Vec<String> = Vec::with_capacity(1000);
    let mut f = 0;
    for u in &units {
        tokens.extend(u.iter().map(|s| s.to_string()));
        tokens.push(format!("filler{f}"));
        f += 1;
    }
    while f < fillers {
        tokens.push(format!("filler{f}"));
        f += 1;
    }
    check(tokens.len() == 1000, || {
        format!("fixture has {} tokens", tokens.len())
    })?;

    let bigrams = bigram_counts(&tokens);
    let count = |w: &str| tokens.iter().filter(|t| *t == w).count() as u64;
    let pair = |a: &str, b: &str| {
        bigrams
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(0)
    };
    check(
        pair("spike", "protein") == 50 && count("spike") == 55 && count("protein") == 60,
        || "fixture counts off".into(),
    )?;
    let hand = (50.0 - 5.0) / (55.0 * 60.0) * 1000.0;

    // Documents break only after a filler, so no planted pair is split.
    let mut docs: Vec<TokenStream> = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    for t in &tokens {
        cur.push(t.clone());
        if cur.len() >= 100 && t.starts_with("filler") {
            docs.push(TokenStream::new(std::mem::take(&mut cur)));
        }
    }
    if !cur.is_empty() {
        docs.push(TokenStream::new(cur));
    }

    let seeds: BTreeSet<String> = ["folic_acid", "fluticasone_propionate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dict = detect_phrases(&docs, &seeds, PhraseParams::default());
    let score = dict
        .score("spike_protein")
        .ok_or_else(|| "spike_protein not learned".to_string())?;
    check((score - hand).abs() <= 1e-9, || {
        format!("score {score} vs hand {hand}")
    })?;
    check(!dict.contains("rare_pair"), || "rare_pair learned".into())?;
    check(!dict.contains("commonx_commony"), || {
        "commonx_commony learned".into()
    })?;

    let mut dictionaries = 1;
    for delta in [0.0, 5.0, 50.0] {
        for threshold in [-1e9, 0.0, 10.0, 1e9] {
            for passes in 1..=3 {
                let d = detect_phrases(
                    &docs,
                    &seeds,
                    PhraseParams {
                        delta,
                        threshold,
                        passes,
                    },
                );
                for s in &seeds {
                    check(d.contains(s), || {
                        format!("seed {s} missing (delta {delta}, threshold {threshold})")
                    })?;
                }
                dictionaries += 1;
            }
        }
    }
    Ok(format!(
        "spike_protein score {score:.6} = hand {hand:.6}; seeds in all {dictionaries} dictionaries"
    ))
}

fn cli(store: &Path, args: &[&str]) -> Result<(), String> {
    let mut full = vec!["driftscope", "--store", store.to_str().unwrap()];
    full.extend_from_slice(args);
    run_from(full).map_err(|e| format!("{args:?}: {e:#}"))
}

fn run_pipeline(
    root: &Path,
    store: &Path,
    config: &Path,
    deterministic: bool,
) -> Result<(), String> {
    let inputs = root.join("dumps");
    let cands = root.join("candidates.txt");
    let cfg = config.to_str().unwrap();
    let mut flags = vec!["--config", cfg];
    if deterministic {
        flags.push("--deterministic");
    }
    for (path, date) in common::write_planted_dumps(&inputs, 80, 1010) {
        let mut a = flags.clone();
        a.extend(["ingest", path.to_str().unwrap(), "--date", date.as_str()]);
        cli(store, &a)?;
    }
    for cmd in [
        &["phrases"][..],
        &["train"],
        &["tfidf"],
        &["analyze", cands.to_str().unwrap()],
        &["export-vectors", "--all"],
    ] {
        let mut a = flags.clone();
        a.extend_from_slice(cmd);
        cli(store, &a)?;
    }
    Ok(())
}

fn a10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let seeds = root.join("seeds.txt");
    common::write_seeds(&seeds);
    common::write_candidates(&root.join("candidates.txt"));
    let config = root.join("pipeline.toml");
    common::write_fast_config(&config, Some(&seeds));
    let (a, b) = (root.join("store-a"), root.join("store-b"));
    run_pipeline(root, &a, &config, true)?;
    run_pipeline(root, &b, &config, true)?;
    let strip = |t: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        t.into_iter()
            .filter(|(p, _)| p != driftscope::cli::LEDGER_FILE)
            .collect()
    };
    let ta = strip(common::tree(&a));
    let tb = strip(common::tree(&b));
    let names_a: Vec<&String> = ta.iter().map(|(p, _)| p).collect();
    let names_b: Vec<&String> = tb.iter().map(|(p, _)| p).collect();
    check(names_a == names_b, || {
        "runs wrote different file sets".into()
    })?;
    for ((p, x), (_, y)) in ta.iter().zip(&tb) {
        check(x == y, || format!("{p} differs between runs"))?;
    }
    for must in [
        "models/compass.dsem",
        "reports/analysis/candidates.csv",
        "tfidf/2020-03-13.csv",
        "phrases.csv",
    ] {
        check(ta.iter().any(|(p, _)| p == must), || {
            format!("{must} not produced")
        })?;
    }
    Ok(format!("{} files byte-identical across two runs", ta.len()))
}

fn a11_persistence() -> Outcome {
    let snaps = common::stationary_fixture(1111, 2, 40);
    let compass = train_compass(&concat(&snaps), &small_config()).map_err(|e| e.to_string())?;
    let bytes = encode_model(&compass.model);
    let decoded = decode_model(&bytes).map_err(|e| e.to_string())?;
    check(encode_model(&decoded) == bytes, || {
        "re-encoded bytes differ".into()
    })?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.dsem");
    save_model(&compass.model, &path).map_err(|e| e.to_string())?;
    let on_disk = std::fs::read(&path).map_err(|e| e.to_string())?;
    check(on_disk == bytes, || {
        "file bytes differ from encoding".into()
    })?;
    let loaded = load_model(&path).map_err(|e| e.to_string())?;
    check(
        loaded.target == compass.model.target && loaded.context == compass.model.context,
        || "matrices differ after load".into(),
    )?;
    let txt = dir.path().join("m.txt");
    write_text_vectors(&loaded, MatrixKind::Context, None, &txt).map_err(|e| e.to_string())?;
    let rows = read_text_vectors(&txt).map_err(|e| e.to_string())?;
    check(rows.len() == loaded.vocabulary.len(), || {
        "text export row count".into()
    })?;
    for (term, v) in &rows {
        let orig = loaded.row(term, MatrixKind::Context).unwrap();
        check(orig == v.as_slice(), || {
            format!("{term}: text vector differs")
        })?;
    }
    Ok(format!(
        "{} bytes round-trip; {} text rows exact",
        bytes.len(),
        rows.len()
    ))
}

fn a12_scale() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let store = root.join("store");
    let cands = root.join("candidates.txt");
    common::write_candidates(&cands);
    for (path, date) in common::write_scale_dumps(&root.join("dumps"), 20, 500, 100, 1212) {
        cli(
            &store,
            &[
                "--threads",
                "1",
                "ingest",
                path.to_str().unwrap(),
                "--date",
                &date,
            ],
        )?;
    }
    for cmd in [
        &["phrases"][..],
        &["train"],
        &["tfidf"],
        &["analyze", cands.to_str().unwrap()],
    ] {
        let mut a = vec!["--threads", "1"];
        a.extend_from_slice(cmd);
        cli(&store, &a)?;
    }
    let models = std::fs::read_dir(store.join("models"))
        .map_err(|e| e.to_string())?
        .filter(|e| {
            e.as_ref()
                .is_ok_and(|e| e.path().extension().is_some_and(|x| x == "dsem"))
        })
        .count();
    check(models == 21, || format!("{models} model files"))?;
    within(Duration::from_secs(600), started)?;
    Ok(format!(
        "20 x 500 docs, {models} models in {:.1?}",
        started.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("tf-idf oracle equivalence", a1_tfidf),
        ("pearson oracle equivalence", a2_pearson),
        ("cbow-ns gradient check", a3_gradients),
        ("compass freeze", a4_compass_freeze),
        ("zero-drift calibration", a5_zero_drift),
        ("synthetic drift detection", a6_drift),
        ("classification bands", a7_bands),
        ("eligibility rule", a8_eligibility),
        ("phrase detection", a9_phrases),
        ("end-to-end determinism", a10_determinism),
        ("model persistence", a11_persistence),
        ("pipeline scale check", a12_scale),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
