use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::objective::{cbow_loss_and_gradients, CbowExample, CbowGradients};
use super::sampler::NegativeSampler;
use super::{CompassModel, EmbeddingModel, FrozenRole, Matrix, SliceModel, TrainingConfig};
use crate::corpus::sha256_hex;
use crate::error::{Error, Result};
use crate::text::{build_vocabulary, TokenStream, VocabEntry, Vocabulary};

#[derive(Debug, Clone, Copy)]
struct Updates {
    target: bool,
    context: bool,
}

/// Trains the atemporal model on every snapshot's documents concatenated.
/// Deterministic for a fixed seed.
pub fn train_compass(corpus: &[TokenStream], config: &TrainingConfig) -> Result<CompassModel> {
    config.validate()?;
    let vocabulary = build_vocabulary(corpus, config.min_count)?;
    if vocabulary.len() < 2 {
        return Err(Error::EmptyVocabulary(config.min_count));
    }
    let dim = config.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut context = Matrix::zeros(vocabulary.len(), dim);
    for v in context.as_mut_slice() {
        *v = (rng.random::<f32>() - 0.5) / dim as f32;
    }
    let mut target = Matrix::zeros(vocabulary.len(), dim);
    let docs: Vec<Vec<u32>> = corpus.iter().map(|d| vocabulary.encode(d)).collect();
    run_sgd(
        &mut target,
        &mut context,
        &vocabulary,
        &docs,
        config,
        Updates {
            target: true,
            context: true,
        },
        &mut rng,
    )
    .map_err(|e| annotate(e, "compass"))?;
    Ok(CompassModel {
        model: EmbeddingModel::new(vocabulary, target, context)?,
        config: config.clone(),
    })
}

/// Per-slice seed derived from the run seed and the snapshot id, so results
/// do not depend on the order or parallelism of slice training.
fn slice_seed(seed: u64, snapshot_id: &str) -> u64 {
    let digest = sha256_hex(snapshot_id.as_bytes());
    let h = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
    seed ^ h
}

/// Slice vocabulary: compass terms reaching `min_count` in this snapshot.
fn slice_vocabulary(
    corpus: &[TokenStream],
    compass: &Vocabulary,
    min_count: u64,
) -> Result<Vocabulary> {
    let mut counts: HashMap<usize, (u64, u64)> = HashMap::new();
    let mut seen = Vec::new();
    for doc in corpus {
        seen.clear();
        for tok in doc.iter() {
            if let Some(id) = compass.id(tok) {
                let e = counts.entry(id).or_insert((0, 0));
                e.0 += 1;
                if !seen.contains(&id) {
                    seen.push(id);
                    e.1 += 1;
                }
            }
        }
    }
    let mut entries: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count)
        .map(|(id, (count, doc_freq))| VocabEntry {
            term: compass.term(id).to_string(),
            count,
            doc_freq,
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    Vocabulary::from_entries(entries, min_count)
}

/// Trains one slice from the compass with the frozen matrix held fixed.
/// Tokens outside the compass vocabulary are dropped.
pub fn train_slice(
    snapshot_id: &str,
    corpus: &[TokenStream],
    compass: &CompassModel,
    config: &TrainingConfig,
) -> Result<SliceModel> {
    config.validate()?;
    if config.dimension != compass.model.dim() {
        return Err(Error::Config(format!(
            "dimension {} does not match compass dimension {}",
            config.dimension,
            compass.model.dim()
        )));
    }
    let vocabulary = slice_vocabulary(corpus, compass.vocabulary(), config.min_count)
        .map_err(|e| annotate(e, snapshot_id))?;
    let dim = config.dimension;
    let mut target = Matrix::zeros(vocabulary.len(), dim);
    let mut context = Matrix::zeros(vocabulary.len(), dim);
    for (i, entry) in vocabulary.entries().iter().enumerate() {
        let cid = compass
            .vocabulary()
            .id(&entry.term)
            .expect("slice term in compass");
        target.row_mut(i).copy_from_slice(compass.target().row(cid));
        context
            .row_mut(i)
            .copy_from_slice(compass.context().row(cid));
    }
    let docs: Vec<Vec<u32>> = corpus.iter().map(|d| vocabulary.encode(d)).collect();
    let updates = match config.frozen {
        FrozenRole::Target => Updates {
            target: false,
            context: true,
        },
        FrozenRole::Context => Updates {
            target: true,
            context: false,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(slice_seed(config.seed, snapshot_id));
    run_sgd(
        &mut target,
        &mut context,
        &vocabulary,
        &docs,
        config,
        updates,
        &mut rng,
    )
    .map_err(|e| annotate(e, snapshot_id))?;
    Ok(SliceModel {
        snapshot_id: snapshot_id.to_string(),
        model: EmbeddingModel::new(vocabulary, target, context)?,
        frozen: config.frozen,
    })
}

/// Trains slices concurrently on `config.threads` workers.
/// Each slice has its own seed, so output is identical for any thread count.
pub fn train_slices(
    snapshots: &[(String, Vec<TokenStream>)],
    compass: &CompassModel,
    config: &TrainingConfig,
) -> Result<Vec<SliceModel>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        snapshots
            .par_iter()
            .map(|(id, docs)| train_slice(id, docs, compass, config))
            .collect()
    })
}

fn annotate(e: Error, what: &str) -> Error {
    match e {
        Error::Diverged(m) => Error::Diverged(format!("{what}: {m}")),
        other => other,
    }
}

fn keep_probability(count: u64, total: u64, threshold: f64) -> f64 {
    let f = count as f64 / total as f64;
    (((f / threshold).sqrt() + 1.0) * threshold / f).min(1.0)
}

#[allow(clippy::too_many_arguments)]
fn run_sgd(
    target: &mut Matrix,
    context: &mut Matrix,
    vocabulary: &Vocabulary,
    docs: &[Vec<u32>],
    config: &TrainingConfig,
    updates: Updates,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let dim = target.dim();
    let sampler = NegativeSampler::new(vocabulary.counts());
    let total_count = vocabulary.total_count();
    let keep: Option<Vec<f64>> = config.subsample.map(|t| {
        vocabulary
            .counts()
            .map(|c| keep_probability(c, total_count, t))
            .collect()
    });
    let words_per_epoch: usize = docs.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * config.epochs).max(1) as f32;
    let lr0 = config.learning_rate;
    let lr_min = config.min_learning_rate;

    let mut grads = CbowGradients::<f32>::new(dim);
    let mut ctx: Vec<u32> = Vec::with_capacity(2 * config.window);
    let mut negs: Vec<u32> = Vec::with_capacity(config.negatives);
    let mut kept: Vec<(usize, u32)> = Vec::new();
    let mut processed = 0usize;

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0f64;
        let mut examples = 0usize;
        for doc in docs {
            kept.clear();
            for (pos, &id) in doc.iter().enumerate() {
                let retain = match &keep {
                    Some(p) => rng.random::<f64>() < p[id as usize],
                    None => true,
                };
                if retain {
                    kept.push((pos, id));
                }
            }
            for k in 0..kept.len() {
                let (pos, center) = kept[k];
                let progress = (processed + pos) as f32 / total_words;
                let lr = (lr0 - (lr0 - lr_min) * progress).max(lr_min);

                ctx.clear();
                let lo = k.saturating_sub(config.window);
                let hi = (k + config.window + 1).min(kept.len());
                ctx.extend((lo..hi).filter(|&j| j != k).map(|j| kept[j].1));
                if ctx.is_empty() {
                    continue;
                }
                negs.clear();
                for _ in 0..config.negatives {
                    let n = sampler.sample(rng);
                    if n != center {
                        negs.push(n);
                    }
                }

                let example = CbowExample {
                    center,
                    context: &ctx,
                    negatives: &negs,
                };
                let loss = cbow_loss_and_gradients(
                    target.as_slice(),
                    context.as_slice(),
                    dim,
                    example,
                    &mut grads,
                );
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss {loss} at epoch {epoch}, example {examples}"
                    )));
                }
                epoch_loss += loss as f64;
                examples += 1;

                if updates.target {
                    for (slot, id) in example.output_ids().enumerate() {
                        let g = grads.target_slot(slot);
                        for (w, &gi) in target.row_mut(id as usize).iter_mut().zip(g) {
                            *w -= lr * gi;
                        }
                    }
                }
                if updates.context {
                    let step = lr * grads.context_scale(ctx.len());
                    for &j in &ctx {
                        for (w, &gi) in context.row_mut(j as usize).iter_mut().zip(&grads.hidden) {
                            *w -= step * gi;
                        }
                    }
                }
            }
            processed += doc.len();
        }
        log::debug!(
            "epoch {epoch}: mean loss {:.5} over {examples} examples",
            epoch_loss / examples.max(1) as f64
        );
    }
    if !(target.all_finite() && context.all_finite()) {
        return Err(Error::Diverged("non-finite weights after training".into()));
    }
    Ok(())
}
