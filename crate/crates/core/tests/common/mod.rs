//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tslstm::data::{BOS, EOS, RESERVED};
use tslstm::decoder::{teacher_forced_loss, CaptionTokens, Dropout};
use tslstm::encoder::FusedContext;
use tslstm::model::{InitScheme, ModelDims, ModelParams};
use tslstm::tensor::Vector;

pub fn small_dims(words: usize) -> ModelDims {
    ModelDims {
        feature_dim: 3,
        encoder_hidden: 2,
        embed_dim: 4,
        word_hidden: 5,
        mm_hidden: 5,
        vocab_size: RESERVED.len() + words,
    }
}

/// A random model with large enough weights that the output distribution is
/// far from uniform, plus a random fused context.
pub fn random_model(seed: u64, words: usize) -> (ModelParams, FusedContext) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = small_dims(words);
    let p = ModelParams::init(&d, InitScheme { scale: 1.5, forget_bias: 1.0 }, &mut rng);
    let y = Vector::from((0..d.context_dim()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
    (
        p,
        FusedContext {
            y,
            feature_dim: d.feature_dim,
        },
    )
}

/// Summed log-probability of a caption, including EOS.
pub fn caption_log_prob(caption: &CaptionTokens, y: &FusedContext, p: &ModelParams) -> f64 {
    let (loss, _) = teacher_forced_loss(caption, y, p, &mut Dropout::Off).unwrap();
    -loss * caption.num_targets() as f64
}

/// Every caption of at most `max_len` non-reserved words, scored by total
/// log-probability; ties go to the shorter, then lexicographically smaller.
pub fn exhaustive_best(y: &FusedContext, p: &ModelParams, max_len: usize) -> (Vec<usize>, f64) {
    let v = p.dims().vocab_size;
    let words: Vec<usize> = (RESERVED.len()..v).collect();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    let mut best: Option<(Vec<usize>, f64)> = None;
    for len in 0..=max_len {
        for w in &frontier {
            let cap = CaptionTokens::from_words(w, v).unwrap();
            let lp = caption_log_prob(&cap, y, p);
            let better = match &best {
                None => true,
                Some((bt, bl)) => lp > *bl || (lp == *bl && (cap.indices().len(), cap.indices()) < (bt.len(), &bt[..])),
            };
            if better {
                best = Some((cap.indices().to_vec(), lp));
            }
        }
        if len < max_len {
            frontier = frontier
                .iter()
                .flat_map(|w| {
                    words.iter().map(move |&t| {
                        let mut n = w.clone();
                        n.push(t);
                        n
                    })
                })
                .collect();
        }
    }
    let (tokens, lp) = best.unwrap();
    assert_eq!(tokens[0], BOS);
    assert_eq!(*tokens.last().unwrap(), EOS);
    (tokens, lp)
}

pub type Toks = Vec<String>;

/// Random toy corpus: candidates and reference sets over a tiny alphabet.
pub fn random_corpus(seed: u64) -> (Vec<Toks>, Vec<Vec<Toks>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = ["a", "b", "c", "d", "e", "f"];
    let alpha = rng.random_range(2..=alphabet.len());
    let sentence = |rng: &mut ChaCha8Rng| -> Toks {
        let n = rng.random_range(1..=8);
        (0..n).map(|_| alphabet[rng.random_range(0..alpha)].to_string()).collect()
    };
    let items = rng.random_range(1..=6);
    let mut cands = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..items {
        cands.push(sentence(&mut rng));
        let k = rng.random_range(1..=3);
        refs.push((0..k).map(|_| sentence(&mut rng)).collect());
    }
    (cands, refs)
}

fn grams(s: &[String], n: usize) -> Vec<Vec<String>> {
    if s.len() < n {
        return vec![];
    }
    (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    let mut c = 0;
    for x in list {
        if x[..] == *g {
            c += 1;
        }
    }
    c
}

/// Distinct elements in first-occurrence order.
fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for x in list {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

/// Corpus-level clipped precisions `p_1..p_max_n` (0 when nothing to match).
pub fn naive_precisions(cands: &[Toks], refs: &[Vec<Toks>], max_n: usize) -> Vec<f64> {
    (1..=max_n)
        .map(|n| {
            let (mut m, mut t) = (0usize, 0usize);
            for i in 0..cands.len() {
                let cg = grams(&cands[i], n);
                t += cg.len();
                for g in distinct(&cg) {
                    let mx = refs[i].iter().map(|r| count(&grams(r, n), &g)).max().unwrap_or(0);
                    m += count(&cg, &g).min(mx);
                }
            }
            if t == 0 { 0.0 } else { m as f64 / t as f64 }
        })
        .collect()
}

/// Straight-line corpus BLEU with nested loops.
pub fn naive_bleu(cands: &[Toks], refs: &[Vec<Toks>], max_n: usize) -> Vec<f64> {
    let mut c_len = 0usize;
    let mut r_len = 0usize;
    for i in 0..cands.len() {
        c_len += cands[i].len();
        let mut best = refs[i][0].len();
        for r in &refs[i] {
            let d = (r.len() as i64 - cands[i].len() as i64).abs();
            let bd = (best as i64 - cands[i].len() as i64).abs();
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        r_len += best;
    }
    let mut out = Vec::new();
    let mut logs = Vec::new();
    for n in 1..=max_n {
        let mut m = 0usize;
        let mut t = 0usize;
        for i in 0..cands.len() {
            let cg = grams(&cands[i], n);
            t += cg.len();
            for g in distinct(&cg) {
                let mut mx = 0;
                for r in &refs[i] {
                    mx = mx.max(count(&grams(r, n), &g));
                }
                m += count(&cg, &g).min(mx);
            }
        }
        logs.push(if m == 0 { None } else { Some((m as f64 / t as f64).ln()) });
        let bp = if c_len == 0 {
            0.0
        } else if c_len < r_len {
            (1.0 - r_len as f64 / c_len as f64).exp()
        } else {
            1.0
        };
        if logs.iter().any(Option::is_none) {
            out.push(0.0);
        } else {
            let s: f64 = logs.iter().map(|x| x.unwrap()).sum();
            out.push(bp * (s / n as f64).exp());
        }
    }
    out
}

fn vec_cos(a: &[(Vec<String>, f64)], b: &[(Vec<String>, f64)]) -> f64 {
    let na = a.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    for (ga, wa) in a {
        for (gb, wb) in b {
            if ga == gb {
                dot += wa * wb;
            }
        }
    }
    dot / (na * nb)
}

/// Straight-line CIDEr per item, mirroring the documented definition.
pub fn naive_cider(cands: &[Toks], refs: &[Vec<Toks>], max_n: usize) -> Vec<f64> {
    let n_items = cands.len() as f64;
    let mut scores = vec![0.0; cands.len()];
    for n in 1..=max_n {
        let df = |g: &[String]| -> usize {
            let mut d = 0;
            for rs in refs {
                let mut found = false;
                for r in rs {
                    if count(&grams(r, n), g) > 0 {
                        found = true;
                    }
                }
                if found {
                    d += 1;
                }
            }
            d
        };
        let tf = |s: &[String]| -> Vec<(Vec<String>, f64)> {
            let gs = grams(s, n);
            distinct(&gs).into_iter().map(|g| {
                let c = count(&gs, &g) as f64 / gs.len() as f64;
                (g, c)
            }).collect()
        };
        for i in 0..cands.len() {
            let mut sum = 0.0;
            for r in &refs[i] {
                let (tc, tr) = (tf(&cands[i]), tf(r));
                if tc.is_empty() || tr.is_empty() {
                    continue;
                }
                let w = |v: &[(Vec<String>, f64)]| -> Vec<(Vec<String>, f64)> {
                    v.iter().map(|(g, x)| (g.clone(), x * (n_items / df(g).max(1) as f64).ln())).collect()
                };
                let (wc, wr) = (w(&tc), w(&tr));
                let zero = |v: &[(Vec<String>, f64)]| v.iter().all(|x| x.1 == 0.0);
                sum += if zero(&wc) && zero(&wr) { vec_cos(&tc, &tr) } else { vec_cos(&wc, &wr) };
            }
            scores[i] += sum / refs[i].len() as f64;
        }
    }
    scores.into_iter().map(|s| 10.0 * s / max_n as f64).collect()
}
