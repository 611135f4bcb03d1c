#![allow(dead_code)]

use coartic::nn::{ParamSet, Tensor2};
use coartic::seed;
use rand::Rng;

/// Relative error per named tensor between an analytic gradient and
/// central finite differences of `loss` around `params`.
pub fn fd_check<P: ParamSet + Clone>(params: &P, analytic: &P, h: f64, loss: impl Fn(&P) -> f64) -> Vec<(String, f64)> {
    fd_check_with(params, analytic, h, false, loss)
}

/// Like [`fd_check`]; `five_point` selects the fourth-order central stencil.
pub fn fd_check_with<P: ParamSet + Clone>(
    params: &P,
    analytic: &P,
    h: f64,
    five_point: bool,
    loss: impl Fn(&P) -> f64,
) -> Vec<(String, f64)> {
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let grads: Vec<Tensor2> = analytic.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let mut out = Vec::new();
    for (ti, name) in names.iter().enumerate() {
        let len = grads[ti].data().len();
        let mut num = vec![0.0; len];
        for e in 0..len {
            let at = |step: f64| {
                let mut p = params.clone();
                p.tensors_mut()[ti].1.data_mut()[e] += step;
                loss(&p)
            };
            num[e] = if five_point {
                (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
            } else {
                (at(h) - at(-h)) / (2.0 * h)
            };
        }
        out.push((name.clone(), rel_err(&num, grads[ti].data())));
    }
    out
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both are negligible.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

pub fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng, scale: f64) -> Tensor2 {
    Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

pub fn rng(seed: u64) -> seed::Rng {
    seed::rng(seed)
}

pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {criterion:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

/// Every monotone contiguous path through a `ta × tb` grid.
pub fn all_paths(ta: usize, tb: usize) -> Vec<Vec<(usize, usize)>> {
    fn walk(i: usize, j: usize, ta: usize, tb: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        cur.push((i, j));
        if (i, j) == (ta - 1, tb - 1) {
            out.push(cur.clone());
        } else {
            for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
                if i + di < ta && j + dj < tb {
                    walk(i + di, j + dj, ta, tb, cur, out);
                }
            }
        }
        cur.pop();
    }
    let mut out = Vec::new();
    walk(0, 0, ta, tb, &mut Vec::new(), &mut out);
    out
}

/// Squared Euclidean frame cost, computed directly.
pub fn frame_cost(a: &Tensor2, b: &Tensor2, i: usize, j: usize) -> f64 {
    a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `−γ log Σ_paths exp(−cost/γ)` by explicit enumeration.
pub fn soft_min_over_paths(a: &Tensor2, b: &Tensor2, gamma: f64) -> f64 {
    let costs: Vec<f64> = all_paths(a.rows(), b.rows())
        .iter()
        .map(|p| p.iter().map(|&(i, j)| frame_cost(a, b, i, j)).sum())
        .collect();
    let m = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    m - gamma * costs.iter().map(|c| (-(c - m) / gamma).exp()).sum::<f64>().ln()
}

pub fn min_over_paths(a: &Tensor2, b: &Tensor2) -> f64 {
    all_paths(a.rows(), b.rows())
        .iter()
        .map(|p| p.iter().map(|&(i, j)| frame_cost(a, b, i, j)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Central differences of a scalar function of a tensor.
pub fn numeric_grad(x: &Tensor2, h: f64, f: impl Fn(&Tensor2) -> f64) -> Tensor2 {
    let mut g = Tensor2::zeros(x.rows(), x.cols());
    for e in 0..x.data().len() {
        let mut up = x.clone();
        up.data_mut()[e] += h;
        let mut down = x.clone();
        down.data_mut()[e] -= h;
        g.data_mut()[e] = (f(&up) - f(&down)) / (2.0 * h);
    }
    g
}

/// Every sequence of `len` frames whose values are drawn from `grid` in
/// each of `channels` channels.
pub fn grid_sequences(len: usize, channels: usize, grid: &[f64]) -> Vec<Tensor2> {
    let cells = len * channels;
    let total = grid.len().pow(cells as u32);
    (0..total)
        .map(|mut k| {
            let data = (0..cells)
                .map(|_| {
                    let v = grid[k % grid.len()];
                    k /= grid.len();
                    v
                })
                .collect();
            Tensor2::from_vec(len, channels, data).unwrap()
        })
        .collect()
}

pub fn pinned_dict() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmudict-top10k.dict")).unwrap()
}

pub fn pinned_wordlist() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/google-10000-english.txt")).unwrap()
}

pub fn pinned_lexicon(top_n: usize) -> coartic::lexicon::Lexicon {
    coartic::lexicon::parse_lexicon(&pinned_dict(), &pinned_wordlist(), top_n).unwrap()
}

/// All-pairs comparison after collapsing homophones onto the earliest word.
pub fn brute_force_pairs(lex: &coartic::lexicon::Lexicon) -> Vec<(String, String, usize)> {
    let mut kept: Vec<&coartic::lexicon::LexEntry> = Vec::new();
    for e in lex.entries() {
        if !kept.iter().any(|k| k.seq.tokens() == e.seq.tokens()) {
            kept.push(e);
        }
    }
    let mut out = Vec::new();
    for (x, a) in kept.iter().enumerate() {
        for b in &kept[x + 1..] {
            let (ta, tb) = (a.seq.tokens(), b.seq.tokens());
            if ta.len() != tb.len() {
                continue;
            }
            let diffs: Vec<usize> = (0..ta.len()).filter(|&i| ta[i] != tb[i]).collect();
            if diffs.len() == 1 {
                let (wa, wb) = if a.word <= b.word { (&a.word, &b.word) } else { (&b.word, &a.word) };
                out.push((wa.clone(), wb.clone(), diffs[0]));
            }
        }
    }
    out.sort();
    out
}

/// A random `n`-word sub-lexicon, kept in rank order.
pub fn sub_lexicon(lex: &coartic::lexicon::Lexicon, n: usize, seed: u64) -> coartic::lexicon::Lexicon {
    use rand::seq::index::sample;
    let mut r = rng(seed);
    let mut idx = sample(&mut r, lex.len(), n).into_vec();
    idx.sort();
    coartic::lexicon::Lexicon::from_entries(idx.into_iter().map(|i| {
        let e = &lex.entries()[i];
        (e.word.clone(), e.seq.clone())
    }))
}

pub struct Trained {
    pub model: coartic::p2a::P2aModel,
    pub train: Vec<coartic::p2a::TrainItem>,
    pub validation: Vec<coartic::p2a::TrainItem>,
    pub history: coartic::p2a::TrainHistory,
}

/// Training setup used for the oracle experiments: 2-layer bidirectional
/// GRUs of width `hidden`, Adam at 3e-3 with batches of 8, 80/20 split.
pub fn oracle_train_config(epochs: usize) -> coartic::p2a::TrainConfig {
    coartic::p2a::TrainConfig {
        learning_rate: 3e-3,
        batch_size: 8,
        epochs,
        seed: 4,
        ..coartic::p2a::TrainConfig::default()
    }
}

pub fn train_on_oracle(oracle: &coartic::ema::OracleConfig, hidden: usize, epochs: usize) -> Trained {
    use coartic::ema::{fit_stats, synth_oracle, DatasetSplit};
    use coartic::p2a::{prepare_items, train, ModelConfig, P2aModel};
    let ds = synth_oracle(oracle, 1).unwrap();
    let split = DatasetSplit::new(&ds, 0.8, 2).unwrap();
    let stats = fit_stats(&ds, &split).unwrap();
    let tr = prepare_items(&ds, &split.train, &stats).unwrap();
    let va = prepare_items(&ds, &split.validation, &stats).unwrap();
    let cfg = ModelConfig {
        hidden,
        layers: 2,
        embedding: 64,
        layout: oracle.layout.clone(),
    };
    let mut model = P2aModel::new(cfg, stats, 3).unwrap();
    let history = train(&mut model, &tr, &va, &oracle_train_config(epochs)).unwrap();
    Trained {
        model,
        train: tr,
        validation: va,
        history,
    }
}

/// Pairs, lexicon and the noise-free oracle used by the analysis checks.
pub fn oracle_analysis_inputs(
    config: coartic::ema::OracleConfig,
) -> (coartic::ema::OracleArticulator, coartic::lexicon::Lexicon, Vec<coartic::lexicon::MinimalPair>) {
    let lex = pinned_lexicon(10_000);
    let pairs = coartic::lexicon::enumerate_minimal_pairs(&lex);
    (coartic::ema::OracleArticulator::new(config, 21).unwrap(), lex, pairs)
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Two speakers, one sensor, hidden width 4; speaker heads nudged off the
/// identity so their gradients are generic.
pub fn tiny_model(seed: u64) -> coartic::p2a::P2aModel {
    use coartic::ema::{ChannelLayout, SpeakerStats};
    use coartic::p2a::{ModelConfig, P2aModel};
    let layout = ChannelLayout::new(["TT"]);
    let s = layout.feature_channels();
    let stats = ["a", "b"]
        .iter()
        .map(|sp| {
            (
                sp.to_string(),
                SpeakerStats {
                    speaker: sp.to_string(),
                    mean: vec![0.0; s],
                    std: vec![1.0; s],
                },
            )
        })
        .collect();
    let cfg = ModelConfig {
        hidden: 4,
        layers: 2,
        embedding: 3,
        layout,
    };
    let mut model = P2aModel::new(cfg, stats, seed).unwrap();
    let mut r = rng(seed + 100);
    for (_, h) in model.params.speaker_heads.iter_mut() {
        for v in h.w.data_mut() {
            *v += r.random_range(-0.2..0.2);
        }
    }
    model
}

/// Per-tensor relative error of the full model gradient (SDTW plus length
/// penalty, 12 frames, three phonemes) against fourth-order central
/// differences; also returns the analytic gradient.
pub fn end_to_end_errors(model: &coartic::p2a::P2aModel) -> (Vec<(String, f64)>, coartic::p2a::ModelParams) {
    use coartic::alignment::sdtw_grad;
    use coartic::lexicon::PhonemeSequence;
    use coartic::p2a::{ModelParams, P2aModel};
    let seq = PhonemeSequence::parse("P AE T").unwrap();
    let mut r = rng(8);
    let target = random_tensor(10, 4, &mut r, 1.5);
    let frames = 12;
    let penalty = 0.05;
    let loss_of = |params: &ModelParams| {
        let m = P2aModel {
            params: params.clone(),
            ..model.clone()
        };
        let tr = m.forward(&seq, "b", Some(frames)).unwrap();
        let (l, _) = sdtw_grad(&tr.output, &target, 1.0).unwrap();
        let gap = tr.timing.durations.iter().sum::<f64>() - target.rows() as f64;
        l + penalty * gap * gap
    };
    let tr = model.forward(&seq, "b", Some(frames)).unwrap();
    let (_, d_out) = sdtw_grad(&tr.output, &target, 1.0).unwrap();
    let gap = tr.timing.durations.iter().sum::<f64>() - target.rows() as f64;
    let mut g = model.params.zeros_like();
    model.backward(&seq, "b", &tr, &d_out, 2.0 * penalty * gap, &mut g).unwrap();
    (fd_check_with(&model.params, &g, 1e-3, true, loss_of), g)
}
