mod common;

use coartic::nn::{BiGruStack, Linear, ParamSet, Tensor2};
use coartic::timing::{gaussian_expand, gaussian_expand_backward, TimingParams};
use common::{end_to_end_errors, fd_check, random_tensor, rel_err, rng, tiny_model};

fn weighted_sum(y: &Tensor2, w: &Tensor2) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn assert_all_below(errs: &[(String, f64)], tol: f64) {
    for (name, e) in errs {
        assert!(*e < tol, "{name}: relative error {e:e}");
    }
}

#[test]
fn gru_layer_matches_finite_differences() {
    let mut r = rng(1);
    let stack = BiGruStack::init(3, 4, 1, &mut r);
    let x = random_tensor(3, 3, &mut r, 1.0);
    let w = random_tensor(3, 8, &mut r, 1.0);
    let (_, trace) = stack.forward_trace(&x).unwrap();
    let mut g = stack.zeros_like();
    let dx = stack.backward(&trace, &w, &mut g);
    let errs = fd_check(&stack, &g, 1e-5, |p| weighted_sum(&p.forward(&x).unwrap(), &w));
    assert_eq!(errs.len(), 18);
    assert_all_below(&errs, 1e-4);

    let mut num = vec![0.0; 9];
    for e in 0..9 {
        let mut xp = x.clone();
        xp.data_mut()[e] += 1e-5;
        let mut xm = x.clone();
        xm.data_mut()[e] -= 1e-5;
        num[e] = (weighted_sum(&stack.forward(&xp).unwrap(), &w) - weighted_sum(&stack.forward(&xm).unwrap(), &w)) / 2e-5;
    }
    assert!(rel_err(&num, dx.data()) < 1e-6);
}

#[test]
fn two_layer_stack_matches_finite_differences() {
    let mut r = rng(2);
    let stack = BiGruStack::init(2, 3, 2, &mut r);
    let x = random_tensor(4, 2, &mut r, 1.0);
    let w = random_tensor(4, 6, &mut r, 1.0);
    let (_, trace) = stack.forward_trace(&x).unwrap();
    let mut g = stack.zeros_like();
    stack.backward(&trace, &w, &mut g);
    assert_all_below(&fd_check(&stack, &g, 1e-5, |p| weighted_sum(&p.forward(&x).unwrap(), &w)), 1e-4);
}

#[test]
fn linear_matches_finite_differences() {
    let mut r = rng(3);
    let layer = Linear::init(4, 3, &mut r);
    let x = random_tensor(5, 4, &mut r, 1.0);
    let w = random_tensor(5, 3, &mut r, 1.0);
    let mut g = layer.zeros_like();
    layer.backward(&x, &w, &mut g);
    assert_all_below(&fd_check(&layer, &g, 1e-5, |p| weighted_sum(&p.forward(&x).unwrap(), &w)), 1e-6);
}

#[test]
fn gaussian_expansion_gradients() {
    let mut r = rng(4);
    let tp = TimingParams::new(vec![1.7, 5.2, 9.9], vec![0.8, 1.9, 1.2], vec![3.4, 3.6, 5.0]).unwrap();
    let t = 12;
    let c = random_tensor(t, 3, &mut r, 1.0);
    let m = gaussian_expand(&tp, t).unwrap();
    let (d_mu, d_sigma) = gaussian_expand_backward(&tp, &m, &c);
    let loss = |mu: &[f64], sigma: &[f64]| {
        let tp = TimingParams::new(mu.to_vec(), sigma.to_vec(), tp.durations.clone()).unwrap();
        weighted_sum(&gaussian_expand(&tp, t).unwrap().values, &c)
    };
    let h = 1e-6;
    let mut num_mu = vec![0.0; 3];
    let mut num_sigma = vec![0.0; 3];
    for i in 0..3 {
        let (mut a, mut b) = (tp.mu.clone(), tp.mu.clone());
        a[i] += h;
        b[i] -= h;
        num_mu[i] = (loss(&a, &tp.sigma) - loss(&b, &tp.sigma)) / (2.0 * h);
        let (mut a, mut b) = (tp.sigma.clone(), tp.sigma.clone());
        a[i] += h;
        b[i] -= h;
        num_sigma[i] = (loss(&tp.mu, &a) - loss(&tp.mu, &b)) / (2.0 * h);
    }
    for i in 0..3 {
        assert!((num_mu[i] - d_mu[i]).abs() / d_mu[i].abs().max(1e-3) < 1e-6, "mu {i}");
        assert!((num_sigma[i] - d_sigma[i]).abs() / d_sigma[i].abs().max(1e-3) < 1e-6, "sigma {i}");
    }
}

#[test]
fn timing_head_chain_rule() {
    let mut r = rng(5);
    let raw = random_tensor(4, 2, &mut r, 2.0);
    let cm = [0.3, -1.2, 0.7, 2.0];
    let cs = [1.1, 0.4, -0.6, 0.9];
    let ct = 0.25;
    let loss = |raw: &Tensor2| {
        let tp = TimingParams::from_raw(raw).unwrap();
        let total: f64 = tp.durations.iter().sum();
        (0..4).map(|i| cm[i] * tp.mu[i] + cs[i] * tp.sigma[i]).sum::<f64>() + ct * total
    };
    let d = TimingParams::backward_raw(&raw, &cm, &cs, ct);
    let mut num = vec![0.0; 8];
    for e in 0..8 {
        let mut a = raw.clone();
        a.data_mut()[e] += 1e-6;
        let mut b = raw.clone();
        b.data_mut()[e] -= 1e-6;
        num[e] = (loss(&a) - loss(&b)) / 2e-6;
    }
    assert!(rel_err(&num, d.data()) < 1e-6);
}

#[test]
fn end_to_end_model_gradient() {
    let model = tiny_model(7);
    let (errs, g) = end_to_end_errors(&model);
    assert_all_below(&errs, 1e-3);
    // the unused speaker's head gets nothing
    for (name, t) in g.tensors() {
        if name.starts_with("speaker.a.") {
            assert!(t.data().iter().all(|v| *v == 0.0));
        }
    }
}
