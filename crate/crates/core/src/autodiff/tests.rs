use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rand_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let v = (0..shape.numel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape, v).unwrap()
}

#[test]
fn matmul_identity_and_hand_values() {
    let mut g = Graph::new();
    let i2 = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let b = g.constant(Tensor::matrix(2, 1, vec![5.0, 6.0]).unwrap());
    let c = g.matmul(i2, b).unwrap();
    assert_eq!(g.value(c), &[5.0, 6.0]);

    let a = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let c = g.matmul(a, b).unwrap();
    assert_eq!(g.value(c), &[17.0, 39.0]);
    assert_eq!(g.shape(c).dims(), &[2, 1]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
    let b = g.constant(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
    let err = g.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2×3]") && err.contains("[2×2]"), "{err}");
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut params = vec![rand_tensor(&mut rng, &[3, 4]), rand_tensor(&mut rng, &[4, 2])];
    let weights = rand_tensor(&mut rng, &[3, 2]);
    let report = grad_check(
        |g, v| {
            let c = g.matmul(v[0], v[1])?;
            let w = g.constant(weights.clone());
            let p = g.mul(c, w)?;
            Ok(g.sum(p))
        },
        &mut params,
        1e-5,
        1e-5,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn relu_sigmoid_values() {
    let mut g = Graph::new();
    let x = g.constant_vec(vec![-1.0, 0.0, 2.0]).unwrap();
    let r = g.relu(x);
    assert_eq!(g.value(r), &[0.0, 0.0, 2.0]);
    let z = g.constant_vec(vec![0.0]).unwrap();
    let s = g.sigmoid(z);
    assert_eq!(g.value(s), &[0.5]);
}

#[test]
fn relu_derivative_at_zero_is_zero() {
    let mut g = Graph::new();
    let x = g.leaf(&Tensor::from_vec(vec![0.0, 1.0, -1.0]).unwrap().with_grad());
    let r = g.relu(x);
    let s = g.sum(r);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
}

#[test]
fn unary_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for op in [Elementwise::Tanh, Elementwise::Sigmoid, Elementwise::Exp] {
        let mut params = vec![rand_tensor(&mut rng, &[6])];
        let w = rand_tensor(&mut rng, &[6]);
        let report = grad_check(
            |g, v| {
                let y = g.elementwise(op, &[v[0]])?;
                let w = g.constant(w.clone());
                let p = g.mul(y, w)?;
                Ok(g.sum(p))
            },
            &mut params,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "{op:?}: {report:?}");
    }
}

#[test]
fn binary_ops_and_scalar_broadcast() {
    let mut g = Graph::new();
    let a = g.constant_vec(vec![1.0, 2.0, 3.0]).unwrap();
    let s = g.constant_vec(vec![2.0]).unwrap();
    let m = g.mul(a, s).unwrap();
    assert_eq!(g.value(m), &[2.0, 4.0, 6.0]);
    let d = g.sub(s, a).unwrap();
    assert_eq!(g.value(d), &[1.0, 0.0, -1.0]);
    let b = g.constant_vec(vec![1.0, 1.0]).unwrap();
    assert!(matches!(g.add(a, b), Err(Error::Shape { .. })));
}

#[test]
fn broadcast_and_structural_ops_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut params = vec![
        rand_tensor(&mut rng, &[3]),
        rand_tensor(&mut rng, &[1]),
        rand_tensor(&mut rng, &[2, 3]),
        rand_tensor(&mut rng, &[3]),
    ];
    let report = grad_check(
        |g, v| {
            let a = g.mul(v[0], v[1])?;
            let b = g.sub(v[1], a)?;
            let m = g.add_row(v[2], v[3])?;
            let mt = g.transpose(m)?;
            let r0 = g.row(mt, 1)?;
            let cat = g.concat(b, r0)?;
            let sl = g.slice(cat, 1, 4)?;
            let st = g.stack_rows(&[sl, sl])?;
            let rs = g.reshape(st, Shape::vector(8))?;
            let sm = g.softmax(rs)?;
            let t = g.tanh(sm);
            let sc = g.scale(t, 3.0);
            let mk = g.mask_mul(sc, vec![1.0, 0.0, 2.0, 1.0, 1.0, 1.0, 0.5, 1.0])?;
            let e = g.exp(mk);
            Ok(g.mean(e))
        },
        &mut params,
        1e-5,
        1e-6,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn softmax_examples() {
    let mut g = Graph::new();
    let u = g.constant_vec(vec![0.0, 0.0, 0.0]).unwrap();
    let s = g.softmax(u).unwrap();
    for &p in g.value(s) {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
    let v = g.constant_vec(vec![2f64.ln(), 0.0]).unwrap();
    let s = g.softmax(v).unwrap();
    assert!((g.value(s)[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((g.value(s)[1] - 1.0 / 3.0).abs() < 1e-15);

    // exp(-1000) ≈ 5.1e-435 is below the smallest subnormal, so the exact
    // answer rounded to f64 is [1, 0].
    let big = g.constant_vec(vec![1000.0, 0.0]).unwrap();
    let s = g.softmax(big).unwrap();
    assert_eq!(g.value(s), &[1.0, 0.0]);
}

#[test]
fn concat_examples() {
    let mut g = Graph::new();
    let a = g.leaf(&Tensor::from_vec(vec![1.0, 2.0]).unwrap().with_grad());
    let b = g.leaf(&Tensor::from_vec(vec![3.0]).unwrap().with_grad());
    let c = g.concat(a, b).unwrap();
    assert_eq!(g.value(c), &[1.0, 2.0, 3.0]);
    let s = g.sum(c);
    g.backward(s).unwrap();
    assert_eq!(g.grad(a).unwrap(), &[1.0, 1.0]);
    assert_eq!(g.grad(b).unwrap(), &[1.0]);

    assert!(matches!(Tensor::from_vec(vec![]), Err(Error::Precondition(_))));
}

#[test]
fn rank2_concat_is_row_wise() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
    let b = g.constant(Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap());
    let c = g.concat(a, b).unwrap();
    assert_eq!(g.value(c), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
}

#[test]
fn backward_sum_and_constants() {
    let mut g = Graph::new();
    let w = g.leaf(&Tensor::from_vec(vec![0.3, -1.0, 2.0]).unwrap().with_grad());
    let k = g.leaf(&Tensor::from_vec(vec![1.0, 1.0, 1.0]).unwrap());
    let p = g.mul(w, k).unwrap();
    let s = g.sum(p);
    g.backward(s).unwrap();
    assert_eq!(g.grad(w).unwrap(), &[1.0, 1.0, 1.0]);
    assert!(g.grad(k).is_none());
}

#[test]
fn backward_accumulates_until_zeroed() {
    let mut g = Graph::new();
    let w = g.leaf(&Tensor::from_vec(vec![1.0, 2.0]).unwrap().with_grad());
    let s = g.sum(w);
    g.backward(s).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(w).unwrap(), &[2.0, 2.0]);
    g.zero_grad();
    assert!(g.grad(w).is_none());
}

#[test]
fn backward_rejects_non_scalar_root() {
    let mut g = Graph::new();
    let w = g.leaf(&Tensor::from_vec(vec![1.0, 2.0]).unwrap().with_grad());
    assert!(matches!(g.backward(w), Err(Error::Contract(_))));
}

fn two_layer_mse(
    g: &mut Graph,
    v: &[Var],
    inputs: &[Tensor],
    targets: &[f64],
) -> Result<Var> {
    let mut losses = Vec::new();
    for (x, &y) in inputs.iter().zip(targets) {
        let x = g.constant(x.clone());
        let h = g.matmul(v[0], x)?;
        let h = g.add(h, v[1])?;
        let h = g.tanh(h);
        let o = g.matmul(v[2], h)?;
        let o = g.add(o, v[3])?;
        let t = g.constant_vec(vec![y])?;
        let d = g.sub(o, t)?;
        let sq = g.mul(d, d)?;
        losses.push(sq);
    }
    let all = g.concat_all(&losses)?;
    Ok(g.mean(all))
}

#[test]
fn two_layer_net_mse_gradients_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let inputs: Vec<Tensor> = (0..8).map(|_| rand_tensor(&mut rng, &[3])).collect();
    let targets: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut params = vec![
        rand_tensor(&mut rng, &[5, 3]),
        rand_tensor(&mut rng, &[5]),
        rand_tensor(&mut rng, &[1, 5]),
        rand_tensor(&mut rng, &[1]),
    ];
    let report = grad_check(
        |g, v| two_layer_mse(g, v, &inputs, &targets),
        &mut params,
        1e-5,
        1e-4,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
    assert_eq!(report.params.len(), 4);
}

#[test]
fn grad_check_linear_model_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = rand_tensor(&mut rng, &[4]);
    let mut params = vec![rand_tensor(&mut rng, &[2, 4]), rand_tensor(&mut rng, &[2])];
    let report = grad_check(
        |g, v| {
            let x = g.constant(x.clone());
            let y = g.matmul(v[0], x)?;
            let y = g.add(y, v[1])?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &mut params,
        1e-5,
        1e-4,
    )
    .unwrap();
    assert!(report.passed);
}

#[test]
fn grad_check_catches_corrupted_matmul_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = rand_tensor(&mut rng, &[4]);
    let mut params = vec![rand_tensor(&mut rng, &[2, 4])];
    CORRUPT_MATMUL_GRAD.with(|c| c.set(true));
    let report = grad_check(
        |g, v| {
            let x = g.constant(x.clone());
            let y = g.matmul(v[0], x)?;
            Ok(g.sum(y))
        },
        &mut params,
        1e-5,
        1e-4,
    );
    CORRUPT_MATMUL_GRAD.with(|c| c.set(false));
    let report = report.unwrap();
    assert!(!report.passed);
    assert!(report.max_rel_error > 0.1, "{}", report.max_rel_error);
}

#[test]
fn grad_check_reports_non_finite_loss() {
    let mut params = vec![Tensor::from_vec(vec![1000.0]).unwrap()];
    let r = grad_check(
        |g, v| {
            let e = g.exp(v[0]);
            Ok(g.sum(e))
        },
        &mut params,
        1e-5,
        1e-4,
    );
    assert!(matches!(r, Err(Error::NonFiniteLoss)));
}

#[test]
fn graph_replay_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inputs: Vec<Tensor> = (0..3).map(|_| rand_tensor(&mut rng, &[3])).collect();
    let targets = vec![0.1, -0.2, 0.3];
    let params = vec![
        rand_tensor(&mut rng, &[5, 3]).with_grad(),
        rand_tensor(&mut rng, &[5]).with_grad(),
        rand_tensor(&mut rng, &[1, 5]).with_grad(),
        rand_tensor(&mut rng, &[1]).with_grad(),
    ];
    let run = || {
        let mut g = Graph::new();
        let v: Vec<Var> = params.iter().map(|p| g.leaf(p)).collect();
        let loss = two_layer_mse(&mut g, &v, &inputs, &targets).unwrap();
        g.backward(loss).unwrap();
        let grads: Vec<Vec<f64>> = v.iter().map(|x| g.grad(*x).unwrap().to_vec()).collect();
        (g.len(), g.op_tags(), g.value(loss)[0].to_bits(), grads)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_eq!(a.3, b.3);
}

#[test]
fn inputs_precede_outputs_in_tape() {
    let mut g = Graph::new();
    let a = g.constant_vec(vec![1.0]).unwrap();
    let b = g.tanh(a);
    let c = g.add(a, b).unwrap();
    assert!(a.index() < b.index() && b.index() < c.index());
    assert_eq!(g.op_tags(), vec!["leaf", "tanh", "add"]);
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-500.0f64..500.0, 1..40)) {
        let mut g = Graph::new();
        let x = g.constant_vec(v).unwrap();
        let s = g.softmax(x).unwrap();
        let out = g.value(s);
        let total: f64 = out.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(out.iter().all(|p| *p >= 0.0 && p.is_finite()));
    }

    #[test]
    fn softmax_gradient_matches(v in prop::collection::vec(-3.0f64..3.0, 2..6), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..v.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut params = vec![Tensor::from_vec(v).unwrap()];
        let report = grad_check(
            |g, p| {
                let s = g.softmax(p[0])?;
                let w = g.constant_vec(w.clone())?;
                let m = g.mul(s, w)?;
                Ok(g.sum(m))
            },
            &mut params,
            1e-5,
            1e-6,
        ).unwrap();
        prop_assert!(report.passed, "{:?}", report);
    }
}
