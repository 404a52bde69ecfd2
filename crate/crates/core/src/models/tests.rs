use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::grad_check;

fn toy(arch: Arch) -> ModelConfig {
    ModelConfig::new(arch, 3, 4, 2).with_dims(5, 5, 2).with_seed(17)
}

fn random_window(rng: &mut ChaCha8Rng, n: usize, tx: usize) -> Tensor {
    Tensor::matrix(n, tx, (0..n * tx).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

fn zero_params(model: &mut Model) {
    for t in model.store_mut().tensors_mut() {
        t.values_mut().fill(0.0);
    }
}

#[test]
fn output_has_ty_entries_for_every_arch() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for arch in Arch::ALL {
        for (n, tx, ty) in [(1, 1, 1), (3, 4, 2), (9, 5, 4)] {
            let cfg = ModelConfig::new(arch, n, tx, ty).with_dims(4, 3, 2);
            let model = Model::new(cfg).unwrap();
            let out = model.predict(&random_window(&mut rng, n, tx)).unwrap();
            assert_eq!(out.y_hat.len(), ty, "{arch}");
        }
    }
}

#[test]
fn zero_parameter_stam_predicts_zero_with_uniform_attention() {
    let mut model = Model::new(toy(Arch::Stam)).unwrap();
    zero_params(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let out = model.predict(&random_window(&mut rng, 3, 4)).unwrap();
    assert_eq!(out.y_hat, vec![0.0, 0.0]);
    for row in &out.attention.spatial {
        row.iter().for_each(|b| assert!((b - 1.0 / 3.0).abs() < 1e-15));
    }
    for row in &out.attention.temporal {
        row.iter().for_each(|a| assert!((a - 0.25).abs() < 1e-15));
    }
}

#[test]
fn zero_embedder_gives_zero_embeddings() {
    let mut model = Model::new(toy(Arch::Stam)).unwrap();
    zero_params(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = model.spatial_embed(&random_window(&mut rng, 3, 4)).unwrap();
    assert_eq!(d.shape().dims(), &[3, 5]);
    assert!(d.values().iter().all(|v| *v == 0.0));
}

#[test]
fn shared_embedder_is_permutation_equivariant() {
    let model = Model::new(toy(Arch::Stam)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_window(&mut rng, 3, 4);
    let mut swapped = x.values().to_vec();
    for t in 0..4 {
        swapped.swap(t, 4 + t);
    }
    let xs = Tensor::matrix(3, 4, swapped).unwrap();
    let (d, ds) = (model.spatial_embed(&x).unwrap(), model.spatial_embed(&xs).unwrap());
    assert_eq!(&d.values()[0..5], &ds.values()[5..10]);
    assert_eq!(&d.values()[5..10], &ds.values()[0..5]);
    assert_eq!(&d.values()[10..], &ds.values()[10..]);
}

#[test]
fn per_variable_embedding_toggle_changes_count() {
    let mut cfg = toy(Arch::Stam);
    cfg.per_variable_embedding = true;
    let model = Model::new(cfg.clone()).unwrap();
    assert_eq!(model.param_total(), param_count(&cfg));
    assert_eq!(
        param_count(&cfg) - param_count(&toy(Arch::Stam)),
        2 * DenseLayerCount::of(4, 5)
    );
    assert!(matches!(
        Model::new(toy(Arch::EncDec)).unwrap().spatial_embed(&Tensor::matrix(3, 4, vec![0.0; 12]).unwrap()),
        Err(Error::UnsupportedArch { .. })
    ));
}

struct DenseLayerCount;
impl DenseLayerCount {
    fn of(i: usize, o: usize) -> usize {
        crate::layers::DenseLayer::param_count(i, o)
    }
}

#[test]
fn zero_parameter_encoder_outputs_zero() {
    let mut model = Model::new(toy(Arch::Stam)).unwrap();
    zero_params(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = model.encode(&random_window(&mut rng, 3, 4)).unwrap();
    assert_eq!(h.shape().dims(), &[4, 5]);
    assert!(h.values().iter().all(|v| *v == 0.0));
}

#[test]
fn encoder_is_causal_for_causal_archs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for arch in [Arch::Stam, Arch::StamLite, Arch::LstmAtt, Arch::EncDec] {
        let model = Model::new(toy(arch)).unwrap();
        let x = random_window(&mut rng, 3, 4);
        let base = model.encode(&x).unwrap();
        for t in 0..4 {
            let mut v = x.values().to_vec();
            for i in 0..3 {
                for tt in t + 1..4 {
                    v[i * 4 + tt] += rng.gen_range(-5.0..5.0);
                }
            }
            let pert = model.encode(&Tensor::matrix(3, 4, v).unwrap()).unwrap();
            let m = 5;
            assert_eq!(&base.values()[..(t + 1) * m], &pert.values()[..(t + 1) * m], "{arch} t={t}");
        }
    }
}

#[test]
fn spatial_attention_single_variable_and_symmetry() {
    let cfg = ModelConfig::new(Arch::Stam, 1, 4, 2).with_dims(5, 5, 2).with_seed(3);
    let Model::Stam(stam) = Model::new(cfg).unwrap() else { unreachable!() };
    let d = Tensor::matrix(1, 5, vec![0.1, -0.2, 0.3, 0.4, -0.5]).unwrap();
    let (beta, g) = stam.spatial_attention(&[0.2; 5], &d).unwrap();
    assert_eq!(beta, vec![1.0]);
    assert_eq!(g, d.values());

    let Model::Stam(stam) = Model::new(toy(Arch::Stam)).unwrap() else { unreachable!() };
    let row = [0.3, -0.1, 0.7, 0.0, 0.2];
    let d = Tensor::matrix(3, 5, row.repeat(3)).unwrap();
    let (beta, _) = stam.spatial_attention(&[0.5, -0.5, 0.1, 0.0, 0.9], &d).unwrap();
    beta.iter().for_each(|b| assert!((b - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn temporal_attention_single_step_and_symmetry() {
    let Model::Stam(stam) = Model::new(toy(Arch::Stam)).unwrap() else { unreachable!() };
    let h = Tensor::matrix(1, 5, vec![0.5, 0.1, -0.3, 0.0, 0.2]).unwrap();
    let (alpha, s) = stam.temporal_attention(&[0.1; 5], &h).unwrap();
    assert_eq!(alpha, vec![1.0]);
    assert_eq!(s, h.values());
    let row = [0.3, -0.1, 0.7, 0.0, 0.2];
    let h = Tensor::matrix(4, 5, row.repeat(4)).unwrap();
    let (alpha, _) = stam.temporal_attention(&[0.5, -0.5, 0.1, 0.0, 0.9], &h).unwrap();
    alpha.iter().for_each(|a| assert!((a - 0.25).abs() < 1e-15));
}

/// Brute-force `relu(wᵀ[q; k_i] + b)` → softmax → weighted sum.
fn brute_attention(w: &[f64], b: f64, q: &[f64], keys: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let e: Vec<f64> = keys
        .iter()
        .map(|k| {
            let z: f64 = q.iter().chain(k).zip(w).map(|(x, w)| x * w).sum::<f64>() + b;
            z.max(0.0)
        })
        .collect();
    let mx = e.iter().cloned().fold(f64::MIN, f64::max);
    let ex: Vec<f64> = e.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = ex.iter().sum();
    let weights: Vec<f64> = ex.iter().map(|v| v / z).collect();
    let mut ctx = vec![0.0; keys[0].len()];
    for (wi, k) in weights.iter().zip(keys) {
        for (c, kv) in ctx.iter_mut().zip(k) {
            *c += wi * kv;
        }
    }
    (weights, ctx)
}

#[test]
fn attention_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let Model::Stam(mut stam) = Model::new(toy(Arch::Stam)).unwrap() else { unreachable!() };
    // push alignment biases up so most energies are active
    for id in [stam.spatial_align.layer.bias, stam.temporal_align.layer.bias] {
        stam.store.get_mut(id).values_mut()[0] = 0.5;
    }
    for (align, n) in [(&stam.spatial_align, 3usize), (&stam.temporal_align, 4usize)] {
        let keys: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let q: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let kt = Tensor::matrix(n, 5, keys.concat()).unwrap();
        let (w, c) = stam::attend_values(&stam.store, align, &q, &kt).unwrap();
        let (bw, bc) = brute_attention(
            stam.store.get(align.layer.weight).values(),
            stam.store.get(align.layer.bias).values()[0],
            &q,
            &keys,
        );
        for (a, b) in w.iter().zip(&bw).chain(c.iter().zip(&bc)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn decode_step_is_deterministic_and_zero_model_is_uniform() {
    let mut model = Model::new(toy(Arch::Stam)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_window(&mut rng, 3, 4);
    let d = model.spatial_embed(&x).unwrap();
    let h = model.encode(&x).unwrap();
    let Model::Stam(stam) = &model else { unreachable!() };
    let s0 = StamState::zeros(5);
    let a = stam.decode_step_values(&s0, &d, &h, 0.3).unwrap();
    let b = stam.decode_step_values(&s0, &d, &h, 0.3).unwrap();
    assert_eq!(a, b);

    zero_params(&mut model);
    let Model::Stam(stam) = &model else { unreachable!() };
    let step = stam.decode_step_values(&s0, &d, &h, 0.0).unwrap();
    assert_eq!(step.y_hat, 0.0);
    step.beta.iter().for_each(|b| assert!((b - 1.0 / 3.0).abs() < 1e-15));
    step.alpha.iter().for_each(|a| assert!((a - 0.25).abs() < 1e-15));
}

#[test]
fn first_decode_step_matches_full_forward() {
    let model = Model::new(toy(Arch::Stam)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = random_window(&mut rng, 3, 4);
    let full = model.predict(&x).unwrap();
    let Model::Stam(stam) = &model else { unreachable!() };
    let d = model.spatial_embed(&x).unwrap();
    let h = model.encode(&x).unwrap();
    let s1 = stam.decode_step_values(&StamState::zeros(5), &d, &h, 0.0).unwrap();
    let s2 = stam.decode_step_values(&s1.state, &d, &h, s1.y_hat).unwrap();
    assert_eq!(full.y_hat, vec![s1.y_hat, s2.y_hat]);
    assert_eq!(full.attention.spatial, vec![s1.beta, s2.beta]);
    assert_eq!(full.attention.temporal, vec![s1.alpha, s2.alpha]);
}

#[test]
fn darnn_single_variable_is_identity_weighting() {
    let cfg = ModelConfig::new(Arch::DaRnn, 1, 4, 2).with_dims(5, 5, 2).with_seed(1);
    let Model::DaRnn(m) = Model::new(cfg).unwrap() else { unreachable!() };
    let x = Tensor::matrix(1, 4, vec![0.3, -1.0, 2.0, 0.5]).unwrap();
    let (xh, betas) = m.weighted_input(&x).unwrap();
    assert_eq!(xh.values(), x.values());
    assert!(betas.iter().all(|b| b == &vec![1.0]));
}

#[test]
fn darnn_weights_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let Model::DaRnn(m) = Model::new(toy(Arch::DaRnn)).unwrap() else { unreachable!() };
    let (_, betas) = m.weighted_input(&random_window(&mut rng, 3, 4)).unwrap();
    assert_eq!(betas.len(), 4);
    for b in betas {
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn darnn_first_weighted_step_sees_the_last_input() {
    let mut changed = 0;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let Model::DaRnn(m) = Model::new(toy(Arch::DaRnn).with_seed(seed)).unwrap() else { unreachable!() };
        let x = random_window(&mut rng, 3, 4);
        let mut v = x.values().to_vec();
        v[3] += 1.0; // x^1 at t = Tx
        let (a, _) = m.weighted_input(&x).unwrap();
        let (b, _) = m.weighted_input(&Tensor::matrix(3, 4, v).unwrap()).unwrap();
        // column 0 is x̂_1
        if (0..3).any(|i| a.values()[i * 4] != b.values()[i * 4]) {
            changed += 1;
        }
    }
    assert_eq!(changed, 5);
}

#[test]
fn param_count_pollution_config() {
    let cfg = ModelConfig::new(Arch::Stam, 9, 5, 3);
    assert_eq!(param_count(&cfg), 24_075);
    assert_eq!(
        5376 + 8320 + 192 + 65 + 65 + 132 + 132 + 4864 + 4864 + 65,
        24_075
    );
    assert_eq!(Model::new(cfg).unwrap().param_total(), 24_075);
}

#[test]
fn param_count_smallest_config_by_hand() {
    let cfg = ModelConfig::new(Arch::Stam, 1, 1, 1).with_dims(1, 1, 1);
    // embed 2, encoder 2×12, aligns 2×3, reducers 2×2, decoders 2×16, head 3
    assert_eq!(param_count(&cfg), 2 + 24 + 6 + 4 + 32 + 3);
    for arch in Arch::ALL {
        let c = ModelConfig { arch, ..cfg.clone() };
        assert_eq!(param_count(&c), Model::new(c).unwrap().param_total(), "{arch}");
    }
}

#[test]
fn param_count_ignores_output_len_and_matches_constructors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let arch = Arch::ALL[rng.gen_range(0..5)];
        let m = rng.gen_range(1..12);
        let cfg = ModelConfig {
            arch,
            n_vars: rng.gen_range(1..10),
            input_len: rng.gen_range(1..8),
            output_len: rng.gen_range(1..6),
            enc_dim: m,
            dec_dim: rng.gen_range(1..12),
            context_dim: rng.gen_range(1..=m),
            dropout_rate: 0.2,
            seed: rng.gen(),
            per_variable_embedding: rng.gen_bool(0.3),
        };
        let other = ModelConfig { output_len: cfg.output_len + 3, ..cfg.clone() };
        assert_eq!(param_count(&cfg), param_count(&other));
        assert_eq!(param_count(&cfg), Model::new(cfg).unwrap().param_total());
    }
}

#[test]
fn flop_estimates() {
    let stam = ModelConfig::new(Arch::Stam, 9, 5, 3);
    assert_eq!(flop_estimate(&stam).unwrap(), 55_040 + 4_116 + 29_952);
    assert_eq!(flop_estimate(&stam).unwrap(), 89_108);
    let lite = ModelConfig { arch: Arch::StamLite, ..stam.clone() };
    assert_eq!(flop_estimate(&lite).unwrap(), 74_132);
    let enc = ModelConfig { arch: Arch::EncDec, ..stam };
    assert!(matches!(flop_estimate(&enc), Err(Error::UnsupportedArch { .. })));
}

#[test]
fn config_validation_names_fields() {
    let mut cfg = toy(Arch::Stam);
    cfg.enc_dim = 1;
    cfg.output_len = 0;
    cfg.dropout_rate = 1.5;
    let Err(Error::InvalidConfig(problems)) = Model::new(cfg) else { panic!() };
    assert_eq!(problems.len(), 3, "{problems:?}");
    assert!(problems.iter().any(|p| p.contains("output_len")));
    assert!(problems.iter().any(|p| p.contains("context_dim")));
    assert!(problems.iter().any(|p| p.contains("dropout_rate")));
}

#[test]
fn forward_rejects_wrong_window_shape() {
    let model = Model::new(toy(Arch::Stam)).unwrap();
    let x = Tensor::matrix(4, 4, vec![0.0; 16]).unwrap();
    assert!(matches!(model.predict(&x), Err(Error::SchemaMismatch(_))));
}

#[test]
fn diverged_model_reports_step() {
    let mut model = Model::new(toy(Arch::StamLite)).unwrap();
    let Model::StamLite(m) = &model else { unreachable!() };
    let head_bias = m.head.bias;
    model.store_mut().get_mut(head_bias).values_mut()[0] = f64::INFINITY;
    let x = Tensor::matrix(3, 4, vec![0.1; 12]).unwrap();
    assert!(matches!(model.predict(&x), Err(Error::DivergedModel { step: 1 })));
}

#[test]
fn eval_forward_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for arch in Arch::ALL {
        let model = Model::new(toy(arch)).unwrap();
        let x = random_window(&mut rng, 3, 4);
        assert_eq!(model.predict(&x).unwrap(), model.predict(&x).unwrap());
    }
}

#[test]
fn same_seed_same_weights() {
    for arch in Arch::ALL {
        let a = Model::new(toy(arch)).unwrap();
        let b = Model::new(toy(arch)).unwrap();
        let c = Model::new(toy(arch).with_seed(99)).unwrap();
        assert_eq!(a.store().tensors(), b.store().tensors());
        assert_ne!(a.store().tensors(), c.store().tensors());
    }
}

#[test]
fn every_arch_passes_grad_check_at_toy_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for arch in Arch::ALL {
        let model = Model::new(toy(arch)).unwrap();
        let x = random_window(&mut rng, 3, 4);
        let target = [0.4, -0.3];
        let mut params = model.store().tensors().to_vec();
        let report = grad_check(
            |g, v| {
                let b = crate::layers::Bindings::from_vars(v.to_vec());
                let tr = model.trace(g, &b, &x, &mut Mode::Eval)?;
                let t = g.constant_vec(target.to_vec())?;
                let d = g.sub(tr.y_hat, t)?;
                let sq = g.mul(d, d)?;
                Ok(g.mean(sq))
            },
            &mut params,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{arch}: {}", report.max_rel_error);
    }
}

mod weight_files {
    use super::*;

    #[test]
    fn round_trip_reproduces_forward_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for arch in Arch::ALL {
            let model = Model::new(toy(arch)).unwrap();
            let path = dir.path().join(format!("{arch}.stw"));
            save_weights(&model, &path).unwrap();
            let loaded = load_weights(&path).unwrap();
            let x = random_window(&mut rng, 3, 4);
            assert_eq!(model.predict(&x).unwrap(), loaded.predict(&x).unwrap());
            assert_eq!(loaded.config(), model.config());
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.stw");
        save_weights(&Model::new(toy(Arch::Stam)).unwrap(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [4, 30, bytes.len() - 3] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(matches!(load_weights(&path), Err(Error::CorruptFile(_))), "cut {cut}");
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.stw");
        save_weights(&Model::new(toy(Arch::Stam)).unwrap(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 7;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_weights(&path),
            Err(Error::VersionMismatch { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn loading_as_another_arch_is_a_config_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.stw");
        save_weights(&Model::new(toy(Arch::EncDec)).unwrap(), &path).unwrap();
        assert!(matches!(
            load_weights_as(&path, &toy(Arch::Stam)),
            Err(Error::ConfigMismatch(_))
        ));
        assert!(load_weights_as(&path, &toy(Arch::EncDec)).is_ok());
    }
}
