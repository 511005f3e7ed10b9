mod common;

use dcap::attention::{init_multi_head, multi_head, MultiHeadParams};
use dcap::crossnet::{adaptive_avg_pool, pair_products, ProductKind};
use dcap::featurestore::{build_vocabulary, split_dataset, split_sizes, EncodedSample, FieldKind};
use dcap::model::{Model, ModelConfig, ModelKind};
use dcap::numerics::{Tape, Tensor, Var};
use dcap::params::ParamStore;
use dcap::trainer::{auc, AdamState};
use dcap::verify::{finite_diff_grad, norm_relative_error};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::brute_force_auc;

fn tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-2.0..2.0f64, n).prop_map(move |d| Tensor::new(shape.clone(), d).unwrap())
}

fn matrix(max: usize) -> impl Strategy<Value = Tensor> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| tensor(vec![r, c]))
}

/// Backward pass of `sum(op(x) * w)` against central differences, where
/// `w` is a fixed weighting so every output coordinate matters.
fn grad_error(x: &Tensor, op: impl Fn(&mut Tape, Var) -> Var) -> f64 {
    let weighting = |tape: &mut Tape, y: Var| {
        let shape = tape.value(y).shape().to_vec();
        let n: usize = shape.iter().product();
        let w = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let w = tape.constant(Tensor::new(shape, w).unwrap());
        let p = tape.mul(y, w).unwrap();
        tape.sum_all(p)
    };
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let y = op(&mut tape, v);
    let root = weighting(&mut tape, y);
    let analytic = tape.backward(root).unwrap().wrt(v);
    let numeric = finite_diff_grad(
        |p| {
            let mut t = Tape::new();
            let v = t.param(Tensor::new(x.shape().to_vec(), p.to_vec()).unwrap());
            let y = op(&mut t, v);
            let r = weighting(&mut t, y);
            Ok(t.value(r).data()[0])
        },
        x.data(),
        1e-5,
    )
    .unwrap();
    norm_relative_error(analytic.data(), &numeric)
}

const GRAD_TOL: f64 = 1e-6;

fn within_tolerance(err: f64) -> Result<(), TestCaseError> {
    prop_assert!(err < GRAD_TOL, "relative gradient error {:e}", err);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_rows_sum_to_one(x in matrix(6)) {
        let s = x.softmax_rows();
        for row in s.data().chunks(x.shape()[1]) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn matmul_is_associative((a, b, c) in (1..5usize, 1..5usize, 1..5usize, 1..5usize)
        .prop_flat_map(|(m, k, p, q)| (tensor(vec![m, k]), tensor(vec![k, p]), tensor(vec![p, q])))) {
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
    }

    #[test]
    fn concat_then_split_is_identity((a, b) in (1..4usize, 1..4usize, 1..4usize)
        .prop_flat_map(|(r, c1, c2)| (tensor(vec![r, c1]), tensor(vec![r, c2])))) {
        let joined = Tensor::concat(&[&a, &b], 1).unwrap();
        let parts = joined.split(1, &[a.shape()[1], b.shape()[1]]).unwrap();
        prop_assert_eq!(&parts[0], &a);
        prop_assert_eq!(&parts[1], &b);
    }

    #[test]
    fn matmul_gradient((a, b) in (1..4usize, 1..4usize, 1..4usize)
        .prop_flat_map(|(m, k, p)| (tensor(vec![m, k]), tensor(vec![k, p])))) {
        let b2 = b.clone();
        within_tolerance(grad_error(&a, move |t, v| { let c = t.constant(b2.clone()); t.matmul(v, c).unwrap() }))?;
        let a2 = a.clone();
        within_tolerance(grad_error(&b, move |t, v| { let c = t.constant(a2.clone()); t.matmul(c, v).unwrap() }))?;
    }

    #[test]
    fn batched_matmul_gradient((a, b) in (1..3usize, 1..4usize, 1..4usize, 1..4usize)
        .prop_flat_map(|(bt, m, k, p)| (tensor(vec![bt, m, k]), tensor(vec![bt, k, p])))) {
        let b2 = b.clone();
        within_tolerance(grad_error(&a, move |t, v| { let c = t.constant(b2.clone()); t.matmul(v, c).unwrap() }))?;
        within_tolerance(grad_error(&a, |t, v| { let tr = t.transpose(v).unwrap(); t.matmul(v, tr).unwrap() }))?;
    }

    #[test]
    fn elementwise_gradients(x in matrix(4)) {
        within_tolerance(grad_error(&x, |t, v| t.mul(v, v).unwrap()))?;
        within_tolerance(grad_error(&x, |t, v| { let s = t.scale(v, -1.5); t.sub(s, v).unwrap() }))?;
        within_tolerance(grad_error(&x, |t, v| t.sigmoid(v)))?;
        within_tolerance(grad_error(&x, |t, v| t.softmax_rows(v)))?;
    }

    #[test]
    fn relu_gradient_away_from_kink(x in matrix(4)) {
        prop_assume!(x.data().iter().all(|v| v.abs() > 1e-3));
        within_tolerance(grad_error(&x, |t, v| t.relu(v)))?;
    }

    #[test]
    fn reduction_and_broadcast_gradients(x in (1..3usize, 1..5usize, 1..4usize).prop_flat_map(|(b, r, c)| tensor(vec![b, r, c]))) {
        within_tolerance(grad_error(&x, |t, v| t.sum(v, 2).unwrap()))?;
        within_tolerance(grad_error(&x, |t, v| t.sum(v, 1).unwrap()))?;
        within_tolerance(grad_error(&x, |t, v| { let s = t.sum(v, 2).unwrap(); t.scale_rows(v, s).unwrap() }))?;
        let c = x.shape()[2];
        within_tolerance(grad_error(&x, move |t, v| {
            let b = t.constant(Tensor::new(vec![c], (0..c).map(|i| i as f64).collect()).unwrap());
            let y = t.add_bias(v, b).unwrap();
            t.mul(y, v).unwrap()
        }))?;
    }

    #[test]
    fn pooling_and_row_gradients(x in (3..8usize, 1..4usize).prop_flat_map(|(m, c)| tensor(vec![2, m, c])), target in 1..4usize) {
        let m = x.shape()[1];
        let target = target.min(m);
        within_tolerance(grad_error(&x, move |t, v| t.adaptive_avg_pool(v, target).unwrap()))?;
        within_tolerance(grad_error(&x, move |t, v| t.select_rows(v, &[m - 1, 0, m - 1]).unwrap()))?;
        within_tolerance(grad_error(&x, |t, v| { let r = t.reshape(v, &[2, m * x.shape()[2]]).unwrap(); t.concat(&[r, r], 1).unwrap() }))?;
    }

    #[test]
    fn gather_and_logloss_gradients(x in (2..6usize, 1..4usize).prop_flat_map(|(v, d)| tensor(vec![v, d])), ids in prop::collection::vec(0..2usize, 1..6)) {
        within_tolerance(grad_error(&x, move |t, v| t.gather(v, &ids).unwrap()))?;
        within_tolerance(grad_error(&x, |t, v| {
            let p = t.sigmoid(v);
            let n = t.value(p).numel();
            let p = t.reshape(p, &[n]).unwrap();
            let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            t.logloss(p, &labels).unwrap()
        }))?;
    }

    #[test]
    fn pair_product_gradients(x in (3..5usize, 1..4usize).prop_flat_map(|(n, d)| tensor(vec![n, d])), outer in any::<bool>()) {
        let kind = if outer { ProductKind::Outer } else { ProductKind::Inner };
        within_tolerance(grad_error(&x, move |t, v| pair_products(t, v, v, kind).unwrap()))?;
    }

    #[test]
    fn pooling_restores_rows_and_preserves_constants(n in 3..8usize, d in 1..4usize, c in -2.0..2.0f64) {
        let m = n * (n - 1) / 2;
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::full(&[m, d], c).unwrap());
        let pooled = adaptive_avg_pool(&mut tape, p, n).unwrap();
        prop_assert_eq!(tape.value(pooled).shape(), &[n, d]);
        prop_assert!(tape.value(pooled).data().iter().all(|&v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn attention_is_row_stochastic_and_permutation_equivariant(n in 2..6usize, heads in prop::sample::select(vec![1usize, 2, 4]), seed in any::<u64>()) {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = dcap::params::uniform(&[n, d], 2.0, &mut rng).unwrap();
        let weights = init_multi_head(d, heads, &mut rng).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();

        let run = |x: &Tensor| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let vars: Vec<_> = weights.iter().map(|w| tape.constant(w.clone())).collect();
            let params = MultiHeadParams::from_vars(&vars).unwrap();
            let out = multi_head(&mut tape, xv, &params, None).unwrap();
            let rows: Vec<f64> = out.weights.iter().flat_map(|&w| tape.value(w).data().chunks(n).map(|r| r.iter().sum::<f64>()).collect::<Vec<_>>()).collect();
            (tape.value(out.z).clone(), rows)
        };
        let (z, sums) = run(&x);
        prop_assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-9));

        let rows: Vec<Vec<f64>> = x.data().chunks(d).map(<[f64]>::to_vec).collect();
        let permuted = Tensor::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
        let (zp, _) = run(&permuted);
        for (k, &i) in perm.iter().enumerate() {
            for c in 0..d {
                prop_assert!((zp.data()[k * d + c] - z.data()[i * d + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auc_matches_brute_force(pairs in prop::collection::vec((0..10u8, 0..2u8), 2..200)) {
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        prop_assert_eq!(auc(&scores, &labels).unwrap(), brute_force_auc(&scores, &labels));
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(pairs in prop::collection::vec((-3.0..3.0f64, 0..2u8), 2..100), a in 0.1..5.0f64, b in -5.0..5.0f64) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let base = auc(&scores, &labels).unwrap();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        prop_assert_eq!(auc(&exp, &labels).unwrap(), base);
        prop_assert_eq!(auc(&affine, &labels).unwrap(), base);
    }

    #[test]
    fn split_partitions_the_samples(n in 10..400usize, seed in any::<u64>()) {
        let samples: Vec<EncodedSample> = (0..n).map(|i| EncodedSample::new(vec![i], (i % 2) as u8)).collect();
        let s = split_dataset(&samples, seed).unwrap();
        let (tr, va, te) = split_sizes(n);
        prop_assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (tr, va, te));
        let mut ids: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).map(|x| x.feature_ids[0]).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn vocabulary_round_trips(tokens in prop::collection::vec("[a-e]{1,3}", 1..60), min in 1..4usize) {
        let schema = build_vocabulary(tokens.iter().map(String::as_str), "f", FieldKind::Categorical, min).unwrap();
        for t in &tokens {
            let id = schema.encode(Some(t));
            match schema.decode(id) {
                Some(back) => prop_assert_eq!(back, t.as_str()),
                None => {
                    prop_assert_eq!(id, schema.unknown_index());
                    prop_assert!(tokens.iter().filter(|u| *u == t).count() < min);
                }
            }
        }
        prop_assert_eq!(schema.encode(Some("zzzz")), schema.unknown_index());
        prop_assert_eq!(schema.encode(None), schema.unknown_index());
    }

    #[test]
    fn fm_pair_term_matches_explicit_sum(seed in any::<u64>()) {
        let mut c = ModelConfig::new(ModelKind::Fm, vec![3, 4, 2, 5]);
        c.embedding_dim = 3;
        c.seed = seed;
        let model = Model::new(c).unwrap();
        let Model::Fm(fm) = &model else { unreachable!() };
        let ids = [2, 1, 0, 4];
        let latent: Vec<&Tensor> = fm.latent_slots().map(|s| model.params().get(s)).collect();
        let v = |f: usize| &latent[f].data()[ids[f] * 3..ids[f] * 3 + 3];
        let mut explicit = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                explicit += v(i).iter().zip(v(j)).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        // linear part is zero at initialization
        let p = model.predict(&[EncodedSample::new(ids.to_vec(), 1)], 1).unwrap()[0];
        prop_assert!((p - 1.0 / (1.0 + (-explicit).exp())).abs() < 1e-12);
    }

    #[test]
    fn eval_is_deterministic_and_probabilities_are_open(seed in any::<u64>(), kind in prop::sample::select(vec![ModelKind::Dcap, ModelKind::Lr, ModelKind::Fm])) {
        let mut c = ModelConfig::new(kind, vec![4, 3, 5]);
        c.embedding_dim = 4;
        c.heads = 2;
        c.hidden = vec![6];
        c.seed = seed;
        let mut model = Model::new(c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in model.params_mut().tensors_mut() {
            *t = dcap::params::uniform(t.shape(), 1.0, &mut rng).unwrap();
        }
        let batch: Vec<EncodedSample> = (0..7).map(|i| EncodedSample::new(vec![i % 4, i % 3, i % 5], 0)).collect();
        let a = model.predict(&batch, 3).unwrap();
        let b = model.predict(&batch, 7).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn adam_leaves_zero_gradient_parameters_alone(w in prop::collection::vec(-2.0..2.0f64, 1..8), g in prop::collection::vec(-1.0..1.0f64, 1..8), steps in 1..20usize) {
        let mut store = ParamStore::new();
        store.push("touched", Tensor::vector(g.iter().map(|_| 0.5).collect()).unwrap());
        store.push("untouched", Tensor::vector(w.clone()).unwrap());
        let mut adam = AdamState::new(&store, 1e-3, 0.0).unwrap();
        for _ in 0..steps {
            let grads = vec![Tensor::vector(g.clone()).unwrap(), Tensor::zeros(&[w.len()]).unwrap()];
            adam.step(&mut store, &grads).unwrap();
        }
        prop_assert_eq!(store.get(1).data(), w.as_slice());
    }
}
