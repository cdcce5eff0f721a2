//! Central finite-difference oracles for every differentiable operation and
//! for the full model + total loss, in double precision.

use lnet::data::synthetic::synthetic_dataset;
use lnet::loss::ClassBalanceTable;
use lnet::nn::{build_model, Variant};
use lnet::tensor::check::finite_difference_check;
use lnet::tensor::tape::Tape;
use lnet::tensor::Tensor;
use lnet::train::model_config_for;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-3;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Pushes paired/windowed values apart so no max tie sits within the FD
/// probe radius.
fn separate(data: &mut [f64], margin: f64) {
    for i in 0..data.len() {
        for j in (i + 1)..data.len() {
            if (data[i] - data[j]).abs() < margin {
                data[j] += if data[j] >= data[i] { margin } else { -margin };
            }
        }
    }
}

/// FD-checks d(projection·op(inputs))/d(inputs[target]) against the tape.
fn check_op(
    inputs: &[Tensor<f64>],
    target: usize,
    op: impl Fn(&mut Tape<f64>, &[lnet::tensor::tape::Var]) -> lnet::tensor::tape::Var,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let mut run = |tensors: &[Tensor<f64>]| -> (f64, Vec<f64>) {
        let mut tape = Tape::new();
        let vars: Vec<_> = tensors
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i == target {
                    tape.leaf(&t.clone().with_requires_grad())
                } else {
                    tape.constant(t)
                }
            })
            .collect();
        let out = op(&mut tape, &vars);
        // Fixed random projection makes the output scalar.
        let proj_len = tape.value(out).len();
        let mut proj_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let proj: Vec<f64> = (0..proj_len).map(|_| proj_rng.gen_range(-1.0..1.0)).collect();
        let proj_t = Tensor::new(tape.shape(out).to_vec(), proj).unwrap();
        let pv = tape.constant(&proj_t);
        let prod = tape.mul(out, pv).unwrap();
        let loss = tape.sum(prod).unwrap();
        tape.backward(loss).unwrap();
        let value = tape.value(loss)[0];
        let grad = tape.grad(vars[target]).unwrap().to_vec();
        (value, grad)
    };
    let _ = &mut rng;
    let (_, analytic) = run(inputs);
    let x = inputs[target].clone();
    finite_difference_check(
        |probe| {
            let mut tensors = inputs.to_vec();
            tensors[target] = probe.clone();
            Ok(run(&tensors).0)
        },
        &x,
        &analytic,
        EPS,
    )
    .unwrap()
}

#[test]
fn depthwise_conv_gradients() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rand_tensor(&mut rng, vec![2, 5, 5]);
        let kernel = rand_tensor(&mut rng, vec![2, 3, 3]);
        let bias = rand_tensor(&mut rng, vec![2]);
        let inputs = vec![input, kernel, bias];
        for target in 0..3 {
            let err = check_op(
                &inputs,
                target,
                |tape, v| tape.conv2d_depthwise(v[0], v[1], Some(v[2]), 1).unwrap(),
                seed,
            );
            assert!(err < TOL, "seed {seed} target {target}: err {err}");
        }
    }
}

#[test]
fn pointwise_conv_gradients() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rand_tensor(&mut rng, vec![4, 3, 3]);
        let kernel = rand_tensor(&mut rng, vec![3, 4]);
        let bias = rand_tensor(&mut rng, vec![3]);
        let inputs = vec![input, kernel, bias];
        for target in 0..3 {
            let err = check_op(&inputs, target, |tape, v| tape.conv2d_pointwise(v[0], v[1], Some(v[2])).unwrap(), seed);
            assert!(err < TOL, "seed {seed} target {target}: err {err}");
        }
    }
}

#[test]
fn standard_conv_gradients() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rand_tensor(&mut rng, vec![2, 4, 4]);
        let kernel = rand_tensor(&mut rng, vec![3, 2, 3, 3]);
        let bias = rand_tensor(&mut rng, vec![3]);
        let inputs = vec![input, kernel, bias];
        for target in 0..3 {
            let err = check_op(&inputs, target, |tape, v| tape.conv2d_standard(v[0], v[1], Some(v[2]), 1).unwrap(), seed);
            assert!(err < TOL, "seed {seed} target {target}: err {err}");
        }
    }
}

#[test]
fn mfm_gradients_away_from_ties() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut input = rand_tensor(&mut rng, vec![4, 3, 3]);
        // Separate each (i, i+C/2) pair by more than the probe radius.
        let plane = 9;
        for i in 0..2 {
            for p in 0..plane {
                let a = input.data()[i * plane + p];
                let b = input.data()[(i + 2) * plane + p];
                if (a - b).abs() < 10.0 * EPS {
                    input.data_mut()[(i + 2) * plane + p] += 1e-3;
                }
            }
        }
        let err = check_op(&[input], 0, |tape, v| tape.mfm_max(v[0]).unwrap(), seed);
        assert!(err < TOL, "seed {seed}: err {err}");
    }
}

#[test]
fn mfm_gradient_routes_to_winner_only() {
    // ch0 = [[1,5]], ch1 = [[3,2]] → winners: ch1 at (0,0), ch0 at (0,1).
    let input = Tensor::new(vec![2, 1, 2], vec![1.0, 5.0, 3.0, 2.0]).unwrap().with_requires_grad();
    let mut tape = Tape::new();
    let v = tape.leaf(&input);
    let out = tape.mfm_max(v).unwrap();
    let loss = tape.sum(out).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(v).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
}

#[test]
fn mfm_tie_goes_to_lower_index_channel() {
    let input = Tensor::new(vec![2, 1, 1], vec![2.0, 2.0]).unwrap().with_requires_grad();
    let mut tape = Tape::new();
    let v = tape.leaf(&input);
    let out = tape.mfm_max(v).unwrap();
    let loss = tape.sum(out).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(v).unwrap(), &[1.0, 0.0]);
}

#[test]
fn maxpool_gradients_away_from_ties() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut input = rand_tensor(&mut rng, vec![2, 4, 4]);
        // Separate every 2×2 window's values.
        for c in 0..2 {
            for oy in 0..2 {
                for ox in 0..2 {
                    let idx: Vec<usize> = (0..4)
                        .map(|k| c * 16 + (2 * oy + k / 2) * 4 + 2 * ox + k % 2)
                        .collect();
                    let mut vals: Vec<f64> = idx.iter().map(|&i| input.data()[i]).collect();
                    separate(&mut vals, 10.0 * EPS);
                    for (k, &i) in idx.iter().enumerate() {
                        input.data_mut()[i] = vals[k];
                    }
                }
            }
        }
        let err = check_op(&[input], 0, |tape, v| tape.maxpool2x2(v[0]).unwrap(), seed);
        assert!(err < TOL, "seed {seed}: err {err}");
    }
}

#[test]
fn crop_and_linear_gradients() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rand_tensor(&mut rng, vec![2, 3, 3]);
        let err = check_op(&[input], 0, |tape, v| tape.crop2d(v[0], 2, 2).unwrap(), seed);
        assert!(err < TOL, "crop seed {seed}: err {err}");

        let x = rand_tensor(&mut rng, vec![6]);
        let w = rand_tensor(&mut rng, vec![4, 6]);
        let b = rand_tensor(&mut rng, vec![4]);
        let inputs = vec![x, w, b];
        for target in 0..3 {
            let err = check_op(&inputs, target, |tape, v| tape.linear(v[0], v[1], v[2]).unwrap(), seed);
            assert!(err < TOL, "linear seed {seed} target {target}: err {err}");
        }
    }
}

#[test]
fn cb_ce_batch_gradients() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0 = rand_tensor(&mut rng, vec![5]);
        let z1 = rand_tensor(&mut rng, vec![5]);
        let labels = [rng.gen_range(0..5), rng.gen_range(0..5)];
        let weights = [rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)];
        let tau = 3.0;
        for target in 0..2 {
            let inputs = vec![z0.clone(), z1.clone()];
            let labels = labels;
            let err = check_op(
                &inputs,
                target,
                move |tape, v| tape.cb_ce_batch(&[v[0], v[1]], &labels, &weights, tau).unwrap(),
                seed,
            );
            assert!(err < TOL, "seed {seed} target {target}: err {err}");
        }
    }
}

#[test]
fn skd_kl_batch_gradients_and_constant_teacher() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0 = rand_tensor(&mut rng, vec![5]);
        let z1 = rand_tensor(&mut rng, vec![5]);
        let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let teacher: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let teachers = vec![teacher.clone(), teacher];
        let tau = 2.0;
        for target in 0..2 {
            let inputs = vec![z0.clone(), z1.clone()];
            let teachers = teachers.clone();
            let err = check_op(
                &inputs,
                target,
                move |tape, v| tape.skd_kl_batch(&[v[0], v[1]], &teachers, tau).unwrap(),
                seed,
            );
            assert!(err < TOL, "seed {seed} target {target}: err {err}");
        }
    }
}

/// Full LNet forward + Eq. 6 total: every parameter gradient against central
/// differences, double precision.
#[test]
fn full_model_total_loss_gradients() {
    let ds = synthetic_dataset(5, 10, 8, 0.05, 0.6, 40).unwrap();
    let cfg = model_config_for(Variant::Lnet, (1, 8, 8), 5);
    let tau = 3.0;
    let lambda = 2.0;
    let table = ClassBalanceTable::<f64>::new(0.9, &[3, 4, 5, 6, 7]).unwrap();
    for seed in 0..10u64 {
        let model = build_model::<f64>(&cfg, seed).unwrap();
        let batch: Vec<u32> = vec![(seed % 5) as u32, ((seed + 3) % 10) as u32];
        let labels: Vec<usize> = batch.iter().map(|&i| ds.label(i)).collect();
        let weights: Vec<f64> = labels.iter().map(|&y| table.weight(y).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 77);
        let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let teacher: Vec<Vec<f64>> = vec![raw.iter().map(|v| v / total).collect()];

        // Loss as a function of the flattened parameter vector.
        let flat_dim = model.params().total_elements();
        let run = |flat: &Tensor<f64>| -> f64 {
            let mut m = model.clone();
            let mut at = 0usize;
            for (_, t) in m.params_mut().iter_mut() {
                let n = t.len();
                t.data_mut().copy_from_slice(&flat.data()[at..at + n]);
                at += n;
            }
            let mut tape = Tape::new();
            let params = m.register_params(&mut tape);
            let logits: Vec<_> =
                batch.iter().map(|&i| m.forward_recorded(&mut tape, &params, &ds.grid::<f64>(i)).unwrap()).collect();
            let cb = tape.cb_ce_batch(&logits, &labels, &weights, tau).unwrap();
            let skd = tape.skd_kl_batch(&logits[..1], &teacher, tau).unwrap();
            let total = tape.add_scaled(cb, skd, lambda).unwrap();
            tape.value(total)[0]
        };

        let mut flat = Vec::with_capacity(flat_dim);
        for (_, t) in model.params().iter() {
            flat.extend_from_slice(t.data());
        }
        let flat = Tensor::new(vec![flat_dim], flat).unwrap();

        // Analytic gradient via one backward pass.
        let mut m = model.clone();
        let mut tape = Tape::new();
        let params = m.register_params(&mut tape);
        let logits: Vec<_> =
            batch.iter().map(|&i| m.forward_recorded(&mut tape, &params, &ds.grid::<f64>(i)).unwrap()).collect();
        let cb = tape.cb_ce_batch(&logits, &labels, &weights, tau).unwrap();
        let skd = tape.skd_kl_batch(&logits[..1], &teacher, tau).unwrap();
        let total_var = tape.add_scaled(cb, skd, lambda).unwrap();
        tape.backward(total_var).unwrap();
        m.params_mut().zero_grads();
        m.accumulate_grads_from(&tape, &params).unwrap();
        let mut analytic = Vec::with_capacity(flat_dim);
        for (_, t) in m.params().iter() {
            analytic.extend_from_slice(t.grad().unwrap());
        }

        // A max tie closer than eps to the evaluation point makes the central
        // difference straddle the kink. Kink artifacts vanish as eps shrinks;
        // a wrong backward rule stays wrong at every eps.
        let mut best = f64::INFINITY;
        for eps in [EPS, EPS / 10.0, EPS / 100.0] {
            best = best.min(finite_difference_check(|probe| Ok(run(probe)), &flat, &analytic, eps).unwrap());
            if best < TOL {
                break;
            }
        }
        assert!(best < TOL, "seed {seed}: err {best}");
    }
}
