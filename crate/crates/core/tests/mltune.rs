//! Loss gradients, model files and datasets of the exponent tuner.

use muntz_core::mltune::{
    batch_loss, batch_loss_and_gradient, generate_dataset, uniform_grid, Dataset, DatasetKind, LambdaSource,
    LossContext, ModelMetadata, Network, Sample,
};
use muntz_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_context() -> LossContext {
    LossContext::new(8, 5, (0.02, 0.999)).unwrap()
}

fn samples(ctx: &LossContext) -> Vec<Sample> {
    let mut data = Dataset {
        kind: DatasetKind::Validation,
        seed: 0,
        samples: [(0.2, 0.35), (0.5, 0.8), (0.75, 0.15)]
            .iter()
            .map(|&(mu, nu)| Sample { mu, nu, ref_error: None })
            .collect(),
    };
    ctx.attach_reference_errors(&mut data).unwrap();
    data.samples
}

#[test]
fn fixed_unit_exponent_has_unit_loss() {
    let ctx = small_context();
    let loss = batch_loss(LambdaSource::Fixed(1.0), &samples(&ctx), &ctx).unwrap();
    assert_eq!(loss.loss, 1.0);
}

#[test]
fn chained_gradient_matches_finite_differences_of_the_loss() {
    let ctx = small_context();
    let batch = samples(&ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Network::random(&[1, 3, 3, 1], 0.01, &mut rng).unwrap();
    let (_, grad) = batch_loss_and_gradient(&net, &batch, &ctx, 1e-4).unwrap();

    let params = net.parameters();
    let h = 1e-4;
    let loss_at = |p: &[f64]| {
        let mut n = net.clone();
        n.set_parameters(p).unwrap();
        batch_loss(LambdaSource::Network(&n), &batch, &ctx).unwrap().loss
    };
    let fd: Vec<f64> = (0..params.len())
        .map(|i| {
            let (mut up, mut down) = (params.clone(), params.clone());
            up[i] += h;
            down[i] -= h;
            (loss_at(&up) - loss_at(&down)) / (2.0 * h)
        })
        .collect();
    let scale = fd.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    assert!(scale > 0.0);
    for (i, (g, f)) in grad.iter().zip(&fd).enumerate() {
        assert!((g - f).abs() <= 1e-3 * scale, "parameter {i}: {g} vs {f}");
    }
}

#[test]
fn saved_model_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = Network::random(&[1, 20, 20, 1], 0.01, &mut rng).unwrap();
    let metadata = ModelMetadata { seed: 9, epochs: 17, restarts: 2, final_train_loss: 0.125, final_val_loss: 0.25 };
    net.save(&path, &metadata).unwrap();
    let (loaded, echoed) = Network::load(&path).unwrap();
    assert_eq!(echoed, metadata);
    for mu in uniform_grid(100) {
        assert_eq!(net.forward(mu).unwrap().to_bits(), loaded.forward(mu).unwrap().to_bits(), "mu = {mu}");
    }
}

#[test]
fn model_with_missing_layer_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let net = Network::with_shape(2, 4).unwrap();
    net.save(&path, &ModelMetadata::default()).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    json["weights"].as_array_mut().unwrap().pop();
    json["biases"].as_array_mut().unwrap().pop();
    std::fs::write(&path, json.to_string()).unwrap();
    assert!(matches!(Network::load(&path), Err(Error::Structural(_))));
}

#[test]
fn dataset_survives_a_csv_round_trip() {
    let data = generate_dataset(DatasetKind::Training, 4, 3, 77).unwrap();
    let back = Dataset::from_csv(&data.to_csv(), DatasetKind::Training, 77).unwrap();
    assert_eq!(back.samples, data.samples);
    let again = generate_dataset(DatasetKind::Training, 4, 3, 77).unwrap();
    assert_eq!(again.samples, data.samples);
}
