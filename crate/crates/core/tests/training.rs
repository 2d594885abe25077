use fdf::data::synthetic_dataset;
use fdf::kernel_geometry::FilterSpec;
use fdf::nn::{accuracy, train, Architecture, LossKind, Network, NetworkShape, TrainConfig};

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        epochs: 20,
        batch_size: 10,
        seed,
        loss: LossKind::CrossEntropy,
    }
}

#[test]
fn arch1_fits_synthetic_data() {
    let data = synthetic_dataset(200, 10, 11).unwrap();
    let mut net =
        Network::<f32>::new(Architecture::Arch1, NetworkShape::default(), FilterSpec::normal(), 1, 5).unwrap();
    let history = train(&mut net, &data, &quick_config(5)).unwrap();
    assert_eq!(history.len(), 20);
    assert!(history.last().unwrap() < &history[0]);
    let acc = accuracy(&net, &data).unwrap();
    assert!(acc > 90.0, "train accuracy {acc}");
}

#[test]
fn sum_squared_error_also_learns() {
    let data = synthetic_dataset(100, 10, 12).unwrap();
    let shape = NetworkShape {
        hidden: 32,
        ..NetworkShape::default()
    };
    let mut net = Network::<f32>::new(Architecture::Arch2, shape, FilterSpec::normal(), 1, 6).unwrap();
    let config = TrainConfig {
        loss: LossKind::SumSquaredError,
        learning_rate: 0.2,
        ..quick_config(6)
    };
    let history = train(&mut net, &data, &config).unwrap();
    assert!(history.last().unwrap() < &history[0]);
    assert!(accuracy(&net, &data).unwrap() > 50.0);
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let data = synthetic_dataset(30, 10, 1).unwrap();
    let shape = NetworkShape {
        hidden: 8,
        ..NetworkShape::default()
    };
    let before = Network::<f32>::new(Architecture::Arch3, shape, FilterSpec::normal(), 1, 2).unwrap();
    let mut after = before.clone();
    let config = TrainConfig {
        learning_rate: 0.0,
        epochs: 2,
        ..quick_config(2)
    };
    train(&mut after, &data, &config).unwrap();
    assert_eq!(before, after);
}

#[test]
fn same_seed_same_weights() {
    let data = synthetic_dataset(40, 10, 3).unwrap();
    let shape = NetworkShape {
        hidden: 8,
        ..NetworkShape::default()
    };
    let run = |seed| {
        let mut net = Network::<f32>::new(Architecture::Arch1, shape, FilterSpec::normal(), 1, seed).unwrap();
        let config = TrainConfig {
            epochs: 3,
            ..quick_config(seed)
        };
        let history = train(&mut net, &data, &config).unwrap();
        (net, history)
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4).0, run(5).0);
}

#[test]
fn rejects_bad_configuration() {
    let data = synthetic_dataset(10, 10, 3).unwrap();
    let shape = NetworkShape {
        hidden: 4,
        ..NetworkShape::default()
    };
    let mut net = Network::<f32>::new(Architecture::Arch1, shape, FilterSpec::normal(), 1, 0).unwrap();
    for config in [
        TrainConfig {
            epochs: 0,
            ..quick_config(0)
        },
        TrainConfig {
            batch_size: 0,
            ..quick_config(0)
        },
        TrainConfig {
            learning_rate: -1.0,
            ..quick_config(0)
        },
        TrainConfig {
            learning_rate: f64::NAN,
            ..quick_config(0)
        },
    ] {
        assert!(train(&mut net, &data, &config).is_err());
    }
    let wrong = NetworkShape {
        height: 8,
        width: 8,
        hidden: 4,
        ..NetworkShape::default()
    };
    let mut small = Network::<f32>::new(Architecture::Arch1, wrong, FilterSpec::normal(), 1, 0).unwrap();
    assert!(train(&mut small, &data, &quick_config(0)).is_err());
}
