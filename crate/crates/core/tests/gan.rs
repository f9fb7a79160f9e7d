use proptest::prelude::*;
use qcfd_core::beat::{make_dataset, BeatLabel, Fiducials, SimProfile};
use qcfd_core::dsp::{to_trimodal, DspProfile, TriModalSample};
use qcfd_core::eval::{ReferenceConfig, ReferenceModels};
use qcfd_core::gan::check::REL_FLOOR;
use qcfd_core::gan::loss::interpolate;
use qcfd_core::gan::model::join;
use qcfd_core::gan::{
    critic_objective, grad_check, gradient_penalty, initial_generators, split_dataset,
    total_generator_loss, train, train_on_split, Ablation, Architecture, CriticModel,
    GeneratorModel, GeneratorObjective, GradCheckReport, InterfTarget, LossParts, LossWeights,
    PhysTarget, TrainConfig,
};
use qcfd_core::latent::{sample_latent, InterferenceOperator, LatentState, ProjectionEncoder};
use qcfd_core::nn::{Activation, DenseNet, LayerShape};
use qcfd_core::rng;
use qcfd_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn tiny_arch() -> Architecture {
    Architecture {
        latent_dim: 6,
        hidden: 4,
        outputs: [10, 4, 6],
        critic_hidden: 5,
    }
}

struct Fixture {
    generator: GeneratorModel,
    critic: CriticModel,
    reference: ReferenceModels,
    interf: InterfTarget,
    phys: PhysTarget,
    states: Vec<LatentState>,
}

fn fixture(learn_op: bool) -> Fixture {
    let arch = tiny_arch();
    let op = InterferenceOperator::default();
    let mut r = ChaCha8Rng::seed_from_u64(40);
    let generator = GeneratorModel::init(arch, op, learn_op, &mut rng::seeded(1)).unwrap();
    let critic = CriticModel::init(&arch, &mut rng::seeded(2)).unwrap();
    let reference = ReferenceModels::init(
        arch.outputs,
        ReferenceConfig {
            embed: 3,
            ..ReferenceConfig::default()
        },
        3,
    )
    .unwrap();
    let real: Vec<[Vec<f64>; 3]> = (0..6)
        .map(|_| {
            core::array::from_fn(|m| {
                (0..arch.outputs[m])
                    .map(|_| r.random_range(-1.0..1.0))
                    .collect()
            })
        })
        .collect();
    let interf = InterfTarget::new(
        ProjectionEncoder::new(arch.outputs, 2, 4).unwrap(),
        real,
        &op,
    )
    .unwrap();
    let phys = PhysTarget {
        template: (0..10).map(|i| 0.1 * i as f64 - 0.4).collect(),
        windows: Fiducials {
            qrs: 2..5,
            st: 5..8,
        },
    };
    let states = (0..4).map(|k| sample_latent(6, 100 + k).unwrap()).collect();
    Fixture {
        generator,
        critic,
        reference,
        interf,
        phys,
        states,
    }
}

fn check_objective(name: &str, f: &Fixture, obj: GeneratorObjective<'_>) -> GradCheckReport {
    let mut grads = vec![0.0; f.generator.param_count()];
    obj.evaluate(&f.generator, &f.states, Some(&mut grads))
        .unwrap();
    let params = f.generator.flat_params();
    let mut model = f.generator.clone();
    let loss = |p: &[f64]| {
        model.set_flat_params(p)?;
        obj.evaluate(&model, &f.states, None).map(|l| l.total)
    };
    grad_check(name, loss, &params, &grads, 120, 1e-5, 9).unwrap()
}

fn objective(critic: &CriticModel) -> GeneratorObjective<'_> {
    GeneratorObjective {
        critic,
        weights: LossWeights {
            cfd: 0.0,
            interf: 0.0,
            phys: 0.0,
        },
        lambda_orth: 0.1,
        reference: None,
        interf: None,
        phys: None,
    }
}

#[test]
fn every_generator_term_passes_grad_check() {
    let f = fixture(false);
    let silent = CriticModel::zeros(&tiny_arch()).unwrap();

    let gan = check_objective("adversarial", &f, objective(&f.critic));
    let orth = check_objective(
        "orthogonality",
        &f,
        GeneratorObjective {
            weights: LossWeights {
                cfd: 1.0,
                interf: 0.0,
                phys: 0.0,
            },
            lambda_orth: 1.0,
            reference: Some(&f.reference),
            ..objective(&silent)
        },
    );
    let interf = check_objective(
        "interference",
        &f,
        GeneratorObjective {
            weights: LossWeights {
                cfd: 0.0,
                interf: 1.0,
                phys: 0.0,
            },
            interf: Some(&f.interf),
            ..objective(&silent)
        },
    );
    let phys = check_objective(
        "morphology",
        &f,
        GeneratorObjective {
            weights: LossWeights {
                cfd: 0.0,
                interf: 0.0,
                phys: 1.0,
            },
            phys: Some(&f.phys),
            ..objective(&silent)
        },
    );
    let full = GeneratorObjective {
        critic: &f.critic,
        weights: LossWeights::default(),
        lambda_orth: 0.1,
        reference: Some(&f.reference),
        interf: Some(&f.interf),
        phys: Some(&f.phys),
    };
    let composite = check_objective("composite", &f, full);
    let binned = GradCheckReport::skipped("binned complementarity gap");
    for r in [&gan, &orth, &interf, &phys, &composite] {
        assert!(!r.skipped && r.checked > 0);
        assert!(r.passes(TOL), "{}: {}", r.term, r.max_rel_error);
    }
    assert!(binned.skipped && binned.passes(0.0));
}

#[test]
fn learned_couplings_pass_grad_check() {
    let f = fixture(true);
    let full = GeneratorObjective {
        critic: &f.critic,
        weights: LossWeights::default(),
        lambda_orth: 0.1,
        reference: Some(&f.reference),
        interf: Some(&f.interf),
        phys: Some(&f.phys),
    };
    let mut grads = vec![0.0; f.generator.param_count()];
    full.evaluate(&f.generator, &f.states, Some(&mut grads))
        .unwrap();
    let params = f.generator.flat_params();
    let n = params.len();
    let mut model = f.generator.clone();
    let mut interf = f.interf.clone();
    // the real-side energy also moves with the operator
    let loss = |p: &[f64]| {
        model.set_flat_params(p)?;
        interf.refresh(&model.op)?;
        GeneratorObjective {
            interf: Some(&interf),
            ..full
        }
        .evaluate(&model, &f.states, None)
        .map(|l| l.total)
    };
    let r = grad_check("couplings", loss, &params, &grads, n, 1e-5, 0).unwrap();
    assert!(r.passes(TOL), "{}", r.max_rel_error);
    assert_eq!(f.generator.coupling_index(2), Some(n - 2));
}

#[test]
fn critic_objective_passes_grad_check() {
    let f = fixture(false);
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let len = tiny_arch().sample_len();
    let batch = |r: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..3)
            .map(|_| (0..len).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let real = batch(&mut r);
    let fake = batch(&mut r);
    let mix = [0.2, 0.5, 0.9];
    let mut grads = vec![0.0; f.critic.net.param_count()];
    critic_objective(&f.critic, &real, &fake, &mix, 10.0, Some(&mut grads)).unwrap();
    let mut critic = f.critic.clone();
    let loss = |p: &[f64]| {
        critic.net.set_params(p)?;
        critic_objective(&critic, &real, &fake, &mix, 10.0, None).map(|l| l.loss)
    };
    let report = grad_check("critic", loss, f.critic.net.params(), &grads, 200, 1e-5, 1).unwrap();
    assert!(report.passes(TOL), "{}", report.max_rel_error);
}

#[test]
fn penalty_input_gradient_matches_finite_differences() {
    let f = fixture(false);
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let len = tiny_arch().sample_len();
    let x: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
    let tr = f.critic.net.forward_trace(&x).unwrap();
    let g = f.critic.net.input_gradient(&tr).unwrap();
    let h = 1e-6;
    for i in 0..len {
        let mut up = x.clone();
        up[i] += h;
        let mut dn = x.clone();
        dn[i] -= h;
        let num = (f.critic.score(&up).unwrap() - f.critic.score(&dn).unwrap()) / (2.0 * h);
        let rel = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(REL_FLOOR);
        assert!(rel < TOL, "{i}: {} vs {num}", g[i]);
    }
    // the penalty uses exactly that gradient at the seeded mixing point
    let real: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
    let fake: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
    let u: f64 = rng::seeded(5).random();
    let xh = interpolate(&real, &fake, u);
    let gh = f
        .critic
        .net
        .input_gradient(&f.critic.net.forward_trace(&xh).unwrap())
        .unwrap();
    let n = gh.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gp = gradient_penalty(&f.critic, &real, &fake, 5).unwrap();
    assert!((gp - (n - 1.0) * (n - 1.0)).abs() < 1e-14);
}

#[test]
fn linear_critic_is_a_dot_product() {
    let mut net = DenseNet::zeros(&[LayerShape::new(4, 1, Activation::Identity)]).unwrap();
    net.set_params(&[0.5, -1.0, 2.0, 0.25, 0.1]).unwrap();
    let critic = CriticModel::from_net(net).unwrap();
    let x = [1.0, 2.0, -0.5, 4.0];
    assert!((critic.score(&x).unwrap() - (0.5 - 2.0 - 1.0 + 1.0 + 0.1)).abs() < 1e-15);
    let zero = CriticModel::zeros(&tiny_arch()).unwrap();
    assert_eq!(
        zero.score(&vec![0.3; tiny_arch().sample_len()]).unwrap(),
        0.0
    );
    assert_eq!(critic.score(&x).unwrap(), critic.score(&x).unwrap());
}

#[test]
fn generator_forward_is_deterministic_and_shaped() {
    let arch = Architecture::desk([256, 32, 1024]);
    let g = GeneratorModel::init(
        arch,
        InterferenceOperator::default(),
        false,
        &mut rng::seeded(3),
    )
    .unwrap();
    let s = sample_latent(24, 4).unwrap();
    let a = g.forward(&s).unwrap();
    assert_eq!((a[0].len(), a[1].len(), a[2].len()), (256, 32, 1024));
    assert_eq!(g.forward(&s).unwrap(), a);
    let same = GeneratorModel::init(
        arch,
        InterferenceOperator::default(),
        false,
        &mut rng::seeded(3),
    )
    .unwrap();
    assert_eq!(same.forward(&s).unwrap(), a);
}

#[test]
fn total_loss_is_linear_in_each_weight() {
    let parts = LossParts {
        gan: 0.7,
        cfd: 0.3,
        interf: 0.2,
        phys: 0.9,
    };
    let base = LossWeights {
        cfd: 0.4,
        interf: 0.6,
        phys: 0.8,
    };
    let l0 = total_generator_loss(&parts, &base).unwrap();
    let doubled = [
        LossWeights { cfd: 0.8, ..base },
        LossWeights {
            interf: 1.2,
            ..base
        },
        LossWeights { phys: 1.6, ..base },
    ];
    let contributions = [0.4 * 0.3, 0.6 * 0.2, 0.8 * 0.9];
    for (w, c) in doubled.iter().zip(contributions) {
        let l1 = total_generator_loss(&parts, w).unwrap();
        assert!((l1 - l0 - c).abs() < 1e-15);
    }
}

#[test]
fn ablations_switch_off_one_component() {
    let cfg = TrainConfig::default();
    assert_eq!(Ablation::Full.apply(&cfg), cfg);
    assert_eq!(Ablation::NoCfd.apply(&cfg).weights.cfd, 0.0);
    assert_eq!(
        Ablation::ZeroOperator.apply(&cfg).operator,
        InterferenceOperator::zero()
    );
    assert_eq!(Ablation::NoPhys.apply(&cfg).weights.phys, 0.0);
    let names: Vec<&str> = Ablation::ALL.iter().map(|a| a.name()).collect();
    assert_eq!(names, ["full", "a1", "a2", "a3"]);
}

fn desk_samples(n_per_class: usize, seed: u64) -> Vec<TriModalSample> {
    let p = DspProfile::desk();
    make_dataset(n_per_class, &SimProfile::default(), seed)
        .unwrap()
        .iter()
        .map(|b| to_trimodal(b, &p).unwrap())
        .collect()
}

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch: 16,
        critic_steps: 1,
        probe_per_class: 16,
        reference: ReferenceConfig {
            epochs: 5,
            ..ReferenceConfig::default()
        },
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_return_the_initial_generators() {
    let data = desk_samples(24, 1);
    let cfg = quick_config(0);
    let split = split_dataset(&data, cfg.seed).unwrap();
    let out = train_on_split(&split, &cfg).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, None);
    assert_eq!(out.generators, initial_generators(&split, &cfg).unwrap());
    let plain = TrainConfig {
        match_moments: false,
        ..cfg
    };
    let arch = plain.architecture([256, 32, 1024]);
    let uniform = GeneratorModel::init(
        arch,
        plain.operator,
        false,
        &mut rng::derived(plain.seed, 0x100),
    )
    .unwrap();
    assert_eq!(
        initial_generators(&split, &plain).unwrap().models[0],
        uniform
    );
}

#[test]
fn training_is_deterministic_and_leaves_data_alone() {
    let data = desk_samples(24, 2);
    let before = data.clone();
    let cfg = quick_config(3);
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(data, before);
    assert_eq!(a.history, b.history);
    assert_eq!(a.generators, b.generators);
    assert_eq!(a.history.len(), 3);
    for (i, rec) in a.history.iter().enumerate() {
        assert_eq!(rec.epoch, i + 1);
        assert!(rec.val_composite.is_finite() && rec.c_hat.is_finite());
    }
    let best = a.best_epoch.unwrap();
    let min = a
        .history
        .iter()
        .map(|r| r.val_composite)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(a.history[best - 1].val_composite, min);
}

#[test]
fn early_stopping_bounds_the_history() {
    let data = desk_samples(24, 3);
    let cfg = TrainConfig {
        patience: 1,
        ..quick_config(8)
    };
    let out = train(&data, &cfg).unwrap();
    let best = out.best_epoch.unwrap();
    if out.stopped_early {
        assert_eq!(out.history.len(), best + 1);
    } else {
        assert_eq!(out.history.len(), 8);
    }
}

#[test]
fn training_needs_both_splits() {
    let data = desk_samples(24, 4);
    let mut split = split_dataset(&data, 0).unwrap();
    split.val.clear();
    assert!(matches!(
        train_on_split(&split, &quick_config(1)),
        Err(Error::EmptySplit(_))
    ));
    let one_class: Vec<TriModalSample> = data
        .into_iter()
        .filter(|s| s.label == BeatLabel::Normal)
        .collect();
    assert!(train(&one_class, &quick_config(1)).is_err());
}

#[test]
fn split_is_stratified_seventy_fifteen_fifteen() {
    let data = desk_samples(100, 5);
    let split = split_dataset(&data, 3).unwrap();
    for label in BeatLabel::ALL {
        let count = |v: &[TriModalSample]| v.iter().filter(|s| s.label == label).count();
        assert_eq!(count(&split.train), 70);
        assert_eq!(count(&split.val), 15);
        assert_eq!(count(&split.test), 15);
    }
    assert_eq!(split, split_dataset(&data, 3).unwrap());
}

#[test]
fn joined_sample_order_is_t_f_s() {
    assert_eq!(
        join([&[1.0], &[2.0, 3.0], &[4.0]]),
        vec![1.0, 2.0, 3.0, 4.0]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weights_scale_contributions_exactly(
        gan in -5.0f64..5.0,
        cfd in 0.0f64..5.0,
        interf in 0.0f64..5.0,
        phys in 0.0f64..5.0,
        w in (0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0),
    ) {
        let parts = LossParts { gan, cfd, interf, phys };
        let lw = LossWeights { cfd: w.0, interf: w.1, phys: w.2 };
        let two = LossWeights { cfd: 2.0 * w.0, interf: 2.0 * w.1, phys: 2.0 * w.2 };
        let l1 = total_generator_loss(&parts, &lw).unwrap();
        let l2 = total_generator_loss(&parts, &two).unwrap();
        prop_assert!(((l2 - gan) - 2.0 * (l1 - gan)).abs() < 1e-12);
    }

    #[test]
    fn zero_operator_means_no_mixing(seed in any::<u64>()) {
        let arch = tiny_arch();
        let g = GeneratorModel::init(arch, InterferenceOperator::zero(), false, &mut rng::seeded(seed)).unwrap();
        let s = sample_latent(6, seed ^ 1).unwrap();
        let out = g.forward(&s).unwrap();
        let h = g.core.forward(&s.z.realify()).unwrap();
        for m in 0..3 {
            let direct = g.heads[m].forward(&h[m * arch.hidden..(m + 1) * arch.hidden]).unwrap();
            prop_assert_eq!(&out[m], &direct);
        }
    }
}
