mod common;

use common::gradcheck::{self, TOLERANCE};
use guide::agents::EncoderKind;
use guide::nn::LayerSpec;

#[test]
fn dense_layers() {
    for seed in 0..10 {
        let s = gradcheck::dense_case(seed);
        assert!(s.passed(), "seed {seed}: {s:?}");
    }
}

#[test]
fn conv_layers() {
    for seed in 0..10 {
        let s = gradcheck::conv_case(seed);
        assert!(s.passed(), "seed {seed}: {s:?}");
    }
}

#[test]
fn activations() {
    for seed in 0..10 {
        for act in [LayerSpec::Relu, LayerSpec::Tanh] {
            let s = gradcheck::activation_case(act.clone(), seed);
            assert!(s.passed(), "{act:?} seed {seed}: {s:?}");
        }
    }
}

#[test]
fn composed_actor_and_critic() {
    for seed in 0..5 {
        for enc in [EncoderKind::Mlp, EncoderKind::Conv] {
            let a = gradcheck::actor_case(enc, seed);
            let c = gradcheck::critic_case(enc, seed);
            assert!(a.max_rel_err <= TOLERANCE, "actor {enc:?} seed {seed}: {a:?}");
            assert!(c.max_rel_err <= TOLERANCE, "critic {enc:?} seed {seed}: {c:?}");
        }
    }
}

#[test]
fn deep_relu_stack() {
    let specs = guide::nn::mlp_specs(6, 9, 3, 4);
    for seed in 0..5 {
        let s = gradcheck::check_network(&[6], &specs, 3, seed);
        assert!(s.passed(), "seed {seed}: {s:?}");
    }
}
