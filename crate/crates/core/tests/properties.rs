//! Randomized structural properties.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sympflow::diffcore::PotentialNet;
use sympflow::eval::checkpoint::{from_json, to_json};
use sympflow::eval::rollout;
use sympflow::flow::symplectic_defect;
use sympflow::model::{apply_p_layer, apply_q_layer, invert_p_layer, invert_q_layer};
use sympflow::systems::physical_limit_project;
use sympflow::{AnyModel, FlowMap, MlpFlowModel, PhasePoint, SympFlowModel};

fn point(d: usize) -> impl Strategy<Value = PhasePoint> {
    prop::collection::vec(-1.5f64..1.5, 2 * d).prop_map(|v| PhasePoint::from_vec(v).unwrap())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shear_layers_invert_and_keep_their_fixed_half(
        seed in any::<u64>(), d in 1usize..=2, t in -1.0f64..2.0, x in point(2),
    ) {
        let x = PhasePoint::from_vec(x.as_slice()[..2 * d].to_vec()).unwrap();
        let net = PotentialNet::random(d, 10, &mut rng(seed));
        let yq = apply_q_layer(&net, t, &x).unwrap();
        prop_assert_eq!(yq.q(), x.q());
        prop_assert!(invert_q_layer(&net, t, &yq).unwrap().distance(&x) < 1e-12);
        let yp = apply_p_layer(&net, t, &x).unwrap();
        prop_assert_eq!(yp.p(), x.p());
        prop_assert!(invert_p_layer(&net, t, &yp).unwrap().distance(&x) < 1e-12);
    }

    #[test]
    fn sympflow_is_identity_at_zero_and_symplectic(
        seed in any::<u64>(), layers in 1usize..=4, t in 0.0f64..1.5, x in point(2),
    ) {
        let m = SympFlowModel::random(2, 10, layers, &mut rng(seed));
        prop_assert_eq!(&m.forward(0.0, &x).unwrap(), &x);
        prop_assert!(symplectic_defect(&m.jacobian(t, &x).unwrap()) < 1e-9);
    }

    #[test]
    fn mlp_is_identity_at_zero(seed in any::<u64>(), layers in 2usize..=5, x in point(1)) {
        let m = MlpFlowModel::random(1, layers, &mut rng(seed));
        prop_assert_eq!(&m.forward(0.0, &x).unwrap(), &x);
    }

    #[test]
    fn rollout_inside_first_window_is_forward(seed in any::<u64>(), t in 0.0f64..1.0, x in point(1)) {
        let m = SympFlowModel::random(1, 10, 2, &mut rng(seed));
        prop_assert_eq!(rollout(&m, 1.0, t, &x).unwrap(), m.forward(t, &x).unwrap());
    }

    #[test]
    fn checkpoints_round_trip_bit_for_bit(seed in any::<u64>(), layers in 1usize..=3, sympflow in any::<bool>()) {
        let model: AnyModel = if sympflow {
            SympFlowModel::random(2, 10, layers, &mut rng(seed)).into()
        } else {
            MlpFlowModel::random(1, layers + 1, &mut rng(seed)).into()
        };
        let back = from_json(&to_json(&model, seed).unwrap()).unwrap();
        prop_assert_eq!(back.seed, seed);
        let bits = |m: &AnyModel| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.model), bits(&model));
    }

    #[test]
    fn physical_limit_projection_is_idempotent(x in point(2)) {
        let p = physical_limit_project(&x).unwrap();
        prop_assert_eq!(physical_limit_project(&p).unwrap(), p);
    }
}
