use vmdp::model::Model;
use vmdp::pareto::{brute_force_oracle, enumerate_efficient, recover_weights, EnumerationOptions};
use vmdp::vlp::build_program;

// Non-regular model with a vertex whose weight region is very thin: the
// starting basis of the weight program is infeasible by about 6e-8.
const THIN_WEIGHT_REGION: &str = r#"{"num_states":2,"horizon":4,"num_objectives":3,"actions_per_state":[3,1],"alpha":[0.48655262473348837,0.5134473752665116],"transitions":[[[[0.1363321906355958,0.8636678093644042],[0.3030222210459798,0.6969777789540202],[0.0,1.0]],[[1.0,0.0]]],[[[0.4396026324652672,0.5603973675347328],[0.6037424495755419,0.3962575504244581],[1.0,0.0]],[[0.5836674283698228,0.41633257163017734]]],[[[0.0,1.0],[0.0,1.0],[1.0,0.0]],[[0.0,1.0]]]],"rewards":[[[[-0.49390217350222754,0.12162183227437362,-0.9244975873796841],[-0.26269246865311624,0.03432041354435311,-0.14617319106144544],[-0.8539094835794105,0.9172344897116993,-0.8889596038776584]],[[0.4697289996559877,-0.04078240015965795,0.13412958255194907]]],[[[0.375263587373011,-0.21820344880054376,0.09440444675803361],[-0.6113148900089151,0.588128865756604,-0.2744262658315617],[-0.2589973467150659,0.06620708716273649,0.05602709048616061]],[[0.38768053534895497,0.7180974614168907,0.9366928219828492]]],[[[-0.20462113349521083,-0.81867070265882,-0.7683416013070352],[0.03278022867698027,0.7814284686741879,0.42090660826465376],[0.6072422938333499,-0.96885839907103,-0.4935020591965906]],[[-0.5653888565052272,0.7651742628926708,-0.6229531606622207]]]],"terminal_rewards":[[-0.49572585676388403,0.5174984293506917,-0.7159750255021113],[0.9798213499651669,0.3981127273310885,-0.10699289399651102]]}"#;

#[test]
fn thin_weight_region_is_certified() {
    let m: Model = serde_json::from_str(THIN_WEIGHT_REGION).unwrap();
    let cp = build_program(&m).unwrap();
    let result = enumerate_efficient(&cp, &EnumerationOptions { parallel: false }).unwrap();
    assert_eq!(
        result.vertices.len(),
        brute_force_oracle(&m).unwrap().efficient().count()
    );
    for v in &result.vertices {
        let cert = recover_weights(&cp, v).unwrap();
        assert!(cert.weights.iter().all(|&p| p > 0.0));
        assert!(cert.nonbasic_multipliers.iter().all(|&l| l >= -1e-12));
        assert!((cert.resolved_objective - cert.vertex_objective).abs() <= 1e-8);
    }
}
