use gss::inference::inclusion_probabilities;
use gss::simulate::{gen_dataset, Covariance, SignalSetting, SimConfig};
use gss::{gibbs::run_gibbs, neuronized::run_neuronized, Hyperparams, InitPolicy, RunOptions};

#[test]
fn debug_full_chain_r2() {
    let cfg: SimConfig<f64> = SimConfig {
        n: 100, r: 2, n_active: 1,
        covariance: Covariance::Isotropic,
        setting: SignalSetting::Constant { value: 3.0 },
        group_size_choices: vec![5], n_test: 10, seed: 31,
    };
    let ds = gen_dataset(&cfg).unwrap();
    let hyper = Hyperparams::<f64>::new(1.0, 0.02, 7.3).unwrap();
    let g = run_gibbs(&ds.design, &ds.e, &hyper, 2000, 10000, &InitPolicy::FixedModel{z: vec![false,false]}, 1, &RunOptions::default()).unwrap();
    let n = run_neuronized(&ds.design, &ds.e, &hyper, 2000, 10000, &InitPolicy::FixedModel{z: vec![false,false]}, 2, &RunOptions::default()).unwrap();
    println!("gibbs inc: {:?}", inclusion_probabilities(&g).unwrap());
    println!("neuro inc: {:?}", inclusion_probabilities(&n).unwrap());
    // transition counts for group 0 in neuronized
    let mut flips = 0;
    for w in n.z_draws.windows(2) { if w[0][0] != w[1][0] { flips += 1; } }
    println!("neuro group0 flips: {flips}");
}
