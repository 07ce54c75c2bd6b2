use gss::oracle::{compare_chain_to_oracle, enumerate_posterior};
use gss::simulate::{gen_dataset, Covariance, SignalSetting, SimConfig};
use gss::{Engine, Hyperparams};
use nalgebra::DVector;

#[test]
fn debug_strong_signal_oracle() {
    // r=2 groups of 5 cols, n=100, strong signal in group 0.
    let cfg: SimConfig<f64> = SimConfig {
        n: 100, r: 2, n_active: 1,
        covariance: Covariance::Isotropic,
        setting: SignalSetting::Constant { value: 3.0 },
        group_size_choices: vec![5], n_test: 10, seed: 31,
    };
    let ds = gen_dataset(&cfg).unwrap();
    let hyper = Hyperparams::<f64>::new(1.0, 0.02, 7.3).unwrap();
    // Freeze Y at something signal-bearing: eta + noise, W at 0.4.
    let mut y = DVector::zeros(100);
    for i in 0..100 {
        let mut eta = 0.0;
        for &c in ds.design.group(0) { eta += ds.design.x()[(i, c)] * 3.0; }
        y[i] = eta + if ds.e[i] { 0.5 } else { -0.5 };
    }
    let w = DVector::from_element(100, 0.4);
    let exact = enumerate_posterior(&ds.design, &y, &w, &hyper).unwrap();
    println!("exact probs: {:?}", exact.probs);
    for engine in [Engine::Gibbs, Engine::Neuronized] {
        let tv = compare_chain_to_oracle(engine, &ds.design, &y, &w, &hyper, 50_000, 7).unwrap();
        println!("{:?}: tv = {tv}", engine);
    }
}
