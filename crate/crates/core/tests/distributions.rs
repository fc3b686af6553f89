use iterlil::rng::Stream;
use iterlil::stats::{dkw_epsilon, ks_statistic, mean, variance};
use iterlil::JointStepLaw;

const N: usize = 1_000_000;

const CONTINUOUS: [&str; 6] = [
    "exp_indep(1,1)",
    "exp_indep(0.5,3)",
    "eta_eq_xi(exp(2))",
    "eta_eq_xi(lognormal(0,0.5))",
    "lognormal_indep(-1,0.8,2)",
    "slow_tail(1)",
];

fn draw(spec: &str, seed: u64) -> (JointStepLaw, Vec<f64>, Vec<f64>) {
    let law = JointStepLaw::parse(spec).unwrap();
    let mut s = Stream::replicate(seed, 0);
    let (xs, es) = (0..N).map(|_| law.sample_pair(&mut s)).unzip();
    (law, xs, es)
}

#[test]
fn samples_are_positive_and_finite() {
    for spec in CONTINUOUS.iter().chain(["det(1,0.5)"].iter()) {
        let (_, xs, es) = draw(spec, 1);
        assert!(xs.iter().all(|x| *x > 0.0 && x.is_finite()), "{spec} xi");
        assert!(es.iter().all(|e| *e >= 0.0 && e.is_finite()), "{spec} eta");
    }
}

#[test]
fn xi_moments_within_five_standard_errors() {
    for spec in CONTINUOUS {
        let (law, xs, _) = draw(spec, 2);
        let m = mean(&xs);
        let v = variance(&xs);
        let se_mean = (v / N as f64).sqrt();
        assert!((m - law.mu()).abs() < 5.0 * se_mean, "{spec}: mean {m} vs {}", law.mu());
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / N as f64;
        let se_var = ((m4 - v * v) / N as f64).sqrt();
        assert!((v - law.sigma2()).abs() < 5.0 * se_var, "{spec}: var {v} vs {}", law.sigma2());
    }
}

#[test]
fn empirical_cdfs_inside_dkw_band() {
    let eps = dkw_epsilon(N, 1e-3);
    for spec in CONTINUOUS {
        let (law, xs, es) = draw(spec, 3);
        let dx = ks_statistic(&xs, |t| law.xi_cdf(t));
        let de = ks_statistic(&es, |t| law.eta_cdf(t).unwrap());
        assert!(dx < eps, "{spec}: xi sup distance {dx} >= {eps}");
        assert!(de < eps, "{spec}: eta sup distance {de} >= {eps}");
    }
}

#[test]
fn coupled_pairs_are_equal() {
    let (_, xs, es) = draw("eta_eq_xi(lognormal(0.3,1.1))", 4);
    assert_eq!(xs, es);
}

#[test]
fn degenerate_law_is_constant() {
    let (law, xs, es) = draw("det(2,0.25)", 5);
    assert!(law.is_degenerate());
    assert!(xs.iter().all(|&x| x == 2.0) && es.iter().all(|&e| e == 0.25));
}
