use rtm_core::decay_rates::*;
use rtm_core::gates::{critical_p, du_gate_u, du_gate_w, Dressing, Gate};

#[test]
fn averaged_rate_examples() {
    assert!((r_mag_avg(0.5, 2).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(r_mag_avg(0.0, 2).unwrap(), 0.0);
    assert!(r_mag_avg(1.0, 2).unwrap().is_infinite());
    assert!(r_mag_avg(1.5, 2).is_err());
}

#[test]
fn crossover_rate_is_two() {
    for d in 2..=5 {
        assert!((r_mag_avg(critical_p(d), d).unwrap() - 2.0).abs() <= 1e-15, "d={d}");
    }
}

#[test]
fn swap_like_gate_has_no_decay() {
    let r = r_mag_gate(&du_gate_u(0.0).unwrap()).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.rate, 0.0);
    assert!(r_mag_gate(&Gate::haar(2, 1)).is_err());
}

#[test]
fn fixed_dressing_gate_rate_golden() {
    let r = r_mag_gate(&du_gate_w(0.625, &Dressing::Fixed).unwrap()).unwrap();
    assert!(!r.degenerate);
    assert!((r.rate - 0.182_325_530_82).abs() < 1e-8, "{}", r.rate);
    assert!((r.left - 1.422_107_028_61).abs() < 1e-8, "{}", r.left);
}

#[test]
fn annealed_weight_reproduces_the_averaged_rate() {
    for p in [0.1, 0.4, 0.6] {
        let w: Vec<f64> = (0..200)
            .flat_map(|seed| annealed_weight(&du_gate_w(p, &Dressing::Random { seed }).unwrap()).unwrap())
            .collect();
        assert!((annealed_rate(&w, 2).unwrap() - r_mag_avg(p, 2).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn synthetic_exponential_fit() {
    let series: Vec<(usize, f64)> = (0..10).map(|t0| (t0, 0.3 * (-2.0 * t0 as f64 * 2f64.ln()).exp())).collect();
    let f = fit_pk_decay(&series, None, 2).unwrap();
    assert!((f.r_fit - 2.0).abs() < 1e-10);
    assert!(f.r_squared > 1.0 - 1e-12);
    assert_eq!(f.window, (5, 9));
    assert_eq!(f.points, 5);
}

#[test]
fn fit_domain_errors() {
    assert!(fit_pk_decay(&[(0, 1.0), (1, 0.5)], None, 2).is_err());
    assert!(fit_pk_decay(&[(0, 1.0), (1, 0.5), (2, 0.0), (3, 0.1)], Some((1, 3)), 2).is_err());
}
