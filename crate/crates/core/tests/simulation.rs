use curekit::{beran_survival, berancv, simulate_model, BandwidthGrid, ControlParams, TrueModel};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

// P(event) = E[p(X) P(Y < C | X)], and P(Y < C | X = x) = 1 - int e^{-y} S0(y | x) dy.
fn event_probability() -> f64 {
    let m = TrueModel;
    let inner = |x: f64| 1.0 - simpson(|y| (-y).exp() * m.latency(y, x), 0.0, 40.0, 20_000);
    simpson(|x| 0.25 * m.p(x) * inner(x), -2.0, 2.0, 400)
}

#[test]
fn event_rate_matches_integral() {
    let n = 100_000;
    let s = simulate_model(n, 2024).unwrap().sample;
    let p = event_probability();
    let observed = s.n_events() as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (observed - p).abs() < 3.0 * se,
        "event rate {observed} vs {p}"
    );
}

fn ise(sample: &curekit::SurvivalSample, x0: f64, h: f64) -> f64 {
    let ts: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
    let est = beran_survival(sample, x0, h, &ts).unwrap();
    let m = TrueModel;
    let truth = |t: f64| m.cure(x0) + m.p(x0) * m.latency(t, x0);
    let sq: Vec<f64> = ts
        .iter()
        .zip(&est.values)
        .map(|(&t, v)| (v - truth(t)).powi(2))
        .collect();
    sq.windows(2).map(|w| 0.5 * (w[0] + w[1]) * 0.005).sum()
}

#[test]
fn cross_validation_beats_worst_endpoint() {
    let params = ControlParams {
        hl: 40,
        ..Default::default()
    };
    let (mut cv, mut worst) = (0.0, 0.0);
    for seed in 0..10 {
        let s = simulate_model(100, seed).unwrap().sample;
        let sel = berancv(&s, &[0.0], &params).unwrap();
        let grid = BandwidthGrid::new(s.x().unwrap(), params.hbound, params.hl).unwrap();
        let (lo, hi) = (grid.values[0], *grid.values.last().unwrap());
        cv += ise(&s, 0.0, sel.h[0]);
        worst += ise(&s, 0.0, lo).max(ise(&s, 0.0, hi));
    }
    assert!(cv <= worst, "cv {cv} vs worst endpoint {worst}");
}
