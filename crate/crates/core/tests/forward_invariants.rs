use std::f64::consts::PI;

use proptest::prelude::*;
use wavesrc_core::forward::{exponential_decay_check, forward_sweep, retarded_potential, Channel};
use wavesrc_core::geometry::{BallGrid, SphereGrid, TimeGrid};
use wavesrc_core::source::{Blob, SourceModel, TemporalProfile};

const R: f64 = 1.5;
const RS: f64 = 1.15;

fn exp1() -> TemporalProfile {
    TemporalProfile::exponential(1.0).unwrap()
}

fn blob() -> impl Strategy<Value = Blob> {
    (0.12..0.2f64, -1.0..1.0f64, 0.0..(2.0 * PI), 0.0..1.0f64, -2.0..2.0f64).prop_map(|(w, z, phi, s, a)| {
        let reach = (RS - 4.0 * w) * s;
        let rho = (1.0 - z * z).sqrt();
        Blob::new([reach * rho * phi.cos(), reach * rho * phi.sin(), reach * z], w, a)
    })
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_in_the_source(a in proptest::collection::vec(blob(), 1..3), b in proptest::collection::vec(blob(), 1..3)) {
        let sphere = SphereGrid::new(R, 3).unwrap();
        let ball = BallGrid::new(RS, 14).unwrap();
        let time = TimeGrid::new(4.0, 80).unwrap();
        let run = |blobs: Vec<Blob>| forward_sweep(&SourceModel::new(blobs, RS).unwrap(), &exp1(), &sphere, &time, &ball).unwrap();
        let (da, db, dab) = (run(a.clone()), run(b.clone()), run([a, b].concat()));
        for c in Channel::ALL {
            let sum: Vec<f64> = da.channel(c).iter().zip(db.channel(c)).map(|(x, y)| x + y).collect();
            prop_assert!(max_rel(&sum, dab.channel(c)) <= 1e-12);
        }
    }

    #[test]
    fn translation_covariant(b in blob(), d in proptest::array::uniform3(-0.5..0.5f64), t in 0.5..4.0f64) {
        let ball = BallGrid::new(RS, 16).unwrap();
        let m = SourceModel::new(vec![b], RS).unwrap();
        let c = b.center;
        let moved = SourceModel::with_support(
            vec![Blob::new([c[0] + d[0], c[1] + d[1], c[2] + d[2]], b.width, b.amplitude)],
            d,
            RS,
        )
        .unwrap();
        let moved_ball = BallGrid::centered(d, RS, 16).unwrap();
        for x in [[R, 0.0, 0.0], [0.3, -1.2, 0.8]] {
            let u0 = retarded_potential(&m, &exp1(), &x, t, &ball).unwrap();
            let u1 = retarded_potential(&moved, &exp1(), &[x[0] + d[0], x[1] + d[1], x[2] + d[2]], t, &moved_ball).unwrap();
            prop_assert!((u0 - u1).abs() <= 1e-12 * u0.abs().max(1e-12), "{} vs {}", u0, u1);
        }
    }

    #[test]
    fn silent_before_the_front(b in blob()) {
        let sphere = SphereGrid::new(R, 4).unwrap();
        let time = TimeGrid::new(1.0, 100).unwrap();
        let d = forward_sweep(&SourceModel::new(vec![b], RS).unwrap(), &exp1(), &sphere, &time, &BallGrid::new(RS, 14).unwrap()).unwrap();
        let before = ((R - RS) / time.dt()).floor() as usize;
        for c in Channel::ALL {
            for node in 0..sphere.len() {
                prop_assert!(d.series(c, node)[..before].iter().all(|v| v.abs() <= 1e-12));
            }
        }
    }
}

/// `U(x, t)` for a centred Gaussian once the front has passed the support:
/// `e^{-t}/(2|x|) ∫₀^{R_s} ρ f(ρ) (e^{|x|+ρ} − e^{|x|−ρ}) dρ`, by Simpson.
fn radial_oracle(width: f64, support: f64, x: f64, t: f64) -> f64 {
    let n = 20_000;
    let h = support / n as f64;
    let g = |rho: f64| rho * (-rho * rho / (2.0 * width * width)).exp() * ((x + rho).exp() - (x - rho).exp());
    let mut acc = g(0.0) + g(support);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    (-t).exp() / (2.0 * x) * acc * h / 3.0
}

#[test]
fn saturated_value_matches_radial_quadrature() {
    let m = SourceModel::new(vec![Blob::new([0.0; 3], 0.15, 1.0)], 0.6).unwrap();
    let ball = BallGrid::new(0.6, 48).unwrap();
    let oracle = radial_oracle(0.15, 0.6, 1.0, 4.0);
    for x in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]] {
        let u = retarded_potential(&m, &exp1(), &x, 4.0, &ball).unwrap();
        assert!((u - oracle).abs() <= 1e-4 * oracle, "{u} vs {oracle}");
    }
}

#[test]
fn decays_exponentially_after_saturation() {
    let m = SourceModel::new(vec![Blob::new([0.2, 0.0, 0.1], 0.22, 1.0)], RS).unwrap();
    let sphere = SphereGrid::new(R, 5).unwrap();
    let d = forward_sweep(&m, &exp1(), &sphere, &TimeGrid::new(8.0, 400).unwrap(), &BallGrid::new(RS, 20).unwrap())
        .unwrap();
    assert!(exponential_decay_check(&d, 1.0).unwrap() <= 1e-10);
    let empty = forward_sweep(
        &SourceModel::empty(RS).unwrap(),
        &exp1(),
        &sphere,
        &TimeGrid::new(8.0, 400).unwrap(),
        &BallGrid::new(RS, 8).unwrap(),
    )
    .unwrap();
    assert_eq!(exponential_decay_check(&empty, 1.0).unwrap(), 0.0);
    let ricker = forward_sweep(
        &m,
        &TemporalProfile::ricker(1.0, 1.5).unwrap(),
        &sphere,
        &TimeGrid::new(8.0, 100).unwrap(),
        &BallGrid::new(RS, 8).unwrap(),
    )
    .unwrap();
    assert!(exponential_decay_check(&ricker, 1.0).is_err());
}

fn narrow() -> SourceModel {
    SourceModel::new(vec![Blob::new([0.1, 0.0, 0.05], 0.12, 1.0)], RS).unwrap()
}

#[test]
fn time_derivatives_converge_at_second_order() {
    let sphere = SphereGrid::new(R, 5).unwrap();
    let ball = BallGrid::new(RS, 24).unwrap();
    let err = |steps: usize| {
        let time = TimeGrid::new(6.4, steps).unwrap();
        let d = forward_sweep(&narrow(), &exp1(), &sphere, &time, &ball).unwrap();
        let j = time.step_at(4.0).unwrap();
        let dt = time.dt();
        let mut worst = [0.0f64; 2];
        for n in 0..sphere.len() {
            let u = d.series(Channel::Potential, n);
            let v = d.series(Channel::TimeDerivative, n);
            let w = d.series(Channel::SecondTimeDerivative, n);
            worst[0] = worst[0].max(((u[j + 1] - u[j - 1]) / (2.0 * dt) - v[j]).abs());
            worst[1] = worst[1].max(((v[j + 1] - v[j - 1]) / (2.0 * dt) - w[j]).abs());
        }
        worst
    };
    let (a, b) = (err(256), err(512));
    for i in 0..2 {
        let order = (a[i] / b[i]).log2();
        assert!(order > 1.8 && order < 2.2, "channel {i}: order {order}");
    }
}

#[test]
fn normal_derivative_matches_radial_difference() {
    let ball = BallGrid::new(RS, 32).unwrap();
    let time = TimeGrid::new(6.4, 256).unwrap();
    let x = [0.6, -0.8, 1.1f64];
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let at = |s: f64| {
        let sphere =
            SphereGrid::from_nodes(r * s, vec![[x[0] * s, x[1] * s, x[2] * s]], vec![4.0 * PI * (r * s).powi(2)])
                .unwrap();
        forward_sweep(&narrow(), &exp1(), &sphere, &time, &ball).unwrap()
    };
    let h = 1e-3 * r;
    let (plus, minus, centre) = (at(1.0 + 1e-3), at(1.0 - 1e-3), at(1.0));
    for t in [2.5, 3.0, 4.0] {
        let j = time.step_at(t).unwrap();
        let fd = (plus.series(Channel::TimeDerivative, 0)[j] - minus.series(Channel::TimeDerivative, 0)[j]) / (2.0 * h);
        let ch = centre.series(Channel::NormalTimeDerivative, 0)[j];
        assert!((fd - ch).abs() <= 0.01 * ch.abs(), "t {t}: fd {fd} channel {ch}");
        let fd_u = (plus.series(Channel::Potential, 0)[j] - minus.series(Channel::Potential, 0)[j]) / (2.0 * h);
        let ch_u = centre.series(Channel::NormalDerivative, 0)[j];
        assert!((fd_u - ch_u).abs() <= 0.01 * ch_u.abs(), "t {t}: fd {fd_u} channel {ch_u}");
    }
}
