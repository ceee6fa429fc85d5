use std::sync::Arc;

use thetaprime_core::energetics::EnergyEvaluator;
use thetaprime_core::{make_initial, simulate, Channel, FieldSet, Grid2D, SimParams, SpatialForm, Trajectory};

fn grid(n: usize) -> Arc<Grid2D> {
    Arc::new(Grid2D::unit_square(n).unwrap())
}

fn max_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.frames()
        .iter()
        .zip(b.frames())
        .flat_map(|(x, y)| {
            Channel::ALL.into_iter().flat_map(move |ch| {
                x.channel(ch)
                    .values()
                    .iter()
                    .zip(y.channel(ch).values())
                    .map(|(p, q)| (p - q).abs())
                    .collect::<Vec<_>>()
            })
        })
        .fold(0.0, f64::max)
}

fn rolled(t: &Trajectory, di: isize, dj: isize) -> Trajectory {
    Trajectory::new(
        t.frames().iter().map(|f| f.roll(di, dj)).collect(),
        t.dt(),
        t.params().clone(),
    )
    .unwrap()
}

#[test]
fn translation_equivariance() {
    let s = make_initial(0.22, 1482, grid(32), 0.05).unwrap();
    let p = SimParams::default();
    let a = rolled(&simulate(&s, &p, 5, 4).unwrap(), 3, -7);
    let b = simulate(&s.roll(3, -7), &p, 5, 4).unwrap();
    let d = max_diff(&a, &b);
    assert!(d < 1e-12, "{d}");
}

#[test]
fn variant_swap_is_exact() {
    let s = make_initial(0.23, 4446, grid(32), 0.05).unwrap();
    let p = SimParams::default();
    let a = simulate(&s, &p, 4, 3).unwrap();
    let b = simulate(&s.swapped(), &p.with_swapped_variants(), 4, 3).unwrap();
    for (x, y) in a.frames().iter().zip(b.frames()) {
        assert_eq!(x.c, y.c);
        assert_eq!(x.eta1, y.eta2);
        assert_eq!(x.eta2, y.eta1);
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let p = SimParams::default();
    let run = || simulate(&make_initial(0.2, 494, grid(32), 0.02).unwrap(), &p, 4, 5).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn mass_is_conserved_over_long_runs() {
    for form in [SpatialForm::FullBiharmonic, SpatialForm::AxisQuartic] {
        let p = SimParams {
            ch_spatial_form: form,
            ..SimParams::default()
        };
        let s = make_initial(0.24, 7410, grid(32), 0.05).unwrap();
        let t = simulate(&s, &p, 50, 10).unwrap();
        let m0 = s.c.mean();
        let drift = t.frames().iter().map(|f| (f.c.mean() - m0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "{form}: {drift}");
    }
}

fn energies(t: &Trajectory) -> Vec<f64> {
    let ev = EnergyEvaluator::new(t.grid().clone(), t.params()).unwrap();
    t.frames().iter().map(|f| ev.evaluate(f).unwrap().total()).collect()
}

#[test]
fn energy_decreases_for_both_spatial_forms() {
    for form in [SpatialForm::FullBiharmonic, SpatialForm::AxisQuartic] {
        let p = SimParams {
            ch_spatial_form: form,
            ..SimParams::default()
        };
        let t = simulate(&make_initial(0.21, 1111, grid(32), 0.05).unwrap(), &p, 30, 5).unwrap();
        let e = energies(&t);
        let tol = 1e-8 * e[0].abs();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + tol), "{form}: {e:?}");
    }
}

#[test]
fn eta_relaxes_towards_zero_at_default_coefficients() {
    // with A₂(1 − c) > 0 the untransformed matrix is stable; noise must decay
    let t = simulate(&make_initial(0.2, 494, grid(32), 0.05).unwrap(), &SimParams::default(), 20, 10).unwrap();
    let first = t.frames()[0].eta1.max_abs();
    let last = t.frames()[19].eta1.max_abs();
    assert!(last < 0.1 * first, "{first} -> {last}");
}

#[test]
fn stepper_rejects_foreign_grid() {
    let p = SimParams::default();
    let stepper = thetaprime_core::Stepper::new(grid(16), &p).unwrap();
    let other: FieldSet = make_initial(0.2, 1, grid(8), 0.01).unwrap();
    assert!(stepper.step(&other).is_err());
}
