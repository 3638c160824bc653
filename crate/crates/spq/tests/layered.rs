//! Frames and the layered channel, checked against the unit-ball quantizer they are built from.

use std::sync::OnceLock;

use proptest::prelude::*;

use spq::eval::{empirical_tv, noise_floor_bins, tv_between, Grid, TV_SLACK};
use spq::par::collect_shards;
use spq::presets::summarize;
use spq_core::dissect::DissectConfig;
use spq_core::dither::DitheredChannel;
use spq_core::layered::{
    transform_quantizer, unit_ball_quantizer, EllipticalDensity, LayeredChannel, RadialProfile,
};
use spq_core::quantizer::ShiftPeriodicQuantizer;
use spq_core::{Matrix, Region, Vector};

const SAMPLES: usize = 40_000;

fn cfg() -> DissectConfig {
    DissectConfig {
        max_pieces: 16,
        budget: 50_000,
        volume_budget: 200_000,
        ..DissectConfig::default()
    }
}

fn unit() -> &'static ShiftPeriodicQuantizer {
    static Q: OnceLock<ShiftPeriodicQuantizer> = OnceLock::new();
    Q.get_or_init(|| unit_ball_quantizer(2, &cfg()).unwrap())
}

fn v(x: &[f64]) -> Vector {
    Vector::from_slice(x)
}

fn dithered_errors(q: &ShiftPeriodicQuantizer, x: &Vector, seed: u64) -> Vec<Vector> {
    let ch = DitheredChannel::with_voronoi_dither(q);
    collect_shards(SAMPLES, seed, |rng| ch.transmit(x, rng).error(x))
}

/// Transformed errors against the ellipse, and against unit errors pushed through the same map.
fn check_transform(m: Matrix, c: Vector, rho: f64) {
    let q = transform_quantizer(unit(), &m, &c, rho).unwrap();
    let region = Region::unit_ball(2).affine(m.scale(rho), c).unwrap();
    let x = v(&[3.1, -0.4]);
    let errors = dithered_errors(&q, &x, 11);
    let bound = summarize(unit(), &cfg()).unwrap().tv_bound;
    let tv = empirical_tv(&errors, &region, noise_floor_bins(2, SAMPLES, 0.01), 12).unwrap();
    assert!(
        tv <= bound + TV_SLACK,
        "TV to the ellipse {tv} > {}",
        bound + TV_SLACK
    );

    let mapped: Vec<Vector> = dithered_errors(unit(), &Vector::zeros(2), 13)
        .iter()
        .map(|e| m.scale(rho).mul_vec(e) + c)
        .collect();
    let grid = Grid::around(&region, noise_floor_bins(2, SAMPLES, 0.01)).unwrap();
    let pair = tv_between(&grid.histogram(&errors), &grid.histogram(&mapped));
    assert!(pair <= 0.03, "two-sample TV {pair}");
}

#[test]
fn scaled_ball_frame_matches_mapped_unit_errors() {
    check_transform(Matrix::identity(2), Vector::zeros(2), 2.0);
}

#[test]
fn elliptical_frame_with_center_matches_mapped_unit_errors() {
    check_transform(Matrix::diagonal(&v(&[1.0, 2.0])), v(&[0.5, -1.0]), 0.7);
}

#[test]
fn transform_rejects_framed_input_and_bad_scale() {
    let once = transform_quantizer(unit(), &Matrix::identity(2), &Vector::zeros(2), 2.0).unwrap();
    assert!(transform_quantizer(&once, &Matrix::identity(2), &Vector::zeros(2), 1.0).is_err());
    for rho in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(
            transform_quantizer(unit(), &Matrix::identity(2), &Vector::zeros(2), rho).is_err(),
            "{rho}"
        );
    }
}

/// Within a narrow band of level radii, `M⁻¹(e − c)/ρ` follows the unit quantizer's error law.
#[test]
fn conditional_error_given_level_is_the_unit_law() {
    let shape = Matrix::diagonal(&v(&[1.0, 2.0]));
    let center = v(&[0.5, -1.0]);
    let f = EllipticalDensity::new(RadialProfile::Gaussian { sigma: 1.0 }, shape, center).unwrap();
    let channel = LayeredChannel::new(&f, unit()).unwrap();
    let x = v(&[-2.0, 1.5]);
    let inv = Matrix::diagonal(&v(&[1.0, 0.5]));
    let draws = collect_shards(4 * SAMPLES, 21, |rng| {
        let t = channel.transmit(&x, rng);
        (
            t.level.radius,
            inv.mul_vec(&(t.transmission.error(&x) - center))
                .scale(1.0 / t.level.radius),
        )
    });
    let band: Vec<Vector> = draws
        .iter()
        .filter(|d| (1.0..1.5).contains(&d.0))
        .map(|d| d.1)
        .collect();
    assert!(
        band.len() >= 10_000,
        "only {} draws in the band",
        band.len()
    );
    let reference = dithered_errors(unit(), &Vector::zeros(2), 22);
    let grid = Grid::around(&Region::unit_ball(2), 6).unwrap();
    let chi = spq::eval::chi2_two_sample(&grid.histogram(&band), &grid.histogram(&reference));
    assert!(
        chi.p_value > 0.01,
        "chi2 = {} on {} df, p = {}",
        chi.statistic,
        chi.df,
        chi.p_value
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `Q'(x + L·G·v) = Q'(x) + L·G·v` for the framed quantizer.
    #[test]
    fn framed_quantizer_is_shift_periodic(
        x in prop::array::uniform2(-5.0f64..5.0),
        k in prop::array::uniform2(-3i64..=3),
        d in prop::array::uniform2(0.3f64..3.0),
        rho in 0.2f64..4.0,
    ) {
        let q = transform_quantizer(unit(), &Matrix::diagonal(&v(&d)), &v(&[0.25, -0.5]), rho).unwrap();
        let x = v(&x);
        let shift = q.lattice().generator().mul_vec(&v(&[k[0] as f64, k[1] as f64]));
        let (a, b) = (q.quantize(&x), q.quantize(&(x + shift)));
        prop_assert!((b.q - a.q - shift).norm() < 1e-8 * (1.0 + shift.norm()));
        prop_assert!(q.error_region().unwrap().contains(&(x - a.q)) || a.residual);
    }
}
