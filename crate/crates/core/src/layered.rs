//! Layered ensembles of shift-periodic quantizers with a prescribed continuous error law.
//!
//! For a unimodal elliptical density `f(x) = g(‖M⁻¹(x − c)‖)/|det M|` every superlevel set
//! `A_r = {x : f(x) ≥ r}` is the ellipsoid `ρ(r)·M·B_n + c`. Drawing `(z, R)` uniformly under
//! the graph of `f` gives a level `R` with density `μ(A_R)`; a unit-ball quantizer mapped
//! onto `A_R` and used with subtractive dither then has error `Unif(A_R)`, and mixing over
//! `R` yields error exactly `f`, independent of the input.

use alloc::format;
use alloc::vec::Vec;

use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dissect::DissectConfig;
use crate::dither::{transmit_framed, NyquistDither, Transmission};
use crate::error::{check_dim, Error, Result};
use crate::lattice::{hexagonal_unit_disk_scale, BasicCell, Lattice, NamedLattice};
use crate::linalg::{unit_ball_volume, Matrix, Vector};
use crate::quantizer::{Frame, ShiftPeriodicQuantizer};
use crate::region::Region;

/// Points of the tabulated radial CDF used to sample custom profiles.
const CUSTOM_CDF_POINTS: usize = 4096;

/// Radial profile of an elliptical density, in standardized coordinates `ρ = ‖M⁻¹(x − c)‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `g(ρ) ∝ exp(−ρ²/(2σ²))`.
    Gaussian { sigma: f64 },
    /// `g(ρ) ∝ exp(−ερ)`.
    GeoLaplace { epsilon: f64 },
    /// Non-increasing piecewise-linear `g` through `(radii[i], values[i])`, zero beyond the
    /// last radius; rescaled to integrate to one.
    CustomRadial { radii: Vec<f64>, values: Vec<f64> },
}

/// `f(x) = g(‖M⁻¹(x − c)‖) / |det M|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensitySpec", into = "DensitySpec")]
pub struct EllipticalDensity {
    profile: RadialProfile,
    n: usize,
    shape: Matrix,
    shape_inverse: Matrix,
    det_abs: f64,
    center: Vector,
    /// `g(0)` after normalization.
    g0: f64,
    /// Normalized custom profile values and the tabulated radial CDF.
    custom: Option<CustomTable>,
}

#[derive(Clone, Debug, PartialEq)]
struct CustomTable {
    radii: Vec<f64>,
    values: Vec<f64>,
    cdf_radii: Vec<f64>,
    cdf: Vec<f64>,
}

impl CustomTable {
    fn new(n: usize, radii: &[f64], values: &[f64]) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(Error::Config(
                "custom profile needs at least two (radius, value) pairs of equal length".into(),
            ));
        }
        if radii[0] != 0.0
            || radii.windows(2).any(|w| !(w[1] > w[0]))
            || !radii.iter().all(|r| r.is_finite())
        {
            return Err(Error::Config(
                "custom profile radii must start at 0 and increase strictly".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
            || values.windows(2).any(|w| w[1] > w[0])
            || values[0] <= 0.0
        {
            return Err(Error::Config(
                "custom profile values must be finite, non-negative and non-increasing".into(),
            ));
        }
        let raw = CustomTable {
            radii: radii.to_vec(),
            values: values.to_vec(),
            cdf_radii: Vec::new(),
            cdf: Vec::new(),
        };
        let r_max = *radii.last().expect("non-empty");
        // Uniform grid plus the table breakpoints, so Simpson is exact on every polynomial piece.
        let mut grid: Vec<f64> = (0..CUSTOM_CDF_POINTS)
            .map(|i| r_max * i as f64 / (CUSTOM_CDF_POINTS - 1) as f64)
            .collect();
        grid.extend_from_slice(radii);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let shell =
            |r: f64| n as f64 * unit_ball_volume(n) * libm::pow(r, n as f64 - 1.0) * raw.eval(r);
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            acc += (b - a) / 6.0 * (shell(a) + 4.0 * shell((a + b) / 2.0) + shell(b));
            cdf.push(acc);
        }
        let cdf_radii = grid;
        if !(acc > 0.0) {
            return Err(Error::Config("custom profile has zero mass".into()));
        }
        Ok(CustomTable {
            radii: raw.radii,
            values: raw.values.iter().map(|v| v / acc).collect(),
            cdf_radii,
            cdf: cdf.iter().map(|c| c / acc).collect(),
        })
    }

    fn eval(&self, r: f64) -> f64 {
        let last = self.radii.len() - 1;
        if r > self.radii[last] {
            return 0.0;
        }
        let i = self.radii.partition_point(|&x| x <= r).clamp(1, last);
        let (r0, r1) = (self.radii[i - 1], self.radii[i]);
        let t = (r - r0) / (r1 - r0);
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }

    /// Largest `ρ` with `g(ρ) ≥ level`.
    fn superlevel(&self, level: f64) -> f64 {
        let mut best = 0.0;
        for i in 1..self.radii.len() {
            let (g0, g1) = (self.values[i - 1], self.values[i]);
            if g1 >= level {
                best = self.radii[i];
            } else if g0 >= level {
                let t = (g0 - level) / (g0 - g1);
                best = self.radii[i - 1] + t * (self.radii[i] - self.radii[i - 1]);
                break;
            } else {
                break;
            }
        }
        best
    }

    fn sample_radius(&self, u: f64) -> f64 {
        let i = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.cdf_radii[i - 1] + t * (self.cdf_radii[i] - self.cdf_radii[i - 1])
    }
}

#[derive(Serialize, Deserialize)]
struct DensitySpec {
    #[serde(flatten)]
    profile: RadialProfile,
    n: usize,
    shape: Matrix,
    center: Vector,
}

impl TryFrom<DensitySpec> for EllipticalDensity {
    type Error = Error;
    fn try_from(s: DensitySpec) -> Result<Self> {
        EllipticalDensity::new(s.profile, s.shape, s.center)
    }
}

impl From<EllipticalDensity> for DensitySpec {
    fn from(d: EllipticalDensity) -> Self {
        DensitySpec {
            profile: d.profile,
            n: d.n,
            shape: d.shape,
            center: d.center,
        }
    }
}

/// A level drawn by [`EllipticalDensity::sample_level`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    /// Density level `R`.
    pub r: f64,
    /// `ρ(R)`: `A_R = ρ·M·B_n + c`.
    pub radius: f64,
    /// The point `z ∼ f` the level was drawn under.
    pub z: Vector,
}

impl EllipticalDensity {
    pub fn new(profile: RadialProfile, shape: Matrix, center: Vector) -> Result<Self> {
        let n = shape.dim();
        check_dim(n, center.len())?;
        if !shape.is_finite() || !center.is_finite() {
            return Err(Error::Config("shape and center must be finite".into()));
        }
        let shape_inverse = shape.inverse()?;
        let det_abs = libm::fabs(shape.det());
        let mut custom = None;
        let g0 = match &profile {
            RadialProfile::Gaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Config(format!(
                        "sigma must be positive, got {sigma}"
                    )));
                }
                libm::pow(2.0 * PI * sigma * sigma, -(n as f64) / 2.0)
            }
            RadialProfile::GeoLaplace { epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::Config(format!(
                        "epsilon must be positive, got {epsilon}"
                    )));
                }
                // ∫ e^{−ερ} dx = n μ(B_n) Γ(n) / εⁿ.
                libm::pow(*epsilon, n as f64)
                    / (n as f64 * unit_ball_volume(n) * libm::tgamma(n as f64))
            }
            RadialProfile::CustomRadial { radii, values } => {
                let t = CustomTable::new(n, radii, values)?;
                let g0 = t.values[0];
                custom = Some(t);
                g0
            }
        };
        Ok(EllipticalDensity {
            profile,
            n,
            shape,
            shape_inverse,
            det_abs,
            center,
            g0,
            custom,
        })
    }

    /// Isotropic Gaussian `N(0, σ²I_n)`.
    pub fn gaussian(n: usize, sigma: f64) -> Result<Self> {
        Self::new(
            RadialProfile::Gaussian { sigma },
            Matrix::identity(n),
            Vector::zeros(n),
        )
    }

    /// Isotropic density proportional to `exp(−ε‖x‖)`.
    pub fn geo_laplace(n: usize, epsilon: f64) -> Result<Self> {
        Self::new(
            RadialProfile::GeoLaplace { epsilon },
            Matrix::identity(n),
            Vector::zeros(n),
        )
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &Matrix {
        &self.shape
    }

    pub fn center(&self) -> Vector {
        self.center
    }

    /// Standardized radial profile `g(ρ)`.
    pub fn radial(&self, rho: f64) -> f64 {
        match (&self.profile, &self.custom) {
            (RadialProfile::Gaussian { sigma }, _) => {
                self.g0 * libm::exp(-rho * rho / (2.0 * sigma * sigma))
            }
            (RadialProfile::GeoLaplace { epsilon }, _) => self.g0 * libm::exp(-epsilon * rho),
            (_, Some(t)) => t.eval(rho),
            _ => unreachable!("custom profiles always carry a table"),
        }
    }

    /// Peak density `C = f(c)`.
    pub fn peak(&self) -> f64 {
        self.g0 / self.det_abs
    }

    pub fn density(&self, x: &Vector) -> f64 {
        self.radial(self.shape_inverse.mul_vec(&(*x - self.center)).norm()) / self.det_abs
    }

    /// `ρ(r)` with `A_r = ρ(r)·M·B_n + c`, for `0 < r ≤ C`.
    pub fn superlevel_radius(&self, r: f64) -> Result<f64> {
        let c = self.peak();
        if !(r > 0.0 && r <= c) {
            return Err(Error::Domain(format!("density level {r} outside (0, {c}]")));
        }
        let ratio = r / c;
        Ok(match (&self.profile, &self.custom) {
            (RadialProfile::Gaussian { sigma }, _) => {
                sigma * libm::sqrt((-2.0 * libm::log(ratio)).max(0.0))
            }
            (RadialProfile::GeoLaplace { epsilon }, _) => (-libm::log(ratio)).max(0.0) / epsilon,
            (_, Some(t)) => t.superlevel(r * self.det_abs),
            _ => unreachable!("custom profiles always carry a table"),
        })
    }

    /// The ellipsoid `A_r`.
    pub fn superlevel_set(&self, r: f64) -> Result<Region> {
        let rho = self.superlevel_radius(r)?;
        if rho == 0.0 {
            return Err(Error::Domain(
                "superlevel set at the peak is a single point".into(),
            ));
        }
        Region::ellipsoid(self.shape.scale(rho), self.center)
    }

    /// `μ(A_r)`, the density of the level `R`.
    pub fn level_density(&self, r: f64) -> Result<f64> {
        let rho = self.superlevel_radius(r)?;
        Ok(unit_ball_volume(self.n) * libm::pow(rho, self.n as f64) * self.det_abs)
    }

    /// Standardized radius `‖M⁻¹(z − c)‖` of a draw `z ∼ f`.
    fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match (&self.profile, &self.custom) {
            (RadialProfile::Gaussian { sigma }, _) => {
                let s: f64 = (0..self.n)
                    .map(|_| libm::pow(StandardNormal.sample(rng), 2.0))
                    .sum();
                sigma * libm::sqrt(s)
            }
            (RadialProfile::GeoLaplace { epsilon }, _) => Gamma::new(self.n as f64, 1.0 / epsilon)
                .expect("positive parameters")
                .sample(rng),
            (_, Some(t)) => t.sample_radius(rng.random::<f64>()),
            _ => unreachable!("custom profiles always carry a table"),
        }
    }

    /// Draw `z ∼ f`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let rho = self.sample_radius(rng);
        self.center
            + self
                .shape
                .mul_vec(&uniform_direction(self.n, rng).scale(rho))
    }

    /// Draw `z ∼ f` and `R ∼ Unif(0, f(z))`; `R` then has density `μ(A_r)`.
    pub fn sample_level<R: Rng + ?Sized>(&self, rng: &mut R) -> Level {
        loop {
            let z = self.sample(rng);
            let fz = self.density(&z);
            let r = fz * (1.0 - rng.random::<f64>());
            if let Ok(radius) = self.superlevel_radius(r) {
                if radius > 0.0 {
                    return Level { r, radius, z };
                }
            }
        }
    }

    /// Frame mapping the unit ball onto `A_r = ρ·M·B_n + c`.
    pub fn level_frame(&self, radius: f64) -> Result<Frame> {
        Frame::new(self.shape.scale(radius), self.center)
    }
}

/// Uniform direction on the unit sphere.
pub fn uniform_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    loop {
        let g = Vector::from_fn(n, |_| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 1e-12 {
            return g.scale(1.0 / norm);
        }
    }
}

/// Quantizer with error `Unif(ρ·M·B_n + c)` obtained from a unit-ball quantizer.
pub fn transform_quantizer(
    unit: &ShiftPeriodicQuantizer,
    m: &Matrix,
    c: &Vector,
    rho: f64,
) -> Result<ShiftPeriodicQuantizer> {
    check_unit_ball(unit)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("scale must be positive, got {rho}")));
    }
    unit.transformed(&Frame::new(m.scale(rho), *c)?)
}

fn check_unit_ball(q: &ShiftPeriodicQuantizer) -> Result<()> {
    if !q.target().is_unit_ball() || q.frame().is_some() {
        return Err(Error::Precondition(
            "quantizer target must be the unit ball".into(),
        ));
    }
    Ok(())
}

/// Shipped unit-ball quantizers: interval (n = 1), hexagonal (n = 2) and FCC (n = 3).
pub fn unit_ball_quantizer(n: usize, cfg: &DissectConfig) -> Result<ShiftPeriodicQuantizer> {
    let ball = Region::unit_ball(n);
    let lattice = match n {
        1 => Lattice::cubic(1, 2.0)?,
        2 => Lattice::named(NamedLattice::Hexagonal, 2, hexagonal_unit_disk_scale())?,
        3 => Lattice::named_with_volume(NamedLattice::Fcc, 3, unit_ball_volume(3))?,
        _ => {
            return Err(Error::Config(format!(
                "no shipped unit-ball quantizer for n = {n}"
            )))
        }
    };
    ShiftPeriodicQuantizer::build_q2(lattice, BasicCell::Voronoi, ball, cfg)
}

/// Output of one use of the layered channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayeredTransmission {
    pub level: Level,
    pub transmission: Transmission,
}

/// Layered ensemble: a density plus one unit-ball quantizer rescaled to every level.
#[derive(Clone, Debug)]
pub struct LayeredChannel<'a> {
    density: &'a EllipticalDensity,
    quantizer: &'a ShiftPeriodicQuantizer,
    dither: NyquistDither,
}

impl<'a> LayeredChannel<'a> {
    pub fn new(
        density: &'a EllipticalDensity,
        quantizer: &'a ShiftPeriodicQuantizer,
    ) -> Result<Self> {
        check_dim(density.dim(), quantizer.dim())?;
        check_unit_ball(quantizer)?;
        let dither = NyquistDither::uniform_voronoi(quantizer.lattice().clone());
        Ok(LayeredChannel {
            density,
            quantizer,
            dither,
        })
    }

    pub fn density(&self) -> &EllipticalDensity {
        self.density
    }

    pub fn quantizer(&self) -> &ShiftPeriodicQuantizer {
        self.quantizer
    }

    /// Send `x`: draw a level, rescale the quantizer to it, dither, quantize and subtract.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> LayeredTransmission {
        let level = self.density.sample_level(rng);
        let frame = self
            .density
            .level_frame(level.radius)
            .expect("positive radius and full-rank shape");
        let view = self.quantizer.view(&frame);
        let transmission = transmit_framed(&view, &self.dither, x, rng);
        LayeredTransmission {
            level,
            transmission,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::uniform_in_box;
    use crate::rng::substream;
    use std::sync::OnceLock;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x)
    }

    fn disk_quantizer() -> &'static ShiftPeriodicQuantizer {
        static Q: OnceLock<ShiftPeriodicQuantizer> = OnceLock::new();
        Q.get_or_init(|| {
            let cfg = DissectConfig {
                budget: 50_000,
                volume_budget: 200_000,
                ..DissectConfig::default()
            };
            unit_ball_quantizer(2, &cfg).unwrap()
        })
    }

    #[test]
    fn gaussian_superlevel_examples() {
        let f = EllipticalDensity::gaussian(1, 1.0).unwrap();
        assert!((f.peak() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(f.superlevel_radius(f.peak()).unwrap(), 0.0);
        assert!((f.superlevel_radius(f.density(&v(&[1.0]))).unwrap() - 1.0).abs() < 1e-12);
        assert!(f.superlevel_radius(f.peak() * 1.01).is_err());
        assert!(f.superlevel_radius(0.0).is_err());
    }

    #[test]
    fn geo_laplace_superlevel_examples() {
        let f = EllipticalDensity::geo_laplace(2, 1.0).unwrap();
        // Radial integral oracle: ∫₀^∞ 2πρ e^{−ρ} dρ = 2π by the trapezoid rule.
        let h = 1e-3;
        let integral: f64 = (0..60_000)
            .map(|i| i as f64 * h)
            .map(|r| 2.0 * PI * r * (-r).exp() * h)
            .sum();
        assert!((f.peak() - 1.0 / integral).abs() < 1e-6);
        assert!((f.superlevel_radius(f.peak() * (-2.0f64).exp()).unwrap() - 2.0).abs() < 1e-12);
        for (n, c) in [(1, 0.5), (2, 1.0 / (2.0 * PI)), (3, 1.0 / (8.0 * PI))] {
            assert!((EllipticalDensity::geo_laplace(n, 1.0).unwrap().peak() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn elliptical_peak_includes_shape_determinant() {
        let m = Matrix::diagonal(&v(&[1.0, 2.0]));
        let f = EllipticalDensity::new(RadialProfile::Gaussian { sigma: 1.0 }, m, v(&[1.0, -1.0]))
            .unwrap();
        assert!((f.peak() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(f.density(&v(&[1.0, -1.0])), f.peak());
        let a = f.superlevel_set(f.peak() / 2.0).unwrap();
        assert!(a.contains(&f.center()));
    }

    #[test]
    fn densities_integrate_to_one() {
        let densities = [
            EllipticalDensity::gaussian(2, 1.0).unwrap(),
            EllipticalDensity::geo_laplace(2, 2.0).unwrap(),
            EllipticalDensity::new(
                RadialProfile::CustomRadial {
                    radii: vec![0.0, 1.0, 2.0],
                    values: vec![3.0, 1.0, 0.0],
                },
                Matrix::diagonal(&v(&[1.0, 0.5])),
                v(&[0.3, 0.0]),
            )
            .unwrap(),
        ];
        for f in &densities {
            let (lo, hi) = (v(&[-10.0, -10.0]), v(&[10.0, 10.0]));
            let mut rng = substream(1, 0);
            let n = 400_000;
            let vals: Vec<f64> = (0..n)
                .map(|_| 400.0 * f.density(&uniform_in_box(&lo, &hi, &mut rng)))
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sd =
                (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64)
                    .sqrt();
            assert!(
                (mean - 1.0).abs() <= 3.0 * sd,
                "{:?}: {mean} ± {sd}",
                f.profile()
            );
        }
    }

    #[test]
    fn custom_profile_superlevels() {
        let f = EllipticalDensity::new(
            RadialProfile::CustomRadial {
                radii: vec![0.0, 1.0, 2.0],
                values: vec![2.0, 2.0, 0.0],
            },
            Matrix::identity(1),
            Vector::zeros(1),
        )
        .unwrap();
        // Unnormalized mass is 2·∫g = 2·(2 + 1) = 6.
        assert!((f.peak() - 2.0 / 6.0).abs() < 1e-9);
        assert!((f.superlevel_radius(f.peak()).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.superlevel_radius(f.peak() / 2.0).unwrap() - 1.5).abs() < 1e-12);
        let bad = RadialProfile::CustomRadial {
            radii: vec![0.0, 1.0],
            values: vec![1.0, 2.0],
        };
        assert!(EllipticalDensity::new(bad, Matrix::identity(1), Vector::zeros(1)).is_err());
    }

    #[test]
    fn level_density_matches_superlevel_volume() {
        // R has density 2ρ(r) for the standard normal on the line: compare bin masses.
        let f = EllipticalDensity::gaussian(1, 1.0).unwrap();
        let mut rng = substream(2, 0);
        let n = 100_000;
        let bins = 20;
        let c = f.peak();
        let mut counts = vec![0usize; bins];
        for _ in 0..n {
            let l = f.sample_level(&mut rng);
            assert!(l.radius >= (l.z - f.center()).norm() - 1e-12);
            counts[((l.r / c * bins as f64) as usize).min(bins - 1)] += 1;
        }
        for (i, &k) in counts.iter().enumerate() {
            let m = 2000;
            let h = c / bins as f64;
            let mass: f64 = (0..m)
                .map(|j| {
                    f.level_density((i as f64 + (j as f64 + 0.5) / m as f64) * h)
                        .unwrap()
                        * h
                        / m as f64
                })
                .sum();
            let expected = mass * n as f64;
            assert!(
                (k as f64 - expected).abs() < 5.0 * expected.sqrt() + 5.0,
                "bin {i}: {k} vs {expected}"
            );
        }
    }

    #[test]
    fn transform_identity_and_preconditions() {
        let q = disk_quantizer();
        let t = transform_quantizer(q, &Matrix::identity(2), &Vector::zeros(2), 1.0).unwrap();
        for x in [v(&[0.2, 0.7]), v(&[-3.3, 5.1])] {
            assert_eq!(t.quantize(&x), q.quantize(&x));
        }
        assert!(transform_quantizer(&t, &Matrix::identity(2), &Vector::zeros(2), 2.0).is_err());
        assert!(transform_quantizer(q, &Matrix::zeros(2), &Vector::zeros(2), 1.0).is_err());
    }

    #[test]
    fn layered_gaussian_second_moment() {
        let q = disk_quantizer();
        for sigma in [0.5, 2.0] {
            let f = EllipticalDensity::gaussian(2, sigma).unwrap();
            let ch = LayeredChannel::new(&f, q).unwrap();
            let x = v(&[1.5, -0.25]);
            let mut rng = substream(3, 0);
            let n = 40_000;
            let mse = (0..n)
                .map(|_| ch.transmit(&x, &mut rng).transmission.error(&x).norm_sq())
                .sum::<f64>()
                / n as f64;
            let expected = 2.0 * sigma * sigma;
            assert!(
                (mse / expected - 1.0).abs() < 0.05,
                "σ = {sigma}: {mse} vs {expected}"
            );
        }
    }
}
