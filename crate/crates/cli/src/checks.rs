//! Verification checks, looked up by name.
//!
//! Each check draws from its own `ChaCha20Rng::seed_from_u64(seed)` with the
//! stream set to the 64-bit FNV-1a hash of the check name, so adding or
//! deselecting a check never shifts another check's samples.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use extem::angular_momentum::{decompose, moment_divergence_at, pi_flux};
use extem::estimators::EstimatorRegistry;
use extem::field_config::{maxwell_residuals, stress_divergence_at, ModeSet};
use extem::index_algebra::{grade_basis, IndexList, Signature};
use extem::multivector::{dot, left_interior, wedge, Multivector};
use extem::sampling::{complex_multivector, point};
use extem::tensor_algebra::{odot, owedge, stress_components, stress_tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::ScenarioConfig;

pub struct CheckContext<'a> {
    pub config: &'a ScenarioConfig,
    pub modes: &'a ModeSet,
}

impl CheckContext<'_> {
    fn sig(&self) -> Signature {
        self.modes.sig()
    }

    fn r(&self) -> usize {
        self.modes.r()
    }

    fn trials(&self) -> usize {
        self.config.verify.trials
    }

    fn points(&self) -> usize {
        self.config.verify.points
    }

    /// Sample points within three spatial envelope widths of the packet.
    fn sample_point(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let width = 3.0 / (2.0 * PI * self.config.packet.spread);
        point(rng, self.sig().dim(), width.min(10.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    /// Largest residual, already divided by the check's natural scale.
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;
    /// Checks that evaluate the scenario's field pass trivially when it is empty.
    fn needs_field(&self) -> bool;
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome>;
}

pub fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn check_rng(seed: u64, name: &str) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

pub struct CheckRegistry {
    checks: BTreeMap<&'static str, Arc<dyn Check>>,
    order: Vec<&'static str>,
}

impl CheckRegistry {
    pub fn new() -> Self {
        CheckRegistry { checks: BTreeMap::new(), order: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::new();
        let all: [Arc<dyn Check>; 9] = [
            Arc::new(InteriorIdentities),
            Arc::new(OdotSymmetry),
            Arc::new(StressOracle),
            Arc::new(Gauge),
            Arc::new(Maxwell),
            Arc::new(DivergenceIdentity),
            Arc::new(Conservation),
            Arc::new(OracleTriangle),
            Arc::new(AlphaShift),
        ];
        for c in all {
            reg.register(c).expect("distinct names");
        }
        reg
    }

    pub fn register(&mut self, check: Arc<dyn Check>) -> Result<(), String> {
        let name = check.name();
        if self.checks.insert(name, check).is_some() {
            return Err(format!("check '{name}' registered twice"));
        }
        self.order.push(name);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Check>> {
        self.checks.get(name)
    }

    /// Names in registration order.
    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.order.iter().copied()
    }
}

impl Default for CheckRegistry {
    fn default() -> Self {
        Self::new()
    }
}

fn sign(p: usize) -> f64 {
    if p.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1e-300)
}

/// `(Σ 2 w/(2χ) max|F̂|, 2π max|ξ| · same)`: bounds on `|F|` and `|∂F|`.
fn field_bounds(ms: &ModeSet) -> (f64, f64) {
    let f: f64 = ms.modes().iter().map(|m| 2.0 * m.measure() * m.fhat().max_abs()).sum();
    (f, 2.0 * PI * ms.max_frequency() * f)
}

/// `2π Σ w/(2χ) ‖Â‖²`, the natural size of `S`.
pub fn spin_scale(ms: &ModeSet) -> f64 {
    2.0 * PI * ms.modes().iter().map(|m| m.measure() * m.amp().norm().powi(2)).sum::<f64>()
}

/// `2π max|ξ| Σ w/(2χ) ‖∂Â‖‖Â‖`, the natural size of `L`.
pub fn orbital_scale(ms: &ModeSet) -> f64 {
    let s: f64 = ms
        .modes()
        .iter()
        .map(|m| {
            let g: f64 = m.amp_grad().map_or(0.0, |gs| gs.iter().map(|g| g.norm()).sum());
            m.measure() * g * m.amp().norm()
        })
        .sum();
    2.0 * PI * ms.max_frequency() * s
}

struct InteriorIdentities;
struct OdotSymmetry;
struct StressOracle;
struct Gauge;
struct Maxwell;
struct DivergenceIdentity;
struct Conservation;
struct OracleTriangle;
struct AlphaShift;

impl Check for InteriorIdentities {
    fn name(&self) -> &'static str {
        "interior_identities"
    }
    fn needs_field(&self) -> bool {
        false
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let sig = ctx.sig();
        let d = sig.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..ctx.trials() {
            let r = rng.gen_range(2..=d.min(4));
            let u = complex_multivector(rng, sig, 1);
            let v = complex_multivector(rng, sig, 1);
            let vp = complex_multivector(rng, sig, 1);
            let w = complex_multivector(rng, sig, r);
            let wp = complex_multivector(rng, sig, r);
            let h = complex_multivector(rng, sig, r - 1);

            let lhs = left_interior(&u, &left_interior(&v, &w)?)?;
            let rhs = -&left_interior(&v, &left_interior(&u, &w)?)?;
            worst = worst.max(rel((&lhs - &rhs).max_abs(), u.norm() * v.norm() * w.norm()));

            if r < d {
                let lhs = left_interior(&u, &wedge(&v, &w)?)?;
                let mut rhs = w.scale(dot(&u, &v) * sign(r));
                rhs += &wedge(&v, &left_interior(&u, &w)?)?;
                worst = worst.max(rel((&lhs - &rhs).max_abs(), u.norm() * v.norm() * w.norm()));

                let lhs =
                    dot(&wedge(&v, &w)?, &wedge(&vp, &wp)?) + dot(&left_interior(&vp, &w)?, &left_interior(&v, &wp)?);
                let rhs = dot(&v, &vp) * dot(&w, &wp);
                worst = worst.max(rel((lhs - rhs).norm(), v.norm() * vp.norm() * w.norm() * wp.norm()));
            }

            let lhs = dot(&wedge(&u, &h)?, &w);
            let rhs = dot(&left_interior(&u, &w)?, &h) * sign(r - 1);
            worst = worst.max(rel((lhs - rhs).norm(), u.norm() * h.norm() * w.norm()));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-12, samples: ctx.trials() })
    }
}

impl Check for OdotSymmetry {
    fn name(&self) -> &'static str {
        "odot_symmetry"
    }
    fn needs_field(&self) -> bool {
        false
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let mut worst: f64 = 0.0;
        for _ in 0..ctx.trials() {
            let a = complex_multivector(rng, ctx.sig(), ctx.r());
            let b = complex_multivector(rng, ctx.sig(), ctx.r());
            let t = odot(&a, &b)?.add(&owedge(&a, &b)?);
            worst = worst.max(rel(t.asymmetry(), a.norm() * b.norm()));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-12, samples: ctx.trials() })
    }
}

impl Check for StressOracle {
    fn name(&self) -> &'static str {
        "stress_oracle"
    }
    fn needs_field(&self) -> bool {
        false
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let mut worst: f64 = 0.0;
        for _ in 0..ctx.trials() {
            let f = complex_multivector(rng, ctx.sig(), ctx.r());
            let diff = stress_tensor(&f)?.max_diff(&stress_components(&f)?);
            worst = worst.max(rel(diff, f.norm().powi(2)));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-12, samples: ctx.trials() })
    }
}

impl Check for Gauge {
    fn name(&self) -> &'static str {
        "gauge"
    }
    fn needs_field(&self) -> bool {
        true
    }
    fn run(&self, ctx: &CheckContext, _rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let ms = ctx.modes;
        let sig = ms.sig();
        let ell = ms.ell();
        let e_ell = Multivector::basis_vector(sig, ell)?;
        let mut worst: f64 = 0.0;
        for m in ms.modes() {
            let xi = Multivector::vector(sig, &m.xi_plus(ell))?;
            let a = m.amp().norm();
            let coulomb = left_interior(&e_ell, m.amp())?.max_abs();
            let lorenz = left_interior(&xi, m.amp())?.max_abs();
            worst = worst.max(rel(coulomb, a)).max(rel(lorenz, a * (1.0 + xi.norm())));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-12, samples: ms.len() })
    }
}

impl Check for Maxwell {
    fn name(&self) -> &'static str {
        "maxwell"
    }
    fn needs_field(&self) -> bool {
        true
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let (_, db) = field_bounds(ctx.modes);
        let mut worst: f64 = 0.0;
        for _ in 0..ctx.points() {
            let x = ctx.sample_point(rng);
            let (div, curl) = maxwell_residuals(ctx.modes, &x)?;
            worst = worst.max(rel(div.max_abs().max(curl.max_abs()), db));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-10, samples: ctx.points() })
    }
}

impl Check for DivergenceIdentity {
    fn name(&self) -> &'static str {
        "divergence_identity"
    }
    fn needs_field(&self) -> bool {
        true
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let ms = ctx.modes;
        let d = ms.sig().dim();
        let (fb, db) = field_bounds(ms);
        let mut worst: f64 = 0.0;
        for _ in 0..ctx.points() {
            let x = ctx.sample_point(rng);
            let alpha = point(rng, d, 1.0);
            let lhs = moment_divergence_at(ms, &x, &alpha)?;
            let arm: Vec<f64> = x.iter().zip(&alpha).map(|(a, b)| a - b).collect();
            let rhs = wedge(&Multivector::vector(ms.sig(), &arm)?, &stress_divergence_at(ms, &x)?)?;
            let arm_norm = arm.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = fb * (fb + db * (1.0 + arm_norm)) * d as f64;
            worst = worst.max(rel((&lhs - &rhs).max_abs(), scale));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-10, samples: ctx.points() })
    }
}

impl Check for Conservation {
    fn name(&self) -> &'static str {
        "conservation"
    }
    fn needs_field(&self) -> bool {
        true
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let ms = ctx.modes;
        let d = ms.sig().dim();
        let (fb, db) = field_bounds(ms);
        let mut worst: f64 = 0.0;
        for _ in 0..ctx.points() {
            let x = ctx.sample_point(rng);
            let alpha = point(rng, d, 1.0);
            let div = stress_divergence_at(ms, &x)?;
            worst = worst.max(rel(div.max_abs(), fb * db * d as f64));
            let arm: f64 = x.iter().zip(&alpha).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let m = moment_divergence_at(ms, &x, &alpha)?;
            worst = worst.max(rel(m.max_abs(), fb * (fb + db * (1.0 + arm)) * d as f64));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-10, samples: ctx.points() })
    }
}

fn pairs_without(d: usize, ell: usize) -> impl Iterator<Item = IndexList> {
    grade_basis(d, 2).iter().copied().filter(move |p| !p.contains(ell))
}

impl Check for OracleTriangle {
    fn name(&self) -> &'static str {
        "oracle_triangle"
    }
    fn needs_field(&self) -> bool {
        true
    }
    fn run(&self, ctx: &CheckContext, _rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let ms = ctx.modes;
        let reg = EstimatorRegistry::builtin();
        let (ss, os) = (spin_scale(ms), orbital_scale(ms));
        let mut worst: f64 = 0.0;
        let mut samples = 0;
        for p in pairs_without(ms.sig().dim(), ms.ell()) {
            worst = worst.max(rel(reg.spin_spread(ms, p)?, ss));
            worst = worst.max(rel(reg.orbital_spread(ms, p)?, os));
            samples += 1;
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-10, samples })
    }
}

impl Check for AlphaShift {
    fn name(&self) -> &'static str {
        "alpha_shift"
    }
    fn needs_field(&self) -> bool {
        true
    }
    fn run(&self, ctx: &CheckContext, rng: &mut ChaCha20Rng) -> extem::Result<CheckOutcome> {
        let ms = ctx.modes;
        let sig = ms.sig();
        let x_ell = ctx.config.flux.x_ell;
        let base = decompose(ms, x_ell, &vec![0.0; sig.dim()])?;
        let pi = pi_flux(ms);
        let trials = ctx.trials().min(8);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let alpha = point(rng, sig.dim(), 2.0);
            let moved = decompose(ms, x_ell, &alpha)?;
            let expect = &base.omega - &wedge(&Multivector::vector(sig, &alpha)?, &pi)?;
            let size = pi.max_abs() * 2.0 + base.omega.max_abs();
            worst = worst.max(rel((&moved.omega - &expect).max_abs(), size));
        }
        Ok(CheckOutcome { max_residual: worst, tolerance: 1e-12, samples: trials })
    }
}
